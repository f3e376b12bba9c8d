"""Cell-distribution models and exact moments of the inverse cell probability.

A ``CellDistribution`` is the hypothesized row distribution p(1..m) on m
cells.  Three families are supported:

- ``uniform``: p(i) = 1/m,
- ``power_law``: p(i) = 1/(C_a i^a) with a in [0, 1) and C_a = sum_i i^{-a}
  computed by direct summation,
- ``custom``: user-supplied probabilities.

The moments E p^{-r}(X) = sum_i p(i)^{1-r} drive the two diagnostics exposed
here: ``s_variance_ratio`` (how far the iid part of the statistic is from
being deterministic, relative to m*n) and ``inv_moment_ratio`` (the
normalized higher moment whose boundedness licenses the normal regime).

Summation is always performed in ascending cell order, in fixed-size chunks,
so results are bit-reproducible across runs and worker processes.  Analytic
families with m >= STREAM_CELL_LIMIT never materialize an m-length array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    DataFormatError,
    InvalidInputError,
    InvalidParameterError,
    ResourceLimitError,
)

# Analytic families at or above this cell count stream their moments and
# refuse to materialize probability vectors; custom families are capped here.
STREAM_CELL_LIMIT = 10_000_000

_CHUNK = 1 << 20

UNIFORM = "uniform"
POWER_LAW = "power_law"
CUSTOM = "custom"


@dataclass(frozen=True)
class CellDistribution:
    """The row distribution on m cells, immutable after construction.

    ``alpha`` is set for the power_law family only; ``_probs`` is the
    materialized probability vector (None for streamed analytic families);
    ``_norm`` caches the power-law normalization constant.
    """

    m: int
    family: str
    alpha: float | None = None
    _probs: np.ndarray | None = field(default=None, repr=False, compare=False)
    _norm: float | None = field(default=None, repr=False, compare=False)

    @property
    def probs(self) -> np.ndarray:
        """The full probability vector; refused for streamed analytic families."""
        if self._probs is not None:
            return self._probs
        if self.family == UNIFORM:
            if self.m >= STREAM_CELL_LIMIT:
                raise ResourceLimitError(
                    f"m={self.m} uniform cells are streamed; "
                    "use prob()/moment accessors instead of the full vector"
                )
            return np.full(self.m, 1.0 / self.m)
        raise ResourceLimitError(
            f"m={self.m} power_law cells are streamed; "
            "use prob()/moment accessors instead of the full vector"
        )

    def prob(self, cells: np.ndarray | int) -> np.ndarray | float:
        """Cell probabilities for 1-based cell indices (scalar or vector)."""
        idx = np.asarray(cells, dtype=np.int64)
        if idx.size and (int(idx.min()) < 1 or int(idx.max()) > self.m):
            raise InvalidInputError(f"cell indices must lie in 1..{self.m}")
        if self.family == UNIFORM:
            if np.isscalar(cells):
                return 1.0 / self.m
            return np.full(np.shape(cells), 1.0 / self.m)
        if self.family == POWER_LAW:
            out = np.power(idx.astype(np.float64), -self.alpha) / self._norm
            return float(out) if np.isscalar(cells) else out
        out = self._probs[idx - 1]
        return float(out) if np.isscalar(cells) else out

    def cumulative(self) -> np.ndarray:
        """Cumulative probabilities for inverse-CDF sampling (last entry pinned to 1)."""
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return cum


def _validate_m(m: int) -> int:
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
        raise InvalidParameterError(f"m must be a positive integer, got {m!r}")
    return int(m)


def _power_law_norm(alpha: float, m: int) -> float:
    # direct summation of i^{-alpha}, ascending, chunked: never the asymptotic
    # closed form, which is only used as a cross-check in tests
    total = 0.0
    for start in range(1, m + 1, _CHUNK):
        stop = min(start + _CHUNK, m + 1)
        idx = np.arange(start, stop, dtype=np.float64)
        total += float(np.sum(np.power(idx, -alpha)))
    return total


def make_uniform(m: int) -> CellDistribution:
    """The uniform distribution on m cells."""
    m = _validate_m(m)
    if m < STREAM_CELL_LIMIT:
        probs = np.full(m, 1.0 / m)
        probs.flags.writeable = False
        return CellDistribution(m, UNIFORM, _probs=probs)
    return CellDistribution(m, UNIFORM)


def make_power_law(alpha: float, m: int) -> CellDistribution:
    """Power-law cells p(i) = 1/(C_a i^a), normalized by direct summation."""
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0 or not np.isfinite(alpha):
        raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha!r}")
    m = _validate_m(m)
    norm = _power_law_norm(alpha, m)
    probs = None
    if m < STREAM_CELL_LIMIT:
        idx = np.arange(1, m + 1, dtype=np.float64)
        probs = np.power(idx, -alpha) / norm
        probs.flags.writeable = False
    return CellDistribution(m, POWER_LAW, alpha=alpha, _probs=probs, _norm=norm)


def make_custom(probs) -> CellDistribution:
    """A distribution from explicit probabilities.

    The vector is renormalized only when |sum - 1| <= 1e-9; a larger
    deviation is rejected as a data error rather than silently fixed.
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("probs must be a nonempty 1-d vector")
    if arr.size > STREAM_CELL_LIMIT:
        raise ResourceLimitError(
            f"custom distributions are capped at {STREAM_CELL_LIMIT} cells, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise InvalidInputError("every cell probability must be finite and > 0")
    total = float(np.sum(arr))
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(
            f"probabilities sum to {total!r}; deviation from 1 exceeds 1e-9"
        )
    arr = arr / total
    arr.flags.writeable = False
    return CellDistribution(int(arr.size), CUSTOM, _probs=arr)


def read_probs_csv(path: str | Path) -> CellDistribution:
    """Read one probability per line (optional single header line)."""
    lines = Path(path).read_text().splitlines()
    values = []
    for ln, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            if ln == 1:
                continue  # header
            raise DataFormatError(f"{path}:{ln}: not a probability: {raw!r}") from None
    if not values:
        raise DataFormatError(f"{path}: no probabilities found")
    try:
        return make_custom(values)
    except (InvalidInputError, ResourceLimitError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def _prob_chunks(d: CellDistribution) -> Iterator[np.ndarray]:
    """Cell probabilities in ascending cell order, fixed-size chunks."""
    if d._probs is not None:
        for start in range(0, d.m, _CHUNK):
            yield d._probs[start : start + _CHUNK]
    elif d.family == UNIFORM:
        for start in range(1, d.m + 1, _CHUNK):
            stop = min(start + _CHUNK, d.m + 1)
            yield np.full(stop - start, 1.0 / d.m)
    else:
        for start in range(1, d.m + 1, _CHUNK):
            stop = min(start + _CHUNK, d.m + 1)
            idx = np.arange(start, stop, dtype=np.float64)
            yield np.power(idx, -d.alpha) / d._norm


def inv_prob_moment(d: CellDistribution, r: float) -> float:
    """E p^{-r}(X) = sum_i p(i)^{1-r}, exact for the uniform family.

    Non-decreasing in r, with value 1 at r=0 and m at r=1.
    """
    r = float(r)
    if r < 0.0 or not np.isfinite(r):
        raise InvalidParameterError(f"r must be a finite nonnegative real, got {r!r}")
    if d.family == UNIFORM:
        # sum_i (1/m)^{1-r} = m^r, exact
        return float(d.m) ** r
    total = 0.0
    for chunk in _prob_chunks(d):
        total += float(np.sum(np.power(chunk, 1.0 - r)))
    return total


def inv_prob_variance(d: CellDistribution) -> float:
    """Var p^{-1}(X) = E p^{-2}(X) - m^2; zero exactly for uniform cells."""
    if d.family == UNIFORM:
        return 0.0
    return inv_prob_moment(d, 2.0) - float(d.m) ** 2


def s_variance_ratio(d: CellDistribution, n: int) -> float:
    """Var p^{-1}(X) / (m n): the iid-part variance on the statistic's scale.

    The normal regime needs this to vanish along the schedule; callers check
    decay, this only reports the exact value.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    return inv_prob_variance(d) / (float(d.m) * float(n))


def inv_moment_ratio(d: CellDistribution, delta: float) -> float:
    """m^{-(1+delta)} E p^{-(1+delta)}(X), the normalized higher moment.

    Equals 1 for uniform cells; bounded families admit the normal regime.
    """
    delta = float(delta)
    if delta <= 0.0 or not np.isfinite(delta):
        raise InvalidParameterError(f"delta must be > 0, got {delta!r}")
    return inv_prob_moment(d, 1.0 + delta) / float(d.m) ** (1.0 + delta)

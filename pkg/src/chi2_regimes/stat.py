"""Sampling and exact computation of the chi-square statistic and its parts.

The statistic for counts N_1..N_m against cell probabilities p_1..p_m is

    chi2 = n * sum_i (N_i/n - p_i)^2 / p_i,

and it decomposes exactly as chi2 = (U + S)/n - n with

    U = sum_i N_i (N_i - 1) / p_i    (coincident-pair term),
    S = sum_i N_i / p_i              (iid inverse-probability sum).

Counts are the canonical sparse representation (the sufficient statistic);
ordered sequences are kept only for the per-step coincidence scores.  All
sums run over occupied cells in ascending cell order so results are
bit-reproducible; the empty-cell part of chi2 is the analytic closed form
n*(1 - sum_occupied p_i) for uniform/power-law cells and a dense pass for
custom cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from pathlib import Path

import numpy as np

from ._kernels import tally
from .dist import CUSTOM, UNIFORM, CellDistribution
from .errors import DataFormatError, InvalidInputError, InvalidParameterError

THEOREM = "theorem"
CLASSICAL = "classical"
CONVENTIONS = (THEOREM, CLASSICAL)


@dataclass(frozen=True)
class SampleCounts:
    """Sparse cell occupancies: counts[i] = N_i, absent index means 0."""

    n: int
    counts: dict[int, int]
    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidInputError(f"m must be >= 1, got {self.m}")
        total = 0
        for idx, cnt in self.counts.items():
            if not 1 <= idx <= self.m:
                raise InvalidInputError(f"cell index {idx} outside 1..{self.m}")
            if cnt < 0:
                raise InvalidInputError(f"negative count {cnt} at cell {idx}")
            total += cnt
        if total != self.n:
            raise InvalidInputError(
                f"counts sum to {total}, expected n = {self.n}"
            )


@dataclass(frozen=True)
class SampleSequence:
    """Ordered draws X_1..X_n of 1-based cell indices."""

    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != self.n:
            raise InvalidInputError(
                f"sequence length {len(self.values)} != n = {self.n}"
            )


@dataclass(frozen=True)
class Chi2Breakdown:
    """chi2 together with its pair term U and iid term S.

    Satisfies chi2 = (u_stat + s_stat)/n - n to 1e-9*(1+|chi2|); u_stat >= 0
    and s_stat >= n always.
    """

    chi2: float
    u_stat: float
    s_stat: float
    n: int
    m: int


def make_counts(counts: dict[int, int], m: int) -> SampleCounts:
    """Build SampleCounts from a sparse mapping, dropping zero entries."""
    cleaned = {int(i): int(c) for i, c in counts.items() if c != 0}
    return SampleCounts(sum(cleaned.values()), cleaned, m)


def _validate_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    return int(n)


def sample_cells(d: CellDistribution, n: int, stream: np.random.Generator) -> np.ndarray:
    """n iid 1-based cell indices from d (uniform: direct; else inverse CDF)."""
    n = _validate_n(n)
    if d.family == UNIFORM:
        return stream.integers(1, d.m + 1, size=n, dtype=np.int64)
    cum = d.cumulative()
    u = stream.random(n)
    return np.searchsorted(cum, u, side="right").astype(np.int64) + 1


def draw_counts(d: CellDistribution, n: int, stream: np.random.Generator) -> SampleCounts:
    """Multinomial(n, probs) occupancies in sparse form, O(min(n, m)) memory."""
    cells, reps = np.unique(sample_cells(d, n, stream), return_counts=True)
    counts = dict(zip(cells.tolist(), reps.tolist()))
    return SampleCounts(n, counts, d.m)


def draw_sequence(d: CellDistribution, n: int, stream: np.random.Generator) -> SampleSequence:
    """n ordered iid draws from d."""
    return SampleSequence(n, sample_cells(d, n, stream))


def to_counts(s: SampleSequence, m: int) -> SampleCounts:
    """Collapse an ordered sequence to its sparse occupancy counts."""
    cells, reps = np.unique(np.asarray(s.values), return_counts=True)
    return SampleCounts(s.n, dict(zip(cells.tolist(), reps.tolist())), m)


def _occupied_arrays(c: SampleCounts) -> tuple[np.ndarray, np.ndarray]:
    """(cells, counts) over occupied cells, ascending cell order."""
    items = sorted((i, cnt) for i, cnt in c.counts.items() if cnt > 0)
    if not items:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    cells, reps = zip(*items)
    return np.asarray(cells, dtype=np.int64), np.asarray(reps, dtype=np.int64)


def _check_match(d: CellDistribution, c: SampleCounts) -> None:
    if d.m != c.m:
        raise InvalidInputError(f"distribution has m={d.m} but counts have m={c.m}")


def _dense_chi_square(d: CellDistribution, c: SampleCounts) -> float:
    dense = np.zeros(d.m, dtype=np.float64)
    cells, reps = _occupied_arrays(c)
    dense[cells - 1] = reps
    expected = c.n * d.probs
    return float(np.sum((dense - expected) ** 2 / expected))


def _tally_counts(d: CellDistribution, c: SampleCounts):
    cells, reps = _occupied_arrays(c)
    probs = np.asarray(d.prob(cells), dtype=np.float64)
    return tally(reps, probs, c.n)


def chi_square(d: CellDistribution, c: SampleCounts) -> float:
    """The statistic by the direct formula.

    Sparse for analytic families: sum over occupied cells of
    (N_i - n p_i)^2/(n p_i) plus n*(1 - sum_occupied p_i) for the empty
    cells.  Dense over all m cells for custom families.
    """
    _check_match(d, c)
    if d.family == CUSTOM:
        return _dense_chi_square(d, c)
    _, _, _, chi_occ, psum = _tally_counts(d, c)
    return chi_occ + float(c.n) * (1.0 - psum)


def u_statistic(d: CellDistribution, c: SampleCounts) -> float:
    """U = sum_i N_i (N_i - 1)/p_i: only coincident pairs contribute."""
    _check_match(d, c)
    u, _, _, _, _ = _tally_counts(d, c)
    return u


def s_statistic(d: CellDistribution, c: SampleCounts) -> float:
    """S = sum_i N_i/p_i; equals n*m exactly for uniform cells."""
    _check_match(d, c)
    _, s, _, _, _ = _tally_counts(d, c)
    return s


def decompose(d: CellDistribution, c: SampleCounts) -> Chi2Breakdown:
    """chi2, U, S in one pass; chi2 comes from the direct formula so the
    identity chi2 = (U + S)/n - n is a genuine cross-check, not a tautology."""
    _check_match(d, c)
    u, s, _, chi_occ, psum = _tally_counts(d, c)
    if d.family == CUSTOM:
        chi2 = _dense_chi_square(d, c)
    else:
        chi2 = chi_occ + float(c.n) * (1.0 - psum)
    return Chi2Breakdown(chi2=chi2, u_stat=u, s_stat=s, n=c.n, m=c.m)


def standardize(b: Chi2Breakdown, convention: str = THEOREM) -> float:
    """(chi2 - m)/sqrt(2m), or the classical (chi2 - (m-1))/sqrt(2(m-1))."""
    if convention == THEOREM:
        return (b.chi2 - b.m) / sqrt(2.0 * b.m)
    if convention == CLASSICAL:
        if b.m < 2:
            raise InvalidParameterError("classical standardization needs m >= 2")
        return (b.chi2 - (b.m - 1)) / sqrt(2.0 * (b.m - 1))
    raise InvalidParameterError(
        f"convention must be one of {CONVENTIONS}, got {convention!r}"
    )


def collision_pairs(c: SampleCounts) -> int:
    """Number of unordered coincident pairs: sum_i N_i (N_i - 1)/2.

    For uniform cells U = 2 m * collision_pairs exactly.
    """
    return sum(cnt * (cnt - 1) // 2 for cnt in c.counts.values())


def coincidence_scores(d: CellDistribution, s: SampleSequence) -> np.ndarray:
    """Per-step coincidence scores along an ordered sample.

    Score k is m^{-1} p^{-1}(X_k) * #{j < k : X_j = X_k}, zero at k=1.  The
    scores sum to U/(2m); their row sums drive the coincidence-regime limit.
    Runs in O(n) with a running occupancy map.
    """
    values = np.asarray(s.values, dtype=np.int64)
    if values.size and (values.min() < 1 or values.max() > d.m):
        raise InvalidInputError("sequence values outside 1..m")
    inv_p = 1.0 / np.asarray(d.prob(values), dtype=np.float64)
    inv_m = 1.0 / float(d.m)
    out = np.zeros(s.n, dtype=np.float64)
    seen: dict[int, int] = {}
    for k, x in enumerate(values.tolist()):
        prior = seen.get(x, 0)
        if prior:
            out[k] = (prior * inv_p[k]) * inv_m
        seen[x] = prior + 1
    return out


def read_counts_csv(path: str | Path) -> dict[int, int]:
    """Read 'cell_index,count' rows (optional header); duplicates are errors."""
    lines = Path(path).read_text().splitlines()
    counts: dict[int, int] = {}
    for ln, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{ln}: expected 'cell_index,count'")
        try:
            idx, cnt = int(parts[0]), int(parts[1])
        except ValueError:
            if ln == 1:
                continue  # header
            raise DataFormatError(
                f"{path}:{ln}: not an integer pair: {raw!r}"
            ) from None
        if idx in counts:
            raise DataFormatError(f"{path}:{ln}: duplicate cell index {idx}")
        if cnt < 0:
            raise DataFormatError(f"{path}:{ln}: negative count {cnt}")
        counts[idx] = cnt
    if not counts:
        raise DataFormatError(f"{path}: no counts found")
    return counts


def read_sequence_file(path: str | Path) -> SampleSequence:
    """Read one 1-based cell index per line (optional header line)."""
    lines = Path(path).read_text().splitlines()
    values = []
    for ln, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            values.append(int(text))
        except ValueError:
            if ln == 1:
                continue  # header
            raise DataFormatError(f"{path}:{ln}: not a cell index: {raw!r}") from None
    if not values:
        raise DataFormatError(f"{path}: no values found")
    return SampleSequence(len(values), np.asarray(values, dtype=np.int64))

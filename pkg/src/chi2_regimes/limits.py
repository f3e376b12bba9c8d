"""The three reference laws for the standardized statistic, with p-values.

Classification is by the regime parameter lambda_hat = n/sqrt(m):

- below ``lambda_lo``: ``degenerate_zero``, a point mass at 0 (collisions
  become so rare that the standardized statistic collapses),
- between the thresholds: ``poisson_regime(lambda)``, the law of
  (sqrt(2)/lambda) Z - lambda/sqrt(2) with Z ~ Pois(lambda^2/2), an atomic
  law on a shifted lattice with mean 0 and variance 1 exactly,
- above ``lambda_hi``: ``std_normal``.

The finite-sample thresholds (defaults 0.1 and 10) are an engineering
choice recorded in every output; the theory only speaks about the limits.

Poisson tail probabilities are computed by direct pmf recursion with a
log-space fallback for means above 700; upper tails are summed forward from
pmf(k) so small p-values never suffer 1 - cdf cancellation.  The normal CDF
and quantile come from scipy.special (ndtr/ndtri), accurate to 1e-12; the
classical chi-square p-value is the regularized upper incomplete gamma.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, exp, floor, log, sqrt

import numpy as np
from scipy.special import gammaincc, gammaln, ndtr, ndtri

from .errors import InvalidParameterError

DEGENERATE = "degenerate_zero"
POISSON = "poisson_regime"
NORMAL = "std_normal"

DEFAULT_LAMBDA_LO = 0.1
DEFAULT_LAMBDA_HI = 10.0

# pmf recursion from exp(-mu) underflows near mu ~ 745; switch to log space
_LOG_SPACE_MEAN = 700.0
# relative snap tolerance for matching a real to a lattice atom index
_ATOM_SNAP = 1e-9


@dataclass(frozen=True)
class LimitLaw:
    """One of the three reference laws; ``lam`` is set for poisson_regime."""

    kind: str
    lam: float | None = None


def degenerate_zero() -> LimitLaw:
    return LimitLaw(DEGENERATE)


def poisson_regime(lam: float) -> LimitLaw:
    lam = float(lam)
    if not (lam > 0.0 and np.isfinite(lam)):
        raise InvalidParameterError(f"lambda must be in (0, inf), got {lam!r}")
    return LimitLaw(POISSON, lam=lam)


def std_normal() -> LimitLaw:
    return LimitLaw(NORMAL)


@dataclass(frozen=True)
class RegimeClassification:
    """lambda_hat = n/sqrt(m), the recommended law, and the thresholds used."""

    lambda_hat: float
    regime: LimitLaw
    thresholds: tuple[float, float]


def classify_regime(
    n: int,
    m: int,
    lambda_lo: float = DEFAULT_LAMBDA_LO,
    lambda_hi: float = DEFAULT_LAMBDA_HI,
) -> RegimeClassification:
    """Pick the reference law from lambda_hat; both band edges count as poisson."""
    if n < 1 or m < 1:
        raise InvalidParameterError("n and m must be positive integers")
    if not (0.0 < lambda_lo < lambda_hi):
        raise InvalidParameterError(
            f"need 0 < lambda_lo < lambda_hi, got ({lambda_lo!r}, {lambda_hi!r})"
        )
    lambda_hat = float(n) / sqrt(float(m))
    if lambda_hat < lambda_lo:
        law = degenerate_zero()
    elif lambda_hat <= lambda_hi:
        law = poisson_regime(lambda_hat)
    else:
        law = std_normal()
    return RegimeClassification(lambda_hat, law, (float(lambda_lo), float(lambda_hi)))


# ---------------------------------------------------------------------------
# Poisson tail machinery (built here on purpose: the pmf recursion and the
# forward tail sum are the documented algorithm, and upper tails must not go
# through 1 - cdf).


def _pois_pmf(k: int, mu: float) -> float:
    if k < 0:
        return 0.0
    if mu <= _LOG_SPACE_MEAN and k == 0:
        return exp(-mu)
    return float(exp(k * log(mu) - mu - gammaln(k + 1)))


def poisson_cdf(k: int, mu: float) -> float:
    """P(Pois(mu) <= k) by pmf recursion (log-space start above mean 700)."""
    if mu < 0 or not np.isfinite(mu):
        raise InvalidParameterError(f"mean must be finite and >= 0, got {mu!r}")
    if k < 0:
        return 0.0
    if mu == 0.0:
        return 1.0
    if mu <= _LOG_SPACE_MEAN:
        term = exp(-mu)
        total = term
        for j in range(1, k + 1):
            term *= mu / j
            total += term
            if j > mu and term < total * 1e-18:
                break
        return min(total, 1.0)
    if k < mu:
        # exp(-mu) underflows; sum downward from a log-space pmf(k) instead
        return _pois_tail_sum_down(k, mu)
    return max(0.0, min(1.0, 1.0 - poisson_upper_tail(k + 1, mu)))


def _pois_tail_sum_down(k: int, mu: float) -> float:
    # left tail summed downward from pmf(k): terms decay fast below the mean
    term = _pois_pmf(k, mu)
    total = term
    j = k
    while j > 0:
        term *= j / mu
        total += term
        j -= 1
        if term < total * 1e-18:
            break
    return min(total, 1.0)


def poisson_upper_tail(k: int, mu: float) -> float:
    """P(Pois(mu) >= k), summed forward from pmf(k) (no 1-cdf cancellation)."""
    if mu < 0 or not np.isfinite(mu):
        raise InvalidParameterError(f"mean must be finite and >= 0, got {mu!r}")
    if k <= 0:
        return 1.0
    if mu == 0.0:
        return 0.0
    if k <= mu:
        # tail is not small; the complement loses nothing here
        return max(0.0, min(1.0, 1.0 - poisson_cdf(k - 1, mu)))
    term = _pois_pmf(k, mu)
    total = term
    j = k + 1
    while True:
        term *= mu / j
        total += term
        j += 1
        if term < total * 1e-18 or term == 0.0:
            break
    return min(total, 1.0)


def _table_start(mu: float) -> tuple[int, float]:
    """Leftmost k whose pmf is representable, and pmf(k) itself.

    Found by walking down from the mode, where the pmf is ~(2 pi mu)^-1/2 and
    never underflows; entries further left carry no double-precision mass.
    """
    if mu <= _LOG_SPACE_MEAN:
        return 0, exp(-mu)
    j = int(mu)
    term = _pois_pmf(j, mu)
    while j > 0:
        down = term * j / mu
        if down < 1e-290:  # stay clear of subnormals: they wreck the ratios
            break
        term = down
        j -= 1
    return j, term


def poisson_pmf_table(mu: float, tail_mass: float = 1e-12) -> np.ndarray:
    """pmf[0..K] with K the smallest integer whose right tail is < tail_mass."""
    if mu < 0 or not np.isfinite(mu):
        raise InvalidParameterError(f"mean must be finite and >= 0, got {mu!r}")
    if mu == 0.0:
        return np.array([1.0])
    start, term = _table_start(mu)
    out = [0.0] * start
    out.append(term)
    total = term
    j = start + 1
    cap = int(mu + 40.0 * sqrt(mu + 1.0)) + 64
    while total < 1.0 - tail_mass and j <= cap:
        term *= mu / j
        total += term
        out.append(term)
        j += 1
    return np.asarray(out, dtype=np.float64)


# ---------------------------------------------------------------------------
# Lattice geometry of the poisson_regime law.


def poisson_atom(law: LimitLaw, k: int | np.ndarray):
    """Atom value(s) (sqrt(2)/lambda) k - lambda/sqrt(2)."""
    scale = sqrt(2.0) / law.lam
    shift = law.lam / sqrt(2.0)
    if np.ndim(k) == 0:
        return scale * float(k) - shift
    return scale * np.asarray(k, dtype=np.float64) - shift


def _atom_index_real(law: LimitLaw, x: float) -> float:
    # inverse of poisson_atom, with a snap so float atoms map to exact ints
    scale = sqrt(2.0) / law.lam
    shift = law.lam / sqrt(2.0)
    kf = (x + shift) / scale
    nearest = round(kf)
    if abs(kf - nearest) <= _ATOM_SNAP * max(1.0, abs(kf)):
        return float(nearest)
    return kf


def poisson_support(law: LimitLaw, tail_mass: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """(atoms, pmf) out to the point where the right tail drops below tail_mass."""
    pmf = poisson_pmf_table(law.lam * law.lam / 2.0, tail_mass)
    return poisson_atom(law, np.arange(pmf.size)), pmf


# ---------------------------------------------------------------------------
# The law interface: CDF, quantile, moments, sampling, p-values.


def limit_cdf(law: LimitLaw, x: float) -> float:
    """Right-continuous CDF of the reference law."""
    if law.kind == DEGENERATE:
        return 1.0 if x >= 0.0 else 0.0
    if law.kind == NORMAL:
        return float(ndtr(x))
    k = floor(_atom_index_real(law, x))
    return poisson_cdf(k, law.lam * law.lam / 2.0)


def limit_quantile(law: LimitLaw, q: float) -> float:
    """Smallest x with CDF(x) >= q; returns an atom for the lattice law."""
    if not (0.0 < q < 1.0):
        raise InvalidParameterError(f"q must lie in (0, 1), got {q!r}")
    if law.kind == DEGENERATE:
        return 0.0
    if law.kind == NORMAL:
        return float(ndtri(q))
    mu = law.lam * law.lam / 2.0
    k, term = _table_start(mu)
    total = term
    cap = int(mu + 40.0 * sqrt(mu + 1.0)) + 64
    while total < q and k < cap:
        k += 1
        term *= mu / k
        total += term
    return poisson_atom(law, k)


def limit_mean_var(law: LimitLaw) -> tuple[float, float]:
    """Exact mean and variance: (0,0) degenerate, (0,1) otherwise."""
    if law.kind == DEGENERATE:
        return (0.0, 0.0)
    return (0.0, 1.0)


def sample_limit(law: LimitLaw, stream: np.random.Generator, size: int | None = None):
    """Draw from the reference law: a float, or an array when size is given."""
    if law.kind == DEGENERATE:
        return 0.0 if size is None else np.zeros(size)
    if law.kind == NORMAL:
        if size is None:
            return float(stream.standard_normal())
        return stream.standard_normal(size)
    mu = law.lam * law.lam / 2.0
    if size is None:
        return float(poisson_atom(law, int(stream.poisson(mu))))
    return poisson_atom(law, stream.poisson(mu, size))


def p_value_upper(law: LimitLaw, t: float) -> float:
    """P(L >= t), including the atom at t for the lattice and degenerate laws."""
    if law.kind == DEGENERATE:
        return 1.0 if t <= 0.0 else 0.0
    if law.kind == NORMAL:
        return float(ndtr(-t))
    k_min = ceil(_atom_index_real(law, t))
    return poisson_upper_tail(k_min, law.lam * law.lam / 2.0)


def classical_chi2_p_value(chi2: float, df: int) -> float:
    """Upper tail of the chi-square law with df degrees of freedom."""
    if not np.isfinite(chi2) or chi2 < 0.0:
        raise InvalidParameterError(f"chi2 must be finite and >= 0, got {chi2!r}")
    if df < 1:
        raise InvalidParameterError(f"df must be >= 1, got {df!r}")
    return float(gammaincc(df / 2.0, chi2 / 2.0))

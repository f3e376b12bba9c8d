"""Exact closed-form theory values, used as oracles for the Monte Carlo side.

Everything here is a finite-n identity, not an approximation:

- E chi2 = m - 1, E U = n(n-1), E S = n m,
- Var chi2 = n^{-1} [Var p^{-1}(X) + 2(n-1)(m-1)],
- the three moment sums of the per-step coincidence scores, via the fact
  that given X_k the number of earlier matches is Binomial(k-1, p(X_k)):
    sum_k E A_k   = n(n-1)/(2m)
    sum_k E A_k^2 = m^{-2} sum_k [(k-1) m + (k-1)(k-2)]
    sum_k E A_k^3 = m^{-3} sum_k [(k-1) E p^{-2}(X) + 3(k-1)(k-2) m
                                   + (k-1)(k-2)(k-3)]
- the conditional-mean bounds of the scores: max (n-1)/m, total n(n-1)/(2m),
- the second-moment truncation bound eps^{-2} (sum E A^3 - 2 sum E A^2
  + sum E A), which certifies the coincidence-regime limit as it vanishes,
- the two constant-free Lyapunov-type rate terms for the normal regime.

Sums over k use closed-form polynomial identities in exact integer
arithmetic, so n can be as large as 10^9 without loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import (
    UNIFORM,
    CellDistribution,
    inv_moment_ratio,
    inv_prob_moment,
    inv_prob_variance,
    s_variance_ratio,
)
from .errors import InvalidParameterError


def _check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def chi2_mean(m: int) -> float:
    """E chi2 = m - 1, for any cell distribution and any n."""
    return float(_check_positive_int(m, "m") - 1)


def chi2_variance(d: CellDistribution, n: int) -> float:
    """Var chi2 = n^{-1} [Var p^{-1}(X) + 2(n-1)(m-1)], exact at finite n."""
    n = _check_positive_int(n, "n")
    return (inv_prob_variance(d) + 2.0 * (n - 1.0) * (d.m - 1.0)) / n


def mean_u(n: int) -> float:
    """E U = n(n-1)."""
    n = _check_positive_int(n, "n")
    return float(n * (n - 1))


def mean_s(d: CellDistribution, n: int) -> float:
    """E S = n m."""
    n = _check_positive_int(n, "n")
    return float(n * d.m)


def _falling_sums(n: int) -> tuple[int, int, int]:
    # sum_{k=1}^{n} (k-1), (k-1)(k-2), (k-1)(k-2)(k-3), exactly
    s1 = n * (n - 1) // 2
    s2 = n * (n - 1) * (n - 2) // 3
    s3 = n * (n - 1) * (n - 2) * (n - 3) // 4
    return s1, s2, s3


def score_moment_sums(d: CellDistribution, n: int) -> tuple[float, float, float]:
    """(sum_k E A_k, sum_k E A_k^2, sum_k E A_k^3) for the coincidence scores.

    All three converge to lambda^2/2 along n/sqrt(m) -> lambda schedules;
    evaluated in closed form so n up to 10^9 is cheap and exact.
    """
    n = _check_positive_int(n, "n")
    m = d.m
    s1, s2, s3 = _falling_sums(n)
    a1 = s1 / m
    a2 = (s1 * m + s2) / (m * m)
    if d.family == UNIFORM:
        # E p^{-2} = m^2 exactly; stay in integer arithmetic
        a3 = (s1 * m * m + 3 * s2 * m + s3) / (m ** 3)
    else:
        ep2 = inv_prob_moment(d, 2.0)
        a3 = (s1 * ep2 + float(3 * s2 * m) + float(s3)) / float(m) ** 3
    return (a1, a2, a3)


def score_mean_bounds(n: int, m: int) -> tuple[float, float]:
    """Exact conditional-mean bounds of the scores: (max, total).

    The largest per-step conditional mean is (n-1)/m and the total is
    n(n-1)/(2m); both must stay bounded for the coincidence-regime limit.
    """
    n = _check_positive_int(n, "n")
    m = _check_positive_int(m, "m")
    return ((n - 1) / m, (n * (n - 1) // 2) / m)


def poisson_truncation_bound(d: CellDistribution, n: int, epsilon: float) -> float:
    """eps^{-2} (sum E A^3 - 2 sum E A^2 + sum E A), returned raw.

    Vanishing along a schedule certifies that truncating the scores at
    1 + eps loses nothing in the limit.  Can be negative at small n before
    the asymptotic regime; callers flag that rather than clip.
    """
    epsilon = float(epsilon)
    if not (epsilon > 0.0 and np.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon!r}")
    a1, a2, a3 = score_moment_sums(d, n)
    return (a3 - 2.0 * a2 + a1) / (epsilon * epsilon)


def lyapunov_rate_terms(d: CellDistribution, n: int, delta: float) -> tuple[float, float]:
    """The two constant-free normal-regime rate terms.

    (n^{-delta} m^{-(1+delta/2)} E p^{-(1+delta)},
     n^{-delta/2} m^{-(1+delta/2)} E p^{-(1+delta/2)});
    diagnostics only, since the theory leaves the multiplicative constant
    unspecified.
    """
    n = _check_positive_int(n, "n")
    delta = float(delta)
    if not (delta > 0.0 and np.isfinite(delta)):
        raise InvalidParameterError(f"delta must be > 0, got {delta!r}")
    fm = float(d.m)
    fn = float(n)
    common = fm ** (-(1.0 + delta / 2.0))
    t1 = fn ** (-delta) * common * inv_prob_moment(d, 1.0 + delta)
    t2 = fn ** (-delta / 2.0) * common * inv_prob_moment(d, 1.0 + delta / 2.0)
    return (t1, t2)


@dataclass(frozen=True)
class TheoryReport:
    """Exact theory values for one (distribution, n) pair.

    ``truncation_bound`` is evaluated at ``epsilon`` and
    ``inv_moment_ratio`` at ``delta``; both knobs are recorded.
    """

    n: int
    m: int
    chi2_mean: float
    chi2_var: float
    mean_u: float
    mean_s: float
    score_sum_mean: float
    score_sum_m2: float
    score_sum_m3: float
    score_mean_max: float
    s_variance_ratio: float
    delta: float
    inv_moment_ratio: float
    epsilon: float
    truncation_bound: float
    lyapunov_rate_1: float
    lyapunov_rate_2: float


def build_report(
    d: CellDistribution,
    n: int,
    delta: float = 1.0,
    epsilon: float = 0.5,
) -> TheoryReport:
    """Assemble every exact value for (d, n) into one report."""
    a1, a2, a3 = score_moment_sums(d, n)
    max_cond, _ = score_mean_bounds(n, d.m)
    rate1, rate2 = lyapunov_rate_terms(d, n, delta)
    return TheoryReport(
        n=int(n),
        m=int(d.m),
        chi2_mean=chi2_mean(d.m),
        chi2_var=chi2_variance(d, n),
        mean_u=mean_u(n),
        mean_s=mean_s(d, n),
        score_sum_mean=a1,
        score_sum_m2=a2,
        score_sum_m3=a3,
        score_mean_max=max_cond,
        s_variance_ratio=s_variance_ratio(d, n),
        delta=float(delta),
        inv_moment_ratio=inv_moment_ratio(d, delta),
        epsilon=float(epsilon),
        truncation_bound=poisson_truncation_bound(d, n, epsilon),
        lyapunov_rate_1=rate1,
        lyapunov_rate_2=rate2,
    )

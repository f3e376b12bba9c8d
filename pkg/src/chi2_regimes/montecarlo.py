"""Seeded, reproducible, parallel Monte Carlo replication engine.

Each replicate draws n cells, tallies them, computes chi2/U/S by the direct
formulas, standardizes, and records the collision-pair count.  Replicate i
uses its own counter-based stream Philox(key=[seed, i]), so the sample a
replicate sees depends only on (seed, i), never on scheduling.

Determinism across worker counts: replicates are partitioned into fixed
1024-replicate blocks; one block is one pool task; per-block aggregates
(count/mean/M2, collision histogram, CDF grid, optional raw arrays) are
merged in ascending block order.  Worker count only changes which process
computes a block.  Running with 1 worker uses the same block code inline.

Raw per-replicate values are retained when replicates <= 100000 (or when
the config forces it); beyond that the engine keeps streaming moments and a
fixed 4096-point CDF grid on [-16, 16], and the KS distance becomes a grid
approximation (error about the largest normal-CDF increment per grid step).

The engine evaluates chi2 sparsely (occupied cells plus the analytic
empty-cell term) for every family, including custom; the dense all-cells
pass remains in stat.chi_square, and the two agree to 1e-9 relative, which
the uniform-cell per-replicate identity check also enforces on the fly.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from math import ceil, sqrt
from typing import Iterable

import numpy as np
from scipy.special import ndtr

from . import __version__
from ._kernels import tally
from .asymptotics import TheoryReport, build_report
from .dist import CUSTOM, POWER_LAW, UNIFORM, CellDistribution, make_power_law, make_uniform, read_probs_csv
from .errors import InvalidInputError, InvalidParameterError, UsageError
from .limits import (
    DEFAULT_LAMBDA_HI,
    DEFAULT_LAMBDA_LO,
    DEGENERATE,
    NORMAL,
    POISSON,
    LimitLaw,
    classify_regime,
    poisson_pmf_table,
    std_normal,
)
from .stat import CLASSICAL, CONVENTIONS, THEOREM

BLOCK_SIZE = 1024
RAW_RETAIN_LIMIT = 100_000
GRID_POINTS = 4096
_GRID = np.linspace(-16.0, 16.0, GRID_POINTS)
_WORKERS_ENV = "CHI2_REGIMES_WORKERS"


@dataclass(frozen=True)
class ExperimentConfig:
    """One seeded experiment: family, sizes, replicate count, conventions."""

    family: str
    n: int
    m: int
    replicates: int
    seed: int
    alpha: float | None = None
    probs_file: str | None = None
    convention: str = THEOREM
    lambda_lo: float = DEFAULT_LAMBDA_LO
    lambda_hi: float = DEFAULT_LAMBDA_HI
    workers: int | str = "auto"
    retain_raw: bool | None = None
    law_override: LimitLaw | None = None

    def distribution_echo(self) -> dict:
        out: dict = {"family": self.family}
        if self.family == POWER_LAW:
            out["alpha"] = float(self.alpha)
        if self.family == CUSTOM and self.probs_file is not None:
            out["probs_file"] = str(self.probs_file)
        return out

    def retained(self) -> bool:
        if self.retain_raw is not None:
            return bool(self.retain_raw)
        return self.replicates <= RAW_RETAIN_LIMIT


_FAMILY_ALIASES = {
    "uniform": UNIFORM,
    "power_law": POWER_LAW,
    "powerlaw": POWER_LAW,
    "custom": CUSTOM,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed config mapping; missing fields name themselves."""
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    data = dict(raw)
    if "R" in data and "replicates" not in data:
        data["replicates"] = data.pop("R")
    dist_spec = data.pop("distribution", None)
    if dist_spec is None:
        raise UsageError("config field 'distribution' is required")
    if isinstance(dist_spec, str):
        dist_spec = {"family": dist_spec}
    if not isinstance(dist_spec, dict) or "family" not in dist_spec:
        raise UsageError("config 'distribution' needs a 'family'")
    family = _FAMILY_ALIASES.get(str(dist_spec["family"]).lower())
    if family is None:
        raise UsageError(f"unknown family {dist_spec['family']!r}")
    alpha = dist_spec.get("alpha")
    probs_file = dist_spec.get("probs_file")
    if family == POWER_LAW and alpha is None:
        raise UsageError("power_law distribution needs 'alpha'")
    if family == CUSTOM and probs_file is None:
        raise UsageError("custom distribution needs 'probs_file'")

    fields = {}
    for name in ("n", "m", "replicates", "seed"):
        if name not in data:
            raise UsageError(f"config field {name!r} is required")
        value = data.pop(name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise UsageError(f"config field {name!r} must be an integer")
        fields[name] = value
    convention = data.pop("convention", THEOREM)
    lambda_lo = data.pop("lambda_lo", DEFAULT_LAMBDA_LO)
    lambda_hi = data.pop("lambda_hi", DEFAULT_LAMBDA_HI)
    workers = data.pop("workers", "auto")
    retain_raw = data.pop("retain_raw", None)
    if data:
        raise UsageError(f"unknown config fields: {sorted(data)}")
    cfg = ExperimentConfig(
        family=family,
        alpha=None if alpha is None else float(alpha),
        probs_file=probs_file,
        convention=str(convention),
        lambda_lo=float(lambda_lo),
        lambda_hi=float(lambda_hi),
        workers=workers,
        retain_raw=retain_raw,
        **fields,
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.family not in (UNIFORM, POWER_LAW, CUSTOM):
        raise UsageError(f"unknown family {cfg.family!r}")
    if cfg.n < 1 or cfg.m < 1:
        raise UsageError("n and m must be >= 1")
    if cfg.replicates < 1:
        raise UsageError("replicates must be >= 1")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not (
        0 <= cfg.seed < 2**64
    ):
        raise UsageError("seed must be an integer in [0, 2^64)")
    if cfg.convention not in CONVENTIONS:
        raise UsageError(f"convention must be one of {CONVENTIONS}")
    if not (0.0 < cfg.lambda_lo < cfg.lambda_hi):
        raise UsageError("need 0 < lambda_lo < lambda_hi")
    if cfg.convention == CLASSICAL and cfg.m < 2:
        raise UsageError("classical convention needs m >= 2")
    if cfg.workers != "auto" and (
        not isinstance(cfg.workers, int)
        or isinstance(cfg.workers, bool)
        or cfg.workers < 1
    ):
        raise UsageError("workers must be 'auto' or a positive integer")


def build_distribution(cfg: ExperimentConfig) -> CellDistribution:
    if cfg.family == UNIFORM:
        return make_uniform(cfg.m)
    if cfg.family == POWER_LAW:
        return make_power_law(cfg.alpha, cfg.m)
    d = read_probs_csv(cfg.probs_file)
    if d.m != cfg.m:
        raise InvalidInputError(
            f"probs file has {d.m} cells but config says m={cfg.m}"
        )
    return d


def resolve_workers(cfg: ExperimentConfig) -> int:
    """Worker count: env override first, then the config; never the output."""
    env = os.environ.get(_WORKERS_ENV, "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{_WORKERS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError(f"{_WORKERS_ENV} must be >= 1")
        return value
    if cfg.workers == "auto":
        return os.cpu_count() or 1
    return int(cfg.workers)


# ---------------------------------------------------------------------------
# Per-block computation (runs in worker processes).


@dataclass(frozen=True)
class _RunSpec:
    """Picklable runtime description handed to worker processes."""

    family: str
    n: int
    m: int
    replicates: int
    seed: int
    convention: str
    alpha: float | None = None
    power_norm: float | None = None
    probs: np.ndarray | None = None


@dataclass
class _BlockStats:
    count: int
    mean: float
    m2: float
    coll_hist: dict[int, int]
    grid_under: int
    grid_counts: np.ndarray
    raw: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None


def _build_cumulative(spec: _RunSpec) -> np.ndarray | None:
    if spec.family == UNIFORM:
        return None
    if spec.family == POWER_LAW:
        idx = np.arange(1, spec.m + 1, dtype=np.float64)
        probs = np.power(idx, -spec.alpha) / spec.power_norm
        cum = np.cumsum(probs)
    else:
        cum = np.cumsum(spec.probs)
    cum[-1] = 1.0
    return cum


def _occupied_probs(spec: _RunSpec, cells: np.ndarray) -> np.ndarray:
    if spec.family == UNIFORM:
        return np.full(cells.size, 1.0 / spec.m)
    if spec.family == POWER_LAW:
        return np.power(cells.astype(np.float64), -spec.alpha) / spec.power_norm
    return spec.probs[cells - 1]


def _compute_block(spec: _RunSpec, cum: np.ndarray | None, block_index: int, retain: bool) -> _BlockStats:
    lo = block_index * BLOCK_SIZE
    hi = min(spec.replicates, lo + BLOCK_SIZE)
    size = hi - lo
    n, m = spec.n, spec.m
    fn = float(n)
    fm = float(m)
    if spec.convention == THEOREM:
        center, scale = fm, sqrt(2.0 * fm)
    else:
        center, scale = fm - 1.0, sqrt(2.0 * (fm - 1.0))

    chi2_arr = np.empty(size)
    u_arr = np.empty(size)
    s_arr = np.empty(size)
    std_arr = np.empty(size)
    coll_arr = np.empty(size, dtype=np.int64)

    uniform = spec.family == UNIFORM
    for j in range(size):
        rep = lo + j
        gen = np.random.Generator(
            np.random.Philox(key=np.array([spec.seed, rep], dtype=np.uint64))
        )
        if uniform:
            idx = gen.integers(1, m + 1, size=n, dtype=np.int64)
        else:
            idx = np.searchsorted(cum, gen.random(n), side="right").astype(np.int64) + 1
        cells, counts = np.unique(idx, return_counts=True)
        p_occ = _occupied_probs(spec, cells)
        u, s, cp, chi_occ, psum = tally(counts, p_occ, n)
        chi2 = chi_occ + fn * (1.0 - psum)
        if uniform:
            # exact identity for uniform cells: S = nm, so chi2 is affine in cp
            ident = 2.0 * fm * cp / fn + fm - fn
            if abs(chi2 - ident) > 1e-9 * (1.0 + abs(chi2)):
                raise RuntimeError(
                    f"replicate {rep}: chi2={chi2!r} breaks the collision identity {ident!r}"
                )
        chi2_arr[j] = chi2
        u_arr[j] = u
        s_arr[j] = s
        std_arr[j] = (chi2 - center) / scale
        coll_arr[j] = cp

    mean = float(np.mean(std_arr))
    m2 = float(np.sum((std_arr - mean) ** 2))
    kinds, reps = np.unique(coll_arr, return_counts=True)
    coll_hist = dict(zip(kinds.tolist(), reps.tolist()))
    grid_counts, _ = np.histogram(std_arr, bins=_GRID)
    grid_under = int(np.sum(std_arr < _GRID[0]))
    raw = (chi2_arr, u_arr, s_arr, std_arr, coll_arr) if retain else None
    return _BlockStats(size, mean, m2, coll_hist, grid_under, grid_counts, raw)


_WORKER_SPEC: _RunSpec | None = None
_WORKER_CUM: np.ndarray | None = None
_WORKER_CUM_READY = False
_WORKER_RETAIN = True


def _init_worker(spec: _RunSpec, retain: bool) -> None:
    global _WORKER_SPEC, _WORKER_CUM, _WORKER_CUM_READY, _WORKER_RETAIN
    _WORKER_SPEC = spec
    _WORKER_CUM = None
    _WORKER_CUM_READY = False
    _WORKER_RETAIN = retain


def _block_task(block_index: int) -> _BlockStats:
    global _WORKER_CUM, _WORKER_CUM_READY
    if not _WORKER_CUM_READY:
        _WORKER_CUM = _build_cumulative(_WORKER_SPEC)
        _WORKER_CUM_READY = True
    return _compute_block(_WORKER_SPEC, _WORKER_CUM, block_index, _WORKER_RETAIN)


# ---------------------------------------------------------------------------
# Distances.


def ks_distance(samples: Iterable[float], law: LimitLaw) -> float:
    """sup_x |F_emp(x) - F_law(x)|.

    The normal law uses the usual two-sided gaps at the sample points; the
    law cdf is continuous there, so that pair of gaps is exhaustive.  Atomic
    laws need the gaps taken at every jump of either cdf, from both sides,
    with left limits of the law cdf excluding the atom mass.  Samples are
    mapped onto the law's atom-index axis first and snapped to integers at
    relative 1e-9, so values that hit an atom up to float rounding are
    credited with the atom rather than charged for it.
    """
    xs = np.sort(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.float64))
    if xs.size == 0:
        raise InvalidInputError("ks_distance needs a nonempty sample")
    size = xs.size
    if law.kind == NORMAL:
        steps = np.arange(1, size + 1, dtype=np.float64) / size
        cdf_vals = ndtr(xs)
        return max(
            float(np.max(steps - cdf_vals)),
            float(np.max(cdf_vals - (steps - 1.0 / size))),
            0.0,
        )
    if law.kind == DEGENERATE:
        # all mass at zero; |x| <= 1e-9 counts as hitting the atom
        below = float(np.count_nonzero(xs < -1e-9)) / size
        at_or_below = float(np.count_nonzero(xs <= 1e-9)) / size
        return max(below, 1.0 - at_or_below)
    scale = sqrt(2.0) / law.lam
    shift = law.lam / sqrt(2.0)
    kf = (xs + shift) / scale
    nearest = np.round(kf)
    idx = np.where(np.abs(kf - nearest) <= 1e-9 * np.maximum(1.0, np.abs(kf)), nearest, kf)
    pmf = poisson_pmf_table(law.lam * law.lam / 2.0, 1e-15)
    cum = np.cumsum(pmf)
    kmax = pmf.size - 1
    atom_ks = np.nonzero(pmf >= 1e-12)[0].astype(np.float64)
    pts = np.union1d(idx, atom_ks)
    emp_right = np.searchsorted(idx, pts, side="right") / size
    emp_left = np.searchsorted(idx, pts, side="left") / size
    floor_pts = np.floor(pts)
    left_k = np.where(pts == floor_pts, floor_pts - 1.0, floor_pts)

    def _cdf_at(kvals: np.ndarray) -> np.ndarray:
        out = cum[np.clip(kvals, 0, kmax).astype(np.int64)]
        out = np.where(kvals < 0.0, 0.0, out)
        return np.where(kvals > kmax, 1.0, out)

    return max(
        float(np.max(np.abs(emp_right - _cdf_at(floor_pts)))),
        float(np.max(np.abs(emp_left - _cdf_at(left_k)))),
    )


def _tv_from_hist(hist: dict[int, int], total: int, mean: float) -> float:
    pmf = poisson_pmf_table(mean, 1e-9)
    top = max(hist) if hist else 0
    terms = list(pmf)
    if top + 1 > len(terms):
        mu = mean
        term = terms[-1]
        for j in range(len(terms), top + 1):
            term *= mu / j
            terms.append(term)
    acc = 0.0
    covered = 0.0
    for k, pk in enumerate(terms):
        acc += abs(hist.get(k, 0) / total - pk)
        covered += pk
    return 0.5 * acc + 0.5 * max(0.0, 1.0 - covered)


def tv_distance_poisson(counts: Iterable[int], mean: float) -> float:
    """Total variation between empirical nonnegative counts and Pois(mean),
    truncated where the Poisson tail drops below 1e-9 (tail counted whole)."""
    if not (mean > 0.0 and np.isfinite(mean)):
        raise InvalidParameterError(f"mean must be > 0, got {mean!r}")
    arr = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts, dtype=np.int64)
    if arr.size == 0:
        raise InvalidInputError("tv_distance_poisson needs a nonempty sample")
    if np.any(arr < 0):
        raise InvalidInputError("counts must be nonnegative")
    kinds, reps = np.unique(arr, return_counts=True)
    hist = dict(zip(kinds.tolist(), reps.tolist()))
    return _tv_from_hist(hist, int(arr.size), float(mean))


# ---------------------------------------------------------------------------
# Results.


@dataclass(frozen=True)
class ReplicateRaw:
    """Per-replicate raw values, in replicate order."""

    chi2: np.ndarray
    u: np.ndarray
    s: np.ndarray
    standardized: np.ndarray
    collisions: np.ndarray


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    lambda_hat: float
    law: LimitLaw
    empirical_mean: float
    empirical_var: float
    ks_normal: float
    ks_poisson: float | None
    tv_poisson: float | None
    prob_at_zero: float
    exact_targets: TheoryReport
    raw: ReplicateRaw | None

    @property
    def regime(self) -> str:
        return self.law.kind


def _merge_moments(blocks: list[_BlockStats]) -> tuple[int, float, float]:
    count, mean, m2 = blocks[0].count, blocks[0].mean, blocks[0].m2
    for blk in blocks[1:]:
        total = count + blk.count
        delta = blk.mean - mean
        mean = mean + delta * (blk.count / total)
        m2 = m2 + blk.m2 + delta * delta * count * (blk.count / total)
        count = total
    return count, mean, m2


def _grid_ks_normal(blocks: list[_BlockStats], total: int) -> float:
    under = sum(b.grid_under for b in blocks)
    counts = np.sum([b.grid_counts for b in blocks], axis=0)
    below = under + np.concatenate(([0], np.cumsum(counts)))
    emp = below / total
    return float(np.max(np.abs(emp - ndtr(_GRID))))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run all replicates; numerically identical for every worker count."""
    validate_config(cfg)
    d = build_distribution(cfg)
    if cfg.family != UNIFORM:
        d.cumulative()  # resource guard up front: sampling needs this array
    theory = build_report(d, cfg.n)
    classification = classify_regime(cfg.n, cfg.m, cfg.lambda_lo, cfg.lambda_hi)
    law = cfg.law_override if cfg.law_override is not None else classification.regime

    spec = _RunSpec(
        family=cfg.family,
        n=cfg.n,
        m=cfg.m,
        replicates=cfg.replicates,
        seed=cfg.seed,
        convention=cfg.convention,
        alpha=cfg.alpha,
        power_norm=d._norm,
        probs=d._probs if cfg.family == CUSTOM else None,
    )
    retain = cfg.retained()
    nblocks = ceil(cfg.replicates / BLOCK_SIZE)
    workers = resolve_workers(cfg)
    if workers <= 1 or nblocks <= 1:
        cum = _build_cumulative(spec)
        blocks = [_compute_block(spec, cum, i, retain) for i in range(nblocks)]
    else:
        with ProcessPoolExecutor(
            max_workers=min(workers, nblocks),
            initializer=_init_worker,
            initargs=(spec, retain),
        ) as pool:
            blocks = list(pool.map(_block_task, range(nblocks)))

    total, mean, m2 = _merge_moments(blocks)
    emp_var = m2 / (total - 1) if total > 1 else 0.0

    coll_hist: dict[int, int] = {}
    for blk in blocks:
        for k, v in blk.coll_hist.items():
            coll_hist[k] = coll_hist.get(k, 0) + v
    prob_at_zero = coll_hist.get(0, 0) / total

    raw = None
    if retain:
        raw = ReplicateRaw(
            chi2=np.concatenate([b.raw[0] for b in blocks]),
            u=np.concatenate([b.raw[1] for b in blocks]),
            s=np.concatenate([b.raw[2] for b in blocks]),
            standardized=np.concatenate([b.raw[3] for b in blocks]),
            collisions=np.concatenate([b.raw[4] for b in blocks]),
        )
        ks_normal = ks_distance(raw.standardized, std_normal())
    else:
        ks_normal = _grid_ks_normal(blocks, total)

    ks_poisson = None
    if law.kind == POISSON and raw is not None:
        ks_poisson = ks_distance(raw.standardized, law)

    tv_poisson = None
    if cfg.family == UNIFORM:
        pair_mean = (cfg.n * (cfg.n - 1) // 2) / cfg.m
        if pair_mean > 0.0:
            tv_poisson = _tv_from_hist(coll_hist, total, pair_mean)

    return ExperimentResult(
        config=cfg,
        lambda_hat=classification.lambda_hat,
        law=law,
        empirical_mean=mean,
        empirical_var=emp_var,
        ks_normal=ks_normal,
        ks_poisson=ks_poisson,
        tv_poisson=tv_poisson,
        prob_at_zero=prob_at_zero,
        exact_targets=theory,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# Schedules and sweeps.


@dataclass(frozen=True)
class Schedule:
    """(n, m) pairs with strictly increasing n, plus the rule that built them."""

    points: tuple[tuple[int, int], ...]
    rule: str = "explicit"

    def __post_init__(self) -> None:
        if not self.points:
            raise InvalidParameterError("schedule needs at least one (n, m) point")
        ns = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise InvalidParameterError("schedule n values must strictly increase")
        for n, m in self.points:
            if n < 1 or m < 1:
                raise InvalidParameterError("schedule entries must be >= 1")


def fixed_lambda_schedule(lam: float, n_values: Iterable[int]) -> Schedule:
    """m = round((n/lambda)^2): holds the regime parameter fixed as n grows."""
    if not (lam > 0.0 and np.isfinite(lam)):
        raise InvalidParameterError(f"lambda must be > 0, got {lam!r}")
    pts = tuple((int(n), max(1, round((int(n) / lam) ** 2))) for n in n_values)
    return Schedule(pts, rule="fixed_lambda")


def fixed_m_schedule(m: int, n_values: Iterable[int]) -> Schedule:
    """m held fixed while n grows: walks toward the normal regime."""
    return Schedule(tuple((int(n), int(m)) for n in n_values), rule="fixed_m")


def proportional_schedule(factor: int, m_values: Iterable[int]) -> Schedule:
    """n = factor*m: lambda_hat = factor*sqrt(m) grows with m."""
    if int(factor) < 1:
        raise InvalidParameterError("factor must be a positive integer")
    return Schedule(
        tuple((int(factor) * int(m), int(m)) for m in m_values), rule="proportional"
    )


def convergence_sweep(sched: Schedule, base_cfg: ExperimentConfig) -> list[ExperimentResult]:
    """One experiment per schedule point; point i reseeds with seed XOR i."""
    results = []
    for i, (n, m) in enumerate(sched.points):
        cfg = replace(base_cfg, n=n, m=m, seed=base_cfg.seed ^ i)
        results.append(run_experiment(cfg))
    return results


# ---------------------------------------------------------------------------
# Moment cross-checks.


def moment_check(res: ExperimentResult, theory: TheoryReport) -> np.ndarray:
    """z-scores for (mean chi2, var chi2, mean U, mean S, cov(U,S)).

    Each is (estimate - exact)/SE with the SE taken from the replicate
    sample; 0/0 is reported as z = 0 (a deterministic statistic hitting its
    target exactly).  Raw per-replicate values are required.
    """
    if res.raw is None:
        raise InvalidInputError(
            "moment_check needs retained raw replicate values; rerun with "
            "retain_raw=true or replicates <= 100000"
        )
    chi2 = res.raw.chi2
    u = res.raw.u
    s = res.raw.s
    size = chi2.size

    def _ratio(num: float, den: float) -> float:
        if num == 0.0 and den == 0.0:
            return 0.0
        if den == 0.0:
            return float(np.inf) if num > 0 else float(-np.inf)
        return num / den

    def _mean_z(arr: np.ndarray, target: float) -> float:
        se = float(np.std(arr, ddof=1)) / sqrt(size) if size > 1 else 0.0
        return _ratio(float(np.mean(arr)) - target, se)

    zs = [_mean_z(chi2, theory.chi2_mean)]

    centered = chi2 - np.mean(chi2)
    sample_var = float(np.sum(centered**2)) / (size - 1) if size > 1 else 0.0
    m4 = float(np.mean(centered**4))
    var_of_var = (m4 - sample_var**2 * (size - 3) / (size - 1)) / size if size > 3 else 0.0
    zs.append(_ratio(sample_var - theory.chi2_var, sqrt(max(var_of_var, 0.0))))

    zs.append(_mean_z(u, theory.mean_u))
    zs.append(_mean_z(s, theory.mean_s))

    du = u - np.mean(u)
    ds = s - np.mean(s)
    sample_cov = float(np.sum(du * ds)) / (size - 1) if size > 1 else 0.0
    m22 = float(np.mean((du * ds) ** 2))
    cov_se = sqrt(max((m22 - sample_cov**2) / size, 0.0)) if size > 1 else 0.0
    zs.append(_ratio(sample_cov - 0.0, cov_se))

    return np.asarray(zs, dtype=np.float64)


# ---------------------------------------------------------------------------
# Serialization.


def _theory_dict(t: TheoryReport) -> dict:
    return {
        "n": t.n,
        "m": t.m,
        "chi2_mean": t.chi2_mean,
        "chi2_var": t.chi2_var,
        "mean_u": t.mean_u,
        "mean_s": t.mean_s,
        "score_sum_mean": t.score_sum_mean,
        "score_sum_m2": t.score_sum_m2,
        "score_sum_m3": t.score_sum_m3,
        "score_mean_max": t.score_mean_max,
        "s_variance_ratio": t.s_variance_ratio,
        "delta": t.delta,
        "inv_moment_ratio": t.inv_moment_ratio,
        "epsilon": t.epsilon,
        "truncation_bound": t.truncation_bound,
        "lyapunov_rate_1": t.lyapunov_rate_1,
        "lyapunov_rate_2": t.lyapunov_rate_2,
    }


def result_to_dict(res: ExperimentResult) -> dict:
    """JSON-ready mapping; excludes execution details (workers, backend) so
    reruns under any worker count serialize byte-identically."""
    cfg = res.config
    law_echo = None
    if cfg.law_override is not None:
        law_echo = {"kind": cfg.law_override.kind}
        if cfg.law_override.lam is not None:
            law_echo["lam"] = float(cfg.law_override.lam)
    return {
        "version": __version__,
        "config": {
            "distribution": cfg.distribution_echo(),
            "n": cfg.n,
            "m": cfg.m,
            "replicates": cfg.replicates,
            "seed": cfg.seed,
            "convention": cfg.convention,
            "lambda_lo": cfg.lambda_lo,
            "lambda_hi": cfg.lambda_hi,
            "retain_raw": res.raw is not None,
            "law_override": law_echo,
        },
        "lambda_hat": res.lambda_hat,
        "regime": res.regime,
        "empirical_mean": res.empirical_mean,
        "empirical_var": res.empirical_var,
        "ks_normal": res.ks_normal,
        "ks_poisson": res.ks_poisson,
        "tv_poisson": res.tv_poisson,
        "prob_at_zero": res.prob_at_zero,
        "exact_targets": _theory_dict(res.exact_targets),
    }

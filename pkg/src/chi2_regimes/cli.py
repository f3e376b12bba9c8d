"""Command-line front end.

Four subcommands:

- ``gof``: goodness of fit on observed counts; reports chi2/U/S, the regime
  recommendation, and all three p-values side by side (the classical
  chi-square reference, the normal-regime tail, and the collision-count
  Poisson tail).  The regime field is a recommendation, never a suppression.
- ``simulate``: run one seeded experiment from a config JSON.
- ``sweep``: run a schedule of experiments and emit a plot-ready CSV.
- ``theory``: print the exact theory values for (distribution, n).

Exit codes: 0 success, 1 usage (bad flags, invalid or incomplete config,
resource refusals), 2 data (unparseable or inconsistent data files).
p-values never affect the exit code.  CHI2_REGIMES_WORKERS overrides the
worker count without changing any numeric output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .asymptotics import build_report
from .dist import CellDistribution, make_power_law, make_uniform, read_probs_csv, s_variance_ratio
from .errors import (
    Chi2RegimesError,
    DataFormatError,
    InvalidInputError,
    InvalidParameterError,
    ResourceLimitError,
    UsageError,
)
from .limits import (
    DEFAULT_LAMBDA_HI,
    DEFAULT_LAMBDA_LO,
    classical_chi2_p_value,
    classify_regime,
    p_value_upper,
    poisson_upper_tail,
    std_normal,
)
from .montecarlo import (
    ExperimentConfig,
    Schedule,
    config_from_dict,
    convergence_sweep,
    fixed_lambda_schedule,
    fixed_m_schedule,
    proportional_schedule,
    result_to_dict,
    run_experiment,
)
from .stat import (
    CLASSICAL,
    CONVENTIONS,
    THEOREM,
    SampleCounts,
    collision_pairs,
    decompose,
    read_counts_csv,
    standardize,
)

SWEEP_HEADER = "n,m,lambda_hat,ks_normal,tv_poisson,prob_at_zero,emp_mean,emp_var"


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage problems; the contract wants 1
    def error(self, message):  # noqa: D102
        raise UsageError(message)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc


def _resolve_distribution(args) -> CellDistribution:
    if getattr(args, "probs", None):
        d = read_probs_csv(args.probs)
        if args.m is not None and args.m != d.m:
            raise InvalidInputError(
                f"--m {args.m} disagrees with {d.m} probabilities in {args.probs}"
            )
        return d
    if args.dist == "uniform":
        if args.m is None:
            raise UsageError("--dist uniform needs --m")
        return make_uniform(args.m)
    if args.dist == "powerlaw":
        if args.m is None or args.alpha is None:
            raise UsageError("--dist powerlaw needs --m and --alpha")
        return make_power_law(args.alpha, args.m)
    raise UsageError("give --probs FILE or --dist uniform|powerlaw")


def _write(out_dir: str | None, name: str, text: str) -> Path | None:
    if out_dir is None:
        return None
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / name
    target.write_text(text)
    return target


@dataclass(frozen=True)
class GofReport:
    """Everything the gof command reports, JSON-ready."""

    chi2: float
    u: float
    s: float
    n: int
    m: int
    lambda_hat: float
    regime: str
    p_classical: float | None
    p_normal: float
    p_poisson: float
    s_variance_ratio: float
    warnings: list[str]
    standardized_theorem: float
    standardized_classical: float | None
    convention: str
    lambda_lo: float
    lambda_hi: float


def gof_report(
    d: CellDistribution,
    counts: SampleCounts,
    convention: str = THEOREM,
    lambda_lo: float = DEFAULT_LAMBDA_LO,
    lambda_hi: float = DEFAULT_LAMBDA_HI,
) -> GofReport:
    """Assemble the goodness-of-fit report for observed counts under d."""
    breakdown = decompose(d, counts)
    classification = classify_regime(counts.n, d.m, lambda_lo, lambda_hi)
    ratio = s_variance_ratio(d, counts.n)

    std_theorem = standardize(breakdown, THEOREM)
    std_classical = standardize(breakdown, CLASSICAL) if d.m >= 2 else None
    std_used = std_theorem if convention == THEOREM else std_classical
    if std_used is None:
        raise InvalidParameterError("classical convention needs m >= 2")

    p_classical = (
        classical_chi2_p_value(breakdown.chi2, d.m - 1) if d.m >= 2 else None
    )
    p_normal = p_value_upper(std_normal(), std_used)
    pair_mean = (counts.n * (counts.n - 1) // 2) / d.m
    p_poisson = poisson_upper_tail(collision_pairs(counts), pair_mean)

    warnings = []
    if ratio > 0.1:
        warnings.append(
            f"s_variance_ratio={ratio:.6g} > 0.1: the iid part of the statistic "
            "is not negligible; the poisson/normal regime p-values may be off"
        )
    lam = classification.lambda_hat
    for edge in (lambda_lo, lambda_hi):
        if edge / 2.0 <= lam <= edge * 2.0:
            warnings.append(
                f"lambda_hat={lam:.6g} is within 2x of the regime threshold "
                f"{edge:g}: neighboring regime p-values deserve equal weight"
            )
    if d.m < 2:
        warnings.append("m=1: the classical reference (df=0) is undefined")

    return GofReport(
        chi2=breakdown.chi2,
        u=breakdown.u_stat,
        s=breakdown.s_stat,
        n=counts.n,
        m=d.m,
        lambda_hat=lam,
        regime=classification.regime.kind,
        p_classical=p_classical,
        p_normal=p_normal,
        p_poisson=p_poisson,
        s_variance_ratio=ratio,
        warnings=warnings,
        standardized_theorem=std_theorem,
        standardized_classical=std_classical,
        convention=convention,
        lambda_lo=float(lambda_lo),
        lambda_hi=float(lambda_hi),
    )


def _gof_json(report: GofReport, dist_echo: dict) -> dict:
    return {
        "version": __version__,
        "distribution": dist_echo,
        "chi2": report.chi2,
        "u": report.u,
        "s": report.s,
        "n": report.n,
        "m": report.m,
        "lambda_hat": report.lambda_hat,
        "regime": report.regime,
        "p_classical": report.p_classical,
        "p_normal": report.p_normal,
        "p_poisson": report.p_poisson,
        "s_variance_ratio": report.s_variance_ratio,
        "warnings": report.warnings,
        "standardized_theorem": report.standardized_theorem,
        "standardized_classical": report.standardized_classical,
        "convention": report.convention,
        "lambda_lo": report.lambda_lo,
        "lambda_hi": report.lambda_hi,
    }


def _dist_echo(args, d: CellDistribution) -> dict:
    if getattr(args, "probs", None):
        return {"family": "custom", "probs_file": str(args.probs)}
    if d.family == "power_law":
        return {"family": "power_law", "alpha": d.alpha}
    return {"family": d.family}


def cmd_gof(args) -> int:
    d = _resolve_distribution(args)
    counts_map = read_counts_csv(args.counts)
    counts = SampleCounts(sum(counts_map.values()), counts_map, d.m)
    report = gof_report(
        d,
        counts,
        convention=args.convention,
        lambda_lo=args.lambda_lo,
        lambda_hi=args.lambda_hi,
    )
    text = _dump_json(_gof_json(report, _dist_echo(args, d)))
    sys.stdout.write(text)
    _write(args.out, "gof.json", text)
    return 0


def cmd_simulate(args) -> int:
    cfg = config_from_dict(_load_json(args.config))
    result = run_experiment(cfg)
    text = _dump_json(result_to_dict(result))
    target = _write(args.out or ".", "result.json", text)
    if args.csv:
        if result.raw is None:
            raise UsageError(
                "--csv needs retained raw replicates (replicates <= 100000 "
                "or retain_raw=true in the config)"
            )
        rows = ["replicate,chi2,u,s,standardized,collisions"]
        raw = result.raw
        for i in range(raw.chi2.size):
            rows.append(
                f"{i},{float(raw.chi2[i])!r},{float(raw.u[i])!r},"
                f"{float(raw.s[i])!r},{float(raw.standardized[i])!r},"
                f"{int(raw.collisions[i])}"
            )
        _write(args.out or ".", "replicates.csv", "\n".join(rows) + "\n")
    sys.stdout.write(
        f"n={cfg.n} m={cfg.m} replicates={cfg.replicates} seed={cfg.seed} "
        f"lambda_hat={result.lambda_hat!r} regime={result.regime} "
        f"ks_normal={result.ks_normal!r} -> {target}\n"
    )
    return 0


def _schedule_from_dict(raw: dict) -> Schedule:
    rule = raw.get("rule")
    if rule == "fixed_lambda":
        if "lambda" not in raw or "n_values" not in raw:
            raise UsageError("fixed_lambda rule needs 'lambda' and 'n_values'")
        return fixed_lambda_schedule(float(raw["lambda"]), raw["n_values"])
    if rule == "fixed_m":
        if "m" not in raw or "n_values" not in raw:
            raise UsageError("fixed_m rule needs 'm' and 'n_values'")
        return fixed_m_schedule(int(raw["m"]), raw["n_values"])
    if rule == "proportional":
        if "factor" not in raw or "m_values" not in raw:
            raise UsageError("proportional rule needs 'factor' and 'm_values'")
        return proportional_schedule(int(raw["factor"]), raw["m_values"])
    if rule == "explicit":
        if "points" not in raw:
            raise UsageError("explicit rule needs 'points' as [[n, m], ...]")
        return Schedule(tuple((int(n), int(m)) for n, m in raw["points"]))
    raise UsageError(
        "sweep rule must be fixed_lambda, fixed_m, proportional, or explicit"
    )


def cmd_sweep(args) -> int:
    raw = _load_json(args.config)
    if not isinstance(raw, dict) or "base" not in raw:
        raise UsageError("sweep config needs a 'base' experiment object")
    sched = _schedule_from_dict(raw)
    base = dict(raw["base"])
    base.setdefault("n", 1)
    base.setdefault("m", 1)
    base_cfg = config_from_dict(base)
    results = convergence_sweep(sched, base_cfg)
    lines = [SWEEP_HEADER]
    for res in results:
        lines.append(
            f"{res.config.n},{res.config.m},{_fmt(res.lambda_hat)},"
            f"{_fmt(res.ks_normal)},{_fmt(res.tv_poisson)},"
            f"{_fmt(res.prob_at_zero)},{_fmt(res.empirical_mean)},"
            f"{_fmt(res.empirical_var)}"
        )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    _write(args.out, "sweep.csv", text)
    return 0


def cmd_theory(args) -> int:
    d = _resolve_distribution(args)
    if args.n is None:
        raise UsageError("theory needs --n")
    report = build_report(d, args.n, delta=args.delta, epsilon=args.epsilon)
    warnings = []
    if report.truncation_bound < 0.0:
        warnings.append(
            "truncation_bound is negative: (n, m) is below the asymptotic "
            "regime for this bound; reported raw, not clipped"
        )
    payload = {
        "version": __version__,
        "distribution": _dist_echo(args, d),
        "n": report.n,
        "m": report.m,
        "chi2_mean": report.chi2_mean,
        "chi2_var": report.chi2_var,
        "mean_u": report.mean_u,
        "mean_s": report.mean_s,
        "score_sum_mean": report.score_sum_mean,
        "score_sum_m2": report.score_sum_m2,
        "score_sum_m3": report.score_sum_m3,
        "score_mean_max": report.score_mean_max,
        "s_variance_ratio": report.s_variance_ratio,
        "delta": report.delta,
        "inv_moment_ratio": report.inv_moment_ratio,
        "epsilon": report.epsilon,
        "truncation_bound": report.truncation_bound,
        "lyapunov_rate_1": report.lyapunov_rate_1,
        "lyapunov_rate_2": report.lyapunov_rate_2,
        "warnings": warnings,
    }
    text = _dump_json(payload)
    sys.stdout.write(text)
    _write(args.out, "theory.json", text)
    return 0


def _add_dist_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dist", choices=["uniform", "powerlaw"], default=None,
                     help="analytic cell family")
    sub.add_argument("--alpha", type=float, default=None,
                     help="power-law exponent in [0, 1)")
    sub.add_argument("--m", type=int, default=None, help="number of cells")
    sub.add_argument("--probs", default=None, metavar="FILE",
                     help="custom cell probabilities, one per line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chi2-regimes",
                     description="chi-square with many cells: fit, simulate, sweep, theory")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    gof = subs.add_parser("gof", help="goodness of fit on observed counts")
    gof.add_argument("--counts", required=True, metavar="FILE",
                     help="CSV of cell_index,count rows")
    _add_dist_flags(gof)
    gof.add_argument("--convention", choices=list(CONVENTIONS), default=THEOREM)
    gof.add_argument("--lambda-lo", type=float, default=DEFAULT_LAMBDA_LO)
    gof.add_argument("--lambda-hi", type=float, default=DEFAULT_LAMBDA_HI)
    gof.add_argument("--out", default=None, metavar="DIR")
    gof.set_defaults(func=cmd_gof)

    sim = subs.add_parser("simulate", help="run one experiment from a config JSON")
    sim.add_argument("config", metavar="CONFIG.json")
    sim.add_argument("--out", default=None, metavar="DIR")
    sim.add_argument("--csv", action="store_true",
                     help="also write per-replicate values to replicates.csv")
    sim.set_defaults(func=cmd_simulate)

    swp = subs.add_parser("sweep", help="run a schedule and emit a series CSV")
    swp.add_argument("config", metavar="CONFIG.json")
    swp.add_argument("--out", default=None, metavar="DIR")
    swp.set_defaults(func=cmd_sweep)

    thy = subs.add_parser("theory", help="exact theory values for (distribution, n)")
    thy.add_argument("--n", type=int, default=None, help="sample size")
    _add_dist_flags(thy)
    thy.add_argument("--delta", type=float, default=1.0)
    thy.add_argument("--epsilon", type=float, default=0.5)
    thy.add_argument("--out", default=None, metavar="DIR")
    thy.set_defaults(func=cmd_theory)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (DataFormatError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, InvalidParameterError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Chi2RegimesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""The innerdyn command: one subcommand per experiment kind.

Each run reads a TOML config, dispatches to the library, and writes
summary.json plus one CSV per series into the output directory. Exit
code 0 is a healthy run, 1 a usage or config problem, 2 a run whose
health checks refused the data (or whose precision budget ran out).
"""

import argparse
import sys
import time

from ..dynamics import (
    UnhealthyRun,
    interior_orbit,
    summability_check,
    theorem_a_experiment,
    verify_rate_bounds,
)
from ..inner import Automorphism, LinearPlusTan, Rational2, angular_derivative, denjoy_wolff
from ..numerics import DomainError, PrecisionExhausted, pow2
from ..targets import (
    Complement,
    ConstantRule,
    DiskRadius,
    GeometricRule,
    PowerRule,
    hits,
    pullback_shrinkage_check,
    section4_bound_check,
)
from .config import KINDS, ConfigError, load_config, parse_decimal
from .report import ExperimentReport, write_outputs

OUTCOME_GATE = 100  # per-sample outcome tags go in the summary up to here


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="innerdyn", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True, help="TOML config path")
        sp.add_argument("--out", help="output directory (overrides output.path)")
        sp.add_argument("--seed", type=int, help="seed override (sampling kinds only)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.add_argument(
            "--no-figures", action="store_true", help="skip PNG rendering"
        )
    return parser


def _build_function(cfg):
    spec = cfg.function_spec
    variant = spec["variant"]
    if variant == "automorphism":
        return Automorphism(parse_decimal(spec["a"]))
    if variant == "rational2":
        return Rational2(parse_decimal(spec["lam"]))
    return LinearPlusTan(parse_decimal(spec["lam"]))


def _build_rule(spec):
    rule = spec["rule"]
    if rule == "power":
        return PowerRule(parse_decimal(spec["base"]), parse_decimal(spec["coeff"]))
    if rule == "geometric":
        return GeometricRule(parse_decimal(spec["scale"]), parse_decimal(spec["ratio"]))
    return ConstantRule(parse_decimal(spec["value"]))


def _locate_p(f, policy):
    return denjoy_wolff(f, policy, pow2(-policy.agreement_tol_bits, 64))


def _orbit_health(record):
    trunc = record.truncated_at
    return {
        "max_bits_used": max(pt.bits for pt in record.points),
        "points": len(record.points),
        "truncated_at": None if trunc is None else trunc[0],
        "truncation_reason": None if trunc is None else trunc[1],
    }


def _sample_errors(outcomes):
    errors = []
    for i, oc in enumerate(outcomes):
        tag = oc if isinstance(oc, str) else oc[0]
        if tag == "ok":
            continue
        entry = {"sample": i, "kind": tag}
        if not isinstance(oc, str) and len(oc) > 1:
            entry["step"] = oc[1]
        errors.append(entry)
    return errors


def _run_orbit(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    record = interior_orbit(f, cfg.parameters["n_max"], policy)
    rows = [(n, pt.distance) for n, pt in enumerate(record.points)]
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={"p_angle": record.p.angle},
        series={"distance_to_p": {"columns": ("n", "value"), "rows": rows}},
        health=_orbit_health(record),
    )


def _run_rate(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    par = cfg.parameters
    record = interior_orbit(f, par["n_max"], policy)
    if "alpha" in par:
        alpha = cfg.decimal("alpha")
    else:
        alpha = angular_derivative(f, record.p, "radial", policy)
    rr = verify_rate_bounds(record, alpha, cfg.decimal("delta"), par["n_min"])
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={
            "alpha_hat": alpha,
            "C_upper": rr.C_upper,
            "C_lower": rr.C_lower,
            "upper_holds": rr.upper_holds,
            "lower_holds": rr.lower_holds,
            "stable": rr.stable,
            "window_start": rr.window[0],
            "window_end": rr.window[1],
        },
        series={
            "upper_ratio": {
                "columns": ("n", "value"),
                "rows": [(n, up) for n, up, _ in rr.ratios],
            },
            "lower_ratio": {
                "columns": ("n", "value"),
                "rows": [(n, lo) for n, _, lo in rr.ratios],
            },
        },
        health=_orbit_health(record),
    )


def _run_summability(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    n_max = cfg.parameters["n_max"]
    record = interior_orbit(f, n_max, policy)
    sr = summability_check(record, n_max)
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={
            "summable": sr.summable,
            "tail_ratio": sr.tail_ratio,
            "horizon": sr.horizon,
            "partial_sum_final": sr.partial_sums[-1],
        },
        series={
            "summability_terms": {
                "columns": ("n", "value"),
                "rows": list(enumerate(sr.terms)),
            },
            "partial_sums": {
                "columns": ("n", "value"),
                "rows": list(enumerate(sr.partial_sums)),
            },
        },
        health=_orbit_health(record),
    )


def _run_theorem_a(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    par = cfg.parameters
    rep = theorem_a_experiment(
        f,
        cfg.decimal("eps"),
        par["samples"],
        par["seed"],
        par["n_enter"],
        par["n_max"],
        policy,
        alpha=cfg.decimal("alpha") if "alpha" in par else None,
        max_excluded_fraction=float(cfg.decimal("max_excluded_fraction")),
        workers=workers,
    )
    rows = [(n, frac) for n, _, frac in rep.per_n if n >= par["n_enter"]]
    tags = [oc[0] for oc in rep.outcomes]
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={
            "p_angle": rep.p.angle,
            "alpha_hat": rep.alpha,
            "eventually_fraction": rep.eventually_fraction,
            "eventually_count": rep.eventually_count,
            "start_bits": rep.start_bits,
        },
        series={"containment_fraction": {"columns": ("n", "value"), "rows": rows}},
        health={
            "included": rep.included,
            "rejected": rep.rejected,
            "indeterminate": rep.indeterminate,
            "max_bits_used": rep.max_bits_used,
        },
        errors=_sample_errors(rep.outcomes),
        outcomes=tags if par["samples"] <= OUTCOME_GATE else None,
    )


def _target_from(cfg, p):
    spec = cfg.target_spec
    center = p if spec["center"] == "p" else p.antipode()
    T = DiskRadius(center, _build_rule(spec))
    if spec["complement"]:
        T = Complement(T)
    return T


def _run_targets(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    par = cfg.parameters
    p = _locate_p(f, policy)
    T = _target_from(cfg, p)
    rep = hits(f, T, par["samples"], par["seed"], par["horizon"], policy,
               workers=workers)
    rows = list(enumerate(rep.fractions))
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={"p_angle": p.angle},
        series={"hit_fraction": {"columns": ("n", "value"), "rows": rows}},
        health={
            "included": rep.included,
            "rejected": rep.rejected,
            "indeterminate": rep.indeterminate,
        },
        errors=_sample_errors(rep.outcomes),
        outcomes=list(rep.outcomes) if par["samples"] <= OUTCOME_GATE else None,
    )


def _run_pullback_check(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    par = cfg.parameters
    p = _locate_p(f, policy)
    T = _target_from(cfg, p)
    rep = pullback_shrinkage_check(
        f,
        T,
        par["mode"],
        par["n_max"],
        n_burn=par["n_burn"],
        threshold=cfg.decimal("threshold"),
        endpoint_threshold=cfg.decimal("endpoint_threshold"),
        policy=policy,
    )
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={
            "p_angle": p.angle,
            "mode": rep.mode,
            "hypothesis_ok": rep.hypothesis_ok,
            "lengths_ok": rep.lengths_ok,
            "endpoints_ok": rep.endpoints_ok,
            "flag": rep.flag,
        },
        series={
            "hypothesis_ratio": {
                "columns": ("n", "value"),
                "rows": rep.hypothesis_ratios,
            },
            "pullback_length": {
                "columns": ("n", "value"),
                "rows": rep.pullback_lengths,
            },
            "endpoint_gap": {
                "columns": ("n", "value"),
                "rows": rep.endpoint_gaps,
            },
        },
    )


def _run_bound_check(cfg, workers):
    f = _build_function(cfg)
    policy = cfg.policy()
    par = cfg.parameters
    rep = section4_bound_check(
        f,
        cfg.decimal("eps"),
        cfg.decimal("C"),
        par["variant"],
        (par["n_min"], par["n_max"]),
        policy=policy,
        alpha=cfg.decimal("alpha") if "alpha" in par else None,
    )
    return ExperimentReport(
        cfg.kind,
        cfg.data,
        scalars={
            "variant": rep.variant,
            "all_hold": rep.all_hold,
            "bound_summable": rep.bound_summable,
            "bound_ratio": rep.bound_ratio,
            "alpha_hat": rep.alpha,
            "excluded_steps": list(rep.excluded),
        },
        series={
            "pullback_length_vs_bound": {
                "columns": ("n", "pullback_length", "bound"),
                "rows": [(n, L, b) for n, L, b, _ in rep.entries],
            }
        },
    )


_RUNNERS = {
    "orbit": _run_orbit,
    "rate": _run_rate,
    "summability": _run_summability,
    "theorem-a": _run_theorem_a,
    "targets": _run_targets,
    "pullback-check": _run_pullback_check,
    "bound-check": _run_bound_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"innerdyn: {exc}", file=sys.stderr)
        return 1

    try:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(
                f"config is kind {cfg.kind!r} but the subcommand is {args.kind!r}"
            )
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.workers < 1:
            raise ConfigError("workers must be positive")
        out_dir = args.out or cfg.output.get("path")
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set output.path")
    except (ConfigError, OSError) as exc:
        print(f"innerdyn: {exc}", file=sys.stderr)
        return 1

    figures = cfg.output["figures"] and not args.no_figures
    started = time.monotonic()
    try:
        report = _RUNNERS[cfg.kind](cfg, args.workers)
    except (UnhealthyRun, PrecisionExhausted) as exc:
        tag = "unhealthy-run" if isinstance(exc, UnhealthyRun) else "precision-exhausted"
        report = ExperimentReport(
            cfg.kind, cfg.data, errors=[{"error": tag, "detail": str(exc)}]
        )
        write_outputs(report, out_dir, run_info=_run_info(started, args.workers),
                      figures=False)
        print(f"innerdyn: {tag}: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"innerdyn: {exc}", file=sys.stderr)
        return 1

    write_outputs(report, out_dir, run_info=_run_info(started, args.workers),
                  figures=figures)
    return 0


def _run_info(started, workers):
    return {
        "wall_seconds": round(time.monotonic() - started, 3),
        "workers": workers,
    }


if __name__ == "__main__":
    sys.exit(main())

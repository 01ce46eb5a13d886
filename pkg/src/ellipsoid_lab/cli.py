"""Command-line surface: fit, phase, diagnose, moments, plot.

Exit codes are a contract: 0 success, 1 a fit that ran but failed its
certificate, 2 usage or environment errors.  The phase subcommand accepts
a flat JSON config file; explicit flags always win over file values, and
unknown keys are hard errors so a typo cannot silently change an
experiment.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from .construct import identity_perturbation_fit, least_norm_fit
from .diagnostics import diagnose, norm_certificates
from .experiment import (
    METHODS,
    ExperimentConfig,
    estimate_transition,
    records_to_csv,
    records_to_json,
    run_phase_sweep,
    summary_from_csv,
    summary_to_csv,
    summary_to_json,
)
from .gram import trace_moment
from .sampling import draw_sample_set
from .seeding import mix64

log = logging.getLogger("ellipsoid_lab")

# Config-file keys for the phase subcommand, with their expected shape.
_PHASE_KEYS = {
    "d_values": "int_list",
    "m_values": "int_list",
    "m_fractions": "float_list",
    "trials": "int",
    "master_seed": "int",
    "method": "str",
    "residual_tol": "float",
    "pd_tol": "float",
    "n_u": "int",
    "workers": "int",
    "timings": "bool",
    "out_dir": "str",
    "prefix": "str",
    "output_format": "str",
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        if args.verbose:
            log.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ellipsoid-lab",
        description="Exact ellipsoid fits for Gaussian point sets and their phase diagram.")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="run one fit and print its certificates")
    p_fit.add_argument("--d", type=int, required=True, help="ambient dimension")
    p_fit.add_argument("--m", type=int, required=True, help="number of points")
    p_fit.add_argument("--seed", type=int, default=0, help="sample seed")
    p_fit.add_argument("--method", choices=METHODS, default="identity_perturbation")
    p_fit.add_argument("--format", choices=("human", "json"), default="human")
    p_fit.set_defaults(func=cmd_fit)

    p_phase = sub.add_parser("phase", help="Monte Carlo sweep of the (d, m) grid")
    p_phase.add_argument("--config", help="flat JSON config file; flags override it")
    p_phase.add_argument("--d", dest="d_values", type=int, action="append",
                         help="dimension cell (repeatable)")
    p_phase.add_argument("--m", dest="m_values", type=int, action="append",
                         help="explicit m cell (repeatable)")
    p_phase.add_argument("--m-fraction", dest="m_fractions", type=float, action="append",
                         help="m as a fraction of d^2/4 (repeatable)")
    p_phase.add_argument("--trials", type=int)
    p_phase.add_argument("--master-seed", dest="master_seed", type=int)
    p_phase.add_argument("--method", choices=METHODS)
    p_phase.add_argument("--residual-tol", dest="residual_tol", type=float)
    p_phase.add_argument("--pd-tol", dest="pd_tol", type=float)
    p_phase.add_argument("--n-u", dest="n_u", type=int)
    p_phase.add_argument("--workers", type=int,
                         help="worker processes; 0 = one per CPU; "
                              "ELLIPSOID_LAB_THREADS overrides")
    p_phase.add_argument("--timings", action=argparse.BooleanOptionalAction,
                         help="record real wall times (breaks byte determinism)")
    p_phase.add_argument("--out-dir", dest="out_dir")
    p_phase.add_argument("--prefix")
    p_phase.add_argument("--format", dest="output_format", choices=("csv", "json"))
    p_phase.set_defaults(func=cmd_phase)

    p_diag = sub.add_parser("diagnose", help="event and probe statistics over seeds")
    p_diag.add_argument("--d", type=int, required=True)
    p_diag.add_argument("--m", type=int, required=True)
    p_diag.add_argument("--seeds", type=int, default=20, help="number of sample seeds")
    p_diag.add_argument("--master-seed", dest="master_seed", type=int, default=0)
    p_diag.add_argument("--n-u", dest="n_u", type=int, default=100,
                        help="random probes per seed")
    p_diag.add_argument("--include-gamma", action="store_true",
                        help="also solve M gamma = beta_light per probe")
    p_diag.add_argument("--format", choices=("csv", "json"), default="csv")
    p_diag.set_defaults(func=cmd_diagnose)

    p_mom = sub.add_parser("moments", help="trace-moment estimate against its bound")
    p_mom.add_argument("--d", type=int, required=True)
    p_mom.add_argument("--m", type=int, required=True)
    p_mom.add_argument("--t", type=int, required=True, help="even power, 2..8")
    p_mom.add_argument("--trials", type=int, default=200)
    p_mom.add_argument("--seed", type=int, default=0)
    p_mom.set_defaults(func=cmd_moments)

    p_plot = sub.add_parser("plot", help="render a summary CSV as a phase diagram")
    p_plot.add_argument("--summary", required=True, help="summary CSV from phase")
    p_plot.add_argument("--out", required=True, help="output image path")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def cmd_fit(args) -> int:
    s = draw_sample_set(args.d, args.m, args.seed)
    if args.method == "identity_perturbation":
        fit = identity_perturbation_fit(s)
    else:
        fit = least_norm_fit(s)
    stats = {
        "min": float(fit.delta.min()),
        "max": float(fit.delta.max()),
        "mean": float(fit.delta.mean()),
        "max_abs": float(abs(fit.delta).max()),
    }
    if args.format == "json":
        payload = {
            "method": fit.method, "d": args.d, "m": args.m, "seed": args.seed,
            "success": fit.success, "reason": fit.reason, "solve_ok": fit.solve_ok,
            "K_norm": fit.K_norm, "N_min_eig": fit.N_min_eig, "M_min_eig": fit.M_min_eig,
            "max_residual": fit.max_residual,
            "condition_estimate": fit.condition_estimate, "delta_stats": stats,
        }
        print(json.dumps(payload, indent=1))
    else:
        print(f"fit method={fit.method} d={args.d} m={args.m} seed={args.seed}")
        print(f"success={str(fit.success).lower()} reason={fit.reason} "
              f"solve_ok={str(fit.solve_ok).lower()}")
        print(f"K_norm={fit.K_norm:.12g} N_min_eig={fit.N_min_eig:.12g} "
              f"M_min_eig={fit.M_min_eig:.12g}")
        print(f"max_residual={fit.max_residual:.6e} "
              f"condition_estimate={fit.condition_estimate:.6e}")
        print(f"delta min={stats['min']:.12g} mean={stats['mean']:.12g} "
              f"max={stats['max']:.12g} max_abs={stats['max_abs']:.12g}")
    return 0 if fit.success else 1


def _load_phase_config(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a flat JSON object")
    for key, value in data.items():
        kind = _PHASE_KEYS.get(key)
        if kind is None:
            raise ValueError(f"unknown config key: {key!r}")
        if not _config_value_ok(kind, value):
            raise ValueError(f"config key {key!r} has the wrong shape for {kind}")
    return data


def _config_value_ok(kind: str, value) -> bool:
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "int_list":
        return (isinstance(value, list) and len(value) > 0
                and all(isinstance(v, int) and not isinstance(v, bool) for v in value))
    if kind == "float_list":
        return (isinstance(value, list) and len(value) > 0
                and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                        for v in value))
    return False


def cmd_phase(args) -> int:
    settings: dict = {}
    if args.config:
        settings.update(_load_phase_config(args.config))
    for key in _PHASE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if "d_values" not in settings:
        raise ValueError("no dimensions given: pass --d or put d_values in the config")
    cfg = ExperimentConfig(**settings)

    ext = cfg.output_format
    os.makedirs(cfg.out_dir, exist_ok=True)
    records_path = os.path.join(cfg.out_dir, f"{cfg.prefix}_records.{ext}")
    summary_path = os.path.join(cfg.out_dir, f"{cfg.prefix}_summary.{ext}")
    # Fail on unwritable output before any compute.
    for path in (records_path, summary_path):
        with open(path, "w"):
            pass

    table = run_phase_sweep(cfg)
    if ext == "csv":
        records_to_csv(table.records, records_path)
        summary_to_csv(table.cells, summary_path)
    else:
        records_to_json(table.records, records_path)
        summary_to_json(table.cells, summary_path)

    for c in table.cells:
        print(f"d={c.d} m={c.m} rate={c.rate:.3f} "
              f"wilson=[{c.wilson_lo:.3f}, {c.wilson_hi:.3f}] trials={c.trials}")
    for d in cfg.d_values:
        m_star = estimate_transition(table, d)
        if m_star is not None:
            print(f"d={d} transition m_star={m_star:.1f} "
                  f"m_star/(d^2/4)={m_star / (d * d / 4.0):.3f}")
    print(f"records -> {records_path}")
    print(f"summary -> {summary_path}")
    return 0


def cmd_diagnose(args) -> int:
    if args.seeds < 1:
        raise ValueError("need at least one seed")
    rows = []
    for i in range(args.seeds):
        seed = mix64(args.master_seed, args.d, args.m, i)
        s = draw_sample_set(args.d, args.m, seed)
        fit = identity_perturbation_fit(s)
        rep = diagnose(s, fit, n_u=args.n_u, seed=0, include_gamma=args.include_gamma)
        _, a_prime_norm, a_star_norm = norm_certificates(s)
        quad_max = max((p.quad_form for p in rep.beta_stats), default=0.0)
        heavy_max = max((p.heavy_count for p in rep.beta_stats), default=0)
        light_max = max((p.light_norm_sq for p in rep.beta_stats), default=0.0)
        row = {
            "seed_index": i, "seed": seed,
            "a_norm": rep.a_norm, "a_prime_norm": a_prime_norm,
            "a_star_norm": a_star_norm,
            "e1": int(rep.e1_pass), "eps_max": rep.eps_max, "e2": int(rep.e2_pass),
            "delta_max": rep.delta_max, "e3": int(rep.e3_pass),
            "m_inv_one_dev": rep.m_inv_one_dev,
            "heavy_count_max": heavy_max, "light_norm_sq_max": light_max,
            "quad_form_max": quad_max,
        }
        if args.include_gamma:
            row["gamma_norm_sq_max"] = max(
                (p.gamma_norm_sq for p in rep.beta_stats
                 if p.gamma_norm_sq is not None), default=0.0)
        rows.append(row)
    n = len(rows)
    aggregate = {
        "seeds": n,
        "e1_rate": sum(r["e1"] for r in rows) / n,
        "e2_rate": sum(r["e2"] for r in rows) / n,
        "e3_rate": sum(r["e3"] for r in rows) / n,
        "quad_lt_half_rate": sum(1 for r in rows if r["quad_form_max"] < 0.5) / n,
    }
    if args.format == "json":
        print(json.dumps({"rows": rows, "aggregate": aggregate}, indent=1))
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        print(f"# aggregate seeds={n} e1_rate={aggregate['e1_rate']:.3f} "
              f"e2_rate={aggregate['e2_rate']:.3f} e3_rate={aggregate['e3_rate']:.3f} "
              f"quad_lt_half_rate={aggregate['quad_lt_half_rate']:.3f}")
    return 0


def cmd_moments(args) -> int:
    mean_trace, bound = trace_moment(args.d, args.m, args.t, args.trials, args.seed)
    ratio = mean_trace / bound
    print(f"d={args.d} m={args.m} t={args.t} trials={args.trials} "
          f"mean_trace={mean_trace:.6e} bound={bound:.6e} ratio={ratio:.6e}")
    return 0


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cells = summary_from_csv(args.summary)
    if not cells:
        raise ValueError(f"no data rows in {args.summary}")

    by_d: dict[int, list] = {}
    for c in cells:
        by_d.setdefault(c.d, []).append(c)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    series = []
    for d in sorted(by_d):
        cs = sorted(by_d[d], key=lambda c: c.m)
        scale = d * d / 4.0
        xs = [c.m / scale for c in cs]
        rates = [c.rate for c in cs]
        lo_err = [c.rate - c.wilson_lo for c in cs]
        hi_err = [c.wilson_hi - c.rate for c in cs]
        label = f"d={d}"
        ax.errorbar(xs, rates, yerr=[lo_err, hi_err], marker="o", capsize=3,
                    label=label)
        series.append({
            "d": d, "label": label,
            "m": [c.m for c in cs], "x": xs, "rate": rates,
            "wilson_lo": [c.wilson_lo for c in cs],
            "wilson_hi": [c.wilson_hi for c in cs],
        })
    ax.axvline(1.0, linestyle="--", color="gray", linewidth=1)
    ax.set_xlabel("m / (d^2 / 4)")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    plt.close(fig)

    sidecar = {"image": args.out, "reference_line": 1.0, "series": series}
    with open(args.out + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
    print(f"plot -> {args.out}")
    print(f"sidecar -> {args.out}.json")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Subcommands:
    analyze   estimate the order of a dataset: sequential tests + AIC/BIC
    simulate  run a JSON grid of simulation scenarios to a results CSV
    datagen   draw an overlap-calibrated mixture and sample a dataset
    fit       fit a fixed number of components and save the parameters

Exit codes: 0 success, 2 parse error, 3 data error, 4 fit error,
5 overlap-calibration error, 1 any other package error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .backend import BACKEND
from .dataio import (
    load_dataset_csv,
    load_genspec_json,
    load_params_json,
    load_scenarios_json,
    normalize_variant,
    params_to_json_dict,
    write_dataset_csv,
    write_json,
)
from .em import FitConfig, fit_mle
from .errors import (
    DegenerateFitError,
    DimensionError,
    EmptyDataError,
    InsufficientComponentsError,
    InsufficientDataError,
    InvalidStatisticError,
    InvariantError,
    MixOrderError,
    OverlapUnreachableError,
    ParseError,
    PositiveDefiniteError,
)
from .harness import emit_results, run_scenario
from .mixture import sample
from .ordertests import TestConfig
from .simgen import generate_mixture_params
from .stp import AlphaSchedule, ic_values, information_criteria, run_stp

_EXIT_CODES = (
    (ParseError, 2),
    ((EmptyDataError, InsufficientDataError, DimensionError, InvariantError,
      InsufficientComponentsError, PositiveDefiniteError), 3),
    ((DegenerateFitError, InvalidStatisticError), 4),
    (OverlapUnreachableError, 5),
)


def _exit_code(exc: MixOrderError) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(exc, types):
            return code
    return 1


def _fmt_p(p: float, log_p: float) -> str:
    if p == 0.0 and log_p < 0.0:
        return "<1e-300"
    return f"{p:.6g}"


def _add_fit_flags(sub):
    sub.add_argument("--restarts", type=int, default=8,
                     help="EM restarts per fit (default 8)")
    sub.add_argument("--ridge", type=float, default=1e-6,
                     help="covariance ridge, relative to the data scale (default 1e-6)")
    sub.add_argument("--max-iters", type=int, default=1000)
    sub.add_argument("--rel-tol", type=float, default=1e-8)


def _schedule_from_flags(args) -> AlphaSchedule:
    if args.kappa is not None:
        return AlphaSchedule.power(args.kappa)
    return AlphaSchedule.fixed(args.alpha)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixorder",
        description="Order selection with confidence for Gaussian mixture models.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (kernels: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="sequential order tests + AIC/BIC on a CSV dataset")
    p.add_argument("--input", required=True, help="dataset CSV path")
    p.add_argument("--output", help="write the full result as JSON here")
    p.add_argument("--variant", default="swapped",
                   choices=["split1", "split2", "swapped"])
    p.add_argument("--l", type=int, default=2,
                   help="alternative fits g+l components (default 2)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=None,
                   help="use the shrinking level n1^-kappa instead of --alpha")
    p.add_argument("--g-max", type=int, default=20)
    p.add_argument("--ic-g-max", type=int, default=None,
                   help="orders in the AIC/BIC table (default: one past the "
                        "sequential estimate, at least 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n1-fraction", type=float, default=0.5)
    _add_fit_flags(p)

    p = sub.add_parser("simulate", help="run a scenario grid to a results CSV")
    p.add_argument("--grid", required=True, help="JSON array of scenarios")
    p.add_argument("--output", required=True, help="results CSV path")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("datagen", help="generate an overlap-calibrated dataset")
    p.add_argument("--spec", required=True, help="generator spec JSON path")
    p.add_argument("--n", type=int, required=True, help="rows to sample")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-params", required=True)

    p = sub.add_parser("fit", help="fit a g-component mixture to a CSV dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--output", help="write fitted parameters JSON here")
    p.add_argument("--seed", type=int, default=0)
    _add_fit_flags(p)

    return parser


def _cmd_analyze(args) -> int:
    data = load_dataset_csv(args.input)
    if not (0.0 < args.n1_fraction < 1.0):
        raise InvariantError("--n1-fraction must be in (0, 1)")
    n1 = int(math.floor(data.n * args.n1_fraction))
    if n1 < 1 or n1 >= data.n:
        raise InsufficientDataError(f"n={data.n} cannot be split at {args.n1_fraction}")

    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    fit_cfg = FitConfig(restarts=args.restarts, max_iters=args.max_iters,
                        rel_tol=args.rel_tol, cov_ridge=args.ridge, seed=args.seed)
    test_cfg = TestConfig(l=args.l, variant=normalize_variant(args.variant),
                          fit_cfg=fit_cfg)
    schedule = _schedule_from_flags(args)
    outcome = run_stp(data, test_cfg, schedule, g_max=args.g_max, rng=rng, n1=n1)

    print(f"n={data.n} d={data.d} split=({n1},{data.n - n1}) "
          f"variant={test_cfg.variant} l={args.l} alpha={outcome.alpha_used:g} "
          f"seed={args.seed}")
    print(f"{'g':>3} {'variant':>9} {'log p':>14} {'p':>12} decision")
    for t in outcome.trail:
        decision = "reject" if t.p <= outcome.alpha_used else "fail to reject"
        print(f"{t.g:>3} {t.variant:>9} {t.log_p:>14.4f} "
              f"{_fmt_p(t.p, t.log_p):>12} {decision}")
    cap = " (hit g_max cap)" if outcome.hit_cap else ""
    print(f"estimated order (confidence lower bound): g_hat = {outcome.g_hat}{cap}")
    print(f"  i.e. Pr(true order >= {outcome.g_hat}) >= "
          f"{1.0 - outcome.alpha_used:g}")

    ic_g_max = args.ic_g_max
    if ic_g_max is None:
        ic_g_max = max(3, outcome.g_hat + 1)
    table = information_criteria(data, ic_g_max, fit_cfg)
    print(f"\ninformation criteria on the full data (n={data.n}):")
    print(f"{'g':>3} {'dim':>5} {'loglik':>14} {'AIC':>12} {'BIC':>12}")
    for row in table.rows:
        if row.aic is None:
            print(f"{row.g:>3} {row.dim:>5} {'fit failed':>14}")
        else:
            print(f"{row.g:>3} {row.dim:>5} {row.log_likelihood:>14.4f} "
                  f"{row.aic:>12.5f} {row.bic:>12.5f}")
    print(f"AIC argmin: {table.g_aic}   BIC argmin: {table.g_bic}")

    if args.output:
        write_json({"stp": outcome.to_json_dict(), "ic": table.to_json_dict()},
                   args.output)
        print(f"wrote {args.output}")
    return 0


def _cmd_simulate(args) -> int:
    scenarios = load_scenarios_json(args.grid)
    rows = []
    for i, s in enumerate(scenarios, start=1):
        print(f"[{i}/{len(scenarios)}] {s.scenario_id} (r={s.r}) ...", flush=True)
        rows.append(run_scenario(s, threads=args.threads))
        row = rows[-1]
        print(f"    cov_prop={row.cov_prop:.3f} mean_comp={row.mean_comp:.3f} "
              f"corr_prop={row.corr_prop:.3f} failures={row.failures}", flush=True)
    sidecar = emit_results(rows, args.output)
    print(f"wrote {args.output} and {sidecar}")
    return 0


def _cmd_datagen(args) -> int:
    spec = load_genspec_json(args.spec)
    gen = generate_mixture_params(spec)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1,)))
    data = sample(gen.params, args.n, rng)
    write_dataset_csv(data, args.out_csv)
    write_json(gen.to_json_dict(), args.out_params)
    print(f"g0={spec.g0} d={spec.d} target omega_bar={spec.omega_bar_target:g} "
          f"achieved={gen.achieved_omega_bar:.5f} (cov scale {gen.cov_scale:.4g})")
    print(f"wrote {args.out_csv} ({args.n} rows) and {args.out_params}")
    return 0


def _cmd_fit(args) -> int:
    data = load_dataset_csv(args.input)
    cfg = FitConfig(restarts=args.restarts, max_iters=args.max_iters,
                    rel_tol=args.rel_tol, cov_ridge=args.ridge, seed=args.seed)
    fit = fit_mle(data, args.g, cfg)
    aic, bic = ic_values(fit.log_likelihood, args.g, data.d, data.n)
    print(f"fit g={args.g} on n={data.n}, d={data.d}: "
          f"loglik={fit.log_likelihood:.6f} converged={fit.converged} "
          f"iterations={fit.iterations} restart={fit.restart_index}")
    print(f"AIC={aic:.6f} BIC={bic:.6f}")
    print("weights:", " ".join(f"{w:.4f}" for w in fit.params.weights))
    if args.output:
        write_json(params_to_json_dict(fit.params), args.output)
        print(f"wrote {args.output}")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "datagen": _cmd_datagen,
    "fit": _cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MixOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())

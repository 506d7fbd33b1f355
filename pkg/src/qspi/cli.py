"""Command-line entry points: design, response, perr, scaling, simulate, estimate, wigner.

Exit status: 0 on success, 1 on usage errors, 2 when a numerical invariant fails.
Every file written gets a ``<file>.manifest.json`` sidecar holding the full
argument vector, the resolved inputs and the headline results.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decision import DecisionProblem, perr_analytic, perr_quadrature
from .errors import DegenerateFit, InvariantViolation, PhaseFileError
from .io import atomic_write_text, fmt, write_csv, write_manifest
from .laurent import build_laurent_recursive, read_phase_file, write_phase_file
from .optimize import (
    OptimizerConfig,
    make_objective,
    nelder_mead,
    optimize_phases,
    restart_start,
    scaling_sweep,
    transfer_design,
)
from .response import response_coefficients, response_probability

log = logging.getLogger("qspi")

TABLE1_KAPPA = 0.15 * math.sqrt(2)
DESIGN_KAPPA = 1 / 2048


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_float(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _beta_th(text):
    if text == "auto":
        return "auto"
    return _positive_float(text)


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _resolve_beta_th(value, kappa):
    # Protocol step 1: kappa = pi / (4 beta_th), read in reverse
    return math.pi / (4 * kappa) if value == "auto" else float(value)


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        restarts=args.restarts,
        keep_top=min(args.keep_top, args.restarts),
        max_iterations=args.max_iterations,
        rng_seed=args.seed,
        threads=args.threads,
    )


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="cap on internal parallelism")
    p.add_argument("--config", help="file of '--flag value' lines; explicit flags win")
    p.add_argument("--verbose", action="store_true")


def _add_optimizer(p):
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--keep-top", type=int, default=4)
    p.add_argument("--max-iterations", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qspi", description="Quantum signal processing interferometry toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="optimise phases and write a phase file")
    p.add_argument("--d", type=int, required=True, help="protocol degree")
    p.add_argument("--kappa", type=_positive_float, required=True)
    p.add_argument("--beta-th", type=_beta_th, default="auto", help="threshold or 'auto' = pi/(4 kappa)")
    p.add_argument("--output", default=None, help="phase file (default phases_d<d>.txt)")
    p.add_argument("--trace", default=None, help="write the winning restart's coarse trace here")
    _add_optimizer(p)
    _add_common(p)

    p = sub.add_parser("response", help="response curve CSV from a phase file")
    p.add_argument("--phases", required=True)
    p.add_argument("--beta-min", type=float, default=0.0)
    p.add_argument("--beta-max", type=float, default=None, help="default pi/(2 kappa)")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--output", required=True)
    _add_common(p)

    p = sub.add_parser("perr", help="decision error of a phase file")
    p.add_argument("--phases", required=True)
    p.add_argument("--output", default=None, help="optional JSON report")
    _add_common(p)

    p = sub.add_parser("scaling", help="p_err versus degree sweep")
    p.add_argument("--degrees", type=_int_list, default=[1, 3, 5, 7, 9, 11, 13])
    p.add_argument("--kappa", type=_positive_float, default=DESIGN_KAPPA)
    p.add_argument("--beta-th", type=_beta_th, default="auto")
    p.add_argument("--output", required=True, help="CSV d,p_err,slope_running")
    p.add_argument("--phase-dir", default=None, help="also write one phase file per degree")
    _add_optimizer(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="Fock-space simulation of the protocol")
    p.add_argument("--phases", default=None)
    p.add_argument("--beta", type=float, action="append", default=None)
    p.add_argument("--N", type=int, default=500, help="Fock truncation")
    p.add_argument("--table1", action="store_true", help="reproduce the readout table preset")
    p.add_argument("--table1-degrees", type=_int_list, default=[5, 9, 13])
    p.add_argument("--output", default=None, help="CSV output")
    _add_optimizer(p)
    _add_common(p)

    p = sub.add_parser("estimate", help="binary-search estimation Monte Carlo")
    p.add_argument("--R", type=_positive_float, required=True)
    p.add_argument("--delta", type=_positive_float, required=True)
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--d", type=int, default=13)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--true-beta", type=float, default=None, help="default: uniform on [0, R)")
    p.add_argument("--backend", choices=("series", "simulator"), default="series")
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--output", required=True, help="CSV trial,true_beta,low,high,queries,success")
    _add_optimizer(p)
    _add_common(p)

    p = sub.add_parser("wigner", help="Wigner CSVs of the two sensing-state branches")
    p.add_argument("--phases", required=True)
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--x-min", type=float, default=-6.0)
    p.add_argument("--x-max", type=float, default=6.0)
    p.add_argument("--p-min", type=float, default=-6.0)
    p.add_argument("--p-max", type=float, default=6.0)
    p.add_argument("--step", type=_positive_float, default=0.2)
    p.add_argument("--units", choices=("quadrature", "alpha"), default="quadrature")
    p.add_argument("--normalize-branch", action="store_true")
    p.add_argument("--linthresh", type=_positive_float, default=1e-3, help="symlog linear threshold")
    p.add_argument("--output-prefix", required=True)
    _add_common(p)
    return parser


def _expand_config(argv):
    """Insert flags from ``--config`` right after the subcommand so later flags override them."""
    argv = list(argv)
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        text = Path(known.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {known.config}: {exc}") from exc
    extra = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            extra.extend(shlex.split(line))
    cmd_at = next((i for i, a in enumerate(argv) if not a.startswith("-")), None)
    if cmd_at is None:
        raise UsageError("a subcommand is required before --config")
    return argv[: cmd_at + 1] + extra + argv[cmd_at + 1 :]


def _inputs(args) -> dict:
    out = {}
    for key, value in vars(args).items():
        if key.startswith("_"):
            continue
        out[key] = value if isinstance(value, (int, float, str, list, type(None), bool)) else str(value)
    return out


def _manifest(args, output, results):
    write_manifest(output, args.command, {"argv": args._argv, **_inputs(args)}, results)


# --- subcommands -----------------------------------------------------------


def cmd_design(args):
    if args.d < 0:
        raise UsageError("--d must be non-negative")
    beta_th = _resolve_beta_th(args.beta_th, args.kappa)
    try:
        dp = DecisionProblem(args.kappa, beta_th, args.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cfg = _optimizer_config(args)
    res = optimize_phases(dp, cfg)
    output = args.output or f"phases_d{args.d}.txt"
    write_phase_file(output, res.phases)
    _manifest(args, output, {
        "p_err": res.p_err, "beta_th": beta_th, "iterations": res.iterations,
        "converged": res.converged, "restart_index": res.restart_index,
    })
    if args.trace:
        start = restart_start(cfg.rng_seed, res.restart_index, args.d + 1)
        nm = nelder_mead(make_objective(dp), start, cfg, cfg.coarse_cap(args.d), record_trace=True)
        atomic_write_text(args.trace, "".join(f"{i},{fmt(v)}\n" for i, v in nm.trace))
    print(f"p_err {fmt(res.p_err)}")
    print(f"wrote {output}")
    return 0


def _load_phases(path):
    try:
        return read_phase_file(path)
    except (OSError, PhaseFileError) as exc:
        raise UsageError(f"cannot load phase file {path}: {exc}") from exc


def cmd_response(args):
    if args.points < 1:
        raise UsageError("--points must be at least 1 (empty beta grid)")
    phases = _load_phases(args.phases)
    beta_max = math.pi / (2 * phases.kappa) if args.beta_max is None else args.beta_max
    betas = np.linspace(args.beta_min, beta_max, args.points)
    rs = response_coefficients(build_laurent_recursive(phases), phases.kappa)
    probs = np.atleast_1d(response_probability(rs, betas))
    write_csv(args.output, ["beta", "probability"], zip(betas, probs))
    _manifest(args, args.output, {"points": args.points})
    print(f"wrote {args.output}")
    return 0


def cmd_perr(args):
    phases = _load_phases(args.phases)
    dp = DecisionProblem(phases.kappa, phases.beta_th, phases.degree)
    rs = response_coefficients(build_laurent_recursive(phases), phases.kappa)
    p_err = perr_analytic(rs, dp)
    split = perr_quadrature(lambda b: response_probability(rs, b), dp)
    print(f"p_err {fmt(p_err)}")
    print(f"p_fn {fmt(split.p_fn)}")
    print(f"p_fp {fmt(split.p_fp)}")
    if args.output:
        report = {"p_err": p_err, "p_fn": split.p_fn, "p_fp": split.p_fp, "p_err_quadrature": split.p_err}
        atomic_write_text(args.output, json.dumps(report, indent=2, sort_keys=True) + "\n")
        _manifest(args, args.output, report)
    return 0


def cmd_scaling(args):
    degrees = sorted(args.degrees)
    if any(d < 0 for d in degrees):
        raise UsageError("degrees must be non-negative")
    beta_th = _resolve_beta_th(args.beta_th, args.kappa)
    report = scaling_sweep(degrees, args.kappa, beta_th, _optimizer_config(args))
    write_csv(args.output, ["d", "p_err", "slope_running"],
              [(r.degree, r.p_err, r.slope_running) for r in report.rows])
    if args.phase_dir:
        for r in report.rows:
            write_phase_file(Path(args.phase_dir) / f"phases_d{r.degree}.txt", r.result.phases)
    fit = report.fit
    results = {
        "slope": None if fit is None else fit.slope,
        "slope_stderr": None if fit is None else fit.stderr,
        "intercept": None if fit is None else fit.intercept,
        "log_model_prefactor": report.prefactor,
        "beta_th": beta_th,
    }
    _manifest(args, args.output, results)
    for r in report.rows:
        print(f"d={r.degree} p_err={fmt(r.p_err)}")
    print("slope n/a (fewer than 3 degrees)" if fit is None else f"slope {fit.slope:.4f} +- {fit.stderr:.4f}")
    return 0


def cmd_simulate(args):
    from .simulator import run_protocol, table1_probabilities

    if args.table1:
        kappa, beta_th = TABLE1_KAPPA, math.pi / (4 * TABLE1_KAPPA)
        cfg = _optimizer_config(args)
        designs = {d: transfer_design(d, DESIGN_KAPPA, kappa, cfg)[1].phases for d in args.table1_degrees}
        rows = table1_probabilities(designs, kappa, beta_th, args.N)
        print("state,p_below,p_above")
        for r in rows:
            print(f"{r.label},{r.p_below:.3f},{r.p_above:.3f}")
        if args.output:
            write_csv(args.output, ["state", "p_below", "p_above"], [(r.label, r.p_below, r.p_above) for r in rows])
            _manifest(args, args.output, {r.label: [r.p_below, r.p_above] for r in rows})
            for d, ph in designs.items():
                write_phase_file(Path(args.output).with_name(f"table1_phases_d{d}.txt"), ph)
        return 0
    if args.phases is None or not args.beta:
        raise UsageError("simulate needs --phases and at least one --beta (or --table1)")
    phases = _load_phases(args.phases)
    rows = [(b, run_protocol(phases, b, args.N)) for b in args.beta]
    for b, p in rows:
        print(f"beta {fmt(b)} probability {fmt(p)}")
    if args.output:
        write_csv(args.output, ["beta", "probability"], rows)
        _manifest(args, args.output, {"probabilities": [p for _, p in rows]})
    return 0


def cmd_estimate(args):
    from .estimation import (
        PhaseCache, SearchPlan, monte_carlo, records_csv_rows, series_probability, simulator_probability,
    )

    try:
        plan = SearchPlan(args.R, args.delta, args.M, args.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    designs = PhaseCache(_optimizer_config(args)).prepare(plan)
    prob = series_probability if args.backend == "series" else simulator_probability(args.N)
    summary = monte_carlo(plan, designs, args.trials, args.seed, prob, args.true_beta)
    write_csv(args.output, ["trial", "true_beta", "low", "high", "queries", "success"],
              records_csv_rows(summary.records))
    results = {
        "failure_rate": summary.failure_rate, "model": summary.model, "sigma": summary.sigma,
        "kappa": plan.kappa, "decisions": plan.n_decisions,
        "design_p_err": {fmt(t): r.p_err for t, r in designs.items()},
    }
    _manifest(args, args.output, results)
    print(f"failure rate {summary.failure_rate:.4f} model {summary.model:.4f} "
          f"(3 sigma {3 * summary.sigma:.4f}) over {summary.n_trials} trials")
    return 0


def cmd_wigner(args):
    from .simulator import sensing_state_branches
    from .wigner import branch_csv, symlog_metadata, wigner, write_grid_csv

    phases = _load_phases(args.phases)
    down, up = sensing_state_branches(phases, args.N)
    for label, psi in (("down", down), ("up", up)):
        norm = float(np.linalg.norm(psi))
        if args.normalize_branch and norm > 0:
            psi = psi / norm
        grid = wigner(psi, args.x_min, args.x_max, args.p_min, args.p_max, args.step, args.units)
        path = Path(f"{args.output_prefix}_{label}.csv")
        write_grid_csv(path, grid)
        meta = symlog_metadata(grid, args.linthresh)
        atomic_write_text(path.with_name(path.name + ".plot.json"), json.dumps(meta, indent=2) + "\n")
        _manifest(args, path, {"branch_norm": norm, "grid_integral": grid.integral()})
        fock = Path(f"{args.output_prefix}_{label}_fock.csv")
        atomic_write_text(fock, branch_csv(psi))
        _manifest(args, fock, {"branch_norm": norm})
        print(f"wrote {path} and {fock}")
    return 0


COMMANDS = {
    "design": cmd_design,
    "response": cmd_response,
    "perr": cmd_perr,
    "scaling": cmd_scaling,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "wigner": cmd_wigner,
}


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_config(argv))
        args._argv = argv
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (InvariantViolation, DegenerateFit) as exc:
        print(f"numerical invariant failed: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

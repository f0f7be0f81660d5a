"""Command-line front end.

Subcommands::

    rate       rho and r from (lambda, K, m, epsilon)
    bound      mixing times and bound curves for a starting drift value
    oracle     exact checks on a finite chain, or the cubic scaling fit
    simulate   Monte Carlo regeneration tails against the tail bound
    pump       pump-failure Gibbs sampler (``pump reproduce``)

Exit status is 0 on success, 1 for invalid input or a failed check, and 2
when an internal numerical procedure breaks down.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds, io, oracle
from .chains import (
    DriftSpec,
    extract_minorization,
    load_chain,
    verify_drift,
    verify_minorization,
)
from .errors import DriftBoundsError, NumericalError

log = logging.getLogger("driftbounds")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
CHECKS = ("drift", "minorization", "stationary", "l2-theorem", "core-lemma",
          "supporting-lemmas", "tail-bound", "tv-theorem")
# checks that need a reversible chain with nonnegative spectrum
_REVERSIBLE_ONLY = {"l2-theorem", "core-lemma", "tv-theorem"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- parsing

def _float_list(text: str) -> list:
    """``"a,b,c"`` or ``"start:stop:step"`` (inclusive stop)."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _add_rate_args(p):
    p.add_argument("--lambda", dest="lam", type=float, help="drift rate off the small set")
    p.add_argument("--K", type=float, help="drift ceiling on the small set")
    p.add_argument("--m", type=int, default=1, help="minorization step count")
    p.add_argument("--eps", type=float, default=1.0, help="minorization mass")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print a JSON summary")
    common.add_argument("--full-precision", action="store_true",
                        help="print floats in full precision instead of 6 significant digits")
    common.add_argument("--plot", action="store_true", help="render PNG figures next to CSV files")
    common.add_argument("--out", help=f"output directory (default ${io.OUTPUT_ENV} or .)")
    common.add_argument("--config", help="JSON or YAML file supplying default flag values")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="driftbounds", description="Convergence bounds from drift and minorization.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("rate", parents=[common], help="rate parameters rho and r")
    _add_rate_args(p)

    p = sub.add_parser("bound", parents=[common], help="mixing times and bound curves")
    _add_rate_args(p)
    p.add_argument("--Vx", type=float, default=1.0, help="drift function at the start state")
    p.add_argument("--target-tv", type=float, default=0.01)
    p.add_argument("--target-v", type=float, default=0.02)
    p.add_argument("--csv", help="bound-curve CSV path (default bound_curve.csv)")

    p = sub.add_parser("oracle", parents=[common], help="exact finite-chain checks")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--nearly-periodic", type=int, metavar="N")
    src.add_argument("--chain", help="whitespace-separated transition matrix file")
    p.add_argument("--C", type=_int_list, help="small set as comma-separated state indices")
    p.add_argument("--V", help="file with drift function values (default: built from hitting times)")
    p.add_argument("--drift-lambda", type=float, help="lambda for --V or for the built drift function")
    p.add_argument("--drift-K", type=float, help="K for --V (default: max of PV over C)")
    p.add_argument("--check", action="append", choices=CHECKS, default=None)
    p.add_argument("--all-checks", action="store_true")
    p.add_argument("--scaling", type=_int_list, metavar="N1,N2,...")
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--start", type=int, default=0, help="start state for the distance-curve CSV")
    p.add_argument("--csv", help="distance-curve CSV path")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo regeneration tail")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pump", action="store_true")
    src.add_argument("--nearly-periodic", type=int, metavar="N")
    src.add_argument("--chain")
    p.add_argument("--C", type=_int_list)
    p.add_argument("--from", dest="start", type=float,
                   help="start state (default: 6.5 for the pump, nu for finite chains)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.61,
                   help="pump drift rate defining the small set")
    p.add_argument("--data", help="pump data file")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="tail CSV path (default tail_estimate.csv)")

    p = sub.add_parser("pump", help="pump-failure experiments")
    psub = p.add_subparsers(dest="pump_command", parser_class=_Parser)
    r = psub.add_parser("reproduce", parents=[common], help="optimize lambda and report mixing times")
    r.add_argument("--lambda-grid", type=_float_list, help="comma list or start:stop:step")
    r.add_argument("--emit-curve", action="store_true", help="write the (lambda, rho) CSV")
    r.add_argument("--data", help="pump data file (two columns: failures, hours)")
    r.add_argument("--from", dest="start", type=float, default=6.5)
    r.add_argument("--target-tv", type=float, default=0.01)
    r.add_argument("--target-v", type=float, default=0.02)
    return parser


def _load_config(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a mapping of flag names to values")
    return data


def _leaf_parser(parser, args):
    """The subparser that handled ``args``."""
    node = parser
    for dest in ("command", "pump_command"):
        name = getattr(args, dest, None)
        if name is None:
            break
        sub = next(a for a in node._actions if isinstance(a, argparse._SubParsersAction))
        node = sub.choices[name]
    return node


def _apply_config(parser, argv, args):
    """Reparse with defaults taken from ``args.config``; explicit flags still win."""
    leaf = _leaf_parser(parser, args)
    by_name = {}
    for action in leaf._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_name[opt[2:].replace("-", "_")] = action
    defaults = {}
    for key, value in _load_config(args.config).items():
        action = by_name.get(str(key).replace("-", "_"))
        if action is None:
            raise UsageError(f"config key {key!r} is not a flag of '{leaf.prog}'")
        if action.type is not None and isinstance(value, str):
            value = action.type(value)
        elif action.type in (_int_list, _float_list) and not isinstance(value, list):
            value = action.type(str(value))
        defaults[action.dest] = value
    leaf.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------- output

class _Output:
    def __init__(self, args):
        self.as_json = args.json
        self.digits = None if args.full_precision else io.DEFAULT_DIGITS
        self.plot = args.plot
        self.dir = io.output_dir(args.out)

    def path(self, explicit, default_name) -> Path:
        return Path(explicit) if explicit else self.dir / default_name

    def emit(self, summary: dict):
        if self.as_json:
            print(json.dumps(io.to_jsonable(summary, self.digits), indent=2, sort_keys=True))
            return
        for key, value in summary.items():
            print(f"{key}: {self._text(value)}")

    def _text(self, value):
        if isinstance(value, dict):
            return ", ".join(f"{k}={self._text(v)}" for k, v in value.items())
        if isinstance(value, (list, tuple)):
            return "[" + ", ".join(self._text(v) for v in value) + "]"
        if isinstance(value, (int, float, np.integer, np.floating)):
            return io.fmt(value, self.digits)
        return str(value)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n.replace("_", "-")) for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


# ---------------------------------------------------------------- commands

def cmd_rate(args, out: _Output) -> int:
    _require(args, "lam", "K")
    p = bounds.DriftParams(lam=args.lam, K=args.K, m=args.m, epsilon=args.eps)
    rate = bounds.compute_rate_params(p)
    out.emit({"lambda": p.lam, "K": p.K, "m": p.m, "epsilon": p.epsilon,
              "B": rate.B, "rho": rate.rho, "r": rate.r})
    return EXIT_OK


def cmd_bound(args, out: _Output) -> int:
    _require(args, "lam", "K")
    if not args.Vx >= 1.0:
        raise UsageError("--Vx must be >= 1")
    p = bounds.DriftParams(lam=args.lam, K=args.K, m=args.m, epsilon=args.eps)
    rate = bounds.compute_rate_params(p)
    tv = bounds.tv_bound_poly(rate, p, args.Vx)
    vn = bounds.vnorm_bound_poly(rate, p, args.Vx)
    tau_tv = bounds.mixing_time(tv, args.target_tv)
    tau_v = bounds.mixing_time(vn, args.target_v)
    t = np.arange(max(tau_tv, tau_v) + 21)
    tv_vals, vn_vals = tv.value(t), vn.value(t)
    csv_path = io.write_csv(out.path(args.csv, "bound_curve.csv"), ["t", "tv_bound", "vnorm_bound"],
                            zip(t, tv_vals, vn_vals), digits=out.digits)
    summary = {"rho": rate.rho, "r": rate.r, "B": rate.B, "tau_tv": tau_tv, "tau_v": tau_v,
               "tv_f1": tv.f1, "tv_f0": tv.f0, "vnorm_branch": vn.branch, "csv": str(csv_path)}
    if out.plot:
        from . import plotting

        summary["plot"] = str(plotting.plot_bound_curves(
            csv_path.with_suffix(".png"), t, tv_vals, vn_vals,
            tau_tv, tau_v, args.target_tv, args.target_v))
    out.emit(summary)
    return EXIT_OK


def _finite_problem(args):
    """(chain, drift, mino, label) for ``--nearly-periodic`` or ``--chain``."""
    if args.nearly_periodic is not None:
        chain, drift, mino = oracle.nearly_periodic_chain(args.nearly_periodic)
        return chain, drift, mino, f"nearly-periodic N={args.nearly_periodic}"
    if args.chain is None:
        raise UsageError("choose a chain with --nearly-periodic N or --chain FILE")
    if not args.C:
        raise UsageError("--chain needs a small set --C")
    chain = load_chain(args.chain)
    mino = extract_minorization(chain, args.C)
    if getattr(args, "V", None):
        _require(args, "drift_lambda")
        V = np.loadtxt(args.V, dtype=float).ravel()
        K = args.drift_K
        if K is None:
            K = max(1.0, float((chain.P @ V)[list(args.C)].max()))
        drift = DriftSpec(V=V, C=args.C, lam=args.drift_lambda, K=K)
    else:
        drift = oracle.minimal_drift_spec(chain, args.C, getattr(args, "drift_lambda", None))
    return chain, drift, mino, str(args.chain)


def _run_check(name, chain, drift, mino, horizon):
    """Returns (passed, detail dict)."""
    if name == "drift":
        chk = verify_drift(chain, drift)
        return chk.holds, {"worst_violation": chk.worst_violation, "witness": chk.witness}
    if name == "minorization":
        return verify_minorization(chain, drift.C, mino), {"epsilon": mino.epsilon}
    if name == "stationary":
        pi = oracle.stationary_distribution(chain)
        reg = oracle.stationary_via_regeneration(chain, drift.C, mino)
        err = float(np.abs(pi - reg).sum())
        return err <= 1e-10, {"l1_error": err}
    if name == "l2-theorem":
        rep = oracle.check_l2_theorem(chain, drift.C, mino, horizon)
        return rep.holds, {"max_violation": rep.max_violation}
    if name == "core-lemma":
        rep = oracle.check_core_lemma(chain, drift.C, mino, horizon)
        return rep.holds, {"max_increase": rep.max_increase, "max_violation": rep.max_violation}
    if name == "supporting-lemmas":
        rep = oracle.check_supporting_lemmas(chain, drift, mino, horizon)
        return rep.holds, {"b_bound_slack": rep.b_bound_slack, "pi_v_slack": rep.pi_v_slack,
                           "tv_to_v_slack": rep.tv_to_v_slack, "failures": list(rep.failures)}
    if name == "tail-bound":
        rep = oracle.check_tail_bound(chain, drift, mino, horizon)
        return rep.holds, {"max_excess": rep.max_excess, "witness": list(rep.witness)}
    if name == "tv-theorem":
        rep = oracle.check_tv_theorem(chain, drift, mino, horizon)
        return rep.holds, {"tv_max_excess": rep.tv.max_excess,
                           "vnorm_max_excess": rep.vnorm.max_excess}
    raise UsageError(f"unknown check {name!r}")


def cmd_oracle(args, out: _Output) -> int:
    from .chains import spectral_report

    summary, ok = {}, True
    if args.scaling:
        rep = oracle.cubic_scaling_experiment(args.scaling)
        summary["scaling_slope"] = rep.slope
        summary["scaling_intercept"] = rep.intercept
        summary["scaling_gaps"] = {str(N): g for N, g in rep.per_N}
        csv_path = io.write_csv(out.path(None, "scaling.csv"), ["N", "one_minus_rho_tv"],
                                rep.per_N, digits=out.digits)
        summary["scaling_csv"] = str(csv_path)
        if out.plot:
            from . import plotting

            N, gaps = zip(*rep.per_N)
            summary["scaling_plot"] = str(plotting.plot_scaling(
                csv_path.with_suffix(".png"), N, gaps, rep.slope, rep.intercept))
        if args.nearly_periodic is None and args.chain is None:
            out.emit(summary)
            return EXIT_OK

    chain, drift, mino, label = _finite_problem(args)
    summary["chain"] = label
    requested = list(CHECKS) if args.all_checks else (args.check or [])
    if not requested and not args.csv:
        requested = ["drift", "minorization", "stationary"]
    spec = spectral_report(chain)
    applicable = spec.reversible and spec.nonnegative_spectrum
    checks = {}
    for name in requested:
        if name in _REVERSIBLE_ONLY and not applicable and args.all_checks:
            checks[name] = {"status": "skipped", "reason": "needs a reversible chain with "
                                                           "nonnegative spectrum"}
            continue
        passed, detail = _run_check(name, chain, drift, mino, args.horizon)
        checks[name] = {"status": "pass" if passed else "FAIL", **detail}
        ok &= bool(passed)
    summary["checks"] = checks

    if args.csv or out.plot:
        pi = oracle.stationary_distribution(chain)
        curves = oracle.distance_curves(chain, args.start, drift.V, args.horizon, pi=pi)
        t = np.arange(args.horizon + 1)
        p = oracle.drift_params(drift, mino)
        bound = bounds.tv_bound_poly(bounds.compute_rate_params(p), p,
                                     float(drift.V[args.start])).value(t)
        csv_path = io.write_csv(out.path(args.csv, "distance_curves.csv"),
                                ["t", "tv", "l2", "vnorm", "bound"],
                                zip(t, curves.tv, curves.l2, curves.vnorm, bound),
                                digits=out.digits)
        summary["csv"] = str(csv_path)
        if out.plot:
            from . import plotting

            summary["plot"] = str(plotting.plot_distance_curves(
                csv_path.with_suffix(".png"), t, curves.tv, curves.l2, curves.vnorm, bound))

    if out.as_json:
        out.emit(summary)
    else:
        for key in ("scaling_slope", "chain"):
            if key in summary:
                print(f"{key}: {out._text(summary[key])}")
        for name, detail in checks.items():
            extra = {k: v for k, v in detail.items() if k != "status"}
            print(f"{name}: {detail['status']}  {out._text(extra)}")
        for key in ("csv", "plot", "scaling_csv", "scaling_plot"):
            if key in summary:
                print(f"{key}: {summary[key]}")
    return EXIT_OK if ok else EXIT_INPUT


def cmd_simulate(args, out: _Output) -> int:
    from . import simulation

    if args.reps < 1 or args.horizon < 0:
        raise UsageError("--reps must be >= 1 and --horizon >= 0")
    exact = None
    if args.pump:
        from .pump import PumpModel, load_pump_data, small_set_result

        model = PumpModel(data=load_pump_data(args.data)) if args.data else PumpModel()
        res = small_set_result(model, args.lam)
        kernel = simulation.PumpSplitKernel(model, res.C_lo, res.C_hi)
        start = 6.5 if args.start is None else args.start
        if start < 0:
            raise UsageError("--from must be >= 0 for the pump chain")
        initial, muV = start, float(model.V(start))
        p = bounds.DriftParams(lam=res.lam, K=res.K, m=1, epsilon=kernel.epsilon)
        label = f"pump C=[{io.fmt(res.C_lo)}, {io.fmt(res.C_hi)}]"
    else:
        chain, drift, mino, label = _finite_problem(args)
        kernel = simulation.FiniteSplitKernel(chain, drift.C, mino)
        if args.start is None:
            cum = np.cumsum(mino.nu)
            initial = lambda rng: min(int(np.searchsorted(cum, rng.random() * cum[-1], "right")),
                                      chain.n - 1)
            mu = mino.nu
        else:
            s = int(args.start)
            if s != args.start or not 0 <= s < chain.n:
                raise UsageError(f"--from must be a state index in [0, {chain.n})")
            initial, mu = s, s
        muV = float(np.dot(mino.nu, drift.V)) if args.start is None else float(drift.V[s])
        p = oracle.drift_params(drift, mino)
        exact = oracle.exact_regeneration_tail(chain, drift.C, mino, mu, args.horizon).tail
    rate = bounds.compute_rate_params(p)
    est = simulation.estimate_tail(kernel, initial, args.reps, args.horizon, args.seed)
    cmp = simulation.compare_tail_to_bound(est, rate, p.m, muV)
    t = np.arange(args.horizon + 1)
    csv_path = io.write_csv(out.path(args.csv, "tail_estimate.csv"),
                            ["t", "empirical", "wilson_upper", "theory_bound"],
                            zip(t, est.empirical_tail, est.wilson_upper, cmp.bound),
                            digits=out.digits)
    summary = {"kernel": label, "reps": est.reps, "horizon": est.horizon, "seed": args.seed,
               "epsilon": kernel.epsilon, "rho": rate.rho, "r": rate.r, "muV": muV,
               "truncated": est.truncated_count, "bound_violations": list(cmp.violations)}
    if exact is not None:
        outside = np.flatnonzero(~est.covers(exact))
        summary["exact_outside_wilson"] = [int(v) for v in outside]
    summary["csv"] = str(csv_path)
    if out.plot:
        from . import plotting

        summary["plot"] = str(plotting.plot_tail(csv_path.with_suffix(".png"), t, est.empirical_tail,
                                                 est.wilson_upper, cmp.bound,
                                                 lower=est.wilson_lower, exact=exact))
    out.emit(summary)
    return EXIT_OK


def cmd_pump(args, out: _Output) -> int:
    from .pump import PumpModel, load_pump_data, reproduce_table

    model = PumpModel(data=load_pump_data(args.data)) if args.data else PumpModel()
    report = reproduce_table(model, grid=args.lambda_grid, start=args.start,
                             target_tv=args.target_tv, target_v=args.target_v)
    summary = report.as_dict()
    json_path = io.write_json(out.path(None, "pump_report.json"), summary, digits=out.digits)
    files = {"json": str(json_path)}
    if args.emit_curve:
        lams, rhos = zip(*report.scan.curve())
        curve_path = io.write_csv(out.path(None, "lambda_curve.csv"), ["lambda", "rho"],
                                  zip(lams, rhos), digits=out.digits)
        files["curve_csv"] = str(curve_path)
        if out.plot:
            from . import plotting

            files["curve_plot"] = str(plotting.plot_lambda_curve(
                curve_path.with_suffix(".png"), lams, rhos, best=report.result.lam))
    if out.plot:
        from . import plotting

        p = report.result.drift_params
        rate = bounds.compute_rate_params(p)
        Vx = float(model.V(args.start))
        t = np.arange(max(report.tau_tv, report.tau_v) + 21)
        files["bound_plot"] = str(plotting.plot_bound_curves(
            out.path(None, "pump_bounds.png"), t,
            bounds.tv_bound_poly(rate, p, Vx).value(t), bounds.vnorm_bound_poly(rate, p, Vx).value(t),
            report.tau_tv, report.tau_v, args.target_tv, args.target_v))
    if report.scan is not None and report.scan.skipped:
        summary["skipped_lambdas"] = len(report.scan.skipped)
    out.emit({**summary, **files})
    return EXIT_OK


COMMANDS = {"rate": cmd_rate, "bound": cmd_bound, "oracle": cmd_oracle,
            "simulate": cmd_simulate, "pump": cmd_pump}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if args.command == "pump" and args.pump_command is None:
            raise UsageError("usage: driftbounds pump reproduce [options]")
        if args.config:
            args = _apply_config(parser, argv, args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args, _Output(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DriftBoundsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

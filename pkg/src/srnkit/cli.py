"""Command line: ``srnkit {solve,simulate,sweep,inspect} MODEL [options]``.

MODEL is a model file path or the builtin name ``mtd-cloud``.
Exit codes: 0 success, 1 usage error, 2 model error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import __version__
from .errors import (ConvergenceError, ExpressionError, FiringError, ModelSyntaxError,
                     NetError, ParameterError, RateError, ReducibleChainError, SRNError,
                     StateSpaceError, VanishingLoopError)
from .markov import SolverConfig, build_generator, recurrent_classes, steady_state
from .modelfile import parse_model
from .mtd import MtdParams, build_mtd_net, default_rewards, fmt, value_range
from .reachability import ExploreConfig, explore
from .rewards import derived_metrics, expected_reward
from .simulator import RewardEstimate, SimConfig, simulate

BUILTIN = "mtd-cloud"

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_SOLVER = 0, 1, 2, 3

MODEL_ERRORS = (ModelSyntaxError, ParameterError, NetError, ExpressionError, FiringError)
SOLVER_ERRORS = (StateSpaceError, VanishingLoopError, ReducibleChainError, ConvergenceError,
                 RateError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srnkit", description="Stochastic reward net analysis.")
    parser.add_argument("--version", action="version", version=f"srnkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("model", help=f"model file or builtin '{BUILTIN}'")
        p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                       help="override a model parameter (repeatable)")
        p.add_argument("--output", "-o", help="write machine-readable results here")
        p.add_argument("--max-states", type=_positive_int, default=ExploreConfig.max_states)

    def solver_flags(p):
        p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
        p.add_argument("--tolerance", type=_positive_float, default=SolverConfig.tolerance)
        p.add_argument("--max-iterations", type=_positive_int, default=SolverConfig.max_iterations)
        p.add_argument("--direct-threshold", type=_positive_int,
                       default=SolverConfig.direct_threshold)

    p = sub.add_parser("solve", help="steady-state rewards")
    common(p)
    solver_flags(p)

    p = sub.add_parser("simulate", help="discrete-event estimates of the rewards")
    common(p)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--horizon", type=_positive_float, default=100_000.0)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--reps", type=_positive_int, default=10)
    p.add_argument("--jobs", type=_positive_int, default=1)

    p = sub.add_parser("sweep", help="solve over a range of one parameter")
    common(p)
    solver_flags(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--range", dest="range_", metavar="NAME=START:STOP:STEP")
    g.add_argument("--values", metavar="NAME=V1,V2,...")
    p.add_argument("--jobs", type=_positive_int, default=1)

    p = sub.add_parser("inspect", help="structure and state-space summary")
    common(p)
    p.add_argument("--dump", help="write the tangible graph as text")
    return parser


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {name}: {value!r} is not a number") from None
    return out


class Model:
    """A loaded model: either the builtin MTD net or a parsed file."""

    def __init__(self, source: str, overrides: dict):
        self.source = source
        if source == BUILTIN:
            self.params = MtdParams().replace(**overrides)
            self.rewards = default_rewards()
            self.net = build_mtd_net(self.params)
        else:
            try:
                with open(source, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ModelSyntaxError(f"cannot read {source}: {exc.strerror}") from None
            self.params = None
            self.net, self.rewards = parse_model(text)
            if overrides:
                for k in overrides:
                    if k not in self.net.params:
                        raise ParameterError(f"unknown parameter {k}")
                self.net = self.net.with_params(**overrides)
        # surface structural problems as model errors before any solve
        self.net.compiled

    def with_value(self, name: str, value: float) -> "Model":
        m = object.__new__(Model)
        m.source, m.rewards = self.source, self.rewards
        if self.params is not None:
            m.params = self.params.replace(**{name: value})
            m.net = build_mtd_net(m.params)
        else:
            if name not in self.net.params:
                raise ParameterError(f"unknown parameter {name}")
            m.params = None
            m.net = self.net.with_params(**{name: value})
        return m

    def has_param(self, name: str) -> bool:
        if self.params is not None:
            return name in MtdParams.field_names()
        return name in self.net.params


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(args.method, args.tolerance, args.max_iterations, args.direct_threshold)


def _solve(model: Model, args):
    graph = explore(model.net, ExploreConfig(max_states=args.max_states))
    ss = steady_state(build_generator(graph), _solver_cfg(args))
    values = {r.name: expected_reward(graph, ss, r) for r in model.rewards}
    values.update(derived_metrics(values))
    return graph, ss, values


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def cmd_solve(args, out) -> int:
    model = Model(args.model, _overrides(args.param))
    graph, ss, values = _solve(model, args)
    out.write(f"tangible_states={graph.n_states}\n")
    out.write(f"residual={ss.residual:.6e}\n")
    out.write(f"method={ss.method} iterations={ss.iterations}\n")
    rows = [(name, fmt(v)) for name, v in values.items()]
    out.write(_csv_text(rows))
    if args.output:
        _write(args.output, _csv_text([("name", "value")] + rows))
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    model = Model(args.model, _overrides(args.param))
    try:
        cfg = SimConfig(args.seed, args.horizon, args.warmup, args.reps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    est = simulate(model.net, model.rewards, cfg, jobs=args.jobs)
    estimates = dict(est.rewards)
    if "up" in estimates:
        up = estimates["up"]
        estimates["unavailability"] = RewardEstimate(1.0 - up.mean, up.stderr, up.replications)
    for name, e in est.rewards.items():
        if name.startswith("risky_"):
            estimates["riskscore_" + name[len("risky_"):]] = e
    out.write(f"seed={cfg.seed} horizon={fmt(cfg.horizon)} warmup={fmt(cfg.warmup)} "
              f"replications={cfg.replications}\n")
    for name, e in estimates.items():
        out.write(f"{name} {fmt(e.mean)} +- {fmt(e.stderr)}\n")
    out.write(f"events={est.events} deadlocked_replications={est.deadlocked_replications}\n")
    if args.output:
        rows = [("name", "estimate", "stderr", "replications")]
        rows += [(n, fmt(e.mean), fmt(e.stderr), e.replications) for n, e in estimates.items()]
        _write(args.output, _csv_text(rows))
    return EXIT_OK


def _sweep_values(args) -> tuple[str, list[float]]:
    spec = args.range_ if args.range_ is not None else args.values
    name, sep, body = spec.partition("=")
    if not sep or not name:
        raise UsageError(f"expected NAME=..., got {spec!r}")
    try:
        if args.range_ is not None:
            parts = body.split(":")
            if len(parts) != 3:
                raise UsageError(f"--range expects NAME=START:STOP:STEP, got {spec!r}")
            start, stop, step = (float(x) for x in parts)
            if not step > 0:
                raise UsageError("--range step must be positive")
            if stop < start:
                raise UsageError("--range stop is below start")
            values = value_range(start, stop, step)
        else:
            values = [float(x) for x in body.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"non-numeric value in {spec!r}") from None
    if not values:
        raise UsageError("sweep has no values")
    return name, values


def cmd_sweep(args, out) -> int:
    name, values = _sweep_values(args)
    model = Model(args.model, _overrides(args.param))
    if not model.has_param(name):
        raise ParameterError(f"unknown parameter {name}")
    rows = []
    for v in values:
        try:
            point = model.with_value(name, v)
            graph, ss, metrics = _solve(point, args)
        except SRNError as exc:
            raise type(exc)(f"sweep {name}={fmt(v)}: {exc}") from exc
        rows.append((v, metrics, graph.n_states, ss.iterations))

    if model.source == BUILTIN:
        columns = ["unavailability", "riskscore_dos", "riskscore_mitm"]
    else:
        columns = list(rows[0][1])
    table = [["value"] + columns + ["tangible_states", "solver_iterations"]]
    for v, metrics, n, it in rows:
        table.append([fmt(v)] + [fmt(metrics[c]) for c in columns] + [n, it])
    text = _csv_text(table)
    if args.output:
        _write(args.output, text)
    else:
        out.write(text)
    out.write(f"rows={len(rows)}\n")
    if "unavailability" in columns:
        best = min(range(len(rows)), key=lambda i: (rows[i][1]["unavailability"], i))
        v, metrics = rows[best][0], rows[best][1]
        out.write(f"minimizer {name}={fmt(v)} unavailability={fmt(metrics['unavailability'])}\n")
    return EXIT_OK


def cmd_inspect(args, out) -> int:
    model = Model(args.model, _overrides(args.param))
    net = model.net
    graph = explore(net, ExploreConfig(max_states=args.max_states))
    total = graph.n_states + graph.vanishing_count
    ratio = graph.vanishing_count / total
    ratio_text = "0" if ratio == 0 else f"{ratio:.6g}"
    out.write(f"places={len(net.places)} transitions={len(net.transitions)} "
              f"tangible={graph.n_states} vanishing_ratio={ratio_text}\n")
    n_timed = sum(not t.is_immediate for t in net.transitions)
    out.write(f"arcs={len(net.arcs)} timed={n_timed} immediate={len(net.transitions) - n_timed} "
              f"vanishing={graph.vanishing_count} edges={len(graph.edges)}\n")
    deadlocks = graph.deadlocks()
    classes = recurrent_classes(build_generator(graph))
    out.write(f"deadlocks={'yes' if deadlocks else 'no'} "
              f"reducible={'yes' if len(classes) > 1 else 'no'}\n")
    if args.dump:
        _write(args.dump, graph.dump())
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "inspect": cmd_inspect}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"srnkit: usage error: {exc}\n")
        return EXIT_USAGE
    except MODEL_ERRORS as exc:
        err.write(f"srnkit: model error: {exc}\n")
        return EXIT_MODEL
    except SOLVER_ERRORS as exc:
        err.write(f"srnkit: solver error: {exc}\n")
        return EXIT_SOLVER
    except SRNError as exc:
        err.write(f"srnkit: error: {exc}\n")
        return EXIT_SOLVER
    except OSError as exc:
        err.write(f"srnkit: {exc}\n")
        return EXIT_USAGE


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

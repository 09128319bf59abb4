"""Moving-target-defense cloud model: VM migration used as VMM rejuvenation.

One main node hosts the VM, one standby node receives it on migration.
Model notes (structure inferred where the figure is not explicit):

* Node places are role based (``MN_*`` is whichever node hosts the VM,
  ``SN_*`` the other one). Migration only starts and progresses while both
  nodes are up, so the role swap at the end of a migration maps
  (up, up) to (up, up) and needs no token exchange.
* The clock is Erlang(``clock_phases``) with mean ``trigger_interval``.
  ``Trigger`` moves the clock token to ``Schedule``; ``StartLM`` waits there
  until the VM is up and both nodes are up.
* ``LM`` is the pre-copy phase (VM still serving), ``DW_Mig`` the
  stop-and-copy downtime, ``Migrated`` the wait for the rejuvenation of the
  source VMM (``Rej``). ``Rej`` marks ``SN_W``; ``ClearAging1``/``ClearAging2``
  (priority 2) flush ``Accumulation`` and ``AgingHigh`` and then
  ``ResetClock`` (priority 1) re-arms the clock.
* Aging accumulates only while the hosting node is up and the VMM has not
  failed. ``Aging`` adds one token to ``Accumulation``; the immediate
  ``AgingPhase`` turns ``aging_phases`` tokens into one ``AgingHigh`` token.
  ``AgingFailure`` moves it to ``DW2`` (VMM and VM down) and ``RepairDW2``
  restarts the VMM with a fresh aging state.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ParameterError, SRNError
from .markov import SolverConfig, build_generator, steady_state
from .net import INHIBITOR, INPUT, OUTPUT, Arc, Net, Place, Transition
from .reachability import ExploreConfig, explore
from .rewards import RewardSpec, expected_reward

SWEEP_HEADER = ["value", "unavailability", "riskscore_dos", "riskscore_mitm",
                "tangible_states", "solver_iterations"]

INT_FIELDS = ("clock_phases", "aging_phases")


@dataclass(frozen=True)
class MtdParams:
    """Rates are per hour; ``mttf_*``/``mttr_*`` and ``trigger_interval`` are hours."""

    trigger_interval: float = 24.0
    clock_phases: int = 1
    aging_rate: float = 4 / 240
    aging_phases: int = 4
    aging_failure_rate: float = 1 / 24
    mttf_main: float = 2000.0
    mttr_main: float = 2.0
    mttf_standby: float = 2000.0
    mttr_standby: float = 2.0
    mttf_vm: float = 1000.0
    mttr_vm: float = 0.5
    lm_precopy_rate: float = 1 / 0.05
    lm_downtime_rate: float = 1 / 0.002
    rejuvenation_rate: float = 1 / 0.01

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParameterError(f"parameter {f.name} must be a number")
            if not math.isfinite(v) or v <= 0:
                raise ParameterError(f"parameter must be positive: {f.name}={v}")
            if f.name in INT_FIELDS and v != int(v):
                raise ParameterError(f"parameter {f.name} must be an integer >= 1")

    def replace(self, **overrides) -> "MtdParams":
        names = {f.name for f in dataclasses.fields(self)}
        clean = {}
        for k, v in overrides.items():
            if k not in names:
                raise ParameterError(f"unknown parameter {k}")
            v = float(v)
            if k in INT_FIELDS and v == int(v) and v >= 1:
                v = int(v)
            clean[k] = v
        return dataclasses.replace(self, **clean)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]


def _guard(*conds):
    return " and ".join(conds)


BOTH_NODES_UP = ("#MN_Up >= 1", "#SN_Up >= 1")


def build_mtd_net(params: MtdParams = None) -> Net:
    p = params or MtdParams()
    k_clock = int(p.clock_phases)
    k_aging = int(p.aging_phases)

    places = [Place("Clock", 1)]
    if k_clock > 1:
        places.append(Place("ClockStage", 0))
    places += [
        Place("Schedule", 0), Place("LM", 0), Place("DW_Mig", 0), Place("Migrated", 0),
        Place("SN_W", 0),
        Place("MN_Up", 1), Place("MN_Down", 0), Place("SN_Up", 1), Place("SN_Down", 0),
        Place("VM_Up", 1), Place("VM_Down", 0),
        Place("Accumulation", 0), Place("AgingHigh", 0), Place("DW2", 0),
    ]

    T = Transition
    trans = []
    arcs = []

    def arc(kind, place, t, mult=1):
        arcs.append(Arc(kind, place, t, mult))

    # clock
    if k_clock > 1:
        trans.append(T.timed("ClockTick", "clock_phases / trigger_interval"))
        arc(INPUT, "Clock", "ClockTick")
        arc(OUTPUT, "Clock", "ClockTick")
        arc(OUTPUT, "ClockStage", "ClockTick")
        arc(INHIBITOR, "ClockStage", "ClockTick", k_clock - 1)
    trans.append(T.timed("Trigger", "clock_phases / trigger_interval"))
    arc(INPUT, "Clock", "Trigger")
    if k_clock > 1:
        arc(INPUT, "ClockStage", "Trigger", k_clock - 1)
    arc(OUTPUT, "Schedule", "Trigger")

    # migration
    trans.append(T.immediate("StartLM", 1.0, 1,
                             guard=_guard("#VM_Up >= 1", "#DW2 == 0", *BOTH_NODES_UP)))
    arc(INPUT, "Schedule", "StartLM")
    arc(OUTPUT, "LM", "StartLM")
    trans.append(T.timed("PC", "lm_precopy_rate", guard=_guard(*BOTH_NODES_UP)))
    arc(INPUT, "LM", "PC")
    arc(OUTPUT, "DW_Mig", "PC")
    trans.append(T.timed("LM_dwt", "lm_downtime_rate", guard=_guard(*BOTH_NODES_UP)))
    arc(INPUT, "DW_Mig", "LM_dwt")
    arc(OUTPUT, "Migrated", "LM_dwt")
    trans.append(T.timed("Rej", "rejuvenation_rate"))
    arc(INPUT, "Migrated", "Rej")
    arc(OUTPUT, "SN_W", "Rej")
    for name, place in (("ClearAging1", "Accumulation"), ("ClearAging2", "AgingHigh")):
        trans.append(T.immediate(name, 1.0, 2))
        arc(INPUT, "SN_W", name)
        arc(OUTPUT, "SN_W", name)
        arc(INPUT, place, name)
    trans.append(T.immediate("ResetClock", 1.0, 1))
    arc(INPUT, "SN_W", "ResetClock")
    arc(OUTPUT, "Clock", "ResetClock")

    # aging of the VMM on the hosting node
    trans.append(T.timed("Aging", "aging_rate", guard="#MN_Up >= 1"))
    arc(OUTPUT, "Accumulation", "Aging")
    arc(INHIBITOR, "AgingHigh", "Aging")
    arc(INHIBITOR, "DW2", "Aging")
    trans.append(T.immediate("AgingPhase", 1.0, 1))
    arc(INPUT, "Accumulation", "AgingPhase", k_aging)
    arc(OUTPUT, "AgingHigh", "AgingPhase")
    trans.append(T.timed("AgingFailure", "aging_failure_rate", guard="#MN_Up >= 1"))
    arc(INPUT, "AgingHigh", "AgingFailure")
    arc(OUTPUT, "DW2", "AgingFailure")
    trans.append(T.timed("RepairDW2", "1 / mttr_vm", guard="#MN_Up >= 1"))
    arc(INPUT, "DW2", "RepairDW2")

    # failure and repair of nodes and VM
    for prefix, mttf, mttr in (("MN", "mttf_main", "mttr_main"),
                               ("SN", "mttf_standby", "mttr_standby")):
        trans.append(T.timed(f"{prefix}_Fail", f"1 / {mttf}"))
        arc(INPUT, f"{prefix}_Up", f"{prefix}_Fail")
        arc(OUTPUT, f"{prefix}_Down", f"{prefix}_Fail")
        trans.append(T.timed(f"{prefix}_Repair", f"1 / {mttr}"))
        arc(INPUT, f"{prefix}_Down", f"{prefix}_Repair")
        arc(OUTPUT, f"{prefix}_Up", f"{prefix}_Repair")
    vm_guard = _guard("#MN_Up >= 1", "#DW2 == 0")
    trans.append(T.timed("VM_Fail", "1 / mttf_vm", guard=vm_guard))
    arc(INPUT, "VM_Up", "VM_Fail")
    arc(OUTPUT, "VM_Down", "VM_Fail")
    trans.append(T.timed("VM_Repair", "1 / mttr_vm", guard=vm_guard))
    arc(INPUT, "VM_Down", "VM_Repair")
    arc(OUTPUT, "VM_Up", "VM_Repair")

    return Net(places, trans, arcs, dataclasses.asdict(p))


def default_rewards() -> list[RewardSpec]:
    return [
        RewardSpec("up", "#VM_Up >= 1 and #MN_Up >= 1 and #DW2 == 0 and #DW_Mig == 0"),
        RewardSpec("risky_mitm", "#LM + #DW_Mig >= 1"),
        RewardSpec("risky_dos", "#AgingHigh >= 1 or #SN_Down >= 1"),
    ]


@dataclass
class SweepSpec:
    parameter: str
    values: Sequence[float] = ()
    output: Optional[str] = None

    def __post_init__(self):
        self.values = [float(v) for v in self.values]
        if not self.values:
            raise ParameterError("sweep has no values")
        if any(not v > 0 for v in self.values):
            raise ParameterError("sweep values must be positive")

    @classmethod
    def from_range(cls, parameter, start, stop, step, output=None):
        return cls(parameter, value_range(start, stop, step), output)


def value_range(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic progression ``start, start+step, ... <= stop``."""
    if not step > 0:
        raise ParameterError("range step must be positive")
    if stop < start:
        raise ParameterError("range stop is below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


DEFAULT_SWEEP = SweepSpec("trigger_interval", value_range(1, 168, 1))


@dataclass
class SweepRow:
    value: float
    unavailability: float
    riskscore_dos: float
    riskscore_mitm: float
    tangible_states: int
    solver_iterations: int
    extra: dict = field(default_factory=dict)


def solve_point(params: MtdParams, solver: SolverConfig = None, rewards=None,
                explore_cfg: ExploreConfig = None):
    """Build, explore and solve one parameter point; returns (graph, steady state, reward values)."""
    net = build_mtd_net(params)
    graph = explore(net, explore_cfg)
    ss = steady_state(build_generator(graph), solver)
    rewards = rewards or default_rewards()
    values = {r.name: expected_reward(graph, ss, r) for r in rewards}
    return graph, ss, values


def _sweep_point(args):
    params, name, value, solver = args
    try:
        graph, ss, values = solve_point(params.replace(**{name: value}), solver)
    except SRNError as exc:
        raise type(exc)(f"sweep {name}={value:g}: {exc}") from exc
    return SweepRow(value, 1.0 - values["up"], values["risky_dos"], values["risky_mitm"],
                    graph.n_states, ss.iterations)


def run_sweep(params: MtdParams, sweep: SweepSpec, solver: SolverConfig = None,
              jobs: int = 1) -> list[SweepRow]:
    if sweep.parameter not in MtdParams.field_names():
        raise ParameterError(f"unknown parameter {sweep.parameter}")
    tasks = [(params, sweep.parameter, v, solver) for v in sweep.values]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    if sweep.output:
        with open(sweep.output, "w", newline="", encoding="ascii") as fh:
            fh.write(sweep_csv(rows))
    return rows


def fmt(x) -> str:
    """Locale-independent decimal text with 15 significant digits."""
    if isinstance(x, int):
        return str(x)
    return format(float(x), "#.15g")


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([fmt(r.value), fmt(r.unavailability), fmt(r.riskscore_dos),
                    fmt(r.riskscore_mitm), r.tangible_states, r.solver_iterations])
    return buf.getvalue()


def argmin_value(rows: Sequence[SweepRow], column: str = "unavailability") -> float:
    best = min(range(len(rows)), key=lambda i: (getattr(rows[i], column), i))
    return rows[best].value

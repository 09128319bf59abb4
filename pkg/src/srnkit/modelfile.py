"""Line-oriented text format for SRN models.

::

    [params]
    lambda = 1.0
    [places]
    Up = 1
    Down = 0
    [transitions]
    fail timed rate=lambda
    repair timed rate=9.0 guard=#Down >= 1
    pick immediate weight=1 priority=2
    [arcs]
    in Up fail          # in/inhib read place -> transition
    out Down fail 1     # out reads transition -> place
    [rewards]
    up when #Up >= 1 weight 1

A ``#`` starts a comment when it is the first non-blank character of a line
or is not immediately followed by a name; ``#Name`` inside an expression is
a token count.
"""

from __future__ import annotations

import math
import re

from .errors import ExpressionError, ModelSyntaxError
from .expr import Expression
from .net import INHIBITOR, INPUT, OUTPUT, Arc, Net, Place, Transition
from .rewards import RewardSpec

SECTIONS = ("params", "places", "transitions", "arcs", "rewards")
_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_NAME_RE = re.compile(_NAME + r"$")
_COMMENT_RE = re.compile(r"#(?![A-Za-z_])")
_OPTION_RE = re.compile(r"(?:(?<=\s)|^)(rate|weight|priority|guard)=(?!=)")
_ARC_KINDS = {"in": INPUT, "out": OUTPUT, "inhib": INHIBITOR}
_ARC_NAMES = {v: k for k, v in _ARC_KINDS.items()}


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    m = _COMMENT_RE.search(line)
    return line[: m.start()] if m else line


def _expr(text, lineno):
    try:
        return Expression.parse(text)
    except ExpressionError as exc:
        raise ModelSyntaxError(str(exc), lineno) from None


def _real(text, what, lineno):
    try:
        v = float(text)
    except ValueError:
        raise ModelSyntaxError(f"{what}: expected a real number, got {text!r}", lineno) from None
    if not math.isfinite(v):
        raise ModelSyntaxError(f"{what}: value must be finite", lineno)
    return v


def _int(text, what, lineno):
    try:
        return int(text)
    except ValueError:
        raise ModelSyntaxError(f"{what}: expected an integer, got {text!r}", lineno) from None


def _name(text, lineno):
    if not _NAME_RE.match(text):
        raise ModelSyntaxError(f"invalid name {text!r}", lineno)
    return text


def _assignment(line, lineno):
    if "=" not in line:
        raise ModelSyntaxError("expected 'name = value'", lineno)
    name, value = (s.strip() for s in line.split("=", 1))
    return _name(name, lineno), value


def _transition(line, lineno):
    parts = line.split(None, 2)
    if len(parts) < 2:
        raise ModelSyntaxError("expected '<name> timed|immediate ...'", lineno)
    name = _name(parts[0], lineno)
    kind = parts[1]
    rest = parts[2] if len(parts) > 2 else ""
    matches = list(_OPTION_RE.finditer(rest))
    if matches and rest[: matches[0].start()].strip():
        raise ModelSyntaxError(f"unexpected text {rest[: matches[0].start()].strip()!r}", lineno)
    if not matches and rest.strip():
        raise ModelSyntaxError(f"unexpected text {rest.strip()!r}", lineno)
    opts = {}
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(rest)
        key = m.group(1)
        if key in opts:
            raise ModelSyntaxError(f"option {key} given twice", lineno)
        opts[key] = rest[m.end():end].strip()
        if not opts[key]:
            raise ModelSyntaxError(f"empty value for {key}", lineno)
    guard = _expr(opts["guard"], lineno) if "guard" in opts else None
    if kind == "timed":
        if "rate" not in opts:
            raise ModelSyntaxError(f"timed transition {name} needs rate=", lineno)
        if "weight" in opts or "priority" in opts:
            raise ModelSyntaxError(f"weight/priority on timed transition {name}", lineno)
        return Transition(name, "timed", rate=_expr(opts["rate"], lineno), guard=guard)
    if kind == "immediate":
        if "rate" in opts:
            raise ModelSyntaxError(f"rate on immediate transition {name}", lineno)
        weight = _real(opts.get("weight", "1"), "weight", lineno)
        if not weight > 0:
            raise ModelSyntaxError("weight must be > 0", lineno)
        priority = _int(opts.get("priority", "1"), "priority", lineno)
        if priority < 0:
            raise ModelSyntaxError("priority must be >= 0", lineno)
        return Transition(name, "immediate", weight=weight, priority=priority, guard=guard)
    raise ModelSyntaxError(f"unknown transition kind {kind!r}", lineno)


def _arc(line, lineno):
    parts = line.split()
    if len(parts) not in (3, 4) or parts[0] not in _ARC_KINDS:
        raise ModelSyntaxError("expected 'in|out|inhib <place> <transition> [mult]'", lineno)
    mult = _int(parts[3], "multiplicity", lineno) if len(parts) == 4 else 1
    if mult < 1:
        raise ModelSyntaxError("multiplicity must be ≥ 1", lineno)
    return Arc(_ARC_KINDS[parts[0]], parts[1], parts[2], mult)


def _reward(line, lineno):
    m = re.match(rf"({_NAME})\s+when\s+(.*)$", line)
    if not m:
        raise ModelSyntaxError("expected '<name> when <expr> [weight <expr>]'", lineno)
    name, body = m.group(1), m.group(2)
    parts = re.split(r"\s+weight\s+", body, maxsplit=1)
    pred = _expr(parts[0], lineno)
    weight = _expr(parts[1], lineno) if len(parts) > 1 else Expression.const(1.0)
    return RewardSpec(name, pred, weight)


def parse_model(text: str) -> tuple[Net, list[RewardSpec]]:
    """Parse model text into a net and its reward definitions."""
    section = None
    params, places, transitions, arcs, rewards = {}, [], [], [], []
    lines = {}  # element key -> line number
    seen = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        header = re.match(r"\[(\w+)\]$", line)
        if header:
            section = header.group(1)
            if section not in SECTIONS:
                raise ModelSyntaxError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ModelSyntaxError("content before the first section header", lineno)

        if section == "params":
            name, value = _assignment(line, lineno)
            if ("param", name) in seen:
                raise ModelSyntaxError(f"duplicate parameter {name}", lineno)
            seen.add(("param", name))
            params[name] = _real(value, name, lineno)
        elif section == "places":
            name, value = _assignment(line, lineno)
            if ("node", name) in seen:
                raise ModelSyntaxError(f"duplicate definition of {name}", lineno)
            seen.add(("node", name))
            tokens = _int(value, name, lineno)
            if tokens < 0:
                raise ModelSyntaxError(f"place {name}: tokens must be >= 0", lineno)
            places.append(Place(name, tokens))
            lines[("place", name)] = lineno
        elif section == "transitions":
            t = _transition(line, lineno)
            if ("node", t.name) in seen:
                raise ModelSyntaxError(f"duplicate definition of {t.name}", lineno)
            seen.add(("node", t.name))
            transitions.append(t)
            lines[("transition", t.name)] = lineno
        elif section == "arcs":
            a = _arc(line, lineno)
            arcs.append(a)
            lines[("arc", len(arcs) - 1)] = lineno
        else:
            r = _reward(line, lineno)
            if ("reward", r.name) in seen:
                raise ModelSyntaxError(f"duplicate reward {r.name}", lineno)
            seen.add(("reward", r.name))
            rewards.append(r)
            lines[("reward", r.name)] = lineno

    place_names = {p.name for p in places}
    trans_names = {t.name for t in transitions}

    def check_expr(e, where, lineno):
        for name in sorted(e.places() - place_names):
            raise ModelSyntaxError(f"unknown place {name} in {where}", lineno)
        for name in sorted(e.params() - set(params)):
            raise ModelSyntaxError(f"unknown identifier {name} in {where}", lineno)

    for t in transitions:
        ln = lines[("transition", t.name)]
        for label, e in (("rate", t.rate), ("guard", t.guard)):
            if e is not None:
                check_expr(e, f"{label} of {t.name}", ln)
    for i, a in enumerate(arcs):
        ln = lines[("arc", i)]
        if a.place not in place_names:
            raise ModelSyntaxError(f"unknown place {a.place}", ln)
        if a.transition not in trans_names:
            raise ModelSyntaxError(f"unknown transition {a.transition}", ln)
    for r in rewards:
        ln = lines[("reward", r.name)]
        check_expr(r.predicate, f"reward {r.name}", ln)
        check_expr(r.weight, f"reward {r.name}", ln)
    if not places:
        raise ModelSyntaxError("model declares no places")
    if not transitions:
        raise ModelSyntaxError("model declares no transitions")
    return Net(places, transitions, arcs, params), rewards


def dump_model(net: Net, rewards=()) -> str:
    """Serialise ``net`` (and rewards) in the format read by :func:`parse_model`."""
    out = ["[params]"]
    out += [f"{k} = {v!r}" for k, v in net.params.items()]
    out.append("[places]")
    out += [f"{p.name} = {p.initial_tokens}" for p in net.places]
    out.append("[transitions]")
    for t in net.transitions:
        if t.is_immediate:
            line = f"{t.name} immediate weight={t.weight!r} priority={t.priority}"
        else:
            line = f"{t.name} timed rate={t.rate}"
        if t.guard is not None:
            line += f" guard={t.guard}"
        out.append(line)
    out.append("[arcs]")
    out += [f"{_ARC_NAMES[a.kind]} {a.place} {a.transition} {a.multiplicity}" for a in net.arcs]
    out.append("[rewards]")
    for r in rewards:
        line = f"{r.name} when {r.predicate}"
        if not r.unit_weight:
            line += f" weight {r.weight}"
        out.append(line)
    return "\n".join(out) + "\n"

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_net, two_state_net
from srnkit import explore
from srnkit.errors import ModelSyntaxError
from srnkit.markov import build_generator, steady_state
from srnkit.modelfile import dump_model, parse_model
from srnkit.mtd import build_mtd_net, default_rewards
from srnkit.rewards import RewardSpec, expected_reward

TWO_STATE = """\
# failure/repair model
[params]
lam = 1.0
mu = 9.0
[places]
Up = 1
Down = 0
[transitions]
fail timed rate=lam
repair timed rate=mu
[arcs]
in Up fail
out Down fail
in Down repair
out Up repair
[rewards]
up when #Up >= 1
"""


def test_parse_two_state():
    net, rewards = parse_model(TWO_STATE)
    assert list(net.place_names) == ["Up", "Down"]
    assert len(net.transitions) == 2
    assert [r.name for r in rewards] == ["up"]
    g = explore(net)
    ss = steady_state(build_generator(g))
    assert expected_reward(g, ss, rewards[0]) == pytest.approx(0.9, abs=1e-12)


def test_immediate_defaults_and_options():
    text = TWO_STATE.replace(
        "repair timed rate=mu",
        "repair timed rate=mu guard=#Down >= 1 and lam > 0\npick immediate\n"
        "pick2 immediate weight=2.5 priority=3")
    net, _ = parse_model(text)
    pick, pick2 = net.transition("pick"), net.transition("pick2")
    assert (pick.weight, pick.priority) == (1.0, 1)
    assert (pick2.weight, pick2.priority) == (2.5, 3)
    assert str(net.transition("repair").guard) == "#Down >= 1 and lam > 0"


def test_comments():
    text = TWO_STATE.replace("in Up fail", "in Up fail   # consumes the token") \
        .replace("up when #Up >= 1", "up when #Up >= 1 # available")
    net, rewards = parse_model(text)
    assert len(net.arcs) == 4
    assert str(rewards[0].predicate) == "#Up >= 1"


def _line_of(text, needle):
    return next(i for i, l in enumerate(text.splitlines(), 1) if needle in l)


def test_zero_multiplicity_reports_line():
    text = TWO_STATE.replace("in Up fail", "in Up fail 0")
    with pytest.raises(ModelSyntaxError, match="multiplicity must be ≥ 1") as exc:
        parse_model(text)
    assert exc.value.line == _line_of(text, "in Up fail 0")
    assert str(exc.value).startswith(f"line {exc.value.line}: ")


@pytest.mark.parametrize("bad, needle, message", [
    ("up when #Up >= 1", "up when #Nowhere >= 1", "unknown place Nowhere"),
    ("fail timed rate=lam", "fail timed rate=kappa", "unknown identifier kappa"),
    ("in Up fail", "in Up explode", "unknown transition explode"),
    ("in Up fail", "in Upp fail", "unknown place Upp"),
    ("Down = 0", "Down = 0\nUp = 2", "duplicate definition of Up"),
    ("[arcs]", "[arrows]", "unknown section"),
    ("fail timed rate=lam", "fail timed", "needs rate="),
    ("fail timed rate=lam", "fail immediate rate=lam", "rate on immediate"),
    ("fail timed rate=lam", "fail timed rate=lam +", "line"),
    ("lam = 1.0", "lam = fast", "expected a real number"),
])
def test_errors_carry_line_numbers(bad, needle, message):
    text = TWO_STATE.replace(bad, needle, 1)
    with pytest.raises(ModelSyntaxError, match=message) as exc:
        parse_model(text)
    first_line = needle.splitlines()[-1]
    assert exc.value.line == _line_of(text, first_line)


def test_reward_with_weight_roundtrip():
    net, _ = parse_model(TWO_STATE)
    rewards = [RewardSpec("up", "#Up >= 1"), RewardSpec("cost", "#Down >= 1", "2 * mu")]
    net2, rewards2 = parse_model(dump_model(net, rewards))
    assert net2 == net
    assert rewards2 == rewards


def test_mtd_roundtrip():
    net = build_mtd_net()
    net2, rewards = parse_model(dump_model(net, default_rewards()))
    assert net2 == net
    assert rewards == default_rewards()
    assert explore(net2).n_states == explore(net).n_states


def test_two_state_roundtrip():
    net = two_state_net()
    assert parse_model(dump_model(net))[0] == net


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_random_roundtrip(seed, immediate):
    net = random_net(np.random.default_rng(seed), immediate=immediate)
    text = dump_model(net)
    net2, _ = parse_model(text)
    assert net2 == net
    assert dump_model(net2) == text

"""Tests for game graphs, validation and the monitoring-mode transforms."""

import random
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from delaygames.catalog import match_game, random_graph  # noqa: E402
from delaygames.errors import ModelViolation, PreconditionError, StructuralError  # noqa: E402
from delaygames.game import (  # noqa: E402
    DelaySpace,
    GameGraph,
    History,
    Mode,
    PlayerSpec,
    Transition,
    lift_to_delayed,
    min_cycle_length,
    profile_with,
    profile_without,
    project_to_instant,
    shortest_cycle,
    trace_actions,
    unravel,
    validate,
)


class TestValidate:
    def test_match_is_valid(self):
        assert validate(match_game()) == []

    def test_missing_transition_is_reported_once(self):
        g = match_game()
        dropped = g.derive(transitions=g.transitions[1:])
        violations = validate(dropped)
        assert len(violations) == 1
        assert violations[0].kind == "missing-transition"
        assert "state P" in violations[0].location

    def test_nondeterminism_is_a_violation(self):
        g = match_game()
        extra = Transition("P", ("a", "a"), ("a", "a"), "P", (0, 0))
        violations = validate(g.derive(transitions=g.transitions + (extra,)))
        assert [v.kind for v in violations] == ["nondeterministic"]

    def test_unknown_state_raises(self):
        g = match_game()
        bad = Transition("P", ("a", "a"), ("a", "a"), "R", (1, 1))
        with pytest.raises(StructuralError):
            validate(g.derive(transitions=g.transitions[1:] + (bad,)))

    def test_wrong_arity_raises(self):
        g = match_game()
        bad = Transition("P", ("a",), ("a",), "Q", (1,))
        with pytest.raises(StructuralError):
            validate(g.derive(transitions=(bad,)))

    def test_negative_priority_under_parity(self):
        g = match_game(aggregator="parity")
        assert validate(g) == []
        tr = g.transitions[0]
        neg = Transition(tr.source, tr.actions, tr.signals, tr.target, (-1, 1))
        violations = validate(g.derive(transitions=(neg,) + g.transitions[1:]))
        assert [v.kind for v in violations] == ["negative-priority"]

    def test_delay_dependent_outcome_is_reported(self):
        d = DelaySpace.uniform(2, [0, 1])
        lifted = lift_to_delayed(match_game(), d)
        tr = next(t for t in lifted.transitions if t.delays == (1, 1) and t.source == "P")
        changed = Transition(tr.source, tr.actions, tr.signals, "P" if tr.target == "Q" else "Q", tr.payoffs, tr.delays)
        g = lifted.derive(transitions=[t for t in lifted.transitions if t != tr] + [changed])
        assert "delay-dependent" in [v.kind for v in validate(g)]
        with pytest.raises(ModelViolation):
            project_to_instant(g)


class TestTransforms:
    def test_lift_counts(self):
        g = match_game()
        assert len(lift_to_delayed(g, DelaySpace.uniform(2, [0, 1])).transitions) == 32
        assert len(lift_to_delayed(g, DelaySpace.uniform(2, [0])).transitions) == 8

    def test_lift_then_project_is_identity(self):
        g = match_game()
        lifted = lift_to_delayed(g, DelaySpace.uniform(2, [0, 1]))
        assert lifted.mode is Mode.DELAYED
        assert validate(lifted) == []
        assert project_to_instant(lifted) == g

    def test_project_needs_delayed(self):
        with pytest.raises(PreconditionError):
            project_to_instant(match_game())

    def test_lift_needs_instant(self):
        lifted = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0]))
        with pytest.raises(PreconditionError):
            lift_to_delayed(lifted, DelaySpace.uniform(2, [0]))

    def test_min_cycle_of_match(self):
        g = match_game()
        assert min_cycle_length(g) == 1
        assert len(shortest_cycle(g)) == 1

    def test_unravel_match_three(self):
        u = unravel(match_game(), 3)
        assert len(u.states) == 6
        assert len(u.transitions) == 24
        assert min_cycle_length(u) == 3
        assert u.initial == "P_0"
        assert {u.base_state(v) for v in u.states} == {"P", "Q"}

    def test_unravel_modulus_one_is_identity(self):
        g = match_game()
        assert unravel(g, 1) is g

    def test_unravel_rejects_zero(self):
        with pytest.raises(PreconditionError):
            unravel(match_game(), 0)

    def test_lift_state_follows_the_period(self):
        u = unravel(match_game(), 2)
        assert u.lift_state("P", 0) == "P_0"
        assert u.lift_state("Q", 1) == "Q_1"
        assert u.lift_state("Q", 4) == "Q_0"

    def test_nested_unravel_keeps_both_layers(self):
        u = unravel(unravel(match_game(), 2), 3)
        assert len(u.states) == 12
        assert u.moduli == (2, 3)
        assert u.layer(u.initial) == (0, 0)
        assert u.base_state(u.lift_state("Q", 5)) == "Q"
        assert min_cycle_length(u) == 6

    def test_acyclic_graph_has_infinite_min_cycle(self):
        players = (PlayerSpec("p1", ("a",), ("x",)),)
        g = GameGraph(("s", "t"), "s", players, [Transition("s", ("a",), ("x",), "t", (0,))])
        assert shortest_cycle(g) is None
        assert min_cycle_length(g) == float("inf")


class TestProfiles:
    def test_without_and_with(self):
        x = ("a", "b", "c")
        assert profile_without(x, 1) == ("a", "c")
        assert profile_with(x, 1, "z") == ("a", "z", "c")

    def test_delay_space_parse(self):
        d = DelaySpace.parse("0,1;0", 2)
        assert d.delays(0) == (0, 1)
        assert d.delays(1) == (0,)
        assert d.max_delay == 1
        assert d.size() == 2
        assert DelaySpace.parse("0,2", 3).delays(2) == (0, 2)
        with pytest.raises(StructuralError):
            DelaySpace.parse("0;1;2", 2)
        with pytest.raises(StructuralError):
            DelaySpace.parse("x", 1)


class TestHistory:
    def test_append_checks_continuity(self):
        g = match_game()
        h = History(g, "P")
        h.append(g.resolve("P", ("a", "a")))
        assert h.final_state == "Q"
        assert h.payoffs(0) == [1]
        with pytest.raises(StructuralError):
            h.append(g.resolve("P", ("a", "b")))

    def test_check_rejects_foreign_steps(self):
        g = match_game()
        fake = Transition("P", ("a", "a"), ("a", "a"), "Q", (5, 5))
        h = History(g, "P", [fake])
        with pytest.raises(StructuralError):
            h.check()

    def test_resolve_needs_delays_in_delayed_mode(self):
        lifted = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0, 1]))
        with pytest.raises(PreconditionError):
            lifted.resolve("P", ("a", "a"))
        assert lifted.resolve("P", ("a", "a"), (1, 0)).delays == (1, 0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), n_states=st.integers(2, 4), modulus=st.sampled_from([2, 3, 4]))
def test_unravelled_cycles_are_multiples_of_the_modulus(seed, n_states, modulus):
    g = random_graph(random.Random(seed), n_states=n_states)
    u = unravel(g, modulus)
    for tr in u.transitions:
        assert u.layer(tr.target)[-1] == (u.layer(tr.source)[-1] + 1) % modulus
    assert min_cycle_length(u) % modulus == 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), modulus=st.sampled_from([2, 3, 4]))
def test_unravelling_preserves_projected_traces(seed, modulus):
    rng = random.Random(seed)
    g = random_graph(rng, n_states=rng.randint(2, 4))
    feed = [tuple(rng.choice(p.actions) for p in g.players) for _ in range(200)]
    assert trace_actions(unravel(g, modulus), feed) == trace_actions(g, feed)

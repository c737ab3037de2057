"""Tests for instant and delayed observation functions and the delivery queue."""

import random
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from delaygames.catalog import match_game  # noqa: E402
from delaygames.errors import PreconditionError, StructuralError  # noqa: E402
from delaygames.game import DelaySpace, History, lift_to_delayed  # noqa: E402
from delaygames.monitoring import (  # noqa: E402
    DeliveryQueue,
    ObservationSet,
    SignalRecord,
    observe,
    observe_delayed,
    observe_instant,
    observed_history,
)


def _play(g, moves):
    """History from P along (actions, delays) pairs."""
    h = History(g, g.initial)
    for actions, delays in moves:
        v = h.final_state
        h.append(g.resolve(v, actions, delays) if g.is_delayed else g.resolve(v, actions))
    return h


class TestInstant:
    def test_opponent_action_is_observed(self):
        h = _play(match_game(), [(("a", "b"), None)])
        z1 = observe_instant(h, 0)
        assert z1.period == 1
        assert z1.key() == (("b", 0),)
        assert observe_instant(h, 1).basics() == ("a",)

    def test_only_the_current_stage_is_observed(self):
        h = _play(match_game(), [(("a", "b"), None), (("a", "a"), None)])
        z = observe_instant(h, 0)
        assert len(z) == 1
        assert z.records[0] == SignalRecord(2, "a", 0)

    def test_empty_history_has_no_observation(self):
        with pytest.raises(PreconditionError):
            observe_instant(History(match_game(), "P"), 0)

    def test_wrong_mode(self):
        lifted = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0]))
        h = _play(lifted, [(("a", "a"), (0, 0))])
        with pytest.raises(PreconditionError):
            observe_instant(h, 0)
        with pytest.raises(PreconditionError):
            observe_delayed(_play(match_game(), [(("a", "a"), None)]), 0)


class TestDelayed:
    def setup_method(self):
        self.g = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0, 1]))

    def test_delayed_signal_is_not_seen_yet(self):
        h = _play(self.g, [(("a", "b"), (1, 0))])
        assert len(observe_delayed(h, 0)) == 0
        assert observe_delayed(h, 1).key() == (("a", 0),)

    def test_two_signals_arrive_together(self):
        h = _play(self.g, [(("a", "b"), (1, 0)), (("a", "a"), (0, 0))])
        z = observe(h, 0)
        assert [str(rec) for rec in z] == ["b@1", "a@2"]
        assert z.key() == (("b", 1), ("a", 0))

    def test_zero_delay_matches_instant(self):
        zero = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0]))
        moves = [("a", "b"), ("b", "b"), ("a", "a")]
        hd = _play(zero, [(a, (0, 0)) for a in moves])
        hi = _play(match_game(), [(a, None) for a in moves])
        for i in range(2):
            assert observed_history(hd, i) == observed_history(hi, i)

    def test_undelivered_delays_are_invisible(self):
        h1 = _play(self.g, [(("a", "a"), (0, 0)), (("b", "a"), (1, 0))])
        h2 = _play(self.g, [(("a", "a"), (0, 0)), (("b", "a"), (1, 1))])
        assert observed_history(h1, 0) == observed_history(h2, 0)
        assert observed_history(h1, 1) != observed_history(h2, 1)

    def test_record_must_be_due(self):
        with pytest.raises(StructuralError):
            ObservationSet(3, (SignalRecord(1, "a", 1),))


class TestObservedHistory:
    def test_empty_history(self):
        oh = observed_history(History(match_game(), "P"), 0)
        assert oh.initial == "P"
        assert len(oh) == 0

    def test_match_two_periods(self):
        h = _play(match_game(), [(("a", "a"), None), (("a", "a"), None)])
        oh = observed_history(h, 0)
        assert [(s.action, str(s.observation), s.state) for s in oh.steps] == [
            ("a", "{a@1}", "Q"),
            ("a", "{a@2}", "Q"),
        ]

    def test_prefix_monotonicity(self):
        h = _play(match_game(), [(("a", "b"), None), (("a", "a"), None), (("b", "a"), None)])
        short = observed_history(h.prefix(2), 0)
        assert short.is_prefix_of(observed_history(h, 0))
        assert observed_history(h, 0).prefix(2) == short


class TestDeliveryQueue:
    def test_emit_and_deliver(self):
        q = DeliveryQueue()
        q.emit(1, "a", 1)
        assert len(q.deliver(1)) == 0
        q.emit(2, "b", 0)
        z = q.deliver(2)
        assert z.key() == (("a", 1), ("b", 0))
        assert len(q) == 0

    def test_fingerprint_is_relative(self):
        q1, q2 = DeliveryQueue(), DeliveryQueue()
        q1.emit(1, "a", 2)
        q2.emit(5, "a", 2)
        assert q1.fingerprint(1) == q2.fingerprint(5)
        assert q1.fingerprint(1) != q1.fingerprint(2)

    def test_missed_delivery_is_an_error(self):
        q = DeliveryQueue()
        q.emit(1, "a", 1)
        with pytest.raises(StructuralError):
            q.deliver(3)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), length=st.integers(1, 30))
def test_every_signal_is_delivered_exactly_once(seed, length):
    rng = random.Random(seed)
    d = DelaySpace.uniform(2, [0, 1, 2])
    g = lift_to_delayed(match_game(), d)
    moves = [
        (tuple(rng.choice("ab") for _ in range(2)), tuple(rng.choice([0, 1, 2]) for _ in range(2)))
        for _ in range(length)
    ]
    h = _play(g, moves)
    for i in range(2):
        oh = observed_history(h, i)
        seen = [rec for step in oh.steps for rec in step.observation]
        assert len(seen) == len({rec.emitted for rec in seen})
        for rec in seen:
            assert rec.emitted + rec.delay <= length
            assert h.steps[rec.emitted - 1].delays[i] == rec.delay
        due = {r for r, tr in enumerate(h.steps, start=1) if r + tr.delays[i] <= length}
        assert {rec.emitted for rec in seen} == due

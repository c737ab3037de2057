"""Observation functions for instant and bounded-delay monitoring.

A player's observation at period t is the set of signal records due at t:
the signal emitted in period r with delay d is delivered at r + d. Records
carry their emission period so that co-arriving identical (signal, delay)
pairs stay distinguishable.
"""

import heapq
import logging
from dataclasses import dataclass
from typing import Iterator, List, Tuple

from .errors import PreconditionError, StructuralError
from .game import History, Mode

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class SignalRecord:
    emitted: int
    basic: str
    delay: int

    def __str__(self):
        return f"{self.basic}@{self.emitted}"


@dataclass(frozen=True)
class ObservationSet:
    """Records delivered to one player at one period, by ascending emission period."""

    period: int
    records: Tuple[SignalRecord, ...] = ()

    def __post_init__(self):
        records = tuple(sorted(self.records))
        for rec in records:
            if rec.emitted + rec.delay != self.period:
                raise StructuralError(
                    f"record {rec} with delay {rec.delay} cannot be delivered at period {self.period}"
                )
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SignalRecord]:
        return iter(self.records)

    def key(self) -> Tuple[Tuple[str, int], ...]:
        """Period-independent content: (basic signal, delay) pairs in emission order."""
        return tuple((rec.basic, rec.delay) for rec in self.records)

    def basics(self) -> Tuple[str, ...]:
        return tuple(rec.basic for rec in self.records)

    def pattern(self) -> str:
        return ",".join(f"{b}@{d}" for b, d in self.key())

    def __str__(self):
        return "{" + ", ".join(str(rec) for rec in self.records) + "}"


@dataclass(frozen=True)
class ObservedStep:
    action: str
    observation: ObservationSet
    state: str


@dataclass(frozen=True)
class ObservedHistory:
    """One player's view of a history: initial state, then (a^i_r, z^i_r, v_r) triples."""

    initial: str
    steps: Tuple[ObservedStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final_state(self) -> str:
        return self.steps[-1].state if self.steps else self.initial

    def prefix(self, length: int) -> "ObservedHistory":
        return ObservedHistory(self.initial, self.steps[:length])

    def extend(self, step: ObservedStep) -> "ObservedHistory":
        return ObservedHistory(self.initial, self.steps + (step,))

    def is_prefix_of(self, other: "ObservedHistory") -> bool:
        return self.initial == other.initial and other.steps[: len(self.steps)] == self.steps


def _instant_at(h: History, i: int, t: int) -> ObservationSet:
    return ObservationSet(t, (SignalRecord(t, h.steps[t - 1].signals[i], 0),))


def _delayed_at(h: History, i: int, t: int) -> ObservationSet:
    horizon = max(h.graph.delay_space.per_player[i])
    records = []
    for r in range(max(1, t - horizon), t + 1):
        tr = h.steps[r - 1]
        if r + tr.delays[i] == t:
            records.append(SignalRecord(r, tr.signals[i], tr.delays[i]))
    return ObservationSet(t, tuple(records))


def observe_instant(h: History, i: int) -> ObservationSet:
    if len(h) == 0:
        raise PreconditionError("no stage has been played yet")
    if h.graph.mode is not Mode.INSTANT:
        raise PreconditionError("instant observation on a delayed-monitoring graph")
    return _instant_at(h, i, len(h))


def observe_delayed(h: History, i: int) -> ObservationSet:
    if len(h) == 0:
        raise PreconditionError("no stage has been played yet")
    if h.graph.mode is not Mode.DELAYED:
        raise PreconditionError("delayed observation on an instant-monitoring graph")
    return _delayed_at(h, i, len(h))


def observe(h: History, i: int) -> ObservationSet:
    if h.graph.is_delayed:
        return observe_delayed(h, i)
    return observe_instant(h, i)


def observed_history(h: History, i: int) -> ObservedHistory:
    """z^i_r is computed on the length-r prefix, for every r <= len(h)."""
    g = h.graph
    at = _delayed_at if g.is_delayed else _instant_at
    steps = tuple(
        ObservedStep(tr.actions[i], at(h, i, r), g.base_state(tr.target))
        for r, tr in enumerate(h.steps, start=1)
    )
    return ObservedHistory(g.base_state(h.initial), steps)


class DeliveryQueue:
    """In-flight signal records of one player, ordered by due period."""

    def __init__(self):
        self._heap: List[Tuple[int, SignalRecord]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def emit(self, period: int, basic: str, delay: int) -> None:
        heapq.heappush(self._heap, (period + delay, SignalRecord(period, basic, delay)))

    def deliver(self, period: int) -> ObservationSet:
        records = []
        while self._heap and self._heap[0][0] <= period:
            due, rec = heapq.heappop(self._heap)
            if due < period:
                raise StructuralError(f"record {rec} was due at {due}, queue polled at {period}")
            records.append(rec)
        return ObservationSet(period, tuple(records))

    def fingerprint(self, period: int) -> Tuple[Tuple[int, int, str], ...]:
        """Contents relative to ``period``: (periods until due, age, signal)."""
        return tuple(sorted((due - period, period - rec.emitted, rec.basic) for due, rec in self._heap))

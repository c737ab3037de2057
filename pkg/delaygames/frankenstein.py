"""The thread-scheduling procedure that plays an instant-monitoring strategy
under bounded signal delays.

For one player, the procedure keeps |V|+1 virtual observed histories of the
instant-monitoring game (threads), indexed by epsilon and the states, and
a schedule log where log[r] names the thread that prescribed the action of
period r+1. One period is driven through three entry points so the
simulator owns the period loop:

* ``next_action``: ask the wrapped strategy on the scheduled thread
  (assertion 4: that thread is not waiting for a signal),
* ``on_state``: extend that thread with a pending slot, then schedule the
  least active thread ending at the new state (assertion 8: one exists),
* ``on_signals``: file every delivered signal into the thread that
  prescribed its emission period (assertion 13: that thread is pending).

``FrankensteinState`` stores threads in full. ``CompactFrankensteinState``
keeps, per thread, only a strategy cursor, the end state and the pending
slot, plus the last m+2 log entries; its fingerprint is finite when the
wrapped strategy is finite-state.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Any, Callable, Deque, Dict, Hashable, Iterable, List, Optional, Tuple

from .errors import (
    CycleTooShort,
    FrankensteinAssertion,
    PreconditionError,
    StrategyUndefined,
    VariantDivergence,
)
from .game import GameGraph, shortest_cycle
from .monitoring import ObservationSet, ObservedHistory, ObservedStep, SignalRecord
from .strategy import StrategyCursor, StrategyInterface

logger = logging.getLogger(__name__)

# None stands for epsilon in K
ThreadIndex = Optional[str]
EPSILON: ThreadIndex = None


class _Pending:
    def __repr__(self):
        return "#"


PENDING = _Pending()


def index_label(k: ThreadIndex) -> str:
    return "ε" if k is None else k


def index_order(graph: GameGraph) -> List[ThreadIndex]:
    """Canonical order on K: epsilon first, then state ids sorted."""
    return [EPSILON] + list(graph.states)


def check_cycle_length(graph: GameGraph, delays: Iterable[int], player: int) -> int:
    """Refuse graphs with a cycle no longer than the largest delay; return that delay."""
    m = max(delays)
    cycle = shortest_cycle(graph)
    if cycle is not None and len(cycle) <= m:
        path = " -> ".join(cycle + cycle[:1])
        logger.error(f"Player {player + 1}: cycle {path} of length {len(cycle)} is not longer than delay {m}")
        raise CycleTooShort(
            f"cycle {path} has length {len(cycle)}, not longer than the maximal delay {m}; unravel first",
            cycle,
        )
    return m


def instant_observation(position: int, basic: str) -> ObservationSet:
    return ObservationSet(position, (SignalRecord(position, basic, 0),))


@dataclass(frozen=True)
class ThreadRecord:
    """One player's procedure at the end of period ``t``.

    ``h`` is the thread scheduled for period t+1, ``state`` the unravelled
    state reached and ``pending`` the threads still waiting for a signal.
    """

    player: int
    t: int
    h: str
    action: str
    state: str
    delivered: Tuple[str, ...]
    pending: Tuple[str, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "player": self.player,
            "t": self.t,
            "h": self.h,
            "action": self.action,
            "state": self.state,
            "delivered": list(self.delivered),
            "pending": list(self.pending),
        }


@dataclass
class ThreadStep:
    action: str
    signal: Any
    state: str


@dataclass
class Thread:
    start: str
    steps: List[ThreadStep]

    @property
    def end(self) -> str:
        return self.steps[-1].state if self.steps else self.start

    @property
    def pending(self) -> bool:
        return bool(self.steps) and self.steps[-1].signal is PENDING

    @property
    def active(self) -> bool:
        return not self.pending

    def observed(self, graph: GameGraph) -> ObservedHistory:
        """The thread as an observed history of the instant game, base states only."""
        return ObservedHistory(
            graph.base_state(self.start),
            tuple(
                ObservedStep(step.action, instant_observation(pos, step.signal), graph.base_state(step.state))
                for pos, step in enumerate(self.steps, start=1)
            ),
        )


class _Procedure:
    """Shared bookkeeping of both variants: the period, the last action and the log checks."""

    def __init__(self, graph: GameGraph, player: int, strategy: StrategyInterface, delays: Iterable[int]):
        if graph.is_delayed:
            raise PreconditionError("threads live in the instant-monitoring game; pass the instant graph")
        self.graph = graph
        self.player = player
        self.strategy = strategy
        self.delays = tuple(sorted(set(delays)))
        self.max_delay = check_cycle_length(graph, self.delays, player)
        self.order = index_order(graph)
        self.period = 0
        self._played: Optional[str] = None
        self._awaiting_signals = False
        self._last_step: Optional[Tuple[str, str]] = None
        self.listener: Optional[Callable[[ThreadRecord], None]] = None

    def _fail(self, line: int, msg: str):
        err = FrankensteinAssertion(line, self.player, self.period, msg)
        logger.error(f"Assertion failed: {err}")
        raise err

    def _check_action(self, action: str) -> str:
        if action not in self.graph.players[self.player].actions:
            raise StrategyUndefined(f"{self.strategy.name} returned {action!r}, not an action of player {self.player + 1}")
        return action

    def _check_observation(self, z: ObservationSet) -> None:
        if not self._awaiting_signals:
            raise PreconditionError("signals must follow the state update of the same period")
        if z.period != self.period + 1:
            raise PreconditionError(f"observation for period {z.period} delivered at period {self.period + 1}")

    def _emit(self, h: ThreadIndex, z: ObservationSet, pending: Iterable[ThreadIndex]) -> None:
        if self.listener is None:
            return
        action, v = self._last_step
        self.listener(
            ThreadRecord(
                self.player + 1,
                self.period,
                index_label(h),
                action,
                v,
                tuple(str(rec) for rec in z),
                tuple(index_label(k) for k in pending),
            )
        )


class FrankensteinState(_Procedure):
    """Full-history variant: threads are stored and the wrapped strategy is replayed on them."""

    def __init__(self, graph: GameGraph, player: int, strategy: StrategyInterface, delays: Iterable[int]):
        super().__init__(graph, player, strategy, delays)
        v0 = graph.initial
        self.threads: Dict[ThreadIndex, Thread] = {EPSILON: Thread(v0, [])}
        for v in graph.states:
            self.threads[v] = Thread(v, [])
        self.log: List[ThreadIndex] = [EPSILON]

    def next_action(self) -> str:
        k = self.log[self.period]
        if self.threads[k].pending:
            self._fail(4, f"scheduled thread {index_label(k)} is pending")
        if self._played is None:
            self._played = self._check_action(self.strategy.respond(self.threads[k].observed(self.graph)))
        return self._played

    def on_state(self, action: str, v: str) -> None:
        if self._played is None or action != self._played:
            raise PreconditionError(f"on_state expects the action last returned ({self._played!r}), got {action!r}")
        k = self.log[self.period]
        self.threads[k].steps.append(ThreadStep(action, PENDING, v))
        self._last_step = (action, v)
        for k2 in self.order:
            if k2 != k and self.threads[k2].active and self.threads[k2].end == v:
                break
        else:
            self._fail(8, f"no active thread other than {index_label(k)} ends at {v}")
        self.log.append(k2)
        self._played = None
        self._awaiting_signals = True
        logger.debug(f"Player {self.player + 1}, period {self.period + 1}: {index_label(k)} -> {index_label(k2)} at {v}")

    def on_signals(self, z: ObservationSet) -> None:
        self._check_observation(z)
        for rec in z:
            k = self.log[rec.emitted - 1]
            thread = self.threads[k]
            if not thread.pending:
                self._fail(13, f"thread {index_label(k)} has no pending slot for the signal emitted at {rec.emitted}")
            thread.steps[-1] = replace(thread.steps[-1], signal=rec.basic)
        self._awaiting_signals = False
        self.period += 1
        self._emit(self.log[self.period], z, [k for k in self.order if self.threads[k].pending])

    def shuffle_decomposition(self) -> Dict[int, Tuple[ThreadIndex, int]]:
        """Period r -> (h[r-1], 1-based position of period r's triple inside that thread)."""
        seen: Dict[ThreadIndex, int] = {}
        out: Dict[int, Tuple[ThreadIndex, int]] = {}
        for r in range(1, self.period + 1):
            k = self.log[r - 1]
            seen[k] = seen.get(k, 0) + 1
            out[r] = (k, seen[k])
        return out

    def reconstruct(self) -> List[ThreadStep]:
        """The player's observed play, period by period, read back from the threads."""
        return [self.threads[k].steps[pos - 1] for _, (k, pos) in sorted(self.shuffle_decomposition().items())]

    def recurrent_threads(self) -> "Recurrence":
        return recurrence_of(self.log[: self.period + 1], self.order)


@dataclass(frozen=True)
class Recurrence:
    counts: Dict[ThreadIndex, int]
    recurrent: frozenset
    settle_period: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "counts": {index_label(k): n for k, n in self.counts.items()},
            "recurrent": sorted(index_label(k) for k in self.recurrent),
            "settle_period": self.settle_period,
        }


def recurrence_of(log: List[ThreadIndex], order: List[ThreadIndex]) -> Recurrence:
    """Windowed estimate of the recurrent indices L and the settling period l.

    L holds the indices scheduled in the final quarter of h[0..t]; l is the
    period after the last one prescribed by an index outside L (1 if none).
    """
    t = len(log) - 1
    if t < 4:
        raise PreconditionError(f"recurrence needs a run of at least 4 periods, got {t}")
    counts = {k: 0 for k in order}
    for k in log:
        counts[k] += 1
    n = t + 1
    window = log[n - math.ceil(n / 4):]
    recurrent = frozenset(window)
    last_outside = max((r for r, k in enumerate(log) if k not in recurrent), default=None)
    settle = 1 if last_outside is None else last_outside + 2
    return Recurrence({k: c for k, c in counts.items() if c}, recurrent, settle)


@dataclass
class _CompactThread:
    cursor: StrategyCursor
    end: str
    length: int = 0
    # (action, state) awaiting its signal
    pending_slot: Optional[Tuple[str, str]] = None

    @property
    def active(self) -> bool:
        return self.pending_slot is None


class CompactFrankensteinState(_Procedure):
    """Bounded-memory variant for finite-state strategies.

    Each thread is summarised by a strategy cursor advanced over its filled
    slots, its end state and its pending slot. Only h[t-m-1..t+1] is kept.
    """

    def __init__(self, graph: GameGraph, player: int, strategy: StrategyInterface, delays: Iterable[int]):
        super().__init__(graph, player, strategy, delays)
        self.threads: Dict[ThreadIndex, _CompactThread] = {
            EPSILON: _CompactThread(strategy.cursor(graph.base_state(graph.initial)), graph.initial)
        }
        for v in graph.states:
            self.threads[v] = _CompactThread(strategy.cursor(graph.base_state(v)), v)
        self.log: Deque[ThreadIndex] = deque([EPSILON], maxlen=self.max_delay + 2)

    def _log_at(self, r: int) -> ThreadIndex:
        # log[-1] is h[period] (or h[period+1] while awaiting signals)
        top = self.period + (1 if self._awaiting_signals else 0)
        offset = top - r
        if offset < 0 or offset >= len(self.log):
            raise PreconditionError(f"h[{r}] is no longer retained")
        return self.log[-1 - offset]

    def next_action(self) -> str:
        k = self.log[-1]
        thread = self.threads[k]
        if not thread.active:
            self._fail(4, f"scheduled thread {index_label(k)} is pending")
        if self._played is None:
            self._played = self._check_action(thread.cursor.next_action())
        return self._played

    def on_state(self, action: str, v: str) -> None:
        if self._played is None or action != self._played:
            raise PreconditionError(f"on_state expects the action last returned ({self._played!r}), got {action!r}")
        k = self.log[-1]
        thread = self.threads[k]
        thread.pending_slot = (action, v)
        thread.end = v
        self._last_step = (action, v)
        for k2 in self.order:
            if k2 != k and self.threads[k2].active and self.threads[k2].end == v:
                break
        else:
            self._fail(8, f"no active thread other than {index_label(k)} ends at {v}")
        self.log.append(k2)
        self._played = None
        self._awaiting_signals = True

    def on_signals(self, z: ObservationSet) -> None:
        self._check_observation(z)
        for rec in z:
            k = self._log_at(rec.emitted - 1)
            thread = self.threads[k]
            if thread.pending_slot is None:
                self._fail(13, f"thread {index_label(k)} has no pending slot for the signal emitted at {rec.emitted}")
            action, v = thread.pending_slot
            thread.length += 1
            thread.cursor.advance(action, instant_observation(thread.length, rec.basic), self.graph.base_state(v))
            thread.pending_slot = None
        self._awaiting_signals = False
        self.period += 1
        self._emit(self.log[-1], z, [k for k in self.order if not self.threads[k].active])

    def fingerprint(self) -> Optional[Hashable]:
        summaries = []
        for k in self.order:
            thread = self.threads[k]
            memory = thread.cursor.fingerprint()
            if memory is None:
                return None
            summaries.append((memory, thread.end, thread.pending_slot))
        return (tuple(summaries), tuple(self.log))


class ShadowFrankenstein:
    """Drives both variants in lock-step and fails on the first divergent action."""

    def __init__(self, graph: GameGraph, player: int, strategy: StrategyInterface, delays: Iterable[int]):
        delays = tuple(delays)
        self.full = FrankensteinState(graph, player, strategy, delays)
        self.compact = CompactFrankensteinState(graph, player, strategy, delays)
        self.player = player

    @property
    def period(self) -> int:
        return self.full.period

    def next_action(self) -> str:
        a = self.full.next_action()
        b = self.compact.next_action()
        if a != b:
            raise VariantDivergence(
                f"player {self.player + 1}, period {self.full.period + 1}: full history plays {a!r}, "
                f"bounded memory plays {b!r}"
            )
        return a

    def on_state(self, action: str, v: str) -> None:
        self.full.on_state(action, v)
        self.compact.on_state(action, v)

    def on_signals(self, z: ObservationSet) -> None:
        self.full.on_signals(z)
        self.compact.on_signals(z)

    def fingerprint(self) -> Optional[Hashable]:
        return self.compact.fingerprint()


VARIANTS = {
    "full": FrankensteinState,
    "compact": CompactFrankensteinState,
    "shadow": ShadowFrankenstein,
}


def fk_init(graph: GameGraph, strategy: StrategyInterface, delays: Iterable[int], player: int, variant: str = "full"):
    """Threads for epsilon and every state, log [epsilon], period 0."""
    try:
        cls = VARIANTS[variant]
    except KeyError:
        raise PreconditionError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    return cls(graph, player, strategy, delays)


def full_state(st) -> Optional[FrankensteinState]:
    """The full-history state behind any variant, if there is one."""
    if isinstance(st, FrankensteinState):
        return st
    if isinstance(st, ShadowFrankenstein):
        return st.full
    return None


class FrankensteinCursor(StrategyCursor):
    """Adapts a procedure state to the simulator: base states in, unravelled states inside."""

    def __init__(self, state):
        self.state = state
        self.graph: GameGraph = state.full.graph if isinstance(state, ShadowFrankenstein) else state.graph

    def next_action(self) -> str:
        return self.state.next_action()

    def advance(self, action: str, observation: ObservationSet, state: str) -> None:
        self.state.on_state(action, self.graph.lift_state(state, self.state.period + 1))
        self.state.on_signals(observation)

    def fingerprint(self) -> Optional[Hashable]:
        fp = getattr(self.state, "fingerprint", None)
        return fp() if fp is not None else None


class FrankensteinStrategy(StrategyInterface):
    """The procedure packaged as a strategy of the delayed-monitoring game.

    A ``listener`` receives one ``ThreadRecord`` per period from every
    cursor this strategy creates; in the shadow variant the full-history
    state reports.
    """

    def __init__(
        self,
        graph: GameGraph,
        player: int,
        base: StrategyInterface,
        delays: Iterable[int],
        variant: str = "compact",
        listener: Optional[Callable[[ThreadRecord], None]] = None,
    ):
        self.graph = graph
        self.player = player
        self.base = base
        self.delays = tuple(sorted(set(delays)))
        self.variant = variant
        self.listener = listener
        self.name = f"frankenstein({base.name})"
        check_cycle_length(graph, self.delays, player)

    @property
    def finite_state(self) -> bool:
        return self.variant != "full" and self.base.finite_state

    def with_listener(self, listener: Optional[Callable[[ThreadRecord], None]]) -> "FrankensteinStrategy":
        return FrankensteinStrategy(self.graph, self.player, self.base, self.delays, self.variant, listener)

    def _start(self, initial: str, listener) -> FrankensteinCursor:
        if initial != self.graph.base_state(self.graph.initial):
            raise PreconditionError(f"procedure starts at {self.graph.initial}, not at {initial}")
        st = fk_init(self.graph, self.base, self.delays, self.player, self.variant)
        if listener is not None:
            (st.full if isinstance(st, ShadowFrankenstein) else st).listener = listener
        return FrankensteinCursor(st)

    def cursor(self, initial: str) -> FrankensteinCursor:
        return self._start(initial, self.listener)

    def respond(self, oh: ObservedHistory) -> str:
        cur = self._start(oh.initial, None)
        for step in oh.steps:
            cur.next_action()
            cur.advance(step.action, step.observation, step.state)
        return cur.next_action()

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": "frankenstein",
            "variant": self.variant,
            "delays": list(self.delays),
            "graph": self.graph.name,
            "states": len(self.graph.states),
            "base": self.base.describe(),
        }

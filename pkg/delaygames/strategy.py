"""Strategies, finite-state strategy automata and strategy profiles.

A strategy maps a player's observed history to one of that player's actions. Every
strategy can hand out an incremental *cursor* for use inside a single
simulation; finite-state strategies additionally expose their automaton
memory as a fingerprint, which is what makes lasso detection possible.
"""

import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import (
    Any,
    Callable,
    Dict,
    Hashable,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .errors import BudgetExceeded, StrategyUndefined, StructuralError
from .game import GameGraph, PlayerSpec, profile_with
from .monitoring import ObservationSet, ObservedHistory, ObservedStep

logger = logging.getLogger(__name__)

ANY = "*"

ObservationKey = Tuple[Tuple[str, int], ...]


class StrategyCursor(ABC):
    """Incremental view of a strategy along one play."""

    @abstractmethod
    def next_action(self) -> str:
        ...

    @abstractmethod
    def advance(self, action: str, observation: ObservationSet, state: str) -> None:
        ...

    def fingerprint(self) -> Optional[Hashable]:
        """Finite summary of the cursor, or None when it has unbounded state."""
        return None


class StrategyInterface(ABC):
    """Maps observed histories to actions of the owning player."""

    name: str = "strategy"

    @abstractmethod
    def respond(self, oh: ObservedHistory) -> str:
        ...

    def cursor(self, initial: str) -> StrategyCursor:
        return ReplayCursor(self, initial)

    @property
    def finite_state(self) -> bool:
        return False

    def describe(self) -> Dict[str, Any]:
        return {"kind": "opaque", "name": self.name}


class ReplayCursor(StrategyCursor):
    """Cursor that keeps the whole observed history and replays ``respond``."""

    def __init__(self, strategy: StrategyInterface, initial: str):
        self.strategy = strategy
        self.history = ObservedHistory(initial)

    def next_action(self) -> str:
        return self.strategy.respond(self.history)

    def advance(self, action: str, observation: ObservationSet, state: str) -> None:
        self.history = self.history.extend(ObservedStep(action, observation, state))


class FunctionStrategy(StrategyInterface):
    def __init__(self, fn: Callable[[ObservedHistory], str], name: str = "function"):
        self.fn = fn
        self.name = name

    def respond(self, oh: ObservedHistory) -> str:
        return self.fn(oh)


@dataclass(frozen=True)
class ObservationPattern:
    """Matcher over observation sets.

    ``*`` matches anything, the empty string matches an empty delivery,
    ``+b`` matches any set containing basic signal ``b`` and
    ``b@d,b'@d'`` matches exactly that key in emission order.
    """

    text: str

    def __post_init__(self):
        if self.text not in (ANY, "") and not self.text.startswith("+"):
            self.key()

    def key(self) -> ObservationKey:
        pairs = []
        for part in self.text.split(","):
            basic, _, delay = part.strip().partition("@")
            if not basic:
                raise StructuralError(f"bad observation pattern {self.text!r}")
            try:
                pairs.append((basic, int(delay) if delay else 0))
            except ValueError:
                raise StructuralError(f"bad delay in observation pattern {self.text!r}")
        return tuple(pairs)

    def matches(self, observation: ObservationSet) -> bool:
        if self.text == ANY:
            return True
        if self.text == "":
            return len(observation) == 0
        if self.text.startswith("+"):
            return self.text[1:] in observation.basics()
        return observation.key() == self.key()

    @classmethod
    def exact(cls, key: ObservationKey) -> "ObservationPattern":
        return cls(",".join(f"{b}@{d}" for b, d in key))


@dataclass(frozen=True)
class UpdateRule:
    memory: str
    action: str
    observation: ObservationPattern
    state: str
    next: str

    def matches(self, memory: str, action: str, observation: ObservationSet, state: str) -> bool:
        return (
            self.memory in (ANY, memory)
            and self.action in (ANY, action)
            and self.state in (ANY, state)
            and self.observation.matches(observation)
        )

    def to_dict(self) -> Dict[str, str]:
        return {
            "memory": self.memory,
            "action": self.action,
            "observation": self.observation.text,
            "state": self.state,
            "next": self.next,
        }


class FiniteStateStrategy(StrategyInterface):
    """Strategy automaton (M, init, update, output).

    ``update`` is a list of rules tried in order (first match wins; a
    ``next`` of ``*`` keeps the memory). ``output`` maps (memory, state)
    to an action, with ``*`` as a wildcard on either side.
    """

    def __init__(
        self,
        memory: Sequence[str],
        initial: str,
        update: Sequence[UpdateRule],
        output: Mapping[Tuple[str, str], str],
        name: str = "finite-state",
        shorthand: Optional[Dict[str, str]] = None,
    ):
        self.memory = tuple(memory)
        self.initial = initial
        self.update_rules = tuple(update)
        self.output_table = dict(output)
        self.name = name
        self._shorthand = shorthand
        if initial not in self.memory:
            raise StructuralError(f"initial memory {initial!r} is not a memory state")
        for rule in self.update_rules:
            for m in (rule.memory, rule.next):
                if m != ANY and m not in self.memory:
                    raise StructuralError(f"update rule mentions unknown memory {m!r}")
        for (m, _), _ in self.output_table.items():
            if m != ANY and m not in self.memory:
                raise StructuralError(f"output table mentions unknown memory {m!r}")

    def __repr__(self):
        return f"FiniteStateStrategy({self.name!r}, memory={len(self.memory)})"

    @property
    def finite_state(self) -> bool:
        return True

    def update(self, memory: str, action: str, observation: ObservationSet, state: str) -> str:
        for rule in self.update_rules:
            if rule.matches(memory, action, observation, state):
                return memory if rule.next == ANY else rule.next
        raise StrategyUndefined(
            f"{self.name}: no update for memory {memory!r}, action {action!r}, "
            f"observation {observation.pattern()!r}, state {state!r}"
        )

    def output(self, memory: str, state: str) -> str:
        for key in ((memory, state), (memory, ANY), (ANY, state), (ANY, ANY)):
            if key in self.output_table:
                return self.output_table[key]
        raise StrategyUndefined(f"{self.name}: no output for memory {memory!r} at state {state!r}")

    def run(self, oh: ObservedHistory) -> str:
        """Memory reached after reading ``oh``."""
        m = self.initial
        for step in oh.steps:
            m = self.update(m, step.action, step.observation, step.state)
        return m

    def respond(self, oh: ObservedHistory) -> str:
        return self.output(self.run(oh), oh.final_state)

    def cursor(self, initial: str) -> "FiniteStateCursor":
        return FiniteStateCursor(self, initial)

    def check_alphabet(self, player: PlayerSpec) -> None:
        for action in self.output_table.values():
            if action not in player.actions:
                raise StructuralError(f"{self.name}: action {action!r} is not available to {player.name}")
        for rule in self.update_rules:
            if rule.action not in (ANY,) + player.actions:
                raise StructuralError(f"{self.name}: update rule on unknown action {rule.action!r}")

    def describe(self) -> Dict[str, Any]:
        if self._shorthand is not None:
            return {"kind": "memoryless", "actions": dict(sorted(self._shorthand.items()))}
        return {
            "kind": "finite-state",
            "memory": list(self.memory),
            "initial": self.initial,
            "update": [rule.to_dict() for rule in self.update_rules],
            "output": [
                {"memory": m, "state": v, "action": a}
                for (m, v), a in sorted(self.output_table.items())
            ],
        }

    @classmethod
    def memoryless(cls, actions: Mapping[str, str], name: Optional[str] = None) -> "FiniteStateStrategy":
        """One memory state; ``actions`` maps base states (or ``*``) to actions."""
        return cls(
            ("m",),
            "m",
            (UpdateRule(ANY, ANY, ObservationPattern(ANY), ANY, ANY),),
            {("m", v): a for v, a in actions.items()},
            name=name or "memoryless",
            shorthand=dict(actions),
        )

    @classmethod
    def constant(cls, action: str) -> "FiniteStateStrategy":
        return cls.memoryless({ANY: action}, name=f"always-{action}")

    @classmethod
    def grim_trigger(cls, cooperate: str, punish: str, trigger: str) -> "FiniteStateStrategy":
        """Play ``cooperate`` until ``trigger`` is delivered, then ``punish`` forever."""
        return cls(
            ("coop", "punish"),
            "coop",
            (
                UpdateRule("coop", ANY, ObservationPattern(f"+{trigger}"), ANY, "punish"),
                UpdateRule(ANY, ANY, ObservationPattern(ANY), ANY, ANY),
            ),
            {("coop", ANY): cooperate, ("punish", ANY): punish},
            name="grim-trigger",
        )

    @classmethod
    def open_loop(cls, word: Sequence[str]) -> "FiniteStateStrategy":
        """Play ``word`` cyclically, ignoring every observation."""
        if not word:
            raise StructuralError("open-loop word must be nonempty")
        n = len(word)
        memory = tuple(f"w{k}" for k in range(n))
        update = tuple(
            UpdateRule(memory[k], ANY, ObservationPattern(ANY), ANY, memory[(k + 1) % n])
            for k in range(n)
        )
        output = {(memory[k], ANY): a for k, a in enumerate(word)}
        return cls(memory, memory[0], update, output, name="open-loop:" + "".join(word))


class FiniteStateCursor(StrategyCursor):
    def __init__(self, strategy: FiniteStateStrategy, initial: str):
        self.strategy = strategy
        self.memory = strategy.initial
        self.state = initial

    def next_action(self) -> str:
        return self.strategy.output(self.memory, self.state)

    def advance(self, action: str, observation: ObservationSet, state: str) -> None:
        self.memory = self.strategy.update(self.memory, action, observation, state)
        self.state = state

    def fingerprint(self) -> Hashable:
        return self.memory


def fs_respond(fs: FiniteStateStrategy, oh: ObservedHistory) -> str:
    """Fold the update over ``oh`` from the initial memory, then apply the output."""
    return fs.respond(oh)


@dataclass(frozen=True)
class StrategyProfile:
    strategies: Tuple[StrategyInterface, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, i: int) -> StrategyInterface:
        return self.strategies[i]

    def __iter__(self) -> Iterator[StrategyInterface]:
        return iter(self.strategies)

    def replace(self, i: int, strategy: StrategyInterface) -> "StrategyProfile":
        """(r^i, s^{-i})"""
        return StrategyProfile(profile_with(self.strategies, i, strategy))

    @property
    def finite_state(self) -> bool:
        return all(s.finite_state for s in self.strategies)

    def check(self, g: GameGraph) -> None:
        if len(self.strategies) != g.n_players:
            raise StructuralError(f"profile has {len(self.strategies)} strategies, game has {g.n_players} players")
        for s, player in zip(self.strategies, g.players):
            if isinstance(s, FiniteStateStrategy):
                s.check_alphabet(player)

    def describe(self) -> Dict[str, Any]:
        return {"players": [s.describe() for s in self.strategies]}


def observation_alphabet(g: GameGraph, i: int) -> List[ObservationKey]:
    """Every observation key player ``i`` can receive in one period.

    Co-arriving records come from distinct emission periods and therefore
    carry distinct delays, so a key holds at most one record per delay.
    """
    signals = g.players[i].signals
    if not g.is_delayed:
        return [((b, 0),) for b in signals]
    delays = sorted(g.delay_space.delays(i), reverse=True)
    keys: List[ObservationKey] = []
    for choice in itertools.product(*([None] + list(signals) for _ in delays)):
        keys.append(tuple((b, d) for b, d in zip(choice, delays) if b is not None))
    return sorted(keys)


def count_finite_state_deviators(g: GameGraph, i: int, memory: int) -> int:
    bases = sorted({g.base_state(v) for v in g.states})
    n_obs = len(observation_alphabet(g, i))
    n_actions = len(g.players[i].actions)
    return sum(k ** (k * n_obs) * n_actions ** (k * len(bases)) if k > 1 else n_actions ** len(bases)
               for k in range(1, memory + 1))


def finite_state_deviators(g: GameGraph, i: int, memory: int) -> Iterator[FiniteStateStrategy]:
    """All automata with at most ``memory`` states over player ``i``'s alphabets.

    Updates are keyed by (memory, observation key), outputs by
    (memory, base state); the initial memory is always the first one.
    """
    if memory < 1:
        raise StructuralError("deviator memory bound must be at least 1")
    bases = sorted({g.base_state(v) for v in g.states})
    actions = g.players[i].actions
    alphabet = observation_alphabet(g, i)
    for k in range(1, memory + 1):
        names = tuple(f"m{j}" for j in range(k))
        update_slots = [(m, z) for m in names for z in alphabet] if k > 1 else []
        output_slots = [(m, v) for m in names for v in bases]
        for nexts in itertools.product(names, repeat=len(update_slots)):
            rules = [
                UpdateRule(m, ANY, ObservationPattern.exact(z), ANY, nxt)
                for (m, z), nxt in zip(update_slots, nexts)
            ]
            if k == 1:
                rules = [UpdateRule(ANY, ANY, ObservationPattern(ANY), ANY, ANY)]
            for outs in itertools.product(actions, repeat=len(output_slots)):
                table = dict(zip(output_slots, outs))
                label = ",".join(f"{v}:{a}" for (_, v), a in zip(output_slots, outs))
                if k == 1:
                    yield FiniteStateStrategy.memoryless(
                        {v: a for (_, v), a in table.items()}, name=f"memoryless[{label}]"
                    )
                else:
                    yield FiniteStateStrategy(names, names[0], rules, table, name=f"automaton{k}[{label}]")


def open_loop_deviators(g: GameGraph, i: int, depth: int) -> Iterator[FiniteStateStrategy]:
    """Periodic action words of length 1..depth for player ``i``."""
    for n in range(1, depth + 1):
        for word in itertools.product(g.players[i].actions, repeat=n):
            yield FiniteStateStrategy.open_loop(word)


def deviators(g: GameGraph, i: int, memory: int, depth: int, limit: int) -> Iterator[FiniteStateStrategy]:
    """Finite-state deviators, then open-loop words, raising past ``limit``."""
    source = itertools.chain(finite_state_deviators(g, i, memory), open_loop_deviators(g, i, depth))
    for n, dev in enumerate(source):
        if n >= limit:
            raise BudgetExceeded(f"more than {limit} deviators for player {i + 1}")
        yield dev


def constant_profile(actions: Iterable[str]) -> StrategyProfile:
    return StrategyProfile(tuple(FiniteStateStrategy.constant(a) for a in actions))

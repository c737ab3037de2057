"""Game graphs, plays and the structural transforms between monitoring modes.

A game graph is a finite labelled graph whose edges carry an action
profile, a signal profile (plus a delay profile in delayed mode), the
target state and one integer stage payoff per player. Graphs are treated
as immutable once built; the three transforms (projection to instant
monitoring, lifting to delayed monitoring and cycle unravelling) always
return new graphs.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import networkx as nx

from .errors import ModelViolation, PreconditionError, StructuralError

logger = logging.getLogger(__name__)

T = TypeVar("T")

ActionProfile = Tuple[str, ...]
DelayProfile = Tuple[int, ...]


class Mode(str, Enum):
    INSTANT = "instant"
    DELAYED = "delayed"


def profile_without(profile: Sequence[T], i: int) -> Tuple[T, ...]:
    """Return x^{-i}: the profile with player ``i``'s entry removed."""
    return tuple(profile[:i]) + tuple(profile[i + 1 :])


def profile_with(profile: Sequence[T], i: int, entry: T) -> Tuple[T, ...]:
    """Return (x^i, x^{-i}): the profile with player ``i``'s entry replaced."""
    return tuple(profile[:i]) + (entry,) + tuple(profile[i + 1 :])


@dataclass(frozen=True)
class PlayerSpec:
    name: str
    actions: Tuple[str, ...]
    signals: Tuple[str, ...]


@dataclass(frozen=True)
class DelaySpace:
    """Per-player finite sets of possible delays D^i."""

    per_player: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        sets = tuple(frozenset(int(d) for d in ds) for ds in self.per_player)
        if not sets:
            raise StructuralError("delay space needs at least one player")
        for i, ds in enumerate(sets):
            if not ds:
                raise StructuralError(f"delay set of player {i + 1} is empty")
            if min(ds) < 0:
                raise StructuralError(f"negative delay for player {i + 1}")
        object.__setattr__(self, "per_player", sets)

    @classmethod
    def uniform(cls, n_players: int, delays: Iterable[int]) -> "DelaySpace":
        ds = frozenset(delays)
        return cls(tuple(ds for _ in range(n_players)))

    @classmethod
    def parse(cls, text: str, n_players: int) -> "DelaySpace":
        """Parse ``"0,1"`` (same set for everyone) or ``"0,1;0"`` (per player)."""
        try:
            groups = [
                frozenset(int(x) for x in part.split(",") if x.strip() != "")
                for part in text.split(";")
            ]
        except ValueError as e:
            raise StructuralError(f"invalid delay sets {text!r}: {e}")
        if len(groups) == 1:
            groups = groups * n_players
        if len(groups) != n_players:
            raise StructuralError(
                f"delay sets {text!r} name {len(groups)} players, game has {n_players}"
            )
        return cls(tuple(groups))

    @property
    def n_players(self) -> int:
        return len(self.per_player)

    @property
    def max_delay(self) -> int:
        return max(max(ds) for ds in self.per_player)

    def delays(self, i: int) -> Tuple[int, ...]:
        return tuple(sorted(self.per_player[i]))

    def profiles(self) -> Iterator[DelayProfile]:
        """All delay profiles d in D, lexicographic."""
        return itertools.product(*(self.delays(i) for i in range(self.n_players)))

    def size(self) -> int:
        return math.prod(len(ds) for ds in self.per_player)

    def contains(self, profile: Sequence[int]) -> bool:
        return len(profile) == self.n_players and all(
            d in ds for d, ds in zip(profile, self.per_player)
        )

    def describe(self) -> str:
        return ";".join(",".join(str(d) for d in self.delays(i)) for i in range(self.n_players))


@dataclass(frozen=True)
class Transition:
    source: str
    actions: ActionProfile
    signals: Tuple[str, ...]
    target: str
    payoffs: Tuple[int, ...]
    # None in instant mode
    delays: Optional[DelayProfile] = None

    def sort_key(self):
        return (self.source, self.actions, self.signals, self.target, self.payoffs, self.delays or ())

    def basic(self) -> "Transition":
        return replace(self, delays=None)

    @property
    def signal_profile(self) -> Tuple[Union[str, Tuple[str, int]], ...]:
        if self.delays is None:
            return self.signals
        return tuple(zip(self.signals, self.delays))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    location: str

    def __str__(self):
        return f"{self.location}: {self.message}"


class GameGraph:
    """A finite concurrent game graph with one monitoring mode.

    State ids are strings; ``state_index`` interns them to dense integers
    in canonical (sorted) order. Unravelled graphs keep, for every state,
    its base state and the index vector of the cyclic layers it lives in,
    together with the moduli of those layers.
    """

    def __init__(
        self,
        states: Iterable[str],
        initial: str,
        players: Sequence[PlayerSpec],
        transitions: Iterable[Transition],
        mode: Mode = Mode.INSTANT,
        delay_space: Optional[DelaySpace] = None,
        aggregator: str = "mean-payoff",
        deterministic: bool = True,
        name: Optional[str] = None,
        bases: Optional[Dict[str, str]] = None,
        layers: Optional[Dict[str, Tuple[int, ...]]] = None,
        moduli: Sequence[int] = (),
    ):
        self.states: Tuple[str, ...] = tuple(sorted(set(states)))
        self.initial = initial
        self.players: Tuple[PlayerSpec, ...] = tuple(players)
        self.transitions: Tuple[Transition, ...] = tuple(
            sorted(set(transitions), key=Transition.sort_key)
        )
        self.mode = Mode(mode)
        self.delay_space = delay_space
        self.aggregator = aggregator
        self.deterministic = deterministic
        self.name = name
        self.moduli: Tuple[int, ...] = tuple(moduli)
        self._bases = {v: (bases or {}).get(v, v) for v in self.states}
        self._layers = {
            v: tuple((layers or {}).get(v, (0,) * len(self.moduli))) for v in self.states
        }
        self._index = {v: k for k, v in enumerate(self.states)}
        self._out: Dict[Tuple[str, ActionProfile], List[Transition]] = {}
        for tr in self.transitions:
            self._out.setdefault((tr.source, tr.actions), []).append(tr)
        self._lifted = {(self._bases[v], self._layers[v]): v for v in self.states}

    def __repr__(self):
        return (
            f"GameGraph(name={self.name!r}, states={len(self.states)}, "
            f"transitions={len(self.transitions)}, mode={self.mode.value})"
        )

    def _identity(self):
        return (
            self.states,
            self.initial,
            self.players,
            self.transitions,
            self.mode,
            self.delay_space,
            self.aggregator,
            self.deterministic,
            tuple(sorted(self._bases.items())),
            tuple(sorted(self._layers.items())),
            self.moduli,
        )

    def __eq__(self, other):
        if not isinstance(other, GameGraph):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self):
        return hash(self._identity())

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def is_delayed(self) -> bool:
        return self.mode is Mode.DELAYED

    def state_index(self, v: str) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise StructuralError(f"unknown state {v!r}")

    def base_state(self, v: str) -> str:
        return self._bases[v]

    def layer(self, v: str) -> Tuple[int, ...]:
        return self._layers[v]

    def lift_state(self, base: str, period: int) -> str:
        """Recover the state with base ``base`` visited at ``period``.

        Every step advances each layer index by one, so the index is a
        function of the period and the initial state's layer.
        """
        start = self._layers[self.initial]
        layer = tuple((j + period) % m for j, m in zip(start, self.moduli))
        try:
            return self._lifted[(base, layer)]
        except KeyError:
            raise StructuralError(f"no state with base {base!r} in layer {layer}")

    def action_profiles(self) -> Iterator[ActionProfile]:
        return itertools.product(*(p.actions for p in self.players))

    def outgoing(self, v: str, actions: ActionProfile) -> Tuple[Transition, ...]:
        return tuple(self._out.get((v, tuple(actions)), ()))

    def resolve(self, v: str, actions: ActionProfile, delays: Optional[DelayProfile] = None) -> Transition:
        """Return the unique transition for (v, a) (and the delay profile in delayed mode)."""
        outs = self.outgoing(v, actions)
        if self.is_delayed:
            if delays is None:
                raise PreconditionError("delayed graph needs a delay profile to resolve a transition")
            outs = tuple(tr for tr in outs if tr.delays == tuple(delays))
        if len(outs) != 1:
            raise ModelViolation(
                f"{len(outs)} transitions for state {v!r}, actions {tuple(actions)}"
                + (f", delays {tuple(delays)}" if delays is not None else "")
            )
        return outs[0]

    def basic_outcome(self, v: str, actions: ActionProfile) -> Transition:
        """The delay-free outcome (signals, target, payoffs) of (v, a)."""
        outs = self.outgoing(v, actions)
        if not outs:
            raise ModelViolation(f"no transition for state {v!r}, actions {tuple(actions)}")
        return outs[0].basic()

    def has_transition(self, tr: Transition) -> bool:
        return tr in self._out.get((tr.source, tr.actions), ())

    def derive(self, **changes) -> "GameGraph":
        """Copy of this graph with some constructor arguments replaced."""
        args = dict(
            states=self.states,
            initial=self.initial,
            players=self.players,
            transitions=self.transitions,
            mode=self.mode,
            delay_space=self.delay_space,
            aggregator=self.aggregator,
            deterministic=self.deterministic,
            name=self.name,
            bases=dict(self._bases),
            layers=dict(self._layers),
            moduli=self.moduli,
        )
        args.update(changes)
        return GameGraph(**args)

    def with_initial(self, v: str) -> "GameGraph":
        self.state_index(v)
        return self.derive(initial=v)


def check_structure(g: GameGraph) -> None:
    """Raise StructuralError on malformed graphs (unknown ids, wrong arity)."""
    from .payoff import get_aggregator

    n = g.n_players
    if n < 1:
        raise StructuralError("a game needs at least one player")
    if g.initial not in g._index:
        raise StructuralError(f"initial state {g.initial!r} is not a state")
    for p in g.players:
        if not p.actions:
            raise StructuralError(f"player {p.name!r} has no actions")
    get_aggregator(g.aggregator)
    if g.is_delayed:
        if g.delay_space is None or g.delay_space.n_players != n:
            raise StructuralError("delayed graph needs a delay space covering every player")
    for tr in g.transitions:
        where = f"transition {tr.source}->{tr.target} on {','.join(tr.actions)}"
        for v in (tr.source, tr.target):
            if v not in g._index:
                raise StructuralError(f"{where}: unknown state {v!r}")
        if len(tr.actions) != n or len(tr.signals) != n or len(tr.payoffs) != n:
            raise StructuralError(f"{where}: profiles must have one entry per player")
        for i, p in enumerate(g.players):
            if tr.actions[i] not in p.actions:
                raise StructuralError(f"{where}: unknown action {tr.actions[i]!r} for player {p.name}")
            if tr.signals[i] not in p.signals:
                raise StructuralError(f"{where}: unknown signal {tr.signals[i]!r} for player {p.name}")
            if not isinstance(tr.payoffs[i], int):
                raise StructuralError(f"{where}: payoffs must be integers")
        if g.is_delayed:
            if tr.delays is None or not g.delay_space.contains(tr.delays):
                raise StructuralError(f"{where}: delay profile {tr.delays} outside the delay space")
        elif tr.delays is not None:
            raise StructuralError(f"{where}: instant transitions carry no delays")


def validate(g: GameGraph) -> List[Violation]:
    """Return every violation of totality and of the delay assumptions.

    Malformed graphs raise StructuralError instead; semantic violations
    are collected so they can all be reported at once.
    """
    from .payoff import get_aggregator

    check_structure(g)
    violations: List[Violation] = []
    profiles = list(g.delay_space.profiles()) if g.is_delayed else []
    for v in g.states:
        for a in g.action_profiles():
            where = f"state {v}, actions ({','.join(a)})"
            outs = g.outgoing(v, a)
            if not outs:
                violations.append(Violation("missing-transition", "no outgoing transition", where))
                continue
            if g.is_delayed:
                outcomes = {(tr.signals, tr.target, tr.payoffs) for tr in outs}
                if len(outcomes) > 1:
                    violations.append(
                        Violation(
                            "delay-dependent",
                            f"signals, target or payoffs depend on the delays ({len(outcomes)} outcomes)",
                            where,
                        )
                    )
                    continue
                present = {tr.delays for tr in outs}
                missing = [d for d in profiles if d not in present]
                if missing:
                    violations.append(
                        Violation(
                            "missing-delay-variant",
                            f"{len(missing)} delay profiles without a transition, first {missing[0]}",
                            where,
                        )
                    )
            elif g.deterministic and len(outs) > 1:
                violations.append(
                    Violation("nondeterministic", f"{len(outs)} transitions, expected exactly one", where)
                )
    if get_aggregator(g.aggregator).non_negative:
        for tr in g.transitions:
            if min(tr.payoffs) < 0:
                violations.append(
                    Violation(
                        "negative-priority",
                        f"{g.aggregator} needs non-negative stage payoffs, got {tr.payoffs}",
                        f"transition {tr.source}->{tr.target} on ({','.join(tr.actions)})",
                    )
                )
    return violations


def project_to_instant(g: GameGraph) -> GameGraph:
    """Drop the delay component of every signal and merge duplicate edges."""
    if not g.is_delayed:
        raise PreconditionError("projection needs a delayed-monitoring graph")
    violations = validate(g)
    dependent = [v for v in violations if v.kind == "delay-dependent"]
    if dependent:
        logger.error(f"Refusing projection: {len(dependent)} delay-dependent outcomes")
        raise ModelViolation(f"projection is ill-defined: {dependent[0]}")
    if violations:
        raise PreconditionError(f"graph does not validate: {violations[0]}")
    return g.derive(
        transitions={tr.basic() for tr in g.transitions},
        mode=Mode.INSTANT,
        delay_space=None,
        deterministic=True,
    )


def lift_to_delayed(g: GameGraph, d: DelaySpace) -> GameGraph:
    """Replicate every instant transition once per delay profile of ``d``."""
    if g.is_delayed:
        raise PreconditionError("lifting needs an instant-monitoring graph")
    if d.n_players != g.n_players:
        raise StructuralError(f"delay space has {d.n_players} players, game has {g.n_players}")
    violations = validate(g)
    if violations:
        raise PreconditionError(f"graph does not validate: {violations[0]}")
    for v in g.states:
        for a in g.action_profiles():
            if len(g.outgoing(v, a)) != 1:
                raise ModelViolation(
                    f"state {v}, actions ({','.join(a)}) has several transitions; "
                    "delayed monitoring requires a unique outcome per (state, actions)"
                )
    profiles = list(d.profiles())
    lifted = [replace(tr, delays=prof) for tr in g.transitions for prof in profiles]
    logger.debug(f"Lifted {len(g.transitions)} transitions to {len(lifted)} with delays {d.describe()}")
    return g.derive(transitions=lifted, mode=Mode.DELAYED, delay_space=d, deterministic=True)


def state_digraph(g: GameGraph) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(g.states)
    graph.add_edges_from((tr.source, tr.target) for tr in g.transitions)
    return graph


def shortest_cycle(g: GameGraph) -> Optional[List[str]]:
    """A shortest directed cycle of the state graph, or None if acyclic."""
    graph = state_digraph(g)
    for v in g.states:
        if graph.has_edge(v, v):
            return [v]
    distances = dict(nx.all_pairs_shortest_path_length(graph))
    best = None
    for u, v in sorted(graph.edges()):
        back = distances[v].get(u)
        if back is not None and (best is None or back + 1 < best[0]):
            best = (back + 1, u, v)
    if best is None:
        return None
    _, u, v = best
    return [u] + nx.shortest_path(graph, v, u)[:-1]


def min_cycle_length(g: GameGraph) -> Union[int, float]:
    """Length of the shortest directed cycle; ``math.inf`` for acyclic graphs."""
    cycle = shortest_cycle(g)
    return math.inf if cycle is None else len(cycle)


def unravel(g: GameGraph, modulus: int) -> GameGraph:
    """Product of ``g`` with the cyclic group of order ``modulus``.

    State v_j is named ``f"{v}_{j}"``; every edge v -> v' becomes
    v_j -> v'_{j+1 mod M}. The index j stays hidden from the players:
    observation layers see ``base_state`` only.
    """
    if modulus < 1:
        raise PreconditionError(f"unravelling modulus must be positive, got {modulus}")
    if modulus == 1:
        return g

    def name(v: str, j: int) -> str:
        return f"{v}_{j}"

    states = [name(v, j) for v in g.states for j in range(modulus)]
    bases = {name(v, j): g.base_state(v) for v in g.states for j in range(modulus)}
    layers = {name(v, j): g.layer(v) + (j,) for v in g.states for j in range(modulus)}
    transitions = [
        replace(tr, source=name(tr.source, j), target=name(tr.target, (j + 1) % modulus))
        for tr in g.transitions
        for j in range(modulus)
    ]
    logger.info(f"Unravelled {len(g.states)} states with modulus {modulus} into {len(states)}")
    return g.derive(
        states=states,
        initial=name(g.initial, 0),
        transitions=transitions,
        bases=bases,
        layers=layers,
        moduli=g.moduli + (modulus,),
    )


def trace_actions(
    g: GameGraph,
    feed: Iterable[ActionProfile],
    delays: Optional[Iterable[DelayProfile]] = None,
) -> List[Tuple[str, Tuple[str, ...], Tuple[int, ...]]]:
    """Observable outcome (base state, basic signals, payoffs) of an action feed."""
    delay_iter = iter(delays) if delays is not None else None
    default = next(g.delay_space.profiles()) if g.is_delayed else None
    v = g.initial
    out = []
    for a in feed:
        d = next(delay_iter) if delay_iter is not None else default
        tr = g.resolve(v, tuple(a), d if g.is_delayed else None)
        out.append((g.base_state(tr.target), tr.signals, tr.payoffs))
        v = tr.target
    return out


@dataclass
class History:
    """A finite prefix v0, a1, y1, v1, ..., at, yt, vt of a play.

    Stored as the initial state plus the list of transitions taken; the
    list only grows while a simulation owns the history.
    """

    graph: GameGraph
    initial: str
    steps: List[Transition] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> List[str]:
        return [self.initial] + [tr.target for tr in self.steps]

    @property
    def final_state(self) -> str:
        return self.steps[-1].target if self.steps else self.initial

    def append(self, tr: Transition) -> None:
        if tr.source != self.final_state:
            raise StructuralError(
                f"transition from {tr.source!r} cannot extend a history ending at {self.final_state!r}"
            )
        self.steps.append(tr)

    def prefix(self, length: int) -> "History":
        return History(self.graph, self.initial, list(self.steps[:length]))

    def payoffs(self, i: int) -> List[int]:
        return [tr.payoffs[i] for tr in self.steps]

    def check(self) -> None:
        """Raise StructuralError unless every step is a transition of the graph."""
        v = self.initial
        for r, tr in enumerate(self.steps, start=1):
            if tr.source != v or not self.graph.has_transition(tr):
                raise StructuralError(f"step {r} is not a transition of the graph")
            v = tr.target

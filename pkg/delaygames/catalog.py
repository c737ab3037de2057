"""Reference games and random generators.

``match_game`` is the two-state desk example used throughout the tests and
the fixture corpus: both players are paid 1 whenever their actions agree,
and each one's signal is the other's action.
"""

import logging
import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .game import GameGraph, PlayerSpec, Transition
from .strategy import FiniteStateStrategy, StrategyProfile, constant_profile

logger = logging.getLogger(__name__)


def match_game(aggregator: str = "mean-payoff") -> GameGraph:
    actions = ("a", "b")
    players = (PlayerSpec("p1", actions, actions), PlayerSpec("p2", actions, actions))
    transitions = []
    for v in ("P", "Q"):
        for a1 in actions:
            for a2 in actions:
                target = "Q" if a1 == a2 else "P"
                pay = 1 if target == "Q" else 0
                transitions.append(Transition(v, (a1, a2), (a2, a1), target, (pay, pay)))
    return GameGraph(("P", "Q"), "P", players, transitions, aggregator=aggregator, name="match")


def match_profile(a1: str = "a", a2: str = "a") -> StrategyProfile:
    return constant_profile((a1, a2))


def grim_trigger_profile() -> StrategyProfile:
    """Both players cooperate on a until they receive a b signal, then play b forever."""
    grim = FiniteStateStrategy.grim_trigger(cooperate="a", punish="b", trigger="b")
    return StrategyProfile((grim, grim))


def _names(prefix: str, count: int) -> Tuple[str, ...]:
    return tuple(f"{prefix}{k}" for k in range(count))


def random_graph(
    rng: random.Random,
    n_states: int = 3,
    n_players: int = 2,
    n_actions: int = 2,
    payoff_range: Tuple[int, int] = (0, 3),
    aggregator: str = "mean-payoff",
) -> GameGraph:
    """A total deterministic instant game with uniformly random targets and payoffs.

    Player i's signal is the action of player i+1 (cyclically), so a
    deviation is always noticed by somebody.
    """
    states = _names("s", n_states)
    actions = tuple("abcdefgh"[:n_actions])
    players = tuple(PlayerSpec(f"p{i + 1}", actions, actions) for i in range(n_players))
    transitions = []
    g = GameGraph(states, states[0], players, (), aggregator=aggregator)
    for v in states:
        for a in g.action_profiles():
            signals = tuple(a[(i + 1) % n_players] for i in range(n_players))
            payoffs = tuple(rng.randint(*payoff_range) for _ in range(n_players))
            transitions.append(Transition(v, a, signals, rng.choice(states), payoffs))
    return g.derive(transitions=transitions)


@dataclass
class SuiteCase:
    game: GameGraph
    profile: StrategyProfile
    seed: int


def random_game(
    rng: random.Random,
    min_states: int = 2,
    max_states: int = 4,
    attempts: int = 50,
    horizon: int = 200,
    payoff_range: Tuple[int, int] = (0, 1),
) -> Optional[Tuple[GameGraph, StrategyProfile]]:
    """A random two-player game with payoffs in ``payoff_range`` together with a memoryless ergodic equilibrium.

    Draws up to ``attempts`` graphs and returns the first one for which
    ``find_ergodic_equilibrium`` succeeds, or None.
    """
    from .analysis import find_ergodic_equilibrium

    for _ in range(attempts):
        g = random_graph(rng, n_states=rng.randint(min_states, max_states), payoff_range=payoff_range)
        profile = find_ergodic_equilibrium(g, horizon=horizon)
        if profile is not None:
            return g, profile
    return None


def generate_suite(seed: int, count: int, min_states: int = 2, max_states: int = 4) -> List[SuiteCase]:
    """``count`` games with pre-verified memoryless ergodic equilibria, reproducible from ``seed``."""
    cases = []
    k = 0
    while len(cases) < count:
        case_seed = seed * 100003 + k
        k += 1
        found = random_game(random.Random(case_seed), min_states, max_states)
        if found is None:
            logger.debug(f"Seed {case_seed}: no ergodic equilibrium found, skipped")
            continue
        g, profile = found
        cases.append(SuiteCase(g.derive(name=f"random-{case_seed}"), profile, case_seed))
    logger.info(f"Generated {len(cases)} games from seed {seed} in {k} draws")
    return cases


def suite_delays(case_index: int) -> Sequence[int]:
    """Delay set for the n-th suite case, cycling the maximal delay through 1, 2 and 3."""
    return tuple(range(case_index % 3 + 2))

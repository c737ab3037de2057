"""Unravelling on random graphs, the aggregator laws at scale, and the check command on the match fixture."""

import logging
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from delaygames.catalog import random_graph
from delaygames.cli import EXIT_DEVIATION, EXIT_OK, main as cli_main
from delaygames.game import min_cycle_length, trace_actions, unravel
from delaygames.payoff import BUILTIN_AGGREGATORS, law_violations

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("verify")

FIXTURES = ROOT / "docs" / "fixtures"


def check_unravelling(graphs: int = 100, steps: int = 200) -> int:
    failures = 0
    rng = random.Random(0)
    for k in range(graphs):
        g = random_graph(rng, n_states=rng.randint(2, 4))
        feed = [tuple(rng.choice(p.actions) for p in g.players) for _ in range(steps)]
        for m in (2, 3, 4):
            u = unravel(g, m)
            layered = all(u.layer(tr.target)[-1] == (u.layer(tr.source)[-1] + 1) % m for tr in u.transitions)
            if not layered or min_cycle_length(u) % m != 0:
                logger.error(f"Graph {k}, M={m}: a cycle is not a multiple of M")
                failures += 1
            if trace_actions(u, feed) != trace_actions(g, feed):
                logger.error(f"Graph {k}, M={m}: projected traces differ")
                failures += 1
    return failures


def main():
    # 1. Unravelling
    logger.info("Checking unravelling on 100 random graphs...")
    failures = check_unravelling()

    # 2. Aggregator laws
    for name in BUILTIN_AGGREGATORS:
        logger.info(f"Checking laws of {name}...")
        violations = law_violations(name, samples=10_000, seed=1)
        for v in violations[:5]:
            logger.error(f"{name}: {v}")
        failures += len(violations)

    # 3. Equilibrium check on the match fixture
    game = str(FIXTURES / "match.json")
    cases = [("match_profile_aa.json", EXIT_OK), ("match_profile_ab.json", EXIT_DEVIATION)]
    for profile, expected in cases:
        code = cli_main(["check", game, "--profile", str(FIXTURES / profile)])
        if code != expected:
            logger.error(f"check {profile}: exit {code}, expected {expected}")
            failures += 1

    if failures:
        logger.error(f"{failures} failure(s)")
        sys.exit(1)
    logger.info("All structural checks passed.")


if __name__ == "__main__":
    main()

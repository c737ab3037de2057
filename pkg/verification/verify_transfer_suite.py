"""Full-scale transfer suite: generated games, every delay bound, the whole scheduler battery.

Usage: python verification/verify_transfer_suite.py [count] [seed]
"""

import logging
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from delaygames.analysis import TransferConfig, simulate, transfer
from delaygames.catalog import generate_suite, suite_delays
from delaygames.game import DelaySpace, lift_to_delayed
from delaygames.nature import FixedScheduler

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logging.getLogger("delaygames").setLevel(logging.WARNING)
logger = logging.getLogger("verify")


def zero_delay_matches(case) -> bool:
    g = case.game
    zero = DelaySpace.uniform(g.n_players, [0])
    lifted = lift_to_delayed(g, zero)
    instant = simulate(g, case.profile, None, 200, min_periods=200)
    delayed = simulate(lifted, case.profile, FixedScheduler(zero, 0), 200, min_periods=200)
    return instant.observed_histories == delayed.observed_histories and instant.payoffs == delayed.payoffs


def main():
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    # 64 heads: T=3 for delays {0,1}, T=1 for the larger delay sets
    config = TransferConfig(horizon=1000, exhaustive_horizon=6, scheduler_budget=64, random_schedulers=20)
    started = time.monotonic()

    # 1. Suite
    logger.info(f"Generating {count} games from seed {seed}...")
    cases = generate_suite(seed, count)

    # 2. Transfer every case
    problems = []
    runs = 0
    for k, case in enumerate(cases):
        d = DelaySpace.uniform(case.game.n_players, suite_delays(k))
        report = transfer(case.game, case.profile, d, config=config).report
        runs += report.runs
        checks = {
            "payoffs equal": all(e is True for e in report.equal),
            "assertions": report.assertion_safe,
            "shuffle": report.shuffle_ok is True,
            "equivalence": report.equivalence_ok is True,
            "submixing": report.submixing_ok is not False,
            "zero delay": zero_delay_matches(case),
        }
        failed = [name for name, ok in checks.items() if not ok]
        if failed:
            problems.append((case.game.name, d.describe(), failed))
            logger.error(f"{case.game.name} with delays {d.describe()}: failed {', '.join(failed)}")
            for failure in report.failures:
                logger.error(f"  {failure}")
        else:
            logger.info(f"[{k + 1}/{len(cases)}] {case.game.name}: {report.verdict} over {report.runs} runs")

    elapsed = time.monotonic() - started
    logger.info(f"{len(cases)} games, {runs} runs in {elapsed:.1f}s")
    if elapsed > 300:
        logger.error(f"Suite took {elapsed:.0f}s, over the five minute target")
    if problems:
        logger.error(f"{len(problems)} game(s) failed")
        sys.exit(1)
    logger.info("All transfer checks passed.")


if __name__ == "__main__":
    main()

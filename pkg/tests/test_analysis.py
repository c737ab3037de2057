"""Tests for simulation, lasso detection, the delay-transfer pipeline and equilibrium checks."""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from delaygames.analysis import (  # noqa: E402
    DEVIATION_FOUND,
    NO_DEVIATION,
    EquilibriumConfig,
    TransferConfig,
    check_equilibrium,
    check_ergodic,
    detect_lasso,
    find_ergodic_equilibrium,
    memoryless_profiles,
    payoff_of_profile,
    simulate,
    transfer,
)
from delaygames.catalog import generate_suite, grim_trigger_profile, match_game, match_profile, suite_delays  # noqa: E402
from delaygames.errors import CycleTooShort, PreconditionError, StrategyUndefined  # noqa: E402
from delaygames.game import DelaySpace, lift_to_delayed  # noqa: E402
from delaygames.nature import FixedScheduler, RoundRobinScheduler, SeededScheduler  # noqa: E402
from delaygames.strategy import FiniteStateStrategy, FunctionStrategy, StrategyProfile  # noqa: E402

D01 = DelaySpace.uniform(2, [0, 1])


def _small_config(**overrides):
    config = TransferConfig(horizon=200, exhaustive_horizon=2, scheduler_budget=16, random_schedulers=2, random_period=4)
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


class TestLassoDetection:
    def test_first_repeat(self):
        assert detect_lasso(["x", "y", "z", "y"]) == (1, 2)

    def test_no_repeat(self):
        assert detect_lasso(["x", "y", "z"]) is None

    def test_unknown_fingerprint_disables_detection(self):
        assert detect_lasso(["x", None, "x", "x"]) is None


class TestSimulate:
    def test_cooperation_is_exact(self):
        result = simulate(match_game(), match_profile("a", "a"), horizon=50)
        assert result.exact
        assert [str(p) for p in result.payoffs] == ["1/1 exact", "1/1 exact"]
        assert result.play.states[:3] == ["P", "Q", "Q"]

    def test_miscoordination_pays_nothing(self):
        result = simulate(match_game(), match_profile("b", "a"), horizon=50)
        assert [p.value for p in result.payoffs] == [0, 0]
        assert result.exact

    def test_horizon_must_be_positive(self):
        with pytest.raises(PreconditionError):
            simulate(match_game(), match_profile(), horizon=0)

    def test_delayed_game_needs_a_scheduler(self):
        with pytest.raises(PreconditionError):
            simulate(lift_to_delayed(match_game(), D01), match_profile(), horizon=10)

    def test_zero_delays_match_instant_play(self):
        zero = lift_to_delayed(match_game(), DelaySpace.uniform(2, [0]))
        instant = simulate(match_game(), grim_trigger_profile(), horizon=20, min_periods=20)
        delayed = simulate(zero, grim_trigger_profile(), FixedScheduler(zero.delay_space, 0), horizon=20, min_periods=20)
        assert [tr.actions for tr in delayed.play.steps] == [tr.actions for tr in instant.play.steps]
        assert delayed.payoffs == instant.payoffs
        assert delayed.observed_histories == instant.observed_histories

    def test_action_outside_the_alphabet(self):
        rogue = FunctionStrategy(lambda oh: "c", name="rogue")
        profile = StrategyProfile((rogue, match_profile()[1]))
        with pytest.raises(StrategyUndefined):
            simulate(match_game(), profile, horizon=5, check=False)

    def test_opaque_strategy_stays_approximate(self):
        alternate = FunctionStrategy(lambda oh: "a" if len(oh) % 2 == 0 else "b", name="alternate")
        profile = StrategyProfile((alternate, alternate))
        result = simulate(match_game(), profile, horizon=40)
        assert result.lasso is None
        assert len(result) == 40
        assert result.payoffs[0].value == 1
        assert not result.payoffs[0].exact

    def test_listener_sees_every_period(self):
        seen = []
        g = lift_to_delayed(match_game(), D01)
        simulate(g, match_profile(), RoundRobinScheduler(D01), horizon=6, min_periods=6, listener=seen.append)
        assert [r.t for r in seen] == [1, 2, 3, 4, 5, 6]
        assert seen[0].delays == (0, 0)
        assert seen[1].delays == (1, 1)
        assert seen[1].delivered == [[], []]
        assert seen[2].delivered == [["a@2", "a@3"], ["a@2", "a@3"]]

    def test_identical_inputs_give_identical_results(self):
        g = lift_to_delayed(match_game(), D01)
        a = simulate(g, grim_trigger_profile(), SeededScheduler(D01, 42), horizon=100, min_periods=100)
        b = simulate(g, grim_trigger_profile(), SeededScheduler(D01, 42), horizon=100, min_periods=100)
        assert a.play.steps == b.play.steps
        assert a.stage_payoffs == b.stage_payoffs
        assert a.deliveries == b.deliveries
        assert a.lasso == b.lasso
        assert a.payoffs == b.payoffs
        assert [r.to_dict() for r in a.records()] == [r.to_dict() for r in b.records()]

    def test_to_dict(self):
        d = simulate(match_game(), match_profile(), horizon=10).to_dict()
        assert d["payoffs"] == ["1/1 exact", "1/1 exact"]
        assert d["scheduler"] is None


class TestPayoffOfProfile:
    def test_instant(self):
        combined = payoff_of_profile(match_game(), match_profile(), horizon=50)
        assert combined.runs == 1
        assert [v.value for v in combined.values] == [1, 1]

    def test_delayed_is_uniform_over_nature(self):
        g = lift_to_delayed(match_game(), D01)
        combined = payoff_of_profile(g, grim_trigger_profile(), scheduler_budget=16, horizon=100, exhaustive_horizon=2)
        assert combined.runs == 16
        assert combined.uniform
        assert all(v.exact and v.value == 1 for v in combined.values)

    def test_explicit_schedulers(self):
        g = lift_to_delayed(match_game(), D01)
        combined = payoff_of_profile(g, match_profile("a", "b"), schedulers=[SeededScheduler(D01, 1)], horizon=40)
        assert combined.runs == 1
        assert combined.worst == ["seed:1", "seed:1"]


class TestErgodicity:
    def test_cooperation_is_ergodic(self):
        report = check_ergodic(match_game(), match_profile(), horizon=50)
        assert report.ergodic
        assert report.exact
        assert set(report.table) == {"P", "Q"}

    def test_state_dependent_payoff_is_not_ergodic(self):
        # from P the players never meet; from Q they stay there
        s = FiniteStateStrategy.memoryless({"P": "a", "Q": "a"})
        t = FiniteStateStrategy.memoryless({"P": "b", "Q": "a"})
        report = check_ergodic(match_game(), StrategyProfile((s, t)), horizon=50)
        assert not report.ergodic
        assert report.table["P"][0].value == 0
        assert report.table["Q"][0].value == 1

    def test_delayed_games_are_refused(self):
        with pytest.raises(PreconditionError):
            check_ergodic(lift_to_delayed(match_game(), D01), match_profile())


class TestTransfer:
    def test_match_with_unit_delays(self):
        outcome = transfer(match_game(), match_profile(), D01, config=_small_config())
        report = outcome.report
        assert report.modulus == 2
        assert report.runs == 18
        assert report.equal == [True, True]
        assert report.assertion_safe
        assert report.shuffle_ok is True
        assert report.equivalence_ok is True
        assert report.submixing_ok is True
        assert report.ergodic
        assert report.verdict == "ok"
        assert [str(p) for p in report.delayed_payoffs] == ["1/1 exact", "1/1 exact"]
        assert len(outcome.game.states) == 4
        assert outcome.game.is_delayed

    def test_grim_trigger_survives_delays(self):
        report = transfer(match_game(), grim_trigger_profile(), D01, config=_small_config()).report
        assert report.verdict == "ok"
        assert [p.value for p in report.delayed_payoffs] == [1, 1]

    def test_zero_delay_skips_unravelling(self):
        report = transfer(match_game(), match_profile(), DelaySpace.uniform(2, [0]), config=_small_config()).report
        assert report.modulus == 1
        assert report.verdict == "ok"

    def test_explicit_modulus_one_is_refused(self):
        with pytest.raises(CycleTooShort):
            transfer(match_game(), match_profile(), D01, modulus=1, config=_small_config())

    def test_delayed_input_is_refused(self):
        with pytest.raises(PreconditionError):
            transfer(lift_to_delayed(match_game(), D01), match_profile(), D01, config=_small_config())

    def test_compact_only(self):
        report = transfer(match_game(), match_profile(), D01, config=_small_config(check_equivalence=False)).report
        assert report.equivalence_ok is None
        assert report.verdict == "ok"

    def test_parallel_runs_agree(self):
        serial = transfer(match_game(), grim_trigger_profile(), D01, config=_small_config()).report
        parallel = transfer(match_game(), grim_trigger_profile(), D01, config=_small_config(jobs=4)).report
        assert serial.to_dict() == parallel.to_dict()

    def test_listener_sees_one_run(self):
        records = []
        outcome = transfer(match_game(), grim_trigger_profile(), D01, config=_small_config(), listener=records.append)
        assert outcome.report.verdict == "ok"
        periods = outcome.runs[0].periods
        assert len(records) == 2 * periods
        for player in (1, 2):
            mine = [r for r in records if r.player == player]
            assert [r.t for r in mine] == list(range(1, periods + 1))
            assert all(r.h not in r.pending for r in mine)
            assert all(r.action == "a" for r in mine)

    def test_traced_run_is_chosen_by_index(self):
        first, last = [], []
        head = transfer(match_game(), match_profile(), D01, config=_small_config(), listener=first.append)
        outcome = transfer(
            match_game(), match_profile(), D01, config=_small_config(), listener=last.append, traced_run=17
        )
        assert len(first) == 2 * head.runs[0].periods
        assert len(last) == 2 * outcome.runs[17].periods

    def test_traced_run_outside_the_battery(self):
        with pytest.raises(PreconditionError):
            transfer(match_game(), match_profile(), D01, config=_small_config(), listener=print, traced_run=18)

    def test_suite_payoffs_are_zero_or_one(self):
        for case in generate_suite(seed=3, count=2):
            assert {p for tr in case.game.transitions for p in tr.payoffs} <= {0, 1}

    def test_random_suite(self):
        for k, case in enumerate(generate_suite(seed=3, count=2)):
            d = DelaySpace.uniform(case.game.n_players, suite_delays(k))
            report = transfer(case.game, case.profile, d, config=_small_config()).report
            assert report.verdict == "ok", report.to_dict()


class TestEquilibrium:
    def setup_method(self):
        self.config = EquilibriumConfig(horizon=60, search_depth=2)

    def test_cooperation_has_no_profitable_deviation(self):
        report = check_equilibrium(match_game(), match_profile(), self.config)
        assert report.verdict == NO_DEVIATION
        assert report.evaluated == 2 * (4 + 2 + 4)
        assert not report.budget_exceeded

    def test_miscoordination_is_exploitable(self):
        report = check_equilibrium(match_game(), match_profile("a", "b"), self.config)
        assert report.verdict == DEVIATION_FOUND
        dev = report.deviations[0]
        assert dev.verified
        assert dev.payoff.value == 1
        assert dev.baseline.value == 0
        assert report.to_dict()["deviations"][0]["player"] == 1

    def test_budget_is_reported(self):
        config = EquilibriumConfig(horizon=60, search_depth=3, max_deviators=5)
        report = check_equilibrium(match_game(), match_profile(), config)
        assert report.budget_exceeded
        assert report.verdict == NO_DEVIATION

    def test_delayed_cooperation(self):
        g = lift_to_delayed(match_game(), D01)
        report = check_equilibrium(g, match_profile(), EquilibriumConfig(horizon=60, search_depth=1))
        assert report.verdict == NO_DEVIATION
        assert report.baseline[0].value == Fraction(1)

    def test_memory_bound(self):
        with pytest.raises(PreconditionError):
            check_equilibrium(match_game(), match_profile(), EquilibriumConfig(deviator_memory=0))


class TestErgodicSearch:
    def test_memoryless_profiles(self):
        assert len(list(memoryless_profiles(match_game()))) == 16

    def test_finds_cooperation(self):
        found = find_ergodic_equilibrium(match_game(), horizon=50)
        assert found is not None
        report = check_ergodic(match_game(), found, horizon=50)
        assert report.ergodic

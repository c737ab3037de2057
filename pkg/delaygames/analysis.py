"""Simulation, lasso detection, the delay-transfer pipeline and bounded
equilibrium checking.

``simulate`` owns the period loop: it queries every strategy cursor, lets
Nature pick delays, moves the play and delivers due signals. When every
cursor, the scheduler and the in-flight queues have finite fingerprints,
the first repeated configuration closes a lasso and payoffs become exact.
"""

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    BudgetExceeded,
    FrankensteinAssertion,
    ModelViolation,
    PreconditionError,
    StrategyUndefined,
    StructuralError,
    VariantDivergence,
)
from .frankenstein import (
    PENDING,
    FrankensteinCursor,
    FrankensteinState,
    FrankensteinStrategy,
    ThreadRecord,
    full_state,
)
from .game import DelaySpace, GameGraph, History, lift_to_delayed, min_cycle_length, unravel, validate
from .monitoring import DeliveryQueue, ObservationSet, ObservedHistory, SignalRecord, observed_history
from .nature import DelayScheduler, scheduler_battery
from .payoff import LassoSequence, PayoffValue, aggregate_prefix, get_aggregator, utility_of_play
from .strategy import FiniteStateStrategy, StrategyCursor, StrategyProfile, deviators

logger = logging.getLogger(__name__)

NO_DEVIATION = "no-profitable-deviation-found"
DEVIATION_FOUND = "deviation-found"


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise StructuralError(f"{name} must be an integer, got {value!r}")


@dataclass
class TransferConfig:
    horizon: int = 1000
    exhaustive_horizon: int = 6
    scheduler_budget: int = 256
    random_schedulers: int = 20
    random_period: int = 16
    seed: int = 0
    jobs: int = 1
    check_equivalence: bool = True
    # keep simulating after a lasso closes, so recurrence has a window to look at
    min_periods: int = 32

    @classmethod
    def from_env(cls, **overrides) -> "TransferConfig":
        config = cls(
            jobs=_env_int("DELAYGAMES_JOBS", 1),
            scheduler_budget=_env_int("DELAYGAMES_SCHEDULER_BUDGET", 256),
        )
        for key, value in overrides.items():
            if value is not None:
                setattr(config, key, value)
        return config


@dataclass
class EquilibriumConfig:
    deviator_memory: int = 1
    horizon: int = 200
    scheduler_budget: int = 16
    max_deviators: int = 5000
    search_depth: int = 3
    random_period: int = 16
    seed: int = 0


class LassoDetector:
    """Remembers configuration fingerprints; the first repeat closes a lasso."""

    def __init__(self):
        self._seen: Dict[Hashable, int] = {}
        self.enabled = True

    def observe(self, t: int, fingerprint: Optional[Hashable]) -> Optional[Tuple[int, int]]:
        if not self.enabled:
            return None
        if fingerprint is None:
            self.enabled = False
            self._seen.clear()
            return None
        first = self._seen.get(fingerprint)
        if first is not None:
            return first, t - first
        self._seen[fingerprint] = t
        return None


def detect_lasso(configurations: Iterable[Optional[Hashable]]) -> Optional[Tuple[int, int]]:
    """(first occurrence, distance) of the first repeated configuration."""
    detector = LassoDetector()
    for t, fp in enumerate(configurations):
        found = detector.observe(t, fp)
        if found is not None:
            return found
    return None


@dataclass
class PeriodRecord:
    t: int
    state: str
    actions: Tuple[str, ...]
    signals: Tuple[str, ...]
    delays: Optional[Tuple[int, ...]]
    delivered: List[List[str]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "state": self.state,
            "actions": list(self.actions),
            "signals": list(self.signals),
            "delays": list(self.delays) if self.delays is not None else None,
            "delivered": self.delivered,
        }


@dataclass
class SimulationResult:
    play: History
    stage_payoffs: List[List[int]]
    lasso: Optional[Tuple[int, int]]
    payoffs: List[PayoffValue]
    deliveries: List[List[ObservationSet]]
    cursors: List[StrategyCursor] = field(repr=False)
    scheduler: Optional[str] = None

    def __len__(self) -> int:
        return len(self.play)

    @property
    def exact(self) -> bool:
        return self.lasso is not None

    def observed(self, i: int) -> ObservedHistory:
        return observed_history(self.play, i)

    @property
    def observed_histories(self) -> List[ObservedHistory]:
        return [self.observed(i) for i in range(self.play.graph.n_players)]

    def records(self) -> List[PeriodRecord]:
        g = self.play.graph
        return [
            PeriodRecord(
                t,
                g.base_state(tr.target),
                tr.actions,
                tr.signals,
                tr.delays,
                [[str(rec) for rec in z] for z in self.deliveries[t - 1]],
            )
            for t, tr in enumerate(self.play.steps, start=1)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "periods": len(self.play),
            "scheduler": self.scheduler,
            "lasso": list(self.lasso) if self.lasso else None,
            "payoffs": [str(p) for p in self.payoffs],
        }


def _configuration(
    v: str,
    cursors: Sequence[StrategyCursor],
    sched: Optional[DelayScheduler],
    queues: Optional[Sequence[DeliveryQueue]],
    t: int,
) -> Optional[Hashable]:
    memories = []
    for c in cursors:
        fp = c.fingerprint()
        if fp is None:
            return None
        memories.append(fp)
    nature = sched.fingerprint(t + 1) if sched is not None else ()
    if nature is None:
        return None
    in_flight = tuple(q.fingerprint(t) for q in queues) if queues is not None else ()
    return (v, tuple(memories), nature, in_flight)


def simulate(
    g: GameGraph,
    profile: StrategyProfile,
    sched: Optional[DelayScheduler] = None,
    horizon: int = 100,
    min_periods: int = 0,
    check: bool = True,
    listener: Optional[Callable[[PeriodRecord], None]] = None,
) -> SimulationResult:
    """Play ``profile`` on ``g`` for up to ``horizon`` periods.

    Stops early once a lasso has closed and at least ``min_periods``
    periods were played.
    """
    if horizon < 1:
        raise PreconditionError(f"horizon must be at least 1, got {horizon}")
    if check:
        profile.check(g)
        violations = validate(g)
        if violations:
            raise PreconditionError(f"game does not validate: {violations[0]}")
    n = g.n_players
    queues: Optional[List[DeliveryQueue]] = None
    if g.is_delayed:
        if sched is None:
            raise PreconditionError("a delayed-monitoring game needs a delay scheduler")
        if sched.space.n_players != n:
            raise StructuralError(f"scheduler covers {sched.space.n_players} players, game has {n}")
        queues = [DeliveryQueue() for _ in range(n)]
    else:
        sched = None

    v = g.initial
    cursors = [s.cursor(g.base_state(v)) for s in profile]
    history = History(g, v)
    deliveries: List[List[ObservationSet]] = []
    detector = LassoDetector()
    lasso = None
    for t in range(horizon + 1):
        if lasso is None:
            lasso = detector.observe(t, _configuration(v, cursors, sched, queues, t))
            if lasso is not None:
                logger.debug(f"Lasso closed at period {t}: prefix {lasso[0]}, cycle {lasso[1]}")
        if t == horizon or (lasso is not None and t >= min_periods):
            break
        actions = tuple(c.next_action() for c in cursors)
        for i, a in enumerate(actions):
            if a not in g.players[i].actions:
                raise StrategyUndefined(f"player {i + 1} chose {a!r}, not one of {list(g.players[i].actions)}")
        if queues is not None:
            emitted = g.basic_outcome(v, actions).signals
            tr = g.resolve(v, actions, sched.next_delays(t + 1, emitted))
        else:
            outs = g.outgoing(v, actions)
            if not outs:
                raise ModelViolation(f"no transition for state {v!r}, actions {actions}")
            tr = outs[0]
        history.append(tr)
        observations = []
        for i in range(n):
            if queues is not None:
                queues[i].emit(t + 1, tr.signals[i], tr.delays[i])
                observations.append(queues[i].deliver(t + 1))
            else:
                observations.append(ObservationSet(t + 1, (SignalRecord(t + 1, tr.signals[i], 0),)))
        base = g.base_state(tr.target)
        for i, c in enumerate(cursors):
            c.advance(actions[i], observations[i], base)
        deliveries.append(observations)
        v = tr.target
        if listener is not None:
            listener(
                PeriodRecord(
                    t + 1, base, tr.actions, tr.signals, tr.delays,
                    [[str(rec) for rec in z] for z in observations],
                )
            )

    stage_payoffs = [history.payoffs(i) for i in range(n)]
    payoffs = []
    for i, s in enumerate(stage_payoffs):
        if lasso is not None:
            p, c = lasso
            payoffs.append(utility_of_play(g, LassoSequence(s[:p], s[p : p + c]), i))
        else:
            payoffs.append(utility_of_play(g, s, i))
    return SimulationResult(
        history,
        stage_payoffs,
        lasso,
        payoffs,
        deliveries,
        cursors,
        sched.describe() if sched is not None else None,
    )


def _worst(values: Sequence[PayoffValue]) -> Tuple[int, PayoffValue]:
    idx = min(range(len(values)), key=lambda k: (values[k].value, k))
    return idx, PayoffValue(values[idx].value, all(v.exact for v in values))


@dataclass
class ProfilePayoff:
    values: List[PayoffValue]
    runs: int
    uniform: bool
    worst: List[Optional[str]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "payoffs": [str(v) for v in self.values],
            "runs": self.runs,
            "uniform": self.uniform,
            "worst_schedulers": self.worst,
        }


def run_battery(
    g: GameGraph,
    profile: StrategyProfile,
    schedulers: Sequence[Optional[DelayScheduler]],
    horizon: int,
    jobs: int = 1,
    min_periods: int = 0,
) -> List[SimulationResult]:
    """Simulate once per scheduler; results come back in scheduler order."""

    def run(sched):
        return simulate(g, profile, sched, horizon, min_periods=min_periods, check=False)

    if jobs > 1 and len(schedulers) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, schedulers))
    return [run(sched) for sched in schedulers]


def combine_runs(results: Sequence[SimulationResult]) -> ProfilePayoff:
    """Worst case over Nature, per player, plus whether every run agreed."""
    n = len(results[0].payoffs)
    values, worst = [], []
    uniform = True
    for i in range(n):
        column = [r.payoffs[i] for r in results]
        idx, value = _worst(column)
        values.append(value)
        worst.append(results[idx].scheduler)
        if len({p.value for p in column}) > 1:
            uniform = False
    return ProfilePayoff(values, len(results), uniform, worst)


def payoff_of_profile(
    g: GameGraph,
    profile: StrategyProfile,
    scheduler_budget: int = 256,
    horizon: int = 1000,
    schedulers: Optional[Sequence[DelayScheduler]] = None,
    exhaustive_horizon: int = 6,
    random_schedulers: int = 0,
    random_period: int = 16,
    seed: int = 0,
    jobs: int = 1,
) -> ProfilePayoff:
    """u^i(s) as the minimum over the tested schedulers.

    Under the delay assumptions and without deviations every scheduler
    must produce the same payoffs; a disagreement is logged as a model
    violation and flagged through ``uniform``.
    """
    profile.check(g)
    violations = validate(g)
    if violations:
        raise PreconditionError(f"game does not validate: {violations[0]}")
    if not g.is_delayed:
        battery: Sequence[Optional[DelayScheduler]] = [None]
    elif schedulers is not None:
        battery = list(schedulers)
    else:
        battery = scheduler_battery(
            g.delay_space, exhaustive_horizon, scheduler_budget, random_schedulers, random_period, seed
        )
    combined = combine_runs(run_battery(g, profile, battery, horizon, jobs))
    if not combined.uniform:
        logger.warning(f"Model violation: payoffs depend on the scheduler across {combined.runs} runs")
    if not all(v.exact for v in combined.values):
        logger.warning("No lasso within the horizon; payoffs are approximate")
    return combined


@dataclass
class ErgodicityReport:
    table: Dict[str, List[PayoffValue]]
    ergodic: bool
    exact: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ergodic": self.ergodic,
            "exact": self.exact,
            "table": {v: [str(p) for p in ps] for v, ps in self.table.items()},
        }


def check_ergodic(g: GameGraph, profile: StrategyProfile, horizon: int = 1000) -> ErgodicityReport:
    """Simulate from every state; ergodic iff each player's payoff is the same everywhere."""
    if g.is_delayed:
        raise PreconditionError("ergodicity is checked on the instant-monitoring game")
    table = {v: simulate(g.with_initial(v), profile, None, horizon).payoffs for v in g.states}
    rows = list(table.values())
    ergodic = all(len({row[i].value for row in rows}) == 1 for i in range(g.n_players))
    exact = all(p.exact for row in rows for p in row)
    return ErgodicityReport(table, ergodic, exact)


def expected_view(result: SimulationResult, i: int) -> List[Tuple[str, Any, str]]:
    """Player ``i``'s play per emission period: (action, signal or PENDING, state)."""
    t = len(result.play)
    return [
        (tr.actions[i], tr.signals[i] if r + tr.delays[i] <= t else PENDING, tr.target)
        for r, tr in enumerate(result.play.steps, start=1)
    ]


def shuffle_holds(result: SimulationResult, i: int) -> Optional[bool]:
    """Whether the threads of player ``i`` reassemble the observed play exactly."""
    cursor = result.cursors[i]
    st = full_state(cursor.state) if isinstance(cursor, FrankensteinCursor) else None
    if st is None:
        return None
    rebuilt = [(step.action, step.signal, step.state) for step in st.reconstruct()]
    return rebuilt == expected_view(result, i)


def run_submixing_holds(result: SimulationResult, i: int) -> Optional[bool]:
    """Run payoff of player ``i`` against the payoffs of the recurrent threads.

    From the settling period on, the run is a shuffle of the recurrent
    threads, so the full-window statistic of that suffix must lie between
    theirs. For mean-payoff the whole prefix is also held to within
    2*l*max|p|/t of that range.
    """
    cursor = result.cursors[i]
    st = full_state(cursor.state) if isinstance(cursor, FrankensteinCursor) else None
    if st is None or st.period < 4:
        return None
    agg = get_aggregator(result.play.graph.aggregator)
    rec = st.recurrent_threads()
    t = st.period
    payoffs = result.stage_payoffs[i]
    suffix = range(rec.settle_period, t + 1)
    if not suffix:
        return None
    parts: Dict[Any, List[int]] = {}
    for r in suffix:
        parts.setdefault(st.log[r - 1], []).append(payoffs[r - 1])
    run_value = aggregate_prefix(agg, [payoffs[r - 1] for r in suffix], len(suffix), full_window=True)
    values = [aggregate_prefix(agg, part, len(part), full_window=True) for part in parts.values()]
    lo, hi = min(values), max(values)
    ok = lo <= run_value <= hi
    if agg.name == "mean-payoff":
        tolerance = Fraction(2 * rec.settle_period * max(abs(p) for p in payoffs), t)
        ok = ok and lo - tolerance <= aggregate_prefix(agg, payoffs, t) <= hi + tolerance
    if not ok:
        logger.warning(f"Player {i + 1}: run value {run_value} outside [{lo}, {hi}] of its recurrent threads")
    return ok


@dataclass
class RunOutcome:
    index: int
    scheduler: str
    payoffs: Optional[List[PayoffValue]] = None
    lasso: Optional[Tuple[int, int]] = None
    periods: int = 0
    failure: Optional[str] = None
    failure_code: Optional[str] = None
    shuffle_ok: Optional[bool] = None
    submixing_ok: Optional[bool] = None
    result: Optional[SimulationResult] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "scheduler": self.scheduler,
            "payoffs": [str(p) for p in self.payoffs] if self.payoffs else None,
            "lasso": list(self.lasso) if self.lasso else None,
            "periods": self.periods,
            "failure": self.failure,
            "shuffle_ok": self.shuffle_ok,
            "submixing_ok": self.submixing_ok,
        }


def _all_true(flags: Iterable[Optional[bool]]) -> Optional[bool]:
    flags = list(flags)
    if any(f is False for f in flags):
        return False
    if any(f is None for f in flags):
        return None
    return True


@dataclass
class TransferReport:
    instant_payoffs: List[PayoffValue]
    delayed_payoffs: List[Optional[PayoffValue]]
    modulus: int
    delays: str
    equal: List[Optional[bool]]
    assertion_safe: bool
    shuffle_ok: Optional[bool]
    equivalence_ok: Optional[bool]
    submixing_ok: Optional[bool]
    ergodic: bool
    runs: int
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            all(e is True for e in self.equal)
            and self.assertion_safe
            and self.shuffle_ok is not False
            and self.equivalence_ok is not False
            and self.submixing_ok is not False
            and not self.failures
        )

    @property
    def verdict(self) -> str:
        if self.ok:
            return "ok"
        if self.failures or any(e is False for e in self.equal) or False in (
            self.assertion_safe, self.shuffle_ok, self.equivalence_ok, self.submixing_ok
        ):
            return "failed"
        return "inconclusive"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "instant_payoffs": [str(p) for p in self.instant_payoffs],
            "delayed_payoffs": [str(p) if p is not None else None for p in self.delayed_payoffs],
            "equal": self.equal,
            "modulus": self.modulus,
            "delays": self.delays,
            "assertion_safe": self.assertion_safe,
            "shuffle_ok": self.shuffle_ok,
            "equivalence_ok": self.equivalence_ok,
            "submixing_ok": self.submixing_ok,
            "ergodic": self.ergodic,
            "runs": self.runs,
            "failures": self.failures,
        }


@dataclass
class TransferOutcome:
    game: GameGraph
    instant_game: GameGraph
    profile: StrategyProfile
    report: TransferReport
    runs: List[RunOutcome] = field(repr=False)


def _transfer_run(
    g: GameGraph, profile: StrategyProfile, sched: DelayScheduler, index: int, config: TransferConfig
) -> RunOutcome:
    outcome = RunOutcome(index, sched.describe())
    try:
        result = simulate(g, profile, sched, config.horizon, min_periods=config.min_periods, check=False)
    except (FrankensteinAssertion, VariantDivergence) as e:
        outcome.failure = str(e)
        outcome.failure_code = e.code
        logger.error(f"Run {index} ({sched.describe()}): {e}")
        return outcome
    n = g.n_players
    outcome.result = result
    outcome.payoffs = result.payoffs
    outcome.lasso = result.lasso
    outcome.periods = len(result)
    outcome.shuffle_ok = _all_true(shuffle_holds(result, i) for i in range(n))
    outcome.submixing_ok = _all_true(run_submixing_holds(result, i) for i in range(n))
    return outcome


def transfer(
    g: GameGraph,
    profile: StrategyProfile,
    d: DelaySpace,
    modulus: Optional[int] = None,
    config: Optional[TransferConfig] = None,
    listener: Optional[Callable[[ThreadRecord], None]] = None,
    traced_run: int = 0,
) -> TransferOutcome:
    """Carry an instant-monitoring profile over to ``d``-delayed monitoring and test the result.

    Unravels when some cycle is no longer than the largest delay (an
    explicit ``modulus`` always applies), lifts to delayed monitoring,
    wraps every strategy in the thread-scheduling procedure and plays the
    wrapped profile against the scheduler battery. A ``listener`` gets the
    per-period thread records of every player in battery run ``traced_run``.
    """
    config = config or TransferConfig()
    if g.is_delayed:
        raise PreconditionError("transfer starts from an instant-monitoring game")
    violations = validate(g)
    if violations:
        raise PreconditionError(f"game does not validate: {violations[0]}")
    profile.check(g)
    if d.n_players != g.n_players:
        raise StructuralError(f"delay space covers {d.n_players} players, game has {g.n_players}")

    m = d.max_delay
    if modulus is None:
        modulus = max(1, m + 1) if min_cycle_length(g) <= m else 1
    base = unravel(g, modulus)
    if modulus > 1:
        logger.info(f"Unravelled {g.name or 'game'} with modulus {modulus} for maximal delay {m}")
    delayed = lift_to_delayed(base, d)
    variant = "shadow" if config.check_equivalence else "compact"
    wrapped = StrategyProfile(
        tuple(FrankensteinStrategy(base, i, profile[i], d.delays(i), variant) for i in range(g.n_players))
    )

    instant = simulate(g, profile, None, config.horizon, check=False)
    ergodicity = check_ergodic(g, profile, config.horizon)
    if not ergodicity.ergodic:
        logger.warning("Input profile is not ergodic; equal payoffs are not guaranteed")

    battery = scheduler_battery(
        d,
        config.exhaustive_horizon,
        config.scheduler_budget,
        config.random_schedulers,
        config.random_period,
        config.seed,
    )
    if listener is not None and not 0 <= traced_run < len(battery):
        raise PreconditionError(f"traced run {traced_run} is outside the battery of {len(battery)} schedulers")
    traced = StrategyProfile(tuple(s.with_listener(listener) for s in wrapped)) if listener is not None else wrapped

    def profile_for(k: int) -> StrategyProfile:
        return traced if k == traced_run else wrapped

    logger.info(f"Running {len(battery)} schedulers over {d.describe()}")
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            runs = list(
                pool.map(lambda k: _transfer_run(delayed, profile_for(k), battery[k], k, config), range(len(battery)))
            )
    else:
        runs = [_transfer_run(delayed, profile_for(k), sched, k, config) for k, sched in enumerate(battery)]
    runs.sort(key=lambda o: o.index)

    finished = [o for o in runs if o.payoffs is not None]
    failures = [f"run {o.index} ({o.scheduler}): {o.failure}" for o in runs if o.failure]
    n = g.n_players
    delayed_payoffs: List[Optional[PayoffValue]] = []
    equal: List[Optional[bool]] = []
    for i in range(n):
        column = [o.payoffs[i] for o in finished]
        if not column:
            delayed_payoffs.append(None)
            equal.append(None)
            continue
        delayed_payoffs.append(_worst(column)[1])
        if instant.payoffs[i].exact and all(p.exact for p in column):
            equal.append(all(p.value == instant.payoffs[i].value for p in column))
        else:
            equal.append(None)

    report = TransferReport(
        instant_payoffs=instant.payoffs,
        delayed_payoffs=delayed_payoffs,
        modulus=modulus,
        delays=d.describe(),
        equal=equal,
        assertion_safe=not any(o.failure_code == "assertion" for o in runs),
        shuffle_ok=_all_true(o.shuffle_ok for o in finished),
        equivalence_ok=(
            not any(o.failure_code == "divergence" for o in runs) if config.check_equivalence else None
        ),
        submixing_ok=_all_true(o.submixing_ok for o in finished),
        ergodic=ergodicity.ergodic,
        runs=len(runs),
        failures=failures,
    )
    logger.info(f"Transfer verdict: {report.verdict}")
    return TransferOutcome(delayed, base, wrapped, report, runs)


@dataclass
class Deviation:
    player: int
    strategy: FiniteStateStrategy
    payoff: PayoffValue
    baseline: PayoffValue
    scheduler: Optional[str]
    verified: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "player": self.player + 1,
            "strategy": self.strategy.name,
            "description": self.strategy.describe(),
            "payoff": str(self.payoff),
            "baseline": str(self.baseline),
            "scheduler": self.scheduler,
            "verified": self.verified,
        }


@dataclass
class EquilibriumReport:
    baseline: List[PayoffValue]
    deviations: List[Optional[Deviation]]
    evaluated: int
    simulations: int
    budget_exceeded: bool = False

    @property
    def verdict(self) -> str:
        return DEVIATION_FOUND if any(self.deviations) else NO_DEVIATION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "baseline": [str(p) for p in self.baseline],
            "deviations": [d.to_dict() if d else None for d in self.deviations],
            "deviators_evaluated": self.evaluated,
            "simulations": self.simulations,
            "budget_exceeded": self.budget_exceeded,
        }


def _deviation_value(
    g: GameGraph,
    profile: StrategyProfile,
    i: int,
    dev: FiniteStateStrategy,
    schedulers: Sequence[Optional[DelayScheduler]],
    horizon: int,
) -> Tuple[PayoffValue, Optional[str]]:
    values = [simulate(g, profile.replace(i, dev), sched, horizon, check=False).payoffs[i] for sched in schedulers]
    idx, worst = _worst(values)
    sched = schedulers[idx]
    return worst, sched.describe() if sched is not None else None


def check_equilibrium(
    g: GameGraph, profile: StrategyProfile, config: Optional[EquilibriumConfig] = None
) -> EquilibriumReport:
    """Search bounded deviator classes for a strictly profitable deviation.

    A deviator's value is its worst case over the tested schedulers. Only
    exact strict improvements count, and each is re-simulated before it
    is reported.
    """
    config = config or EquilibriumConfig()
    if config.deviator_memory < 1:
        raise PreconditionError("deviator memory bound must be at least 1")
    profile.check(g)
    violations = validate(g)
    if violations:
        raise PreconditionError(f"game does not validate: {violations[0]}")
    if g.is_delayed:
        schedulers: List[Optional[DelayScheduler]] = list(
            scheduler_battery(
                g.delay_space, config.horizon, config.scheduler_budget, 0, config.random_period, config.seed
            )
        )
    else:
        schedulers = [None]
    base = combine_runs(run_battery(g, profile, schedulers, config.horizon))
    report = EquilibriumReport(base.values, [None] * g.n_players, 0, len(schedulers))
    if not all(v.exact for v in base.values):
        logger.warning("Baseline payoffs are approximate; no deviation can be certified")

    for i in range(g.n_players):
        baseline = base.values[i]
        best: Optional[Deviation] = None
        try:
            for dev in deviators(g, i, config.deviator_memory, config.search_depth, config.max_deviators):
                value, sched = _deviation_value(g, profile, i, dev, schedulers, config.horizon)
                report.evaluated += 1
                report.simulations += len(schedulers)
                if not (value.exact and baseline.exact and value.value > baseline.value):
                    continue
                if best is None or value.value > best.payoff.value:
                    best = Deviation(i, dev, value, baseline, sched)
        except BudgetExceeded as e:
            report.budget_exceeded = True
            logger.warning(f"Deviation search truncated: {e}")
        if best is None:
            continue
        again, _ = _deviation_value(g, profile, i, best.strategy, schedulers, config.horizon)
        report.simulations += len(schedulers)
        if again == best.payoff:
            best.verified = True
            report.deviations[i] = best
            logger.info(f"Player {i + 1}: {best.strategy.name} improves {baseline} to {best.payoff}")
        else:
            logger.warning(f"Player {i + 1}: deviation {best.strategy.name} did not re-verify, dropped")
    return report


def memoryless_profiles(g: GameGraph) -> Iterable[StrategyProfile]:
    """Every profile of memoryless strategies over base states, lexicographic."""
    bases = sorted({g.base_state(v) for v in g.states})
    per_player = [
        [
            FiniteStateStrategy.memoryless(dict(zip(bases, choice)), name="memoryless[" + ",".join(choice) + "]")
            for choice in itertools.product(player.actions, repeat=len(bases))
        ]
        for player in g.players
    ]
    for combo in itertools.product(*per_player):
        yield StrategyProfile(combo)


def find_ergodic_equilibrium(
    g: GameGraph, horizon: int = 200, search_depth: int = 2
) -> Optional[StrategyProfile]:
    """First memoryless profile that is ergodic and survives the bounded deviation search."""
    config = EquilibriumConfig(deviator_memory=1, horizon=horizon, search_depth=search_depth)
    for profile in memoryless_profiles(g):
        ergodicity = check_ergodic(g, profile, horizon)
        if not (ergodicity.ergodic and ergodicity.exact):
            continue
        report = check_equilibrium(g, profile, config)
        if report.verdict == NO_DEVIATION and not report.budget_exceeded:
            return profile
    return None

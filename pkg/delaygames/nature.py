"""Nature's delay schedulers.

Every scheduler is a pure function of the period: asking twice for period
t returns the same delay profile. Seeded schedulers derive one
``random.Random`` per period from the string ``"<seed>:<t>"`` (CPython's
Mersenne Twister, seeded through SHA-512 for str seeds), so traces are
reproducible across runs and platforms.
"""

import itertools
import logging
import random
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Hashable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import BudgetExceeded, PreconditionError, SchedulerExhausted, StructuralError
from .game import DelayProfile, DelaySpace

logger = logging.getLogger(__name__)


class DelayScheduler(ABC):
    kind = "scheduler"

    def __init__(self, space: DelaySpace):
        self.space = space

    @abstractmethod
    def _choose(self, t: int, emitted: Sequence[str]) -> DelayProfile:
        ...

    def next_delays(self, t: int, emitted: Sequence[str] = ()) -> DelayProfile:
        """Delay profile d_t attached to the signals emitted in period ``t``."""
        if t < 1:
            raise PreconditionError(f"periods start at 1, got {t}")
        d = tuple(self._choose(t, emitted))
        if not self.space.contains(d):
            raise StructuralError(f"{self.describe()} chose {d}, outside {self.space.describe()}")
        return d

    def fingerprint(self, t: int) -> Optional[Hashable]:
        """State ahead of period ``t``; None if the scheduler is not finite-state."""
        return None

    @abstractmethod
    def describe(self) -> str:
        ...

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


class FixedScheduler(DelayScheduler):
    kind = "fixed"

    def __init__(self, space: DelaySpace, profile: Union[int, Sequence[int]]):
        super().__init__(space)
        if isinstance(profile, int):
            profile = (profile,) * space.n_players
        self.profile = tuple(profile)
        if not space.contains(self.profile):
            raise StructuralError(f"fixed delays {self.profile} outside {space.describe()}")

    def _choose(self, t, emitted):
        return self.profile

    def fingerprint(self, t):
        return ()

    def describe(self):
        return "fixed:" + ",".join(str(d) for d in self.profile)


class RoundRobinScheduler(DelayScheduler):
    """Each player's delay cycles through its sorted delay set."""

    kind = "rr"

    def _choose(self, t, emitted):
        return tuple(ds[(t - 1) % len(ds)] for ds in map(self.space.delays, range(self.space.n_players)))

    def fingerprint(self, t):
        return tuple((t - 1) % len(self.space.per_player[i]) for i in range(self.space.n_players))

    def describe(self):
        return "rr"


def _seeded_profile(space: DelaySpace, seed: int, t: int) -> DelayProfile:
    rng = random.Random(f"{seed}:{t}")
    return tuple(rng.choice(space.delays(i)) for i in range(space.n_players))


class SeededScheduler(DelayScheduler):
    """Uniform delays, reproducible from the seed."""

    kind = "seed"

    def __init__(self, space: DelaySpace, seed: int):
        super().__init__(space)
        self.seed = seed

    def _choose(self, t, emitted):
        return _seeded_profile(self.space, self.seed, t)

    def describe(self):
        return f"seed:{self.seed}"


class PeriodicSeededScheduler(DelayScheduler):
    """A block of ``period`` seeded draws, repeated forever."""

    kind = "seed-periodic"

    def __init__(self, space: DelaySpace, seed: int, period: int):
        super().__init__(space)
        if period < 1:
            raise PreconditionError(f"scheduler period must be positive, got {period}")
        self.seed = seed
        self.period = period
        self.block = [_seeded_profile(space, seed, k) for k in range(1, period + 1)]

    def _choose(self, t, emitted):
        return self.block[(t - 1) % self.period]

    def fingerprint(self, t):
        return (t - 1) % self.period

    def describe(self):
        return f"seed:{self.seed}:{self.period}"


class ExplicitScheduler(DelayScheduler):
    kind = "explicit"

    def __init__(self, space: DelaySpace, profiles: Sequence[Sequence[int]], label: Optional[str] = None):
        super().__init__(space)
        self.profiles = tuple(tuple(p) for p in profiles)
        self.label = label

    def __len__(self) -> int:
        return len(self.profiles)

    def _choose(self, t, emitted):
        if t > len(self.profiles):
            raise SchedulerExhausted(f"explicit scheduler has {len(self.profiles)} profiles, period {t} requested")
        return self.profiles[t - 1]

    def fingerprint(self, t):
        # positions never repeat, so no lasso closes inside the list
        return ("explicit", t)

    def describe(self):
        if self.label:
            return f"explicit:{self.label}"
        return "explicit:" + ";".join(",".join(str(d) for d in p) for p in self.profiles)


class StitchedScheduler(DelayScheduler):
    """An explicit head followed by another scheduler, shifted to start at period 1."""

    kind = "stitched"

    def __init__(self, head: ExplicitScheduler, tail: DelayScheduler):
        super().__init__(head.space)
        self.head = head
        self.tail = tail

    def _choose(self, t, emitted):
        if t <= len(self.head):
            return self.head.next_delays(t, emitted)
        return self.tail.next_delays(t - len(self.head), emitted)

    def fingerprint(self, t):
        if t <= len(self.head):
            return ("head", t)
        inner = self.tail.fingerprint(t - len(self.head))
        return None if inner is None else ("tail", inner)

    def describe(self):
        return f"{self.head.describe()}+{self.tail.describe()}"


def parse_scheduler(spec: str, space: DelaySpace, base_dir: Optional[Path] = None) -> DelayScheduler:
    """Build a scheduler from ``fixed:<d>``, ``rr``, ``seed:<n>``, ``seed:<n>:<p>`` or ``explicit:<path>``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "fixed":
            values = [int(x) for x in arg.split(",")]
            return FixedScheduler(space, values[0] if len(values) == 1 else values)
        if kind == "rr" and not arg:
            return RoundRobinScheduler(space)
        if kind == "seed":
            seed, _, period = arg.partition(":")
            if period:
                return PeriodicSeededScheduler(space, int(seed), int(period))
            return SeededScheduler(space, int(seed))
        if kind == "explicit" and arg:
            from .formats.codec import load_delay_sequence

            path = Path(arg)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return ExplicitScheduler(space, load_delay_sequence(path), label=arg)
    except ValueError as e:
        raise StructuralError(f"invalid scheduler {spec!r}: {e}")
    raise StructuralError(f"unknown scheduler {spec!r}; expected fixed:<d>, rr, seed:<n>[:<p>] or explicit:<path>")


def scheduler_count(space: DelaySpace, horizon: int) -> int:
    return space.size() ** horizon


def largest_horizon_within(space: DelaySpace, horizon: int, budget: int) -> int:
    """Largest T' <= horizon whose exhaustive scheduler count fits ``budget``."""
    t = horizon
    while t > 0 and scheduler_count(space, t) > budget:
        t -= 1
    return t


def enumerate_schedulers(
    space: DelaySpace, horizon: int, budget: Optional[int] = None
) -> Iterator[ExplicitScheduler]:
    """Every delay-profile sequence of length ``horizon``, in lexicographic order."""
    count = scheduler_count(space, horizon)
    if budget is not None and count > budget:
        raise BudgetExceeded(f"{count} schedulers of length {horizon} exceed the budget of {budget}")
    profiles = list(space.profiles())
    for seq in itertools.product(profiles, repeat=horizon):
        yield ExplicitScheduler(space, seq)


def scheduler_battery(
    space: DelaySpace,
    exhaustive_horizon: int,
    budget: int,
    random_schedulers: int = 0,
    random_period: int = 16,
    seed: int = 0,
) -> List[DelayScheduler]:
    """Exhaustive heads stitched with periodic seeded tails, then periodic seeded schedulers.

    The head length shrinks to the largest one that fits ``budget``.
    """
    horizon = largest_horizon_within(space, exhaustive_horizon, budget)
    if horizon < exhaustive_horizon:
        logger.info(
            f"Exhaustive horizon reduced from {exhaustive_horizon} to {horizon} "
            f"to fit {budget} schedulers over {space.size()} delay profiles"
        )
    battery: List[DelayScheduler] = [
        StitchedScheduler(head, PeriodicSeededScheduler(space, seed + k, random_period))
        for k, head in enumerate(enumerate_schedulers(space, horizon))
    ]
    offset = len(battery)
    battery.extend(
        PeriodicSeededScheduler(space, seed + offset + j, random_period) for j in range(random_schedulers)
    )
    logger.debug(f"Scheduler battery: {offset} exhaustive (T={horizon}) + {random_schedulers} random")
    return battery


def profiles_of(sched: DelayScheduler, horizon: int) -> Tuple[DelayProfile, ...]:
    return tuple(sched.next_delays(t) for t in range(1, horizon + 1))

"""Payoff aggregation: mean-payoff, limsup, liminf and parity.

Every aggregator here is shift-invariant, so its value on an ultimately
periodic sequence prefix . cycle^w depends on the cycle only and is
computed exactly as a Fraction. Finite prefixes of arbitrary plays get a
documented surrogate (``aggregate_prefix``) that is always tagged
approximate.
"""

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple, Union

from .errors import AggregatorRejected, PayoffError, StructuralError

if TYPE_CHECKING:
    from .game import GameGraph

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]


@dataclass(frozen=True)
class LassoSequence:
    """The w-sequence prefix . cycle . cycle . ..."""

    prefix: Tuple[int, ...]
    cycle: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise PayoffError("lasso cycle must be nonempty")

    def at(self, k: int) -> int:
        """Entry at 0-based position ``k``."""
        if k < len(self.prefix):
            return self.prefix[k]
        return self.cycle[(k - len(self.prefix)) % len(self.cycle)]

    def take(self, n: int) -> List[int]:
        return [self.at(k) for k in range(n)]

    def shifted(self, head: int) -> "LassoSequence":
        return LassoSequence((head,) + self.prefix, self.cycle)

    def magnitude(self) -> int:
        return max(abs(x) for x in self.prefix + self.cycle)

    def __str__(self):
        return f"{list(self.prefix)}.{list(self.cycle)}^w"


@dataclass(frozen=True)
class PayoffValue:
    value: Fraction
    exact: bool

    def __str__(self):
        tag = "exact" if self.exact else "approx"
        return f"{self.value.numerator}/{self.value.denominator} {tag}"


@dataclass(frozen=True)
class Aggregator:
    """A payoff aggregation function u.

    ``lasso`` maps a nonempty cycle to the value of any lasso with that
    cycle. ``finite`` is the statistic used by ``aggregate_prefix`` on a
    finite block; ``tail_window`` selects whether that block is the whole
    prefix or its trailing half.
    """

    name: str
    lasso: Callable[[Sequence[int]], Number]
    finite: Callable[[Sequence[int]], Number]
    tail_window: bool = True
    non_negative: bool = False


def _mean(xs: Sequence[int]) -> Fraction:
    return Fraction(sum(xs), len(xs))


def _parity(xs: Sequence[int]) -> int:
    return 1 if min(xs) % 2 == 0 else 0


_REGISTRY: Dict[str, Aggregator] = {
    "mean-payoff": Aggregator("mean-payoff", _mean, _mean, tail_window=False),
    "limsup": Aggregator("limsup", max, max),
    "liminf": Aggregator("liminf", min, min),
    "parity": Aggregator("parity", _parity, _parity, non_negative=True),
}
BUILTIN_AGGREGATORS = tuple(_REGISTRY)


def get_aggregator(agg: Union[str, Aggregator]) -> Aggregator:
    if isinstance(agg, Aggregator):
        return agg
    try:
        return _REGISTRY[agg]
    except KeyError:
        raise StructuralError(f"unknown aggregator {agg!r}; known: {', '.join(sorted(_REGISTRY))}")


def aggregator_names() -> List[str]:
    return sorted(_REGISTRY)


def _check_priorities(agg: Aggregator, xs: Sequence[int]) -> None:
    if agg.non_negative and xs and min(xs) < 0:
        raise PayoffError(f"{agg.name} needs non-negative stage payoffs")


def aggregate_lasso(agg: Union[str, Aggregator], s: LassoSequence) -> Fraction:
    """Exact value of u on prefix . cycle^w; the prefix never matters."""
    agg = get_aggregator(agg)
    _check_priorities(agg, s.prefix + s.cycle)
    return Fraction(agg.lasso(s.cycle))


def aggregate_prefix(
    agg: Union[str, Aggregator],
    s: Sequence[int],
    t: int,
    full_window: bool = False,
) -> Fraction:
    """Finite-horizon surrogate of u on the first ``t`` entries of ``s``.

    mean-payoff averages all t entries; limsup, liminf and parity look at
    the last ceil(t/2) entries only (``full_window`` widens that to all t).
    The result approximates the limit and is never exact.
    """
    agg = get_aggregator(agg)
    if not s or t < 1:
        raise PayoffError("cannot aggregate an empty sequence")
    if t > len(s):
        raise PayoffError(f"prefix length {t} exceeds sequence length {len(s)}")
    block = list(s[:t])
    if agg.tail_window and not full_window:
        block = block[t - math.ceil(t / 2) :]
    _check_priorities(agg, block)
    return Fraction(agg.finite(block))


def prefix_error_bound(s: LassoSequence, t: int) -> Fraction:
    """Bound on |mean of first t entries - cycle mean| for a lasso."""
    return Fraction(2 * (len(s.prefix) + len(s.cycle)) * s.magnitude(), t)


def utility_of_play(
    g: "GameGraph",
    stage_payoffs: Union[LassoSequence, Sequence[int]],
    i: int,
) -> PayoffValue:
    """u^i of a play given player ``i``'s stage payoffs, tagged exact or approximate."""
    if isinstance(stage_payoffs, LassoSequence):
        return PayoffValue(aggregate_lasso(g.aggregator, stage_payoffs), True)
    value = aggregate_prefix(g.aggregator, stage_payoffs, len(stage_payoffs))
    logger.debug(f"Player {i + 1}: approximate {g.aggregator} over {len(stage_payoffs)} stages")
    return PayoffValue(value, False)


def is_shuffle(alpha: Sequence, beta: Sequence, gamma: Sequence) -> bool:
    """Whether ``alpha`` is an order-preserving interleaving of ``beta`` and ``gamma``."""
    nb, ng = len(beta), len(gamma)
    if len(alpha) != nb + ng:
        raise PayoffError(f"length {len(alpha)} is not {nb} + {ng}")
    # reach[k]: alpha[:j+k] interleaves beta[:j] and gamma[:k], for the current row j
    reach = [True] * (ng + 1)
    for k in range(1, ng + 1):
        reach[k] = reach[k - 1] and gamma[k - 1] == alpha[k - 1]
    for j in range(1, nb + 1):
        reach[0] = reach[0] and beta[j - 1] == alpha[j - 1]
        for k in range(1, ng + 1):
            a = alpha[j + k - 1]
            reach[k] = (reach[k] and beta[j - 1] == a) or (reach[k - 1] and gamma[k - 1] == a)
    return reach[ng]


@dataclass(frozen=True)
class Partition:
    """Ultimately periodic split of the positions: True picks beta, False gamma."""

    prefix: Tuple[bool, ...]
    cycle: Tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(bool(x) for x in self.prefix))
        object.__setattr__(self, "cycle", tuple(bool(x) for x in self.cycle))
        if True not in self.cycle or False not in self.cycle:
            raise PayoffError("partition cycle must send positions to both factors")

    @classmethod
    def alternating(cls) -> "Partition":
        return cls((), (True, False))

    def at(self, k: int) -> bool:
        if k < len(self.prefix):
            return self.prefix[k]
        return self.cycle[(k - len(self.prefix)) % len(self.cycle)]


def _position(s: LassoSequence, consumed: int) -> int:
    if consumed < len(s.prefix):
        return consumed
    return len(s.prefix) + (consumed - len(s.prefix)) % len(s.cycle)


def shuffle_lassos(beta: LassoSequence, gamma: LassoSequence, partition: Partition) -> LassoSequence:
    """The shuffle of two lassos along an ultimately periodic partition, as a lasso."""
    seen: Dict[Tuple[int, int, int], int] = {}
    out: List[int] = []
    nb = ng = k = 0
    while True:
        key = (_position(LassoSequence(partition.prefix, partition.cycle), k), _position(beta, nb), _position(gamma, ng))
        if key in seen:
            start = seen[key]
            return LassoSequence(tuple(out[:start]), tuple(out[start:]))
        seen[key] = k
        if partition.at(k):
            out.append(beta.at(nb))
            nb += 1
        else:
            out.append(gamma.at(ng))
            ng += 1
        k += 1


def check_submixing_on(
    agg: Union[str, Aggregator],
    beta: LassoSequence,
    gamma: LassoSequence,
    partition: Partition,
) -> bool:
    alpha = shuffle_lassos(beta, gamma, partition)
    ub, ug, ua = (aggregate_lasso(agg, x) for x in (beta, gamma, alpha))
    return min(ub, ug) <= ua <= max(ub, ug)


def check_shift_invariance_on(agg: Union[str, Aggregator], s: LassoSequence, head: int) -> bool:
    agg = get_aggregator(agg)
    if agg.non_negative and head < 0:
        raise PayoffError(f"{agg.name} needs a non-negative head, got {head}")
    return aggregate_lasso(agg, s.shifted(head)) == aggregate_lasso(agg, s)


def random_lasso(rng: random.Random, max_len: int = 4, low: int = 0, high: int = 5) -> LassoSequence:
    prefix = tuple(rng.randint(low, high) for _ in range(rng.randint(0, max_len)))
    cycle = tuple(rng.randint(low, high) for _ in range(rng.randint(1, max_len)))
    return LassoSequence(prefix, cycle)


def random_partition(rng: random.Random, max_len: int = 4) -> Partition:
    prefix = tuple(rng.random() < 0.5 for _ in range(rng.randint(0, max_len)))
    size = rng.randint(2, max_len + 1)
    cycle = [rng.random() < 0.5 for _ in range(size)]
    cycle[rng.randrange(size)] = True
    free = [k for k in range(size) if cycle[k]]
    if all(cycle):
        cycle[rng.choice(free[1:] or [0])] = False
    return Partition(prefix, tuple(cycle))


def law_violations(agg: Union[str, Aggregator], samples: int, seed: int = 0) -> List[str]:
    """Randomized search for counterexamples to the aggregator laws.

    Checks shift-invariance, submixing, and that the cycle value is stable
    under rotation and unrolling (otherwise it is not a function of the
    w-word). Returns human-readable counterexamples.
    """
    agg = get_aggregator(agg)
    rng = random.Random(seed)
    low = 0 if agg.non_negative else -5
    found: List[str] = []
    for _ in range(samples):
        beta = random_lasso(rng, low=low)
        gamma = random_lasso(rng, low=low)
        partition = random_partition(rng)
        head = rng.randint(low, 5)
        if not check_shift_invariance_on(agg, beta, head):
            found.append(f"shift: head {head} changes the value of {beta}")
        if not check_submixing_on(agg, beta, gamma, partition):
            found.append(f"submixing: {beta} and {gamma} along {partition}")
        c = beta.cycle
        k = rng.randrange(len(c))
        if agg.lasso(c[k:] + c[:k]) != agg.lasso(c) or agg.lasso(c + c) != agg.lasso(c):
            found.append(f"cycle value of {list(c)} changes under rotation or unrolling")
    return found


def register_aggregator(
    name: str,
    lasso: Callable[[Sequence[int]], Number],
    finite: Optional[Callable[[Sequence[int]], Number]] = None,
    tail_window: bool = True,
    non_negative: bool = False,
    samples: int = 1000,
    seed: int = 0,
) -> Aggregator:
    """Add an aggregator after spot-checking shift-invariance and submixing."""
    if name in _REGISTRY:
        raise AggregatorRejected(f"aggregator {name!r} is already registered")
    agg = Aggregator(name, lasso, finite or lasso, tail_window=tail_window, non_negative=non_negative)
    found = law_violations(agg, samples, seed)
    if found:
        logger.error(f"Rejecting aggregator {name!r}: {found[0]}")
        raise AggregatorRejected(f"{name!r} fails the aggregator laws: {found[0]}")
    _REGISTRY[name] = agg
    logger.info(f"Registered aggregator {name!r}")
    return agg


def unregister_aggregator(name: str) -> None:
    if name in BUILTIN_AGGREGATORS:
        raise AggregatorRejected(f"cannot remove built-in aggregator {name!r}")
    _REGISTRY.pop(name, None)

"""Exception types shared by every delaygames module.

All errors carry a short ``code`` so callers (the CLI in particular) can
map them to exit codes without string matching on messages.
"""

from typing import Optional, Sequence


class DelayGamesError(Exception):
    """Structured error with a machine-readable ``code``."""

    code = "internal"

    def __init__(self, msg: str, code: Optional[str] = None):
        if code is not None:
            self.code = code
        self.msg = msg
        super().__init__(f"[{self.code}] {msg}")


class StructuralError(DelayGamesError):
    """Malformed game data: unknown ids, wrong arity, delays outside D^i."""

    code = "structural"


class PreconditionError(DelayGamesError):
    code = "precondition"


class CycleTooShort(PreconditionError):
    """The graph has a cycle no longer than the largest possible delay."""

    code = "short-cycle"

    def __init__(self, msg: str, cycle: Sequence[str] = ()):
        self.cycle = tuple(cycle)
        super().__init__(msg)


class ModelViolation(DelayGamesError):
    """Signals, targets or payoffs depend on delays where they must not."""

    code = "model"


class FrankensteinAssertion(DelayGamesError):
    """One of the assertions of the thread-scheduling procedure failed.

    ``line`` is 4 (scheduled thread not active), 8 (no active thread ends
    at the new state) or 13 (addressed thread has no pending slot).
    """

    code = "assertion"

    def __init__(self, line: int, player: int, period: int, msg: str):
        self.line = line
        self.player = player
        self.period = period
        super().__init__(f"line {line}, player {player + 1}, period {period}: {msg}")


class StrategyUndefined(DelayGamesError):
    code = "strategy"


class SchedulerExhausted(DelayGamesError):
    code = "scheduler"


class BudgetExceeded(DelayGamesError):
    code = "budget"


class PayoffError(DelayGamesError):
    code = "payoff"


class AggregatorRejected(PayoffError):
    code = "aggregator"


class FormatError(DelayGamesError):
    """Unparsable or schema-violating input file."""

    code = "syntax"


class VariantDivergence(DelayGamesError):
    """The bounded-memory procedure played differently from the full-history one."""

    code = "divergence"

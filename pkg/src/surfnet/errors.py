"""Exception types shared across the library."""


class SurfnetError(Exception):
    """Base class for library errors."""


class SlackBudgetExceeded(SurfnetError):
    """Slack set too large to enumerate; the slack threshold is too loose."""

    def __init__(self, size: int, budget: int):
        super().__init__(
            f"slack set has {size} entries, exceeding the enumeration budget {budget}; "
            f"lower tau"
        )
        self.size = size
        self.budget = budget


class InfeasiblePiece(SurfnetError):
    """A candidate linear piece has an empty constraint polytope."""


class NonFiniteEncountered(SurfnetError):
    """Objective value or gradient became non-finite during descent."""

    def __init__(self, message: str, snapshot: int | None = None):
        super().__init__(message if snapshot is None else f"{message} (snapshot {snapshot})")
        self.snapshot = snapshot


class OracleIntractable(SurfnetError):
    """Grid oracle would exceed its hard evaluation cap."""


class ConfigError(SurfnetError):
    """Malformed or missing experiment configuration."""


class SlackBudgetWarning(UserWarning):
    """Slack set is large enough that enumeration will be slow."""

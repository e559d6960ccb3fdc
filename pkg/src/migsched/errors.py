"""Exception hierarchy shared by every migsched module."""


class MigSchedError(Exception):
    """Base class for all library errors."""


class InvalidProfile(MigSchedError, ValueError):
    """A counter profile violates its range invariants."""


class DegenerateProfile(MigSchedError, ValueError):
    """A counter needed as a divisor is effectively zero."""


class InvalidAllocation(MigSchedError, ValueError):
    """A partition, slice or power cap is outside the supported space."""


class InsufficientSamples(MigSchedError):
    def __init__(self, key, have, need):
        super().__init__(f"{key}: {have} samples, need at least {need}")
        self.key = key
        self.have = have
        self.need = need


class RankDeficient(MigSchedError):
    def __init__(self, key, rank, need):
        super().__init__(f"{key}: design matrix rank {rank} < {need}")
        self.key = key
        self.rank = rank
        self.need = need


class MissingScalabilityCoefficients(MigSchedError):
    def __init__(self, key):
        super().__init__(f"{key}: no scalability coefficients fitted for this key")
        self.key = key


class UnknownKey(MigSchedError, KeyError):
    def __init__(self, key, what="coefficients"):
        super().__init__(f"{key}: no {what}")
        self.key = key

    def __str__(self):
        return self.args[0]


class EmptyInput(MigSchedError, ValueError):
    """An aggregate was requested over an empty collection."""


class Infeasible(MigSchedError):
    """No candidate satisfies the fairness constraint."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)

"""Exception types raised across the package."""


class ParceLiNGAMError(Exception):
    """Base class for all package errors."""


class DegenerateVariance(ParceLiNGAMError):
    """A regressor has (numerically) zero variance."""


class SingularCovariance(ParceLiNGAMError):
    """Regressor covariance fails the condition-number gate."""


class ConstantInput(ParceLiNGAMError):
    """An HSIC input vector is constant."""


class EmptyInput(ParceLiNGAMError):
    pass


class OverlappingLists(ParceLiNGAMError):
    pass


class SubsetBudgetExceeded(ParceLiNGAMError):
    """Too many variables for exhaustive subset enumeration."""

    def __init__(self, d, cap):
        self.d = d
        self.cap = cap
        super().__init__(
            f"{d} variables exceed subset_cap={cap} "
            f"(2^{d} subsets); raise the cap or reduce the variable set"
        )


class ScalingNonConvergence(ParceLiNGAMError):
    pass


class UnknownNetwork(ParceLiNGAMError):
    pass


class InvalidSpec(ParceLiNGAMError):
    """A SemSpec violates one of its invariants."""


class IdMismatch(ParceLiNGAMError):
    pass

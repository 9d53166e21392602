"""Exception hierarchy for paretoc."""


class ParetocError(Exception):
    """Base class for all paretoc errors."""


# --- tessellation ---


class DimensionTooLow(ParetocError):
    """Fewer than n+1 nodes were supplied for an n-dimensional tessellation."""


class DegenerateInput(ParetocError):
    """Node set is affinely degenerate beyond perturbation recovery."""


class DuplicateNode(ParetocError):
    """Attempt to insert a node coinciding with an existing one."""


# --- problems ---


class UnknownProblem(ParetocError):
    """Requested problem name is not in the registry."""


# --- continuation ---


class SingularLinearSystem(ParetocError):
    """Barycentric face system is rank deficient; the face is skipped."""


class RankCollapse(ParetocError):
    """Interpolated Jacobian has rank < m-1; weights are ambiguous."""


class KernelDimensionMismatch(ParetocError):
    """Numerical kernel of the interpolated Jacobian is not (n-m+1)-dimensional."""


class UnsupportedObjectiveCount(ParetocError):
    """Polytope realization is only implemented for 2 or 3 objectives."""


# --- constrained ---


class RankDeficientConstraint(ParetocError):
    """Constraint Jacobian lost full rank at an evaluation point."""


class NonSquareUnsupported(ParetocError):
    """Augmented minor test is only implemented for the square case n-d+m = n."""


# --- refinement / metrics ---


class EmptyComplex(ParetocError):
    """Operation requires a nonempty complex."""


class NoProgress(ParetocError):
    """All refinement candidates were rejected by the spacing guard."""


class InsufficientData(ParetocError):
    """Not enough data points for the requested estimate."""

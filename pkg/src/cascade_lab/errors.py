"""Exception types raised across the package."""


class CascadeLabError(Exception):
    """Base class for all package errors."""


class PreconditionError(CascadeLabError, ValueError):
    """An input violates a documented precondition."""


# integrator
class StepUnderflow(CascadeLabError):
    pass


class BudgetExceeded(CascadeLabError):
    pass


class NoCrossing(CascadeLabError):
    pass


class TangentialCrossing(CascadeLabError):
    pass


# saddle frames
class DegenerateAngle(CascadeLabError):
    pass


class InfeasibleMass(CascadeLabError):
    pass


class NonPositiveInput(CascadeLabError, ValueError):
    pass


class NoSolution(CascadeLabError):
    pass


class DegenerateTarget(CascadeLabError):
    pass


class EscapedNeighborhood(CascadeLabError):
    pass


# cascade
class SearchFailed(CascadeLabError):
    def __init__(self, saddle, message=""):
        self.saddle = saddle
        super().__init__(f"no corridor point found at saddle {saddle}" + (f": {message}" if message else ""))


# lattice
class PlacementExhausted(CascadeLabError):
    def __init__(self, generation, message=""):
        self.generation = generation
        super().__init__(f"placement exhausted at generation {generation}" + (f": {message}" if message else ""))


# galerkin
class UnlinkedPoint(CascadeLabError):
    pass


class OutOfWindow(CascadeLabError):
    pass

"""Exception types shared across the package."""


class KNCSError(Exception):
    """Base class for all library errors."""


class NonexistentState(KNCSError):
    """The normalization series diverges, so no normalizable state exists."""


class DivergentSeries(NonexistentState):
    """A power series was evaluated outside its disk of convergence."""


class Indeterminate(KNCSError):
    """The convergence test could not decide within the term budget."""


class BracketFailure(KNCSError):
    """No diverging |xi| was found below the search ceiling."""


class DegenerateNullspace(KNCSError):
    """Two smallest singular values of a dark-state block are not separated."""


class ZeroMeanOccupation(KNCSError):
    """The Mandel parameter is undefined for a state with <n> = 0."""

"""Exception hierarchy shared across the package.

``ValidationError`` subclasses map to CLI exit code 2, ``DivergenceError``
subclasses to exit code 3.
"""


class FactGraphError(Exception):
    """Base class for all package errors."""


class ValidationError(FactGraphError):
    """Bad inputs, broken invariants, or contract violations."""


class DivergenceError(FactGraphError):
    """Numerical failure during training or inference."""


class KindMismatch(ValidationError):
    """Edge endpoints do not match the relation's kind signature."""


class UnknownNode(ValidationError):
    """A referenced node does not exist in the graph."""


class UnassignedNode(ValidationError):
    """A node is missing from the split partition map."""


class ShapeMismatch(ValidationError):
    """Matrix operands have non-conforming shapes."""


class NonFiniteValue(DivergenceError):
    """A NaN or Inf appeared where only finite values are allowed."""


class EmptyTrainSet(ValidationError):
    """No labeled sources available for the training loss."""


class TooFewUsers(ValidationError):
    """Not enough eligible users for pair sampling."""


class TooFewItems(ValidationError):
    """Not enough items to form the requested number of clusters."""


class UndefinedForIsolatedUser(ValidationError):
    """A confusion score was requested for a user with no source or article links."""


class StaleSubgraph(ValidationError):
    """An edge proposal references an unknown or expired sub-graph id."""


class InvalidEndpoint(ValidationError):
    """An edge proposal endpoint is outside its sub-graph or violates a signature."""


class ProtocolSplitMismatch(ValidationError):
    """Proposals were supplied for a split the protocol does not interact on."""


class InfeasibleConfig(ValidationError):
    """A generator or model configuration violates its invariants."""


class EmptyInput(ValidationError):
    """A metric was called on an empty prediction set."""

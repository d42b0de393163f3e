"""Exception hierarchy shared by all modules."""


class TrivanceError(Exception):
    """Base class for every error raised by this package."""


class InvalidNode(TrivanceError, ValueError):
    pass


class CrossDimensionMessage(TrivanceError, ValueError):
    pass


class NotApplicable(TrivanceError, ValueError):
    pass


class InvalidPeer(TrivanceError, ValueError):
    pass


class Unsupported(TrivanceError, ValueError):
    """Algorithm/topology combination the generator cannot build."""


class ZeroNodes(TrivanceError, ValueError):
    pass


class PortViolation(TrivanceError):
    def __init__(self, step, node, dim, kind, count):
        self.step, self.node, self.dim, self.kind, self.count = step, node, dim, kind, count
        super().__init__(
            f"step {step}: node {node} has {count} {kind} in dimension {dim} (max 2)"
        )


class ExactlyOnceViolation(TrivanceError):
    """A contribution would be reduced into the same slot twice.

    ``origin`` is -1 when the fingerprint backend detects the duplicate
    (it knows that a slot is over-full but not which origin repeats).
    """

    def __init__(self, step, node, slot, origin):
        self.step, self.node, self.slot, self.origin = step, node, slot, origin
        super().__init__(
            f"step {step}: node {node} slot {slot} received origin {origin} twice"
        )


class PhantomContribution(TrivanceError):
    """A latency message carries an origin its sender has not received yet."""

    def __init__(self, step, node, origin):
        self.step, self.node, self.origin = step, node, origin
        super().__init__(f"step {step}: node {node} forwards origin {origin} it does not hold")

"""Exception hierarchy shared by all corrlab modules."""


class CorrlabError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class ZeroPolynomial(CorrlabError):
    pass


class NonConvergence(CorrlabError):
    pass


class DegenerateLeadingCoefficient(CorrlabError):
    pass


class DegenerateFiber(CorrlabError):
    pass


class ExtraneousFactorUnresolved(CorrlabError):
    pass


class InvalidGraph(CorrlabError):
    """Graph polynomial is not square-free or contains a vertical/horizontal fibre."""


class BranchCap(CorrlabError):
    """Chain enumeration hit its node cap. ``partial`` holds what was found."""

    def __init__(self, message, partial=None, nodes=0):
        super().__init__(message)
        self.partial = list(partial or [])
        self.nodes = nodes


class FitUnstable(CorrlabError):
    """A log-domain regression had too little explanatory power."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class IllConditioned(CorrlabError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class Infeasible(CorrlabError):
    pass


class CriticalCollision(CorrlabError):
    pass


class EliminationBlowup(CorrlabError):
    def __init__(self, message, degrees=None):
        super().__init__(message)
        self.degrees = list(degrees or [])

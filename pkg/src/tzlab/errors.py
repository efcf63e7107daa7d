"""Exception hierarchy shared by all tzlab modules."""


class TzlabError(Exception):
    """Base class for every error raised by tzlab."""


class SingularMatrix(TzlabError, ValueError):
    pass


class NonTraceFree(TzlabError, ValueError):
    pass


class ZeroPole(TzlabError, ValueError):
    pass


class ConeLine(TzlabError, ValueError):
    """The line lies in the degeneracy cone (2ab = 1 or third component 0)."""


class AtPole(TzlabError, ValueError):
    pass


class PoleCollision(TzlabError, ValueError):
    pass


class BadArgument(TzlabError, ValueError):
    pass


class DegenerateKernel(TzlabError, ValueError):
    pass


class NonPositiveH(TzlabError, ValueError):
    pass


class ZeroLambda(TzlabError, ValueError):
    pass


class GammaCollision(TzlabError, ValueError):
    pass


class AllMasked(TzlabError, ValueError):
    pass


class ZeroH(TzlabError, ValueError):
    pass


class FrameDegenerate(TzlabError, ValueError):
    pass


class NonRealOutput(TzlabError, ValueError):
    pass


class EmptyGrid(TzlabError, ValueError):
    pass


class OpenConditionViolated(TzlabError, ValueError):
    """Raised when too many nodes fail the open condition of a dressing.

    ``nodes`` holds the offending ``(i, j)`` grid indices.
    """

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = [tuple(int(k) for k in n) for n in nodes]

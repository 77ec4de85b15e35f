"""Exception hierarchy shared by every cstarlab module."""


class CStarLabError(Exception):
    """Base class for all library errors."""


class InvalidMatrix(CStarLabError, ValueError):
    pass


class NotHermitian(CStarLabError, ValueError):
    pass


class EmptyInput(CStarLabError, ValueError):
    pass


class ShapeMismatch(CStarLabError, ValueError):
    pass


class EmptyQuotient(CStarLabError, ValueError):
    pass


class TooManyBlocks(CStarLabError, ValueError):
    pass


class NotHomomorphism(CStarLabError, ValueError):
    """Generator images do not extend to a unital homomorphism."""


class ShilovInconsistent(CStarLabError, RuntimeError):
    """The union of boundary singletons failed re-verification."""


class BaseMismatch(CStarLabError, ValueError):
    pass


class ImageNotIdeal(CStarLabError, RuntimeError):
    pass


class NotShilov(CStarLabError, ValueError):
    pass


class NotCover(CStarLabError, ValueError):
    """A representation failed a C*-cover invariant."""


class OutsideDisk(CStarLabError, ValueError):
    pass


class NotIsometry(CStarLabError, ValueError):
    pass


class TrivialCorner(CStarLabError, ValueError):
    pass


class ParseError(CStarLabError, ValueError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ShapeError(CStarLabError, ValueError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownScenario(CStarLabError, KeyError):
    pass

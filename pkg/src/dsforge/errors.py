"""Exception hierarchy shared by all dsforge modules."""


class DsforgeError(Exception):
    """Base class for every error raised by dsforge."""


class InputError(DsforgeError):
    """Bad input data (mesh file, region tags, surface shape)."""


class ParseError(InputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedFormatVersion(InputError):
    pass


class NonConformingMesh(InputError):
    pass


class DegenerateCell(InputError):
    pass


class UnknownRegionTag(InputError):
    pass


class DimensionMismatch(DsforgeError, ValueError):
    pass


class NotAManifold(InputError):
    pass


class NotClosedSurface(InputError):
    pass


class NonOrientable(InputError):
    pass


class InternalError(DsforgeError):
    """An internal consistency check failed; indicates a bug, not bad input."""


class ExtensionFailed(DsforgeError):
    pass


class NotARing(DsforgeError):
    pass


class EmptySupport(NotARing):
    pass


class DegenerateCycle(DsforgeError, ValueError):
    pass


class DegenerateProjection(DsforgeError):
    pass


class CyclesIntersect(DsforgeError):
    pass


class RankMismatch(DsforgeError):
    pass

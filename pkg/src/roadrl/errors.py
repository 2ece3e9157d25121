"""Exception types raised across the package.

Every failure mode callers are expected to distinguish gets its own class;
all of them derive from RoadRlError so CLI entry points can catch one type.
"""


class RoadRlError(Exception):
    pass


# -- road graph -------------------------------------------------------------

class EmptyGraph(RoadRlError):
    pass


class DegenerateEdge(RoadRlError):
    def __init__(self, edge_ids):
        self.edge_ids = list(edge_ids)
        super().__init__(f"edges with coincident endpoints: {self.edge_ids}")


class InvalidDefault(RoadRlError):
    pass


class NotEnhanced(RoadRlError):
    pass


class DegenerateTriple(RoadRlError):
    pass


class VersionMismatch(RoadRlError):
    pass


class TruncatedFile(RoadRlError):
    pass


class InvariantViolation(RoadRlError):
    pass


# -- network generation -----------------------------------------------------

class DegenerateInput(RoadRlError):
    pass


# -- OSM import ---------------------------------------------------------------

class ParseError(RoadRlError):
    def __init__(self, message, byte_offset=None):
        self.byte_offset = byte_offset
        super().__init__(message if byte_offset is None
                         else f"{message} (byte offset {byte_offset})")


class EmptyNetwork(RoadRlError):
    pass


# -- routing ------------------------------------------------------------------

class SameNode(RoadRlError):
    pass


class InvalidWeight(RoadRlError):
    pass


# -- dynamics / learner -------------------------------------------------------

class NumericFault(RoadRlError):
    pass


class ShapeError(RoadRlError):
    pass


class CacheError(RoadRlError):
    pass


class NotWarm(RoadRlError):
    pass


class ShapeMismatch(RoadRlError):
    pass


# -- simulation ---------------------------------------------------------------

class TooManyVehicles(RoadRlError):
    pass


class PlacementFailed(RoadRlError):
    pass


class NoData(RoadRlError):
    pass


class ConfigError(RoadRlError):
    pass

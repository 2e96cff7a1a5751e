"""Exception hierarchy for morphforge.

Every failure mode raised by the library derives from MorphforgeError so
callers can catch one base class at pipeline boundaries.
"""


class MorphforgeError(Exception):
    """Base class for all morphforge errors."""


# ---------------------------------------------------------------- image I/O

class MissingFile(MorphforgeError):
    pass


class UnsupportedFormat(MorphforgeError):
    pass


class CorruptData(MorphforgeError):
    pass


# ---------------------------------------------------------------- geometry

class NonPositiveSigma(MorphforgeError):
    pass


class AnnulusOutOfBounds(MorphforgeError):
    pass


class DegenerateRadii(MorphforgeError):
    pass


# ---------------------------------------------------------------- landmarks

class WrongPointCount(MorphforgeError):
    pass


class PointOutOfBounds(MorphforgeError):
    pass


class ParseError(MorphforgeError):
    pass


class CardinalityMismatch(MorphforgeError):
    pass


class DegenerateSegment(MorphforgeError):
    pass


# ---------------------------------------------------------------- warping

class TooFewPoints(MorphforgeError):
    pass


class AllCollinear(MorphforgeError):
    pass


class DegenerateSourceTriangle(MorphforgeError):
    pass


class CoverageGap(MorphforgeError):
    pass


class NoSegments(MorphforgeError):
    pass


# ---------------------------------------------------------------- blending

class DimensionMismatch(MorphforgeError):
    pass


class EmptyAnnulus(MorphforgeError):
    pass


class SolverDiverged(MorphforgeError):
    pass


class FlowOverflow(MorphforgeError):
    pass


# ---------------------------------------------------------------- augment

class NonPositiveLength(MorphforgeError):
    pass


class BadFraction(MorphforgeError):
    pass


class CropOutOfBounds(MorphforgeError):
    pass


# ---------------------------------------------------------------- dataset

class DuplicateId(MorphforgeError):
    pass


class BadRatios(MorphforgeError):
    pass


class InfeasibleConstraints(MorphforgeError):
    pass


class InsufficientPairs(MorphforgeError):
    pass


# ---------------------------------------------------------------- network

class ShapeMismatch(MorphforgeError):
    pass


class NoForwardCache(MorphforgeError):
    pass


class EmptyDataset(MorphforgeError):
    pass


class TooFewFCLayers(MorphforgeError):
    pass


# ---------------------------------------------------------------- attack / lrp

class OracleUnavailable(MorphforgeError):
    pass


class NoCorrectlyDetectedMorphs(MorphforgeError):
    pass


class BelowGate(MorphforgeError):
    pass


class EmptyList(MorphforgeError):
    pass


class ZeroRegionRelevance(MorphforgeError):
    pass

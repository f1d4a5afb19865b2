"""Exception hierarchy shared by every labelfusion module."""


class LabelFusionError(Exception):
    """Base class for all library errors."""


class DuplicateEntry(LabelFusionError):
    pass


class IndexOutOfBounds(LabelFusionError, IndexError):
    pass


class ValueOutOfRange(LabelFusionError, ValueError):
    pass


class DimensionMismatch(LabelFusionError, ValueError):
    pass


class EmptyAnnotations(LabelFusionError):
    pass


class EmptyInput(LabelFusionError, ValueError):
    pass


class NumericalError(LabelFusionError, ArithmeticError):
    pass


class NoEvaluableClass(LabelFusionError):
    pass


class DegenerateInput(LabelFusionError, ValueError):
    pass


class AllZeroDifferences(LabelFusionError, ValueError):
    pass


class MissingColumn(LabelFusionError, KeyError):
    pass


class NonNumericFeature(LabelFusionError, ValueError):
    pass


class EmptyFile(LabelFusionError):
    pass


class ClassTooSmall(LabelFusionError, ValueError):
    pass


class ConfigError(LabelFusionError, ValueError):
    pass

"""
Purpose: exceptions for the thermalnn package.
"""


class ThermalNNError(Exception):
    """Base class for all errors raised by the thermalnn package"""


class SchemaError(ThermalNNError):
    """A column or channel required by the channel schema is missing or duplicated"""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(ThermalNNError):
    """A cell of a measurement file could not be read as a finite number"""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class PlanError(ThermalNNError):
    """The fold plan does not partition the profiles as required"""


class ShapeError(ThermalNNError):
    """Array dimensions do not match the topology or network spec"""


class ContractError(ThermalNNError):
    """
    Raised when a call is made with state produced for something else,
    e.g. a forward cache handed to the backward pass of another network
    """


class ArgumentError(ThermalNNError, ValueError):
    """An argument is outside its documented range"""


class NumericalError(ThermalNNError):
    """
    Non-finite values were met. The step index or the parameter block is kept
    so the caller can report where it happened.
    """

    def __init__(self, message, step=None, block=None):
        super().__init__(message)
        self.step = step
        self.block = block


class DivergenceError(NumericalError):
    """A rollout left the admissible temperature range"""


class TrainingError(ThermalNNError):
    """Training could not make progress, e.g. most windows diverged within one epoch"""


class GenerationError(ThermalNNError):
    """The synthetic plant became unstable while generating data"""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class EmptySelectionError(ThermalNNError):
    """No model satisfied the selection criterion"""


class ConfigError(ThermalNNError):
    """
    Invalid configuration. The message always names the offending key and the
    file (or environment variable) it came from.
    """

    def __init__(self, message, key=None, location=None):
        if key is not None or location is not None:
            message = "{} [{}] ({})".format(message, key or "?", location or "<defaults>")
        super().__init__(message)
        self.key = key
        self.location = location

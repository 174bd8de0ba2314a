"""Jerarquía de errores del dominio. Las vistas y los comandos los traducen a 400 / CommandError."""


class UwbTdoaError(Exception):
    pass


class InvalidArgumentError(UwbTdoaError, ValueError):
    pass


class InsufficientDataError(UwbTdoaError, ValueError):
    pass


class InsufficientAnchorsError(UwbTdoaError, ValueError):
    pass


class MissingAnchorError(UwbTdoaError, KeyError):
    def __str__(self):
        # KeyError pone comillas alrededor del mensaje
        return str(self.args[0]) if self.args else ''


class OutOfBoundsError(UwbTdoaError, ValueError):
    pass


class InvalidConfigError(UwbTdoaError, ValueError):
    pass


class IncompatibleOrderingError(InvalidConfigError):
    pass


class IncompatibleEncodingError(InvalidConfigError):
    pass


class ShapeError(UwbTdoaError, ValueError):
    pass


class NumericError(UwbTdoaError, ArithmeticError):
    pass


class InvalidIndexError(UwbTdoaError, IndexError):
    pass


INCOMPATIBLE_ENCODING_MSG = (
    "La codificación espacial (spatial / spatial_time) no es posible con multi-CIR patching: "
    "cada token contiene información de todas las anclas."
)

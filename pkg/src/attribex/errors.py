"""Exception hierarchy. The CLI maps ``NumericsError`` to exit code 2 and every
other ``AttribexError`` to exit code 1."""


class AttribexError(Exception):
    pass


class InputShapeError(AttribexError, ValueError):
    pass


class NumericsError(AttribexError, ArithmeticError):
    pass


class ModelFormatError(AttribexError, ValueError):
    def __init__(self, message, layer=None, field=None):
        self.layer = layer
        self.field = field
        where = []
        if layer is not None:
            where.append(f"layer {layer}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class ConfigError(AttribexError, ValueError):
    pass


class SizeError(AttribexError, ValueError):
    pass

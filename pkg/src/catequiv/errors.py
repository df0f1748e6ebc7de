"""Exception types shared across the package."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class CategoryError(EngineError):
    """Malformed category data or an ill-typed composition query."""


class FunctorError(EngineError):
    """Functor data missing or inconsistent with its category."""


class KernelError(EngineError):
    """Kernel shapes or regimes inconsistent with the functor typing."""


class LayerError(EngineError):
    """Layer evaluation failed (shape, typing, or missing data)."""

    def __init__(self, message: str, layer_index: int | None = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class CompileError(EngineError):
    """Retraction construction or equivariant compilation failed."""


class BuilderError(EngineError):
    """Structure builder rejected its input (with a witness)."""


class DocumentError(EngineError):
    """A JSON document is missing keys or carries malformed values."""

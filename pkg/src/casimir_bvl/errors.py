"""Exception types shared across the package."""


class CapabilityError(NotImplementedError):
    """The requested operation is not defined for this model or input.

    Raised for example when a lossless permittivity is asked for on the real
    frequency axis, where the integrands have surface-mode poles.
    """


class PoleError(ZeroDivisionError):
    """Evaluation exactly at a pole (e.g. the surface-mode pole eps = -1)."""


class ConfigError(ValueError):
    """Invalid run configuration (bad field, file or flag combination)."""

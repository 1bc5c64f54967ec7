"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when an experiment configuration file is malformed."""


class InfeasibleGeometryError(ValueError):
    """Raised when the antenna count cannot support the requested clustering.

    Zero-forcing across clusters needs at least one spatial dimension left
    over after nulling every out-of-cluster user, i.e. M >= (N - 1) * K + 1.
    """

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario configuration is malformed or violates a precondition."""


class SynthesisError(RuntimeError):
    """Switching-law synthesis failed, typically because the topology
    family is not jointly connected."""


class NumericError(RuntimeError):
    """A numerical computation left its validated envelope (ill-conditioned
    solve, non-finite state during simulation)."""

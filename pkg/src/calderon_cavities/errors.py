"""Exception and warning classes shared across the package."""


class CavityError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CavityError):
    """Malformed or schema-invalid configuration."""


class InvalidCurveParameters(ConfigError):
    pass


class OverlappingCavities(ConfigError):
    pass


class CavityTouchesOuter(ConfigError):
    pass


class OddNodeCount(ConfigError):
    pass


class SelfIntersectingMap(ConfigError):
    pass


class DisksOverlap(ConfigError):
    pass


class OracleNotApplicable(CavityError):
    pass


class SingularSystem(CavityError):
    """A dense solve hit a (numerically) singular matrix.

    For single-layer systems this usually means the logarithmic capacity of
    the boundary is close to 1; rescale the scene so its diameter is < 1.
    """


class PointTooCloseToBoundary(UserWarning):
    """Off-boundary evaluation requested closer than three grid spacings."""


class RankZero(UserWarning):
    """All moments vanish numerically; the reconstructed measure is empty."""


class IllConditionedPencil(UserWarning):
    """The Hankel pencil was rank deficient and has been truncated."""


class UnprojectedTrace(UserWarning):
    """A trace outside the projected space was projected before pairing."""

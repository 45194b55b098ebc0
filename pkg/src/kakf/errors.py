"""Exception hierarchy shared by the simulator modules."""


class KakfError(Exception):
    """Base class for every error raised by this package."""


class ColumnMismatch(KakfError, ValueError):
    pass


class LengthMismatch(KakfError, ValueError):
    pass


class DimMismatch(KakfError, ValueError):
    pass


class IndexOutOfRange(KakfError, IndexError):
    pass


class ZeroMatrix(KakfError, ValueError):
    """Raised when a rank-one approximation is requested for an all-zero matrix."""


class InvalidDims(KakfError, ValueError):
    pass


class IdentifiabilityViolation(InvalidDims):
    """K < P: the design matrix cannot have full row rank."""

    def __init__(self, k_blocks, p):
        self.k_blocks = k_blocks
        self.p = p
        super().__init__(
            f"identifiability requires K >= P = N*L*U, got K={k_blocks} < P={p}"
        )


class TooFewSlots(KakfError, ValueError):
    pass


class ZeroSignal(KakfError, ValueError):
    pass


class DegenerateColumn(KakfError):
    def __init__(self, p):
        self.p = p
        super().__init__(f"column {p} of the filtered data is identically zero")


class DegenerateInput(KakfError, ValueError):
    pass


class AnchorTooSmall(KakfError):
    def __init__(self, p, magnitude):
        self.p = p
        self.magnitude = magnitude
        super().__init__(f"anchor entry {p} too small for scaling removal: |a|={magnitude:.3e}")


class ZeroAnchor(KakfError, ValueError):
    pass


class RankDeficientStep(KakfError):
    """An alternating least-squares regressor lost column rank."""

    def __init__(self, step, rank, n_cols):
        self.step = step
        self.rank = rank
        self.n_cols = n_cols
        super().__init__(f"{step}-step regressor rank {rank} < {n_cols} columns")


class ZeroTruth(KakfError, ValueError):
    pass


class EmptyMask(KakfError, ValueError):
    pass


class ConfigError(KakfError, ValueError):
    pass

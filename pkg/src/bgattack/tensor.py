"""Dense-array substrate.

Tensors are plain numpy float64 arrays in row-major (C) order; images are
channel-last (H, W, C).  The optimization path stays in 64-bit throughout
so finite-difference validation at 1e-6 steps has headroom; 32-bit exists
only in the on-disk container (see io).

Binary operations require equal shapes.  There is no broadcasting here:
every shape mismatch in this pipeline is a bug, not a convenience.
"""

import numpy as np

from .errors import DimensionError


def as_tensor(data) -> np.ndarray:
    """Copy input into a float64 C-contiguous array and verify finiteness."""
    arr = np.array(data, dtype=np.float64, order="C")
    _check_finite(arr)
    return arr


def zeros(dims) -> np.ndarray:
    return np.zeros(dims, dtype=np.float64)


def ones(dims) -> np.ndarray:
    return np.ones(dims, dtype=np.float64)


def require_same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _check_finite(arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise DimensionError("tensor contains non-finite values")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of equal-shaped tensors."""
    require_same_shape(a, b, "hadamard")
    out = np.multiply(a, b)
    _check_finite(out)
    return out


def lincomb(alpha: float, a: np.ndarray, beta: float, b: np.ndarray) -> np.ndarray:
    """alpha*a + beta*b, elementwise."""
    require_same_shape(a, b, "lincomb")
    out = alpha * a + beta * b
    _check_finite(out)
    return out


def clamp01(a: np.ndarray) -> np.ndarray:
    """Projection onto the unit box [0, 1]; idempotent, keeps in-range values."""
    return np.clip(a, 0.0, 1.0)


def reduce_sum(a: np.ndarray) -> float:
    """Sum of all entries.

    numpy's pairwise summation keeps the result deterministic for a fixed
    input and permutation-stable to ~1e-12 relative error for bounded data.
    """
    return float(np.sum(a))


def freeze(arr: np.ndarray) -> np.ndarray:
    """Mark an array immutable so shared values cannot be mutated in place."""
    arr.flags.writeable = False
    return arr

"""Binary mask algebra for the two-level perturbation ensemble.

A grid mask pair splits the image plane into n x n rectangular patches and
assigns the checkerboard half (patch row + col even) to `grid`, the rest to
`reversed_`.  The pair partitions the plane: grid + reversed == 1 everywhere
and grid * reversed == 0 everywhere.  For n=4 the grid half is exactly the
8 mutually non-adjacent patches of the 16.

Patch boundaries sit at multiples of floor(extent / n); the remainder when
n does not divide the extent is absorbed by the last row/column of patches.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import freeze, hadamard, lincomb


class Phase(Enum):
    GRID_ACTIVE = "grid"
    REVERSED_ACTIVE = "reversed"


@dataclass(frozen=True)
class GridMaskPair:
    grid: np.ndarray       # (H, W, 1) binary, checkerboard patches
    reversed_: np.ndarray  # (H, W, 1) binary complement
    n: int


def _patch_edges(extent: int, n: int) -> list[int]:
    """Patch edge coordinates [0, step, 2*step, ..., extent]."""
    step = extent // n
    return [k * step for k in range(n)] + [extent]


def boundary_indices(pair: GridMaskPair, axis: str) -> list[int]:
    """The n-1 interior patch-boundary indices along 'row' or 'col', ascending."""
    if axis == "row":
        extent = pair.grid.shape[0]
    elif axis == "col":
        extent = pair.grid.shape[1]
    else:
        raise ConfigError(f"axis must be 'row' or 'col', got {axis!r}")
    return _patch_edges(extent, pair.n)[1:-1]


def build_grid_masks(height: int, width: int, n: int) -> GridMaskPair:
    """Complementary checkerboard masks over an n x n patch partition."""
    if n < 2:
        raise ConfigError(f"patches per side must be >= 2, got {n}")
    if height < n or width < n:
        raise ConfigError(
            f"canvas {height}x{width} cannot hold {n}x{n} patches")
    grid = np.zeros((height, width, 1), dtype=np.float64)
    row_edges = _patch_edges(height, n)
    col_edges = _patch_edges(width, n)
    for r in range(n):
        for c in range(n):
            if (r + c) % 2 == 0:
                grid[row_edges[r]:row_edges[r + 1],
                     col_edges[c]:col_edges[c + 1], :] = 1.0
    return GridMaskPair(grid=freeze(grid), reversed_=freeze(1.0 - grid), n=n)


def expand_mask(mask: np.ndarray, channels: int) -> np.ndarray:
    """Replicate a single-channel (H, W, 1) mask across image channels."""
    if mask.ndim != 3 or mask.shape[2] != 1:
        raise DimensionError(f"expected (H, W, 1) mask, got {mask.shape}")
    return np.repeat(mask, channels, axis=2)


def ensemble_recombine(current: np.ndarray, initial: np.ndarray,
                       pair: GridMaskPair, phase: Phase) -> np.ndarray:
    """Keep `current` on the active half of the grid, `initial` on the rest.

    GRID_ACTIVE:     current * M_g  + initial * M_rg
    REVERSED_ACTIVE: current * M_rg + initial * M_g

    What "initial" means per phase is the caller's schedule decision: the
    run loop passes the start-of-run perturbation in phase 1 and, in the
    default preserving mode, the phase-1 result in phase 2.
    """
    if current.shape != initial.shape:
        raise DimensionError(
            f"ensemble_recombine: shape mismatch {current.shape} vs {initial.shape}")
    channels = current.shape[2]
    if phase is Phase.GRID_ACTIVE:
        active, inactive = pair.grid, pair.reversed_
    else:
        active, inactive = pair.reversed_, pair.grid
    active = expand_mask(active, channels)
    inactive = expand_mask(inactive, channels)
    if active.shape != current.shape:
        raise DimensionError(
            f"ensemble_recombine: mask {pair.grid.shape} does not cover "
            f"tensor {current.shape}")
    return lincomb(1.0, hadamard(current, active), 1.0, hadamard(initial, inactive))

"""2-D shift operators and their inverses.

Two modes are supported. Cyclic shifts wrap around the image borders and are
exactly invertible. Replicate-pad shifts grow the image by duplicating the
first row/column, which displaces the original content toward the bottom
right; the inverse crops the added border away.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidShift
from .imaging import require_image

__all__ = ["ShiftMode", "ShiftSpec", "apply_shift", "apply_inverse_shift", "standard_shift_grid"]


class ShiftMode(enum.Enum):
    CYCLIC = 0
    REPLICATE_PAD = 1


@dataclass(frozen=True)
class ShiftSpec:
    """A 2-D displacement: dy (downward positive), dx (rightward positive)."""

    dy: int
    dx: int
    mode: ShiftMode

    def __post_init__(self):
        if self.mode is ShiftMode.REPLICATE_PAD and (self.dy < 0 or self.dx < 0):
            raise InvalidShift(
                f"replicate-pad shifts require dy, dx >= 0, got ({self.dy}, {self.dx})"
            )


def apply_shift(img: np.ndarray, s: ShiftSpec) -> np.ndarray:
    """Apply a forward shift.

    Cyclic: same dimensions; output row r, column c holds the input sample at
    row (r + dy) mod H, column (c + dx) mod W.

    Replicate-pad: output is (H + dy) x (W + dx); the input occupies the
    bottom-right H x W region, the left dx columns duplicate the first input
    column and the top dy rows duplicate the first row of the column-padded
    result (so the corner holds the input's top-left sample).
    """
    arr = require_image(img)
    if s.mode is ShiftMode.CYCLIC:
        return np.roll(arr, (-s.dy, -s.dx), axis=(0, 1))
    return np.pad(arr, ((s.dy, 0), (s.dx, 0)), mode="edge")


def apply_inverse_shift(img: np.ndarray, s: ShiftSpec, original_dims: tuple[int, int]) -> np.ndarray:
    """Undo :func:`apply_shift`; exact identity on the original support."""
    arr = require_image(img)
    h, w = original_dims
    if s.mode is ShiftMode.CYCLIC:
        if arr.shape != (h, w):
            raise InvalidShift(f"cyclic inverse expects dims {(h, w)}, got {arr.shape}")
        return np.roll(arr, (s.dy, s.dx), axis=(0, 1))
    if arr.shape != (h + s.dy, w + s.dx):
        raise InvalidShift(
            f"replicate-pad inverse expects dims {(h + s.dy, w + s.dx)}, got {arr.shape}"
        )
    return arr[s.dy :, s.dx :].copy()


def standard_shift_grid(K: int) -> list[ShiftSpec]:
    """Preset replicate-pad shift sets for 4 or 9 packets.

    K=4 yields offsets (0,0), (3,0), (0,3), (3,3); K=9 yields the 3x3 grid of
    offsets (3*i, 3*j) for i, j in {0, 1, 2}, row-major.
    """
    if K == 4:
        offsets = [(0, 0), (3, 0), (0, 3), (3, 3)]
    elif K == 9:
        offsets = [(3 * i, 3 * j) for i in range(3) for j in range(3)]
    else:
        raise InvalidConfig(f"no standard shift grid for K={K} (supported: 4, 9)")
    return [ShiftSpec(dy, dx, ShiftMode.REPLICATE_PAD) for dy, dx in offsets]

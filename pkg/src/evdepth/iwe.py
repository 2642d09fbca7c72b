"""Images of warped events: splatting and multi-scale pyramids.

Accumulation counts unit event mass per pixel.  Bilinear splatting is the
default because the sub-pixel warp offsets carry the focus signal; nearest
rounding quantizes it away.  Pyramids use 2x2 block sums so event mass is
conserved at every scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Iwe:
    """Event mass per pixel under one depth hypothesis."""
    grid: np.ndarray          # (H, W) float64, all >= 0
    d: float                  # depth hypothesis the warp used (m)
    discarded: int            # events whose warped position fell out of bounds

    @property
    def mass(self) -> float:
        return float(self.grid.sum())


@dataclass(frozen=True)
class IwePyramid:
    levels: tuple[Iwe, ...]   # levels[0] is full resolution

    def __len__(self) -> int:
        return len(self.levels)


def accumulate(warped: np.ndarray, resolution: tuple[int, int],
               splat: str = "bilinear", d: float = 0.0,
               weights: np.ndarray | None = None) -> Iwe:
    """Splat warped (x, y) coordinates onto a (height, width) grid.

    Each in-bounds event contributes unit mass (or its entry of ``weights``);
    out-of-bounds events are dropped and tallied.  With bilinear splatting an
    event is in bounds when all four neighbor pixels exist.
    """
    w, h = resolution
    if w < 1 or h < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    x = warped[:, 0]
    y = warped[:, 1]
    n = x.shape[0]
    grid = np.zeros(h * w, dtype=np.float64)

    if splat == "nearest":
        xi = np.rint(x).astype(np.int64)
        yi = np.rint(y).astype(np.int64)
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        wts = np.ones(n, dtype=np.float64) if weights is None else weights
        grid += np.bincount(yi[ok] * w + xi[ok], weights=wts[ok], minlength=h * w)
        kept = int(ok.sum())
    elif splat == "bilinear":
        ok = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
        xk = x[ok]
        yk = y[ok]
        wts = np.ones(xk.shape[0], dtype=np.float64) if weights is None else weights[ok]
        x0 = np.floor(xk).astype(np.int64)
        y0 = np.floor(yk).astype(np.int64)
        fx = xk - x0
        fy = yk - y0
        # Clamp the far corner so x == w-1 (weight 0 there) stays indexable.
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        for yy, xx, ww in ((y0, x0, (1 - fx) * (1 - fy)),
                           (y0, x1, fx * (1 - fy)),
                           (y1, x0, (1 - fx) * fy),
                           (y1, x1, fx * fy)):
            grid += np.bincount(yy * w + xx, weights=wts * ww, minlength=h * w)
        kept = int(ok.sum())
    else:
        raise ValueError(f"unknown splat mode {splat!r}")

    return Iwe(grid=grid.reshape(h, w), d=d, discarded=n - kept)


def block_sum(grid: np.ndarray) -> np.ndarray:
    """2x2 block sum; odd trailing rows/columns fold into the last block."""
    h, w = grid.shape
    if h % 2 or w % 2:
        padded = np.zeros((h + h % 2, w + w % 2), dtype=grid.dtype)
        padded[:h, :w] = grid
        grid = padded
        h, w = grid.shape
    return grid.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))


def build_pyramid(base: Iwe, num_scales: int) -> IwePyramid:
    """Stack of block-sum halvings; level 0 is ``base`` itself."""
    if num_scales < 1:
        raise ValueError(f"num_scales must be >= 1, got {num_scales}")
    h, w = base.grid.shape
    factor = 2 ** (num_scales - 1)
    if h < factor or w < factor:
        raise ValueError(
            f"grid {h}x{w} too small for {num_scales} scales (needs >= {factor})")
    levels = [base]
    for _ in range(1, num_scales):
        prev = levels[-1]
        levels.append(Iwe(grid=block_sum(prev.grid), d=base.d,
                          discarded=base.discarded))
    return IwePyramid(levels=tuple(levels))

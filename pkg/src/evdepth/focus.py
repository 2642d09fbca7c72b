"""Focus scoring of warped-event images.

The primary scorer is a deterministic gradient-energy operator: a stack of
first/second-order gradient maps, a weighted absolute-value combination, and
a windowed root-sum-of-squares aggregation.  The four classic contrast
objectives (variance, squared timestamp image, sum of exponentials, sum of
suppressed accumulations) are provided as scalar baselines; all kinds share
the maximize-is-focused convention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .iwe import Iwe, accumulate

CHANNELS = ("x", "y", "xx", "yy", "xy", "xxyy")
OBJECTIVE_KINDS = ("fcd", "var", "sti", "soe", "sosa")
# Kinds with a non-negative per-pixel score map, usable for cost volumes.
VOLUME_KINDS = ("fcd", "var", "soe")


@dataclass(frozen=True)
class GradientStack:
    """First- and second-order gradient maps of one IWE."""
    gx: np.ndarray
    gy: np.ndarray
    gxx: np.ndarray
    gyy: np.ndarray
    gxy: np.ndarray
    gxxyy: np.ndarray         # elementwise gxx * gyy

    def as_tuple(self):
        return (self.gx, self.gy, self.gxx, self.gyy, self.gxy, self.gxxyy)


@dataclass(frozen=True)
class FocusWeights:
    """One weight per gradient channel, in CHANNELS order."""
    values: tuple[float, float, float, float, float, float] = (1.0,) * 6

    def __post_init__(self):
        if len(self.values) != 6:
            raise ValueError(f"expected 6 channel weights, got {len(self.values)}")
        if not any(w != 0 for w in self.values):
            raise ValueError("at least one channel weight must be nonzero")


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel focus score (higher = more focused) for one hypothesis."""
    values: np.ndarray
    radius: int


@dataclass(frozen=True)
class FocusConfig:
    kind: str = "fcd"
    weights: FocusWeights = FocusWeights()
    window_radius: int = 5
    sosa_lambda: float = 1.0

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.window_radius < 1 or self.window_radius % 2 == 0:
            raise ValueError(f"window radius must be odd >= 1, got {self.window_radius}")


def _second_difference(grid: np.ndarray, axis: int) -> np.ndarray:
    """Central second difference, one-sided (forward/backward) at borders."""
    g = np.moveaxis(grid, axis, 0)
    out = np.empty_like(g)
    out[1:-1] = g[2:] - 2 * g[1:-1] + g[:-2]
    out[0] = g[0] - 2 * g[1] + g[2]
    out[-1] = g[-1] - 2 * g[-2] + g[-3]
    return np.moveaxis(out, 0, axis)


def gradient_stack(grid: np.ndarray) -> GradientStack:
    """Six-channel gradient stack; needs at least a 3x3 grid.

    First order uses central differences (one-sided at borders, matching
    np.gradient); the mixed term is the v-gradient of gx.
    """
    h, w = grid.shape
    if h < 3 or w < 3:
        raise ValueError(f"grid {h}x{w} too small for gradients (needs >= 3x3)")
    # axis 0 is v (rows), axis 1 is u (columns)
    gx = np.gradient(grid, axis=1)
    gy = np.gradient(grid, axis=0)
    gxx = _second_difference(grid, axis=1)
    gyy = _second_difference(grid, axis=0)
    gxy = np.gradient(gx, axis=0)
    return GradientStack(gx=gx, gy=gy, gxx=gxx, gyy=gyy, gxy=gxy,
                         gxxyy=gxx * gyy)


def combine(stack: GradientStack, weights: FocusWeights) -> np.ndarray:
    """Weighted sum of absolute channel maps.  Absolute values stop signed
    derivatives from cancelling; the squaring happens in window_energy."""
    maps = stack.as_tuple()
    out = np.zeros_like(maps[0])
    for w, m in zip(weights.values, maps):
        if w != 0:
            out += w * np.abs(m)
    return out


def box_window_sum(grid: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the r x r window centered at each pixel, clipped at borders.

    ``radius`` is the window side r (odd); implemented with an integral image.
    """
    if radius < 1 or radius % 2 == 0:
        raise ValueError(f"window side must be odd >= 1, got {radius}")
    if radius == 1:
        return grid.copy()
    h, w = grid.shape
    half = radius // 2
    sat = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(grid, axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    v = np.arange(h)[:, None]
    u = np.arange(w)[None, :]
    v0 = np.maximum(v - half, 0)
    v1 = np.minimum(v + half + 1, h)
    u0 = np.maximum(u - half, 0)
    u1 = np.minimum(u + half + 1, w)
    return sat[v1, u1] - sat[v0, u1] - sat[v1, u0] + sat[v0, u0]


def window_energy(combined: np.ndarray, radius: int) -> ScoreMap:
    """Root of the windowed sum of squares: C(p) = sqrt(sum_window R(q)^2)."""
    values = np.sqrt(np.maximum(box_window_sum(combined * combined, radius), 0.0))
    return ScoreMap(values=values, radius=radius)


def fcd_score_map(grid: np.ndarray, config: FocusConfig) -> np.ndarray:
    return window_energy(combine(gradient_stack(grid), config.weights),
                         config.window_radius).values


def volume_score_map(grid: np.ndarray, config: FocusConfig) -> np.ndarray:
    """Per-pixel score map used to build cost volumes.

    fcd is the native map; var and soe use the windowed sum of their
    per-pixel contributions.  sti and sosa have no non-negative local form
    and stay scalar-only.
    """
    if config.kind == "fcd":
        return fcd_score_map(grid, config)
    if config.kind == "var":
        dev = grid - grid.mean()
        return box_window_sum(dev * dev, config.window_radius)
    if config.kind == "soe":
        return box_window_sum(np.expm1(grid), config.window_radius)
    raise ValueError(f"objective {config.kind!r} has no per-pixel score map; "
                     f"choose one of {VOLUME_KINDS}")


def mean_timestamp_image(iwe: Iwe, warped: np.ndarray, offsets: np.ndarray,
                         splat: str = "bilinear") -> np.ndarray:
    """Per-pixel mean time offset of the events splatted there (0 if none)."""
    h, w = iwe.grid.shape
    weighted = accumulate(warped, (w, h), splat=splat, d=iwe.d,
                          weights=offsets.astype(np.float64))
    out = np.zeros((h, w), dtype=np.float64)
    np.divide(weighted.grid, iwe.grid, out=out, where=iwe.grid > 0)
    return out


def objective(iwe: Iwe, config: FocusConfig, warped: np.ndarray | None = None,
              offsets: np.ndarray | None = None,
              splat: str = "bilinear") -> float:
    """Scalar focus score of one IWE; higher = more focused for every kind."""
    grid = iwe.grid
    kind = config.kind
    if kind == "fcd":
        return float(fcd_score_map(grid, config).sum())
    if kind == "var":
        return float(grid.var())
    if kind == "soe":
        return float(np.expm1(grid).sum())
    if kind == "sosa":
        return float(np.exp(-config.sosa_lambda * grid).sum())
    if kind == "sti":
        if warped is None or offsets is None:
            raise ValueError("sti needs the warped coordinates and time offsets")
        tbar = mean_timestamp_image(iwe, warped, offsets, splat=splat)
        return float(-(tbar * tbar).sum())
    raise ValueError(f"unknown objective kind {kind!r}")

"""Plane-sweep cost volumes: construction, aggregation, depth extraction.

For every depth hypothesis the window is warped, accumulated, pyramided,
and scored per pixel; the per-scale score volumes are then refined by an
along-hypothesis trend filter, fused across scales, and read out by
winner-take-all with sub-bin parabolic refinement in inverse depth.

Hypothesis slices are independent, so the sweep parallelizes across a
process pool; every hypothesis is computed by the same code path on the
same inputs regardless of worker count, which keeps results bitwise
deterministic.
"""
from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, field, replace

import numpy as np

from .events import EventWindow
from .focus import FocusConfig, box_window_sum, volume_score_map
from .iwe import accumulate, build_pyramid
from .motion import CameraIntrinsics, VelocitySample, motion_field

DEPTH_SENTINEL = -1.0

# DepthMap.flags values
FLAG_INVALID = 0
FLAG_MEASURED = 1
FLAG_FILLED = 2


@dataclass(frozen=True)
class HypothesisSet:
    """Ordered metric depth candidates of the sweep."""
    depths: np.ndarray        # strictly increasing, all > 0
    mode: str                 # "inverse" or "linear"
    d_min: float
    d_max: float

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64)
        object.__setattr__(self, "depths", d)
        if d.size < 1:
            raise ValueError("need at least 1 depth hypothesis")
        if not (d > 0).all():
            raise ValueError("all depth hypotheses must be positive")
        if not (np.diff(d) > 0).all():
            raise ValueError("depth hypotheses must be strictly increasing")

    def __len__(self) -> int:
        return len(self.depths)

    @property
    def inverse(self) -> np.ndarray:
        """Hypotheses in inverse-depth coordinates (decreasing)."""
        return 1.0 / self.depths

    def bin_of(self, depth) -> np.ndarray:
        """Index of the hypothesis whose inverse-depth cell contains ``depth``."""
        q = self.inverse
        mids = 0.5 * (q[1:] + q[:-1])          # decreasing
        target = 1.0 / np.asarray(depth, dtype=np.float64)
        # number of midpoints strictly above target = index of nearest bin
        return np.searchsorted(-mids, -target, side="right").astype(np.int64)

    def matches(self, other: "HypothesisSet") -> bool:
        return len(self) == len(other) and bool(np.array_equal(self.depths, other.depths))


def inverse_depth_hypotheses(d_min: float, d_max: float, count: int) -> HypothesisSet:
    """Sampling uniform in 1/d: flow magnitude is linear in inverse depth,
    so each bin covers the same flow resolution."""
    if not (0 < d_min < d_max):
        raise ValueError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
    inv = np.linspace(1.0 / d_min, 1.0 / d_max, count)
    return HypothesisSet(depths=1.0 / inv, mode="inverse", d_min=d_min, d_max=d_max)


def linear_hypotheses(d_min: float, d_max: float, count: int) -> HypothesisSet:
    if not (0 < d_min < d_max):
        raise ValueError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
    return HypothesisSet(depths=np.linspace(d_min, d_max, count), mode="linear",
                         d_min=d_min, d_max=d_max)


@dataclass(frozen=True)
class CostVolume:
    """Per-pixel focus scores over hypotheses at one pyramid scale."""
    scores: np.ndarray        # (D, H, W), higher = better
    hypotheses: HypothesisSet
    scale: int = 0

    def __post_init__(self):
        if self.scores.ndim != 3 or self.scores.shape[0] != len(self.hypotheses):
            raise ValueError(f"score volume shape {self.scores.shape} does not "
                             f"match {len(self.hypotheses)} hypotheses")


@dataclass(frozen=True)
class DepthMap:
    depth: np.ndarray         # (H, W) meters, DEPTH_SENTINEL where not valid
    valid: np.ndarray         # (H, W) bool, pixel had event support
    confidence: np.ndarray    # (H, W) peak-to-mean score ratio
    flags: np.ndarray         # (H, W) uint8: 0 invalid, 1 measured, 2 filled
    hypotheses: HypothesisSet


@dataclass(frozen=True)
class SweepResult:
    volumes: list[CostVolume]       # one per pyramid scale
    support: np.ndarray             # (D, H, W) float32 windowed event mass
    discarded: np.ndarray           # (D,) out-of-bounds tally per hypothesis
    mass: np.ndarray                # (D,) in-bounds event mass per hypothesis


@dataclass(frozen=True)
class SweepConfig:
    focus: FocusConfig = field(default_factory=FocusConfig)
    num_scales: int = 3
    splat: str = "bilinear"
    workers: int = 1

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class AggregationConfig:
    scale_weights: tuple[float, ...] | None = None   # None = equal
    trend_iterations: int = 1
    peak_alpha: float = 0.7
    min_support: float = 0.5
    fill: str = "none"
    fill_radius: int = 5


# ---------------------------------------------------------------------------
# Sweep execution

def _sweep_chunk(task):
    """Score a contiguous chunk of hypotheses (runs inside a worker)."""
    (off, u, v, resolution, intr_args, vel_args, depths, focus_cfg,
     num_scales, splat) = task
    intr = CameraIntrinsics(*intr_args)
    vel = VelocitySample(*vel_args)
    w, h = resolution
    m = len(depths)
    scores = None
    support = np.empty((m, h, w), dtype=np.float32)
    discarded = np.empty(m, dtype=np.int64)
    mass = np.empty(m, dtype=np.float64)
    warped = np.empty((len(u), 2), dtype=np.float64)
    for j, d in enumerate(depths):
        flow = motion_field(intr, vel, d)
        per_event = flow[v, u]
        warped[:, 0] = u + per_event[:, 0] * off
        warped[:, 1] = v + per_event[:, 1] * off
        iwe = accumulate(warped, resolution, splat=splat, d=d)
        pyramid = build_pyramid(iwe, num_scales)
        if scores is None:
            scores = [np.empty((m, *lvl.grid.shape), dtype=np.float64)
                      for lvl in pyramid.levels]
        for k, lvl in enumerate(pyramid.levels):
            scores[k][j] = volume_score_map(lvl.grid, focus_cfg)
        support[j] = box_window_sum(iwe.grid, focus_cfg.window_radius)
        discarded[j] = iwe.discarded
        mass[j] = iwe.mass
    return scores, support, discarded, mass


_POOLS: dict[int, "mp.pool.Pool"] = {}


def _get_pool(workers: int):
    """Process pools are cached per size; fork keeps start-up cheap."""
    pool = _POOLS.get(workers)
    if pool is None:
        pool = mp.get_context("fork").Pool(processes=workers)
        _POOLS[workers] = pool
    return pool


def shutdown_pools() -> None:
    for pool in _POOLS.values():
        pool.terminate()
        pool.join()
    _POOLS.clear()


def build_volume(window: EventWindow, intrinsics: CameraIntrinsics,
                 velocity: VelocitySample, hypotheses: HypothesisSet,
                 config: SweepConfig = SweepConfig()) -> SweepResult:
    """Run the full hypothesis sweep; returns one score volume per scale."""
    min_dim = min(intrinsics.height, intrinsics.width)
    if min_dim // 2 ** (config.num_scales - 1) < 3:
        raise ValueError(f"{config.num_scales} scales leave the coarsest level "
                         f"below the 3x3 gradient minimum for {min_dim}px")
    off = window.offsets
    u = window.events["u"].astype(np.int64)
    v = window.events["v"].astype(np.int64)
    depths = hypotheses.depths
    intr_args = (intrinsics.f, intrinsics.cu, intrinsics.cv,
                 intrinsics.width, intrinsics.height)
    vel_args = (velocity.t, velocity.linear, velocity.angular)

    chunks = np.array_split(depths, min(config.workers, len(depths)))
    tasks = [(off, u, v, intrinsics.resolution, intr_args, vel_args, chunk,
              config.focus, config.num_scales, config.splat)
             for chunk in chunks if len(chunk)]
    if config.workers == 1:
        results = [_sweep_chunk(t) for t in tasks]
    else:
        results = _get_pool(config.workers).map(_sweep_chunk, tasks)

    volumes = [CostVolume(scores=np.concatenate([r[0][k] for r in results]),
                          hypotheses=hypotheses, scale=k)
               for k in range(config.num_scales)]
    support = np.concatenate([r[1] for r in results])
    discarded = np.concatenate([r[2] for r in results])
    mass = np.concatenate([r[3] for r in results])
    return SweepResult(volumes=volumes, support=support, discarded=discarded,
                       mass=mass)


def objective_sweep(window: EventWindow, intrinsics: CameraIntrinsics,
                    velocity: VelocitySample, hypotheses: HypothesisSet,
                    focus_cfg: FocusConfig, splat: str = "bilinear") -> np.ndarray:
    """Scalar objective value at every hypothesis (any objective kind)."""
    from .focus import objective

    off = window.offsets
    u = window.events["u"].astype(np.int64)
    v = window.events["v"].astype(np.int64)
    out = np.empty(len(hypotheses), dtype=np.float64)
    for i, d in enumerate(hypotheses.depths):
        flow = motion_field(intrinsics, velocity, d)
        per_event = flow[v, u]
        warped = np.stack([u + per_event[:, 0] * off,
                           v + per_event[:, 1] * off], axis=1)
        iwe = accumulate(warped, intrinsics.resolution, splat=splat, d=d)
        out[i] = objective(iwe, focus_cfg, warped=warped, offsets=off, splat=splat)
    return out


# ---------------------------------------------------------------------------
# Inter-hypothesis aggregation

def trend_filter(volume: CostVolume, iterations: int = 1,
                 peak_alpha: float = 0.7) -> CostVolume:
    """Smooth each pixel's score curve along the hypothesis axis and knock
    out weak secondary peaks.

    Smoothing applies the (1, 2, 1)/4 kernel with replicated endpoints
    ``iterations`` times.  A single suppression pass then replaces every
    strict interior local maximum below ``peak_alpha`` times the curve's
    global maximum with the average of its neighbors.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    s = volume.scores
    for _ in range(iterations):
        padded = np.concatenate([s[:1], s, s[-1:]], axis=0)
        s = (padded[:-2] + 2.0 * padded[1:-1] + padded[2:]) * 0.25
    if peak_alpha > 0 and s.shape[0] >= 3:
        s = s.copy() if s is volume.scores else s
        inner = s[1:-1]
        weak = ((inner > s[:-2]) & (inner > s[2:])
                & (inner < peak_alpha * s.max(axis=0)[None]))
        inner[weak] = (0.5 * (s[:-2] + s[2:]))[weak]
    return replace(volume, scores=s)


def _normalize_curves(scores: np.ndarray) -> np.ndarray:
    peak = scores.max(axis=0)
    out = np.zeros_like(scores)
    np.divide(scores, peak[None], out=out, where=peak[None] > 0)
    return out


def multiscale_fuse(volumes, scale_weights=None) -> CostVolume:
    """Weighted per-curve-normalized average of the per-scale volumes at
    full resolution (coarse scales upsampled nearest-neighbor)."""
    if not volumes:
        raise ValueError("need at least one volume to fuse")
    base = volumes[0]
    d, h, w = base.scores.shape
    if scale_weights is None:
        scale_weights = (1.0,) * len(volumes)
    weights = np.asarray(scale_weights, dtype=np.float64)
    if len(weights) != len(volumes):
        raise ValueError(f"{len(weights)} weights for {len(volumes)} volumes")
    if (weights < 0).any() or weights.sum() <= 0:
        raise ValueError("scale weights must be non-negative with positive sum")

    acc = np.zeros((d, h, w), dtype=np.float64)
    for vol, wk in zip(volumes, weights):
        if not vol.hypotheses.matches(base.hypotheses):
            raise ValueError("hypothesis sets differ across scales")
        for shift in range(h.bit_length() + 1):
            if vol.scores.shape[1:] == (-(-h // 2 ** shift), -(-w // 2 ** shift)):
                break
        else:
            raise ValueError(f"volume shape {vol.scores.shape} is not a "
                             f"power-of-two reduction of {(d, h, w)}")
        norm = _normalize_curves(vol.scores)
        if shift:
            vi = np.arange(h) >> shift
            ui = np.arange(w) >> shift
            norm = norm[:, vi[:, None], ui[None, :]]
        acc += wk * norm
    acc /= weights.sum()
    return CostVolume(scores=acc, hypotheses=base.hypotheses, scale=0)


# ---------------------------------------------------------------------------
# Depth extraction

def extract_depth(volume: CostVolume, support: np.ndarray,
                  min_support: float = 0.5) -> DepthMap:
    """Winner-take-all with sub-bin parabolic refinement in inverse depth.

    ``support`` is the windowed event mass, either (D, H, W) to be gathered
    at each pixel's winning hypothesis or already reduced to (H, W).
    Confidence is the peak-to-mean ratio of each pixel's curve, 1 where the
    curve is flat.
    """
    scores = volume.scores
    d, h, w = scores.shape
    idx = scores.argmax(axis=0)
    vv, uu = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    peak = scores[idx, vv, uu]

    interior = (idx > 0) & (idx < d - 1)
    lo = scores[np.maximum(idx - 1, 0), vv, uu]
    hi = scores[np.minimum(idx + 1, d - 1), vv, uu]
    denom = lo - 2.0 * peak + hi
    offset = np.zeros((h, w), dtype=np.float64)
    refine = interior & (denom < 0)
    offset[refine] = np.clip((lo - hi)[refine] / (2.0 * denom[refine]), -0.5, 0.5)

    q = volume.hypotheses.inverse
    q_at = q[idx]
    step_up = q[np.minimum(idx + 1, d - 1)] - q_at
    step_dn = q_at - q[np.maximum(idx - 1, 0)]
    q_refined = q_at + np.where(offset >= 0, offset * step_up, offset * step_dn)
    depth = 1.0 / q_refined

    if support.ndim == 3:
        support = support[idx, vv, uu]
    valid = support.astype(np.float64) >= min_support

    mean = scores.mean(axis=0)
    confidence = np.ones((h, w), dtype=np.float64)
    np.divide(peak, mean, out=confidence, where=mean > 0)

    depth = np.where(valid, depth, DEPTH_SENTINEL)
    flags = np.where(valid, FLAG_MEASURED, FLAG_INVALID).astype(np.uint8)
    return DepthMap(depth=depth, valid=valid, confidence=confidence,
                    flags=flags, hypotheses=volume.hypotheses)


def fill_depth(depth_map: DepthMap, policy: str = "none",
               radius: int = 5) -> DepthMap:
    """Complete invalid pixels.  ``nearest-valid`` copies the closest
    measured depth; ``median-window`` takes the median of measured depths in
    a (2*radius+1)^2 window and leaves isolated pixels invalid."""
    if policy == "none":
        return depth_map
    holes = ~depth_map.valid
    if not holes.any():
        return depth_map
    depth = depth_map.depth.copy()
    flags = depth_map.flags.copy()
    if policy == "nearest-valid":
        from scipy.ndimage import distance_transform_edt

        _, (iv, iu) = distance_transform_edt(holes, return_indices=True)
        depth[holes] = depth_map.depth[iv[holes], iu[holes]]
        flags[holes] = FLAG_FILLED
    elif policy == "median-window":
        h, w = depth.shape
        ys, xs = np.nonzero(holes)
        for y, x in zip(ys, xs):
            y0, y1 = max(y - radius, 0), min(y + radius + 1, h)
            x0, x1 = max(x - radius, 0), min(x + radius + 1, w)
            patch = depth_map.depth[y0:y1, x0:x1][depth_map.valid[y0:y1, x0:x1]]
            if patch.size:
                depth[y, x] = np.median(patch)
                flags[y, x] = FLAG_FILLED
    else:
        raise ValueError(f"unknown fill policy {policy!r}")
    return DepthMap(depth=depth, valid=depth_map.valid,
                    confidence=depth_map.confidence, flags=flags,
                    hypotheses=depth_map.hypotheses)


# ---------------------------------------------------------------------------
# Whole-window pipeline

def estimate_depth(window: EventWindow, intrinsics: CameraIntrinsics,
                   velocity: VelocitySample, hypotheses: HypothesisSet,
                   sweep: SweepConfig = SweepConfig(),
                   agg: AggregationConfig = AggregationConfig()
                   ) -> tuple[DepthMap, SweepResult, CostVolume]:
    """sweep -> per-scale trend filter -> multi-scale fusion -> extraction."""
    result = build_volume(window, intrinsics, velocity, hypotheses, sweep)
    filtered = [trend_filter(vol, agg.trend_iterations, agg.peak_alpha)
                for vol in result.volumes]
    fused = multiscale_fuse(filtered, agg.scale_weights)
    depth_map = extract_depth(fused, result.support, agg.min_support)
    if agg.fill != "none":
        depth_map = fill_depth(depth_map, agg.fill, agg.fill_radius)
    return depth_map, result, fused

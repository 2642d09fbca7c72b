"""Depth-hypothesis motion fields, event warping, and velocity handling.

The per-pixel image velocity under a candidate depth d combines a 1/d-scaled
translational term with a depth-independent rotational term:

    du = (1/d) * (-f*tx + u'*tz) + (1/f) * (u'v'*wx - (f^2+u'^2)*wy + f*v'*wz)
    dv = (1/d) * (-f*ty + v'*tz) + (1/f) * ((f^2+v'^2)*wx - u'v'*wy - f*u'*wz)

with u' = u - cu, v' = v - cv.  Events are warped to the window's reference
time by a single linear step: p_warped = p + flow(p) * (t - t_ref), the flow
sampled at each event's original integer pixel.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import EventWindow


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (0 < self.cu < self.width and 0 < self.cv < self.height):
            raise ValueError("principal point must lie inside the sensor")

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.width, self.height)


@dataclass(frozen=True)
class VelocitySample:
    """Linear velocity T (m/s) and angular velocity omega (rad/s) at time t."""
    t: float
    linear: tuple[float, float, float]
    angular: tuple[float, float, float]

    def __post_init__(self):
        vals = (self.t, *self.linear, *self.angular)
        if not all(np.isfinite(vals)):
            raise ValueError(f"velocity sample has non-finite components: {self}")


@dataclass(frozen=True)
class CameraRig:
    intrinsics: CameraIntrinsics
    track: tuple[VelocitySample, ...]

    def __post_init__(self):
        ts = [s.t for s in self.track]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("velocity track timestamps must be strictly increasing")


def pixel_offsets(intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Principal-point-centered coordinates (u', v') on the sensor grid."""
    u = np.arange(intrinsics.width, dtype=np.float64) - intrinsics.cu
    v = np.arange(intrinsics.height, dtype=np.float64) - intrinsics.cv
    return np.meshgrid(u, v)


def motion_field(intrinsics: CameraIntrinsics, velocity: VelocitySample,
                 d: float) -> np.ndarray:
    """Per-pixel flow (px/s) for depth hypothesis d, shape (H, W, 2).

    The translational part scales with 1/d; the rotational part is
    depth-independent, so pure rotation yields the same field at every d.
    """
    if not d > 0:
        raise ValueError(f"depth hypothesis must be positive, got {d}")
    f = intrinsics.f
    tx, ty, tz = velocity.linear
    wx, wy, wz = velocity.angular
    up, vp = pixel_offsets(intrinsics)

    flow = np.empty((intrinsics.height, intrinsics.width, 2), dtype=np.float64)
    upvp = up * vp
    flow[..., 0] = (-f * tx + up * tz) / d \
        + (upvp * wx - (f * f + up * up) * wy + f * vp * wz) / f
    flow[..., 1] = (-f * ty + vp * tz) / d \
        + ((f * f + vp * vp) * wx - upvp * wy - f * up * wz) / f
    return flow


def warp_events(window: EventWindow, flow: np.ndarray) -> np.ndarray:
    """Warp every event to t_ref; returns (N, 2) sub-pixel (x, y) coordinates.

    Out-of-bounds results pass through untouched; accumulation decides
    their fate.
    """
    h, w = flow.shape[:2]
    u = window.events["u"]
    v = window.events["v"]
    if u.size and (u.max() >= w or v.max() >= h):
        raise ValueError("flow field does not cover the event coordinates")
    dt = window.offsets
    per_event = flow[v, u]
    out = np.empty((len(window), 2), dtype=np.float64)
    out[:, 0] = u + per_event[:, 0] * dt
    out[:, 1] = v + per_event[:, 1] * dt
    return out


# ---------------------------------------------------------------------------
# Velocity track interpolation and the noise-ablation model.

def _track_arrays(track) -> tuple[np.ndarray, np.ndarray]:
    ts = np.array([s.t for s in track], dtype=np.float64)
    vals = np.array([[*s.linear, *s.angular] for s in track], dtype=np.float64)
    return ts, vals


def interpolate_velocity(track, t_a: float, t_b: float) -> VelocitySample:
    """Component-wise time-average over [t_a, t_b] of the piecewise-linear
    interpolant; outside the track the nearest sample is held constant."""
    if len(track) == 0:
        raise ValueError("velocity track is empty")
    if t_b < t_a:
        raise ValueError(f"bad interval: t_a={t_a} > t_b={t_b}")
    ts, vals = _track_arrays(track)
    if t_a == t_b:
        avg = np.array([np.interp(t_a, ts, vals[:, k]) for k in range(6)])
    else:
        inner = ts[(ts > t_a) & (ts < t_b)]
        grid = np.concatenate(([t_a], inner, [t_b]))
        avg = np.empty(6)
        for k in range(6):
            y = np.interp(grid, ts, vals[:, k])
            avg[k] = np.trapezoid(y, grid) / (t_b - t_a)
    t_mid = 0.5 * (t_a + t_b)
    return VelocitySample(t=t_mid, linear=tuple(avg[:3]), angular=tuple(avg[3:]))


def average_velocity_norms(track, t_a: float, t_b: float,
                           steps: int = 1024) -> tuple[float, float]:
    """Time-averaged ||T|| and ||omega|| over [t_a, t_b].

    The norm of a piecewise-linear track has no simple closed form, so this
    integrates on a fixed fine grid (deterministic, plenty for a noise scale).
    """
    if len(track) == 0:
        raise ValueError("velocity track is empty")
    ts, vals = _track_arrays(track)
    if t_a == t_b:
        at = np.array([np.interp(t_a, ts, vals[:, k]) for k in range(6)])
        return float(np.linalg.norm(at[:3])), float(np.linalg.norm(at[3:]))
    grid = np.linspace(t_a, t_b, steps + 1)
    interp = np.stack([np.interp(grid, ts, vals[:, k]) for k in range(6)], axis=1)
    lin = np.linalg.norm(interp[:, :3], axis=1)
    ang = np.linalg.norm(interp[:, 3:], axis=1)
    span = t_b - t_a
    return (float(np.trapezoid(lin, grid) / span),
            float(np.trapezoid(ang, grid) / span))


def inject_velocity_noise(velocity: VelocitySample, level: float, seed: int,
                          linear_norm: float | None = None,
                          angular_norm: float | None = None) -> VelocitySample:
    """Add zero-mean Gaussian noise: sigma = level * ||T|| per linear component
    and level * ||omega|| per angular component.

    Pass ``linear_norm``/``angular_norm`` to use norms averaged over a window
    interval instead of this sample's own.  Deterministic per (seed, level);
    Philox is counter-based, so parallel callers share no state.
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    if level == 0:
        return velocity
    t_norm = float(np.linalg.norm(velocity.linear)) if linear_norm is None else linear_norm
    w_norm = float(np.linalg.norm(velocity.angular)) if angular_norm is None else angular_norm
    rng = np.random.Generator(np.random.Philox(key=seed))
    noise = rng.standard_normal(6)
    lin = np.asarray(velocity.linear) + level * t_norm * noise[:3]
    ang = np.asarray(velocity.angular) + level * w_norm * noise[3:]
    return VelocitySample(t=velocity.t, linear=tuple(lin), angular=tuple(ang))


# ---------------------------------------------------------------------------
# File formats: JSON camera config, whitespace-separated velocity track.

def load_camera(path: str | Path) -> CameraIntrinsics:
    with open(path) as fh:
        cfg = json.load(fh)
    try:
        return CameraIntrinsics(f=float(cfg["f"]), cu=float(cfg["cu"]),
                                cv=float(cfg["cv"]), width=int(cfg["width"]),
                                height=int(cfg["height"]))
    except KeyError as exc:
        raise ValueError(f"camera config {path} missing key {exc}") from exc


def save_camera(path: str | Path, intrinsics: CameraIntrinsics) -> None:
    with open(path, "w") as fh:
        json.dump({"f": intrinsics.f, "cu": intrinsics.cu, "cv": intrinsics.cv,
                   "width": intrinsics.width, "height": intrinsics.height},
                  fh, indent=2)
        fh.write("\n")


def load_track(path: str | Path) -> tuple[VelocitySample, ...]:
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [float(x) for x in line.split()]
            if len(parts) != 7:
                raise ValueError(
                    f"{path}:{lineno}: expected 't tx ty tz wx wy wz'")
            samples.append(VelocitySample(t=parts[0], linear=tuple(parts[1:4]),
                                          angular=tuple(parts[4:7])))
    return tuple(samples)


def save_track(path: str | Path, track) -> None:
    with open(path, "w") as fh:
        fh.write("# t tx ty tz wx wy wz\n")
        for s in track:
            vals = " ".join(repr(float(x)) for x in (*s.linear, *s.angular))
            fh.write(f"{s.t!r} {vals}\n")

"""Triplex algebra, Mandelbulb distance estimation and sphere tracing.

Two power formulas are supported: the classic spherical-coordinate form
(angles multiplied by n) and a twisted variant where theta comes from
acos(z*x/r) and a blend weight bw mixes the first component. Both feed the
standard escape-time distance estimator 0.5*ln(r)*r/dr, which drives a
sphere-tracing marcher and a deterministic CPU frame renderer.

Scalar functions define the per-point contract; the *_batch functions are
the vectorized equivalents the renderer actually runs on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .mapping import (
    DEFAULT_MAPPING,
    FractalParams,
    oscillated_power,
    triangle_wave,
)

Vec3 = tuple[float, float, float]

VARIANTS = ("classic", "twisted")


@dataclass(frozen=True)
class DEConfig:
    """Distance-estimator settings."""

    power: float = 8.0
    variant: str = "classic"
    bw: float = 0.0
    max_iter: int = 12
    bailout: float = 2.0
    min_radius_guard: float = 1e-12

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected {VARIANTS}")
        if not 2.0 <= self.power <= 10.0:
            raise ValueError(f"power must be in [2, 10], got {self.power}")
        if self.bailout < 2.0:
            raise ValueError(f"bailout must be >= 2, got {self.bailout}")
        if not 4 <= self.max_iter <= 64:
            raise ValueError(f"max_iter must be in [4, 64], got {self.max_iter}")
        if self.min_radius_guard <= 0.0:
            raise ValueError("min_radius_guard must be positive")


@dataclass(frozen=True)
class RenderConfig:
    """Camera and marcher settings for frame rendering.

    camera_pos=None puts the camera on the default orbit: radius orbit_radius
    around the origin, azimuth tied to the loop phase, fixed elevation.
    """

    width: int = 128
    height: int = 128
    camera_pos: Optional[Vec3] = None
    look_at: Vec3 = (0.0, 0.0, 0.0)
    up: Vec3 = (0.0, 1.0, 0.0)
    vfov_deg: float = 60.0
    max_march_steps: int = 128
    surface_epsilon: float = 1e-3
    max_ray_distance: float = 8.0
    step_safety: float = 0.9
    orbit_radius: float = 3.0
    orbit_elevation: float = 0.35

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")
        if self.surface_epsilon <= 0.0:
            raise ValueError("surface_epsilon must be positive")
        if not 0.0 < self.step_safety <= 1.0:
            raise ValueError("step_safety must be in (0, 1]")


@dataclass(frozen=True)
class HitInfo:
    hit: bool
    distance: float
    steps: int
    point: Optional[Vec3] = None
    normal: Optional[Vec3] = None
    iterations: int = 0


# ---------------------------------------------------------------------------
# Triplex power, scalar and batch
# ---------------------------------------------------------------------------

def triplex_pow_classic(p: Vec3, n: float, min_radius_guard: float = 1e-12) -> Vec3:
    """Classic power: r^n * (sin nT cos nP, sin nT sin nP, cos nT).

    T = atan2(sqrt(x^2+y^2), z), P = atan2(y, x). Points inside the radius
    guard map to the origin.
    """
    x, y, z = p
    r = math.sqrt(x * x + y * y + z * z)
    if r < min_radius_guard:
        return (0.0, 0.0, 0.0)
    theta = math.atan2(math.sqrt(x * x + y * y), z)
    phi = math.atan2(y, x)
    rn = r**n
    st, ct = math.sin(n * theta), math.cos(n * theta)
    sp, cp = math.sin(n * phi), math.cos(n * phi)
    return (rn * st * cp, rn * st * sp, rn * ct)


def triplex_pow_twisted(
    p: Vec3, n: float, bw: float, min_radius_guard: float = 1e-12
) -> Vec3:
    """Twisted power: theta = acos(clamp(z*x/r)), blend weight bw on x.

    Output is r^n * ((1-bw) sinT cosP + bw sinT - cosP, sinP sinT, cosT)
    with P = atan2(y, x). The acos argument is clamped into [-1, 1] since
    z*x/r can leave that interval away from the unit sphere.
    """
    x, y, z = p
    r = math.sqrt(x * x + y * y + z * z)
    if r < min_radius_guard:
        return (0.0, 0.0, 0.0)
    theta = math.acos(min(max(z * x / r, -1.0), 1.0))
    phi = math.atan2(y, x)
    rn = r**n
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return (rn * ((1.0 - bw) * st * cp + bw * st - cp), rn * sp * st, rn * ct)


def _triplex_pow_batch(pts: np.ndarray, cfg: DEConfig) -> np.ndarray:
    """Vectorized triplex power for (N, 3) points; same math as the scalars."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    r = np.sqrt(x * x + y * y + z * z)
    tiny = r < cfg.min_radius_guard
    safe_r = np.where(tiny, 1.0, r)
    rn = safe_r**cfg.power
    if cfg.variant == "classic":
        theta = np.arctan2(np.sqrt(x * x + y * y), z)
        phi = np.arctan2(y, x)
        st, ct = np.sin(cfg.power * theta), np.cos(cfg.power * theta)
        sp, cp = np.sin(cfg.power * phi), np.cos(cfg.power * phi)
        out = np.stack([rn * st * cp, rn * st * sp, rn * ct], axis=1)
    else:
        theta = np.arccos(np.clip(z * x / safe_r, -1.0, 1.0))
        phi = np.arctan2(y, x)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        bw = cfg.bw
        out = np.stack(
            [rn * ((1.0 - bw) * st * cp + bw * st - cp), rn * sp * st, rn * ct],
            axis=1,
        )
    out[tiny] = 0.0
    return out


# ---------------------------------------------------------------------------
# Distance estimation
# ---------------------------------------------------------------------------

def mandelbulb_de_batch(points: np.ndarray, cfg: DEConfig) -> tuple[np.ndarray, np.ndarray]:
    """Escape-time distance estimate for (N, 3) points.

    Orbit z <- pow(z) + c with running scalar derivative
    dr <- n * r^(n-1) * dr + 1. The escape check (r > bailout) runs before
    the first update and after every update; points that never escape within
    max_iter updates get distance 0 (treated as inside).

    Returns (distance, iterations) where iterations is the update count at
    escape, or max_iter for inside points.
    """
    c = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    n_pts = len(c)
    dist = np.zeros(n_pts)
    iters = np.full(n_pts, cfg.max_iter, dtype=np.int32)

    z = c.copy()
    dr = np.ones(n_pts)
    idx = np.arange(n_pts)  # indices of still-iterating points
    r = np.sqrt(np.einsum("ij,ij->i", z, z))

    for k in range(cfg.max_iter + 1):
        escaped = r > cfg.bailout
        if escaped.any():
            esc = idx[escaped]
            re = r[escaped]
            dist[esc] = 0.5 * np.log(re) * re / dr[escaped]
            iters[esc] = k
            keep = ~escaped
            idx, z, dr, r = idx[keep], z[keep], dr[keep], r[keep]
        if k == cfg.max_iter or len(idx) == 0:
            break
        dr = cfg.power * r ** (cfg.power - 1.0) * dr + 1.0
        z = _triplex_pow_batch(z, cfg) + c[idx]
        r = np.sqrt(np.einsum("ij,ij->i", z, z))
    return dist, iters


def mandelbulb_de(c: Vec3, cfg: DEConfig) -> float:
    """Non-negative distance estimate at a single point (0 means inside)."""
    dist, _ = mandelbulb_de_batch(np.asarray(c, dtype=np.float64).reshape(1, 3), cfg)
    return float(dist[0])


def mandelbulb_orbit_iterations(c: Vec3, cfg: DEConfig) -> int:
    """Update count until escape, or max_iter if the orbit never escapes."""
    _, iters = mandelbulb_de_batch(np.asarray(c, dtype=np.float64).reshape(1, 3), cfg)
    return int(iters[0])


# ---------------------------------------------------------------------------
# Sphere tracing
# ---------------------------------------------------------------------------

def estimate_normal(de: Callable[[Vec3], float], p: Vec3, h: float) -> Vec3:
    """Unit normal from central differences of the distance field."""
    x, y, z = p
    gx = de((x + h, y, z)) - de((x - h, y, z))
    gy = de((x, y + h, z)) - de((x, y - h, z))
    gz = de((x, y, z + h)) - de((x, y, z - h))
    norm = math.sqrt(gx * gx + gy * gy + gz * gz)
    if norm == 0.0:
        return (0.0, 0.0, 1.0)
    return (gx / norm, gy / norm, gz / norm)


def march(
    origin: Vec3,
    direction: Vec3,
    de: Callable[[Vec3], float],
    rc: RenderConfig,
) -> HitInfo:
    """Sphere-trace one ray through an arbitrary distance field.

    Advances by step_safety * de(p) per step; hits when de < surface_epsilon,
    misses when the travelled distance exceeds max_ray_distance or the step
    budget runs out. `steps` counts distance-field evaluations.
    """
    dx, dy, dz = direction
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |d| = {norm}")
    ox, oy, oz = origin
    t = 0.0
    for steps in range(1, rc.max_march_steps + 1):
        p = (ox + t * dx, oy + t * dy, oz + t * dz)
        d = de(p)
        if d < rc.surface_epsilon:
            normal = estimate_normal(de, p, 2.0 * rc.surface_epsilon)
            return HitInfo(hit=True, distance=t, steps=steps, point=p, normal=normal)
        t += rc.step_safety * d
        if t > rc.max_ray_distance:
            return HitInfo(hit=False, distance=rc.max_ray_distance, steps=steps)
    return HitInfo(hit=False, distance=min(t, rc.max_ray_distance), steps=rc.max_march_steps)


def _march_batch(
    origin: np.ndarray, dirs: np.ndarray, de_cfg: DEConfig, rc: RenderConfig
) -> dict[str, np.ndarray]:
    """Sphere-trace a batch of rays from one origin against the fractal DE."""
    n_rays = len(dirs)
    t = np.zeros(n_rays)
    hit = np.zeros(n_rays, dtype=bool)
    steps = np.zeros(n_rays, dtype=np.int32)
    iters = np.zeros(n_rays, dtype=np.int32)
    alive = np.arange(n_rays)

    for _ in range(rc.max_march_steps):
        if len(alive) == 0:
            break
        pts = origin[None, :] + t[alive, None] * dirs[alive]
        d, it = mandelbulb_de_batch(pts, de_cfg)
        steps[alive] += 1

        hits_now = d < rc.surface_epsilon
        if hits_now.any():
            h = alive[hits_now]
            hit[h] = True
            iters[h] = it[hits_now]
        t[alive] += np.where(hits_now, 0.0, rc.step_safety * d)
        out_of_range = t[alive] > rc.max_ray_distance
        alive = alive[~(hits_now | out_of_range)]

    return {"t": t, "hit": hit, "steps": steps, "iterations": iters}


def _normals_batch(points: np.ndarray, de_cfg: DEConfig, h: float) -> np.ndarray:
    grads = np.empty_like(points)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = h
        d_plus, _ = mandelbulb_de_batch(points + offset, de_cfg)
        d_minus, _ = mandelbulb_de_batch(points - offset, de_cfg)
        grads[:, axis] = d_plus - d_minus
    norms = np.linalg.norm(grads, axis=1, keepdims=True)
    degenerate = norms[:, 0] == 0.0
    norms[degenerate] = 1.0
    grads /= norms
    grads[degenerate] = (0.0, 0.0, 1.0)
    return grads


# ---------------------------------------------------------------------------
# Frame rendering
# ---------------------------------------------------------------------------

_LIGHT_DIR = np.array([0.45, 0.7, -0.55])
_LIGHT_DIR /= np.linalg.norm(_LIGHT_DIR)


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def orbit_camera(rc: RenderConfig, phase: float) -> Vec3:
    """Camera position on the default orbit for a loop phase in [0, 1)."""
    azimuth = 2.0 * math.pi * phase
    ce, se = math.cos(rc.orbit_elevation), math.sin(rc.orbit_elevation)
    return (
        rc.orbit_radius * ce * math.cos(azimuth),
        rc.orbit_radius * se,
        rc.orbit_radius * ce * math.sin(azimuth),
    )


def _camera_rays(rc: RenderConfig, cam_pos: Vec3) -> np.ndarray:
    """Unit ray directions for every pixel, row-major (H*W, 3)."""
    eye = np.asarray(cam_pos, dtype=np.float64)
    fwd = _normalize(np.asarray(rc.look_at, dtype=np.float64) - eye)
    right = np.cross(fwd, np.asarray(rc.up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:  # camera looking along up: pick any frame
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
    right = _normalize(right)
    up = np.cross(right, fwd)

    tan_half = math.tan(math.radians(rc.vfov_deg) / 2.0)
    aspect = rc.width / rc.height
    # pixel centers; +y up in camera space, row 0 is the top of the image
    px = (np.arange(rc.width) + 0.5) / rc.width * 2.0 - 1.0
    py = 1.0 - (np.arange(rc.height) + 0.5) / rc.height * 2.0
    gx, gy = np.meshgrid(px * tan_half * aspect, py * tan_half)
    dirs = (
        fwd[None, :]
        + gx.reshape(-1, 1) * right[None, :]
        + gy.reshape(-1, 1) * up[None, :]
    )
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _background(rc: RenderConfig) -> np.ndarray:
    """Dark radial gradient, brightest at the screen center. (H*W, 3)."""
    px = (np.arange(rc.width) + 0.5) / rc.width * 2.0 - 1.0
    py = (np.arange(rc.height) + 0.5) / rc.height * 2.0 - 1.0
    gx, gy = np.meshgrid(px, py)
    rho = np.clip(np.sqrt(gx * gx + gy * gy) / math.sqrt(2.0), 0.0, 1.0).reshape(-1)
    base = np.array([0.035, 0.04, 0.06])
    return base[None, :] * (1.35 - rho[:, None])


def render_frame(
    params: FractalParams,
    rc: RenderConfig,
    t: float,
    de: DEConfig = DEConfig(),
    phase: Optional[float] = None,
    osc_depth: float = DEFAULT_MAPPING.osc_depth,
) -> np.ndarray:
    """Render one RGB8 frame; identical inputs give byte-identical buffers.

    The fractal exponent and blend weight come from params; variant and
    iteration settings from `de`. The loop phase (camera azimuth + power
    oscillation) is params.loop_freq_hz * t unless given explicitly.

    Returns a (height, width, 3) uint8 array.
    """
    if phase is None:
        phase = (t * params.loop_freq_hz) % 1.0
    power = oscillated_power(params.power, osc_depth * triangle_wave(phase))
    de_cfg = DEConfig(
        power=power,
        variant=de.variant,
        bw=params.bw,
        max_iter=de.max_iter,
        bailout=de.bailout,
        min_radius_guard=de.min_radius_guard,
    )
    cam_pos = rc.camera_pos if rc.camera_pos is not None else orbit_camera(rc, phase)
    dirs = _camera_rays(rc, cam_pos)
    origin = np.asarray(cam_pos, dtype=np.float64)

    result = _march_batch(origin, dirs, de_cfg, rc)
    hit = result["hit"]
    rgb = _background(rc)

    if hit.any():
        hit_pts = origin[None, :] + result["t"][hit, None] * dirs[hit]
        normals = _normals_batch(hit_pts, de_cfg, 2.0 * rc.surface_epsilon)
        lambert = np.clip(normals @ _LIGHT_DIR, 0.0, 1.0)
        occlusion = 1.0 - result["steps"][hit] / rc.max_march_steps
        depth_fade = np.clip(
            result["iterations"][hit] / de_cfg.max_iter, 0.0, 1.0
        )
        brightness = (0.18 + 0.82 * lambert) * (0.3 + 0.7 * occlusion)
        brightness *= 0.75 + 0.25 * depth_fade
        tint = 0.12 + 0.88 * np.asarray(params.color_mix)
        rgb[hit] = tint[None, :] * brightness[:, None]

    img = np.clip(rgb, 0.0, 1.0).reshape(rc.height, rc.width, 3)
    return np.rint(img * 255.0).astype(np.uint8)


def write_png(image: np.ndarray, path) -> None:
    """Write an RGB8 buffer as PNG."""
    from PIL import Image

    if image.size == 0:
        raise ValueError("refusing to write a zero-area image")
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def render_sequence(
    params_at: Callable[[float], tuple[FractalParams, float]],
    rc: RenderConfig,
    times: Sequence[float],
    out_dir,
    de: DEConfig = DEConfig(),
    osc_depth: float = DEFAULT_MAPPING.osc_depth,
) -> list[str]:
    """Render frame_%06d.png for each time; params_at returns (params, phase)."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, t in enumerate(times):
        params, phase = params_at(t)
        img = render_frame(params, rc, t, de=de, phase=phase, osc_depth=osc_depth)
        path = out / f"frame_{i:06d}.png"
        write_png(img, path)
        written.append(str(path))
    return written

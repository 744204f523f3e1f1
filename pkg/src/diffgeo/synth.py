"""Synthetic point clouds and CSV interchange.

Every generator is a pure function of its arguments and ``seed``: the same
inputs give bit-identical arrays.  Noise is isotropic ambient Gaussian noise
added after sampling the underlying shape.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidArgument, ParseError

__all__ = [
    "PointCloud",
    "gen_circle",
    "gen_torus",
    "gen_sphere",
    "gen_sphere_with_circles",
    "gen_annulus",
    "gen_square",
    "gen_blob",
    "gen_two_circles",
    "gen_intersecting",
    "gen_infiltration",
    "add_background",
    "from_spec",
    "load_csv",
    "save_csv",
]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ``n x d`` sample with an optional generator seed and shape tag."""

    points: np.ndarray
    seed: int | None = None
    label: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidArgument(f"points must be an n x d matrix with n, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("points contain non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def transformed(self, rotation=None, shift=None, scale=1.0) -> "PointCloud":
        """Rigid motion (plus optional global scale) of the cloud."""
        pts = self.points * scale
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=float)
        return PointCloud(pts, self.seed, self.label, dict(self.meta))


def _count(n, name="n", minimum=1):
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise InvalidArgument(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _positive(value, name):
    if not value > 0:
        raise InvalidArgument(f"{name} must be positive, got {value!r}")
    return float(value)


def _noise(rng, shape, sigma):
    if sigma < 0:
        raise InvalidArgument(f"noise_sigma must be >= 0, got {sigma!r}")
    if sigma == 0:
        return 0.0
    return rng.normal(scale=sigma, size=shape)


def gen_circle(n, radius=1.0, noise_sigma=0.0, seed=None, random_angles=False) -> PointCloud:
    """Circle in the plane; angles evenly spaced unless ``random_angles``."""
    n = _count(n)
    radius = _positive(radius, "radius")
    rng = np.random.default_rng(seed)
    if random_angles:
        theta = rng.uniform(0.0, 2 * np.pi, n)
    else:
        theta = 2 * np.pi * np.arange(n) / n
    pts = radius * np.c_[np.cos(theta), np.sin(theta)]
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "circle", {"radius": radius})


def gen_torus(n, major_radius=2.0, minor_radius=1.0, noise_sigma=0.0, seed=None) -> PointCloud:
    """Torus in R^3 with both angles drawn uniformly."""
    n = _count(n)
    if not major_radius > minor_radius > 0:
        raise InvalidArgument(
            f"need major_radius > minor_radius > 0, got {major_radius!r}, {minor_radius!r}"
        )
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.0, 2 * np.pi, (2, n))
    ring = major_radius + minor_radius * np.cos(b)
    pts = np.c_[ring * np.cos(a), ring * np.sin(a), minor_radius * np.sin(b)]
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "torus", {"R": major_radius, "r": minor_radius})


def _sphere_points(rng, n, center, radius):
    v = rng.normal(size=(n, len(center)))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center, dtype=float) + radius * v


def gen_sphere(n, radius=1.0, noise_sigma=0.0, seed=None, dim=3) -> PointCloud:
    """Uniform sample of the round sphere of the given radius in R^dim."""
    n = _count(n)
    radius = _positive(radius, "radius")
    rng = np.random.default_rng(seed)
    pts = _sphere_points(rng, n, np.zeros(dim), radius)
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "sphere", {"radius": radius})


def gen_sphere_with_circles(n, noise_sigma=0.0, seed=None, circle_radius=1.0) -> PointCloud:
    """Unit sphere with two circles attached at opposite points.

    The circles touch the sphere at (1,0,0) and (-1,0,0); one lies in the
    xy-plane and the other in the xz-plane.  Points are split between the
    three pieces in proportion to area (sphere) and length (circles).
    """
    n = _count(n, minimum=3)
    rho = _positive(circle_radius, "circle_radius")
    rng = np.random.default_rng(seed)
    measure = np.array([4 * np.pi, 2 * np.pi * rho, 2 * np.pi * rho])
    counts = np.maximum(1, np.floor(n * measure / measure.sum()).astype(int))
    counts[0] = n - counts[1:].sum()
    sphere = _sphere_points(rng, counts[0], np.zeros(3), 1.0)
    u1 = rng.uniform(0.0, 2 * np.pi, counts[1])
    u2 = rng.uniform(0.0, 2 * np.pi, counts[2])
    c1 = np.c_[1 + rho + rho * np.cos(u1), rho * np.sin(u1), np.zeros_like(u1)]
    c2 = np.c_[-1 - rho - rho * np.cos(u2), np.zeros_like(u2), rho * np.sin(u2)]
    pts = np.vstack([sphere, c1, c2])
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    parts = np.repeat([0, 1, 2], counts)
    return PointCloud(pts, seed, "sphere_with_circles", {"part": parts, "circle_radius": rho})


def gen_annulus(n, inner_radius=1.0, outer_radius=2.0, noise_sigma=0.0, seed=None) -> PointCloud:
    """Planar annulus sampled uniformly by area."""
    n = _count(n)
    if not outer_radius > inner_radius > 0:
        raise InvalidArgument("need outer_radius > inner_radius > 0")
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(inner_radius**2, outer_radius**2, n))
    theta = rng.uniform(0.0, 2 * np.pi, n)
    pts = np.c_[r * np.cos(theta), r * np.sin(theta)]
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "annulus", {"inner": inner_radius, "outer": outer_radius})


def gen_square(n, side=1.0, noise_sigma=0.0, seed=None) -> PointCloud:
    """Uniform sample of the square [0, side]^2."""
    n = _count(n)
    side = _positive(side, "side")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, side, (n, 2))
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "square", {"side": side})


def gen_blob(n, dim=2, scale=1.0, seed=None) -> PointCloud:
    """Isotropic Gaussian cluster; a contractible stand-in."""
    n = _count(n)
    rng = np.random.default_rng(seed)
    return PointCloud(rng.normal(scale=scale, size=(n, dim)), seed, "blob")


def gen_two_circles(n, radius=1.0, separation=4.0, noise_sigma=0.0, seed=None) -> PointCloud:
    """Two disjoint circles whose centres are ``separation`` apart."""
    n = _count(n, minimum=2)
    if separation <= 2 * radius:
        raise InvalidArgument("circles overlap: need separation > 2 * radius")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    pts = radius * np.c_[np.cos(theta), np.sin(theta)]
    pts[n // 2 :, 0] += separation
    pts = pts + _noise(rng, pts.shape, noise_sigma)
    return PointCloud(pts, seed, "two_circles")


def add_background(pc: PointCloud, fraction, seed=None) -> PointCloud:
    """Append ``fraction * n`` points drawn uniformly from the bounding box."""
    if fraction < 0:
        raise InvalidArgument("fraction must be >= 0")
    rng = np.random.default_rng(seed)
    m = int(round(fraction * pc.n))
    lo, hi = pc.points.min(0), pc.points.max(0)
    extra = rng.uniform(lo, hi, (m, pc.dim))
    return PointCloud(np.vstack([pc.points, extra]), seed, pc.label, dict(pc.meta))


def gen_infiltration(steps, n=800, seed=None, outer_radius=1.0):
    """Sequence of annuli whose hole closes over time.

    Returns a list of clouds; step ``k`` has inner radius shrinking linearly
    from 0.7 to 0.1 of the outer radius, mimicking cells filling a cavity.
    """
    steps = _count(steps, "steps")
    base = 0 if seed is None else int(seed)
    inner = np.linspace(0.7, 0.1, steps) * outer_radius
    return [gen_annulus(n, r, outer_radius, 0.0, base + k) for k, r in enumerate(inner)]


# --- intersecting primitives ------------------------------------------------


def _plane_basis(normal):
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    helper = np.eye(3)[np.argmin(np.abs(normal))]
    e1 = np.cross(normal, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


@dataclass(frozen=True)
class _Primitive:
    kind: str
    params: dict
    dim: int

    def curve(self, u):
        p = self.params
        if self.kind == "circle":
            c = np.asarray(p["center"], dtype=float)
            e1, e2 = p["_basis"]
            return c + p["radius"] * (np.cos(u)[:, None] * e1 + np.sin(u)[:, None] * e2)
        s, e = np.asarray(p["start"], dtype=float), np.asarray(p["end"], dtype=float)
        return s + u[:, None] * (e - s)

    @property
    def span(self):
        return 2 * np.pi if self.kind == "circle" else 1.0

    def sample(self, rng, m):
        if self.kind == "sphere":
            return _sphere_points(rng, m, np.asarray(self.params["center"], float), self.params["radius"])
        return self.curve(rng.uniform(0.0, self.span, m))

    def distance(self, x):
        p = self.params
        if self.kind == "sphere":
            return np.abs(np.linalg.norm(x - np.asarray(p["center"]), axis=1) - p["radius"])
        if self.kind == "circle":
            rel = x - np.asarray(p["center"], dtype=float)
            e1, e2 = p["_basis"]
            a, b = rel @ e1, rel @ e2
            h = rel - a[:, None] * e1 - b[:, None] * e2
            return np.sqrt(np.sum(h**2, axis=1) + (np.hypot(a, b) - p["radius"]) ** 2)
        s, e = np.asarray(p["start"], dtype=float), np.asarray(p["end"], dtype=float)
        t = np.clip((x - s) @ (e - s) / np.dot(e - s, e - s), 0.0, 1.0)
        return np.linalg.norm(x - s - t[:, None] * (e - s), axis=1)


def _parse_primitive(entry, dim):
    if not isinstance(entry, dict) or "type" not in entry:
        raise InvalidArgument(f"primitive must be a dict with a 'type' key, got {entry!r}")
    kind = entry["type"]
    params = {k: v for k, v in entry.items() if k not in ("type", "n")}
    if kind in ("circle", "sphere"):
        center = np.asarray(params.get("center", np.zeros(dim)), dtype=float)
        if center.shape != (dim,):
            raise InvalidArgument(f"{kind} center must have {dim} coordinates")
        params["center"] = center
        params["radius"] = _positive(params.get("radius", 1.0), "radius")
    if kind == "circle":
        if dim == 2:
            params["_basis"] = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        elif dim == 3:
            params["_basis"] = _plane_basis(params.get("normal", [0.0, 0.0, 1.0]))
        else:
            raise InvalidArgument("circles are supported in 2 or 3 dimensions")
    elif kind == "segment":
        for key in ("start", "end"):
            if np.asarray(params.get(key, ())).shape != (dim,):
                raise InvalidArgument(f"segment {key} must have {dim} coordinates")
    elif kind != "sphere":
        raise InvalidArgument(f"unknown primitive type {kind!r}")
    return _Primitive(kind, params, dim)


def _curve_hits(curve: _Primitive, other: _Primitive, grid=4096, tol=1e-7):
    u = np.linspace(0.0, curve.span, grid, endpoint=curve.kind != "circle")
    du = u[1] - u[0]
    f = other.distance(curve.curve(u))
    scale = max(np.ptp(curve.curve(u), axis=0).max(), 1.0)
    prev, nxt = np.roll(f, 1), np.roll(f, -1)
    if curve.kind != "circle":
        prev[0], nxt[-1] = np.inf, np.inf
    hits = []
    for k in np.flatnonzero((f <= prev) & (f <= nxt) & (f < 0.05 * scale)):
        lo, hi = u[k] - du, u[k] + du
        if curve.kind != "circle":
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        res = minimize_scalar(
            lambda s: other.distance(curve.curve(np.array([s])))[0],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13},
        )
        if res.fun < tol:
            hits.append(curve.curve(np.array([res.x]))[0])
    return hits


def _sphere_sphere(a: _Primitive, b: _Primitive, samples=64):
    ca, cb = a.params["center"], b.params["center"]
    ra, rb = a.params["radius"], b.params["radius"]
    axis = cb - ca
    dist = np.linalg.norm(axis)
    if dist == 0 or dist > ra + rb or dist < abs(ra - rb):
        return []
    axis /= dist
    h = (dist**2 + ra**2 - rb**2) / (2 * dist)
    rho = math.sqrt(max(ra**2 - h**2, 0.0))
    mid = ca + h * axis
    if a.dim == 2:
        perp = np.array([-axis[1], axis[0]])
        return [mid + rho * perp, mid - rho * perp] if rho > 0 else [mid]
    e1, e2 = _plane_basis(axis)
    u = 2 * np.pi * np.arange(samples) / samples
    return list(mid + rho * (np.cos(u)[:, None] * e1 + np.sin(u)[:, None] * e2))


def _dedupe(points, tol=1e-6):
    out = []
    for p in points:
        if all(np.linalg.norm(p - q) > tol for q in out):
            out.append(p)
    return out


def gen_intersecting(spec, noise_sigma=0.0, seed=None):
    """Union of circles, segments and spheres with known crossing points.

    ``spec`` is a list of dicts such as
    ``{"type": "circle", "center": [0, 0], "radius": 1, "n": 400}``,
    ``{"type": "segment", "start": [..], "end": [..], "n": 200}`` or
    ``{"type": "sphere", "center": [..], "radius": 1, "n": 800}``.
    Circles in 3D take an optional ``normal``.

    Returns ``(cloud, intersections)`` where ``intersections`` is an
    ``m x d`` array of ground-truth crossing locations computed from the
    noiseless primitives.  Sphere-sphere contacts contribute points sampled
    along their intersection circle.
    """
    if not spec:
        raise InvalidArgument("empty primitive list")
    dim = None
    for entry in spec:
        for key in ("center", "start"):
            if isinstance(entry, dict) and key in entry:
                dim = len(entry[key])
                break
        if dim is not None:
            break
    dim = dim or 2
    prims = [_parse_primitive(e, dim) for e in spec]
    counts = [_count(e.get("n", 400), "primitive n") for e in spec]
    rng = np.random.default_rng(seed)
    pts = np.vstack([p.sample(rng, m) for p, m in zip(prims, counts)])
    pts = pts + _noise(rng, pts.shape, noise_sigma)

    hits = []
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            a, b = prims[i], prims[j]
            if a.kind == "sphere" and b.kind == "sphere":
                hits += _sphere_sphere(a, b)
            elif a.kind == "sphere":
                hits += _curve_hits(b, a)
            else:
                hits += _curve_hits(a, b)
    hits = _dedupe(hits)
    inter = np.array(hits, dtype=float).reshape(-1, dim)
    parts = np.repeat(np.arange(len(prims)), counts)
    cloud = PointCloud(pts, seed, "intersecting", {"part": parts, "intersections": inter})
    return cloud, inter


# --- JSON generator specs ---------------------------------------------------

_SPEC_KEYS = {
    "circle": {"n", "radius", "noise", "seed", "random_angles"},
    "torus": {"n", "R", "r", "noise", "seed"},
    "sphere": {"n", "radius", "noise", "seed"},
    "sphere_with_circles": {"n", "noise", "seed", "circle_radius"},
    "annulus": {"n", "inner", "outer", "noise", "seed"},
    "square": {"n", "side", "noise", "seed"},
    "blob": {"n", "dim", "scale", "seed"},
    "two_circles": {"n", "radius", "separation", "noise", "seed"},
    "intersecting": {"primitives", "noise", "seed"},
}


def from_spec(spec) -> PointCloud:
    """Build a cloud from a generator spec (dict or JSON string).

    Example: ``{"shape": "torus", "n": 3000, "R": 2, "r": 1, "noise": 0.0, "seed": 7}``.
    """
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"generator spec is not valid JSON: {exc}") from None
    if not isinstance(spec, dict) or "shape" not in spec:
        raise InvalidArgument("generator spec must be an object with a 'shape' key")
    shape = spec["shape"]
    if shape not in _SPEC_KEYS:
        raise InvalidArgument(f"unknown shape {shape!r}; expected one of {sorted(_SPEC_KEYS)}")
    unknown = set(spec) - _SPEC_KEYS[shape] - {"shape"}
    if unknown:
        raise InvalidArgument(f"unknown keys for {shape}: {sorted(unknown)}")
    g = spec.get
    noise, seed = g("noise", 0.0), g("seed")
    if shape == "circle":
        return gen_circle(g("n", 1000), g("radius", 1.0), noise, seed, g("random_angles", False))
    if shape == "torus":
        return gen_torus(g("n", 3000), g("R", 2.0), g("r", 1.0), noise, seed)
    if shape == "sphere":
        return gen_sphere(g("n", 2000), g("radius", 1.0), noise, seed)
    if shape == "sphere_with_circles":
        return gen_sphere_with_circles(g("n", 3000), noise, seed, g("circle_radius", 1.0))
    if shape == "annulus":
        return gen_annulus(g("n", 2000), g("inner", 1.0), g("outer", 2.0), noise, seed)
    if shape == "square":
        return gen_square(g("n", 2000), g("side", 1.0), noise, seed)
    if shape == "blob":
        return gen_blob(g("n", 1000), g("dim", 2), g("scale", 1.0), seed)
    if shape == "two_circles":
        return gen_two_circles(g("n", 2000), g("radius", 1.0), g("separation", 4.0), noise, seed)
    return gen_intersecting(g("primitives"), noise, seed)[0]


# --- CSV ---------------------------------------------------------------------


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path) -> PointCloud:
    """Read a comma-separated numeric matrix; a single header row is allowed."""
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("file contains no data rows")
    if not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
        if not rows:
            raise ParseError("file contains a header but no data rows")
    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for k, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", row=line)
        for j, cell in enumerate(cells):
            try:
                data[k, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r} in column {j + 1}", row=line) from None
    return PointCloud(data, label=Path(path).stem)


def save_csv(pc: PointCloud, path, header=True) -> None:
    """Write coordinates with round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j}" for j in range(pc.dim)])
        for row in pc.points:
            w.writerow([repr(float(v)) for v in row])

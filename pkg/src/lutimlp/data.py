"""Synthetic shape dataset, point-cloud file ingestion, normalization.

The synthetic set has 8 surface-sampled classes (sphere, cube,
cylinder, cone, torus, pyramid, two-plane cross, helix), each instance
randomly rotated, jittered, and normalized into the unit sphere.  It is
a desk-scale stand-in for a mesh benchmark; real data comes in through
the XYZ/OFF loaders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom3

CLASS_NAMES = ("sphere", "cube", "cylinder", "cone", "torus", "pyramid",
               "cross", "helix")
JITTER_SIGMA = 0.01


class ParseError(ValueError):
    """Malformed point-cloud file; message carries path and line number."""


@dataclass
class PointCloud:
    points: np.ndarray           # (n, 3)
    label: int | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"points must be (N>=1, 3), got {pts.shape}")
        self.points = pts

    @property
    def n(self):
        return self.points.shape[0]


def normalize_unit_sphere(cloud):
    """Center on the centroid and scale so max radius is 1.

    Degenerate clouds (all points coincident) map to the origin.
    Idempotent: renormalizing changes nothing beyond roundoff.
    """
    pts = cloud.points - cloud.points.mean(axis=0)
    r = np.sqrt((pts * pts).sum(axis=1).max())
    if r > 0.0:
        pts = pts / r
    return PointCloud(pts, cloud.label)


def sample_n(cloud, n, seed):
    """Uniform subsample without replacement (with, when n > N)."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(cloud.n, size=n, replace=n > cloud.n)
    return PointCloud(cloud.points[idx], cloud.label)


def synth_shapes(seed, n_per_class, n_points):
    """Deterministic labeled dataset: n_per_class clouds per class.

    Each cloud gets its own seed stream derived from (seed, label,
    instance), so generation order and parallel generation agree.
    """
    out = []
    for label in range(len(CLASS_NAMES)):
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, label, i])
            pts = _SAMPLERS[label](rng, n_points)
            rot = geom3.random_rotation(rng)
            pts = pts @ rot.T
            pts = pts + rng.normal(0.0, JITTER_SIGMA, size=pts.shape)
            out.append(normalize_unit_sphere(PointCloud(pts, label)))
    return out


def _unit_dirs(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sphere(rng, n):
    return _unit_dirs(rng, n)


def _cube(rng, n):
    # one of 6 faces, uniform in the face plane
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for a in range(3):
        sel = axis == a
        others = [b for b in range(3) if b != a]
        pts[sel, a] = sign[sel]
        pts[np.ix_(sel, others)] = uv[sel]
    return pts


def _cylinder(rng, n):
    # radius 1, z in [-1, 1]; side vs caps weighted by area (4pi : 2pi)
    side = rng.random(n) < 2.0 / 3.0
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    pts[:, 0] = np.cos(theta)
    pts[:, 1] = np.sin(theta)
    pts[side, 2] = rng.uniform(-1.0, 1.0, size=int(side.sum()))
    ncap = int((~side).sum())
    r = np.sqrt(rng.random(ncap))
    pts[~side, 0] *= r
    pts[~side, 1] *= r
    pts[~side, 2] = np.where(rng.random(ncap) < 0.5, 1.0, -1.0)
    return pts


def _cone(rng, n):
    # apex (0,0,1), base circle radius 1 at z=-1; lateral : base by area
    lat_frac = np.sqrt(5.0) / (np.sqrt(5.0) + 1.0)
    lateral = rng.random(n) < lat_frac
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    v = np.sqrt(rng.random(n))             # fraction of the way from apex
    rad = np.where(lateral, v, np.sqrt(rng.random(n)))
    pts[:, 0] = rad * np.cos(theta)
    pts[:, 1] = rad * np.sin(theta)
    pts[:, 2] = np.where(lateral, 1.0 - 2.0 * v, -1.0)
    return pts


def _torus(rng, n, big_r=0.7, small_r=0.3):
    # rejection in the tube angle keeps the surface measure uniform
    out = np.empty((n, 3))
    filled = 0
    while filled < n:
        m = 2 * (n - filled)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
        phi = rng.uniform(0.0, 2.0 * np.pi, size=m)
        keep = rng.random(m) < (big_r + small_r * np.cos(phi)) / (big_r + small_r)
        theta, phi = theta[keep], phi[keep]
        take = min(len(theta), n - filled)
        ring = big_r + small_r * np.cos(phi[:take])
        out[filled:filled + take, 0] = ring * np.cos(theta[:take])
        out[filled:filled + take, 1] = ring * np.sin(theta[:take])
        out[filled:filled + take, 2] = small_r * np.sin(phi[:take])
        filled += take
    return out


_PYRAMID_APEX = np.array([0.0, 0.0, 1.0])
_PYRAMID_BASE = np.array([[1.0, 1.0, -0.5], [-1.0, 1.0, -0.5],
                          [-1.0, -1.0, -0.5], [1.0, -1.0, -0.5]])


def _pyramid(rng, n):
    # 4 side triangles plus the square base (2 triangles), area-weighted
    tris = []
    for i in range(4):
        tris.append((_PYRAMID_APEX, _PYRAMID_BASE[i], _PYRAMID_BASE[(i + 1) % 4]))
    tris.append((_PYRAMID_BASE[0], _PYRAMID_BASE[1], _PYRAMID_BASE[2]))
    tris.append((_PYRAMID_BASE[0], _PYRAMID_BASE[2], _PYRAMID_BASE[3]))
    tris = np.array(tris)                      # (6, 3, 3)
    cross = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    pick = rng.choice(len(tris), size=n, p=areas / areas.sum())
    a, b, c = tris[pick, 0], tris[pick, 1], tris[pick, 2]
    su = np.sqrt(rng.random((n, 1)))
    v = rng.random((n, 1))
    return (1.0 - su) * a + su * (1.0 - v) * b + su * v * c


def _cross(rng, n):
    # two orthogonal unit squares sharing the z axis
    plane = rng.random(n) < 0.5
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.zeros((n, 3))
    pts[plane, 0] = uv[plane, 0]
    pts[~plane, 1] = uv[~plane, 0]
    pts[:, 2] = uv[:, 1]
    return pts


def _helix(rng, n, turns=2.0, radius=0.8):
    # constant radius and pitch, so uniform t is uniform arc length
    t = rng.uniform(0.0, 2.0 * np.pi * turns, size=n)
    pts = np.empty((n, 3))
    pts[:, 0] = radius * np.cos(t)
    pts[:, 1] = radius * np.sin(t)
    pts[:, 2] = t / (np.pi * turns) - 1.0
    return pts


_SAMPLERS = (_sphere, _cube, _cylinder, _cone, _torus, _pyramid, _cross,
             _helix)


def load_xyz(path):
    """Whitespace-separated ``x y z`` per line; blank lines skipped."""
    pts = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for ln, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise ParseError(f"{path}:{ln}: expected 3 fields, got {len(fields)}")
            try:
                pts.append([float(f) for f in fields])
            except ValueError:
                raise ParseError(f"{path}:{ln}: non-numeric field") from None
    if not pts:
        raise ParseError(f"{path}: no points")
    return PointCloud(np.array(pts))


def load_off(path):
    """OFF mesh header + vertex block; faces are ignored.

    Tolerates comment lines (#) and the one-line ``OFF nv nf ne``
    header variant.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        lines = fh.readlines()
    rows = [(ln, line.strip()) for ln, line in enumerate(lines, start=1)
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise ParseError(f"{path}: empty file")
    ln0, header = rows[0]
    if not header.startswith("OFF"):
        raise ParseError(f"{path}:{ln0}: missing OFF header")
    rest = header[3:].split()
    if rest:
        counts, body = rest, rows[1:]
        counts_ln = ln0
    else:
        if len(rows) < 2:
            raise ParseError(f"{path}:{ln0}: missing counts line")
        counts_ln, counts_line = rows[1]
        counts, body = counts_line.split(), rows[2:]
    if len(counts) < 2:
        raise ParseError(f"{path}:{counts_ln}: expected vertex and face counts")
    try:
        n_vert = int(counts[0])
    except ValueError:
        raise ParseError(f"{path}:{counts_ln}: non-integer vertex count") from None
    if n_vert < 1:
        raise ParseError(f"{path}:{counts_ln}: vertex count must be >= 1")
    if len(body) < n_vert:
        raise ParseError(f"{path}: expected {n_vert} vertex lines, found {len(body)}")
    pts = np.empty((n_vert, 3))
    for i in range(n_vert):
        ln, line = body[i]
        fields = line.split()
        if len(fields) < 3:
            raise ParseError(f"{path}:{ln}: expected 3 coordinates")
        try:
            pts[i] = [float(f) for f in fields[:3]]
        except ValueError:
            raise ParseError(f"{path}:{ln}: non-numeric coordinate") from None
    return PointCloud(pts)

"""Uniform 3-D lattice over an axis-aligned box.

Nodes are indexed per axis by 0..d-1 and linearized as
``((ix * d) + iy) * d + iz``.  Cells are indexed by their lower corner
``base`` with ``base <= d-2`` per axis; a query point is reduced to its
cell plus normalized offsets ``u`` in [0, 1]^3.  Out-of-domain points
clamp to the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Lattice:
    d: int
    lo: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0, -1.0]))
    hi: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0]))

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"lattice needs d >= 2, got {self.d}")
        lo = np.array(np.broadcast_to(np.asarray(self.lo, dtype=float), 3))
        hi = np.array(np.broadcast_to(np.asarray(self.hi, dtype=float), 3))
        if not np.all(hi > lo):
            raise ValueError("lattice bounds must satisfy hi > lo per axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def spacing(self):
        """Node spacing per axis: (hi - lo) / (d - 1)."""
        return (self.hi - self.lo) / (self.d - 1)

    @property
    def n_nodes(self):
        return self.d ** 3


@dataclass(frozen=True)
class CellLocation:
    base: np.ndarray  # (3,) int, lower-corner node of the cell
    u: np.ndarray     # (3,) float in [0, 1], offset inside the cell


def locate(lat, p):
    """Cell and normalized offset for a single point (clamping)."""
    base, u = locate_batch(lat, np.asarray(p, dtype=float).reshape(1, 3))
    return CellLocation(base[0], u[0])


def locate_batch(lat, pts):
    """Vectorized locate: returns (base (N,3) int64, u (N,3) float)."""
    pts = np.asarray(pts, dtype=float)
    q = (pts - lat.lo) / lat.spacing
    np.clip(q, 0.0, lat.d - 1.0, out=q)
    base = np.minimum(q.astype(np.int64), lat.d - 2)
    u = q - base
    return base, u


def trilinear_weights(cell):
    """The 8 corner weights of a cell location, in corner-bit order.

    Corner j has axis bits (bx, by, bz) = (j>>2 & 1, j>>1 & 1, j & 1);
    its weight is the product over axes of ``u`` (bit set) or ``1 - u``
    (bit clear).  The weights sum to 1.
    """
    w = trilinear_weights_batch(cell.u.reshape(1, 3))
    return w[0]


def trilinear_weights_batch(u):
    u = np.asarray(u, dtype=float)
    cx = np.stack([1.0 - u[:, 0], u[:, 0]], axis=1)
    cy = np.stack([1.0 - u[:, 1], u[:, 1]], axis=1)
    cz = np.stack([1.0 - u[:, 2], u[:, 2]], axis=1)
    w = cx[:, :, None, None] * cy[:, None, :, None] * cz[:, None, None, :]
    return w.reshape(-1, 8)


def node_index(lat, ix, iy, iz):
    return (ix * lat.d + iy) * lat.d + iz


def corner_nodes(lat, base):
    """Linear node ids of a cell's 8 corners, in corner-bit order."""
    base = np.asarray(base)
    d = lat.d
    n000 = (base[..., 0] * d + base[..., 1]) * d + base[..., 2]
    offs = np.array([(bx * d + by) * d + bz
                     for bx in (0, 1) for by in (0, 1) for bz in (0, 1)])
    return n000[..., None] + offs


def node_coords(lat, idx):
    """Coordinates of a node given per-axis indices (ix, iy, iz)."""
    idx = np.asarray(idx, dtype=float)
    return lat.lo + idx * lat.spacing


def node_grid(lat):
    """All d^3 node coordinates, rows in linear node order."""
    d = lat.d
    ax = [np.linspace(lat.lo[a], lat.hi[a], d) for a in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

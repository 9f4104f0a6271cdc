"""Basis tables: baking an MLP onto a lattice and embedding through it.

A basis table stores one K-vector per lattice node (float64 in memory;
the disk format in ``io`` stores float32).  Embedding modes:

* ``uniform``   - trilinear blend of the 8 cell-corner rows,
* ``irregular`` - elementwise min of the uniform embedding and its
                  channel reversal, which lets per-channel maxima sit
                  strictly inside cells,
* ``nearest``   - row of the nearest node (round half up per axis).

``train_forward``/``train_backward`` run the same interpolation on MLP
outputs at node coordinates so a network can be trained end-to-end
through the table it will later be baked into; the baked table then
reproduces the training-time embedding exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tinynet
from .lattice import Lattice, corner_nodes, locate_batch, node_grid, trilinear_weights_batch

try:
    from . import _kernels
except ImportError:  # pragma: no cover - numba missing
    _kernels = None

# flipped by tests to force the numpy fallback
use_fast_kernels = True


@dataclass(frozen=True)
class BasisTable:
    """Immutable baked table: row j = embedding basis at node j."""

    lattice: Lattice
    data: np.ndarray  # (d^3, k)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != self.lattice.n_nodes:
            raise ValueError(f"table shape {data.shape} does not match "
                             f"d^3 = {self.lattice.n_nodes}")
        if not np.all(np.isfinite(data)):
            raise ValueError("table entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def k(self):
        return self.data.shape[1]


@dataclass
class DirectTable:
    """Mutable table trained as a free parameter (no generating MLP)."""

    lattice: Lattice
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[0] != self.lattice.n_nodes:
            raise ValueError(f"table shape {self.data.shape} does not match "
                             f"d^3 = {self.lattice.n_nodes}")

    @property
    def k(self):
        return self.data.shape[1]


EMBED_MODES = ("uniform", "irregular", "nearest")


def bake(mlp, lat):
    """Evaluate the MLP (eval mode) at every lattice node."""
    rows = tinynet.mlp_forward(mlp, node_grid(lat), mode="eval")
    return BasisTable(lat, rows)


def channel_reverse(z):
    """Gamma operator: out[k] = z[K-1-k] along the last axis."""
    return np.ascontiguousarray(np.asarray(z)[..., ::-1])


def embed_uniform(tbl, p):
    """Trilinear interpolation of the 8 corner rows at a single point."""
    z = _numpy_embed(tbl.data, tbl.lattice, np.asarray(p, float).reshape(1, 3), "uniform")
    return z[0]


def embed_irregular(tbl, p):
    """min(z_uni, reversed z_uni) at a single point."""
    z = _numpy_embed(tbl.data, tbl.lattice, np.asarray(p, float).reshape(1, 3), "irregular")
    return z[0]


def embed_nearest(tbl, p):
    """Row of the nearest lattice node (round half up per axis)."""
    z = _numpy_embed(tbl.data, tbl.lattice, np.asarray(p, float).reshape(1, 3), "nearest")
    return z[0]


def embed_batch(tbl, pts, mode="uniform", out=None):
    """Embed an (N, 3) cloud; returns (N, K).

    ``out`` may supply a preallocated C-contiguous result buffer.  Uses
    the numba kernels when available; the numpy fallback computes the
    same corner sums.
    """
    if mode not in EMBED_MODES:
        raise ValueError(f"unknown embed mode {mode!r}")
    pts = np.ascontiguousarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    n, k = pts.shape[0], tbl.k
    if out is None:
        out = np.empty((n, k))
    elif out.shape != (n, k) or not out.flags.c_contiguous or out.dtype != np.float64:
        raise ValueError("out buffer must be C-contiguous float64 (N, K)")
    if _kernels is not None and use_fast_kernels:
        lat = tbl.lattice
        inv_h = 1.0 / lat.spacing
        fn = {"uniform": _kernels.embed_uniform,
              "irregular": _kernels.embed_irregular,
              "nearest": _kernels.embed_nearest}[mode]
        fn(tbl.data, pts, lat.d,
           lat.lo[0], lat.lo[1], lat.lo[2],
           inv_h[0], inv_h[1], inv_h[2], out)
        return out
    out[:] = _numpy_embed(tbl.data, tbl.lattice, pts, mode)
    return out


def embed_max(tbl, pts, mode="uniform"):
    """Per-channel max of an embedded cloud, as a (K,) vector.

    Same value as ``embed_batch(tbl, pts, mode).max(axis=0)``, but the
    fast path folds the reduction into the interpolation loop and never
    materializes the (N, K) matrix.  That is the difference that makes
    finite-difference pose Jacobians on tables cheap.
    """
    if mode not in EMBED_MODES:
        raise ValueError(f"unknown embed mode {mode!r}")
    pts = np.ascontiguousarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("empty cloud")
    if _kernels is not None and use_fast_kernels:
        lat = tbl.lattice
        inv_h = 1.0 / lat.spacing
        fn = {"uniform": _kernels.embed_max_uniform,
              "irregular": _kernels.embed_max_irregular,
              "nearest": _kernels.embed_max_nearest}[mode]
        out = np.full(tbl.k, -np.inf)
        fn(tbl.data, pts, lat.d,
           lat.lo[0], lat.lo[1], lat.lo[2],
           inv_h[0], inv_h[1], inv_h[2], out)
        return out
    return _numpy_embed(tbl.data, tbl.lattice, pts, mode).max(axis=0)


def _numpy_embed(data, lat, pts, mode):
    if mode == "nearest":
        return data[_nearest_ids(lat, pts)].copy()
    base, u = locate_batch(lat, pts)
    ids = corner_nodes(lat, base)
    w = trilinear_weights_batch(u)
    z = _interp_rows(data, ids, w)
    if mode == "irregular":
        np.minimum(z, z[:, ::-1], out=z)
    return z


def _interp_rows(values, ids, w):
    # fixed corner order keeps the two train_forward strategies
    # bit-identical
    n, k = ids.shape[0], values.shape[1]
    out = np.zeros((n, k))
    for j in range(8):
        out += w[:, j, None] * values[ids[:, j]]
    return out


def _nearest_ids(lat, pts):
    q = (np.asarray(pts, float) - lat.lo) / lat.spacing
    idx = np.clip(np.floor(q + 0.5).astype(np.int64), 0, lat.d - 1)
    return (idx[:, 0] * lat.d + idx[:, 1]) * lat.d + idx[:, 2]


@dataclass
class TrainCache:
    mode: str
    mlp: tinynet.MlpParams
    mlp_cache: dict
    n_values: int          # rows evaluated by the MLP this pass
    ids: np.ndarray | None        # (N, 8) row indices into the value block
    weights: np.ndarray | None    # (N, 8)
    z_uni: np.ndarray | None      # kept for irregular branch routing
    nearest: np.ndarray | None    # (N,) row indices, nearest mode only


def train_forward(mlp, lat, pts, mode="uniform", bn_mode="eval", rng=None):
    """Embed a batch through the MLP-at-nodes interpolation.

    Evaluates the MLP on all d^3 nodes when that is no more work than
    the touched corners (or whenever batch norm runs in train mode, so
    batch statistics do not depend on which nodes a batch touches),
    otherwise only on the union of touched corner nodes.  Both
    strategies interpolate with identical arithmetic; the result equals
    ``embed_batch(bake(mlp, lat), pts, mode)``.
    """
    if mode not in EMBED_MODES:
        raise ValueError(f"unknown embed mode {mode!r}")
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    base, u = locate_batch(lat, pts)
    ids = corner_nodes(lat, base)
    w = trilinear_weights_batch(u)
    has_bn = any(layer.bn is not None for layer in mlp.layers)
    full = lat.n_nodes <= 8 * n or (bn_mode == "train" and has_bn)
    if full:
        coords = node_grid(lat)
        rids = ids
        nearest = _nearest_ids(lat, pts) if mode == "nearest" else None
    else:
        used = np.unique(np.concatenate(
            [ids.ravel(), _nearest_ids(lat, pts)] if mode == "nearest" else [ids.ravel()]))
        # gather from the full grid so both strategies feed the MLP
        # bit-identical node coordinates
        coords = node_grid(lat)[used]
        rids = np.searchsorted(used, ids.ravel()).reshape(ids.shape)
        nearest = (np.searchsorted(used, _nearest_ids(lat, pts))
                   if mode == "nearest" else None)
    values, mlp_cache = tinynet.mlp_forward(mlp, coords, mode=bn_mode,
                                            rng=rng, want_cache=True)
    if mode == "nearest":
        z = values[nearest].copy()
        z_uni = None
    else:
        z_uni = _interp_rows(values, rids, w)
        z = np.minimum(z_uni, z_uni[:, ::-1]) if mode == "irregular" else z_uni
    return z, TrainCache(mode, mlp, mlp_cache, values.shape[0],
                         None if mode == "nearest" else rids,
                         None if mode == "nearest" else w,
                         z_uni if mode == "irregular" else None,
                         nearest)


def _route_min_branch(z_uni, upstream):
    """Send each channel's gradient to the min branch that produced it.

    Channel k reads from uniform channel k when z_uni[k] <= reversed
    (ties go to the un-reversed branch), else from channel K-1-k.
    """
    take = z_uni <= z_uni[:, ::-1]
    kept = np.where(take, upstream, 0.0)
    routed = np.where(take, 0.0, upstream)[:, ::-1]
    return kept + routed


def scatter_rows(ids, weights, grads, n_rows):
    """Accumulate weighted per-point gradients onto table rows.

    Computes out[r] = sum over (i, j) with ids[i, j] == r of
    weights[i, j] * grads[i].  When the point-by-row selector fits in
    memory this is one dense matmul; otherwise np.add.at per corner.
    """
    n, k = grads.shape
    if n * n_rows <= 1 << 24:
        sel = np.zeros((n, n_rows))
        np.add.at(sel, (np.arange(n)[:, None], ids), weights)
        return sel.T @ grads
    out = np.zeros((n_rows, k))
    for j in range(ids.shape[1]):
        np.add.at(out, ids[:, j], weights[:, j, None] * grads)
    return out


def train_backward(cache, upstream):
    """Gradients of a scalar loss wrt the MLP, given d loss/d embedding."""
    upstream = np.asarray(upstream, dtype=float)
    if cache.mode == "nearest":
        node_grads = scatter_rows(cache.nearest[:, None],
                                  np.ones((upstream.shape[0], 1)),
                                  upstream, cache.n_values)
    else:
        g_uni = (_route_min_branch(cache.z_uni, upstream)
                 if cache.mode == "irregular" else upstream)
        node_grads = scatter_rows(cache.ids, cache.weights, g_uni,
                                  cache.n_values)
    return tinynet.mlp_backward(cache.mlp, cache.mlp_cache, node_grads)


@dataclass
class DirectCache:
    mode: str
    table: DirectTable
    ids: np.ndarray | None
    weights: np.ndarray | None
    z_uni: np.ndarray | None
    nearest: np.ndarray | None


def direct_forward(tbl, pts, mode="uniform"):
    """Embed through a DirectTable, caching what backward needs."""
    pts = np.asarray(pts, dtype=float)
    if mode == "nearest":
        nearest = _nearest_ids(tbl.lattice, pts)
        return tbl.data[nearest].copy(), DirectCache(mode, tbl, None, None, None, nearest)
    base, u = locate_batch(tbl.lattice, pts)
    ids = corner_nodes(tbl.lattice, base)
    w = trilinear_weights_batch(u)
    z_uni = _interp_rows(tbl.data, ids, w)
    if mode == "irregular":
        z = np.minimum(z_uni, z_uni[:, ::-1])
        return z, DirectCache(mode, tbl, ids, w, z_uni, None)
    return z_uni, DirectCache(mode, tbl, ids, w, None, None)


def direct_backward(cache, upstream):
    """d loss/d table for a DirectTable forward pass."""
    upstream = np.asarray(upstream, dtype=float)
    n_rows = cache.table.data.shape[0]
    if cache.mode == "nearest":
        return scatter_rows(cache.nearest[:, None],
                            np.ones((upstream.shape[0], 1)), upstream, n_rows)
    g_uni = (_route_min_branch(cache.z_uni, upstream)
             if cache.mode == "irregular" else upstream)
    return scatter_rows(cache.ids, cache.weights, g_uni, n_rows)


def tv_regularizer(tbl, p_norm=2):
    """Total variation over the 6-neighbor lattice adjacency.

    Each unordered neighbor pair (i, j) contributes ||w_i - w_j||^p
    (Euclidean norm over channels).  Returns (value, gradient wrt the
    table); the p=1 subgradient at identical rows is taken as 0.
    """
    if p_norm not in (1, 2):
        raise ValueError(f"p_norm must be 1 or 2, got {p_norm}")
    d = tbl.lattice.d
    w = np.asarray(tbl.data, dtype=float).reshape(d, d, d, -1)
    grad = np.zeros_like(w)
    value = 0.0
    for axis in range(3):
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        diff = w[tuple(hi)] - w[tuple(lo)]
        if p_norm == 2:
            value += float(np.sum(diff * diff))
            grad[tuple(hi)] += 2.0 * diff
            grad[tuple(lo)] -= 2.0 * diff
        else:
            norms = np.sqrt(np.sum(diff * diff, axis=-1))
            value += float(np.sum(norms))
            safe = np.where(norms > 0.0, norms, 1.0)
            unit = diff / safe[..., None]
            unit[norms == 0.0] = 0.0
            grad[tuple(hi)] += unit
            grad[tuple(lo)] -= unit
    return value, grad.reshape(tbl.data.shape)

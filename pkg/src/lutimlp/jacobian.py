"""Derivatives of embeddings and of the max-aggregated global feature.

Point-space Jacobians of the table embedding come from differencing the
corner rows (the interpolation is trilinear, so d/dx is the bilinear
blend of upper-minus-lower corner rows divided by the cell spacing).
Global-feature Jacobians with respect to a rigid pose combine those rows
with the point-pose pullback at each channel's argmax point.

Sign convention: the finite-difference Jacobian perturbs the cloud by
exp(-t e_m), column m = [a(exp(-t e_m) P) - a(P)] / t, and the analytic
forms are signed to agree with it as t -> 0.
"""

from __future__ import annotations

import numpy as np

from . import geom3, luti, tinynet
from .lattice import corner_nodes, locate_batch, trilinear_weights_batch

DIFF_MODES = ("uniform", "irregular")


def dphi_dp_batch(tbl, pts, mode="uniform"):
    """(N, K, 3) Jacobian of the embedding wrt point coordinates.

    Piecewise constant along each row's own axis within a cell; at cell
    faces the one-sided value from the containing (locate-selected)
    cell is returned.
    """
    if mode not in DIFF_MODES:
        raise ValueError(f"no point derivative for mode {mode!r}")
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    lat = tbl.lattice
    base, u = locate_batch(lat, pts)
    rows = tbl.data[corner_nodes(lat, base)]      # (n, 8, k)
    n, _, k = rows.shape
    r = rows.reshape(n, 2, 2, 2, k)               # bit order (bx, by, bz)
    wx = np.stack([1.0 - u[:, 0], u[:, 0]], axis=1)
    wy = np.stack([1.0 - u[:, 1], u[:, 1]], axis=1)
    wz = np.stack([1.0 - u[:, 2], u[:, 2]], axis=1)
    h = lat.spacing
    out = np.empty((n, k, 3))
    out[:, :, 0] = np.einsum("nyzk,ny,nz->nk", r[:, 1] - r[:, 0], wy, wz) / h[0]
    out[:, :, 1] = np.einsum("nxzk,nx,nz->nk", r[:, :, 1] - r[:, :, 0], wx, wz) / h[1]
    out[:, :, 2] = np.einsum("nxyk,nx,ny->nk", r[..., 1, :] - r[..., 0, :], wx, wy) / h[2]
    if mode == "irregular":
        w8 = trilinear_weights_batch(u)
        z_uni = np.einsum("njk,nj->nk", rows, w8)
        take = z_uni <= z_uni[:, ::-1]
        out = np.where(take[:, :, None], out, out[:, ::-1, :])
    return out


def dphi_dp_uniform(tbl, p):
    """(K, 3) point Jacobian of the uniform embedding at one point."""
    return dphi_dp_batch(tbl, np.asarray(p, float).reshape(1, 3), "uniform")[0]


def dphi_dp_irregular(tbl, p):
    """Point Jacobian of the min-reversed embedding; per channel k the
    row is the uniform row k when z_uni[k] <= z_uni[K-1-k] (ties keep
    k), else the uniform row K-1-k."""
    return dphi_dp_batch(tbl, np.asarray(p, float).reshape(1, 3), "irregular")[0]


def point_pose_jacobian_batch(pts):
    """(N, 3, 6) stack of geom3.point_pose_jacobian over rows of pts."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    out = np.zeros((n, 3, 6))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out[:, 0, 1] = z
    out[:, 0, 2] = -y
    out[:, 1, 0] = -z
    out[:, 1, 2] = x
    out[:, 2, 0] = y
    out[:, 2, 1] = -x
    out[:, 0, 3] = out[:, 1, 4] = out[:, 2, 5] = 1.0
    return out


def _gather_pose_rows(per_point_rows, winners, pts):
    # row k of the global Jacobian: -(dphi/dp at the winner) * pullback
    ppj = point_pose_jacobian_batch(pts[winners])
    return -np.einsum("ki,kij->kj", per_point_rows, ppj)


def dglobal_dxi_analytic(tbl, pts, mode="uniform"):
    """(K, 6) Jacobian of a = max_i phi(p_i) wrt a pose at identity.

    Only the argmax point of each channel contributes; the point
    Jacobian is evaluated once per distinct winner.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        raise ValueError("empty cloud")
    z = luti.embed_batch(tbl, pts, mode=mode)
    winners = np.argmax(z, axis=0)                # ties -> lowest index
    uniq, inv = np.unique(winners, return_inverse=True)
    jp = dphi_dp_batch(tbl, pts[uniq], mode)      # (u, k, 3)
    rows = jp[inv, np.arange(z.shape[1])]         # (k, 3)
    return _gather_pose_rows(rows, winners, pts)


def dglobal_dxi_fdm(embed_fn, pts, t):
    """(K, 6) finite-difference Jacobian of the max-aggregated feature.

    Column m = [max phi(exp(-t e_m) P) - max phi(P)] / t.  embed_fn may
    return per-point rows (N, K), pooled here, or an already pooled (K,)
    vector (e.g. ``luti.embed_max``), which skips the big intermediate.
    """
    if t <= 0.0:
        raise ValueError(f"fdm step must be positive, got {t}")
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        raise ValueError("empty cloud")

    def pooled(q):
        z = embed_fn(q)
        return z if z.ndim == 1 else z.max(axis=0)

    a0 = pooled(pts)
    out = np.empty((a0.shape[0], 6))
    for m in range(6):
        xi = np.zeros(6)
        xi[m] = -t
        warped = geom3.transform_points(geom3.se3_exp(xi), pts)
        out[:, m] = (pooled(warped) - a0) / t
    return out


def mlp_point_jacobian(mlp, pts):
    """(N, K, 3) input Jacobian of an eval-mode MLP.

    One backward sweep per output channel (K passes over the batch);
    this is the slow dense baseline the table Jacobians replace.
    """
    pts = np.asarray(pts, dtype=float)
    _, cache = tinynet.mlp_forward(mlp, pts, mode="eval", want_cache=True)
    n, k = pts.shape[0], mlp.out_dim
    out = np.empty((n, k, 3))
    last = mlp.layers[-1]
    c_last = cache["layers"][-1]
    for ch in range(k):
        g_row = np.ones(n)
        if last.activation == "relu":
            g_row = g_row * (c_last["a"][:, ch] > 0.0)
        if last.bn is not None:
            g_row = g_row * (last.bn.gamma[ch] * c_last["inv_std"][ch])
        g = g_row[:, None] * last.weight[ch][None, :]
        for i in range(len(mlp.layers) - 2, -1, -1):
            layer = mlp.layers[i]
            c = cache["layers"][i]
            if layer.activation == "relu":
                g = g * (c["a"] > 0.0)
            if layer.bn is not None:
                g = g * (layer.bn.gamma * c["inv_std"])
            g = g @ layer.weight
        out[:, ch, :] = g
    return out


def mlp_analytic_jacobian(mlp, pts):
    """(K, 6) global Jacobian straight from the MLP (no table).

    Runs the full K-pass point Jacobian, then copies each channel's
    argmax row through the pose pullback; same sign convention as
    dglobal_dxi_analytic.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        raise ValueError("empty cloud")
    z = tinynet.mlp_forward(mlp, pts, mode="eval")
    winners = np.argmax(z, axis=0)
    jp = mlp_point_jacobian(mlp, pts)
    rows = jp[winners, np.arange(z.shape[1])]
    return _gather_pose_rows(rows, winners, pts)

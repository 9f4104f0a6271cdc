"""Rigid 3-D motion utilities: twists, exponential map, pose Jacobians.

A twist is a plain 6-vector ``xi = (w1, w2, w3, v1, v2, v3)`` with the
rotational part first.  The exponential map follows the Rodrigues formula
with a series fallback near zero, so ``se3_exp(0)`` is exactly the
identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9
SMALL_ANGLE = 1e-8


def skew(w):
    """Cross-product matrix: ``skew(w) @ x == np.cross(w, x)``."""
    wx, wy, wz = w
    return np.array([
        [0.0, -wz, wy],
        [wz, 0.0, -wx],
        [-wy, wx, 0.0],
    ])


def _polar_orthonormalize(r):
    # Nearest rotation in Frobenius norm; flips the last singular
    # direction if the input had negative determinant.
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    u[:, -1] *= d
    return u @ vt


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion ``p -> R @ p + t``.

    The rotation is re-orthonormalized (polar projection) on
    construction when ``R^T R`` deviates from the identity by more than
    ``ORTHO_TOL``; small float drift below that threshold is kept as-is.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite transform")
        defect = np.max(np.abs(r.T @ r - np.eye(3)))
        if defect > ORTHO_TOL:
            r = _polar_orthonormalize(r)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def as_matrix(self):
        g = np.eye(4)
        g[:3, :3] = self.rotation
        g[:3, 3] = self.translation
        return g


def identity():
    return RigidTransform(np.eye(3), np.zeros(3))


def se3_exp(xi):
    """Exponential map from a twist to a RigidTransform.

    Rodrigues form for ``theta = |w| >= SMALL_ANGLE``; below that the
    second-order series is used (exact at zero).
    """
    xi = np.asarray(xi, dtype=float).reshape(6)
    w, v = xi[:3], xi[3:]
    theta = np.linalg.norm(w)
    wx = skew(w)
    wx2 = wx @ wx
    if theta < SMALL_ANGLE:
        # series: sin(t)/t ~ 1, (1-cos t)/t^2 ~ 1/2, (t-sin t)/t^3 ~ 1/6
        r = np.eye(3) + wx + 0.5 * wx2
        vmat = np.eye(3) + 0.5 * wx + wx2 / 6.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
        c = (theta - np.sin(theta)) / theta**3
        r = np.eye(3) + a * wx + b * wx2
        vmat = np.eye(3) + b * wx + c * wx2
    return RigidTransform(r, vmat @ v)


def transform_points(g, pts):
    """Apply ``g`` to an (N, 3) array of points."""
    pts = np.asarray(pts, dtype=float)
    return pts @ g.rotation.T + g.translation


def compose(a, b):
    """Composition ``a * b`` (apply ``b`` first, then ``a``)."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def inverse(g):
    rt = g.rotation.T
    return RigidTransform(rt, -rt @ g.translation)


def point_pose_jacobian(p):
    """d(se3_exp(eps * e_k) @ p)/d eps at eps = 0, as a (3, 6) matrix.

    Column k is the velocity of ``p`` under the k-th twist generator;
    the rotational block is ``-skew(p)`` (equivalently ``skew(p).T``)
    and the translational block the identity.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    out = np.empty((3, 6))
    out[:, :3] = -skew(p)
    out[:, 3:] = np.eye(3)
    return out


def rotation_angle(r):
    """Rotation angle of ``r`` in radians, in [0, pi]."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def random_rotation(rng):
    """Uniform random rotation (QR of a Gaussian matrix, sign-fixed)."""
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, [0, 1]] = q[:, [1, 0]]
    return q


def random_twist(rng, max_rot, max_trans):
    """Twist with rotation angle <= max_rot (rad), |v| chosen so the
    resulting translation magnitude is <= max_trans."""
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    w = axis * rng.uniform(0.0, max_rot)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    # pick v so that the translation of se3_exp has the sampled norm
    mag = rng.uniform(0.0, max_trans)
    g = se3_exp(np.concatenate([w, direction]))
    tn = np.linalg.norm(g.translation)
    v = direction * (mag / tn) if tn > 0 else np.zeros(3)
    return np.concatenate([w, v])

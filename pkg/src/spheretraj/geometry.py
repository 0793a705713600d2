"""Closed-form Riemannian primitives on the unit two-sphere.

Points and tangent vectors are plain numpy arrays with the three components
on the last axis; every function broadcasts over leading axes. Tangent
vectors at p are vectors orthogonal to p in the ambient inner product.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AntipodalOrIdenticalError,
    AntipodalPointsError,
    MixedBasePointsError,
)

#: inner products within this of -1 count as antipodal
ANTIPODAL_TOL = 1e-12
#: constructors absorb norm / tangency drift up to this and reject beyond
DRIFT_TOL = 1e-6


def sphere_point(coords) -> np.ndarray:
    """Validate and renormalize a point (or array of points) on the sphere.

    Inputs whose Euclidean norm is within ``DRIFT_TOL`` of 1 are renormalized;
    anything further off is rejected rather than silently fixed.
    """
    x = np.asarray(coords, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"expected 3-vectors on the last axis, got shape {x.shape}")
    n = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(n - 1.0) > DRIFT_TOL):
        worst = float(np.max(np.abs(n - 1.0)))
        raise ValueError(f"point norm off the unit sphere by {worst:.3e} (limit {DRIFT_TOL})")
    return x / n[..., None]


def tangent_vector(base, vec) -> np.ndarray:
    """Validate a tangent vector at ``base``, projecting out small radial drift.

    A radial component larger than ``DRIFT_TOL`` is rejected as bad data.
    """
    p = np.asarray(base, dtype=float)
    v = np.asarray(vec, dtype=float)
    radial = np.sum(v * p, axis=-1)
    if np.any(np.abs(radial) > DRIFT_TOL):
        worst = float(np.max(np.abs(radial)))
        raise ValueError(f"radial component {worst:.3e} exceeds tangency limit {DRIFT_TOL}")
    return v - radial[..., None] * p


def project_tangent(p, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the tangent plane at ``p``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(v * p, axis=-1, keepdims=True) * p


def sphere_distance(p, q) -> np.ndarray | float:
    """Great-circle distance arccos<p,q>."""
    dot = np.clip(np.sum(np.asarray(p) * np.asarray(q), axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def geodesic_point(p, q, t):
    """Point at fraction ``t`` along the great circle from ``p`` to ``q``.

    (sin(theta(1-t)) p + sin(theta t) q) / sin(theta) with cos(theta) = <p,q>.
    Requires 0 < theta < pi.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dot = np.sum(p * q, axis=-1)
    if np.any(np.abs(dot) >= 1.0 - ANTIPODAL_TOL):
        raise AntipodalOrIdenticalError(
            "points are identical or antipodal; the great circle is not unique"
        )
    theta = np.arccos(np.clip(dot, -1.0, 1.0))[..., None]
    t = np.asarray(t, dtype=float)[..., None]
    return (np.sin(theta * (1.0 - t)) * p + np.sin(theta * t) * q) / np.sin(theta)


def transport_matrix(p, q) -> np.ndarray:
    """3x3 matrix of parallel transport along the minimizing geodesic p -> q.

    Acts correctly on tangent vectors at p only. v |-> v - 2<v,q>(p+q)/|p+q|^2.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = p + q
    denom = np.sum(s * s, axis=-1)[..., None, None]
    eye = np.eye(3)
    return eye - 2.0 * s[..., :, None] * q[..., None, :] / denom


def parallel_transport(v, p, q) -> np.ndarray:
    """Parallel transport of tangent vector ``v`` at ``p`` to ``q``.

    Along the shortest geodesic; raises for antipodal endpoints.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    dot = np.sum(p * q, axis=-1)
    if np.any(dot <= -1.0 + ANTIPODAL_TOL):
        raise AntipodalPointsError("cannot transport between antipodal points")
    s = p + q
    coef = 2.0 * np.sum(v * q, axis=-1) / np.sum(s * s, axis=-1)
    return v - coef[..., None] * s


def exp_map(p, v) -> np.ndarray:
    """Exponential map cos(|v|) p + sin(|v|) v/|v|; returns p exactly for |v| ~ 0."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    small = norm < 1e-12
    safe = np.where(small, 1.0, norm)
    out = np.cos(norm) * p + np.sin(norm) * (v / safe)
    return np.where(small, np.broadcast_to(p, out.shape), out)


def log_map(p, q) -> np.ndarray:
    """Inverse exponential map: the tangent vector at ``p`` pointing to ``q``.

    (q - p cos(theta)) theta / sin(theta); zero for q = p, undefined for q = -p.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dot = np.sum(p * q, axis=-1)
    if np.any(dot <= -1.0 + ANTIPODAL_TOL):
        raise AntipodalPointsError("log map is undefined for antipodal points")
    theta = np.arccos(np.clip(dot, -1.0, 1.0))[..., None]
    w = q - dot[..., None] * p
    sin = np.sin(theta)
    factor = np.where(sin < 1e-12, 1.0, theta / np.where(sin < 1e-12, 1.0, sin))
    return w * factor


def curvature_tensor(x, y, z, base=None) -> np.ndarray:
    """Riemannian curvature tensor R(x,y)z = <y,z>x - <x,z>y on S^2.

    When ``base`` is given, all three vectors are checked to be tangent at it;
    mixing vectors from different base points raises.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if base is not None:
        p = np.asarray(base, dtype=float)
        for name, vec in (("x", x), ("y", y), ("z", z)):
            radial = np.abs(np.sum(vec * p, axis=-1))
            if np.any(radial > DRIFT_TOL):
                raise MixedBasePointsError(
                    f"argument {name} is not tangent at the given base point"
                )
    return np.sum(y * z, axis=-1)[..., None] * x - np.sum(x * z, axis=-1)[..., None] * y


def cross_matrix(a) -> np.ndarray:
    """Skew matrix [a]_x with [a]_x v = a x v."""
    a = np.asarray(a, dtype=float)
    zeros = np.zeros(a.shape[:-1])
    rows = np.stack(
        [
            np.stack([zeros, -a[..., 2], a[..., 1]], axis=-1),
            np.stack([a[..., 2], zeros, -a[..., 0]], axis=-1),
            np.stack([-a[..., 1], a[..., 0], zeros], axis=-1),
        ],
        axis=-2,
    )
    return rows


def rodrigues_rotation(axis, theta) -> np.ndarray:
    """Rotation by ``theta`` about the unit ``axis``.

    I cos(theta) + sin(theta) [axis]_x + (1 - cos(theta)) axis (x) axis.
    """
    axis = np.asarray(axis, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)[..., None, None]
    s = np.sin(theta)[..., None, None]
    outer = axis[..., :, None] * axis[..., None, :]
    return np.eye(3) * c + s * cross_matrix(axis) + (1.0 - c) * outer


def random_point(rng, size=None) -> np.ndarray:
    """Uniformly random point(s) on the sphere."""
    shape = (3,) if size is None else (size, 3)
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def random_tangent(rng, p, scale=1.0) -> np.ndarray:
    """Random tangent vector at ``p`` with i.i.d. normal coordinates."""
    v = project_tangent(p, rng.standard_normal(np.shape(p)) * scale)
    return v

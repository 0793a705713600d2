"""Geometry of the vector bundle of (start point, tangent velocity curve) pairs.

A path in the bundle has a baseline curve on the sphere and a tangent curve
carried along it. Geodesics have constant-speed circular-arc baselines, so the
search for a geodesic between two pairs reduces to a one-parameter sweep over
the family of circular arcs joining the start points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation

from . import geometry as geo
from .errors import (
    AntipodalOrIdenticalError,
    AntipodalStartPointsError,
    FrameDegenerateError,
    GridMismatchError,
    SingularSystemError,
)
from .trajectory import TsrvcPair

#: start points closer than this are treated as coincident (degenerate baseline)
COINCIDENT_TOL = 1e-9
#: number of transport steps along one arc
ARC_TRANSPORT_STEPS = 50
#: size of the arc-angle search grid
THETA_GRID = 72
#: refinement tolerance for the arc-angle search
THETA_XATOL = 1e-4


def _seed_tangent(p: np.ndarray) -> np.ndarray:
    """Deterministic unit tangent at p: e3 x p, falling back to e1 x p near the poles."""
    for axis in (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])):
        v = np.cross(axis, p)
        norm = np.linalg.norm(v)
        if norm >= 1e-6:
            return v / norm
    raise FrameDegenerateError("no usable seed vector for the frame at this point")


@dataclass(frozen=True)
class ArcBaseline:
    """Circular arc from p1 to p2, realized as s |-> exp(s A) p1 for a skew generator A."""

    generator: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    theta: float | None = None

    def __post_init__(self):
        a = np.asarray(self.generator, dtype=float)
        if a.shape != (3, 3) or np.max(np.abs(a + a.T)) > 1e-9:
            raise ValueError("generator must be a 3x3 antisymmetric matrix")
        p1 = geo.sphere_point(self.p1)
        p2 = geo.sphere_point(self.p2)
        object.__setattr__(self, "generator", a)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)
        if geo.sphere_distance(self.point(1.0), p2) > 1e-6:
            raise ValueError("generator does not carry p1 to p2")

    @property
    def rotation_vector(self) -> np.ndarray:
        a = self.generator
        return np.array([a[2, 1], a[0, 2], a[1, 0]])

    @property
    def length(self) -> float:
        """Arc length of the baseline; the rotation speed |A p1| is constant in s."""
        return float(np.linalg.norm(self.generator @ self.p1))

    def point(self, s) -> np.ndarray:
        """Baseline point exp(s A) p1 via the closed-form rotation."""
        rv = self.rotation_vector
        angle = np.linalg.norm(rv)
        if angle < 1e-15:
            s = np.asarray(s, dtype=float)
            return np.broadcast_to(self.p1, np.shape(s) + (3,)).copy() if s.ndim else self.p1.copy()
        axis = rv / angle
        rot = geo.rodrigues_rotation(axis, np.asarray(s, dtype=float) * angle)
        return rot @ self.p1

    def is_degenerate(self) -> bool:
        return np.linalg.norm(self.rotation_vector) < 1e-15


def degenerate_arc(p) -> ArcBaseline:
    """Constant baseline used when the two start points coincide."""
    p = geo.sphere_point(p)
    return ArcBaseline(np.zeros((3, 3)), p, p, theta=0.0)


def arc_family(p1, p2, theta: float) -> ArcBaseline:
    """Member of the one-parameter family of circular arcs from p1 to p2.

    Builds frames [p, v, p x v] at both endpoints, twists the second frame by
    ``theta`` about p2, and takes the matrix log of the frame-to-frame rotation
    as the arc generator.
    """
    p1 = geo.sphere_point(p1)
    p2 = geo.sphere_point(p2)
    dot = float(np.dot(p1, p2))
    if abs(dot) >= 1.0 - geo.ANTIPODAL_TOL:
        raise AntipodalOrIdenticalError("arc family needs distinct, non-antipodal endpoints")
    v1 = _seed_tangent(p1)
    v2 = geo.rodrigues_rotation(p2, float(theta)) @ _seed_tangent(p2)
    f1 = np.stack([p1, v1, np.cross(p1, v1)], axis=1)
    f2 = np.stack([p2, v2, np.cross(p2, v2)], axis=1)
    rotvec = Rotation.from_matrix(f2 @ f1.T).as_rotvec()
    return ArcBaseline(geo.cross_matrix(rotvec), p1, p2, theta=float(theta) % (2.0 * np.pi))


def arc_transport_matrix(arc: ArcBaseline, reverse: bool = False,
                         steps: int = ARC_TRANSPORT_STEPS) -> np.ndarray:
    """Parallel transport along the arc as a composed 3x3 matrix.

    The arc is discretized into ``steps`` short geodesic hops; the matrix acts
    correctly on tangent vectors at the source endpoint only.
    """
    if arc.is_degenerate():
        return np.eye(3)
    pts = arc.point(np.linspace(0.0, 1.0, steps + 1))
    if reverse:
        pts = pts[::-1]
    acc = np.eye(3)
    for k in range(steps):
        acc = geo.transport_matrix(pts[k], pts[k + 1]) @ acc
    return acc


def transport_along_arc(q, arc: ArcBaseline, reverse: bool = False,
                        steps: int = ARC_TRANSPORT_STEPS) -> np.ndarray:
    """Transport one tangent vector or a (T, 3) stack of them along the arc."""
    mat = arc_transport_matrix(arc, reverse=reverse, steps=steps)
    return np.asarray(q, dtype=float) @ mat.T


@dataclass(frozen=True)
class BundleTangent:
    """Tangent to the bundle at a pair: a base-point direction u and a curve w.

    Both components live in the tangent plane at ``base``.
    """

    base: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        p = geo.sphere_point(self.base)
        object.__setattr__(self, "base", p)
        object.__setattr__(self, "u", geo.tangent_vector(p, self.u))
        object.__setattr__(self, "w", geo.tangent_vector(p, np.asarray(self.w, dtype=float)))

    def norm(self) -> float:
        return float(np.sqrt(bundle_inner(self, self)))


def bundle_inner(a: BundleTangent, b: BundleTangent) -> float:
    """Riemannian inner product: u1.u2 plus the time integral of w1.w2."""
    if a.w.shape != b.w.shape:
        raise GridMismatchError("tangent curves have different grids")
    dx = 1.0 / (a.w.shape[0] - 1)
    return float(np.dot(a.u, b.u) + np.trapezoid(np.sum(a.w * b.w, axis=-1), dx=dx))


def path_length(a: TsrvcPair, b: TsrvcPair, arc: ArcBaseline,
                steps: int = ARC_TRANSPORT_STEPS) -> float:
    """Length of the constant-speed, covariantly-linear path over the given arc.

    sqrt(l_beta^2 + integral |q1 transported - q2|^2 dt).
    """
    if len(a) != len(b):
        raise GridMismatchError(f"curve grids differ: {len(a)} vs {len(b)}")
    if geo.sphere_distance(a.start, arc.p1) > 1e-6 or geo.sphere_distance(b.start, arc.p2) > 1e-6:
        raise ValueError("arc endpoints do not match the pair start points")
    q1_at_p2 = transport_along_arc(a.q, arc, steps=steps)
    diff = q1_at_p2 - b.q
    integ = np.trapezoid(np.sum(diff * diff, axis=-1), dx=a.delta)
    return float(np.sqrt(arc.length ** 2 + integ))


@dataclass(frozen=True)
class BundleGeodesic:
    """Geodesic between two pairs: optimal arc baseline plus the curve difference."""

    baseline: ArcBaseline
    q_start: TsrvcPair
    w_start: np.ndarray
    length: float

    def at(self, s: float, steps: int = ARC_TRANSPORT_STEPS) -> TsrvcPair:
        """Pair at fraction ``s`` along the geodesic: the covariantly linear
        interpolant (q1 + s w1) carried to the baseline point."""
        qs = self.q_start.q + s * self.w_start
        if self.baseline.is_degenerate():
            return TsrvcPair(self.baseline.p1, qs)
        pts = self.baseline.point(np.linspace(0.0, s, steps + 1))
        acc = np.eye(3)
        for k in range(steps):
            acc = geo.transport_matrix(pts[k], pts[k + 1]) @ acc
        return TsrvcPair(pts[-1], qs @ acc.T)


def _check_starts(a: TsrvcPair, b: TsrvcPair) -> float:
    dot = float(np.dot(a.start, b.start))
    if dot <= -1.0 + geo.ANTIPODAL_TOL:
        raise AntipodalStartPointsError("start points are antipodal")
    return dot


def theta_grid(count: int = THETA_GRID) -> np.ndarray:
    return np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)


def geodesic(a: TsrvcPair, b: TsrvcPair, theta_count: int = THETA_GRID,
             steps: int = ARC_TRANSPORT_STEPS, xatol: float = THETA_XATOL) -> BundleGeodesic:
    """Geodesic between two pairs by exhaustive arc-angle search plus local refinement."""
    if len(a) != len(b):
        raise GridMismatchError(f"curve grids differ: {len(a)} vs {len(b)}")
    dot = _check_starts(a, b)
    if dot >= 1.0 - COINCIDENT_TOL:
        arc = degenerate_arc(a.start)
        w = b.q - a.q
        length = float(np.sqrt(np.trapezoid(np.sum(w * w, axis=-1), dx=a.delta)))
        return BundleGeodesic(arc, a, w, length)

    thetas = theta_grid(theta_count)
    lengths = np.array([path_length(a, b, arc_family(a.start, b.start, t), steps=steps)
                        for t in thetas])
    k = int(np.argmin(lengths))
    spacing = 2.0 * np.pi / theta_count

    def objective(t: float) -> float:
        return path_length(a, b, arc_family(a.start, b.start, t % (2.0 * np.pi)), steps=steps)

    res = minimize_scalar(objective, bounds=(thetas[k] - spacing, thetas[k] + spacing),
                          method="bounded", options={"xatol": xatol})
    best_theta = float(res.x) % (2.0 * np.pi)
    best_len = float(res.fun)
    if lengths[k] < best_len:
        best_theta, best_len = float(thetas[k]), float(lengths[k])
    arc = arc_family(a.start, b.start, best_theta)
    w = transport_along_arc(b.q, arc, reverse=True, steps=steps) - a.q
    return BundleGeodesic(arc, a, w, best_len)


def geodesic_distance(a: TsrvcPair, b: TsrvcPair, **kwargs) -> float:
    return geodesic(a, b, **kwargs).length


def bundle_log(a: TsrvcPair, b: TsrvcPair, **kwargs) -> BundleTangent:
    """Inverse exponential map: the shooting vector at ``a`` that reaches ``b``.

    u is the initial baseline velocity of the optimal arc (length-scaled), and
    w is the transported curve difference.
    """
    g = geodesic(a, b, **kwargs)
    arc = g.baseline
    if arc.is_degenerate():
        u = np.zeros(3)
    else:
        ap = arc.generator @ arc.p1
        u = arc.length * ap / np.linalg.norm(ap)
    return BundleTangent(a.start, u, g.w_start)


def _curvature_operator(q: np.ndarray, w: np.ndarray, delta: float) -> np.ndarray:
    """Time-integrated curvature operator u |-> integral R(q(t), w(t)) u dt as a 3x3 matrix."""
    outer = q[:, :, None] * w[:, None, :] - w[:, :, None] * q[:, None, :]
    return np.trapezoid(outer, dx=delta, axis=0)


def bundle_exp(base: TsrvcPair, v: BundleTangent, s: float = 1.0,
               steps: int = ARC_TRANSPORT_STEPS) -> TsrvcPair:
    """Exponential map: shoot from ``base`` along ``v`` for bundle time ``s``.

    The skew generator of the baseline is solved from a stacked linear system:
    its action on the base point must equal u, and the projected second
    derivative of the baseline must match the curvature term -R(q, w) u.
    """
    if v.w.shape != base.q.shape:
        raise GridMismatchError("tangent curve grid does not match the base pair")
    if geo.sphere_distance(base.start, v.base) > 1e-9:
        raise ValueError("tangent is not based at the given pair")
    p1 = base.start
    u = v.u
    unorm = float(np.linalg.norm(u))
    if unorm >= np.pi:
        raise ValueError("baseline component of the tangent must have norm < pi")
    if unorm < 1e-12:
        return TsrvcPair(p1, base.q + s * v.w)

    rhs_curv = -(_curvature_operator(base.q, v.w, base.delta) @ u)
    rhs_curv = geo.project_tangent(p1, rhs_curv)
    proj = np.eye(3) - np.outer(p1, p1)
    rows = np.vstack([-geo.cross_matrix(p1), -proj @ geo.cross_matrix(u)])
    rhs = np.concatenate([u, rhs_curv])
    sol, _, rank, _ = np.linalg.lstsq(rows, rhs, rcond=None)
    if rank < 3:
        raise SingularSystemError(f"baseline system has rank {rank} < 3")
    if np.linalg.norm(np.cross(sol, p1) - u) > 1e-6 * max(unorm, 1.0):
        raise SingularSystemError("baseline generator fails to reproduce the shooting direction")

    angle = np.linalg.norm(sol)
    axis = sol / angle
    pts = geo.rodrigues_rotation(axis, np.linspace(0.0, s, steps + 1) * angle) @ p1
    acc = np.eye(3)
    for k in range(steps):
        acc = geo.transport_matrix(pts[k], pts[k + 1]) @ acc
    return TsrvcPair(pts[-1], (base.q + s * v.w) @ acc.T)

"""Pairwise phase-amplitude separation.

The alignment energy couples an arc-angle search over baselines with a
dynamic-programming search over time warps. The DP runs on the full T x T
lattice with local slopes restricted to {1/3, 1/2, 1, 2, 3}; bounded slopes
keep the warp away from pinching degeneracies while staying dense in the warp
group as T grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bundle as bd
from . import geometry as geo
from .errors import AntipodalStartPointsError, GridMismatchError
from .trajectory import TsrvcPair, Warp, warp_q, warp_tsrvc

#: allowed (row, column) lattice steps; slopes dj/di in {1/3, 1/2, 1, 2, 3}
DP_STEPS = ((1, 1), (1, 2), (2, 1), (1, 3), (3, 1))


@dataclass(frozen=True)
class AlignmentResult:
    """Outcome of registering pair ``b`` onto pair ``a``.

    ``distance`` is the registration-invariant (amplitude) distance, ``warp``
    the relative phase applied to ``b``, ``theta`` the optimal arc angle, and
    ``aligned`` the warped second pair. ``unaligned_distance`` is the plain
    bundle geodesic distance for reference.
    """

    distance: float
    warp: Warp
    theta: float
    aligned: TsrvcPair
    unaligned_distance: float


def _interp_rows(q: np.ndarray, frac: float) -> np.ndarray:
    """Rows of q at fractional index j - 1 + frac, aligned so entry j uses rows j-1, j."""
    out = np.empty_like(q)
    out[1:] = (1.0 - frac) * q[:-1] + frac * q[1:]
    out[0] = q[0]
    return out


def _step_cost_rows(qref: np.ndarray, qmov: np.ndarray, i: int) -> list[np.ndarray]:
    """Segment costs for every step type ending at row ``i``.

    Returns one (..., T) array per entry of DP_STEPS; entry j is the cost of
    arriving at lattice node (i, j) via that step (left-boundary entries are
    garbage and get masked by the DP). ``qref`` may carry leading batch axes.
    """
    n = qmov.shape[0]
    delta = 1.0 / (n - 1)

    def sq(ref_row, scale, mov):
        diff = ref_row[..., None, :] - scale * mov
        return np.sum(diff * diff, axis=-1)

    half = _interp_rows(qmov, 0.5)
    third1 = _interp_rows(qmov, 1.0 / 3.0)
    third2 = _interp_rows(qmov, 2.0 / 3.0)

    costs = []
    # (1, 1): slope 1
    costs.append(delta * sq(qref[..., i, :], 1.0, qmov))
    # (1, 2): slope 2
    costs.append(delta * sq(qref[..., i, :], np.sqrt(2.0), qmov))
    # (2, 1): slope 1/2, midpoint sample at column j - 1/2
    s = np.sqrt(0.5)
    c = sq(qref[..., i - 1, :], s, half) if i >= 1 else np.zeros(qref.shape[:-2] + (n,))
    costs.append(delta * (c + sq(qref[..., i, :], s, qmov)))
    # (1, 3): slope 3
    costs.append(delta * sq(qref[..., i, :], np.sqrt(3.0), qmov))
    # (3, 1): slope 1/3, samples at columns j - 2/3 and j - 1/3
    s = np.sqrt(1.0 / 3.0)
    if i >= 2:
        c = sq(qref[..., i - 2, :], s, third1) + sq(qref[..., i - 1, :], s, third2)
    else:
        c = np.zeros(qref.shape[:-2] + (n,))
    costs.append(delta * (c + sq(qref[..., i, :], s, qmov)))
    return costs


def dp_segment_cost(qref: np.ndarray, qmov: np.ndarray, i: int, j: int, step) -> float:
    """Cost the DP assigns to the lattice segment ending at (i, j) via ``step``.

    Exposed so an exhaustive path enumeration can price paths with the exact
    same numbers the DP uses.
    """
    k = DP_STEPS.index(tuple(step))
    return float(_step_cost_rows(qref, qmov, i)[k][..., j])


def _dp_tables(qref: np.ndarray, qmov: np.ndarray):
    """Forward DP over the slope-constrained lattice.

    ``qref`` has shape (..., T, 3); returns total costs (...,) at the far
    corner and int8 backpointer tables (..., T, T).
    """
    n = qmov.shape[0]
    lead = qref.shape[:-2]
    cost = np.full(lead + (n, n), np.inf)
    back = np.full(lead + (n, n), -1, dtype=np.int8)
    cost[..., 0, 0] = 0.0
    for i in range(1, n):
        rows = _step_cost_rows(qref, qmov, i)
        best = np.full(lead + (n,), np.inf)
        arg = np.full(lead + (n,), -1, dtype=np.int8)
        for k, (di, dj) in enumerate(DP_STEPS):
            if i - di < 0:
                continue
            cand = np.full(lead + (n,), np.inf)
            cand[..., dj:] = cost[..., i - di, :-dj] + rows[k][..., dj:]
            better = cand < best
            best = np.where(better, cand, best)
            arg = np.where(better, np.int8(k), arg)
        cost[..., i, :] = best
        back[..., i, :] = arg
    return cost[..., n - 1, n - 1], back


def _backtrack(back: np.ndarray, n: int) -> np.ndarray:
    """Recover the warp grid values from one backpointer table."""
    i, j = n - 1, n - 1
    nodes = [(i, j)]
    while (i, j) != (0, 0):
        k = int(back[i, j])
        if k < 0:
            raise RuntimeError("backtrack hit an unreachable node")
        di, dj = DP_STEPS[k]
        i, j = i - di, j - dj
        nodes.append((i, j))
    nodes.reverse()
    path = np.array(nodes, dtype=float)
    gamma = np.interp(np.arange(n), path[:, 0], path[:, 1]) / (n - 1)
    return gamma


def dp_warp(qref: np.ndarray, qmov: np.ndarray) -> tuple[Warp, float]:
    """Optimal warp of ``qmov`` onto ``qref`` over the slope-constrained lattice.

    Both inputs are (T, 3) tangent curves at a common point; returns the
    minimizing warp and its lattice cost.
    """
    qref = np.asarray(qref, dtype=float)
    qmov = np.asarray(qmov, dtype=float)
    if qref.shape != qmov.shape:
        raise GridMismatchError(f"curve grids differ: {qref.shape} vs {qmov.shape}")
    total, back = _dp_tables(qref, qmov)
    return Warp(_backtrack(back, qmov.shape[0])), float(total)


def _energy(a: TsrvcPair, qref_at_b: np.ndarray, b: TsrvcPair, gamma: Warp,
            arc_len: float) -> float:
    """Alignment energy at a fixed arc and warp, by the canonical quadrature."""
    diff = qref_at_b - warp_q(b.q, gamma)
    return arc_len ** 2 + float(np.trapezoid(np.sum(diff * diff, axis=-1), dx=a.delta))


def amplitude_distance(a: TsrvcPair, b: TsrvcPair, theta_count: int = bd.THETA_GRID,
                       steps: int = bd.ARC_TRANSPORT_STEPS) -> AlignmentResult:
    """Registration-invariant distance between two pairs.

    Sweeps the arc-angle grid, solving the warp by dynamic programming at each
    angle, and keeps the best (angle, warp) combination. The identity warp at
    the unaligned-geodesic angle is always a candidate, so the result never
    exceeds the unaligned distance.
    """
    if len(a) != len(b):
        raise GridMismatchError(f"curve grids differ: {len(a)} vs {len(b)}")
    dot = float(np.dot(a.start, b.start))
    if dot <= -1.0 + geo.ANTIPODAL_TOL:
        raise AntipodalStartPointsError("start points are antipodal")

    identity = Warp.identity(len(a))
    if dot >= 1.0 - bd.COINCIDENT_TOL:
        gamma, _ = dp_warp(a.q, b.q)
        d_id = np.sqrt(_energy(a, a.q, b, identity, 0.0))
        d_dp = np.sqrt(_energy(a, a.q, b, gamma, 0.0))
        if d_dp <= d_id:
            best_warp, dist = gamma, d_dp
        else:
            best_warp, dist = identity, d_id
        return AlignmentResult(float(dist), best_warp, 0.0,
                               warp_tsrvc(b, best_warp), float(d_id))

    g = bd.geodesic(a, b, theta_count=theta_count, steps=steps)
    theta_d = g.baseline.theta
    thetas = np.append(bd.theta_grid(theta_count), theta_d)
    arcs = [bd.arc_family(a.start, b.start, t) for t in thetas]
    arc_lens = np.array([arc.length for arc in arcs])
    qrefs = np.stack([bd.transport_along_arc(a.q, arc, steps=steps) for arc in arcs])

    dp_costs, back = _dp_tables(qrefs, b.q)
    energies = arc_lens ** 2 + dp_costs
    k = int(np.argmin(energies))
    gamma = Warp(_backtrack(back[k], len(a)))

    # canonical evaluation; the identity warp at the geodesic arc caps the result
    d_best = np.sqrt(_energy(a, qrefs[k], b, gamma, arc_lens[k]))
    candidates = [(d_best, gamma, float(thetas[k]))]
    candidates.append((g.length, identity, float(theta_d)))
    dist, best_warp, best_theta = min(candidates, key=lambda c: c[0])
    return AlignmentResult(float(dist), best_warp, best_theta % (2.0 * np.pi),
                           warp_tsrvc(b, best_warp), float(g.length))


def pairwise_distance_matrix(dataset, **kwargs) -> np.ndarray:
    """Symmetrized amplitude distances between every pair of items.

    The one-sided optimization is asymmetric at finite resolution, so entries
    are averaged: (d(i, j) + d(j, i)) / 2.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 items")
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                dij = amplitude_distance(dataset[i], dataset[j], **kwargs).distance
                dji = amplitude_distance(dataset[j], dataset[i], **kwargs).distance
            except AntipodalStartPointsError as exc:
                raise AntipodalStartPointsError(
                    f"items {i} and {j}: {exc}"
                ) from exc
            out[i, j] = out[j, i] = 0.5 * (dij + dji)
    return out

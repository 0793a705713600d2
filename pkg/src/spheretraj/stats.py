"""Statistics of trajectory amplitudes: Karcher mean, tangent-space PCA, sampling.

All statistics live in the tangent space at the Karcher mean of the aligned
dataset. Shooting vectors (the inverse exponential map of each aligned item)
are the common currency: the mean drives them to zero on average, PCA
decomposes their covariance, and the wrapped Gaussian model pushes Gaussian
coefficients back through the exponential map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bundle as bd
from . import geometry as geo
from .errors import DegenerateMeanError, EmptyDatasetError
from .registration import amplitude_distance
from .trajectory import Trajectory, TsrvcPair, Warp, integrate

log = logging.getLogger(__name__)


@dataclass
class KarcherResult:
    """Karcher mean of amplitudes plus everything the iteration produced.

    ``aligned`` holds each item warped onto the mean (the amplitudes),
    ``phases`` the warps that did it, and ``shooting`` the tangent vectors
    from the mean to each aligned item.
    """

    mean: TsrvcPair
    aligned: list[TsrvcPair]
    phases: list[Warp]
    shooting: list[bd.BundleTangent]
    iterations: int
    final_gradient_norm: float
    converged: bool
    objective: list[float] = field(default_factory=list)


def _medoid_index(dataset, **kwargs) -> int:
    """Index of the item minimizing summed squared unaligned distances."""
    n = len(dataset)
    if n == 1:
        return 0
    dists = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = bd.geodesic_distance(dataset[i], dataset[j], **kwargs)
            dists[i, j] = dists[j, i] = d
    return int(np.argmin(np.sum(dists ** 2, axis=1)))


def _mean_tangent(shooting) -> bd.BundleTangent:
    u = np.mean([s.u for s in shooting], axis=0)
    w = np.mean([s.w for s in shooting], axis=0)
    return bd.BundleTangent(shooting[0].base, u, w)


def karcher_mean(dataset, step: float = 0.5, tol: float = 1e-3, max_iter: int = 50,
                 init: TsrvcPair | None = None, theta_count: int = bd.THETA_GRID,
                 polish_tol: float = 1e-8, polish_max_iter: int = 200) -> KarcherResult:
    """Karcher mean of the dataset under the amplitude distance.

    Each iteration aligns every item to the current mean, averages the
    shooting vectors, and steps along the average with the exponential map.
    A step that increases the objective is retried with half the step size
    (floor 1e-3). After the gradient drops below ``tol`` with re-alignment, a
    polish phase with frozen warps drives it to ``polish_tol`` so that the
    shooting vectors of the returned mean average to zero to high precision.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("cannot average an empty dataset")
    mean = init if init is not None else dataset[_medoid_index(dataset, theta_count=theta_count)]

    def align_all(m):
        results = [amplitude_distance(m, item, theta_count=theta_count) for item in dataset]
        obj = float(sum(r.distance ** 2 for r in results))
        return results, obj

    aligns, obj = align_all(mean)
    objective = [obj]
    eps = step
    grad_norm = np.inf
    iterations = 0
    converged = n == 1

    for _ in range(max_iter if n > 1 else 0):
        shooting = [bd.bundle_log(mean, r.aligned, theta_count=theta_count) for r in aligns]
        grad = _mean_tangent(shooting)
        grad_norm = float(np.linalg.norm(grad.u)) + float(
            np.sqrt(np.trapezoid(np.sum(grad.w * grad.w, axis=-1), dx=mean.delta)))
        if grad_norm < tol:
            converged = True
            break
        moved = False
        while True:
            candidate = bd.bundle_exp(mean, grad, s=eps)
            cand_aligns, cand_obj = align_all(candidate)
            if cand_obj <= obj + 1e-12:
                mean, aligns, obj = candidate, cand_aligns, cand_obj
                moved = True
                break
            if eps <= 1e-3:
                break
            eps = max(eps / 2.0, 1e-3)
        iterations += 1
        objective.append(obj)
        if not moved:
            converged = grad_norm < tol
            break

    # polish with frozen warps: pure tangent-mean fixed-point iteration
    aligned_pairs = [r.aligned for r in aligns]
    shooting = [bd.bundle_log(mean, ap, theta_count=theta_count) for ap in aligned_pairs]
    if n > 1:
        for _ in range(polish_max_iter):
            grad = _mean_tangent(shooting)
            grad_norm = float(np.linalg.norm(grad.u)) + float(
                np.sqrt(np.trapezoid(np.sum(grad.w * grad.w, axis=-1), dx=mean.delta)))
            if grad_norm < polish_tol:
                break
            mean = bd.bundle_exp(mean, grad, s=min(step, 0.5))
            shooting = [bd.bundle_log(mean, ap, theta_count=theta_count) for ap in aligned_pairs]
        converged = converged or grad_norm < tol

    if not converged:
        log.warning("karcher mean stopped after %d iterations with gradient %.3e >= tol %.1e",
                    iterations, grad_norm, tol)
    return KarcherResult(
        mean=mean,
        aligned=aligned_pairs,
        phases=[r.warp for r in aligns],
        shooting=shooting,
        iterations=iterations,
        final_gradient_norm=grad_norm if n > 1 else 0.0,
        converged=converged,
        objective=objective,
    )


@dataclass
class CrossSectionalSummary:
    """Extrinsic pointwise mean track and per-index 3x3 sample covariances."""

    mean_track: Trajectory
    variance_at: list[tuple[int, np.ndarray, float]]

    def traces(self) -> np.ndarray:
        return np.array([t for _, _, t in self.variance_at])


def cross_sectional_summary(dataset, sample_indices=None) -> CrossSectionalSummary:
    """Pointwise extrinsic mean (renormalized) and covariance of a trajectory set."""
    if len(dataset) == 0:
        raise EmptyDatasetError("no trajectories to summarize")
    lengths = {len(t) for t in dataset}
    if len(lengths) != 1:
        raise ValueError("trajectories must share a common grid")
    stack = np.stack([t.samples for t in dataset])  # (n, T, 3)
    n, T, _ = stack.shape
    avg = stack.mean(axis=0)
    norms = np.linalg.norm(avg, axis=-1)
    if np.any(norms < 1e-6):
        k = int(np.argmin(norms))
        raise DegenerateMeanError(f"extrinsic average at index {k} has norm {norms[k]:.2e}")
    mean_track = Trajectory(avg / norms[:, None])

    if sample_indices is None:
        sample_indices = range(T)
    variance_at = []
    for idx in sample_indices:
        pts = stack[:, idx, :]
        centered = pts - pts.mean(axis=0)
        denom = max(n - 1, 1)
        cov = centered.T @ centered / denom
        variance_at.append((int(idx), cov, float(np.trace(cov))))
    return CrossSectionalSummary(mean_track, variance_at)


def tangent_frame(p: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal frame (v1, v2) of the tangent plane at ``p``."""
    for axis in (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])):
        v1 = np.cross(axis, p)
        norm = np.linalg.norm(v1)
        if norm >= 1e-6:
            v1 = v1 / norm
            return np.stack([v1, np.cross(p, v1)])
    raise RuntimeError("unreachable: no frame seed")


@dataclass
class PcaModel:
    """Tangent-space PCA of shooting vectors, the two blocks kept separate.

    The base-point block u is 2-dimensional in the frame (v1, v2); the curve
    block w is flattened to 2T coordinates. Bases come from the SVD of the
    uncentered sample covariances with 1/(n-1) normalization.
    """

    mean: TsrvcPair
    frame: np.ndarray            # (2, 3) rows v1, v2
    u_basis: np.ndarray          # (2, 2) columns are principal directions
    u_singular: np.ndarray       # (2,)
    w_basis: np.ndarray          # (2T, r)
    w_singular: np.ndarray       # (r,)
    w_spectrum: np.ndarray       # full spectrum, for explained-variance ratios
    r: int
    coefficients: np.ndarray     # (r, n) principal coefficients of the training w

    def explained_variance_ratio(self, component: str) -> np.ndarray:
        if component == "u":
            total = float(np.sum(self.u_singular))
            return self.u_singular / total if total > 0 else np.zeros_like(self.u_singular)
        if component == "w":
            total = float(np.sum(self.w_spectrum))
            return (self.w_singular / total) if total > 0 else np.zeros_like(self.w_singular)
        raise ValueError(f"component must be 'u' or 'w', got {component!r}")

    def w_to_curve(self, flat: np.ndarray) -> np.ndarray:
        """Map 2T frame coordinates back to a (T, 3) tangent curve at the mean."""
        T = len(self.mean)
        return np.outer(flat[:T], self.frame[0]) + np.outer(flat[T:], self.frame[1])

    def u_to_vector(self, coords: np.ndarray) -> np.ndarray:
        return coords[0] * self.frame[0] + coords[1] * self.frame[1]


def fit_pca(result: KarcherResult, r: int) -> PcaModel:
    """PCA of the shooting vectors at the Karcher mean, u and w blocks separate."""
    shooting = result.shooting
    n = len(shooting)
    T = len(result.mean)
    if r > min(n - 1, 2 * T) or r < 1:
        raise ValueError(f"rank {r} outside valid range [1, {min(n - 1, 2 * T)}]")
    frame = tangent_frame(result.mean.start)

    u_coords = np.stack([frame @ s.u for s in shooting], axis=1)           # (2, n)
    w_coords = np.stack(
        [np.concatenate([s.w @ frame[0], s.w @ frame[1]]) for s in shooting], axis=1
    )                                                                       # (2T, n)

    k_u = u_coords @ u_coords.T / (n - 1)
    k_w = w_coords @ w_coords.T / (n - 1)
    u_basis, u_sing, _ = np.linalg.svd(k_u)
    w_basis, w_sing, _ = np.linalg.svd(k_w, hermitian=True)
    coeffs = w_basis[:, :r].T @ w_coords
    return PcaModel(
        mean=result.mean,
        frame=frame,
        u_basis=u_basis,
        u_singular=u_sing,
        w_basis=w_basis[:, :r],
        w_singular=w_sing[:r],
        w_spectrum=w_sing,
        r=r,
        coefficients=coeffs,
    )


def pca_mode_path(model: PcaModel, component: str, index: int, tau: float) -> Trajectory:
    """Trajectory at ``tau`` along one principal direction, via the exponential map."""
    T = len(model.mean)
    if component == "u":
        if not 0 <= index < 2:
            raise IndexError(f"u component index {index} out of range [0, 2)")
        u = model.u_to_vector(tau * model.u_singular[index] * model.u_basis[:, index])
        w = np.zeros((T, 3))
    elif component == "w":
        if not 0 <= index < model.r:
            raise IndexError(f"w component index {index} out of range [0, {model.r})")
        u = np.zeros(3)
        w = model.w_to_curve(tau * model.w_singular[index] * model.w_basis[:, index])
    else:
        raise ValueError(f"component must be 'u' or 'w', got {component!r}")
    tangent = bd.BundleTangent(model.mean.start, u, w)
    return integrate(bd.bundle_exp(model.mean, tangent, s=1.0))


def _draw_coefficients(model: PcaModel, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian principal coefficients: the singular values are variances."""
    c_u = rng.standard_normal((n, 2)) * np.sqrt(model.u_singular)
    c_w = rng.standard_normal((n, model.r)) * np.sqrt(model.w_singular)
    return c_u, c_w


def sample_wrapped_gaussian(model: PcaModel, n: int, seed: int) -> list[Trajectory]:
    """Draw trajectories from the wrapped Gaussian model at the mean.

    Coefficients are sampled independently per block, mapped to a tangent
    vector, and pushed through the exponential map. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    c_u, c_w = _draw_coefficients(model, n, rng)
    out = []
    for k in range(n):
        u = model.u_to_vector(model.u_basis @ c_u[k])
        w = model.w_to_curve(model.w_basis @ c_w[k])
        tangent = bd.BundleTangent(model.mean.start, geo.project_tangent(model.mean.start, u), w)
        out.append(integrate(bd.bundle_exp(model.mean, tangent, s=1.0)))
    return out

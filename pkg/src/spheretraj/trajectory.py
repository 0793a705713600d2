"""Discrete spherical trajectories, their velocity-curve representation, and time warps.

A trajectory is sampled on the uniform grid t_k = k/(T-1), k = 0..T-1, so both
endpoints are on the grid and warps live on the same grid. Integrals over time
use the trapezoid rule with spacing 1/(T-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import DegenerateTrajectoryError, GridMismatchError

#: samples moving slower than this are treated as stationary
ZERO_VELOCITY_TOL = 1e-10


def uniform_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of a path on the sphere.

    ``samples`` has shape (T, 3); rows are renormalized unit vectors and
    consecutive rows must not be antipodal.
    """

    samples: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] < 2:
            raise ValueError(f"expected (T>=2, 3) samples, got shape {x.shape}")
        x = geo.sphere_point(x)
        dots = np.sum(x[:-1] * x[1:], axis=-1)
        if np.any(dots <= -1.0 + geo.ANTIPODAL_TOL):
            k = int(np.argmin(dots))
            raise DegenerateTrajectoryError(f"samples {k} and {k + 1} are antipodal")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return uniform_grid(len(self))

    @property
    def delta(self) -> float:
        return 1.0 / (len(self) - 1)

    @property
    def start(self) -> np.ndarray:
        return self.samples[0]


@dataclass(frozen=True)
class TsrvcPair:
    """A trajectory's invariant representation: starting point plus the
    square-root-scaled velocity curve transported to the start.

    ``q`` has shape (T, 3); every row is tangent at ``start``.
    """

    start: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = geo.sphere_point(self.start)
        q = geo.tangent_vector(p, np.asarray(self.q, dtype=float))
        if q.ndim != 2 or q.shape[1] != 3 or q.shape[0] < 2:
            raise ValueError(f"expected (T>=2, 3) velocity curve, got shape {q.shape}")
        object.__setattr__(self, "start", p)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.q.shape[0]

    @property
    def delta(self) -> float:
        return 1.0 / (len(self) - 1)

    def l2_norm(self) -> float:
        """L2 norm of the velocity curve under the time integral."""
        return float(np.sqrt(np.trapezoid(np.sum(self.q * self.q, axis=-1), dx=self.delta)))


@dataclass(frozen=True)
class Warp:
    """Non-decreasing reparameterization of [0, 1] sampled on the uniform grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 1 or v.size < 2:
            raise ValueError(f"expected a 1-d grid of warp values, got shape {v.shape}")
        if abs(v[0]) > 1e-9 or abs(v[-1] - 1.0) > 1e-9:
            raise ValueError(f"warp endpoints must be 0 and 1, got {v[0]}, {v[-1]}")
        if np.any(np.diff(v) < -1e-12):
            raise ValueError("warp values must be non-decreasing")
        v = np.maximum.accumulate(np.clip(v, 0.0, 1.0))
        v[0], v[-1] = 0.0, 1.0
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def identity(cls, n: int) -> "Warp":
        return cls(uniform_grid(n))

    def gradient(self) -> np.ndarray:
        """Time derivative by central differences, clamped below at 0."""
        g = np.gradient(self.values, 1.0 / (len(self) - 1))
        return np.maximum(g, 0.0)

    def inverse(self) -> "Warp":
        """Numerical inverse, defined by reflecting the graph."""
        grid = uniform_grid(len(self))
        # break flat spots so the values are strictly increasing for interp
        ramp = self.values + np.linspace(0.0, 1.0, len(self)) * 1e-12
        inv = np.interp(grid, ramp / ramp[-1], grid)
        inv[0], inv[-1] = 0.0, 1.0
        return Warp(inv)


def _slerp_segments(samples: np.ndarray, src_times: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise great-circle interpolant of ``samples`` at ``times``."""
    times = np.clip(np.asarray(times, dtype=float), src_times[0], src_times[-1])
    idx = np.searchsorted(src_times, times, side="right") - 1
    idx = np.clip(idx, 0, len(src_times) - 2)
    t0 = src_times[idx]
    span = src_times[idx + 1] - t0
    frac = np.where(span > 0, (times - t0) / np.where(span > 0, span, 1.0), 0.0)
    p = samples[idx]
    q = samples[idx + 1]
    dot = np.clip(np.sum(p * q, axis=-1), -1.0, 1.0)
    theta = np.arccos(dot)[:, None]
    sin = np.sin(theta)
    ok = sin[:, 0] > 1e-12
    out = np.where(frac[:, None] < 0.5, p, q).astype(float)
    if np.any(ok):
        f = frac[ok, None]
        th = theta[ok]
        out[ok] = (np.sin(th * (1.0 - f)) * p[ok] + np.sin(th * f) * q[ok]) / sin[ok]
    exact = frac == 0.0
    out[exact] = p[exact]
    exact_hi = frac == 1.0
    out[exact_hi] = q[exact_hi]
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def interpolate(alpha: Trajectory, times) -> np.ndarray:
    """Sample ``alpha`` at arbitrary times in [0, 1] by great-circle interpolation."""
    return _slerp_segments(alpha.samples, alpha.grid, np.atleast_1d(times))


def tsrvc_of(alpha: Trajectory) -> TsrvcPair:
    """Square-root velocity curve of ``alpha`` transported to its starting point.

    Velocities come from forward differences on the grid; each scaled velocity
    is carried back to the start by chaining the closed-form transport through
    the sample sequence. The last sample reuses the previous velocity.
    """
    x = alpha.samples
    n = len(alpha)
    delta = alpha.delta
    v = geo.log_map(x[:-1], x[1:]) / delta
    speed = np.linalg.norm(v, axis=-1)
    scaled = np.zeros_like(v)
    moving = speed > ZERO_VELOCITY_TOL
    scaled[moving] = v[moving] / np.sqrt(speed[moving])[:, None]

    q = np.empty((n, 3))
    q[0] = scaled[0]
    acc = np.eye(3)
    for k in range(1, n - 1):
        acc = acc @ geo.transport_matrix(x[k], x[k - 1])
        q[k] = acc @ scaled[k]
    q[n - 1] = q[n - 2]
    return TsrvcPair(x[0], q)


def integrate(pair: TsrvcPair) -> Trajectory:
    """Reconstruct the trajectory whose velocity-curve representation is ``pair``.

    Steps forward with the exponential map, transporting each q sample along
    the reconstruction so far.
    """
    q = pair.q
    n = len(pair)
    delta = pair.delta
    out = np.empty((n, 3))
    out[0] = pair.start
    out[1] = geo.exp_map(out[0], delta * q[0] * np.linalg.norm(q[0]))
    acc = np.eye(3)
    for k in range(1, n - 1):
        acc = geo.transport_matrix(out[k - 1], out[k]) @ acc
        q_par = acc @ q[k]
        out[k + 1] = geo.exp_map(out[k], delta * q_par * np.linalg.norm(q_par))
    return Trajectory(out)


def warp_trajectory(alpha: Trajectory, gamma: Warp) -> Trajectory:
    """Composition alpha o gamma by great-circle interpolation at the warped times."""
    if len(alpha) != len(gamma):
        raise GridMismatchError(f"trajectory grid {len(alpha)} != warp grid {len(gamma)}")
    return Trajectory(interpolate(alpha, gamma.values))


def warp_q(q: np.ndarray, gamma: Warp) -> np.ndarray:
    """Apply the warp action (q o gamma) sqrt(gamma') to a sampled tangent curve."""
    n = q.shape[0]
    if n != len(gamma):
        raise GridMismatchError(f"curve grid {n} != warp grid {len(gamma)}")
    grid = uniform_grid(n)
    idx = np.clip(np.searchsorted(grid, gamma.values, side="right") - 1, 0, n - 2)
    frac = (gamma.values - grid[idx]) * (n - 1)
    resampled = q[idx] * (1.0 - frac[:, None]) + q[idx + 1] * frac[:, None]
    return resampled * np.sqrt(gamma.gradient())[:, None]


def warp_tsrvc(pair: TsrvcPair, gamma: Warp) -> TsrvcPair:
    """Warp action on the velocity-curve representation; the start point is unchanged."""
    return TsrvcPair(pair.start, warp_q(pair.q, gamma))


def resample(alpha: Trajectory, n_new: int) -> Trajectory:
    """Uniformly resample to ``n_new`` points by great-circle interpolation."""
    if n_new < 2:
        raise ValueError("need at least 2 samples")
    return Trajectory(interpolate(alpha, uniform_grid(n_new)))

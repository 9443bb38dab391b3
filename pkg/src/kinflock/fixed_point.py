"""Fixed-point construction for the regularized nonlinear field.

The candidate velocity fields live on a uniform space-time grid with
multilinear interpolation and nearest-value clamping outside the box; both
operations are sup-norm non-expansive, so grid fields bounded by M0 stay
bounded by M0.  The map applies the linear characteristic solver driven by
the input field and reads off the regularized moment quotient j/(delta+rho)
at every node.  A (optionally damped) Picard iteration searches for a fixed
point; convergence is reported, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidInputError, InvariantViolationError
from .kinetic import advance_characteristics, moments_at_points
from .phase import Ensemble

BOUND_SLACK = 1e-12


@dataclass
class FieldGrid:
    """Space-time sampled velocity field with multilinear interpolation.

    values has shape (K+1, n_1, ..., n_d, d): time-major nodes, vector
    components last.  Queries outside the box are clamped to the nearest
    node, preserving both the sup bound and the Lipschitz property.
    """

    times: np.ndarray
    axes: tuple
    values: np.ndarray
    bound: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        d = len(self.axes)
        expected = (len(self.times),) + tuple(len(a) for a in self.axes) + (d,)
        if self.values.shape != expected:
            raise InvalidInputError(
                f"values shape {self.values.shape} != expected {expected}")
        self._interp = None

    @property
    def dim(self):
        return len(self.axes)

    @property
    def node_points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def sup_norm(self):
        """Maximum Euclidean field magnitude over all nodes."""
        if self.values.size == 0:
            return 0.0
        return float(np.sqrt((self.values ** 2).sum(axis=-1)).max())

    def _build_interp(self):
        pts = (self.times,) + self.axes
        squeeze = [i for i, p in enumerate(pts) if len(p) == 1]
        grid = tuple(p for p in pts if len(p) > 1)
        vals = np.squeeze(self.values, axis=tuple(squeeze)) if squeeze else self.values
        if not grid:
            const = vals.reshape(self.dim)
            self._interp = lambda q: np.broadcast_to(const, (len(q), self.dim)).copy()
            self._active = []
            return
        rgi = RegularGridInterpolator(grid, vals, method="linear",
                                      bounds_error=False, fill_value=None)
        active = [i for i in range(len(pts)) if len(pts[i]) > 1]
        self._interp = lambda q: rgi(q[:, active])
        self._active = active

    def evaluate(self, t, X):
        """Interpolated field at time t and points X (N, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._interp is None:
            self._build_interp()
        q = np.empty((len(X), 1 + self.dim))
        q[:, 0] = np.clip(t, self.times[0], self.times[-1])
        for k in range(self.dim):
            q[:, 1 + k] = np.clip(X[:, k], self.axes[k][0], self.axes[k][-1])
        return np.asarray(self._interp(q), dtype=float).reshape(len(X), self.dim)

    def copy_with_values(self, values):
        return FieldGrid(self.times.copy(), self.axes, np.asarray(values, float), self.bound)

    @staticmethod
    def zero(times, axes, bound):
        d = len(axes)
        shape = (len(times),) + tuple(len(a) for a in axes) + (d,)
        return FieldGrid(np.asarray(times, float), tuple(axes), np.zeros(shape), bound)


def default_field_box(f0: Ensemble, T, margin=0.0):
    """Spatial box covering the initial support inflated by M0*T per side,
    so characteristics never leave the interpolation region."""
    m0 = f0.initial_support_bound
    if f0.n:
        lo = f0.x.min(axis=0) - m0 * T - margin
        hi = f0.x.max(axis=0) + m0 * T + margin
    else:
        lo = np.full(f0.dim, -1.0)
        hi = np.full(f0.dim, 1.0)
    return lo, hi


def apply_F(E: FieldGrid, f0: Ensemble, lam, r, delta):
    """One application of the fixed-point map: solve the linear transport
    problem driven by E, then evaluate j/(delta + rho) at every node.

    The output inherits E's grid and satisfies the same sup bound.
    """
    if not (delta > 0):
        raise InvalidInputError("delta must be positive")
    if E.sup_norm() > E.bound + BOUND_SLACK:
        raise InvalidInputError(
            f"input field violates its sup bound: {E.sup_norm():.17g} > {E.bound:.17g}")
    nodes = E.node_points
    out = np.zeros_like(E.values)
    ens = f0.copy()
    n_t = len(E.times)
    for k in range(n_t):
        t_k = E.times[k]
        if ens.n:
            rho, j = moments_at_points(ens, nodes, r)
            field_vals = j / (delta + rho)[:, None]
        else:
            field_vals = np.zeros((len(nodes), E.dim))
        out[k] = field_vals.reshape(out[k].shape)
        if k + 1 < n_t and ens.n:
            dt = E.times[k + 1] - t_k
            ens = advance_characteristics(ens, lambda t, X: E.evaluate(t_k, X), dt)
    result = E.copy_with_values(out)
    if result.sup_norm() > E.bound + BOUND_SLACK:
        raise InvariantViolationError(
            f"map output exceeds the sup bound: {result.sup_norm():.17g}")
    return result


@dataclass
class PicardResult:
    field: FieldGrid
    residuals: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def picard_solve(f0: Ensemble, lam, r, delta, T, n_time_nodes, n_space_nodes,
                 tol, max_iter, damping=1.0, box=None):
    """Iterate E <- (1-theta) E + theta F[E] from the zero field until the
    discrete sup-norm update falls below tol.

    Every iterate is checked against the sup bound M0 (which holds by
    construction).  Non-convergence is reported via the result, not raised.
    """
    if not (tol > 0 and max_iter >= 1):
        raise InvalidInputError("tol must be > 0 and max_iter >= 1")
    if not (0 < damping <= 1):
        raise InvalidInputError("damping must be in (0, 1]")
    m0 = f0.initial_support_bound
    if box is None:
        lo, hi = default_field_box(f0, T)
    else:
        lo, hi = (np.asarray(b, float) for b in box)
    times = np.linspace(0.0, T, n_time_nodes)
    axes = tuple(np.linspace(lo[k], hi[k], n_space_nodes) for k in range(f0.dim))
    E = FieldGrid.zero(times, axes, m0)
    result = PicardResult(E)
    for it in range(1, max_iter + 1):
        F = apply_F(E, f0, lam, r, delta)
        if F.sup_norm() > m0 + BOUND_SLACK:
            raise InvariantViolationError(
                f"Picard iterate {it} violates the sup bound")
        residual = float(np.sqrt(((F.values - E.values) ** 2).sum(axis=-1)).max())
        new_vals = (1.0 - damping) * E.values + damping * F.values
        E = E.copy_with_values(new_vals)
        result.residuals.append(residual)
        result.iterations = it
        result.field = E
        if residual < tol:
            result.converged = True
            break
    return result


def lipschitz_modulus(grid: FieldGrid, sample_pairs=200, rng=None):
    """Empirical spatial and temporal Lipschitz moduli of the interpolated
    field, from random finite differences inside the box."""
    rng = np.random.default_rng(0) if rng is None else rng
    lo = np.array([a[0] for a in grid.axes])
    hi = np.array([a[-1] for a in grid.axes])
    t0, t1 = grid.times[0], grid.times[-1]
    spatial = 0.0
    temporal = 0.0
    for _ in range(sample_pairs):
        t = rng.uniform(t0, t1)
        x1 = rng.uniform(lo, hi)
        x2 = rng.uniform(lo, hi)
        dx = np.linalg.norm(x2 - x1)
        if dx > 1e-12:
            dE = np.linalg.norm(grid.evaluate(t, x2[None]) - grid.evaluate(t, x1[None]))
            spatial = max(spatial, dE / dx)
        x = rng.uniform(lo, hi)
        ta, tb = sorted(rng.uniform(t0, t1, size=2))
        if tb - ta > 1e-12:
            dE = np.linalg.norm(grid.evaluate(tb, x[None]) - grid.evaluate(ta, x[None]))
            temporal = max(temporal, dE / (tb - ta))
    return spatial, temporal

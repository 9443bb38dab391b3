"""Weighted-particle solver for the nonlinear kinetic alignment equation
with neighborhood-averaged velocity field, including its delta-regularized
variant.

Particles move along characteristics dX/dt = V, dV/dt = lam*(E - V).  Each
step freezes the field at the step start and applies the exact solution of
the resulting linear ODE, so the velocity update is a convex combination of
the old velocity and the (bounded) field value.  Density values and phase
volumes are multiplied by reciprocal exponential factors, keeping particle
masses exactly constant.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, InvariantViolationError
from .phase import Ensemble, LocalMoments
from .spatial import SpatialIndex

SUPPORT_SLACK = 1e-9


@dataclass
class InitialDistributionSpec:
    """Description of the initial phase-space density f0 and how to
    discretize it into particles.

    kinds:
      box_indicator            amplitude on x_bounds x v_bounds boxes
      product_gaussian_truncated  separable Gaussian bumps, hard-truncated
                                  to the stated boxes
      two_bump                 two Gaussian bumps at opposite positions and
                               velocities
      custom_grid              explicit callable f0(x, v)
    sampling: ("tensor_grid", n_x, n_v) or ("monte_carlo", N, seed)
    """

    kind: str
    dim: int
    x_bounds: np.ndarray  # (dim, 2)
    v_bounds: np.ndarray  # (dim, 2)
    amplitude: float = 1.0
    sampling: tuple = ("tensor_grid", 16, 16)
    # gaussian / two_bump parameters
    x_centers: Optional[np.ndarray] = None  # (n_bumps, dim)
    v_centers: Optional[np.ndarray] = None
    x_sigma: float = 0.25
    v_sigma: float = 0.25
    custom_f0: Optional[object] = None

    def __post_init__(self):
        self.x_bounds = np.asarray(self.x_bounds, dtype=float).reshape(self.dim, 2)
        self.v_bounds = np.asarray(self.v_bounds, dtype=float).reshape(self.dim, 2)
        if np.any(self.x_bounds[:, 1] < self.x_bounds[:, 0]):
            raise InvalidInputError("x_bounds must be ordered")
        if np.any(self.v_bounds[:, 1] < self.v_bounds[:, 0]):
            raise InvalidInputError("v_bounds must be ordered")
        if self.amplitude < 0:
            raise InvalidInputError("amplitude must be >= 0")
        if self.kind == "two_bump" and self.x_centers is None:
            self.x_centers = np.stack([self.x_bounds.mean(axis=1) - 0.5,
                                       self.x_bounds.mean(axis=1) + 0.5])
            self.v_centers = np.stack([self.v_bounds.mean(axis=1) + 0.5,
                                       self.v_bounds.mean(axis=1) - 0.5])
        if self.kind == "custom_grid" and self.custom_f0 is None:
            raise InvalidInputError("custom_grid spec needs custom_f0 callable")

    @property
    def support_bound(self):
        """Radius M0 of the velocity support ball implied by v_bounds."""
        corner = np.max(np.abs(self.v_bounds), axis=1)
        return float(np.sqrt((corner ** 2).sum()))

    def density(self, x, v):
        """Evaluate f0 at points x (N, d), v (N, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        inside = np.all((x >= self.x_bounds[:, 0]) & (x <= self.x_bounds[:, 1]), axis=1)
        inside &= np.all((v >= self.v_bounds[:, 0]) & (v <= self.v_bounds[:, 1]), axis=1)
        if self.kind == "box_indicator":
            vals = self.amplitude * np.ones(len(x))
        elif self.kind == "product_gaussian_truncated":
            xc = self.x_bounds.mean(axis=1) if self.x_centers is None else np.asarray(self.x_centers, float).reshape(self.dim)
            vc = self.v_bounds.mean(axis=1) if self.v_centers is None else np.asarray(self.v_centers, float).reshape(self.dim)
            vals = self.amplitude * np.exp(
                -((x - xc) ** 2).sum(axis=1) / (2 * self.x_sigma ** 2)
                - ((v - vc) ** 2).sum(axis=1) / (2 * self.v_sigma ** 2)
            )
        elif self.kind == "two_bump":
            xc = np.asarray(self.x_centers, float).reshape(-1, self.dim)
            vc = np.asarray(self.v_centers, float).reshape(-1, self.dim)
            vals = np.zeros(len(x))
            for k in range(len(xc)):
                vals += self.amplitude * np.exp(
                    -((x - xc[k]) ** 2).sum(axis=1) / (2 * self.x_sigma ** 2)
                    - ((v - vc[k]) ** 2).sum(axis=1) / (2 * self.v_sigma ** 2)
                )
        elif self.kind == "custom_grid":
            vals = np.asarray(self.custom_f0(x, v), dtype=float).reshape(len(x))
        else:
            raise InvalidInputError(f"unknown initial kind {self.kind!r}")
        return np.where(inside, vals, 0.0)


def sample_initial(spec: InitialDistributionSpec, lam, radius, rng=None):
    """Discretize f0 into an Ensemble.

    tensor_grid places a particle at every phase-cell center with the cell
    volume as its phase volume; monte_carlo draws from the normalized f0 by
    rejection sampling and assigns equal masses.
    """
    d = spec.dim
    mode = spec.sampling[0]
    if mode == "tensor_grid":
        _, n_x, n_v = spec.sampling
        x_axes, dx = [], 1.0
        for k in range(d):
            lo, hi = spec.x_bounds[k]
            edges = np.linspace(lo, hi, n_x + 1)
            x_axes.append(0.5 * (edges[:-1] + edges[1:]))
            dx *= (hi - lo) / n_x
        v_axes, dv = [], 1.0
        for k in range(d):
            lo, hi = spec.v_bounds[k]
            edges = np.linspace(lo, hi, n_v + 1)
            v_axes.append(0.5 * (edges[:-1] + edges[1:]))
            dv *= (hi - lo) / n_v
        Xc = np.stack([g.ravel() for g in np.meshgrid(*x_axes, indexing="ij")], axis=1)
        Vc = np.stack([g.ravel() for g in np.meshgrid(*v_axes, indexing="ij")], axis=1)
        xx = np.repeat(Xc, len(Vc), axis=0)
        vv = np.tile(Vc, (len(Xc), 1))
        dens = spec.density(xx, vv)
        keep = dens > 0
        xx, vv, dens = xx[keep], vv[keep], dens[keep]
        vol = np.full(len(xx), dx * dv)
        mass = dens * vol
    elif mode == "monte_carlo":
        _, n_particles, seed = spec.sampling
        rng = np.random.default_rng(seed) if rng is None else rng
        sup = _sup_density(spec)
        total = _total_mass(spec)
        if total == 0.0 or n_particles == 0:
            xx = np.zeros((0, d)); vv = np.zeros((0, d))
            dens = np.zeros(0); vol = np.ones(0); mass = np.zeros(0)
        else:
            xs, vs = [], []
            need = n_particles
            while need > 0:
                m = max(4 * need, 256)
                cx = rng.uniform(spec.x_bounds[:, 0], spec.x_bounds[:, 1], size=(m, d))
                cv = rng.uniform(spec.v_bounds[:, 0], spec.v_bounds[:, 1], size=(m, d))
                u = rng.uniform(0.0, sup, size=m)
                acc = u < spec.density(cx, cv)
                cx, cv = cx[acc], cv[acc]
                take = min(need, len(cx))
                xs.append(cx[:take]); vs.append(cv[:take])
                need -= take
            xx = np.concatenate(xs); vv = np.concatenate(vs)
            dens = spec.density(xx, vv)
            mass = np.full(n_particles, total / n_particles)
            vol = mass / dens
    else:
        raise InvalidInputError(f"unknown sampling mode {mode!r}")
    return Ensemble(
        t=0.0, dim=d, lam=lam, radius=radius,
        x=xx, v=vv, mass=mass, density_value=dens, phase_volume=vol,
        initial_support_bound=spec.support_bound,
    )


def _sup_density(spec):
    if spec.kind == "box_indicator":
        return spec.amplitude
    if spec.kind == "two_bump":
        return 2 * spec.amplitude
    if spec.kind == "product_gaussian_truncated":
        return spec.amplitude
    # probe on a grid for custom densities
    grid = sample_initial_grid_values(spec)
    return float(grid.max()) * 1.05 + 1e-300


def _total_mass(spec, n=None):
    """Midpoint quadrature of f0 over its bounding boxes."""
    vals, cellvol = _grid_eval(spec, n)
    return float(vals.sum() * cellvol)


def sample_initial_grid_values(spec, n=None):
    vals, _ = _grid_eval(spec, n)
    return vals


def _grid_eval(spec, n=None):
    d = spec.dim
    if n is None:
        # keep the phase-space mesh near 10^6 points regardless of dimension
        n = {1: 512, 2: 32, 3: 10}[d]
    axes = []
    cellvol = 1.0
    for k in range(d):
        lo, hi = spec.x_bounds[k]
        edges = np.linspace(lo, hi, n + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
        cellvol *= (hi - lo) / n
    for k in range(d):
        lo, hi = spec.v_bounds[k]
        edges = np.linspace(lo, hi, n + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
        cellvol *= (hi - lo) / n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    vals = spec.density(pts[:, :d], pts[:, d:])
    return vals, cellvol


def local_moments(ensemble: Ensemble, x, r, index: Optional[SpatialIndex] = None):
    """Mass and momentum of the ensemble inside the strict radius-r ball."""
    if not (r > 0):
        raise InvalidInputError("r must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    if ensemble.n == 0:
        return LocalMoments(0.0, np.zeros(ensemble.dim))
    if index is None:
        index = SpatialIndex(ensemble.x, r)
    nbr = index.query_radius(x, r)
    rho = float(ensemble.mass[nbr].sum())
    j = (ensemble.mass[nbr, None] * ensemble.v[nbr]).sum(axis=0)
    return LocalMoments(rho, j)


def velocity_field(ensemble: Ensemble, x, r, index=None):
    """u = j/rho on the support, zero where rho vanishes."""
    m = local_moments(ensemble, x, r, index)
    if m.rho > 0:
        return m.j / m.rho
    return np.zeros(ensemble.dim)


def velocity_field_delta(ensemble: Ensemble, x, r, delta, index=None):
    """Regularized field u_delta = j/(delta + rho); strictly bounded by the
    velocity support radius."""
    if not (delta > 0):
        raise InvalidInputError("delta must be positive")
    m = local_moments(ensemble, x, r, index)
    return m.j / (delta + m.rho)


def moments_at_points(ensemble: Ensemble, centers, r, index=None, threads=1):
    """Vectorized (rho, j) evaluation at many probe points."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    m = len(centers)
    rho = np.zeros(m)
    j = np.zeros((m, ensemble.dim))
    if ensemble.n == 0 or m == 0:
        return rho, j
    if index is None:
        index = SpatialIndex(ensemble.x, r)

    def work(lo, hi):
        for k in range(lo, hi):
            nbr = index.query_radius(centers[k], r)
            rho[k] = ensemble.mass[nbr].sum()
            j[k] = (ensemble.mass[nbr, None] * ensemble.v[nbr]).sum(axis=0)

    if threads > 1 and m > 64:
        bounds = np.linspace(0, m, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda ab: work(*ab), zip(bounds[:-1], bounds[1:])))
    else:
        work(0, m)
    return rho, j


def advance_characteristics(ensemble: Ensemble, field, dt):
    """One exact frozen-field step.

    `field` is either a callable (t, X) -> (N, d) array or a precomputed
    (N, d) array of field values at the particle positions.
    """
    if not (dt > 0):
        raise InvalidInputError("dt must be positive")
    ens = ensemble
    if callable(field):
        E = np.asarray(field(ens.t, ens.x), dtype=float).reshape(ens.n, ens.dim)
    else:
        E = np.asarray(field, dtype=float).reshape(ens.n, ens.dim)
    if not np.all(np.isfinite(E)):
        bad = int(np.nonzero(~np.isfinite(E).all(axis=1))[0][0])
        raise InvariantViolationError(
            f"non-finite field value at particle {bad}, x={ens.x[bad]}", index=bad)
    lam = ens.lam
    decay = np.exp(-lam * dt)
    dv = ens.v - E
    new_v = E + dv * decay
    new_x = ens.x + E * dt + dv * (1.0 - decay) / lam
    grow = np.exp(lam * ens.dim * dt)
    out = ens.copy()
    out.t = ens.t + dt
    out.x = new_x
    out.v = new_v
    out.density_value = ens.density_value * grow
    out.phase_volume = ens.phase_volume / grow
    return out


@dataclass
class KineticRunResult:
    snapshots: list = field(default_factory=list)  # list of Ensemble copies
    snapshot_steps: list = field(default_factory=list)


def run_linear(ensemble0: Ensemble, field, T, dt, snapshot_stride=1):
    """Advance the ensemble under a prescribed field evaluator
    (t, X) -> (N, d); the linear problem driven by a frozen external field."""
    if not (T > 0 and dt > 0):
        raise InvalidInputError("T and dt must be positive")
    n_steps = max(1, int(round(T / dt)))
    ens = ensemble0.copy()
    result = KineticRunResult([ens.copy()], [0])
    for step in range(1, n_steps + 1):
        if ens.n:
            ens = advance_characteristics(ens, field, dt)
        else:
            ens = ens.copy()
            ens.t += dt
        if step % snapshot_stride == 0 or step == n_steps:
            result.snapshots.append(ens.copy())
            result.snapshot_steps.append(step)
    return result


def run_self_consistent(ensemble0: Ensemble, T, dt, delta=0.0,
                        snapshot_stride=1, threads=1):
    """Self-consistent nonlinear run: at each step rebuild the spatial
    index, evaluate the (regularized) mean velocity field at every particle
    position from the current ensemble, and advance one frozen-field step.

    delta = 0 selects the unregularized field with its zero branch on empty
    neighborhoods.
    """
    if not (T > 0 and dt > 0):
        raise InvalidInputError("T and dt must be positive")
    if delta < 0:
        raise InvalidInputError("delta must be >= 0")
    n_steps = max(1, int(round(T / dt)))
    ens = ensemble0.copy()
    m0 = ens.initial_support_bound
    result = KineticRunResult([ens.copy()], [0])
    r = ens.radius
    for step in range(1, n_steps + 1):
        if ens.n:
            index = SpatialIndex(ens.x, r)
            rho, j = moments_at_points(ens, ens.x, r, index=index, threads=threads)
            if delta > 0:
                E = j / (delta + rho)[:, None]
            else:
                E = np.zeros_like(j)
                nz = rho > 0
                E[nz] = j[nz] / rho[nz, None]
            ens = advance_characteristics(ens, E, dt)
            speed = np.sqrt((ens.v ** 2).sum(axis=1))
            if speed.size and speed.max() > m0 + SUPPORT_SLACK:
                bad = int(speed.argmax())
                raise InvariantViolationError(
                    f"velocity support bound violated: |v|={speed.max():.17g} "
                    f"> M0={m0:.17g}", step=step, index=bad)
        else:
            ens = ens.copy()
            ens.t += dt
        if step % snapshot_stride == 0 or step == n_steps:
            result.snapshots.append(ens.copy())
            result.snapshot_steps.append(step)
    return result

"""Invariant checks and order parameters across solvers.

Every check is a pure function returning a CheckResult with the measured
value, the tolerance it was held to, and a pass flag; the report object
aggregates per-snapshot time series plus the assertion outcomes and
serializes to JSON/CSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidInputError
from .kinetic import moments_at_points
from .oracle import PhaseGrid, oracle_lp_norm, quadrature_pushforward
from .phase import AgentState, Ensemble


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class DiagnosticsReport:
    metadata: dict = field(default_factory=dict)
    records: list = field(default_factory=list)  # per-snapshot dicts
    assertions: list = field(default_factory=list)  # CheckResult list

    def add_check(self, check: CheckResult):
        self.assertions.append(check)

    @property
    def all_passed(self):
        return all(c.passed for c in self.assertions)

    def to_dict(self):
        return {
            "metadata": self.metadata,
            "records": self.records,
            "assertions": [asdict(c) for c in self.assertions],
        }


def _masses(trajectory):
    out = []
    for snap in trajectory:
        if isinstance(snap, Ensemble):
            out.append((snap.t, snap.total_mass))
        elif isinstance(snap, PhaseGrid):
            out.append((snap.t, snap.total_mass()))
        else:
            raise InvalidInputError(f"unsupported snapshot type {type(snap)!r}")
    return out


def check_mass(trajectory, tol=1e-12):
    """Relative drift of the total mass over the run."""
    if len(trajectory) < 2:
        raise InvalidInputError("need at least 2 snapshots")
    tm = _masses(trajectory)
    m0 = tm[0][1]
    if m0 == 0.0:
        drift = max(abs(m) for _, m in tm)
    else:
        drift = max(abs(m - m0) for _, m in tm) / abs(m0)
    return CheckResult("mass_conservation", drift, tol, drift <= tol)


def check_support(trajectory, m0, tol=1e-9):
    """max_t M(t) against the initial support radius M0."""
    peak = 0.0
    for snap in trajectory:
        if not isinstance(snap, Ensemble):
            raise InvalidInputError("support check applies to particle trajectories")
        peak = max(peak, snap.max_speed)
    return CheckResult("velocity_support_bound", peak, m0 + tol, peak <= m0 + tol)


def check_density_growth(trajectory, tol=1e-12):
    """density_value(t) = density_value(0) * e^{lam*d*t} per particle,
    exact by construction up to rounding."""
    first = trajectory[0]
    worst = 0.0
    for snap in trajectory[1:]:
        factor = np.exp(snap.lam * snap.dim * (snap.t - first.t))
        expected = first.density_value * factor
        nz = expected > 0
        if np.any(nz):
            rel = np.abs(snap.density_value[nz] - expected[nz]) / expected[nz]
            worst = max(worst, float(rel.max()))
    return CheckResult("pointwise_growth_law", worst, tol, worst <= tol)


def check_volume_law(trajectory, tol=1e-12):
    """phase_volume(t)/phase_volume(0) = e^{-lam*d*t} per particle."""
    first = trajectory[0]
    worst = 0.0
    for snap in trajectory[1:]:
        factor = np.exp(-snap.lam * snap.dim * (snap.t - first.t))
        expected = first.phase_volume * factor
        if len(expected):
            rel = np.abs(snap.phase_volume - expected) / expected
            worst = max(worst, float(rel.max()))
    return CheckResult("phase_volume_law", worst, tol, worst <= tol)


def check_oracle_sup(trajectory, tol=1e-9):
    """Grid max value against ||f0||_inf * e^{lam*t} at every snapshot."""
    f0_sup = trajectory[0].values.max() if trajectory[0].values.size else 0.0
    worst = 0.0
    for snap in trajectory:
        bound = f0_sup * np.exp(snap.lam * (snap.t - trajectory[0].t))
        if bound > 0:
            worst = max(worst, float(snap.values.max()) / bound - 1.0)
    return CheckResult("sup_growth_bound", worst, tol, worst <= tol)


def fit_lp_exponent(trajectory, p):
    """Least-squares slope of log ||f(t)||_p versus t for a grid run."""
    ts, logs = [], []
    for snap in trajectory:
        norm = oracle_lp_norm(snap, p)
        if norm > 0:
            ts.append(snap.t)
            logs.append(np.log(norm))
    if len(ts) < 2:
        raise InvalidInputError("need at least 2 snapshots with positive norm")
    slope = np.polyfit(ts, logs, 1)[0]
    return float(slope)


def check_lp_law(trajectory, p_list, lam, d=1, rel_tol=0.05, abs_tol=1e-3):
    """Fitted growth exponents of the linear grid run against
    lam*d*(p-1)/p; p = 1 is held to an absolute tolerance (target 0)."""
    results = []
    for p in p_list:
        target = lam * d * (p - 1) / p
        slope = fit_lp_exponent(trajectory, p)
        if target == 0.0:
            err = abs(slope)
            results.append(CheckResult(f"lp_law_p{p}", err, abs_tol, err <= abs_tol,
                                       {"slope": slope, "target": target}))
        else:
            err = abs(slope - target) / target
            results.append(CheckResult(f"lp_law_p{p}", err, rel_tol, err <= rel_tol,
                                       {"slope": slope, "target": target}))
    return results


def particle_lp_norm(ensemble: Ensemble, p):
    """L^p estimate reconstructed from the flow-deformed partition:
    (sum vol_i * f_i^p)^{1/p}."""
    if ensemble.n == 0:
        return 0.0
    return float((ensemble.phase_volume * ensemble.density_value ** p).sum() ** (1.0 / p))


def check_particle_lp_inequality(trajectory, p_list, slack=1e-9):
    """For the nonlinear particle solver only the upper bound
    ||f(t)||_p <= e^{lam*d*(p-1)t/p} ||f0||_p is asserted."""
    first = trajectory[0]
    results = []
    for p in p_list:
        base = particle_lp_norm(first, p)
        worst = 0.0
        for snap in trajectory[1:]:
            bound = base * np.exp(snap.lam * snap.dim * (p - 1) * (snap.t - first.t) / p)
            if bound > 0:
                worst = max(worst, particle_lp_norm(snap, p) / bound - 1.0)
        results.append(CheckResult(f"lp_inequality_p{p}", worst, slack, worst <= slack))
    return results


def pushforward_sum(ensemble: Ensemble, phi):
    """sum_i w_i phi(x_i, v_i); the particle-side reading of the
    measure-preservation identity."""
    if ensemble.n == 0:
        return 0.0
    return float((ensemble.mass * phi(ensemble.x, ensemble.v)).sum())


def check_pushforward(ens_final: Ensemble, grid_final: PhaseGrid, phis, rel_tol=0.02):
    """Particle pushforward sums against oracle quadrature for matched
    linear runs, one check per test function."""
    results = []
    for name, phi_p, phi_g in phis:
        a = pushforward_sum(ens_final, phi_p)
        b = quadrature_pushforward(grid_final, phi_g)
        scale = max(abs(a), abs(b), 1e-12)
        err = abs(a - b) / scale
        results.append(CheckResult(f"pushforward_{name}", err, rel_tol, err <= rel_tol,
                                   {"particle": a, "oracle": b}))
    return results


def flocking_metrics(obj):
    """(velocity variance about the mean, velocity diameter, spatial
    diameter); mass-weighted for ensembles, uniform for agent states."""
    if isinstance(obj, AgentState):
        v, x, w = obj.velocities, obj.positions, None
    elif isinstance(obj, Ensemble):
        v, x, w = obj.v, obj.x, obj.mass
    else:
        raise InvalidInputError(f"unsupported state type {type(obj)!r}")
    n = len(v)
    if n == 0:
        return 0.0, 0.0, 0.0
    if w is None or w.sum() == 0:
        mean = v.mean(axis=0)
        var = float(((v - mean) ** 2).sum(axis=1).mean())
    else:
        mean = (w[:, None] * v).sum(axis=0) / w.sum()
        var = float((w * ((v - mean) ** 2).sum(axis=1)).sum() / w.sum())
    return var, _diameter(v), _diameter(x)


def _diameter(pts, chunk=512):
    n = len(pts)
    if n < 2:
        return 0.0
    best = 0.0
    for a in range(0, n, chunk):
        pa = pts[a:a + chunk]
        d2 = ((pa[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def meanfield_distance(agents: AgentState, kinetic: Ensemble, probe_points, r):
    """L1-over-probe-grid distance between mass-normalized (rho_r, j_r)
    moment fields of the empirical agent measure and the kinetic ensemble."""
    probe_points = np.atleast_2d(np.asarray(probe_points, dtype=float))
    n = agents.n
    agent_ens = Ensemble(
        t=agents.t, dim=agents.dim, lam=kinetic.lam, radius=r,
        x=agents.positions, v=agents.velocities,
        mass=np.full(n, 1.0 / n) if n else np.zeros(0),
        density_value=np.ones(n), phase_volume=np.full(n, 1.0 / n) if n else np.ones(0),
    )
    rho_a, j_a = moments_at_points(agent_ens, probe_points, r)
    rho_k, j_k = moments_at_points(kinetic, probe_points, r)
    mk = kinetic.total_mass
    if mk > 0:
        rho_k = rho_k / mk
        j_k = j_k / mk
    diff = np.abs(rho_a - rho_k) + np.abs(j_a - j_k).sum(axis=1)
    return float(diff.mean())

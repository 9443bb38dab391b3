"""Discrete agent models: heading alignment, mean-field velocity alignment,
its cut-off variant, and the locally-normalized variant.

All right-hand sides are pure functions of the state.  The cut-off model
normalizes by the neighbor count N_i (which always includes i itself, so it
never divides by zero); the locally-normalized model divides by the summed
kernel weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import IntegrationBlowupError, InvalidInputError
from .phase import AgentState, HeadingState, wrap_angle
from .spatial import SpatialIndex


@dataclass
class InteractionKernel:
    """Pair interaction weight psi(s) >= 0, non-increasing.

    kind "indicator": psi(s) = 1 for s < r, else 0 (strict cut-off).
    kind "smooth": arbitrary callable, validated to be non-negative and
    non-increasing on a sample of radii.
    """

    kind: str
    r: float = 0.0
    psi: Optional[Callable] = None

    def __post_init__(self):
        if self.kind == "indicator":
            if not (self.r > 0):
                raise InvalidInputError("indicator kernel needs r > 0")
        elif self.kind == "smooth":
            if self.psi is None:
                raise InvalidInputError("smooth kernel needs a callable psi")
            s = np.linspace(0.0, 10.0, 64)
            vals = np.asarray([float(self.psi(si)) for si in s])
            if np.any(vals < 0):
                raise InvalidInputError("kernel must be non-negative")
            if np.any(np.diff(vals) > 1e-12):
                raise InvalidInputError("kernel must be non-increasing")
        else:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "indicator":
            return (np.abs(s) < self.r).astype(float)
        return np.vectorize(self.psi, otypes=[float])(s)

    def at_zero(self):
        return float(self(0.0))


def vicsek_step(state: HeadingState, r, noise_amplitude, rng):
    """One discrete update: advance positions with the current headings,
    then align each heading to the summed direction vector of the radius-r
    neighborhood (self included), plus uniform angular noise.

    A degenerate zero mean vector leaves the heading unchanged.
    """
    if noise_amplitude < 0:
        raise InvalidInputError("noise_amplitude must be >= 0")
    if not (r > 0):
        raise InvalidInputError("r must be positive")
    n = state.n
    new_pos = state.positions + state.speed * np.column_stack(
        [np.cos(state.headings), np.sin(state.headings)]
    )
    new_head = state.headings.copy()
    if n:
        index = SpatialIndex(state.positions, r)
        cos_t = np.cos(state.headings)
        sin_t = np.sin(state.headings)
        for i in range(n):
            nbr = index.query_radius(state.positions[i], r)
            sc, ss = cos_t[nbr].sum(), sin_t[nbr].sum()
            if sc * sc + ss * ss <= (len(nbr) * 1e-14) ** 2:
                continue  # numerically undefined mean direction: keep heading
            new_head[i] = np.arctan2(ss, sc)
        if noise_amplitude > 0:
            new_head += rng.uniform(-noise_amplitude / 2, noise_amplitude / 2, size=n)
    return HeadingState(state.t + 1, new_pos, wrap_angle(new_head), state.speed)


def cs_rhs(state: AgentState, lam, kernel: InteractionKernel):
    """Accelerations a_i = (lam/N) sum_j psi(|x_j - x_i|) (v_j - v_i)."""
    n = state.n
    if n == 0:
        return np.zeros((0, state.dim))
    diff = state.positions[None, :, :] - state.positions[:, None, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    w = kernel(dist)
    dv = state.velocities[None, :, :] - state.velocities[:, None, :]
    return (lam / n) * np.einsum("ij,ijk->ik", w, dv)


def cutoff_cs_rhs(state: AgentState, lam, r):
    """Accelerations a_i = (lam/N_i) sum_{|x_j-x_i|<r} (v_j - v_i), where
    N_i counts the strict-radius neighborhood including i itself."""
    if not (r > 0):
        raise InvalidInputError("r must be positive")
    n = state.n
    acc = np.zeros((n, state.dim))
    if n == 0:
        return acc
    index = SpatialIndex(state.positions, r)
    for i in range(n):
        nbr = index.query_radius(state.positions[i], r)
        acc[i] = lam * (state.velocities[nbr].mean(axis=0) - state.velocities[i])
    return acc


def mt_rhs(state: AgentState, lam, kernel: InteractionKernel):
    """Accelerations a_i = lam * (sum_j psi_ij v_j / sum_j psi_ij - v_i).

    Requires psi(0) > 0 so the denominator never vanishes.
    """
    if kernel.at_zero() <= 0:
        raise InvalidInputError("kernel must satisfy psi(0) > 0")
    n = state.n
    if n == 0:
        return np.zeros((0, state.dim))
    diff = state.positions[None, :, :] - state.positions[:, None, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    w = kernel(dist)
    denom = w.sum(axis=1)
    mean_v = (w @ state.velocities) / denom[:, None]
    return lam * (mean_v - state.velocities)


def integrate_agents(state: AgentState, rhs, dt, scheme="rk4", lam=None):
    """Advance one step with the given acceleration function.

    Schemes: "explicit_euler", "rk4", and "exponential".  The exponential
    scheme rewrites a_i = lam*(ubar_i - v_i) and applies the exact
    constant-field update, so per-agent speeds stay inside the convex hull
    of {v_j}; it is exact whenever the local mean ubar is constant in time.
    """
    if not (dt > 0):
        raise InvalidInputError("dt must be positive")
    x, v = state.positions, state.velocities
    if scheme == "explicit_euler":
        a = rhs(state)
        new_x = x + dt * v
        new_v = v + dt * a
    elif scheme == "rk4":
        def deriv(xs, vs):
            s = AgentState(state.t, state.dim, xs, vs)
            return vs, rhs(s)
        k1x, k1v = deriv(x, v)
        k2x, k2v = deriv(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = deriv(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = deriv(x + dt * k3x, v + dt * k3v)
        new_x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        new_v = v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    elif scheme == "exponential":
        if lam is None or not (lam > 0):
            raise InvalidInputError("exponential scheme needs lam > 0")
        a = rhs(state)
        ubar = v + a / lam
        decay = np.exp(-lam * dt)
        new_v = ubar + (v - ubar) * decay
        new_x = x + ubar * dt + (v - ubar) * (1.0 - decay) / lam
    else:
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    if not (np.all(np.isfinite(new_x)) and np.all(np.isfinite(new_v))):
        raise IntegrationBlowupError(f"non-finite state after step at t={state.t}")
    return AgentState(state.t + dt, state.dim, new_x, new_v)

"""Mixture energy, its dissipation along runs, and the steady-state solver.

The free energy of the coupled system is

    E[u] = dx * sum_j [ sum_i ( u_i^2/2 + V_i u_i + u_i (W_i*u_i)/2 )
                        + delta * sum_{i<l} u_i u_l ]

For |delta| < 1 it is strictly convex on the mass simplex, so the minimizer
is the unique steady state. It satisfies an obstacle-problem identity per
species,

    u_i = ( c_i - V_i - W_i*u_i - delta * sum_{l != i} u_l )_+

with Lagrange multipliers c_i fixed by the masses. steady_state solves this
with a damped fixed-point sweep, finding each c_i by bisection on the
monotone map c -> dx * sum_j (c - a_j)_+.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SolverError
from .fv import convolve


def energy(state, spec, grid):
    """E[u] for the current densities (see module docstring)."""
    u = state.u
    total = np.zeros(grid.j)
    for i, sp in enumerate(spec.species):
        v = sp.potential.on_grid(grid)
        conv = convolve(sp.kernel, u[i], grid)
        total += 0.5 * u[i] ** 2 + v * u[i] + 0.5 * u[i] * conv
    for i in range(spec.m):
        for l in range(i + 1, spec.m):
            total += spec.delta * u[i] * u[l]
    return float(grid.dx * total.sum())


def _solve_multiplier(a, mass, dx):
    """c with dx * sum_j (c - a_j)_+ = mass, by bracketed bisection."""
    if not np.all(np.isfinite(a)):
        raise SolverError("steady state: non-finite obstacle data")

    def excess(c):
        return dx * np.maximum(c - a, 0.0).sum() - mass

    lo = float(a.min())
    hi = lo + mass * a.size
    for _ in range(200):
        if excess(hi) >= 0.0:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise SolverError("steady state: multiplier bracket exhausted")
    for _ in range(300):
        if hi - lo <= 1e-13 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SteadyState:
    """Minimizer guess: densities, multipliers, and solver bookkeeping.

    residual is the sup-norm of the undamped fixed-point defect at exit;
    convergence means residual <= the tol passed to steady_state.
    """

    u: np.ndarray
    c: np.ndarray
    iterations: int
    residual: float


def steady_state(spec, grid, tol=1e-10, max_iter=20000, theta=0.5):
    """Energy minimizer at fixed masses via damped fixed-point iteration.

    Requires |delta| < 1 (strict convexity). Damping theta in (0, 1];
    theta=0.5 is robust for all couplings below 1. Non-convergence within
    max_iter is reported through the residual field, not raised.
    """
    if abs(spec.delta) >= 1.0:
        raise ConfigurationError(
            "steady_state needs |delta| < 1 for a unique minimizer"
        )
    if not 0 < theta <= 1:
        raise ConfigurationError("theta must lie in (0, 1]")
    masses = np.array([sp.mass for sp in spec.species])
    u = np.empty((spec.m, grid.j))
    u[:] = (masses / grid.length)[:, None]
    v_tab = np.stack([sp.potential.on_grid(grid) for sp in spec.species])

    c = np.zeros(spec.m)
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = np.empty_like(u)
        residual = 0.0
        for i, sp in enumerate(spec.species):
            a = v_tab[i] + convolve(sp.kernel, u[i], grid)
            for l in range(spec.m):
                if l != i:
                    a = a + spec.delta * u[l]
            c[i] = _solve_multiplier(a, masses[i], grid.dx)
            g[i] = np.maximum(c[i] - a, 0.0)
            residual = max(residual, float(np.max(np.abs(g[i] - u[i]))))
        u = (1.0 - theta) * u + theta * g
        if residual <= tol:
            break
    return SteadyState(u, c.copy(), iterations, residual)


def dissipation_series(records):
    """(t, E, dE) per consecutive record pair; empty for fewer than two."""
    out = []
    for prev, cur in zip(records, records[1:]):
        out.append((cur.t, cur.energy, cur.energy - prev.energy))
    return out


def count_energy_increases(series, tol=1e-10):
    """How many steps of a dissipation series gained more than tol*(1+|E|)."""
    return sum(1 for _, e, de in series if de > tol * (1.0 + abs(e)))

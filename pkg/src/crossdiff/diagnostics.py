"""Discrete norms, per-snapshot records, and run-level summary quantities.

All norms act on a single species row sampled at cell centers:

    l2_norm       sqrt(dx * sum u_j^2)
    h1_seminorm   sqrt(dx * sum ((u_{j+1}-u_j)/dx)^2)     (forward differences)
    tv_norm       sum |u_{j+1} - u_j|
    entropy_pos   dx * sum u_j (log u_j)_+                (0 log 0 = 0)

integrated_norms folds recorded snapshots into the three sweep quantities
(plain sums over record times, L2 terms squared inside, TV terms not —
that asymmetry is intentional and kept as defined):

    u_2T      = { sum_k sum_i ||u_i(t_k)||_l2^2 }^(1/2)
    grad_u_2T = { sum_k sum_i |u_i(t_k)|_h1^2   }^(1/2)
    tv_T      = { sum_k sum_i ||u_i(t_k)||_tv   }^(1/2)

energy_estimate_check evaluates a discrete entropy/gradient bound along a
recorded run; see its docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def l2_norm(u_row, grid):
    u_row = np.asarray(u_row, dtype=float)
    return math.sqrt(grid.dx * float((u_row**2).sum()))


def h1_seminorm(u_row, grid):
    u_row = np.asarray(u_row, dtype=float)
    d = np.diff(u_row) / grid.dx
    return math.sqrt(grid.dx * float((d**2).sum()))


def tv_norm(u_row):
    u_row = np.asarray(u_row, dtype=float)
    return float(np.abs(np.diff(u_row)).sum())


def entropy_pos(u_row, grid):
    u_row = np.asarray(u_row, dtype=float)
    out = np.zeros_like(u_row)
    above = u_row > 1.0
    out[above] = u_row[above] * np.log(u_row[above])
    return float(grid.dx * out.sum())


def _entropy_signed(u_row, grid):
    # dx * sum u log u with 0 log 0 = 0 (can be negative)
    u_row = np.asarray(u_row, dtype=float)
    out = np.zeros_like(u_row)
    pos = u_row > 0.0
    out[pos] = u_row[pos] * np.log(u_row[pos])
    return float(grid.dx * out.sum())


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Everything worth keeping about one snapshot (arrays are per species)."""

    t: float
    mass: np.ndarray
    min_density: np.ndarray
    l2: np.ndarray
    h1semi: np.ndarray
    tv: np.ndarray
    entropy_pos: np.ndarray
    energy: float
    u: np.ndarray = field(repr=False)


def make_record(state, spec, grid):
    from .energy import energy as _energy

    u = state.u
    return DiagnosticsRecord(
        t=state.t,
        mass=grid.dx * u.sum(axis=1),
        min_density=u.min(axis=1),
        l2=np.array([l2_norm(u[i], grid) for i in range(spec.m)]),
        h1semi=np.array([h1_seminorm(u[i], grid) for i in range(spec.m)]),
        tv=np.array([tv_norm(u[i]) for i in range(spec.m)]),
        entropy_pos=np.array([entropy_pos(u[i], grid) for i in range(spec.m)]),
        energy=_energy(state, spec, grid),
        u=u.copy(),
    )


@dataclass(frozen=True)
class SweepRecord:
    """One row of a coupling-strength sweep."""

    delta: float
    u_2T: float
    grad_u_2T: float
    tv_T: float


def integrated_norms(records, delta=float("nan")):
    """Fold a recorded run into the three sweep quantities (see module doc)."""
    if not records:
        raise ConfigurationError("integrated_norms needs at least one record")
    sq = sum(float((r.l2**2).sum()) for r in records)
    gsq = sum(float((r.h1semi**2).sum()) for r in records)
    tv = sum(float(r.tv.sum()) for r in records)
    return SweepRecord(delta, math.sqrt(sq), math.sqrt(gsq), math.sqrt(tv))


def _grid_c2_norm(values, dx):
    # max of |f|, |f'|, |f''| measured by grid differences
    v = np.asarray(values, dtype=float)
    best = float(np.max(np.abs(v))) if v.size else 0.0
    if v.size > 1:
        d1 = np.diff(v) / dx
        best = max(best, float(np.max(np.abs(d1))))
        if d1.size > 1:
            d2 = np.diff(d1) / dx
            best = max(best, float(np.max(np.abs(d2))))
    return best


def default_drift_bound(spec, grid):
    """Sup-norm bound on the drift data: max over species of the grid C^2
    norm of V_i, plus the same for any tabulated kernel."""
    best = 0.0
    for sp in spec.species:
        best = max(best, _grid_c2_norm(sp.potential.on_grid(grid), grid.dx))
        if sp.kernel.kind != "none":
            best = max(best, _grid_c2_norm(sp.kernel.lattice(grid), grid.dx))
    return best


def energy_estimate_check(records, spec, grid, c_l=None, slack=0.05):
    """Discrete entropy/gradient bound along a recorded run.

    Per species i, with T the last record time and time integrals by
    trapezoid over the record times:

      lhs = dx*sum u_i(T) (log u_i(T))_+  +  (1/2) int_0^T |u_i|_h1^2 dt
      rhs = ( e^-1 |Omega| + 2 |Omega| T c_l^2 )
            + dx*sum u_i(0) log u_i(0)
            + 2 |Omega| T c_l^2 * mass_i^2
            + delta^2 int_0^T || sum_{l != i} d_x u_l ||_l2^2 dt

    Returns (lhs, rhs, holds) with per-species arrays; holds is True when
    every species satisfies lhs <= (1 + slack) * rhs. c_l defaults to
    default_drift_bound (any upper bound on the drift only enlarges rhs).
    """
    if len(records) < 1:
        raise ConfigurationError("energy_estimate_check needs records")
    if c_l is None:
        c_l = default_drift_bound(spec, grid)
    omega = grid.length
    times = np.array([r.t for r in records])
    T = float(times[-1])
    lhs = np.empty(spec.m)
    rhs = np.empty(spec.m)
    for i in range(spec.m):
        grad_sq = np.array([float(r.h1semi[i] ** 2) for r in records])
        cross_sq = np.empty(len(records))
        for k, r in enumerate(records):
            f = np.zeros(grid.j - 1)
            for l in range(spec.m):
                if l != i:
                    f += np.diff(r.u[l]) / grid.dx
            cross_sq[k] = grid.dx * float((f**2).sum())
        ent0 = _entropy_signed(records[0].u[i], grid)
        mass_i = float(records[0].mass[i])
        lhs[i] = records[-1].entropy_pos[i] + 0.5 * np.trapezoid(grad_sq, times)
        rhs[i] = (
            (math.exp(-1) * omega + 2.0 * omega * T * c_l**2)
            + ent0
            + 2.0 * omega * T * c_l**2 * mass_i**2
            + spec.delta**2 * np.trapezoid(cross_sq, times)
        )
    holds = bool(np.all(lhs <= (1.0 + slack) * rhs))
    return lhs, rhs, holds

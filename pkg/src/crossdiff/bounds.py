"""Coupling-strength admissibility: how small must the cross-gradient be.

The contraction argument behind the well-posedness of the coupled system
needs delta below an explicit threshold built from a Poincare constant, a
drift bound c_l, the domain length, and the horizon T:

    c_p       = (|Omega| / pi)^2
    c_omega   = 2 * max( 1 + c_p,
                         T/|Omega| + 2 |Omega| (1 + c_p) (e^-1 + 2 T c_l^2) )
    delta_max = 1 / sqrt(c_f^2 * c_omega)

c_f is the norm of the coupling map (1 for the plain cross-gradient).
delta_max assumes the abstract smoothing prefactor in the underlying fixed
point argument equals 1; the report states that caveat.

The drift bound c_l is genuinely ambiguous in practice (different function
norms give very different numbers), so c_l_from_potentials reports three
candidates and every consumer takes c_l explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


def poincare_constant(omega_len):
    """(|Omega|/pi)^2 for an interval of length |Omega|."""
    if not omega_len > 0:
        raise ConfigurationError("domain length must be positive")
    return (omega_len / math.pi) ** 2


def c_omega(T, c_l, omega_len, c_p=None):
    """Stability constant; grows linearly in T and quadratically in c_l."""
    if T < 0:
        raise ConfigurationError("horizon T must be nonnegative")
    if c_l < 0:
        raise ConfigurationError("drift bound c_l must be nonnegative")
    if c_p is None:
        c_p = poincare_constant(omega_len)
    base = 1.0 + c_p
    grown = T / omega_len + 2.0 * omega_len * base * (math.exp(-1) + 2.0 * T * c_l**2)
    return 2.0 * max(base, grown)


def delta_max(c_omega_value, c_f=1.0):
    """Largest admissible |delta| = 1/sqrt(c_f^2 * c_omega)."""
    if not c_omega_value > 0 or not c_f > 0:
        raise ConfigurationError("c_omega and c_f must be positive")
    return 1.0 / math.sqrt(c_f**2 * c_omega_value)


@dataclass(frozen=True)
class CLCandidates:
    """Three readings of the drift bound; pick or override explicitly."""

    l2: float
    c0: float
    c2: float


def c_l_from_potentials(spec, grid):
    """Candidate drift bounds from the potentials on the grid.

    l2: max_i ||V_i||_L2, c0: max_i sup|V_i|, c2: max_i of the largest of
    sup|V_i|, sup|V_i'|, sup|V_i''| (grid differences). The candidates can
    differ by orders of magnitude; no single choice reproduces every
    published threshold, so callers decide.
    """
    l2 = c0 = c2 = 0.0
    for sp in spec.species:
        v = sp.potential.on_grid(grid)
        l2 = max(l2, math.sqrt(grid.dx * float((v**2).sum())))
        sup = float(np.max(np.abs(v))) if v.size else 0.0
        c0 = max(c0, sup)
        best = sup
        if v.size > 1:
            d1 = np.diff(v) / grid.dx
            best = max(best, float(np.max(np.abs(d1))))
            if d1.size > 1:
                best = max(best, float(np.max(np.abs(np.diff(d1) / grid.dx))))
        c2 = max(c2, best)
    return CLCandidates(l2, c0, c2)


@dataclass(frozen=True)
class BoundsReport:
    """All admissibility inputs plus the derived threshold."""

    T: float
    c_l: float
    omega_len: float
    c_p: float
    c_f: float
    c_omega: float
    delta_max: float

    def lines(self):
        """Aligned text rendering; ends with the prefactor caveat."""
        rows = [
            ("T", self.T),
            ("c_l", self.c_l),
            ("omega_len", self.omega_len),
            ("c_p", self.c_p),
            ("c_f", self.c_f),
            ("c_omega", self.c_omega),
            ("delta_max", self.delta_max),
        ]
        out = [f"{name:<10} {value:.6g}" for name, value in rows]
        out.append("note: smoothing prefactor assumed 1; threshold exact only up to it")
        return out


def bounds_report(T, c_l, omega_len=2.0, c_p=None, c_f=1.0):
    """Assemble the full report for one (T, c_l, domain) combination."""
    if c_p is None:
        c_p = poincare_constant(omega_len)
    com = c_omega(T, c_l, omega_len, c_p)
    return BoundsReport(
        T=float(T),
        c_l=float(c_l),
        omega_len=float(omega_len),
        c_p=float(c_p),
        c_f=float(c_f),
        c_omega=float(com),
        delta_max=float(delta_max(com, c_f)),
    )

"""Problem data for coupled porous-medium systems on an interval.

Holds the uniform cell-centered grid, per-species problem data (external
potential, self-interaction kernel, mass, initial profile), the system-level
coupling parameters, and plain state containers. Everything here is immutable
after construction; solvers copy what they mutate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Coupling strengths above this lose the small-coupling existence guarantee
# even at vanishing horizon (value = 1/sqrt(8*exp(-1)*(1+(2/pi)^2)) for the
# default interval of length 2, see bounds.delta_max).
DELTA_GUARANTEE = 0.4917

_IC_KINDS = ("uniform", "leftbump", "rightbump", "tabulated")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered mesh of J cells on [x_min, x_max]."""

    x_min: float
    x_max: float
    j: int
    dx: float = field(init=False, compare=False)
    centers: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.j < 8:
            raise ConfigurationError(f"need at least 8 cells, got J={self.j}")
        if not self.x_max > self.x_min:
            raise ConfigurationError("empty domain: x_max must exceed x_min")
        dx = (self.x_max - self.x_min) / self.j
        centers = self.x_min + (np.arange(self.j) + 0.5) * dx
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "centers", _readonly(centers))

    @property
    def length(self):
        return self.x_max - self.x_min


def make_grid(x_min=-1.0, x_max=1.0, j=64):
    return Grid1D(float(x_min), float(x_max), int(j))


@dataclass(frozen=True)
class PotentialSpec:
    """External potential V(x): zero, a*x^2, or tabulated at cell centers."""

    kind: str
    a: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "quadratic", "tabulated"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.values is None:
                raise ConfigurationError("tabulated potential needs values")
            object.__setattr__(self, "values", _readonly(self.values))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def quadratic(cls, a):
        return cls("quadratic", a=float(a))

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", values=values)

    def on_grid(self, grid):
        """Values at the cell centers, shape (J,)."""
        if self.kind == "zero":
            return np.zeros(grid.j)
        if self.kind == "quadratic":
            return self.a * grid.centers**2
        if len(self.values) != grid.j:
            raise ConfigurationError(
                f"tabulated potential has {len(self.values)} entries, grid has {grid.j}"
            )
        return self.values.copy()

    def gradient_at(self, x, grid=None):
        """dV/dx at arbitrary points (used by the particle system)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "quadratic":
            return 2.0 * self.a * x
        if grid is None:
            raise ConfigurationError("tabulated potential gradient needs the grid")
        v = self.on_grid(grid)
        dv = np.gradient(v, grid.centers)
        return np.interp(x, grid.centers, dv)


@dataclass(frozen=True)
class KernelSpec:
    """Self-interaction kernel W, tabulated on the difference lattice.

    A tabulated kernel carries W(k*dx) for k = -(J-1) .. J-1, so 2J-1 values
    with the origin in the middle. W must be even.
    """

    kind: str
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("none", "tabulated"):
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.values is None:
                raise ConfigurationError("tabulated kernel needs values")
            w = np.array(self.values, dtype=float)
            if w.ndim != 1 or len(w) % 2 == 0:
                raise ConfigurationError(
                    "kernel lattice must be 1-D with odd length 2J-1"
                )
            if not np.array_equal(w, w[::-1]):
                raise ConfigurationError("kernel must be even: W(-r) = W(r)")
            object.__setattr__(self, "values", _readonly(w))

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", values=values)

    def lattice(self, grid):
        """Kernel samples for grid, shape (2J-1,); zeros when kind='none'."""
        if self.kind == "none":
            return np.zeros(2 * grid.j - 1)
        if len(self.values) != 2 * grid.j - 1:
            raise ConfigurationError(
                f"kernel lattice has {len(self.values)} entries, "
                f"grid needs {2 * grid.j - 1}"
            )
        return self.values.copy()


@dataclass(frozen=True)
class SpeciesSpec:
    """One species: potential, kernel, total mass, initial profile."""

    potential: PotentialSpec = field(default_factory=PotentialSpec.zero)
    kernel: KernelSpec = field(default_factory=KernelSpec.none)
    mass: float = 1.0
    ic: str = "uniform"
    ic_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigurationError(f"species mass must be positive, got {self.mass}")
        if self.ic not in _IC_KINDS:
            raise ConfigurationError(f"unknown ic {self.ic!r}, expected one of {_IC_KINDS}")
        if self.ic == "tabulated":
            if self.ic_values is None:
                raise ConfigurationError("tabulated ic needs values")
            v = np.array(self.ic_values, dtype=float)
            if np.any(v < 0):
                raise ConfigurationError("tabulated ic must be nonnegative")
            object.__setattr__(self, "ic_values", _readonly(v))


@dataclass(frozen=True)
class SystemSpec:
    """M species coupled through one cross-gradient strength delta.

    epsilon adds linear diffusion on top of the degenerate mobility term.
    |delta| >= 1 is accepted for exploration but warned about: the mixture
    energy stops being strictly convex there.
    """

    m: int
    delta: float = 0.0
    epsilon: float = 0.0
    species: tuple[SpeciesSpec, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError(f"need at least one species, got M={self.m}")
        if len(self.species) != self.m:
            raise ConfigurationError(
                f"M={self.m} but {len(self.species)} species specs given"
            )
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")
        object.__setattr__(self, "species", tuple(self.species))
        if abs(self.delta) >= 1.0:
            warnings.warn(
                f"|delta|={abs(self.delta):g} >= 1: mixture energy is no longer "
                "strictly convex; run is exploratory",
                UserWarning,
                stacklevel=2,
            )
        elif abs(self.delta) > DELTA_GUARANTEE:
            warnings.warn(
                f"|delta|={abs(self.delta):g} exceeds the small-coupling "
                f"guarantee threshold {DELTA_GUARANTEE:g} (see bounds.delta_max)",
                UserWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class State:
    """Densities at one instant: u[i, j] is species i in cell j."""

    t: float
    u: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 2:
            raise ConfigurationError("state array must be M x J")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))


def _ic_profile(species, grid):
    x = grid.centers
    if species.ic == "uniform":
        return np.ones(grid.j)
    if species.ic == "leftbump":
        return np.maximum((x + 0.5) * (-0.9 - x), 0.0)
    if species.ic == "rightbump":
        return np.maximum((x - 0.5) * (0.9 - x), 0.0)
    v = species.ic_values
    if len(v) != grid.j:
        raise ConfigurationError(
            f"tabulated ic has {len(v)} entries, grid has {grid.j}"
        )
    return v.copy()


def build_initial_state(spec, grid):
    """Initial State at t=0 with every species rescaled to its target mass."""
    u = np.empty((spec.m, grid.j))
    for i, sp in enumerate(spec.species):
        profile = _ic_profile(sp, grid)
        raw = grid.dx * profile.sum()
        if not raw > 0:
            raise ConfigurationError(
                f"species {i + 1} initial profile has zero mass on this grid"
            )
        u[i] = profile * (sp.mass / raw)
    return State(0.0, u)

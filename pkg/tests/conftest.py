"""Shared builders for the test suite."""

import warnings

import numpy as np

from crossdiff.core import (
    KernelSpec,
    PotentialSpec,
    SpeciesSpec,
    SystemSpec,
)


def single(potential=None, kernel=None, mass=1.0, ic="uniform", ic_values=None,
           delta=0.0, epsilon=0.0):
    sp = SpeciesSpec(
        potential=potential or PotentialSpec.zero(),
        kernel=kernel or KernelSpec.none(),
        mass=mass,
        ic=ic,
        ic_values=ic_values,
    )
    return SystemSpec(m=1, delta=delta, epsilon=epsilon, species=(sp,))


def pair(delta=0.0, epsilon=0.0, ics=("leftbump", "rightbump"),
         potentials=None, kernels=None, masses=(1.0, 1.0), ic_values=(None, None)):
    """Two-species system; delta warnings silenced (tests opt in explicitly)."""
    if potentials is None:
        potentials = (PotentialSpec.zero(), PotentialSpec.quadratic(2.0))
    if kernels is None:
        kernels = (KernelSpec.none(), KernelSpec.none())
    species = tuple(
        SpeciesSpec(potential=p, kernel=k, mass=m, ic=ic, ic_values=iv)
        for p, k, m, ic, iv in zip(potentials, kernels, masses, ics, ic_values)
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return SystemSpec(m=2, delta=delta, epsilon=epsilon, species=species)


def gauss_lattice(grid, width=0.3):
    """Even, smooth kernel on the difference lattice (for kernel tests)."""
    r = np.arange(-(grid.j - 1), grid.j) * grid.dx
    return np.exp(-((r / width) ** 2))

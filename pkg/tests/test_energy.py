import numpy as np
import pytest
from conftest import pair, single

from crossdiff.core import (
    KernelSpec,
    PotentialSpec,
    State,
    build_initial_state,
    make_grid,
)
from crossdiff.energy import (
    SteadyState,
    count_energy_increases,
    dissipation_series,
    energy,
    steady_state,
)
from crossdiff.errors import ConfigurationError
from crossdiff.fv import AdaptiveDt, FixedDt, RunRecorder, convolve, run


class TestEnergy:
    def test_two_uniform_species_with_confinement(self):
        # u1 = u2 = 1/2: E = 1/2 + delta/2 + dx*sum 2 x_j^2 / 2 (exact sum)
        g = make_grid(-1, 1, 64)
        for delta in (0.0, 0.4, 0.9):
            spec = pair(delta=delta, ics=("uniform", "uniform"))
            st = build_initial_state(spec, g)
            v_term = g.dx * float((2.0 * g.centers**2 * 0.5).sum())
            expected = 0.5 + delta / 2.0 + v_term
            assert energy(st, spec, g) == pytest.approx(expected, rel=1e-13)
            # midpoint sum of x^2 is within dx^2 of the integral 2/3
            assert v_term == pytest.approx(2.0 / 3.0, abs=g.dx**2)

    def test_flat_kernel_self_interaction(self):
        # W === 1: (W*u) = mass everywhere, E = 1/4 + mass/2 * 1/2 * |Omega| /2
        g = make_grid(-1, 1, 64)
        spec = single(kernel=KernelSpec.tabulated(np.ones(2 * g.j - 1)))
        st = build_initial_state(spec, g)
        conv = convolve(spec.species[0].kernel, st.u[0], g)
        assert np.allclose(conv, 1.0, rtol=1e-13)
        # dx*sum(u^2/2) = 0.25 and dx*sum(u*(W*u)/2) = 0.5
        assert energy(st, spec, g) == pytest.approx(0.75, rel=1e-13)

    def test_energy_is_quadratic_in_mass_scaling(self):
        g = make_grid(-1, 1, 32)
        rng = np.random.default_rng(2)
        prof = rng.uniform(0.1, 1.0, g.j)
        for a in (2.0, 0.5):
            s1 = single(ic="tabulated", ic_values=prof, mass=1.0)
            sa = single(ic="tabulated", ic_values=prof, mass=a)
            u1 = build_initial_state(s1, g)
            ua = build_initial_state(sa, g)
            # V = 0, W = none: E is pure quadratic, so scales by a^2
            assert energy(ua, sa, g) == pytest.approx(a**2 * energy(u1, s1, g), rel=1e-12)


class TestSteadyState:
    def test_flat_potential_gives_uniform(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.3, ics=("uniform", "uniform"),
                    potentials=(PotentialSpec.zero(), PotentialSpec.zero()),
                    masses=(1.0, 2.0))
        ss = steady_state(spec, g)
        assert np.allclose(ss.u[0], 0.5, atol=1e-9)
        assert np.allclose(ss.u[1], 1.0, atol=1e-9)
        # on the (full) support: u_i + delta*u_other = c_i
        assert ss.c[0] == pytest.approx(0.5 + 0.3 * 1.0, abs=1e-9)
        assert ss.c[1] == pytest.approx(1.0 + 0.3 * 0.5, abs=1e-9)

    def test_quadratic_confinement_closed_form(self):
        # V = 2x^2, unit mass: u = (c - 2x^2)_+ with c = 2*(3/8)^(2/3)
        g = make_grid(-1, 1, 64)
        spec = single(potential=PotentialSpec.quadratic(2.0))
        ss = steady_state(spec, g, tol=1e-12)
        c_exact = 2.0 * (3.0 / 8.0) ** (2.0 / 3.0)
        expected = np.maximum(c_exact - 2.0 * g.centers**2, 0.0)
        assert np.max(np.abs(ss.u[0] - expected)) < 1e-2
        assert ss.c[0] == pytest.approx(c_exact, abs=2e-3)

    def test_mass_exact_after_solve(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.6, masses=(1.0, 3.0))
        ss = steady_state(spec, g)
        m = g.dx * ss.u.sum(axis=1)
        assert abs(m[0] - 1.0) < 1e-12
        assert abs(m[1] - 3.0) < 1e-12

    def test_delta_zero_decouples(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.0)
        ss = steady_state(spec, g)
        for i, pot in enumerate((PotentialSpec.zero(), PotentialSpec.quadratic(2.0))):
            alone = steady_state(single(potential=pot), g)
            assert np.allclose(ss.u[i], alone.u[0], atol=1e-10)

    def test_kkt_identity_on_support(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.8)
        ss = steady_state(spec, g, tol=1e-11)
        assert ss.residual <= 1e-11
        for i in range(2):
            a = spec.species[i].potential.on_grid(g) + spec.delta * ss.u[1 - i]
            on = ss.u[i] > 1e-9
            # where u > 0: u + V + delta*u_other = c
            assert np.max(np.abs(ss.u[i][on] + a[on] - ss.c[i])) < 1e-9
            # where u = 0: c - V - delta*u_other <= 0 (complementarity)
            assert np.all(ss.c[i] - a[~on] <= 1e-9)

    def test_one_more_sweep_barely_moves_it(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.4)
        tol = 1e-10
        ss = steady_state(spec, g, tol=tol)
        for i in range(2):
            a = spec.species[i].potential.on_grid(g) + spec.delta * ss.u[1 - i]
            from crossdiff.energy import _solve_multiplier

            c = _solve_multiplier(a, spec.species[i].mass, g.dx)
            g_i = np.maximum(c - a, 0.0)
            assert np.max(np.abs(g_i - ss.u[i])) <= 2 * tol

    def test_local_minimality_among_admissible_states(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.6)
        ss = steady_state(spec, g, tol=1e-12)
        st = State(0.0, ss.u)
        e0 = energy(st, spec, g)
        rng = np.random.default_rng(23)
        for _ in range(100):
            pert = np.zeros_like(ss.u)
            for i in range(2):
                w = rng.normal(0, 1, g.j)
                w[ss.u[i] <= 1e-12] = np.maximum(w[ss.u[i] <= 1e-12], 0.0)
                # remove mass change while keeping u + eta*w >= 0
                support = ss.u[i] > 1e-12
                w[support] -= w.sum() / support.sum()
                pert[i] = w
            eta = 1e-3
            cand = ss.u + eta * pert
            if np.any(cand < 0):
                cand = np.maximum(cand, 0.0)
                # keep masses by rescaling (stays admissible)
                cand *= (ss.u.sum(axis=1) / cand.sum(axis=1))[:, None]
            e1 = energy(State(0.0, cand), spec, g)
            assert e1 >= e0 - 1e-12

    def test_strong_coupling_rejected(self):
        g = make_grid(-1, 1, 16)
        with pytest.raises(ConfigurationError):
            steady_state(pair(delta=1.0), g)

    def test_bad_theta_rejected(self):
        g = make_grid(-1, 1, 16)
        with pytest.raises(ConfigurationError):
            steady_state(pair(), g, theta=0.0)

    def test_nonconvergence_reported_not_raised(self):
        g = make_grid(-1, 1, 64)
        ss = steady_state(pair(delta=0.8), g, tol=1e-14, max_iter=3)
        assert isinstance(ss, SteadyState)
        assert ss.iterations == 3
        assert ss.residual > 1e-14


class TestDissipation:
    def test_single_record_empty_series(self):
        g = make_grid(-1, 1, 32)
        spec = single()
        rec = RunRecorder()
        run(spec, g, 0.0, FixedDt(1e-6), record_times=[0.0], sink=rec)
        assert dissipation_series(rec.records) == []

    def test_energy_decays_along_run(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.4)
        rec = RunRecorder()
        run(spec, g, 0.01, FixedDt(1e-5), record_times=np.linspace(0, 0.01, 11), sink=rec)
        series = dissipation_series(rec.records)
        assert len(series) == 10
        assert count_energy_increases(series, tol=1e-10) == 0
        assert series[-1][1] < rec.records[0].energy

    def test_adaptive_run_also_dissipates(self):
        g = make_grid(-1, 1, 64)
        spec = pair(delta=0.4, ics=("uniform", "uniform"))
        rec = RunRecorder()
        run(spec, g, 0.5, AdaptiveDt(0.9), record_times=np.linspace(0, 0.5, 11), sink=rec)
        assert count_energy_increases(dissipation_series(rec.records)) == 0

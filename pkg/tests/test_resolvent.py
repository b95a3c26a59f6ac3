import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hawkescorr.errors import HorizonError, NumericalError
from hawkescorr.kernel import ExponentialKernel, PowerLawKernel, TabulatedKernel
from hawkescorr.resolvent import (Grid, iterated_convolution, resolvent, resolvent_series,
                                  solve_volterra, trapezoid_convolve, write_resolvent_csv)


def test_grid_covering_defaults():
    g = Grid.covering(10.0)
    assert g.step == 1e-3 and g.n_nodes == 10001 and g.horizon == pytest.approx(10.0)
    assert Grid.covering(2.0).step == pytest.approx(2e-4)


def test_grid_index_snaps_and_bounds():
    g = Grid(0.1, 11)
    k, d = g.index(0.52)
    assert k == 5 and d == pytest.approx(0.02)
    with pytest.raises(HorizonError):
        g.index(1.2)
    with pytest.raises(HorizonError):
        g.index(-0.01)


def test_exponential_resolvent_is_exp_minus_t(exp_kernel):
    t0 = time.perf_counter()
    table = resolvent(exp_kernel, Grid.covering(10.0, 1e-3))
    assert time.perf_counter() - t0 < 5.0
    assert np.max(np.abs(table.psi - np.exp(-table.nodes))) < 1e-4
    assert abs(table.cum[-1] - 1.0) < 1e-3
    assert table.psi_l1_limit == pytest.approx(1.0)
    assert table.residual < 1e-12


def test_convolution_is_exact_for_linear_functions():
    # f = g = 1 gives (f*g)(t) = t, which trapezoid integrates exactly
    h = 0.01
    f = np.ones(50)
    np.testing.assert_allclose(trapezoid_convolve(f, f, h), h * np.arange(50), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=30), st.integers(0, 10**6))
def test_convolution_commutes(values, seed):
    f = np.array(values)
    g = np.random.default_rng(seed).normal(size=f.size)
    np.testing.assert_allclose(trapezoid_convolve(f, g, 0.1), trapezoid_convolve(g, f, 0.1),
                               atol=1e-12)


def test_phi_commutes_with_psi(power_kernel):
    grid = Grid.covering(5.0, 5e-3)
    table = resolvent(power_kernel, grid)
    phi = power_kernel.evaluate(grid.nodes)
    lhs = trapezoid_convolve(phi, table.psi, grid.step)
    np.testing.assert_allclose(lhs, table.psi - phi, atol=1e-12)
    np.testing.assert_allclose(trapezoid_convolve(table.psi, phi, grid.step), lhs, atol=1e-12)


@pytest.mark.parametrize("kernel", [ExponentialKernel(1.0, 2.0), PowerLawKernel(1.0, 1.0, 4.0)],
                         ids=["exponential", "powerlaw"])
def test_iterated_norms_follow_power_law(kernel):
    grid = Grid.covering(60.0, 5e-3)
    phi = kernel.evaluate(grid.nodes)
    term = phi
    for n in range(1, 7):
        if n > 1:
            term = trapezoid_convolve(phi, term, grid.step)
        norm = np.trapezoid(term, dx=grid.step)
        assert norm / kernel.l1_norm ** n == pytest.approx(1.0, rel=1e-4), n


def test_iterated_convolution_matches_gamma_density(exp_kernel):
    # exponential(1, 2): Phi_n(t) = t^(n-1) e^(-2t) / (n-1)!
    grid = Grid.covering(4.0, 1e-3)
    t = grid.nodes
    np.testing.assert_allclose(iterated_convolution(exp_kernel, 3, grid),
                               t ** 2 * np.exp(-2 * t) / 2, atol=1e-6)
    with pytest.raises(ValueError):
        iterated_convolution(exp_kernel, 0, grid)


def test_series_converges_to_resolvent(power_kernel):
    grid = Grid.covering(8.0, 1e-2)
    table = resolvent(power_kernel, grid)
    gaps = [np.max(np.abs(resolvent_series(power_kernel, grid, n) - table.psi)) for n in (2, 4, 8, 16)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-6


def test_volterra_constant_forcing(exp_kernel):
    # f = mu + Phi*f with mu = 1 is E[lambda]; closed form 2 - e^-t
    grid = Grid.covering(5.0, 1e-3)
    sol = solve_volterra(lambda t: np.ones_like(t), exp_kernel, grid)
    np.testing.assert_allclose(sol.values, 2 - np.exp(-grid.nodes), atol=1e-6)
    assert sol.discrepancy < 1e-6


def test_volterra_with_phi_forcing_recovers_psi(power_kernel):
    grid = Grid.covering(5.0, 5e-3)
    table = resolvent(power_kernel, grid)
    sol = solve_volterra(power_kernel.evaluate, power_kernel, grid, table)
    np.testing.assert_allclose(sol.values, table.psi, atol=1e-13)


def test_volterra_rejects_shape_mismatch_and_foreign_table(exp_kernel):
    grid = Grid.covering(1.0, 0.01)
    with pytest.raises(ValueError):
        solve_volterra(np.ones(3), exp_kernel, grid)
    with pytest.raises(ValueError):
        solve_volterra(np.ones(grid.n_nodes), exp_kernel, grid, resolvent(exp_kernel, Grid(0.02, 51)))


def test_psi_identity_against_adaptive_quadrature(power_kernel):
    # Psi(t) = Phi(t) + int_0^t Phi(t-u) Phi(u) du + int_0^t int_0^u Phi(t-u) Phi(u-w) Phi(w) dw du + ...
    grid = Grid.covering(2.0, 1e-3)
    phi = power_kernel.evaluate
    t = 1.0
    two, _ = integrate.quad(lambda u: phi(t - u) * phi(u), 0, t, epsabs=1e-12)
    three, _ = integrate.dblquad(lambda w, u: phi(t - u) * phi(u - w) * phi(w), 0, t, 0, lambda u: u,
                                 epsabs=1e-12)
    four, _ = integrate.tplquad(lambda r, w, u: phi(t - u) * phi(u - w) * phi(w - r) * phi(r),
                                0, t, 0, lambda u: u, 0, lambda u, w: w, epsabs=1e-10)
    k = grid.index(t)[0]
    for n, ref in ((2, two), (3, three), (4, four)):
        assert iterated_convolution(power_kernel, n, grid)[k] == pytest.approx(ref, rel=1e-5), n


def test_coarse_step_with_tall_kernel_fails_loudly():
    k = TabulatedKernel(0.001, (900.0, 0.0))
    with pytest.raises(NumericalError):
        resolvent(k, Grid(0.01, 10))


def test_csv_output(tmp_path, exp_kernel):
    table = resolvent(exp_kernel, Grid(0.5, 3))
    out = tmp_path / "psi.csv"
    write_resolvent_csv(table, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,psi,cum"
    assert lines[1] == "0,1,0"
    assert len(lines) == 4

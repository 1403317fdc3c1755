import itertools

import numpy as np
import pytest

from hydrosym import exprlang as el
from hydrosym import gasdyn
from hydrosym.hodograph import residual_pde
from hydrosym.quadrature import simpson
from hydrosym.separable import (HamiltonianDensity, SeparableModel, commute_check, grid_points,
                                hamiltonian_recursion, hamiltonian_system, linearize_separable,
                                manin_combination, manin_hamiltonian, wave_residual)

GRID = grid_points(np.linspace(-1.0, 1.0, 20), np.linspace(0.5, 2.0, 20))


def test_gas_hamiltonian_reproduces_gas_dynamics():
    m = gasdyn.polytropic(1.0, 2.0)
    a2rho = el.mul(el.mul(m.alpha, m.alpha), el.var("rho"))
    inner = el.antiderivative(el.antiderivative(a2rho, "rho", 0.0), "rho", 0.0)
    H = el.neg(el.add(el.parse("rho*u^2/2"), inner))
    ham = hamiltonian_system(H)
    phys = gasdyn.physical_system(m)
    for u, rho in [(0.3, 0.7), (-1.0, 1.5)]:
        p = {"u": u, "rho": rho}
        np.testing.assert_allclose(ham.matrix_values(p), phys.matrix_values(p), rtol=1e-13)


def test_unit_transport_and_constant():
    np.testing.assert_array_equal(hamiltonian_system("u*rho").matrix_values({"u": 0.3, "rho": 2.0}), np.eye(2))
    assert not hamiltonian_system("4").matrix_values({"u": 0.3, "rho": 2.0}).any()


def test_commute_check_examples():
    m = SeparableModel("2*rho")
    assert commute_check("u^2*rho^3", "u", GRID) == 0.0
    assert commute_check("u^2", "rho^2*u", GRID) > 0.1
    H = manin_hamiltonian(m, (1, 0), 2)
    h = manin_hamiltonian(m, (0, 1), 3)
    assert commute_check(H, h, GRID) < 1e-10


def test_manin_low_orders():
    m = SeparableModel("2*rho")
    pt = {"u": 0.7, "rho": 1.3}
    assert el.evaluate(manin_hamiltonian(m, (1, 0), 0).H, pt) == pytest.approx(1.3)
    assert el.evaluate(manin_hamiltonian(m, (1, 0), 1).H, pt) == pytest.approx(0.7 * 1.3)
    assert el.evaluate(manin_hamiltonian(m, (0, 1), 0).H, pt) == pytest.approx(0.7)
    assert el.evaluate(manin_hamiltonian(m, (0, 1), -1).H, pt) == 1.0
    with pytest.raises(ValueError):
        manin_hamiltonian(m, (1, 1), 2)


@pytest.mark.parametrize("alpha2, beta2", [("2*rho", "1"), ("rho^2", "u^2"), ("3", "1")])
def test_manin_series_solve_wave_equation(alpha2, beta2):
    m = SeparableModel(alpha2, beta2)
    for kind, N in itertools.product(((1, 0), (0, 1)), range(0, 5)):
        assert wave_residual(m, manin_hamiltonian(m, kind, N), GRID) < 1e-10


def test_hamiltonian_recursion():
    m = SeparableModel("2*rho")
    rep = hamiltonian_recursion(m, manin_hamiltonian(m, (1, 0), 2), 1, GRID)
    assert rep.in_class
    assert el.evaluate(rep.h.H, {"u": 0.3, "rho": 1.7}) == pytest.approx(1.7)
    rep = hamiltonian_recursion(m, "u", 1, GRID)
    assert rep.in_class and el.evaluate(rep.h.H, {"u": 0.3, "rho": 1.7}) == 0.0
    assert not hamiltonian_recursion(m, "u^2*rho", 1, GRID).in_class


@pytest.mark.parametrize("mth", [1, 2, 3])
def test_manin_descent(mth):
    m = SeparableModel("2*rho")
    h = manin_combination(m, 2 * mth, 0.7, -1.3)
    rep = hamiltonian_recursion(m, h, 1, GRID)
    lower = manin_combination(m, 2 * mth - 2, 0.7, -1.3)
    assert rep.in_class
    diff = el.sub(rep.h.H, lower.H)
    assert np.max(np.abs(el.evaluate(diff, GRID))) < 1e-10


def _rho_closed(weight, rho):
    return np.array([simpson(lambda s: (r - s) * weight(s), 0.0, r, 1e-13) for r in rho])


def test_manin_closed_forms():
    m = SeparableModel("2*rho")
    u, rho = GRID["u"], GRID["rho"]
    G1t = _rho_closed(lambda s: s * 2 * s, rho)
    G1 = _rho_closed(lambda s: 2 * s, rho)
    np.testing.assert_allclose(el.evaluate(manin_hamiltonian(m, (1, 0), 2).H, GRID), rho * u**2 / 2 + G1t,
                               atol=1e-12)
    np.testing.assert_allclose(el.evaluate(manin_hamiltonian(m, (0, 1), 1).H, GRID), u**2 / 2 + G1,
                               atol=1e-12)
    np.testing.assert_allclose(el.evaluate(manin_hamiltonian(m, (1, 0), 3).H, GRID),
                               rho * u**3 / 6 + u * G1t, atol=1e-12)
    np.testing.assert_allclose(el.evaluate(manin_hamiltonian(m, (0, 1), 2).H, GRID),
                               u**3 / 6 + u * G1, atol=1e-12)


def test_linearize_separable():
    m = SeparableModel("rho^2", "1", 0.0, 1.0)
    H = manin_hamiltonian(m, (1, 0), 2)
    HN = manin_hamiltonian(m, (0, 1), 2)
    u0, r0 = 0.7, 1.5
    pt = {"u": u0, "rho": r0}
    a, b = el.evaluate(H.d("rho", "u"), pt), el.evaluate(H.d("u", "u"), pt)
    c, d = el.evaluate(HN.d("rho", "u"), pt), el.evaluate(HN.d("u", "u"), pt)
    t0 = b / d
    x0 = a - t0 * c
    grid, sys = linearize_separable(H, HN, x0 + np.arange(21) * 1e-3, t0 + np.arange(21) * 1e-3,
                                    [u0, r0], x0, t0)
    assert grid.converged_fraction == 1.0
    assert residual_pde(sys, grid).max_residual < 1e-6


def test_linearize_initial_slice():
    # t = 0: H_rho_u = x, H_uu = 0 with H = u rho^2/2 + u^3/6 ... pick H whose slice is explicit
    H = HamiltonianDensity("rho^2*u/2 - u^3/6 + rho*u^2/2")
    HN = HamiltonianDensity("u*rho")
    # H_uu = -u + rho = 0 -> rho = u; H_rho_u = rho + u = x -> u = x/2
    grid, _ = linearize_separable(H, HN, np.linspace(1.0, 1.2, 11), [0.0], [0.5, 0.5])
    np.testing.assert_allclose(grid.u[0, 0], grid.x / 2, atol=1e-12)
    np.testing.assert_allclose(grid.u[1, 0], grid.x / 2, atol=1e-12)

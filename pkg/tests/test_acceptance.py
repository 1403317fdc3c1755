"""Acceptance suite: one group of checks per criterion, at the stated tolerances.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion.
"""
import itertools
import time

import numpy as np
import pytest

from hydrosym import exprlang as el
from hydrosym import gasdyn
from hydrosym.core import epsilon_system
from hydrosym.geometry import Connection, curvature_check, tsarev_residual
from hydrosym.hodograph import (ImplicitSystem, SolverError, build_implicit, residual_pde,
                                solve_grid)
from hydrosym.quadrature import simpson
from hydrosym.separable import SeparableModel, commute_check, grid_points, manin_hamiltonian
from hydrosym.symmetry import (RecursionSpecFirst, apply_first, commutator2, existence_first,
                               existence_second, recursion_second, squared_spec, symmetry_residual)
from conftest import (EPSILON_CUBIC, EPSILON_CUBIC_ROOT, VARS, derivative_close, epsilon_points,
                      gas_points, mp_derivative, perturbed_epsilon, random_expr_text, system_fixtures)

criterion = pytest.mark.criterion


def report(n, ok, detail):
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.fixture(scope="module")
def gas14():
    return gasdyn.polytropic(1.0, 1.4)


def _max_rel(a, b):
    return max(float(np.max(np.abs(x - y) / np.abs(y))) for x, y in zip(a, b))


# 1, 2: recursion operator chains against the hand-expanded forms

@criterion(1)
def test_c01_recursion_operator_identity(gas14):
    rng = np.random.default_rng(1)
    jets, rho = gasdyn.random_jets(rng, gas14, 100, depth=2)
    t0 = time.perf_counter()
    got = gasdyn.recursion_apply(gas14, ("1", "1"), jets, rho)
    ref = gasdyn._eval_pair(gas14, gasdyn.closed_form(gas14, 2), jets, rho)
    elapsed = time.perf_counter() - t0
    err = _max_rel(got, ref)
    assert report(1, err < 1e-9 and elapsed < 1.0, f"rel err {err:.2e}, {elapsed:.3f} s")


@criterion(2)
def test_c02_third_order_chain(gas14):
    rng = np.random.default_rng(2)
    jets, rho = gasdyn.random_jets(rng, gas14, 100, depth=3)
    t0 = time.perf_counter()
    got = gasdyn.characteristic_chain(gas14, 3, jets, rho)
    ref = gasdyn._eval_pair(gas14, gasdyn.closed_form(gas14, 3), jets, rho)
    elapsed = time.perf_counter() - t0
    err = _max_rel(got, ref)
    assert report(2, err < 1e-8 and elapsed < 1.0, f"rel err {err:.2e}, {elapsed:.3f} s")


# 3: fixed points of the coefficient recursion

@criterion(3)
def test_c03_coefficient_fixed_points(gas14):
    rng = np.random.default_rng(3)
    sys = gasdyn.riemann_system(gas14)
    pts = gas_points(gas14, 50, rng)
    ones = max(float(np.max(np.abs(gasdyn.recursion_ac(gas14, ("1", "1"), p)))) for p in pts)
    img = gasdyn.recursion_ac_fields(gas14, sys.velocity())
    minus = max(float(np.max(np.abs(img.evaluate(sys.point(p)) + 1.0))) for p in pts)
    assert report(3, ones == 0.0 and minus < 1e-10, f"|R(1,1)| {ones:.1e}, |R(phi,psi)+1| {minus:.1e}")


# 4: Tsarev checker

@criterion(4)
def test_c04_epsilon_semi_hamiltonian():
    rng = np.random.default_rng(4)
    sys = epsilon_system(3)
    worst = 0.0
    for u in epsilon_points(50, rng, spread=0.4):
        worst = max(worst, tsarev_residual(sys, u))
    assert report(4, worst < 1e-10, f"epsilon residual {worst:.2e}")


@criterion(4)
def test_c04_perturbed_epsilon_detected():
    res = tsarev_residual(perturbed_epsilon(), [1.0, 2.0, 4.0])
    assert report(4, res > 0.1, f"perturbed residual {res:.4f} (threshold 0.1)")


@criterion(4)
def test_c04_curvature_form_agrees():
    rng = np.random.default_rng(5)
    tol = 1e-10
    cases = [(epsilon_system(3), u) for u in epsilon_points(50, rng)]
    cases.append((perturbed_epsilon(), np.array([1.0, 2.0, 4.0])))
    for sys, u in cases:
        rep = curvature_check(sys, u)
        assert (tsarev_residual(sys, u) < tol) == (rep.closed < tol)
    report(4, True, f"verdicts agree on {len(cases)} samples")


# 5: generalized hodograph on the epsilon-system

def _criterion5_setup():
    sys = epsilon_system(3, base_point=(1.0, 2.0, 4.0))
    conn = Connection(sys, "base")
    w = apply_first(sys, RecursionSpecFirst(["1"] * 3, ["0"] * 3), sys.unit(), conn)
    return sys, conn, w


@criterion(5)
@pytest.mark.slow
def test_c05_hodograph_literal():
    # w = S(1) with c = 1, d = 0 in the base-point gauge, as stated
    sys, conn, w = _criterion5_setup()
    u0 = np.array([0.8, 2.3, 3.7])
    p = sys.point(u0)
    W, v = w.evaluate(p), sys.speed_values(p)
    # x, t from the first two relations w_i = x + t v_i
    t0 = (W[1] - W[0]) / (v[1] - v[0])
    x0 = W[0] - t0 * v[0]
    sym = symmetry_residual(sys, w, epsilon_points(10, np.random.default_rng(6)), conn)
    t_start = time.perf_counter()
    try:
        grid = solve_grid(build_implicit(sys, w), x0 + np.arange(101) * 1e-3, t0 + np.arange(101) * 1e-3,
                          u0, x0, t0, time_budget=30.0)
        frac = grid.converged_fraction
        res = residual_pde(sys, grid).max_residual if frac > 0 else np.inf
    except SolverError as exc:
        frac, res = 0.0, np.inf
        print(f"\n{exc}")
    elapsed = time.perf_counter() - t_start
    ok = frac >= 0.95 and res < 1e-4 and elapsed < 30.0
    assert report(5, ok, f"symmetry residual of w {sym:.2e}; converged {frac:.1%}, "
                         f"pde residual {res:.2e}, {elapsed:.1f} s")


@criterion(5)
def test_c05_hodograph_nondegenerate_symmetry():
    sys = epsilon_system(3)
    w = sys.coefficients(EPSILON_CUBIC)
    u0, t0 = EPSILON_CUBIC_ROOT
    p = sys.point(u0)
    x0 = float(w.evaluate(p)[0] - t0 * sys.speed_values(p)[0])
    t_start = time.perf_counter()
    grid = solve_grid(build_implicit(sys, w), x0 + np.arange(101) * 1e-3, t0 + np.arange(101) * 1e-3,
                      u0, x0, t0)
    elapsed = time.perf_counter() - t_start
    res = residual_pde(sys, grid).max_residual
    ok = grid.converged_fraction >= 0.95 and res < 1e-4 and elapsed < 30.0
    assert report(5, ok, f"cubic symmetry: converged {grid.converged_fraction:.1%}, "
                         f"pde residual {res:.2e}, {elapsed:.2f} s")


# 6: gamma = 3 closed form

@criterion(6)
def test_c06_gamma3_closed_form():
    sys = gasdyn.riemann_system(gasdyn.polytropic(1.0, 3.0, 0.0))
    imp = build_implicit(sys, ["s", "r - 0.5"], "classical")
    grid = solve_grid(imp, np.linspace(0.0, 0.1, 101), np.linspace(-0.1, 0.0, 101), [0.0, 0.5], 0.0, 0.0)
    X, T = np.meshgrid(grid.x, grid.t)
    err = float(np.max(np.abs(grid.u[0] - X / (T - 1))))
    res = residual_pde(sys, grid).max_residual
    assert report(6, err < 1e-10 and res < 1e-6, f"|s - x/(t-1)| {err:.2e}, pde residual {res:.2e}")


# 7: piston family

@criterion(7)
def test_c07_piston(gas14):
    imp = ImplicitSystem(list(gasdyn.piston_residuals(gas14)), ("u", "rho"))
    grid = solve_grid(imp, 9.0 + np.arange(101) * 1e-3, 3.0 + np.arange(101) * 1e-3, [3.0, 1.0])
    res = residual_pde(gasdyn.physical_system(gas14), grid).max_residual
    ok = grid.converged_fraction == 1.0 and res < 1e-4
    assert report(7, ok, f"converged {grid.converged_fraction:.1%}, pde residual {res:.2e}")


# 8: Manin series

GRID20 = grid_points(np.linspace(-1.0, 1.0, 20), np.linspace(0.5, 2.0, 20))


def _rho_kernel(weight, rho):
    # int_0^rho (rho - y) weight(y) dy
    return np.array([simpson(lambda y: (r - y) * weight(y), 0.0, r, 1e-13) for r in rho])


@criterion(8)
@pytest.mark.parametrize("alpha2, a2", [("2*rho", lambda y: 2 * y), ("rho^2 + 1", lambda y: y**2 + 1)])
def test_c08_manin_closed_forms(alpha2, a2):
    m = SeparableModel(alpha2)
    u, rho = GRID20["u"], GRID20["rho"]
    H2 = u**2 * rho / 2 + _rho_kernel(lambda y: y * a2(y), rho)
    H1 = u**2 / 2 + _rho_kernel(a2, rho)
    e1 = np.max(np.abs(el.evaluate(manin_hamiltonian(m, (1, 0), 2).H, GRID20) - H2))
    e2 = np.max(np.abs(el.evaluate(manin_hamiltonian(m, (0, 1), 1).H, GRID20) - H1))
    assert report(8, max(e1, e2) < 1e-12, f"alpha^2 = {alpha2}: closed-form errors {e1:.1e}, {e2:.1e}")


@criterion(8)
@pytest.mark.parametrize("alpha2, beta2", [("2*rho", "1"), ("rho^2", "u^2 + 1")])
def test_c08_manin_commute(alpha2, beta2):
    m = SeparableModel(alpha2, beta2)
    hs = [manin_hamiltonian(m, kind, k) for kind in ((1, 0), (0, 1)) for k in range(-1, 4)]
    worst = max(commute_check(a, b, GRID20) for a, b in itertools.combinations(hs, 2))
    assert report(8, worst < 1e-10, f"({alpha2}, {beta2}): max commutator {worst:.1e} "
                                    f"over {len(hs) * (len(hs) - 1) // 2} pairs")


# 9: trivial seeds

FIXTURES = system_fixtures()


@criterion(9)
@pytest.mark.parametrize("name, sys, pts", FIXTURES, ids=[f[0] for f in FIXTURES])
def test_c09_trivial_seeds(name, sys, pts):
    r1 = symmetry_residual(sys, sys.unit(), pts)
    rv = symmetry_residual(sys, sys.velocity(), pts)
    assert report(9, max(r1, rv) < 1e-10, f"{name}: w=1 {r1:.1e}, w=v {rv:.1e}")


# 10: commuting hydrodynamic symmetries

def _hydrodynamic(model, densities):
    sys = gasdyn.riemann_system(model)
    coeffs = gasdyn.hamiltonian_coefficients(model, *densities)

    def sigma(x, t, s, r, sx, rx):
        a, c = coeffs.evaluate(sys.point([s, r]))
        return a * sx, c * rx
    return sigma


@criterion(10)
def test_c10_commutativity(gas14):
    rng = np.random.default_rng(10)
    s1 = _hydrodynamic(gas14, ("u^2/2 + 1.4*rho^0.4/0.4", "rho*u"))
    s2 = _hydrodynamic(gas14, ("0", "1"))
    jets, _ = gasdyn.random_jets(rng, gas14, 20, depth=2)
    worst = max(float(np.max(np.abs(commutator2(s1, s2, j)))) for j in jets)
    assert report(10, worst < 1e-6, f"max commutator {worst:.1e} at 20 jets")


# 11: kernel of R^N

@criterion(11)
@pytest.mark.parametrize("N", [1, 2])
def test_c11_kernel_annihilation(gas14, N):
    rng = np.random.default_rng(11 + N)
    jets, rho = gasdyn.random_jets(rng, gas14, 20, depth=N + 1)
    pair = gasdyn.kernel_characteristic(gas14, N, rng.uniform(-1, 1, 2 * N))
    for _ in range(N):
        pair = gasdyn.recursion_expr(gas14, pair)
    worst = max(float(np.max(np.abs(v))) for v in gasdyn._eval_pair(gas14, pair, jets, rho))
    assert report(11, worst < 1e-7, f"N={N}: max |R^N k| {worst:.1e}")


# 12: first-order specs and their squares

PASSING_FIRST = [
    (["u1^2", "u2^2", "u3^2"], ["2*u1", "2*u2", "2*u3"]),
    (["u1^2", "u2^2", "u3^2"], ["2*u1 + 1", "2*u2 + 1", "2*u3 + 1"]),
    (["2*u1 + 1", "2*u2 + 1", "2*u3 + 1"], ["2", "2", "2"]),
    (["1", "1", "1"], ["0", "0", "0"]),
    (["0", "0", "0"], ["2.5", "2.5", "2.5"]),
]


@criterion(12)
@pytest.mark.parametrize("c, d", PASSING_FIRST, ids=[f"{c[0]}|{d[0]}" for c, d in PASSING_FIRST])
def test_c12_square_of_passing_spec(c, d):
    rng = np.random.default_rng(12)
    sys = epsilon_system(3)
    pts = epsilon_points(50, rng)
    first = RecursionSpecFirst(c, d)
    assert existence_first(sys, first, pts) < 1e-9
    second = squared_spec(sys, first)
    ex2 = existence_second(sys, second, pts)
    worst = 0.0
    for w in (sys.unit(), sys.velocity(), sys.coefficients(EPSILON_CUBIC)):
        twice = apply_first(sys, first, apply_first(sys, first, w))
        for u in pts:
            p = sys.point(u)
            ref = twice.evaluate(p)
            diff = np.abs(recursion_second(sys, second, w, p) - ref)
            worst = max(worst, float(np.max(diff / np.maximum(1.0, np.abs(ref)))))
    assert report(12, ex2 < 1e-8 and worst < 1e-8,
                  f"c={c[0]}, d={d[0]}: existence_second {ex2:.1e}, agreement {worst:.1e}")


# 13: expression language

@criterion(13)
def test_c13_derivatives_and_round_trip():
    rng = np.random.default_rng(13)
    checked = zero = 0
    for k in range(1000):
        e = el.parse(random_expr_text(rng, int(rng.integers(0, 7))))
        text = el.to_text(e)
        assert el.parse(text) == e and el.to_text(el.parse(text)) == text
        pt = dict(zip(VARS, rng.uniform(0.2, 2.0, 3)))
        try:
            val = float(el.evaluate(e, pt))
        except el.ExprError:
            continue
        if not np.isfinite(val) or abs(val) > 1e8:
            continue
        for v in VARS:
            try:
                d = float(el.evaluate(el.differentiate(e, v), pt))
            except el.DomainError:
                continue
            ref = mp_derivative(e, pt, v)
            assert derivative_close(d, ref, val), (el.to_text(e), v, d, ref)
            checked += 1
            zero += ref == 0.0
    report(13, True, f"1000 round trips, {checked} derivatives ({zero} exact zeros)")


# 14: determinism

@criterion(14)
def test_c14_cli_determinism(tmp_path):
    import yaml
    from hydrosym.cli import run
    cfg = {"task": "solve", "system": {"builtin": "polytropic_gas", "a": 1.0, "gamma": 3.0, "rho0": 0.0},
           "w": ["s", "r - 0.5"],
           "solve": {"convention": "classical", "x": {"start": 0.0, "stop": 0.1, "num": 41},
                     "t": {"start": -0.1, "stop": 0.0, "num": 41}, "guess": [0.0, 0.5], "x0": 0.0,
                     "t0": 0.0}}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    for out in ("a", "b"):
        assert run(["solve", "--config", str(path), "--out", str(tmp_path / out)]) in (0, 1)
    a, b = ((tmp_path / o / "solution.csv").read_bytes() for o in ("a", "b"))
    assert report(14, a == b, f"{len(a)} bytes, identical={a == b}")

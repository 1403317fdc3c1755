"""The epsilon-system: semi-Hamiltonian check, a cubic symmetry and its hodograph solution."""
import numpy as np

from hydrosym import exprlang as el
from hydrosym.core import epsilon_system
from hydrosym.geometry import tsarev_residual
from hydrosym.hodograph import build_implicit, residual_pde, solve_grid
from hydrosym.symmetry import symmetry_residual

sys = epsilon_system(3)
print("speeds:", [el.to_text(v.expr) for v in sys.speeds])
print("Tsarev residual at (1, 2, 4):", tsarev_residual(sys, [1.0, 2.0, 4.0]))

# sum of the three cubic symmetries: the hodograph relations are nondegenerate
cubic = [
    "2*u1^3/3 - u1^2*u2 - u1^2*u3 + 2*u1*u2*u3 + u2^3 - 3*u2^2*u3 + 3*u2*u3^2/2 - u3^3/2",
    "-u1^3/3 + u1^2*u3 + 3*u1*u2^2 - 6*u1*u2*u3 + 3*u1*u3^2/2 - 2*u2^3 + 3*u2^2*u3 - u3^3/2",
    "-u1^3/3 + u1^2*u2 - 3*u1*u2^2 + 3*u1*u2*u3 - 3*u1*u3^2/2 + u2^3 - 3*u2*u3^2/2 + u3^3",
]
w = sys.coefficients(cubic)
rng = np.random.default_rng(1)
pts = [np.array([1.0, 2.0, 4.0]) + rng.uniform(-0.3, 0.3, 3) for _ in range(10)]
print("symmetry residual of w:", symmetry_residual(sys, w, pts))

u0, t0 = np.array([0.8, 2.3, 4.0 + 1.0 / 15.0]), -9.5766666666666667
p = sys.point(u0)
x0 = float(w.evaluate(p)[0] - t0 * sys.speed_values(p)[0])
grid = solve_grid(build_implicit(sys, w), x0 + np.arange(101) * 1e-3, t0 + np.arange(101) * 1e-3,
                  u0, x0, t0)
print("grid:", grid.summary())
print("pde residual: %.2e" % residual_pde(sys, grid).max_residual)

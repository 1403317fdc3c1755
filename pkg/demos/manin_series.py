"""Separable Hamiltonian systems: Manin series, commuting densities and the linearizing map."""
import itertools

import numpy as np

from hydrosym import exprlang as el
from hydrosym.hodograph import residual_pde
from hydrosym.separable import (SeparableModel, commute_check, grid_points, linearize_separable,
                                manin_hamiltonian)

model = SeparableModel("rho^2", "u^2 + 1")
for kind, N in itertools.product(((1, 0), (0, 1)), range(3)):
    print(f"H^({N}){kind} =", el.to_text(manin_hamiltonian(model, kind, N).H))

pts = grid_points(np.linspace(-1, 1, 20), np.linspace(0.5, 2, 20))
hs = [manin_hamiltonian(model, kind, N) for kind in ((1, 0), (0, 1)) for N in range(-1, 4)]
print("max commutator over all pairs:",
      max(commute_check(a, b, pts) for a, b in itertools.combinations(hs, 2)))

# H_rho_u = x + t HN_rho_u, H_uu = t HN_uu solves (u, rho)_t = HN^ (u, rho)_x
m2 = SeparableModel("rho^2")
H = manin_hamiltonian(m2, (1, 0), 2)
HN = manin_hamiltonian(m2, (0, 1), 2)
u0, r0 = 0.7, 1.5
x0 = el.evaluate(H.d("rho", "u"), {"u": u0, "rho": r0})
grid, sys = linearize_separable(H, HN, x0 + np.arange(21) * 1e-3, np.arange(21) * 1e-3, [u0, r0], x0, 0.0)
print("linearized grid:", grid.summary(), "pde residual %.2e" % residual_pde(sys, grid).max_residual)

"""Polytropic gas in Riemann invariants: recursion operator, coefficient chain, piston flow."""
import numpy as np

from hydrosym import exprlang as el
from hydrosym import gasdyn
from hydrosym.hodograph import ImplicitSystem, residual_pde, solve_grid

model = gasdyn.polytropic(a=1.0, gamma=1.4)
sys = gasdyn.riemann_system(model)
s, r = gasdyn.riemann_from_physical(model, 0.3, 1.2)
print("Riemann invariants at (u, rho) = (0.3, 1.2):", s, r)
print("speeds:", sys.speed_values(sys.point([s, r])))

# R(1, 1) against the hand-expanded form at a few random jets
rng = np.random.default_rng(0)
jets, rho = gasdyn.random_jets(rng, model, 5, depth=3)
f2, g2 = gasdyn.recursion_apply(model, ("1", "1"), jets, rho)
ref = gasdyn._eval_pair(model, gasdyn.closed_form(model, 2), jets, rho)
print("R(1,1) vs closed form, max rel err:", np.max(np.abs(f2 - ref[0]) / np.abs(ref[0])))

# the coefficient recursion walks (phi, psi) -> (-1, -1) -> (0, 0)
once = gasdyn.recursion_ac_fields(model, sys.velocity())
print("R(phi, psi) =", once.evaluate(sys.point([s, r])))

# first members of the K chain
for k, (F1, F2) in enumerate(gasdyn.k_chain_terms(model, 2)[:3]):
    print(f"K-chain term {k}:", el.to_text(F1), "|", el.to_text(F2))

# piston family on a smooth patch
imp = ImplicitSystem(list(gasdyn.piston_residuals(model)), ("u", "rho"))
grid = solve_grid(imp, 9.0 + np.arange(51) * 1e-3, 3.0 + np.arange(51) * 1e-3, [3.0, 1.0])
rep = residual_pde(gasdyn.physical_system(model), grid)
print("piston grid:", grid.summary(), "pde residual %.2e" % rep.max_residual)

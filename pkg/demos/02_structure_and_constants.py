# %% [markdown]
# # Structural constants of the membrane model and the Galerkin drift
#
# The growth/coercivity constants of the FitzHugh-Nagumo current are
# certified by a brute-force grid search; from them (and the noise amplitudes)
# we get the coercivity constant K and the one-sided Lipschitz constant K_r of
# the finite-dimensional system. We then spot-check both inequalities.

# %%
import numpy as np

from stochbidomain.config import ScenarioConfig, build_scenario
from stochbidomain.galerkin import BidomainGalerkin, check_coercivity, check_monotonicity
from stochbidomain.membrane import MembraneModel, check_structural_bounds

model = MembraneModel()
print(model.constants)
rep = check_structural_bounds(model, w_range=(-10, 10))
print({k: round(v, 6) for k, v in rep.margins.items()}, "ok:", rep.ok)

# %% [markdown]
# A wrong lower constant is caught with the offending v.

# %%
from dataclasses import replace

bad = check_structural_bounds(model, constants=replace(model.constants, c_lower_I=2.0))
print(bad.ok, bad.violations)

# %%
sc = build_scenario(ScenarioConfig())
p = BidomainGalerkin.from_geometry(sc.geometry, sc.membrane, sc.forcing, sc.config.eps)
print("K =", p.coercivity_constant(), " K_r =", p.monotonicity_constant())
rng = np.random.default_rng(0)
C1, C2 = rng.standard_normal(64), rng.standard_normal(64)
r = check_monotonicity(C1, C2, p)
print(f"I_M={r.I_M:.3f}  I_IH={r.I_IH:.3f}  |dG|^2/|dC|^2={r.diffusion_quotient:.2e}  margin={r.margin:.3f}")
print("coercivity margin:", check_coercivity(C1, p))

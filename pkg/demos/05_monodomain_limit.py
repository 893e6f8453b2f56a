# %% [markdown]
# # Letting eps go to zero
#
# With proportional conductivities (here M_i = 0.5 M_e), the bidomain system
# with the eps-regularization collapses onto a single reaction-diffusion
# equation for v with the harmonic-mean conductivity M_i M_e / (M_i + M_e),
# which equals M_i / (1 + lambda) for M_i = lambda M_e. The L2 distance
# between the two solutions (same increments) should shrink with eps.

# %%
from stochbidomain.config import ScenarioConfig, build_scenario
from stochbidomain.verify import monodomain_compare

cfg = ScenarioConfig()
sc = build_scenario(cfg)
print("lambda =", sc.geometry.conductivity.proportionality())
rep = monodomain_compare(sc, [1e-1, 1e-2, 1e-3, 1e-4], seed=3)
for row in rep.rows:
    print(f"eps={row['epsilon']:.0e}  |v_bi - v_mono|_L2 = {row['l2_difference']:.3e}")

# %% [markdown]
# Weak-form residual of the discrete solution: first order in dt.

# %%
from stochbidomain.verify import weak_residual_richardson

cfg.noise.v.strength = cfg.noise.w.strength = 0.0
print(weak_residual_richardson(build_scenario(cfg), ell=1))

# %% [markdown]
# # Energy bounds that do not grow with n
#
# Run the same 32-path ensemble (same per-path seeds, so nested Brownian
# modes) at n = 8, 16, 32 and compare Monte Carlo means of the sup-in-time
# norms and space-time integrals. Bounded growth per doubling is the
# numerical face of an n-independent bound. Takes ~10 s.

# %%
from stochbidomain.config import ScenarioConfig, build_scenario, ensemble_spec
from stochbidomain.verify import energy_suite, moment_suite, run_ladder

cfg = ScenarioConfig()
ladder = run_ladder(lambda n: build_scenario(cfg, n), [8, 16, 32], ensemble_spec(cfg, 32))
energy = energy_suite(ladder)
for row in energy.rows:
    if "growth" in row:
        print(f"{row['estimate']:>14s} {row['n']:>8s}  growth {row['growth']:.3f}")
print("energy gates pass:", energy.passed)

# %%
moments = moment_suite(ladder, q0=5.0)
print("q0=5 max growth:", max(r["growth"] for r in moments.rows if "growth" in r))

# %% [markdown]
# Temporal translation: how fast does E sup_{tau<=delta} int |u(t+tau)-u(t)|^2
# shrink with delta? We only check a lower bound on the log-log slope.

# %%
from stochbidomain.verify import translation_suite

sc = build_scenario(cfg)
tr = translation_suite(sc, [0.002, 0.004, 0.008, 0.016], ensemble_spec(cfg, 32))
print({k: round(v["slope"], 3) for k, v in tr.slopes.items()}, tr.gates)

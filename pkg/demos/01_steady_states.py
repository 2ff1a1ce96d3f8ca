"""
Steady states of the two-species flatfish fishery
=================================================

Find every interior steady state under the sole quota, then check the
stable one by integrating the stock dynamics forward for a century.
"""
import numpy as np

from adaptimpact import ModelParams
from adaptimpact import dynamics as dyn
from adaptimpact.model import model_to_tonnes, price_to_eur_per_kg

params = ModelParams()

# All roots reachable from a grid of Newton seeds, largest plaice stock first.
roots = dyn.steady_states(params)
for st in roots:
    t = st.tonnes
    p = price_to_eur_per_kg(st.p, params)
    print(f"plaice {t[0]:9.0f} t  sole {t[1]:8.0f} t  "
          f"prices {p[0]:.2f}/{p[1]:.2f} EUR/kg  stable={st.stable}")

# The reference state: largest plaice stock, sole quota binding.
upper = dyn.find_steady_state(params, branch="upper")
print("\nquota binding (plaice, sole):", upper.quota_binding)
print("fleet sizes:", np.round(upper.n, 1))
print("landings (t):", np.round(model_to_tonnes(upper.q, params)))

# A stable state should not move under the dynamics.
tr = dyn.integrate(upper.x, params, horizon=100.0, step=0.1)
drift = np.max(np.abs(tr.final / upper.x - 1.0))
print(f"relative drift after 100 years: {drift:.1e}")

# Start away from it and watch the stocks settle back.
tr = dyn.integrate(upper.x * np.array([0.8, 1.1]), params, horizon=60.0, step=0.1)
for year in (0, 10, 30, 60):
    i = int(round(year / 0.1))
    print(f"year {year:3d}: plaice {tr.x[i, 0] * params.kappa:9.0f} t, "
          f"sole {tr.x[i, 1] * params.kappa:8.0f} t")

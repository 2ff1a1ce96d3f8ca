"""
How far can a driver move before the interior steady state disappears?
======================================================================

Continue the steady state from the baseline while lowering the wage and
the returns to effort, and report where the branch ends.  A relative
table then compares steady states at the ends of each driver's range.
"""
from adaptimpact import ModelParams
from adaptimpact import dynamics as dyn

params = ModelParams()

# Lower the returns to effort until the branch is lost.
res = dyn.bifurcation_scan(params, "epsilon", (params.epsilon, 0.48), steps=40)
print(f"epsilon: interior state lost between {res.bracket[1]:.9f} and {res.bracket[0]:.9f}"
      f" ({res.critical / params.epsilon:.4f} of the baseline)")
print("bracket confirmed by cold solves:", dyn.verify_bracket(res, params))

# The last states before the fold: sole grows while plaice shrinks.
for value, st in res.branch[-5::2]:
    print(f"  epsilon {value:.5f}: stocks {st.tonnes[0]:9.0f} / {st.tonnes[1]:7.0f} t")

# Relative steady states at the driver bounds, reached by continuation.
print("\nsteady states relative to the baseline (stocks and fleets, %):")
for row in dyn.relative_steady_table(params, steps=10):
    if not row.interior:
        print(f"  {row.label:12s} no interior steady state")
        continue
    s, n = 100 * row.stocks, 100 * row.fleets
    print(f"  {row.label:12s} stocks {s[0]:6.1f} {s[1]:6.1f}   fleets {n[0]:6.1f} {n[1]:6.1f}")

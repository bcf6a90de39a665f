"""The efficacy-toxicity trade-off design.

Builds the target contour from elicited equally-desirable outcome pairs,
shows the desirability level sets, screens doses for acceptability, and runs
one simulated trial.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dosefind.designs import EfftoxDesign, McmcSettings
from dosefind.efftox import (
    AcceptabilityLimits,
    EfftoxModel,
    desirability,
    fit_tradeoff_contour,
    gumbel_cells,
    marginalize,
)
from dosefind.simulate import Scenario, run_trial

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- why trade-offs and not best-cell probabilities --------------------------
# Two hypothetical treatments with identical probability of the best outcome
# (efficacy without toxicity) can still differ a lot in marginal efficacy.
for cells in [(0.50, 0.10, 0.30, 0.10), (0.30, 0.20, 0.30, 0.20), (0.30, 0.20, 0.45, 0.05)]:
    pe, pt, cond = marginalize(cells)
    print(f"cells {cells} -> pi_E={pe:.2f} pi_T={pt:.2f} pi_E|no-tox={cond:.2f}")

contour = fit_tradeoff_contour([(0.2, 0.08), (0.45, 0.25), (0.7, 0.6)])
d1 = desirability((0.40, 0.50), contour)
d2 = desirability((0.25, 0.50), contour)
print(f"\ndesirability: (0.40, 0.50) -> {d1:.4f}  beats  (0.25, 0.50) -> {d2:.4f}")

# --- the target contour and its level sets ----------------------------------
fig, ax = plt.subplots(figsize=(5, 4.5))
pes = np.linspace(0, 1, 200)
ax.plot(pes, [contour.value(p) for p in pes], "b-", label="target contour (delta = 1/e)")
for u in (0.2, 0.5, 0.7):
    r = -np.log(u)
    qs = [(1 + r * (p - 1), r * contour.value(p)) for p in pes]
    qs = [(a, b) for a, b in qs if 0 <= a <= 1 and 0 <= b <= 1]
    if qs:
        ax.plot(*zip(*qs), "--", lw=0.8, label=f"delta = {u}")
ax.scatter(*zip(*contour.pairs), marker="x", c="k", label="elicited pairs")
ax.scatter([1], [0], marker="*", s=120, c="gold", label="ideal")
ax.set_xlabel("probability of efficacy")
ax.set_ylabel("probability of toxicity")
ax.set_xlim(0, 1), ax.set_ylim(0, 1)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(OUT / "tradeoff_contours.png", dpi=120)
print("wrote", OUT / "tradeoff_contours.png")

# --- one simulated trial ------------------------------------------------------
model = EfftoxModel("bivariate", link="probit", joint="gumbel")
design = EfftoxDesign(
    model=model,
    doses=(0.1, 0.3, 0.5, 0.7, 0.9),
    limits=AcceptabilityLimits(0.2, 0.35, 0.9, 0.9),
    contour=contour,
    prior=model.default_prior(),
    n_max=24,
    cohort_size=3,
    mcmc=McmcSettings(iterations=3000, burnin=1000),
)
scenario = Scenario(
    kind="efftox",
    accrual_rate=3.0,
    eval_window=0.25,
    dose_outcomes=tuple(
        {"eff": e, "tox": t, "psi": 0.5}
        for e, t in [(0.2, 0.05), (0.35, 0.1), (0.5, 0.18), (0.6, 0.3), (0.65, 0.45)]
    ),
)
state = run_trial(design, scenario, seed=11)
print(f"\nsimulated trial: {state.n_assigned} patients, stopped={state.stopped}")
for p in state.treated_patients():
    tr = state.assignment(p).data["treatment"]["dose_index"]
    oc = state.outcome(p)
    print(f"  patient {p}: dose {tr} outcome {oc.data if oc else 'pending'}")

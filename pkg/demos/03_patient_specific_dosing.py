"""Covariate-individualized dose-finding.

Fits the historical model, regresses elicited per-patient limits into
acceptability bounding functions, and shows how the acceptable set and the
selected dose change with the patient's covariates.
"""

import numpy as np
from scipy.special import ndtr

from dosefind.covariates import (
    HistoricalDataset,
    acceptable_set_for_patient,
    fit_bounding_function,
    fit_historical,
    select_dose_for_patient,
)
from dosefind.efftox import fit_tradeoff_contour
from dosefind.mcmc import McmcConfig, PosteriorSample

# --- historical data ----------------------------------------------------------
rng = np.random.default_rng(42)
records = []
for _ in range(150):
    treatment = int(rng.integers(0, 2))
    z = float(rng.normal())
    eta_e = (-0.4, 0.1)[treatment] + 0.6 * z
    eta_t = (-1.2, -0.8)[treatment] + 0.35 * z
    records.append(
        (treatment, (z,), (int(rng.random() < ndtr(eta_e)), int(rng.random() < ndtr(eta_t))))
    )
history = HistoricalDataset(tuple(records), 2)
sample, hist_model = fit_historical(
    history, config=McmcConfig(seed=5, iterations=4000, burnin=1500)
)
be = sample.draws[:, hist_model.beta_slice("E")].mean(axis=0)
bt = sample.draws[:, hist_model.beta_slice("T")].mean(axis=0)
print("posterior-mean covariate effects: efficacy", be, "toxicity", bt)

# --- bounding functions ---------------------------------------------------------
representative = [(-1.5,), (-0.5,), (0.0,), (0.8,), (1.5,)]
eff_floors = [0.08, 0.12, 0.15, 0.20, 0.26]
tox_ceilings = [0.42, 0.38, 0.35, 0.31, 0.27]
bounds, scatter = fit_bounding_function(
    representative, eff_floors, tox_ceilings, sample, hist_model
)
print(f"\nbounding fits: efficacy {bounds.eff_family}, toxicity {bounds.tox_family}")
print("scattergram (efficacy):")
for row in scatter["E"]:
    print(f"  zeta={row['zeta']:+.3f}  elicited={row['elicited']:.2f}  fitted={row['fitted']:.3f}")

# --- per-patient decisions ------------------------------------------------------
model = hist_model.joint()
idx = {n: i for i, n in enumerate(model.param_names)}
theta = np.zeros(len(model.param_names))
theta[idx["aE1"]] = 1.6
theta[idx["aT1"]] = 0.8
theta[idx["bE1"]] = 0.6
theta[idx["bT1"]] = 0.35
theta[idx["cE1"]] = -0.8   # dose helps low-z patients more
theta[idx["cT1"]] = 0.9    # and harms high-z patients more
theta[idx["mE1"]] = -0.4
theta[idx["mT1"]] = -1.2
posterior = PosteriorSample.degenerate(model.param_names, theta)
contour = fit_tradeoff_contour([(0.2, 0.08), (0.45, 0.25), (0.7, 0.6)])
doses = (0.25, 0.5, 0.75, 1.0)

print("\nper-patient acceptable sets and selections:")
for z in [(-1.5,), (0.0,), (1.5,)]:
    acc = acceptable_set_for_patient(z, model, posterior, doses, bounds, 0.9, 0.9)
    pick = select_dose_for_patient(z, model, posterior, acc, doses, contour)
    floor = bounds.eff_floor(model, z)
    ceil = bounds.tox_ceiling(model, z)
    label = f"dose index {pick}" if pick is not None else "off protocol"
    print(
        f"  z={z[0]:+.1f}: floor={floor:.3f} ceiling={ceil:.3f} "
        f"acceptable={acc} -> {label}"
    )

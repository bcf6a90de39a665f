"""Joint schedule and per-administration-dose optimization.

Draws the triangular component hazards and the smooth cumulative hazard
they add up to, then screens the schedule-dose matrix for acceptability and
picks treatment pairs under the one-step escalation rule.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dosefind.mcmc import McmcConfig, PosteriorSample, sample_posterior
from dosefind.schedule import (
    Regime,
    ScheduleGrid,
    SchedModel,
    TimeToToxRecord,
    acceptable_pairs,
    draw_tox_time,
    regime_cum_hazard,
    regime_hazard,
    select_pair,
    tri_hazard,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- component triangles and their sum ----------------------------------------
theta = np.array([0.4, 4.0, 6.0])
regime = Regime((0.0, 3.0, 10.0, 13.0), (0, 0, 0, 0))
ts = np.linspace(0, 40, 801)
lam = [regime_hazard(t, 0.0, regime, theta) for t in ts]
cum = [regime_cum_hazard(t, 0.0, regime, theta) for t in ts]

fig, axes = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
for s in regime.times:
    axes[0].plot(ts, [tri_hazard(t - s, theta) for t in ts], lw=0.9)
axes[0].plot(ts, lam, "k-", lw=1.6, label="regime hazard")
axes[0].set_ylabel("hazard")
axes[0].legend(fontsize=8)
axes[1].plot(ts, cum, "k-")
axes[1].fill_between(ts[ts <= 12], np.array(cum)[ts <= 12], alpha=0.3)
axes[1].set_xlabel("days since entry")
axes[1].set_ylabel("cumulative hazard")
axes[1].set_title("shaded: cumulative hazard by day 12", fontsize=9)
fig.tight_layout()
fig.savefig(OUT / "schedule_hazards.png", dpi=120)
print("wrote", OUT / "schedule_hazards.png")
print(f"cumulative hazard by day 12: {regime_cum_hazard(12.0, 0.0, regime, theta):.4f}")
print(f"never-toxicity probability: {np.exp(-regime_cum_hazard(1e9, 0.0, regime, theta)):.4f}")

# --- posterior screening of the schedule-dose matrix ----------------------------
grid = ScheduleGrid(
    schedules=((0.0,), (0.0, 7.0), (0.0, 7.0, 14.0)),
    pads=(1.0, 2.0, 3.0),
    t_star=40.0,
    target=0.30,
    f_max=0.35,
    p_cut=0.80,
)
model = SchedModel(grid)
prior = model.default_prior(area_mean=0.3, rise_mean=6.0, fall_mean=10.0)

rng = np.random.default_rng(21)
true_theta = np.array([0.06, 4, 7, 0.12, 4, 7, 0.2, 4, 7])
records = []
entry = 0.0
for i in range(12):
    k, j = int(rng.integers(0, 2)), int(rng.integers(0, 3))
    reg = grid.planned_regime(k, j)
    t_tox = draw_tox_time(reg, true_theta, rng)
    if t_tox is not None and t_tox <= grid.t_star:
        records.append(TimeToToxRecord(entry, reg.truncate_at(t_tox), t_tox, True))
    else:
        records.append(TimeToToxRecord(entry, reg, grid.t_star, False))
    entry += 4.0

posterior = sample_posterior(
    model.compiled(records), None, prior, McmcConfig(seed=3, iterations=3000, burnin=1200)
)
pick, acc, mean_f = select_pair(posterior, grid, current=(1, 1), tried={(0, 0), (1, 0), (1, 1)})
print(f"\nacceptable pairs: {acc}")
print("posterior mean Pr(toxicity by day 40):")
for k in range(grid.n_schedules):
    row = "  " + "  ".join(f"{mean_f[k, j]:.3f}" for j in range(grid.n_pads))
    print(f"  schedule {k + 1} ({len(grid.schedules[k])} adm):{row}")
print(f"next pair from (1,1): schedule {pick[0] + 1}, dose level {pick[1] + 1}")

fig, ax = plt.subplots(figsize=(4.5, 3.2))
im = ax.imshow(mean_f, cmap="RdYlGn_r", vmin=0, vmax=0.7)
for k in range(grid.n_schedules):
    for j in range(grid.n_pads):
        mark = "" if (k, j) in acc else " x"
        ax.text(j, k, f"{mean_f[k, j]:.2f}{mark}", ha="center", va="center", fontsize=8)
ax.set_xlabel("per-administration dose level")
ax.set_ylabel("schedule")
ax.set_title("E[Pr(T <= t*)]; x = unacceptable", fontsize=9)
fig.colorbar(im, shrink=0.8)
fig.tight_layout()
fig.savefig(OUT / "schedule_matrix.png", dpi=120)
print("wrote", OUT / "schedule_matrix.png")

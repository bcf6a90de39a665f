"""Two-agent combination dose-finding, end to end.

Walks the toxicity surface for a pair of agents: the six-parameter model,
its isocontour geometry, stage-1 escalation along the diagonal line, and
stage-2 exploration of the estimated target contour by accumulated Fisher
information.  Saves plots under demos/output/.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dosefind.combo import (
    ComboModel,
    DiagonalLine,
    combo_tox_prob,
    estimate_contour,
    fisher_logdet,
    stage1_select,
    stage2_select,
)
from dosefind.mcmc import McmcConfig, PosteriorSample, sample_posterior

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- the toxicity surface ---------------------------------------------------
# Standardized doses live in the unit square.  With all six parameters at 1
# the surface is symmetric in the two agents.
theta_true = np.array([0.8, 1.4, 0.6, 1.1, 1.5, 0.9])
grid = np.linspace(0, 1, 101)
surface = np.array(
    [[combo_tox_prob((x1, x2), theta_true.reshape(1, -1))[0] for x2 in grid] for x1 in grid]
)
print("toxicity at (0,0):", surface[0, 0])
print("toxicity at (1,1):", surface[-1, -1])

fig, ax = plt.subplots(figsize=(5, 4.5))
cs = ax.contour(grid, grid, surface.T, levels=[0.1, 0.2, 0.3, 0.4, 0.5, 0.7])
ax.clabel(cs, fmt="%.2f")
line = DiagonalLine.from_fractions(
    (0.08, 0.1), (0.85, 0.9), [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], [0.1, 0.3]
)
lx = [line.start[0], line.end[0]]
ly = [line.start[1], line.end[1]]
ax.plot(lx, ly, "k--", lw=1)
ax.scatter(*zip(*line.doses), c=["tab:blue" if not e else "tab:orange" for e in line.expansion], s=30)
ax.set_xlabel("agent 1 (standardized dose)")
ax.set_ylabel("agent 2 (standardized dose)")
ax.set_title("toxicity isocontours with the stage-1 line")
fig.tight_layout()
fig.savefig(OUT / "combo_isocontours.png", dpi=120)
print("wrote", OUT / "combo_isocontours.png")

# --- stage 1: walking the line -----------------------------------------------
# Simulate a handful of cohorts on the line under the true surface.
model = ComboModel()
prior = model.default_prior()
rng = np.random.default_rng(7)
data = []
current = 0
any_tox = False
target = 0.30
print("\nstage 1 walk (target 0.30):")
for cohort in range(5):
    sample = sample_posterior(
        model.compiled(data), None, prior, McmcConfig(seed=cohort, iterations=2000, burnin=800)
    )
    current = stage1_select(sample, line, target, current, any_tox)
    pair = line.doses[current]
    for _ in range(2):
        y = int(rng.random() < combo_tox_prob(pair, theta_true.reshape(1, -1))[0])
        any_tox = any_tox or bool(y)
        data.append((pair, y))
    print(f"  cohort {cohort + 1}: line dose {current} -> pair ({pair[0]:.2f}, {pair[1]:.2f}), outcomes {[d[1] for d in data[-2:]]}")

# --- stage 2: the estimated target contour ----------------------------------
sample = sample_posterior(
    model.compiled(data), None, prior, McmcConfig(seed=99, iterations=3000, burnin=1000)
)
contour = estimate_contour(sample, target, grid=101, tolerance=1e-4)
print(f"\nestimated target contour: {len(contour.vertices)} vertices")
history = [pair for pair, _ in data]
left = stage2_select(sample, contour, "left", history, line)
right = stage2_select(sample, contour, "right", history, line)
print("stage-2 picks: left", left, "right", right)
print(
    "log-det information at the left pick:",
    fisher_logdet(left, sample.draws[0], history),
)

fig, ax = plt.subplots(figsize=(5, 4.5))
if contour.vertices:
    ax.plot(*zip(*contour.vertices), "r-", label="estimated target contour")
ax.plot(lx, ly, "k--", lw=1)
ax.scatter(*zip(*history), c="gray", s=18, label="treated pairs")
ax.scatter(*zip(left, right), c="tab:red", marker="*", s=140, label="stage-2 picks")
ax.legend(loc="upper right", fontsize=8)
ax.set_xlim(0, 1), ax.set_ylim(0, 1)
ax.set_title("stage-2 selection on the posterior-mean contour")
fig.tight_layout()
fig.savefig(OUT / "combo_stage2.png", dpi=120)
print("wrote", OUT / "combo_stage2.png")

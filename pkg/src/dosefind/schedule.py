"""Joint schedule and per-administration-dose optimization on time to
toxicity.

Triangular (default) or Weibull single-administration hazards, additive
regime hazards in study time, right-censored likelihood, posterior
acceptability screening of the schedule-dose matrix, and constrained pair
selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mcmc import PosteriorSample
from .priors import ConfigurationError, PriorEntry, PriorSpec

__all__ = [
    "ScheduleGrid",
    "Regime",
    "TimeToToxRecord",
    "SchedModel",
    "tri_hazard",
    "tri_cum_hazard",
    "weibull_hazard",
    "weibull_cum_hazard",
    "regime_hazard",
    "regime_cum_hazard",
    "tox_cdf",
    "sched_log_likelihood",
    "acceptable_pairs",
    "select_pair",
    "draw_tox_time",
]


def tri_hazard(u: float, theta_j) -> float:
    """Triangular single-administration hazard: rises linearly to its peak
    2a/(b+g) at u = b, falls linearly to zero at u = b + g."""
    a, b, g = (float(v) for v in theta_j)
    if a <= 0 or b <= 0 or g <= 0:
        raise ConfigurationError("triangular hazard parameters must be positive")
    if u <= 0.0 or u >= b + g:
        return 0.0
    peak = 2.0 * a / (b + g)
    if u <= b:
        return peak * (u / b)
    return peak * ((b + g - u) / g)


def tri_cum_hazard(u: float, theta_j) -> float:
    """Closed-form integral of the triangular hazard; equals the triangle
    area a for u beyond the support."""
    a, b, g = (float(v) for v in theta_j)
    if a <= 0 or b <= 0 or g <= 0:
        raise ConfigurationError("triangular hazard parameters must be positive")
    if u <= 0.0:
        return 0.0
    if u <= b:
        return a * u * u / ((b + g) * b)
    if u < b + g:
        r = b + g - u
        return a - a * r * r / ((b + g) * g)
    return a


def weibull_hazard(u: float, theta_j) -> float:
    """Two-parameter alternative hazard e^b a u^(a-1) exp(-u^a e^b);
    nonmonotone for a >= 2, decreasing for a < 2.  Undefined at u = 0 when
    a < 1; use the cumulative form in likelihoods."""
    a, b = float(theta_j[0]), float(theta_j[1])
    if a <= 0:
        raise ConfigurationError("weibull shape must be positive")
    if u <= 0.0:
        return 0.0 if a >= 1.0 else math.inf
    eb = math.exp(b)
    return eb * a * u ** (a - 1.0) * math.exp(-(u**a) * eb)


def weibull_cum_hazard(u: float, theta_j) -> float:
    a, b = float(theta_j[0]), float(theta_j[1])
    if a <= 0:
        raise ConfigurationError("weibull shape must be positive")
    if u <= 0.0:
        return 0.0
    return 1.0 - math.exp(-(u**a) * math.exp(b))


_HAZARDS = {
    "triangular": (tri_hazard, tri_cum_hazard, 3),
    "weibull": (weibull_hazard, weibull_cum_hazard, 2),
}


@dataclass(frozen=True)
class Regime:
    """Administration times (strictly increasing) with a per-administration
    dose index into the PAD grid; the doses need not be identical."""

    times: tuple[float, ...]
    dose_idx: tuple[int, ...]

    def __post_init__(self):
        if len(self.times) != len(self.dose_idx):
            raise ConfigurationError("one dose per administration time required")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ConfigurationError("administration times must strictly increase")

    def truncate_at(self, patient_time: float) -> "Regime":
        """Administrations actually delivered by ``patient_time`` (toxicity
        cancels the rest of the regime)."""
        keep = [i for i, t in enumerate(self.times) if t <= patient_time]
        return Regime(
            tuple(self.times[i] for i in keep),
            tuple(self.dose_idx[i] for i in keep),
        )


@dataclass(frozen=True)
class TimeToToxRecord:
    """One patient's outcome data at the current study time: entry time, the
    regime administered so far, the observed time (event or follow-up), and
    the event indicator."""

    entry_time: float
    regime: Regime
    t_obs: float
    event: bool

    def __post_init__(self):
        if self.t_obs < 0:
            raise ConfigurationError("observed time must be nonnegative")


def _theta_for(theta, j: int, family: str):
    _, _, k = _HAZARDS[family]
    return tuple(theta[k * j + i] for i in range(k))


def regime_hazard(t: float, entry: float, regime: Regime, theta, family="triangular") -> float:
    """Hazard at study time ``t`` for a patient entering at ``entry``:
    administrations add (each contributes only once its time has passed)."""
    h, _, _ = _HAZARDS[family]
    lam = 0.0
    for s, j in zip(regime.times, regime.dose_idx):
        u = t - entry - s
        if u > 0.0:
            lam += h(u, _theta_for(theta, j, family))
    return lam


def regime_cum_hazard(t: float, entry: float, regime: Regime, theta, family="triangular") -> float:
    _, hcum, _ = _HAZARDS[family]
    lam = 0.0
    for s, j in zip(regime.times, regime.dose_idx):
        u = t - entry - s
        if u > 0.0:
            lam += hcum(u, _theta_for(theta, j, family))
    return lam


@dataclass(frozen=True)
class ScheduleGrid:
    """The K x J treatment matrix: nested schedules (prefix containment),
    ascending per-administration doses, the evaluation horizon and targets."""

    schedules: tuple[tuple[float, ...], ...]
    pads: tuple[float, ...]
    t_star: float
    target: float
    f_max: float
    p_cut: float = 0.9
    start_pair: tuple[int, int] = (0, 0)

    def __post_init__(self):
        for k in range(len(self.schedules) - 1):
            a, b = self.schedules[k], self.schedules[k + 1]
            if len(a) >= len(b) or b[: len(a)] != a:
                raise ConfigurationError("schedules must be nested by prefix containment")
        if any(d2 <= d1 for d1, d2 in zip(self.pads, self.pads[1:])):
            raise ConfigurationError("PADs must strictly increase")
        if self.t_star <= max(self.schedules[-1]):
            raise ConfigurationError("the horizon must cover the longest schedule")
        if not (0.0 < self.target < 1.0 and 0.0 < self.f_max < 1.0 and 0.0 < self.p_cut < 1.0):
            raise ConfigurationError("target, F_max and cutoff must lie in (0, 1)")
        sk, sj = self.start_pair
        if not (0 <= sk <= min(1, len(self.schedules) - 1) and 0 <= sj <= min(1, len(self.pads) - 1)):
            raise ConfigurationError("the start pair must be one of the four safest cells")

    @property
    def n_schedules(self) -> int:
        return len(self.schedules)

    @property
    def n_pads(self) -> int:
        return len(self.pads)

    def planned_regime(self, k: int, j: int) -> Regime:
        s = self.schedules[k]
        return Regime(tuple(s), tuple([j] * len(s)))

    def total_dose(self, k: int, j: int) -> float:
        return len(self.schedules[k]) * self.pads[j]


def tox_cdf(grid: ScheduleGrid, k: int, j: int, theta, family="triangular") -> float:
    """Pr(T <= horizon) for the full planned regime of pair (k, j), in
    patient time."""
    reg = grid.planned_regime(k, j)
    lam = regime_cum_hazard(grid.t_star, 0.0, reg, theta, family)
    return 1.0 - math.exp(-lam)


def _tox_cdf_draws(grid: ScheduleGrid, k: int, j: int, draws: np.ndarray, family: str) -> np.ndarray:
    """F_{k,j} per posterior draw, vectorized over the chain."""
    _, hcum, npar = _HAZARDS[family]
    s = grid.schedules[k]
    total = np.zeros(draws.shape[0])
    if family == "triangular":
        a = draws[:, 3 * j]
        b = draws[:, 3 * j + 1]
        g = draws[:, 3 * j + 2]
        for t_adm in s:
            u = grid.t_star - t_adm
            total += _tri_cum_vec(u, a, b, g)
    else:
        a = draws[:, 2 * j]
        b = draws[:, 2 * j + 1]
        for t_adm in s:
            u = grid.t_star - t_adm
            if u > 0:
                total += 1.0 - np.exp(-(u**a) * np.exp(b))
    return 1.0 - np.exp(-total)


def _tri_cum_vec(u: float, a, b, g):
    if u <= 0:
        return np.zeros_like(a)
    bg = b + g
    rising = a * u * u / (bg * b)
    r = np.maximum(bg - u, 0.0)
    falling = a - a * r * r / (bg * g)
    return np.where(u <= b, rising, np.where(u < bg, falling, a))


def sched_log_likelihood(records, theta, family="triangular") -> float:
    """Right-censored likelihood at the current study time: event records
    contribute log hazard at the event time, all records contribute the
    negative cumulative hazard over follow-up.  An event where the model
    hazard is zero is impossible (-inf; the sampler rejects)."""
    h, hcum, _ = _HAZARDS[family]
    total = 0.0
    for r in records:
        lam_cum = 0.0
        lam = 0.0
        for s, j in zip(r.regime.times, r.regime.dose_idx):
            u = r.t_obs - s
            if u > 0.0:
                th = _theta_for(theta, j, family)
                lam_cum += hcum(u, th)
                if r.event:
                    lam += h(u, th)
        if r.event:
            if lam <= 0.0:
                return -math.inf
            total += math.log(lam)
        total -= lam_cum
    return total


def acceptable_pairs(sample: PosteriorSample, grid: ScheduleGrid, family="triangular") -> list[tuple[int, int]]:
    """Pairs whose posterior probability of exceeding F_max stays below the
    cutoff.  An empty result means the trial should stop."""
    out = []
    for k in range(grid.n_schedules):
        for j in range(grid.n_pads):
            f = _tox_cdf_draws(grid, k, j, sample.draws, family)
            if float(np.mean(f > grid.f_max)) < grid.p_cut:
                out.append((k, j))
    return out


def select_pair(
    sample: PosteriorSample,
    grid: ScheduleGrid,
    current: tuple[int, int] | None,
    tried: set,
    family="triangular",
):
    """The acceptable pair minimizing |E{F} - target| subject to the
    escalation constraint: an untried pair is eligible only if it exceeds the
    current pair by at most one step in each coordinate.  De-escalation and
    previously tried pairs are unconstrained.  Ties prefer the smaller total
    dose, then the lower PAD.  Returns (pair or None, acceptable list,
    mean-F matrix)."""
    mean_f = np.empty((grid.n_schedules, grid.n_pads))
    for k in range(grid.n_schedules):
        for j in range(grid.n_pads):
            mean_f[k, j] = float(np.mean(_tox_cdf_draws(grid, k, j, sample.draws, family)))
    acc = acceptable_pairs(sample, grid, family)
    if not acc:
        return None, acc, mean_f
    if current is None:
        start = grid.start_pair
        return (start if start in acc else None), acc, mean_f
    ck, cj = current
    eligible = [
        (k, j)
        for (k, j) in acc
        if (k, j) in tried or (k <= ck + 1 and j <= cj + 1)
    ]
    if not eligible:
        return None, acc, mean_f
    best = min(
        eligible,
        key=lambda kj: (
            abs(mean_f[kj[0], kj[1]] - grid.target),
            grid.total_dose(*kj),
            kj[1],
        ),
    )
    return best, acc, mean_f


def draw_tox_time(regime: Regime, theta, rng: np.random.Generator, family="triangular"):
    """Sample a toxicity time (patient time) under the regime's cumulative
    hazard by inversion; None when no toxicity ever occurs."""
    _, hcum, _ = _HAZARDS[family]
    lam_max = 0.0
    support_end = 0.0
    for s, j in zip(regime.times, regime.dose_idx):
        th = _theta_for(theta, j, family)
        if family == "triangular":
            lam_max += th[0]
            support_end = max(support_end, s + th[1] + th[2])
        else:
            lam_max += 1.0
            support_end = max(support_end, s + 50.0 / max(th[0], 0.1))
    target = -math.log(rng.random())
    if target >= lam_max:
        return None
    lo, hi = 0.0, support_end
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if regime_cum_hazard(mid, 0.0, regime, theta, family) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SchedModel:
    """Likelihood wrapper for a schedule grid and hazard family."""

    grid: ScheduleGrid
    family: str = "triangular"

    def __post_init__(self):
        if self.family not in _HAZARDS:
            raise ConfigurationError(f"unknown hazard family {self.family!r}")

    @property
    def param_names(self) -> tuple[str, ...]:
        J = self.grid.n_pads
        if self.family == "triangular":
            return tuple(
                f"{p}{j}" for j in range(J) for p in ("area", "rise", "fall")
            )
        return tuple(f"{p}{j}" for j in range(J) for p in ("shape", "logscale"))

    def loglik(self, theta, data) -> float:
        return sched_log_likelihood(data, theta, self.family)

    def compiled(self, data):
        from . import _kernels
        from .mcmc import CompiledModel

        n = len(data)
        max_adm = max((len(r.regime.times) for r in data), default=1)
        adm_t = np.full((n, max_adm), np.inf)
        adm_d = np.zeros((n, max_adm), dtype=np.int64)
        adm_n = np.zeros(n, dtype=np.int64)
        t_obs = np.zeros(n)
        event = np.zeros(n, dtype=np.int64)
        for i, r in enumerate(data):
            cnt = len(r.regime.times)
            adm_n[i] = cnt
            adm_t[i, :cnt] = r.regime.times
            adm_d[i, :cnt] = r.regime.dose_idx
            t_obs[i] = r.t_obs
            event[i] = 1 if r.event else 0
        fam = 0 if self.family == "triangular" else 1
        return CompiledModel(
            kernel=_kernels.loglik_sched,
            args=(t_obs, event, adm_t, adm_d, adm_n, fam),
            python_fn=self.loglik,
            python_data=data,
        )

    def default_prior(self, area_mean=0.3, rise_mean=10.0, fall_mean=10.0) -> PriorSpec:
        """Independent gammas with s.d. equal to the mean (shape 1), i.e.
        exponentials at the elicited means; one triple per PAD."""
        entries = []
        for j in range(self.grid.n_pads):
            if self.family == "triangular":
                for name, mean in (
                    (f"area{j}", area_mean),
                    (f"rise{j}", rise_mean),
                    (f"fall{j}", fall_mean),
                ):
                    entries.append(PriorEntry(name, "gamma", (1.0, 1.0 / mean)))
            else:
                entries.append(PriorEntry(f"shape{j}", "gamma", (1.0, 1.0)))
                entries.append(PriorEntry(f"logscale{j}", "normal", (0.0, 2.0)))
        return PriorSpec(tuple(entries))

"""Dose-finding on multiple ordinal toxicities via total toxicity burden.

A latent-Gaussian multivariate ordinal probit model (per-toxicity linear
terms, ordered cutoffs with the first fixed at zero, correlation matrix
constrained positive definite), elicited severity weights, the total
toxicity burden (TTB) score, its posterior expectation per dose, target
elicitation from hypothetical cohorts, and dose selection by monotone
search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .mcmc import PosteriorSample
from .priors import ConfigurationError, PriorEntry, PriorSpec

__all__ = [
    "ToxicityProfile",
    "TtbModel",
    "ttb",
    "expected_ttb",
    "elicit_target",
    "select_dose_ttb",
    "ElicitationError",
]

CUTOFF_UPPER = 10.0  # numerical-convenience bound on free cutoffs


class ElicitationError(ValueError):
    pass


@dataclass(frozen=True)
class ToxicityProfile:
    """Monitored toxicity types with ordered severity levels and weights.

    ``weights[j]`` must start at 0 and be strictly increasing: equal adjacent
    weights would mean the two levels are clinically indistinguishable and
    should be combined.
    """

    names: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    weights: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not (len(self.names) == len(self.levels) == len(self.weights)):
            raise ConfigurationError("profile fields must align per toxicity type")
        for name, labels, w in zip(self.names, self.levels, self.weights):
            if len(labels) != len(w) or len(w) < 2:
                raise ConfigurationError(f"{name}: need >= 2 levels with one weight each")
            if w[0] != 0.0:
                raise ConfigurationError(f"{name}: the baseline severity weight must be 0")
            if any(b <= a for a, b in zip(w, w[1:])):
                raise ConfigurationError(
                    f"{name}: severity weights must strictly increase; combine equal levels"
                )

    @property
    def n_types(self) -> int:
        return len(self.names)

    @property
    def n_levels(self) -> tuple[int, ...]:
        """m_j + 1 for each type."""
        return tuple(len(w) for w in self.weights)

    def to_dict(self) -> dict:
        return {
            "toxicities": [
                {
                    "name": n,
                    "levels": [
                        {"label": lab, "weight": w}
                        for lab, w in zip(labs, ws)
                    ],
                }
                for n, labs, ws in zip(self.names, self.levels, self.weights)
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToxicityProfile":
        names, levels, weights = [], [], []
        for t in d["toxicities"]:
            names.append(t["name"])
            levels.append(tuple(str(x["label"]) for x in t["levels"]))
            weights.append(tuple(float(x["weight"]) for x in t["levels"]))
        return cls(tuple(names), tuple(levels), tuple(weights))


def ttb(outcome, profile: ToxicityProfile) -> float:
    """Severity-weighted burden of one patient's outcome vector."""
    ks = tuple(int(k) for k in outcome)
    if len(ks) != profile.n_types:
        raise ConfigurationError("outcome length must match the profile")
    total = 0.0
    for j, k in enumerate(ks):
        if not 0 <= k < profile.n_levels[j]:
            raise ConfigurationError(f"severity index {k} out of range for type {j}")
        total += profile.weights[j][k]
    return total


@dataclass(frozen=True)
class TtbModel:
    """Latent-Gaussian ordinal probit model matched to a toxicity profile.

    Parameter vector layout: per-type intercept and slope pairs, then each
    type's free cutoffs (levels beyond the first two), then the upper
    triangle of the latent correlation matrix.
    """

    profile: ToxicityProfile
    qmc_points: int = 128
    qmc_shifts: int = 8
    qmc_seed: int = 77
    force_qmc: bool = False

    @property
    def n_types(self) -> int:
        return self.profile.n_types

    @property
    def param_names(self) -> tuple[str, ...]:
        names = []
        for j in range(self.n_types):
            names += [f"b{j}_0", f"b{j}_1"]
        for j, nl in enumerate(self.profile.n_levels):
            for k in range(2, nl):
                names.append(f"g{j}_{k}")
        for i in range(self.n_types):
            for j in range(i + 1, self.n_types):
                names.append(f"rho{i}_{j}")
        return tuple(names)

    def _slices(self):
        J = self.n_types
        n_beta = 2 * J
        n_cut = sum(max(0, nl - 2) for nl in self.profile.n_levels)
        return n_beta, n_cut

    def unpack(self, theta):
        """(beta (J,2), boundaries list of (m_j+2) arrays, omega (J,J));
        None when the cutoff ordering or positive definiteness fails."""
        theta = np.asarray(theta, dtype=float)
        J = self.n_types
        n_beta, n_cut = self._slices()
        beta = theta[:n_beta].reshape(J, 2)
        bounds = []
        pos = n_beta
        for j, nl in enumerate(self.profile.n_levels):
            m_j = nl - 1
            cuts = [0.0]
            for _ in range(m_j - 1):
                cuts.append(theta[pos])
                pos += 1
            cuts = np.asarray(cuts)
            if np.any(np.diff(cuts) <= 0.0):
                return None
            bounds.append(np.concatenate(([-np.inf], cuts, [np.inf])))
        omega = np.eye(J)
        for i in range(J):
            for j in range(i + 1, J):
                omega[i, j] = omega[j, i] = theta[pos]
                pos += 1
        try:
            np.linalg.cholesky(omega)
        except np.linalg.LinAlgError:
            return None
        return beta, bounds, omega

    # -- marginal distribution ----------------------------------------------

    def marginal_probs(self, x: float, draws: np.ndarray) -> list[np.ndarray]:
        """Per type j an (n_draws, m_j + 1) matrix of severity probabilities."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        J = self.n_types
        n_beta, _ = self._slices()
        out = []
        pos = n_beta
        for j, nl in enumerate(self.profile.n_levels):
            eta = draws[:, 2 * j] + draws[:, 2 * j + 1] * x
            m_j = nl - 1
            cdf = np.empty((draws.shape[0], nl + 1))
            cdf[:, 0] = 0.0
            cdf[:, -1] = 1.0
            cdf[:, 1] = special.ndtr(0.0 - eta)
            for k in range(2, nl):
                cdf[:, k] = special.ndtr(draws[:, pos + k - 2] - eta)
            pos += max(0, m_j - 1)
            out.append(np.diff(cdf, axis=1))
        return out

    def marginal_severity_prob(self, x: float, j: int, k: int, theta) -> float:
        """Pr(Y_j at severity level k | x, theta)."""
        probs = self.marginal_probs(x, np.asarray(theta, dtype=float).reshape(1, -1))
        return float(probs[j][0, k])

    def exceedance_prob(self, x: float, j: int, k: int, theta) -> float:
        """Pr(Y_j above severity level k | x, theta); nondecreasing in x when
        the slope is positive."""
        probs = self.marginal_probs(x, np.asarray(theta, dtype=float).reshape(1, -1))
        return float(probs[j][0, k + 1 :].sum())

    # -- joint likelihood ----------------------------------------------------

    def _box_prob(self, a, b, omega) -> float:
        from . import _kernels

        J = a.size
        if J == 1:
            lo = special.ndtr(a[0]) if a[0] > -np.inf else 0.0
            hi = special.ndtr(b[0]) if b[0] < np.inf else 1.0
            return max(0.0, hi - lo)
        if J == 2 and not self.force_qmc:
            return _kernels.bvn_box(a[0], b[0], a[1], b[1], float(omega[0, 1]))
        L, ok = _kernels._chol_flag(omega)
        if not ok:
            return 0.0
        rng = np.random.Generator(np.random.PCG64(self.qmc_seed))
        shifts = rng.random((self.qmc_shifts, J - 1))
        npts = self.qmc_points
        est = _kernels.mvn_box_qmc(a, b, L, shifts, npts)
        # double the lattice until the shift-batch spread meets 1e-3 relative
        for _ in range(5):
            per_shift = np.array(
                [
                    _kernels.mvn_box_qmc(a, b, L, shifts[s : s + 1], npts)
                    for s in range(self.qmc_shifts)
                ]
            )
            est = float(per_shift.mean())
            if est <= 0.0:
                return 0.0
            err = per_shift.std(ddof=1) / math.sqrt(self.qmc_shifts)
            if err / est <= 1e-3:
                break
            npts *= 2
        return est

    def ordinal_log_likelihood(self, outcome, x: float, theta) -> float:
        """Log probability of one outcome vector: the latent-Gaussian box
        probability over the cutoff cell.  Returns -inf for parameter vectors
        violating the cutoff ordering or positive definiteness (the sampler
        treats that as rejection)."""
        unpacked = self.unpack(theta)
        if unpacked is None:
            return -math.inf
        beta, bounds, omega = unpacked
        ks = tuple(int(k) for k in outcome)
        a = np.empty(self.n_types)
        b = np.empty(self.n_types)
        for j, k in enumerate(ks):
            eta = beta[j, 0] + beta[j, 1] * x
            a[j] = bounds[j][k] - eta
            b[j] = bounds[j][k + 1] - eta
        p = self._box_prob(a, b, omega)
        if p <= 0.0:
            return -math.inf
        return math.log(p)

    def loglik(self, theta, data) -> float:
        total = 0.0
        for x, outcome in data:
            lp = self.ordinal_log_likelihood(outcome, x, theta)
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def compiled(self, data):
        from . import _kernels
        from .mcmc import CompiledModel

        xs = np.array([x for x, _ in data], dtype=float)
        J = self.n_types
        ks = np.array([[int(k) for k in outcome] for _, outcome in data], dtype=np.int64)
        if ks.size == 0:
            ks = np.zeros((0, J), dtype=np.int64)
        m_levels = np.array(self.profile.n_levels, dtype=np.int64)
        rng = np.random.Generator(np.random.PCG64(self.qmc_seed))
        shifts = rng.random((self.qmc_shifts, max(1, J - 1)))
        args = (
            xs,
            ks,
            m_levels,
            shifts,
            self.qmc_points,
            1 if self.force_qmc else 0,
        )
        return CompiledModel(
            kernel=_kernels.loglik_ttb,
            args=args,
            python_fn=self.loglik,
            python_data=data,
        )

    def default_prior(self, intercept_sd=2.0, slope_sd=2.0) -> PriorSpec:
        """Normal intercepts, positive slopes, flat cutoffs on (0, 10), and
        near-flat correlations truncated to [-1, 1]."""
        entries = []
        for j in range(self.n_types):
            entries.append(PriorEntry(f"b{j}_0", "normal", (0.0, intercept_sd)))
            entries.append(
                PriorEntry(
                    f"b{j}_1", "truncated-normal", (0.0, slope_sd), lower=0.0, upper=math.inf
                )
            )
        for j, nl in enumerate(self.profile.n_levels):
            for k in range(2, nl):
                entries.append(PriorEntry(f"g{j}_{k}", "uniform", (0.0, CUTOFF_UPPER)))
        for i in range(self.n_types):
            for j in range(i + 1, self.n_types):
                entries.append(
                    PriorEntry(
                        f"rho{i}_{j}",
                        "truncated-normal",
                        (0.0, math.sqrt(1000.0)),
                        lower=-1.0,
                        upper=1.0,
                    )
                )
        return PriorSpec(tuple(entries))


def expected_ttb(model: TtbModel, x: float, sample: PosteriorSample) -> float:
    """Posterior expected total toxicity burden at dose x: the severity
    weights dotted with posterior-mean severity probabilities."""
    probs = model.marginal_probs(x, sample.draws)
    total = 0.0
    for j, w in enumerate(model.profile.weights):
        total += float(np.dot(np.asarray(w), probs[j].mean(axis=0)))
    return total


def elicit_target(cohorts, profile: ToxicityProfile) -> float:
    """Elicited target burden: the mean, over hypothetical cohorts whose
    stated decision is to repeat the current dose, of the within-cohort mean
    patient TTB."""
    stay_means = []
    for outcomes, decision in cohorts:
        if decision not in ("escalate", "stay", "de-escalate"):
            raise ElicitationError(f"unknown decision {decision!r}")
        if decision == "stay":
            vals = [ttb(o, profile) for o in outcomes]
            if not vals:
                raise ElicitationError("a stay cohort has no patients")
            stay_means.append(float(np.mean(vals)))
    if not stay_means:
        raise ElicitationError("at least one cohort with decision 'stay' is required")
    return float(np.mean(stay_means))


def select_dose_ttb(
    model: TtbModel,
    sample: PosteriorSample,
    doses,
    ttb_target: float,
    max_tried_index: int | None,
) -> tuple[int, np.ndarray]:
    """Dose minimizing |tau(x) - target| by monotone search over the
    ascending dose grid, clamped to one step above the highest tried dose.
    Ties prefer the lower dose.  Returns (index, tau values)."""
    taus = np.array([expected_ttb(model, x, sample) for x in doses])
    cap = len(doses) - 1 if max_tried_index is None else min(len(doses) - 1, max_tried_index + 1)
    # tau is increasing: scan until it crosses the target, compare neighbors
    best = 0
    for i in range(cap + 1):
        if taus[i] >= ttb_target:
            if i == 0:
                best = 0
            else:
                below = abs(taus[i - 1] - ttb_target)
                above = abs(taus[i] - ttb_target)
                best = i - 1 if below <= above else i
            break
    else:
        best = cap
    return best, taus


def stop_signal(
    model: TtbModel,
    sample: PosteriorSample,
    lowest_dose: float,
    ttb_target: float,
    kappa: float,
    cutoff: float,
) -> bool:
    """Optional early-stop rule (disabled by default in the design): stop
    when Pr{tau(lowest) > kappa * target | D} exceeds the cutoff."""
    probs = model.marginal_probs(lowest_dose, sample.draws)
    per_draw = np.zeros(sample.draws.shape[0])
    for j, w in enumerate(model.profile.weights):
        per_draw += probs[j] @ np.asarray(w)
    return float(np.mean(per_draw > kappa * ttb_target)) > cutoff

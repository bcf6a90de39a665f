"""Covariate-individualized efficacy-toxicity dose-finding.

Extends the trade-off design with patient covariates and historical data:
joint linear terms over historical treatments and trial doses, posterior
fitting of covariate effects from the historical records, acceptability
bounding functions regressed on elicited per-patient limits, and per-patient
acceptable sets and dose selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .efftox import (
    ElicitationError,
    TradeoffContour,
    _cell_index,
    _inv_link,
    desirability,
    gumbel_cells,
)
from .mcmc import McmcConfig, PosteriorSample, sample_posterior
from .priors import ConfigurationError, PriorEntry, PriorSpec

__all__ = [
    "HistoricalDataset",
    "CovEfftoxModel",
    "BoundingFunctions",
    "fit_historical",
    "fit_bounding_function",
    "acceptable_set_for_patient",
    "select_dose_for_patient",
]

BOUND_CLAMP = (0.001, 0.999)


@dataclass(frozen=True)
class HistoricalDataset:
    """Records (treatment index, covariates, bivariate outcome) for the m
    historical treatments; treatment indices are 0-based."""

    records: tuple[tuple[int, tuple[float, ...], tuple[int, int]], ...]
    n_treatments: int

    def __post_init__(self):
        if self.n_treatments < 1 or not self.records:
            raise ConfigurationError("historical data requires >= 1 treatment and records")
        q = len(self.records[0][1])
        seen = set()
        for t, z, y in self.records:
            if not 0 <= t < self.n_treatments:
                raise ConfigurationError(f"historical treatment index {t} out of range")
            if len(z) != q:
                raise ConfigurationError("covariate dimension varies across records")
            if tuple(int(v) for v in y) not in ((0, 0), (0, 1), (1, 0), (1, 1)):
                raise ConfigurationError(f"outcome {y} is not bivariate binary")
            seen.add(t)
        if seen != set(range(self.n_treatments)):
            raise ConfigurationError("every historical treatment needs at least one record")

    @property
    def n_covariates(self) -> int:
        return len(self.records[0][1])

    def covariate_matrix(self) -> np.ndarray:
        return np.array([list(z) for _, z, _ in self.records], dtype=float)

    def standardization(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-covariate mean and s.d. over the historical records."""
        zs = self.covariate_matrix()
        mean = zs.mean(axis=0)
        sd = zs.std(axis=0)
        sd[sd == 0.0] = 1.0
        return mean, sd


@dataclass(frozen=True)
class CovEfftoxModel:
    """Bivariate-binary outcome model with covariate and historical terms.

    ``mode`` 'joint' carries trial dose effects, covariate mains,
    dose-covariate interactions, historical treatment effects and their
    covariate interactions, plus the Gumbel association; 'historical' drops
    the dose-effect block (those parameters get vague priors for the trial).
    The trial dose-effect function is centered so it vanishes at dose zero.
    Covariates are standardized with the historical mean and s.d.
    """

    n_covariates: int
    n_historical: int
    z_mean: tuple[float, ...]
    z_sd: tuple[float, ...]
    link: str = "probit"
    quadratic_efficacy: bool = True
    quadratic_toxicity: bool = False
    mode: str = "joint"

    def __post_init__(self):
        if self.mode not in ("joint", "historical"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if len(self.z_mean) != self.n_covariates or len(self.z_sd) != self.n_covariates:
            raise ConfigurationError("standardization vectors must match q")

    @classmethod
    def for_historical(cls, hist: HistoricalDataset, **kw) -> "CovEfftoxModel":
        mean, sd = hist.standardization()
        return cls(
            n_covariates=hist.n_covariates,
            n_historical=hist.n_treatments,
            z_mean=tuple(mean),
            z_sd=tuple(sd),
            mode="historical",
            **kw,
        )

    def joint(self) -> "CovEfftoxModel":
        return CovEfftoxModel(
            n_covariates=self.n_covariates,
            n_historical=self.n_historical,
            z_mean=self.z_mean,
            z_sd=self.z_sd,
            link=self.link,
            quadratic_efficacy=self.quadratic_efficacy,
            quadratic_toxicity=self.quadratic_toxicity,
            mode="joint",
        )

    # -- parameter layout ----------------------------------------------------

    @property
    def _n_dose(self) -> tuple[int, int]:
        return (2 if self.quadratic_efficacy else 1, 2 if self.quadratic_toxicity else 1)

    @property
    def param_names(self) -> tuple[str, ...]:
        q, m = self.n_covariates, self.n_historical
        names: list[str] = []
        if self.mode == "joint":
            ne, nt = self._n_dose
            names += [f"aE{i+1}" for i in range(ne)]
            names += [f"aT{i+1}" for i in range(nt)]
        names += [f"bE{i+1}" for i in range(q)]
        names += [f"bT{i+1}" for i in range(q)]
        if self.mode == "joint":
            names += [f"cE{i+1}" for i in range(q)]
            names += [f"cT{i+1}" for i in range(q)]
        names += [f"mE{j+1}" for j in range(m)]
        names += [f"mT{j+1}" for j in range(m)]
        names += [f"xiE{j+1}_{i+1}" for j in range(m) for i in range(q)]
        names += [f"xiT{j+1}_{i+1}" for j in range(m) for i in range(q)]
        names.append("psi")
        return tuple(names)

    def _offsets(self) -> dict[str, slice]:
        q, m = self.n_covariates, self.n_historical
        pos = 0
        out = {}

        def take(key, n):
            nonlocal pos
            out[key] = slice(pos, pos + n)
            pos += n

        if self.mode == "joint":
            ne, nt = self._n_dose
            take("aE", ne)
            take("aT", nt)
        take("bE", q)
        take("bT", q)
        if self.mode == "joint":
            take("cE", q)
            take("cT", q)
        take("mE", m)
        take("mT", m)
        take("xiE", m * q)
        take("xiT", m * q)
        take("psi", 1)
        return out

    def standardize(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (z - np.asarray(self.z_mean)) / np.asarray(self.z_sd)

    # -- linear terms ----------------------------------------------------------

    def omega(self, x: float, alpha: np.ndarray) -> np.ndarray:
        """Centered dose-effect function: zero at dose zero by construction."""
        v = alpha[..., 0] * x
        if alpha.shape[-1] > 1:
            v = v + alpha[..., 1] * x * x
        return v

    def linear_term(self, tau, z, draws: np.ndarray, outcome: str) -> np.ndarray:
        """Linear term per draw.  ``tau`` is ('hist', j) for a historical
        treatment or ('dose', x) for a trial dose; ``z`` is the raw covariate
        vector."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        off = self._offsets()
        q = self.n_covariates
        zs = self.standardize(z)
        kind, val = tau
        b = draws[:, off["bE" if outcome == "E" else "bT"]]
        eta = b @ zs if q else np.zeros(draws.shape[0])
        if kind == "hist":
            j = int(val)
            if not 0 <= j < self.n_historical:
                raise ConfigurationError(f"historical index {j} out of range")
            mu = draws[:, off["mE" if outcome == "E" else "mT"]][:, j]
            xi = draws[:, off["xiE" if outcome == "E" else "xiT"]][
                :, j * q : (j + 1) * q
            ]
            eta = eta + mu + (xi @ zs if q else 0.0)
            return eta
        if self.mode != "joint":
            raise ConfigurationError("trial doses need the joint model")
        x = float(val)
        alpha = draws[:, off["aE" if outcome == "E" else "aT"]]
        gamma = draws[:, off["cE" if outcome == "E" else "cT"]]
        eta = eta + self.omega(x, alpha) + x * (gamma @ zs if q else 0.0)
        return eta

    def marginals(self, tau, z, draws: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pe = _inv_link(self.linear_term(tau, z, draws, "E"), self.link)
        pt = _inv_link(self.linear_term(tau, z, draws, "T"), self.link)
        return pe, pt

    # -- likelihood -------------------------------------------------------------

    def loglik(self, theta, data) -> float:
        """``data`` is a sequence of (tau, z, (y_e, y_t)) with tau as in
        :meth:`linear_term`."""
        theta = np.asarray(theta, dtype=float).reshape(1, -1)
        psi = float(theta[0, -1])
        total = 0.0
        for tau, z, (y_e, y_t) in data:
            pe, pt = self.marginals(tau, z, theta)
            cells = gumbel_cells(float(pe[0]), float(pt[0]), psi)
            p = cells[_cell_index(y_e, y_t)]
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
        return total

    def compiled(self, data):
        from . import _kernels
        from .mcmc import CompiledModel

        n = len(data)
        q = self.n_covariates
        is_hist = np.zeros(n, dtype=np.int64)
        tau_idx = np.zeros(n, dtype=np.int64)
        xs = np.zeros(n)
        zs = np.zeros((n, q))
        ye = np.zeros(n, dtype=np.int64)
        yt = np.zeros(n, dtype=np.int64)
        for i, (tau, z, y) in enumerate(data):
            kind, val = tau
            if kind == "hist":
                is_hist[i] = 1
                tau_idx[i] = int(val)
            else:
                xs[i] = float(val)
            zs[i] = self.standardize(z)
            ye[i] = int(y[0])
            yt[i] = int(y[1])
        ne, nt = self._n_dose
        args = (
            is_hist,
            tau_idx,
            xs,
            zs,
            ye,
            yt,
            1 if self.link == "probit" else 0,
            ne if self.mode == "joint" else 0,
            nt if self.mode == "joint" else 0,
            self.n_historical,
        )
        return CompiledModel(
            kernel=_kernels.loglik_cov_efftox,
            args=args,
            python_fn=self.loglik,
            python_data=data,
        )

    def default_prior(
        self,
        dose_sd=3.0,
        covariate_sd=2.0,
        historical_sd=3.0,
        interaction_sd=0.5,
        psi_sd=1.0,
    ) -> PriorSpec:
        """Vague normals; dose-effect parameters get the widest spread (they
        are the trial's business).  Treatment-covariate interactions are kept
        tight so the shared covariate mains absorb common structure (the two
        blocks are only jointly identified)."""
        entries = []
        for name in self.param_names:
            if name.startswith(("aE", "aT")):
                sd = dose_sd
            elif name.startswith(("bE", "bT", "cE", "cT")):
                sd = covariate_sd
            elif name.startswith("xi"):
                sd = interaction_sd
            elif name == "psi":
                sd = psi_sd
            else:
                sd = historical_sd
            entries.append(PriorEntry(name, "normal", (0.0, sd)))
        return PriorSpec(tuple(entries))

    def beta_slice(self, outcome: str) -> slice:
        return self._offsets()["bE" if outcome == "E" else "bT"]


def fit_historical(
    hist: HistoricalDataset,
    prior: PriorSpec | None = None,
    config: McmcConfig | None = None,
    **model_kw,
) -> tuple[PosteriorSample, CovEfftoxModel]:
    """Posterior over the historical-model parameters (covariate mains,
    treatment effects, treatment-covariate interactions, association); the
    trial dose-effect parameters are excluded and keep their vague priors."""
    model = CovEfftoxModel.for_historical(hist, **model_kw)
    data = [(("hist", t), z, y) for t, z, y in hist.records]
    if prior is None:
        prior = model.default_prior()
    if tuple(prior.names) != model.param_names:
        raise ConfigurationError("prior names must match the historical model")
    if config is None:
        config = McmcConfig(seed=2008, iterations=4000, burnin=1500)
    sample = sample_posterior(model.compiled(data), None, prior, config)
    return sample, model


@dataclass(frozen=True)
class BoundingFunctions:
    """Acceptability bounding functions built from elicited per-patient
    limits regressed on the historical posterior-mean covariate effect.

    For each outcome the stored pieces are the zeta weights (posterior mean
    of the covariate main effects), the regression pairs, and the fitted
    curve; evaluation clamps into [0.001, 0.999].
    """

    eff_zeta: tuple[float, ...]
    tox_zeta: tuple[float, ...]
    eff_pairs: tuple[tuple[float, float], ...]
    tox_pairs: tuple[tuple[float, float], ...]
    eff_coef: tuple[float, ...]
    tox_coef: tuple[float, ...]
    eff_family: str
    tox_family: str

    def _eval(self, coef, zeta_val: float) -> float:
        v = coef[0] + coef[1] * zeta_val
        if len(coef) == 3:
            v += coef[2] * zeta_val * zeta_val
        return min(max(v, BOUND_CLAMP[0]), BOUND_CLAMP[1])

    def zeta(self, model: CovEfftoxModel, z, outcome: str) -> float:
        w = np.asarray(self.eff_zeta if outcome == "E" else self.tox_zeta)
        return float(w @ model.standardize(z))

    def eff_floor(self, model: CovEfftoxModel, z) -> float:
        return self._eval(self.eff_coef, self.zeta(model, z, "E"))

    def tox_ceiling(self, model: CovEfftoxModel, z) -> float:
        return self._eval(self.tox_coef, self.zeta(model, z, "T"))


def _fit_curve(zetas, bounds, quad_threshold=4):
    zetas = np.asarray(zetas, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    for i in range(len(zetas)):
        for j in range(i + 1, len(zetas)):
            if zetas[i] == zetas[j] and bounds[i] != bounds[j]:
                raise ElicitationError(
                    f"identical predictors {zetas[i]} with different elicited bounds"
                )
    if len(zetas) >= quad_threshold:
        v = np.column_stack([np.ones_like(zetas), zetas, zetas**2])
        coef, *_ = np.linalg.lstsq(v, bounds, rcond=None)
        return tuple(float(c) for c in coef), "quadratic"
    v = np.column_stack([np.ones_like(zetas), zetas])
    coef, *_ = np.linalg.lstsq(v, bounds, rcond=None)
    return tuple(float(c) for c in coef), "linear"


def fit_bounding_function(
    representative_z,
    elicited_eff_floors,
    elicited_tox_ceilings,
    hist_sample: PosteriorSample,
    hist_model: CovEfftoxModel,
) -> tuple[BoundingFunctions, dict]:
    """Regress elicited limits on the historical posterior-mean covariate
    effect at each representative patient.  Linear fit below four points,
    quadratic from four on.  Also returns the scattergram data (predictor,
    elicited value, fitted value) used to review the curves."""
    K = len(representative_z)
    if K < 2:
        raise ElicitationError("need at least two representative covariate vectors")
    if len(elicited_eff_floors) != K or len(elicited_tox_ceilings) != K:
        raise ElicitationError("one elicited limit pair per representative patient")
    for v in list(elicited_eff_floors) + list(elicited_tox_ceilings):
        if not 0.0 < v < 1.0:
            raise ElicitationError("elicited limits must lie in (0, 1)")
    be = hist_sample.draws[:, hist_model.beta_slice("E")].mean(axis=0)
    bt = hist_sample.draws[:, hist_model.beta_slice("T")].mean(axis=0)
    ze = [float(be @ hist_model.standardize(z)) for z in representative_z]
    zt = [float(bt @ hist_model.standardize(z)) for z in representative_z]
    eff_coef, eff_family = _fit_curve(ze, elicited_eff_floors)
    tox_coef, tox_family = _fit_curve(zt, elicited_tox_ceilings)
    bf = BoundingFunctions(
        eff_zeta=tuple(float(v) for v in be),
        tox_zeta=tuple(float(v) for v in bt),
        eff_pairs=tuple(zip(ze, map(float, elicited_eff_floors))),
        tox_pairs=tuple(zip(zt, map(float, elicited_tox_ceilings))),
        eff_coef=eff_coef,
        tox_coef=tox_coef,
        eff_family=eff_family,
        tox_family=tox_family,
    )
    scatter = {
        "E": [
            {"zeta": z, "elicited": b, "fitted": bf._eval(eff_coef, z)}
            for z, b in bf.eff_pairs
        ],
        "T": [
            {"zeta": z, "elicited": b, "fitted": bf._eval(tox_coef, z)}
            for z, b in bf.tox_pairs
        ],
    }
    return bf, scatter


def acceptable_set_for_patient(
    z,
    model: CovEfftoxModel,
    sample: PosteriorSample,
    doses,
    bounds: BoundingFunctions,
    p_eff: float,
    p_tox: float,
) -> list[int]:
    """Doses acceptable for this patient: the posterior probability of
    falling below the patient's efficacy floor (or above the toxicity
    ceiling) must stay strictly below the cutoff."""
    floor = bounds.eff_floor(model, z)
    ceiling = bounds.tox_ceiling(model, z)
    out = []
    for i, x in enumerate(doses):
        pe, pt = model.marginals(("dose", x), z, sample.draws)
        if float(np.mean(pe < floor)) < p_eff and float(np.mean(pt > ceiling)) < p_tox:
            out.append(i)
    return out


def select_dose_for_patient(
    z,
    model: CovEfftoxModel,
    sample: PosteriorSample,
    acceptable: list[int],
    doses,
    contour: TradeoffContour,
) -> int | None:
    """Argmax of the trade-off desirability at the patient-specific
    posterior-mean outcome pair; None means the patient is treated off
    protocol.  Ties prefer the lower dose."""
    if not acceptable:
        return None
    best = None
    best_delta = -math.inf
    for i in acceptable:
        pe, pt = model.marginals(("dose", doses[i]), z, sample.draws)
        d = desirability((float(pe.mean()), float(pt.mean())), contour)
        if d > best_delta:
            best, best_delta = i, d
    return best

"""Design specifications and the shared recommendation engine.

Each design bundles its treatment set, outcome model, prior, decision
parameters and chain settings.  ``recommend`` maps an event log to the next
action (treat / stop / off-protocol) together with the posterior quantities
that justified it; the trial simulator, the CLI conduct command and the HTTP
service all call the same function, so a replayed log reproduces the
simulator's decisions exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import combo as cb
from . import covariates as cov
from . import efftox as et
from . import schedule as sc
from . import ttb as tb
from .events import TrialState
from .mcmc import McmcConfig, PosteriorSample, sample_posterior
from .priors import ConfigurationError, PriorSpec

__all__ = [
    "McmcSettings",
    "Recommendation",
    "ComboDesign",
    "EfftoxDesign",
    "CovariateEfftoxDesign",
    "TtbDesign",
    "ScheduleDesign",
    "recommend",
    "posterior_summary",
    "final_selection",
    "treatment_label",
    "outcome_completions",
    "decision_config",
]


@dataclass(frozen=True)
class McmcSettings:
    iterations: int = 8000
    burnin: int = 2000
    thin: int = 1


def decision_config(settings: McmcSettings, engine_seed: int, n_outcomes: int) -> McmcConfig:
    """Chain configuration for one decision point.  The seed is a pure
    function of (engine seed, number of observed outcomes) so any component
    replaying the same log computes the identical posterior."""
    ss = np.random.SeedSequence((int(engine_seed), int(n_outcomes)))
    return McmcConfig(
        seed=ss,
        iterations=settings.iterations,
        burnin=settings.burnin,
        thin=settings.thin,
    )


@dataclass(frozen=True)
class Recommendation:
    """Next-treatment decision with its posterior evidence."""

    action: str  # 'treat' | 'stop' | 'off-protocol'
    treatment: dict | None = None
    reason: str | None = None
    posterior: dict = field(default_factory=dict)
    n_outcomes: int = 0

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "treatment": self.treatment,
            "reason": self.reason,
            "posterior": self.posterior,
            "n_outcomes": self.n_outcomes,
        }


# ---------------------------------------------------------------------------
# Design specifications.


@dataclass(frozen=True)
class ComboDesign:
    kind = "combo"
    line: cb.DiagonalLine
    target: float
    prior: PriorSpec
    stage1_n: int = 20
    n_max: int = 60
    cohort_size: int = 2
    stop_cutoff: float = 0.80
    contour_grid: int = 101
    contour_tol: float = 1e-4
    fisher_draws: int = 200
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    def __post_init__(self):
        if not 0 < self.target < 1:
            raise ConfigurationError("target must lie in (0, 1)")
        if not 0 < self.stage1_n <= self.n_max:
            raise ConfigurationError("stage-1 size must lie in (0, n_max]")
        if tuple(self.prior.names) != cb.PARAM_NAMES:
            raise ConfigurationError("combo prior must cover the six surface parameters")

    @property
    def treatments(self):
        return list(self.line.doses)


@dataclass(frozen=True)
class EfftoxDesign:
    kind = "efftox"
    model: et.EfftoxModel
    doses: tuple[float, ...]  # standardized, ascending
    limits: et.AcceptabilityLimits
    contour: et.TradeoffContour
    prior: PriorSpec
    n_max: int = 36
    cohort_size: int = 3
    start_index: int = 0
    raw_doses: tuple[float, ...] | None = None
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.doses, self.doses[1:])):
            raise ConfigurationError("doses must strictly increase")
        if not 0 <= self.start_index < len(self.doses):
            raise ConfigurationError("start index out of range")
        if tuple(self.prior.names) != self.model.param_names:
            raise ConfigurationError("prior names must match the outcome model")


@dataclass(frozen=True)
class CovariateEfftoxDesign:
    kind = "covariate-efftox"
    model: cov.CovEfftoxModel  # joint mode
    historical: cov.HistoricalDataset
    bounds: cov.BoundingFunctions
    representative_z: tuple[tuple[float, ...], ...]
    doses: tuple[float, ...]
    contour: et.TradeoffContour
    prior: PriorSpec
    p_eff: float = 0.9
    p_tox: float = 0.9
    n_max: int = 36
    cohort_size: int = 1
    start_index: int = 0
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    def __post_init__(self):
        if self.model.mode != "joint":
            raise ConfigurationError("the design needs the joint (trial) model")
        if tuple(self.prior.names) != self.model.param_names:
            raise ConfigurationError("prior names must match the joint model")


@dataclass(frozen=True)
class TtbDesign:
    kind = "ttb"
    model: tb.TtbModel
    doses: tuple[float, ...]
    ttb_target: float
    prior: PriorSpec
    n_max: int = 36
    cohort_size: int = 3
    start_index: int = 0
    stop_enabled: bool = False
    stop_kappa: float = 1.5
    stop_cutoff: float = 0.80
    raw_doses: tuple[float, ...] | None = None
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.doses, self.doses[1:])):
            raise ConfigurationError("doses must strictly increase")
        if tuple(self.prior.names) != self.model.param_names:
            raise ConfigurationError("prior names must match the ordinal model")


@dataclass(frozen=True)
class ScheduleDesign:
    kind = "schedule"
    model: sc.SchedModel
    prior: PriorSpec
    n_max: int = 36
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    cohort_size = 1  # the posterior changes continuously; choose per patient

    def __post_init__(self):
        if tuple(self.prior.names) != self.model.param_names:
            raise ConfigurationError("prior names must match the hazard model")

    @property
    def grid(self) -> sc.ScheduleGrid:
        return self.model.grid


Design = ComboDesign | EfftoxDesign | CovariateEfftoxDesign | TtbDesign | ScheduleDesign


# ---------------------------------------------------------------------------
# Treatment payloads and labels.


def treatment_label(design, treatment: dict) -> str:
    if design.kind == "schedule":
        k, j = treatment["pair"]
        return f"s{k}d{j}"
    if design.kind == "combo":
        idx = treatment.get("line_index")
        if idx is not None:
            return f"dose{idx}"
        x1, x2 = treatment["pair"]
        return f"pair({x1:.4f},{x2:.4f})"
    return f"dose{treatment['dose_index']}"


def outcome_completions(design) -> list[dict] | None:
    """All possible outcome payloads for one pending patient, or None when
    outcomes are time-to-event (look-ahead does not apply)."""
    if design.kind == "combo":
        return [{"tox": 0}, {"tox": 1}]
    if design.kind == "efftox" and design.model.kind != "bivariate":
        return [{"y": y} for y in ("N", "E", "T")]
    if design.kind in ("efftox", "covariate-efftox"):
        return [{"eff": a, "tox": b} for a in (0, 1) for b in (0, 1)]
    if design.kind == "ttb":
        ranges = [range(nl) for nl in design.model.profile.n_levels]
        return [{"levels": list(ks)} for ks in product(*ranges)]
    return None


# ---------------------------------------------------------------------------
# Dataset builders (event log -> model data).

TRINARY_CODE = {"N": et.OUT_N, "E": et.OUT_E, "T": et.OUT_T}


def build_dataset(design, state: TrialState, study_time: float | None = None):
    if design.kind == "combo":
        out = []
        for p in state.evaluated_patients():
            pair = tuple(state.assignment(p).data["treatment"]["pair"])
            out.append((pair, int(state.outcome(p).data["tox"])))
        return out
    if design.kind == "efftox":
        out = []
        for p in state.evaluated_patients():
            x = design.doses[state.assignment(p).data["treatment"]["dose_index"]]
            od = state.outcome(p).data
            if design.model.kind == "bivariate":
                out.append((x, (int(od["eff"]), int(od["tox"]))))
            else:
                out.append((x, TRINARY_CODE[od["y"]]))
        return out
    if design.kind == "covariate-efftox":
        out = [(("hist", t), z, y) for t, z, y in design.historical.records]
        for p in state.evaluated_patients():
            x = design.doses[state.assignment(p).data["treatment"]["dose_index"]]
            z = tuple(state.enrollment(p).data["z"])
            od = state.outcome(p).data
            out.append((("dose", x), z, (int(od["eff"]), int(od["tox"]))))
        return out
    if design.kind == "ttb":
        out = []
        for p in state.evaluated_patients():
            x = design.doses[state.assignment(p).data["treatment"]["dose_index"]]
            out.append((x, tuple(state.outcome(p).data["levels"])))
        return out
    # schedule: censor ongoing patients at the current study time
    records = []
    for p in state.treated_patients():
        e = state.enrollment(p).time
        k, j = state.assignment(p).data["treatment"]["pair"]
        planned = design.grid.planned_regime(k, j)
        oc = state.outcome(p)
        if oc is not None:
            t_obs = float(oc.data["time"])
            event = bool(oc.data["tox"])
        elif study_time is not None:
            t_obs = study_time - e
            event = False
            if t_obs <= 0:
                continue
        else:
            continue
        records.append(
            sc.TimeToToxRecord(
                entry_time=e,
                regime=planned.truncate_at(t_obs),
                t_obs=t_obs,
                event=event,
            )
        )
    return records


def fit_posterior(design, state: TrialState, engine_seed: int, study_time=None) -> PosteriorSample:
    data = build_dataset(design, state, study_time)
    settings = decision_config(design.mcmc, engine_seed, state.n_outcomes)
    if design.kind == "combo":
        model = cb.ComboModel().compiled(data)
    elif design.kind == "efftox":
        model = design.model.compiled(data)
    elif design.kind == "covariate-efftox":
        model = design.model.compiled(data)
    elif design.kind == "ttb":
        model = design.model.compiled(data)
    else:
        model = design.model.compiled(data)
    return sample_posterior(model, None, design.prior, settings)


# ---------------------------------------------------------------------------
# Per-design decision logic.


def _max_tried_index(state: TrialState) -> int | None:
    tried = [
        state.assignment(p).data["treatment"].get("dose_index")
        for p in state.treated_patients()
    ]
    tried = [i for i in tried if i is not None]
    return max(tried) if tried else None


def _combo_line_state(design: ComboDesign, state: TrialState):
    """(current line index, any toxicity seen, assigned pair history)."""
    current = 0
    history = []
    for p in state.treated_patients():
        tr = state.assignment(p).data["treatment"]
        history.append(tuple(tr["pair"]))
        if tr.get("line_index") is not None:
            current = tr["line_index"]
    any_tox = any(
        int(state.outcome(p).data["tox"]) == 1 for p in state.evaluated_patients()
    )
    return current, any_tox, history


def _recommend_combo(design: ComboDesign, state, engine_seed):
    n_treated = state.n_assigned
    if n_treated == 0:
        return Recommendation(
            "treat",
            {"pair": list(design.line.doses[0]), "line_index": 0, "stage": 1},
            posterior={},
            n_outcomes=0,
        )
    sample = fit_posterior(design, state, engine_seed)
    current, any_tox, history = _combo_line_state(design, state)
    lowest = design.line.doses[0]
    p_lowest = cb.combo_tox_prob(lowest, sample.draws)
    pr_too_toxic = float(np.mean(p_lowest > design.target))
    summary = _combo_summary(design, sample)
    summary["pr_lowest_too_toxic"] = pr_too_toxic
    if pr_too_toxic > design.stop_cutoff:
        return Recommendation(
            "stop", reason="lowest-dose-too-toxic", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    if n_treated < design.stage1_n:
        idx = cb.stage1_select(sample, design.line, design.target, current, any_tox)
        return Recommendation(
            "treat",
            {"pair": list(design.line.doses[idx]), "line_index": idx, "stage": 1},
            posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    contour = cb.estimate_contour(
        sample, design.target, design.contour_grid, design.contour_tol
    )
    summary["contour"] = [list(v) for v in contour.vertices]
    if not contour:
        idx = cb.stage1_select(sample, design.line, design.target, current, any_tox)
        return Recommendation(
            "treat",
            {"pair": list(design.line.doses[idx]), "line_index": idx, "stage": 1},
            reason="target-contour-unreachable",
            posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    n_stage2_cohorts = max(0, (n_treated - design.stage1_n) // design.cohort_size)
    side = "left" if n_stage2_cohorts % 2 == 0 else "right"
    pair = cb.stage2_select(
        sample, contour, side, history, design.line, design.fisher_draws
    )
    return Recommendation(
        "treat",
        {"pair": [pair[0], pair[1]], "line_index": None, "stage": 2, "side": side},
        posterior=summary,
        n_outcomes=state.n_outcomes,
    )


def _combo_summary(design: ComboDesign, sample: PosteriorSample) -> dict:
    rows = []
    for i, pair in enumerate(design.line.doses):
        p = cb.combo_tox_prob(pair, sample.draws)
        rows.append(
            {
                "treatment": f"dose{i}",
                "pair": list(pair),
                "mean_tox": float(np.mean(p)),
                "pr_above_target": float(np.mean(p > design.target)),
            }
        )
    return {"doses": rows, "target": design.target}


def _efftox_summary(design: EfftoxDesign, sample: PosteriorSample) -> dict:
    acc = et.acceptable_set(design.model, sample, design.doses, design.limits)
    mu_e, mu_t, delta = et.dose_desirabilities(
        design.model, sample, design.doses, design.contour
    )
    rows = []
    for i, x in enumerate(design.doses):
        pi_e, pi_t = design.model.marginals(x, sample.draws)
        rows.append(
            {
                "treatment": f"dose{i}",
                "dose": float(x),
                "mean_eff": float(mu_e[i]),
                "mean_tox": float(mu_t[i]),
                "pr_low_eff": float(np.mean(pi_e < design.limits.eff_floor)),
                "pr_high_tox": float(np.mean(pi_t > design.limits.tox_ceiling)),
                "acceptable": i in acc,
                "desirability": float(delta[i]),
            }
        )
    return {
        "doses": rows,
        "contour": _contour_trace(design.contour),
        "limits": {
            "eff_floor": design.limits.eff_floor,
            "tox_ceiling": design.limits.tox_ceiling,
            "p_eff": design.limits.p_eff,
            "p_tox": design.limits.p_tox,
        },
    }


def _contour_trace(contour: et.TradeoffContour, n=101, levels=(0.2, 0.368, 0.5, 0.7)) -> dict:
    pes = np.linspace(0.0, 1.0, n)
    curve = [[float(pe), float(contour.value(pe))] for pe in pes]
    level_sets = {}
    for u in levels:
        r = -math.log(u)
        pts = [
            [1.0 + r * (pe - 1.0), r * pt]
            for pe, pt in curve
            if 0.0 <= 1.0 + r * (pe - 1.0) <= 1.0 and 0.0 <= r * pt <= 1.0
        ]
        level_sets[f"{u:g}"] = pts
    return {"curve": curve, "levels": level_sets, "pairs": [list(p) for p in contour.pairs]}


def _recommend_efftox(design: EfftoxDesign, state, engine_seed):
    if state.n_assigned == 0:
        return Recommendation(
            "treat", {"dose_index": design.start_index}, posterior={}, n_outcomes=0
        )
    sample = fit_posterior(design, state, engine_seed)
    summary = _efftox_summary(design, sample)
    acc = [i for i, row in enumerate(summary["doses"]) if row["acceptable"]]
    if not acc:
        return Recommendation(
            "stop", reason="no-acceptable-dose", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    idx = et.select_dose(
        design.model,
        sample,
        design.doses,
        design.limits,
        design.contour,
        _max_tried_index(state),
    )
    if idx is None:
        return Recommendation(
            "stop", reason="no-reachable-acceptable-dose", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    return Recommendation(
        "treat", {"dose_index": idx}, posterior=summary, n_outcomes=state.n_outcomes
    )


def _recommend_covariate(design: CovariateEfftoxDesign, state, engine_seed, z):
    sample = fit_posterior(design, state, engine_seed)
    rep_sets = {}
    for j, zr in enumerate(design.representative_z):
        rep_sets[j] = cov.acceptable_set_for_patient(
            zr, design.model, sample, design.doses, design.bounds,
            design.p_eff, design.p_tox,
        )
    summary = {"representative_acceptable": {str(j): v for j, v in rep_sets.items()}}
    if all(len(v) == 0 for v in rep_sets.values()):
        return Recommendation(
            "stop", reason="all-representative-unacceptable", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    if z is None:
        return Recommendation(
            "treat", None, reason="covariates-required", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    acc = cov.acceptable_set_for_patient(
        z, design.model, sample, design.doses, design.bounds,
        design.p_eff, design.p_tox,
    )
    rows = []
    for i, x in enumerate(design.doses):
        pe, pt = design.model.marginals(("dose", x), z, sample.draws)
        mu = (float(pe.mean()), float(pt.mean()))
        rows.append(
            {
                "treatment": f"dose{i}",
                "dose": float(x),
                "mean_eff": mu[0],
                "mean_tox": mu[1],
                "acceptable": i in acc,
                "desirability": float(et.desirability(mu, design.contour)),
            }
        )
    summary["doses"] = rows
    summary["contour"] = _contour_trace(design.contour)
    summary["patient_bounds"] = {
        "eff_floor": design.bounds.eff_floor(design.model, z),
        "tox_ceiling": design.bounds.tox_ceiling(design.model, z),
    }
    idx = cov.select_dose_for_patient(
        z, design.model, sample, acc, design.doses, design.contour
    )
    if idx is None:
        return Recommendation(
            "off-protocol", reason="no-acceptable-dose-for-patient",
            posterior=summary, n_outcomes=state.n_outcomes,
        )
    return Recommendation(
        "treat", {"dose_index": idx}, posterior=summary, n_outcomes=state.n_outcomes
    )


def _recommend_ttb(design: TtbDesign, state, engine_seed):
    if state.n_assigned == 0:
        return Recommendation(
            "treat", {"dose_index": design.start_index}, posterior={}, n_outcomes=0
        )
    sample = fit_posterior(design, state, engine_seed)
    if design.stop_enabled and tb.stop_signal(
        design.model, sample, design.doses[0], design.ttb_target,
        design.stop_kappa, design.stop_cutoff,
    ):
        taus = [tb.expected_ttb(design.model, x, sample) for x in design.doses]
        return Recommendation(
            "stop", reason="lowest-dose-burden-excessive",
            posterior=_ttb_summary(design, taus), n_outcomes=state.n_outcomes,
        )
    idx, taus = tb.select_dose_ttb(
        design.model, sample, design.doses, design.ttb_target, _max_tried_index(state)
    )
    return Recommendation(
        "treat", {"dose_index": idx}, posterior=_ttb_summary(design, list(taus)),
        n_outcomes=state.n_outcomes,
    )


def _ttb_summary(design: TtbDesign, taus: list) -> dict:
    return {
        "doses": [
            {"treatment": f"dose{i}", "dose": float(x), "expected_burden": float(t)}
            for i, (x, t) in enumerate(zip(design.doses, taus))
        ],
        "target": design.ttb_target,
    }


def _sched_tried_and_current(state: TrialState):
    tried = set()
    current = None
    for p in state.treated_patients():
        k, j = state.assignment(p).data["treatment"]["pair"]
        tried.add((k, j))
        current = (k, j)
    return tried, current


def _recommend_schedule(design: ScheduleDesign, state, engine_seed, study_time):
    tried, current = _sched_tried_and_current(state)
    if current is None:
        start = design.grid.start_pair
        return Recommendation(
            "treat", {"pair": [start[0], start[1]]}, posterior={}, n_outcomes=0
        )
    sample = fit_posterior(design, state, engine_seed, study_time)
    pair, acc, mean_f = sc.select_pair(
        sample, design.grid, current, tried, design.model.family
    )
    summary = {
        "mean_f": [[float(v) for v in row] for row in mean_f],
        "acceptable": [[int(k), int(j)] for k, j in acc],
        "target": design.grid.target,
        "f_max": design.grid.f_max,
    }
    if pair is None:
        return Recommendation(
            "stop", reason="no-acceptable-pair", posterior=summary,
            n_outcomes=state.n_outcomes,
        )
    return Recommendation(
        "treat", {"pair": [pair[0], pair[1]]}, posterior=summary,
        n_outcomes=state.n_outcomes,
    )


def recommend(
    design,
    state: TrialState,
    engine_seed: int,
    study_time: float | None = None,
    z=None,
) -> Recommendation:
    """Next action for the trial given its event log.

    ``study_time`` matters only for time-to-event designs (censoring of
    ongoing patients); ``z`` is the covariate vector of the next patient for
    the covariate design.
    """
    if state.stopped:
        return Recommendation(
            "stop", reason=state.stop_reason, n_outcomes=state.n_outcomes
        )
    if state.n_assigned >= design.n_max:
        return Recommendation(
            "stop", reason="max-enrollment", n_outcomes=state.n_outcomes
        )
    if design.kind == "combo":
        return _recommend_combo(design, state, engine_seed)
    if design.kind == "efftox":
        return _recommend_efftox(design, state, engine_seed)
    if design.kind == "covariate-efftox":
        return _recommend_covariate(design, state, engine_seed, z)
    if design.kind == "ttb":
        return _recommend_ttb(design, state, engine_seed)
    if design.kind == "schedule":
        return _recommend_schedule(design, state, engine_seed, study_time)
    raise ConfigurationError(f"unknown design kind {design.kind!r}")


def decision_prefix(state: TrialState) -> TrialState:
    """The log truncated to the last decision point: trailing enroll/assign
    events (a cohort still awaiting outcomes) are dropped so the decision
    that produced them can be replayed exactly."""
    n = len(state.events)
    while n > 0 and state.events[n - 1].type in ("enroll", "assign"):
        n -= 1
    prefix = TrialState()
    for e in state.events[:n]:
        prefix.append(e)
    return prefix


def conduct_recommendation(
    design, state: TrialState, engine_seed: int, z=None
) -> Recommendation:
    """The recommendation governing the log's current cohort: if patients
    are awaiting outcomes, replay the decision at their assignment prefix;
    otherwise recommend fresh from the full log."""
    if state.pending_patients():
        prefix = decision_prefix(state)
        if design.kind == "covariate-efftox" and z is None:
            p = state.pending_patients()[0]
            zdata = state.enrollment(p).data.get("z")
            z = tuple(zdata) if zdata is not None else None
        return recommend(design, prefix, engine_seed, study_time=prefix.last_time, z=z)
    return recommend(design, state, engine_seed, study_time=state.last_time, z=z)


def summarize_sample(design, sample: PosteriorSample, z=None) -> dict:
    """Per-treatment summary tables for an already-computed posterior."""
    if design.kind == "combo":
        return _combo_summary(design, sample)
    if design.kind == "efftox":
        return _efftox_summary(design, sample)
    if design.kind == "ttb":
        taus = [tb.expected_ttb(design.model, x, sample) for x in design.doses]
        return _ttb_summary(design, taus)
    if design.kind == "schedule":
        mean_f = np.empty((design.grid.n_schedules, design.grid.n_pads))
        for k in range(design.grid.n_schedules):
            for j in range(design.grid.n_pads):
                mean_f[k, j] = float(
                    np.mean(sc._tox_cdf_draws(design.grid, k, j, sample.draws, design.model.family))
                )
        acc = sc.acceptable_pairs(sample, design.grid, design.model.family)
        return {
            "mean_f": [[float(v) for v in row] for row in mean_f],
            "acceptable": [[int(k), int(j)] for k, j in acc],
            "target": design.grid.target,
            "f_max": design.grid.f_max,
        }
    # covariate design: representative acceptability plus per-patient rows
    rep_sets = {
        str(j): cov.acceptable_set_for_patient(
            zr, design.model, sample, design.doses, design.bounds,
            design.p_eff, design.p_tox,
        )
        for j, zr in enumerate(design.representative_z)
    }
    out = {"representative_acceptable": rep_sets, "contour": _contour_trace(design.contour)}
    if z is not None:
        acc = cov.acceptable_set_for_patient(
            z, design.model, sample, design.doses, design.bounds,
            design.p_eff, design.p_tox,
        )
        rows = []
        for i, x in enumerate(design.doses):
            pe, pt = design.model.marginals(("dose", x), z, sample.draws)
            mu = (float(pe.mean()), float(pt.mean()))
            rows.append(
                {
                    "treatment": f"dose{i}",
                    "dose": float(x),
                    "mean_eff": mu[0],
                    "mean_tox": mu[1],
                    "acceptable": i in acc,
                    "desirability": float(et.desirability(mu, design.contour)),
                }
            )
        out["doses"] = rows
    return out


def posterior_summary(design, state: TrialState, engine_seed: int, z=None) -> dict:
    """Per-treatment posterior summaries (and rendering traces) for the
    current log; the same numbers the recommendation rules used.  With no
    outcomes yet the summaries are prior-based."""
    rec = conduct_recommendation(design, state, engine_seed, z=z)
    out = dict(rec.posterior)
    if not out:
        sample = fit_posterior(
            design, decision_prefix(state), engine_seed, study_time=state.last_time
        )
        out = summarize_sample(design, sample, z=z)
    out["n_outcomes"] = rec.n_outcomes
    out["recommendation"] = rec.to_dict()
    return out


def final_selection(design, state: TrialState, engine_seed: int) -> str | None:
    """The treatment a completed trial would recommend for future patients;
    None when the trial stopped with no selection (or nothing is
    acceptable)."""
    if state.stopped and state.stop_reason != "max-enrollment":
        return None
    if state.n_outcomes == 0:
        return None
    sample = fit_posterior(design, state, engine_seed, study_time=state.last_time)
    if design.kind == "combo":
        current, any_tox, _ = _combo_line_state(design, state)
        p_lowest = cb.combo_tox_prob(design.line.doses[0], sample.draws)
        if float(np.mean(p_lowest > design.target)) > design.stop_cutoff:
            return None
        allowed = design.line.allowed_indices(any_tox)
        means = [
            abs(float(np.mean(cb.combo_tox_prob(design.line.doses[i], sample.draws))) - design.target)
            for i in allowed
        ]
        return f"dose{allowed[int(np.argmin(means))]}"
    if design.kind == "efftox":
        acc = et.acceptable_set(design.model, sample, design.doses, design.limits)
        if not acc:
            return None
        _, _, delta = et.dose_desirabilities(design.model, sample, design.doses, design.contour)
        best = max(acc, key=lambda i: (delta[i], -i))
        return f"dose{best}"
    if design.kind == "covariate-efftox":
        # the deliverable is a per-patient rule; summarize by the dose chosen
        # for the first representative patient with a nonempty acceptable set
        for zr in design.representative_z:
            acc = cov.acceptable_set_for_patient(
                zr, design.model, sample, design.doses, design.bounds,
                design.p_eff, design.p_tox,
            )
            idx = cov.select_dose_for_patient(
                zr, design.model, sample, acc, design.doses, design.contour
            )
            if idx is not None:
                return f"dose{idx}"
        return None
    if design.kind == "ttb":
        idx, _ = tb.select_dose_ttb(
            design.model, sample, design.doses, design.ttb_target, None
        )
        return f"dose{idx}"
    # schedule: final pick is the unclamped argmin over acceptable pairs
    acc = sc.acceptable_pairs(sample, design.grid, design.model.family)
    if not acc:
        return None
    best = None
    best_key = None
    for k, j in acc:
        f = float(
            np.mean(sc._tox_cdf_draws(design.grid, k, j, sample.draws, design.model.family))
        )
        key = (abs(f - design.grid.target), design.grid.total_dose(k, j), j)
        if best_key is None or key < best_key:
            best, best_key = (k, j), key
    return f"s{best[0]}d{best[1]}"

"""Monte-Carlo trial simulation and operating characteristics.

Simulates the learn-as-you-go loop as a discrete-event process: Poisson
accrual, cohort management with the look-ahead rule, outcome generation from
a ground-truth scenario, early stopping, and replicate aggregation.  A
post-hoc validator re-audits every assignment in a finished log against the
posterior recomputed from the event prefix.

Random-number discipline: accrual, outcomes and covariates draw from
separate named streams, and each decision's chain seed depends only on the
replicate seed and the number of observed outcomes, so changing chain
length never perturbs the simulated patients.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import combo as cb
from . import efftox as et
from . import schedule as sc
from .designs import (
    Recommendation,
    build_dataset,
    fit_posterior,
    outcome_completions,
    final_selection,
    recommend,
    treatment_label,
)
from .events import Event, TrialState
from .priors import ConfigurationError

__all__ = [
    "Scenario",
    "OperatingCharacteristics",
    "run_trial",
    "look_ahead",
    "run_replicates",
    "validate_trial",
]

LOOKAHEAD_MAX_PENDING = 20
LOOKAHEAD_MAX_COMPLETIONS = 64


@dataclass(frozen=True)
class Scenario:
    """Ground truth for simulation.

    ``true_params`` is a model-space parameter vector (combo surface, ordinal
    probit, or hazard parameters); ``dose_outcomes`` gives per-dose outcome
    probabilities for the trade-off designs; ``covariate_pool`` lists the
    covariate vectors patients are drawn from (uniformly).
    """

    kind: str
    accrual_rate: float
    eval_window: float = 1.0
    t_max: float = math.inf
    true_params: tuple | None = None
    dose_outcomes: tuple | None = None
    covariate_pool: tuple | None = None
    interventions: dict = field(default_factory=dict)
    name: str = "scenario"

    def __post_init__(self):
        if self.accrual_rate <= 0:
            raise ConfigurationError("accrual rate must be positive")


def _stream(seed, k) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0, k))))


def _draw_outcome(design, scenario, treatment, rng, z=None) -> dict:
    """One patient's outcome payload under the scenario's ground truth."""
    if design.kind == "combo":
        p = cb.combo_tox_prob(
            tuple(treatment["pair"]), np.asarray(scenario.true_params).reshape(1, -1)
        )
        return {"tox": int(rng.random() < float(p[0]))}
    if design.kind == "efftox":
        truth = scenario.dose_outcomes[treatment["dose_index"]]
        if design.model.kind == "bivariate":
            cells = et.gumbel_cells(
                float(truth["eff"]), float(truth["tox"]), float(truth.get("psi", 0.0))
            )
            c = int(rng.choice(4, p=np.asarray(cells) / sum(cells)))
            y_e, y_t = ((0, 0), (1, 0), (0, 1), (1, 1))[c]
            return {"eff": y_e, "tox": y_t}
        pe, pt = float(truth["eff"]), float(truth["tox"])
        u = rng.random()
        if u < pt:
            return {"y": "T"}
        if u < pt + pe:
            return {"y": "E"}
        return {"y": "N"}
    if design.kind == "covariate-efftox":
        th = np.asarray(scenario.true_params).reshape(1, -1)
        x = design.doses[treatment["dose_index"]]
        pe, pt = design.model.marginals(("dose", x), z, th)
        cells = et.gumbel_cells(float(pe[0]), float(pt[0]), float(th[0, -1]))
        c = int(rng.choice(4, p=np.asarray(cells) / sum(cells)))
        y_e, y_t = ((0, 0), (1, 0), (0, 1), (1, 1))[c]
        return {"eff": y_e, "tox": y_t}
    if design.kind == "ttb":
        model = design.model
        unpacked = model.unpack(np.asarray(scenario.true_params))
        if unpacked is None:
            raise ConfigurationError("scenario true ordinal parameters are invalid")
        beta, bounds, omega = unpacked
        x = design.doses[treatment["dose_index"]]
        chol = np.linalg.cholesky(omega)
        zlat = beta[:, 0] + beta[:, 1] * x + chol @ rng.standard_normal(model.n_types)
        levels = []
        for j in range(model.n_types):
            levels.append(int(np.searchsorted(bounds[j], zlat[j], side="left") - 1))
        return {"levels": levels}
    raise ConfigurationError(f"no outcome generator for design {design.kind!r}")


def _draw_z(scenario, rng):
    pool = scenario.covariate_pool
    return tuple(pool[int(rng.integers(0, len(pool)))])


def look_ahead(design, state: TrialState, engine_seed: int, z=None) -> tuple[str, Recommendation | None]:
    """PROCEED when every completion of the pending outcomes yields the same
    next treatment (returning that decision); otherwise SUSPEND.  More than
    20 pending outcomes (or a completion grid too large to enumerate at full
    chain cost) exceeds the cap and suspends outright."""
    pending = state.pending_patients()
    if not pending:
        return "proceed", recommend(
            design, state, engine_seed, study_time=state.last_time, z=z
        )
    completions = outcome_completions(design)
    if completions is None:
        raise ConfigurationError("look-ahead does not apply to time-to-event outcomes")
    if len(pending) > LOOKAHEAD_MAX_PENDING:
        return "suspend", None
    if len(completions) ** len(pending) > LOOKAHEAD_MAX_COMPLETIONS:
        return "suspend", None
    first = None
    for combo_outcomes in product(completions, repeat=len(pending)):
        hyp = state.copy()
        for p, payload in zip(pending, combo_outcomes):
            hyp.append(Event("outcome", hyp.last_time, p, dict(payload)))
        rec = recommend(design, hyp, engine_seed, study_time=hyp.last_time, z=z)
        key = (rec.action, None if rec.treatment is None else tuple(sorted(rec.treatment.items(), key=str)))
        if first is None:
            first = (key, rec)
        elif first[0] != key:
            return "suspend", None
    return "proceed", first[1]


def _flush(state: TrialState, future: list, upto: float) -> None:
    while future and future[0][0] <= upto:
        t_ev, patient, payload = heapq.heappop(future)
        state.append(Event("outcome", t_ev, patient, payload))


def run_trial(design, scenario: Scenario, seed: int) -> TrialState:
    """Simulate one trial; deterministic in (design, scenario, seed)."""
    if scenario.kind != design.kind:
        raise ConfigurationError(
            f"scenario kind {scenario.kind!r} does not match design {design.kind!r}"
        )
    if design.kind == "schedule":
        return _run_schedule_trial(design, scenario, seed)
    rng_acc = _stream(seed, 1)
    rng_out = _stream(seed, 2)
    rng_z = _stream(seed, 3)
    state = TrialState()
    future: list = []
    t = 0.0
    current: dict | None = None
    cohort_filled = 0
    while not state.stopped and state.n_assigned < design.n_max:
        t = t + rng_acc.exponential(1.0 / scenario.accrual_rate)
        if t > scenario.t_max:
            _flush(state, future, scenario.t_max)
            future.clear()  # data collection ends at the duration cap
            if not state.stopped:
                state.append(Event("stop", scenario.t_max, data={"reason": "max-duration"}))
            break
        _flush(state, future, t)
        z = _draw_z(scenario, rng_z) if design.kind == "covariate-efftox" else None
        if current is None or cohort_filled >= design.cohort_size:
            # decision point; apply the look-ahead rule over pending outcomes
            while True:
                action, rec = look_ahead(design, state, seed, z=z)
                if action == "proceed":
                    break
                pending = state.pending_patients()
                mature_times = [ft for ft, p, _ in future if p in pending]
                resume_at = min(mature_times)
                state.append(Event("suspend", t))
                _flush(state, future, resume_at)
                state.append(Event("resume", resume_at))
                t = resume_at  # the arriving patient was turned away
                t = t + rng_acc.exponential(1.0 / scenario.accrual_rate)
                if t > scenario.t_max:
                    _flush(state, future, scenario.t_max)
                    future.clear()
                    state.append(
                        Event("stop", scenario.t_max, data={"reason": "max-duration"})
                    )
                    break
                _flush(state, future, t)
                if design.kind == "covariate-efftox":
                    z = _draw_z(scenario, rng_z)
            if state.stopped:
                break
            if rec.action == "stop":
                state.append(Event("stop", t, data={"reason": rec.reason}))
                break
            if rec.action == "off-protocol":
                p = state.n_enrolled
                state.append(Event("enroll", t, p, {"z": list(z)}))
                continue
            current = rec.treatment
            cohort_filled = 0
        p = state.n_enrolled
        enroll_data = {"z": list(z)} if z is not None else {}
        state.append(Event("enroll", t, p, enroll_data))
        state.append(Event("assign", t, p, {"treatment": current}))
        payload = _draw_outcome(design, scenario, current, rng_out, z=z)
        heapq.heappush(future, (t + scenario.eval_window, p, payload))
        cohort_filled += 1
    _flush(state, future, math.inf)
    return state


def _run_schedule_trial(design, scenario: Scenario, seed: int) -> TrialState:
    rng_acc = _stream(seed, 1)
    rng_out = _stream(seed, 2)
    state = TrialState()
    future: list = []
    t = 0.0
    theta_true = np.asarray(scenario.true_params, dtype=float)
    grid = design.grid
    while not state.stopped and state.n_assigned < design.n_max:
        t = t + rng_acc.exponential(1.0 / scenario.accrual_rate)
        if t > scenario.t_max:
            _flush(state, future, scenario.t_max)
            future.clear()
            if not state.stopped:
                state.append(Event("stop", scenario.t_max, data={"reason": "max-duration"}))
            break
        _flush(state, future, t)
        rec = recommend(design, state, seed, study_time=t)
        if rec.action == "stop":
            state.append(Event("stop", t, data={"reason": rec.reason}))
            break
        k, j = rec.treatment["pair"]
        regime = grid.planned_regime(k, j)
        p = state.n_enrolled
        mods = scenario.interventions.get(p)
        if mods:
            dose_idx = list(regime.dose_idx)
            for adm_i, new_j in mods:
                dose_idx[adm_i] = new_j
            regime = sc.Regime(regime.times, tuple(dose_idx))
        treatment = dict(rec.treatment)
        if mods:
            treatment["regime"] = {
                "times": list(regime.times),
                "dose_idx": list(regime.dose_idx),
            }
        state.append(Event("enroll", t, p))
        state.append(Event("assign", t, p, {"treatment": treatment}))
        tox_time = sc.draw_tox_time(regime, theta_true, rng_out, design.model.family)
        if tox_time is not None and tox_time <= grid.t_star:
            heapq.heappush(future, (t + tox_time, p, {"tox": 1, "time": float(tox_time)}))
        else:
            heapq.heappush(future, (t + grid.t_star, p, {"tox": 0, "time": float(grid.t_star)}))
    _flush(state, future, math.inf)
    return state


# ---------------------------------------------------------------------------
# Operating characteristics.


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Frequentist summaries across replicates.  ``no_selection_freq`` counts
    trials ending with no selected treatment (early stops and trials whose
    final acceptable set is empty); selection frequencies plus this term sum
    to one."""

    n_replicates: int
    selection_freq: dict
    no_selection_freq: float
    mean_patients: dict
    mean_outcomes: dict
    mean_sample_size: float
    mean_duration: float

    def to_dict(self) -> dict:
        return {
            "n_replicates": self.n_replicates,
            "selection_freq": dict(sorted(self.selection_freq.items())),
            "no_selection_freq": self.no_selection_freq,
            "mean_patients": dict(sorted(self.mean_patients.items())),
            "mean_outcomes": dict(sorted(self.mean_outcomes.items())),
            "mean_sample_size": self.mean_sample_size,
            "mean_duration": self.mean_duration,
        }


def _outcome_totals(design, state: TrialState) -> dict:
    totals: dict[str, float] = {}
    for p in state.evaluated_patients():
        data = state.outcome(p).data
        if design.kind == "combo" or design.kind == "schedule":
            totals["tox"] = totals.get("tox", 0.0) + float(data["tox"])
        elif design.kind == "ttb":
            from .ttb import ttb as ttb_score

            totals["burden"] = totals.get("burden", 0.0) + ttb_score(
                data["levels"], design.model.profile
            )
        elif "y" in data:
            totals["tox"] = totals.get("tox", 0.0) + (1.0 if data["y"] == "T" else 0.0)
            totals["eff"] = totals.get("eff", 0.0) + (1.0 if data["y"] == "E" else 0.0)
        else:
            totals["tox"] = totals.get("tox", 0.0) + float(data["tox"])
            totals["eff"] = totals.get("eff", 0.0) + float(data["eff"])
    return totals


def replicate_summary(design, scenario: Scenario, seed: int) -> dict:
    state = run_trial(design, scenario, seed)
    selection = final_selection(design, state, seed)
    patients: dict[str, int] = {}
    for p in state.treated_patients():
        label = treatment_label(design, state.assignment(p).data["treatment"])
        patients[label] = patients.get(label, 0) + 1
    return {
        "seed": seed,
        "selection": selection,
        "patients": patients,
        "outcomes": _outcome_totals(design, state),
        "sample_size": state.n_assigned,
        "duration": state.last_time,
        "stopped_early": state.stopped and state.stop_reason != "max-enrollment",
        "stop_reason": state.stop_reason,
    }


def _aggregate(summaries: list[dict]) -> OperatingCharacteristics:
    n = len(summaries)
    sel: dict[str, int] = {}
    none_count = 0
    patients: dict[str, float] = {}
    outcomes: dict[str, float] = {}
    size = 0.0
    duration = 0.0
    for s in summaries:
        if s["selection"] is None:
            none_count += 1
        else:
            sel[s["selection"]] = sel.get(s["selection"], 0) + 1
        for k, v in s["patients"].items():
            patients[k] = patients.get(k, 0.0) + v
        for k, v in s["outcomes"].items():
            outcomes[k] = outcomes.get(k, 0.0) + v
        size += s["sample_size"]
        duration += s["duration"]
    return OperatingCharacteristics(
        n_replicates=n,
        selection_freq={k: v / n for k, v in sel.items()},
        no_selection_freq=none_count / n,
        mean_patients={k: v / n for k, v in patients.items()},
        mean_outcomes={k: v / n for k, v in outcomes.items()},
        mean_sample_size=size / n,
        mean_duration=duration / n,
    )


def _replicate_star(args):
    return replicate_summary(*args)


def run_replicates(
    design, scenario: Scenario, n_reps: int, base_seed: int, n_jobs: int = 1
) -> tuple[OperatingCharacteristics, list[dict]]:
    """Independent seeded replicates (seed = base + index).  Aggregation is
    a deterministic fold in replicate order, so concurrent execution returns
    bit-identical results to serial."""
    if n_reps < 1:
        raise ConfigurationError("n_reps must be >= 1")
    tasks = [(design, scenario, base_seed + i) for i in range(n_reps)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            summaries = list(pool.map(_replicate_star, tasks, chunksize=8))
    else:
        summaries = [replicate_summary(*t) for t in tasks]
    return _aggregate(summaries), summaries


# ---------------------------------------------------------------------------
# Post-hoc legality audit.


def validate_trial(design, state: TrialState, engine_seed: int, t_max=math.inf) -> list[str]:
    """Re-audit a finished log: every boundary assignment is checked against
    the posterior recomputed from the event prefix (identical decision seed),
    plus independent recounts of the no-skip, acceptability, stop, and cap
    rules.  Returns human-readable violations; an empty list is a pass."""
    violations: list[str] = []
    if state.n_assigned > design.n_max:
        violations.append(f"enrolled {state.n_assigned} > n_max {design.n_max}")
    if state.events and state.events[-1].time > t_max + 1e-9:
        violations.append("events beyond the scenario duration cap")

    cohort = design.cohort_size
    assigned_so_far = 0
    cohort_treatment = None
    for idx, ev in enumerate(state.events):
        if ev.type != "assign":
            continue
        p = ev.patient
        boundary = assigned_so_far % cohort == 0
        if not boundary:
            if ev.data["treatment"] != cohort_treatment:
                violations.append(
                    f"patient {p}: mid-cohort treatment differs from the cohort's"
                )
            assigned_so_far += 1
            continue
        enroll_idx = next(
            i
            for i, e in enumerate(state.events[: idx + 1])
            if e.type == "enroll" and e.patient == p
        )
        prefix = TrialState()
        for e in state.events[:enroll_idx]:
            if e.type == "stop":
                violations.append(f"patient {p} treated after a stop event")
                continue
            prefix.append(e)
        z = state.enrollment(p).data.get("z")
        z = tuple(z) if z is not None else None
        action, rec = look_ahead(design, prefix, engine_seed, z=z) if design.kind != "schedule" else (
            "proceed",
            recommend(design, prefix, engine_seed, study_time=ev.time),
        )
        if action != "proceed" or rec.action != "treat":
            violations.append(
                f"patient {p}: log assigns treatment where the rules give "
                f"{action}/{rec.action if rec else None}"
            )
            assigned_so_far += 1
            cohort_treatment = ev.data["treatment"]
            continue
        actual = ev.data["treatment"]
        expected = rec.treatment
        if _canon(actual) != _canon(expected):
            violations.append(
                f"patient {p}: assigned {actual}, rules recompute {expected}"
            )
        violations.extend(_rule_recounts(design, prefix, ev, engine_seed, z))
        cohort_treatment = actual
        assigned_so_far += 1
    return violations


def _canon(treatment: dict | None):
    if treatment is None:
        return None
    return tuple(sorted(((k, tuple(v) if isinstance(v, list) else v) for k, v in treatment.items()), key=str))


def _rule_recounts(
    design, prefix: TrialState, ev: Event, engine_seed: int, z=None
) -> list[str]:
    """Independent checks of the safety rules on the recomputed posterior."""
    out: list[str] = []
    treatment = ev.data["treatment"]
    p = ev.patient
    if prefix.n_outcomes == 0:
        return out
    sample = fit_posterior(design, prefix, engine_seed, study_time=ev.time)
    if design.kind == "efftox":
        i = treatment["dose_index"]
        tried = [
            prefix.assignment(q).data["treatment"]["dose_index"]
            for q in prefix.treated_patients()
        ]
        if tried and i > max(tried) + 1:
            out.append(f"patient {p}: dose {i} skips untried doses (max tried {max(tried)})")
        acc = et.acceptable_set(design.model, sample, design.doses, design.limits)
        if i not in acc:
            out.append(f"patient {p}: dose {i} not in the acceptable set {acc}")
    elif design.kind == "ttb":
        i = treatment["dose_index"]
        tried = [
            prefix.assignment(q).data["treatment"]["dose_index"]
            for q in prefix.treated_patients()
        ]
        if tried and i > max(tried) + 1:
            out.append(f"patient {p}: dose {i} skips untried doses")
    elif design.kind == "combo":
        from . import combo as cbm

        if treatment.get("line_index") is not None:
            i = treatment["line_index"]
            last = 0
            for q in prefix.treated_patients():
                li = prefix.assignment(q).data["treatment"].get("line_index")
                if li is not None:
                    last = li
            any_tox = any(
                int(prefix.outcome(q).data["tox"]) == 1
                for q in prefix.evaluated_patients()
            )
            allowed = design.line.allowed_indices(any_tox)
            up = [a for a in allowed if a > last]
            cap = up[0] if up else last
            if i > cap:
                out.append(f"patient {p}: line dose {i} escalates past {cap}")
        else:
            pair = tuple(treatment["pair"])
            mean_p = float(np.mean(cbm.combo_tox_prob(pair, sample.draws)))
            if abs(mean_p - design.target) > design.contour_tol * 5 + 5e-3:
                out.append(
                    f"patient {p}: stage-2 pair off the target contour "
                    f"(mean tox {mean_p:.4f} vs target {design.target})"
                )
        p_lowest = cbm.combo_tox_prob(design.line.doses[0], sample.draws)
        if float(np.mean(p_lowest > design.target)) > design.stop_cutoff:
            out.append(f"patient {p}: treated although the stop rule held")
    elif design.kind == "covariate-efftox":
        from . import covariates as cov

        i = treatment["dose_index"]
        if z is not None:
            acc = cov.acceptable_set_for_patient(
                z, design.model, sample, design.doses, design.bounds,
                design.p_eff, design.p_tox,
            )
            if i not in acc:
                out.append(
                    f"patient {p}: dose {i} unacceptable for covariates {z} (set {acc})"
                )
    elif design.kind == "schedule":
        k, j = treatment["pair"]
        tried = set()
        current = None
        for q in prefix.treated_patients():
            kj = tuple(prefix.assignment(q).data["treatment"]["pair"])
            tried.add(kj)
            current = kj
        if current is not None and (k, j) not in tried:
            if k > current[0] + 1 or j > current[1] + 1:
                out.append(
                    f"patient {p}: pair ({k},{j}) skips beyond one step from {current}"
                )
        acc = sc.acceptable_pairs(sample, design.grid, design.model.family)
        if (k, j) not in acc:
            out.append(f"patient {p}: pair ({k},{j}) not acceptable")
    return out

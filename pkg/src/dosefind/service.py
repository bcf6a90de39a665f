"""HTTP/JSON trial-conduct service.

Exposes trial creation, cohort outcome entry, recommendations and posterior
summaries over a small REST API.  The single source of truth per trial is an
append-only event log on disk; every response is a pure fold of that log, so
deleting derived state and replaying reproduces identical answers.  Writes
are serialized per trial through optimistic versioning (the expected-version
``If-Match`` header); the engine seed is fixed at trial creation so
recommendations are reproducible for review.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ConfigError, load_config_dict
from .designs import (
    Recommendation,
    conduct_recommendation,
    posterior_summary,
    recommend,
    treatment_label,
)
from .events import Event, EventLogError, TrialState
from .priors import ConfigurationError

__all__ = ["create_app", "ApiError"]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, fieldname: str | None = None):
        self.status = status
        self.body = {"code": code, "message": message}
        if fieldname:
            self.body["field"] = fieldname
        super().__init__(message)


class CreateTrialBody(BaseModel):
    design: dict
    prior: list | None = None
    mcmc: dict | None = None
    next_covariates: list[float] | None = None


class OutcomesBody(BaseModel):
    outcomes: list[dict] = Field(default_factory=list)
    next_covariates: list[float] | None = None


class PreviewBody(BaseModel):
    outcomes: list[dict] = Field(default_factory=list)
    next_covariates: list[float] | None = None


class TrialStore:
    """Disk-backed, event-sourced trial registry."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()

    def trial_ids(self) -> list[str]:
        return sorted(p.name for p in self.data_dir.iterdir() if p.is_dir())

    def new_id(self) -> str:
        existing = self.trial_ids()
        return f"trial-{len(existing) + 1:04d}"

    def config_path(self, trial_id: str) -> Path:
        return self.data_dir / trial_id / "config.json"

    def log_path(self, trial_id: str) -> Path:
        return self.data_dir / trial_id / "events.jsonl"

    def exists(self, trial_id: str) -> bool:
        return self.config_path(trial_id).exists()

    def load_config(self, trial_id: str) -> dict:
        return json.loads(self.config_path(trial_id).read_text())

    def load_state(self, trial_id: str) -> TrialState:
        return TrialState.from_jsonl(self.log_path(trial_id).read_text())

    def create(self, trial_id: str, config: dict, state: TrialState) -> None:
        d = self.data_dir / trial_id
        d.mkdir(parents=True)
        self.config_path(trial_id).write_text(json.dumps(config, sort_keys=True, indent=2))
        self.log_path(trial_id).write_text(state.to_jsonl())

    def append_events(self, trial_id: str, events: list[Event]) -> None:
        with open(self.log_path(trial_id), "a") as fh:
            for e in events:
                fh.write(e.to_json() + "\n")


def _build_design(config: dict):
    raw = {"design": config["design"]}
    if config.get("prior"):
        raw["prior"] = config["prior"]
    if config.get("mcmc"):
        raw["mcmc"] = config["mcmc"]
    try:
        engine = load_config_dict(raw, base_dir=config.get("base_dir", "."))
    except (ConfigError, ConfigurationError) as exc:
        raise ApiError(422, "invalid-config", str(exc), "design")
    return engine.design, engine.mcmc_seed


def _status_of(design, state: TrialState) -> str:
    if state.stopped:
        return "completed" if state.stop_reason == "max-enrollment" else "stopped"
    if state.n_assigned >= design.n_max and not state.pending_patients():
        return "completed"
    return "active"


def _materialize_cohort(design, state: TrialState, rec: Recommendation, z=None) -> list[Event]:
    """Enroll and assign the next cohort at the recommended treatment."""
    events = []
    t = state.last_time + 1.0
    room = design.n_max - state.n_assigned
    n = min(design.cohort_size, room)
    for _ in range(n):
        p = state.n_enrolled + len([e for e in events if e.type == "enroll"])
        data = {"z": list(z)} if z is not None else {}
        events.append(Event("enroll", t, p, data))
        events.append(Event("assign", t, p, {"treatment": rec.treatment}))
    return events


def _validate_outcomes(design, state: TrialState, outcomes: list[dict]) -> list[Event]:
    pending = state.pending_patients()
    seen = set()
    events = []
    t = state.last_time + 1.0
    for i, o in enumerate(outcomes):
        if "patient" not in o:
            raise ApiError(422, "missing-field", "outcome needs a patient id", f"outcomes[{i}].patient")
        p = int(o["patient"])
        if p in seen:
            raise ApiError(409, "duplicate-outcome", f"patient {p} appears twice")
        seen.add(p)
        if p not in pending:
            raise ApiError(
                409, "unknown-patient",
                f"patient {p} is not an assigned, un-evaluated patient",
            )
        payload = {k: v for k, v in o.items() if k != "patient"}
        _check_payload(design, payload, f"outcomes[{i}]")
        events.append(Event("outcome", t, p, payload))
    if set(pending) - seen:
        raise ApiError(
            422, "incomplete-cohort",
            f"outcomes must cover all pending patients {pending}",
            "outcomes",
        )
    return events


def _check_payload(design, payload: dict, where: str) -> None:
    kind = design.kind
    def need(keys):
        missing = [k for k in keys if k not in payload]
        extra = [k for k in payload if k not in keys]
        if missing or extra:
            raise ApiError(
                422, "outcome-type-mismatch",
                f"design {kind} expects outcome fields {sorted(keys)}",
                where,
            )

    if kind == "combo":
        need({"tox"})
    elif kind == "efftox" and design.model.kind != "bivariate":
        need({"y"})
        if payload["y"] not in ("N", "E", "T"):
            raise ApiError(422, "outcome-type-mismatch", "y must be one of N, E, T", where)
    elif kind in ("efftox", "covariate-efftox"):
        need({"eff", "tox"})
    elif kind == "ttb":
        need({"levels"})
        levels = payload["levels"]
        nl = design.model.profile.n_levels
        if len(levels) != len(nl) or any(not 0 <= int(k) < n for k, n in zip(levels, nl)):
            raise ApiError(422, "outcome-type-mismatch", "severity levels out of range", where)
    else:
        need({"tox", "time"})


def _need_z(design) -> bool:
    return design.kind == "covariate-efftox"


def _recommendation_payload(design, rec: Recommendation) -> dict:
    out = rec.to_dict()
    if rec.treatment is not None:
        out["label"] = treatment_label(design, rec.treatment)
    return out


def create_app(data_dir="trials") -> FastAPI:
    app = FastAPI(title="dosefind conduct service")
    store = TrialStore(Path(data_dir))

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body)

    def get_trial(trial_id: str):
        if not store.exists(trial_id):
            raise ApiError(404, "unknown-trial", f"no trial {trial_id!r}")
        config = store.load_config(trial_id)
        design, _ = _build_design(config)
        state = store.load_state(trial_id)
        return config, design, state

    def snapshot(trial_id, config, design, state, rec=None):
        if rec is None:
            z = _first_pending_z(design, state)
            rec = conduct_recommendation(design, state, config["engine_seed"], z=z)
        return {
            "id": trial_id,
            "status": _status_of(design, state),
            "version": len(state.events),
            "design_kind": design.kind,
            "recommendation": _recommendation_payload(design, rec),
        }

    def _first_pending_z(design, state):
        # for covariate designs the working recommendation is the one for the
        # cohort currently awaiting outcomes (their z is on the enroll event)
        if design.kind != "covariate-efftox":
            return None
        pending = state.pending_patients()
        if pending:
            return tuple(state.enrollment(pending[0]).data["z"])
        return None

    @app.post("/trials", status_code=201)
    def create_trial(body: CreateTrialBody):
        config = body.model_dump()
        design, engine_seed = _build_design(config)
        if _need_z(design) and body.next_covariates is None:
            raise ApiError(
                422, "missing-field",
                "the covariate design needs next_covariates at creation",
                "next_covariates",
            )
        z = tuple(body.next_covariates) if body.next_covariates is not None else None
        state = TrialState()
        rec = recommend(design, state, engine_seed, z=z)
        if rec.action == "treat":
            for e in _materialize_cohort(design, state, rec, z=z):
                state.append(e)
        elif rec.action == "stop":
            state.append(Event("stop", 0.0, data={"reason": rec.reason}))
        stored = {
            "design": config["design"],
            "prior": config.get("prior"),
            "mcmc": config.get("mcmc"),
            "engine_seed": engine_seed,
        }
        with store.lock:
            trial_id = store.new_id()
            store.create(trial_id, stored, state)
        return snapshot(trial_id, stored, design, state, rec)

    @app.get("/trials/{trial_id}")
    def get_trial_snapshot(trial_id: str):
        config, design, state = get_trial(trial_id)
        snap = snapshot(trial_id, config, design, state)
        snap["config"] = {
            "design": config["design"],
            "prior": config.get("prior"),
            "mcmc": config.get("mcmc"),
        }
        return snap

    @app.get("/trials/{trial_id}/events")
    def get_events(trial_id: str):
        _, _, state = get_trial(trial_id)
        return {
            "version": len(state.events),
            "events": [json.loads(e.to_json()) for e in state.events],
        }

    @app.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str):
        config, design, state = get_trial(trial_id)
        return snapshot(trial_id, config, design, state)

    @app.get("/trials/{trial_id}/posterior")
    def get_posterior(trial_id: str):
        config, design, state = get_trial(trial_id)
        z = _first_pending_z(design, state)
        summary = posterior_summary(design, state, config["engine_seed"], z=z)
        summary["version"] = len(state.events)
        return summary

    @app.post("/trials/{trial_id}/outcomes")
    def post_outcomes(
        trial_id: str,
        body: OutcomesBody,
        if_match: str | None = Header(default=None, alias="If-Match"),
    ):
        config, design, state = get_trial(trial_id)
        with store.lock:
            state = store.load_state(trial_id)
            version = len(state.events)
            if if_match is None:
                raise ApiError(428, "missing-version", "supply the expected version in If-Match")
            if if_match.strip('"') != str(version):
                raise ApiError(
                    409, "version-conflict",
                    f"expected version {if_match}, log is at {version}",
                )
            if _status_of(design, state) != "active":
                raise ApiError(409, "trial-not-active", "the trial accepts no more outcomes")
            new_events = _validate_outcomes(design, state, body.outcomes)
            for e in new_events:
                state.append(e)
            z = tuple(body.next_covariates) if body.next_covariates is not None else None
            if _need_z(design) and state.n_assigned < design.n_max and z is None:
                raise ApiError(
                    422, "missing-field",
                    "the covariate design needs next_covariates for the next patient",
                    "next_covariates",
                )
            rec = recommend(
                design, state, config["engine_seed"], study_time=state.last_time, z=z
            )
            if rec.action == "treat":
                for e in _materialize_cohort(design, state, rec, z=z):
                    state.append(e)
                    new_events.append(e)
            elif rec.action in ("stop",):
                e = Event("stop", state.last_time + 1.0, data={"reason": rec.reason})
                state.append(e)
                new_events.append(e)
            elif rec.action == "off-protocol":
                p = state.n_enrolled
                e = Event("enroll", state.last_time + 1.0, p, {"z": list(z)})
                state.append(e)
                new_events.append(e)
            store.append_events(trial_id, new_events)
        return snapshot(trial_id, config, design, state, rec)

    @app.post("/trials/{trial_id}/preview")
    def preview(trial_id: str, body: PreviewBody):
        config, design, state = get_trial(trial_id)
        hyp = state.copy()
        if body.outcomes:
            pending = set(hyp.pending_patients())
            t = hyp.last_time
            for i, o in enumerate(body.outcomes):
                p = int(o.get("patient", -1))
                if p not in pending:
                    raise ApiError(409, "unknown-patient", f"patient {p} is not pending")
                payload = {k: v for k, v in o.items() if k != "patient"}
                _check_payload(design, payload, f"outcomes[{i}]")
                hyp.append(Event("outcome", t, p, payload))
                pending.discard(p)
        z = tuple(body.next_covariates) if body.next_covariates is not None else _first_pending_z(design, hyp)
        rec = recommend(design, hyp, config["engine_seed"], study_time=hyp.last_time, z=z)
        out = _recommendation_payload(design, rec)
        out["preview"] = True
        return out

    return app

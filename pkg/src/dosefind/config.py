"""Engine configuration: schema-validated YAML with line-anchored errors.

One human-editable file describes a design (one of the five families), its
prior, the chain settings, simulation scenarios and output paths.  Unknown
keys are rejected; error messages carry the file, line and column of the
offending node whenever the parser knows them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import combo as cb
from . import covariates as cov
from . import efftox as et
from . import schedule as sc
from . import ttb as tb
from .designs import (
    ComboDesign,
    CovariateEfftoxDesign,
    EfftoxDesign,
    McmcSettings,
    ScheduleDesign,
    TtbDesign,
)
from .mcmc import McmcConfig
from .priors import PriorSpec
from .simulate import Scenario

__all__ = ["ConfigError", "EngineConfig", "load_config", "build_design", "load_profile"]


class ConfigError(ValueError):
    """Invalid engine configuration; the message is line-anchored when the
    source location is known."""

    def __init__(self, message: str, path: tuple = (), mark=None, filename=None):
        self.path = path
        loc = ""
        if filename is not None and mark is not None:
            loc = f"{filename}:{mark[0] + 1}:{mark[1] + 1}: "
        elif filename is not None:
            loc = f"{filename}: "
        at = f" (at {'.'.join(str(p) for p in path)})" if path else ""
        super().__init__(f"{loc}{message}{at}")


def _index_marks(node, path=()):
    """Map config paths to (line, column) source marks."""
    marks = {path: (node.start_mark.line, node.start_mark.column)}
    if isinstance(node, yaml.MappingNode):
        for key_node, val_node in node.value:
            marks.update(_index_marks(val_node, path + (key_node.value,)))
    elif isinstance(node, yaml.SequenceNode):
        for i, child in enumerate(node.value):
            marks.update(_index_marks(child, path + (i,)))
    return marks


class _Ctx:
    def __init__(self, data, marks, filename, base_dir):
        self.data = data
        self.marks = marks
        self.filename = filename
        self.base_dir = base_dir

    def fail(self, message, path):
        raise ConfigError(message, path, self.marks.get(path), self.filename)

    def get(self, mapping, key, path, default=..., types=None):
        if key not in mapping:
            if default is ...:
                self.fail(f"missing required key {key!r}", path)
            return default
        value = mapping[key]
        if types is not None and not isinstance(value, types):
            self.fail(f"key {key!r} has the wrong type", path + (key,))
        return value

    def check_keys(self, mapping, allowed, path):
        unknown = set(mapping) - set(allowed)
        if unknown:
            k = sorted(unknown)[0]
            self.fail(f"unknown key {k!r}", path + (k,))

    def resolve(self, rel_path: str) -> Path:
        p = Path(rel_path)
        return p if p.is_absolute() else self.base_dir / p


@dataclass(frozen=True)
class EngineConfig:
    design: object
    prior_dict: list
    mcmc_seed: int
    scenarios: tuple
    replicates: int
    sim_seed: int
    jobs: int
    output_dir: Path
    raw: dict


def load_config(path) -> EngineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", filename=str(path))
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"YAML parse error: {exc}",
            mark=(mark.line, mark.column) if mark else None,
            filename=str(path),
        )
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", filename=str(path))
    marks = _index_marks(node) if node is not None else {}
    ctx = _Ctx(data, marks, str(path), path.parent)
    return _build_engine_config(ctx)


def load_config_dict(data: dict, base_dir=".") -> EngineConfig:
    """Build a config from an in-memory mapping (the HTTP service's path)."""
    ctx = _Ctx(data, {}, None, Path(base_dir))
    return _build_engine_config(ctx)


def _build_engine_config(ctx: _Ctx) -> EngineConfig:
    ctx.check_keys(
        ctx.data, ("design", "prior", "mcmc", "scenarios", "simulation", "output"), ()
    )
    design_block = ctx.get(ctx.data, "design", (), types=dict)
    mcmc_block = ctx.get(ctx.data, "mcmc", (), default={}, types=dict)
    ctx.check_keys(mcmc_block, ("seed", "iterations", "burnin", "thin"), ("mcmc",))
    settings = McmcSettings(
        iterations=int(mcmc_block.get("iterations", 8000)),
        burnin=int(mcmc_block.get("burnin", 2000)),
        thin=int(mcmc_block.get("thin", 1)),
    )
    mcmc_seed = int(mcmc_block.get("seed", 0))
    prior_block = ctx.get(ctx.data, "prior", (), default=None)
    design = build_design(ctx, design_block, prior_block, settings)

    scenarios = []
    for i, blk in enumerate(ctx.get(ctx.data, "scenarios", (), default=[], types=list)):
        scenarios.append(_build_scenario(ctx, blk, design, ("scenarios", i)))
    sim_block = ctx.get(ctx.data, "simulation", (), default={}, types=dict)
    ctx.check_keys(sim_block, ("replicates", "seed", "jobs"), ("simulation",))
    out_block = ctx.get(ctx.data, "output", (), default={}, types=dict)
    ctx.check_keys(out_block, ("dir",), ("output",))
    return EngineConfig(
        design=design,
        prior_dict=design.prior.to_dict(),
        mcmc_seed=mcmc_seed,
        scenarios=tuple(scenarios),
        replicates=int(sim_block.get("replicates", 100)),
        sim_seed=int(sim_block.get("seed", 1000)),
        jobs=int(sim_block.get("jobs", 1)),
        output_dir=ctx.resolve(out_block.get("dir", "out")),
        raw=ctx.data,
    )


# ---------------------------------------------------------------------------
# Design blocks.


def _standardize_doses(ctx, raw, rule, path):
    raw = [float(d) for d in raw]
    if rule == "none":
        std = raw
    elif rule == "divide-by-max":
        m = max(raw)
        std = [d / m for d in raw]
    elif rule == "center-log":
        m = max(raw)
        std = [math.log(d / m) for d in raw]
    else:
        ctx.fail(f"unknown dose standardization {rule!r}", path)
    if any(b <= a for a, b in zip(std, std[1:])):
        ctx.fail("doses must be strictly increasing", path)
    return tuple(std), tuple(raw)


def _prior_from_block(ctx, prior_block, default: PriorSpec, expected_names, path=("prior",)):
    if prior_block is None:
        return default
    try:
        prior = PriorSpec.from_dict(prior_block)
    except Exception as exc:
        ctx.fail(f"invalid prior block: {exc}", path)
    if tuple(prior.names) != tuple(expected_names):
        ctx.fail(
            f"prior names {list(prior.names)} must match the model parameters "
            f"{list(expected_names)} in order",
            path,
        )
    return prior


def build_design(ctx: _Ctx, blk: dict, prior_block, settings: McmcSettings):
    kind = ctx.get(blk, "kind", ("design",), types=str)
    builder = {
        "combo": _build_combo,
        "efftox": _build_efftox,
        "covariate-efftox": _build_covariate,
        "ttb": _build_ttb,
        "schedule": _build_schedule,
    }.get(kind)
    if builder is None:
        ctx.fail(f"unknown design kind {kind!r}", ("design", "kind"))
    return builder(ctx, blk, prior_block, settings)


def _build_combo(ctx, blk, prior_block, settings):
    path = ("design",)
    ctx.check_keys(
        blk,
        (
            "kind", "line", "target", "stage1_n", "n_max", "cohort_size",
            "stop_cutoff", "contour_grid", "contour_tol", "fisher_draws",
        ),
        path,
    )
    line_blk = ctx.get(blk, "line", path, types=dict)
    ctx.check_keys(
        line_blk, ("start", "end", "initial_fractions", "expansion_fractions"),
        path + ("line",),
    )
    try:
        line = cb.DiagonalLine.from_fractions(
            tuple(float(v) for v in ctx.get(line_blk, "start", path + ("line",))),
            tuple(float(v) for v in ctx.get(line_blk, "end", path + ("line",))),
            [float(v) for v in ctx.get(line_blk, "initial_fractions", path + ("line",))],
            [float(v) for v in line_blk.get("expansion_fractions", [])],
        )
    except Exception as exc:
        ctx.fail(f"invalid line: {exc}", path + ("line",))
    prior = _prior_from_block(ctx, prior_block, cb.ComboModel().default_prior(), cb.PARAM_NAMES)
    try:
        return ComboDesign(
            line=line,
            target=float(ctx.get(blk, "target", path)),
            prior=prior,
            stage1_n=int(blk.get("stage1_n", 20)),
            n_max=int(blk.get("n_max", 60)),
            cohort_size=int(blk.get("cohort_size", 2)),
            stop_cutoff=float(blk.get("stop_cutoff", 0.80)),
            contour_grid=int(blk.get("contour_grid", 101)),
            contour_tol=float(blk.get("contour_tol", 1e-4)),
            fisher_draws=int(blk.get("fisher_draws", 200)),
            mcmc=settings,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path)


def _tradeoff_from(ctx, blk, path):
    pairs = ctx.get(blk, "tradeoff_pairs", path, types=list)
    try:
        return et.fit_tradeoff_contour([(float(a), float(b)) for a, b in pairs])
    except Exception as exc:
        ctx.fail(f"invalid trade-off pairs: {exc}", path + ("tradeoff_pairs",))


def _build_efftox(ctx, blk, prior_block, settings):
    path = ("design",)
    ctx.check_keys(
        blk,
        (
            "kind", "doses", "dose_standardization", "model", "limits",
            "tradeoff_pairs", "cohort_size", "n_max", "start_index",
        ),
        path,
    )
    model_blk = ctx.get(blk, "model", path, default={}, types=dict)
    ctx.check_keys(
        model_blk,
        ("outcome", "link", "joint", "quadratic_efficacy", "quadratic_toxicity"),
        path + ("model",),
    )
    try:
        model = et.EfftoxModel(
            kind=model_blk.get("outcome", "bivariate"),
            link=model_blk.get("link", "probit"),
            joint=model_blk.get("joint", "gumbel"),
            quadratic_efficacy=bool(model_blk.get("quadratic_efficacy", True)),
            quadratic_toxicity=bool(model_blk.get("quadratic_toxicity", False)),
        )
    except ValueError as exc:
        ctx.fail(str(exc), path + ("model",))
    doses, raw = _standardize_doses(
        ctx,
        ctx.get(blk, "doses", path, types=list),
        blk.get("dose_standardization", "divide-by-max"),
        path + ("doses",),
    )
    lim_blk = ctx.get(blk, "limits", path, types=dict)
    ctx.check_keys(lim_blk, ("eff_floor", "tox_ceiling", "p_eff", "p_tox"), path + ("limits",))
    try:
        limits = et.AcceptabilityLimits(
            eff_floor=float(ctx.get(lim_blk, "eff_floor", path + ("limits",))),
            tox_ceiling=float(ctx.get(lim_blk, "tox_ceiling", path + ("limits",))),
            p_eff=float(lim_blk.get("p_eff", 0.9)),
            p_tox=float(lim_blk.get("p_tox", 0.9)),
        )
    except ValueError as exc:
        ctx.fail(str(exc), path + ("limits",))
    contour = _tradeoff_from(ctx, blk, path)
    prior = _prior_from_block(ctx, prior_block, model.default_prior(), model.param_names)
    try:
        return EfftoxDesign(
            model=model,
            doses=doses,
            raw_doses=raw,
            limits=limits,
            contour=contour,
            prior=prior,
            n_max=int(blk.get("n_max", 36)),
            cohort_size=int(blk.get("cohort_size", 3)),
            start_index=int(blk.get("start_index", 0)),
            mcmc=settings,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path)


def load_historical_csv(path: Path) -> cov.HistoricalDataset:
    """Delimited historical records: treatment, z1..zq, eff, tox."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        zcols = [c for c in cols if c.startswith("z")]
        required = {"treatment", "eff", "tox"}
        if not required.issubset(cols):
            raise ConfigError(
                f"historical file needs columns treatment, z*, eff, tox; got {cols}",
                filename=str(path),
            )
        records = []
        max_t = -1
        for row in reader:
            t = int(row["treatment"])
            max_t = max(max_t, t)
            z = tuple(float(row[c]) for c in zcols)
            records.append((t, z, (int(row["eff"]), int(row["tox"]))))
    return cov.HistoricalDataset(tuple(records), max_t + 1)


def _build_covariate(ctx, blk, prior_block, settings):
    path = ("design",)
    ctx.check_keys(
        blk,
        (
            "kind", "doses", "dose_standardization", "model", "historical_data",
            "representative_covariates", "elicited_eff_floors",
            "elicited_tox_ceilings", "cutoffs", "tradeoff_pairs", "n_max",
            "start_index", "historical_mcmc",
        ),
        path,
    )
    doses, raw = _standardize_doses(
        ctx,
        ctx.get(blk, "doses", path, types=list),
        blk.get("dose_standardization", "divide-by-max"),
        path + ("doses",),
    )
    hist_path = ctx.resolve(ctx.get(blk, "historical_data", path, types=str))
    if not hist_path.exists():
        ctx.fail(f"historical data file not found: {hist_path}", path + ("historical_data",))
    hist = load_historical_csv(hist_path)
    model_blk = blk.get("model", {})
    ctx.check_keys(
        model_blk, ("link", "quadratic_efficacy", "quadratic_toxicity"), path + ("model",)
    )
    model_kw = dict(
        link=model_blk.get("link", "probit"),
        quadratic_efficacy=bool(model_blk.get("quadratic_efficacy", False)),
        quadratic_toxicity=bool(model_blk.get("quadratic_toxicity", False)),
    )
    hm_blk = blk.get("historical_mcmc", {})
    ctx.check_keys(hm_blk, ("seed", "iterations", "burnin"), path + ("historical_mcmc",))
    hist_cfg = McmcConfig(
        seed=int(hm_blk.get("seed", 2008)),
        iterations=int(hm_blk.get("iterations", 4000)),
        burnin=int(hm_blk.get("burnin", 1500)),
    )
    hist_sample, hist_model = cov.fit_historical(hist, config=hist_cfg, **model_kw)
    reps = [tuple(float(v) for v in z) for z in ctx.get(blk, "representative_covariates", path, types=list)]
    try:
        bounds, _ = cov.fit_bounding_function(
            reps,
            [float(v) for v in ctx.get(blk, "elicited_eff_floors", path, types=list)],
            [float(v) for v in ctx.get(blk, "elicited_tox_ceilings", path, types=list)],
            hist_sample,
            hist_model,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path + ("elicited_eff_floors",))
    cut_blk = blk.get("cutoffs", {})
    ctx.check_keys(cut_blk, ("p_eff", "p_tox"), path + ("cutoffs",))
    contour = _tradeoff_from(ctx, blk, path)
    model = hist_model.joint()
    prior = _prior_from_block(ctx, prior_block, model.default_prior(), model.param_names)
    try:
        return CovariateEfftoxDesign(
            model=model,
            historical=hist,
            bounds=bounds,
            representative_z=tuple(reps),
            doses=doses,
            contour=contour,
            prior=prior,
            p_eff=float(cut_blk.get("p_eff", 0.9)),
            p_tox=float(cut_blk.get("p_tox", 0.9)),
            n_max=int(blk.get("n_max", 36)),
            start_index=int(blk.get("start_index", 0)),
            mcmc=settings,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path)


def load_profile(data: dict) -> tb.ToxicityProfile:
    return tb.ToxicityProfile.from_dict(data)


def _build_ttb(ctx, blk, prior_block, settings):
    path = ("design",)
    ctx.check_keys(
        blk,
        (
            "kind", "profile", "profile_file", "doses", "dose_standardization",
            "ttb_target", "elicitation_file", "cohort_size", "n_max",
            "start_index", "stop_rule", "qmc_points",
        ),
        path,
    )
    if "profile_file" in blk:
        ppath = ctx.resolve(blk["profile_file"])
        if not ppath.exists():
            ctx.fail(f"profile file not found: {ppath}", path + ("profile_file",))
        prof_data = yaml.safe_load(ppath.read_text())
    else:
        prof_data = ctx.get(blk, "profile", path, types=dict)
    try:
        profile = load_profile(prof_data)
    except ValueError as exc:
        ctx.fail(f"invalid toxicity profile: {exc}", path + ("profile",))
    model = tb.TtbModel(profile, qmc_points=int(blk.get("qmc_points", 128)))
    doses, raw = _standardize_doses(
        ctx,
        ctx.get(blk, "doses", path, types=list),
        blk.get("dose_standardization", "center-log"),
        path + ("doses",),
    )
    if "ttb_target" in blk:
        target = float(blk["ttb_target"])
    elif "elicitation_file" in blk:
        epath = ctx.resolve(blk["elicitation_file"])
        if not epath.exists():
            ctx.fail(f"elicitation file not found: {epath}", path + ("elicitation_file",))
        edata = yaml.safe_load(epath.read_text())
        cohorts = [
            ([tuple(p) for p in c["patients"]], c["decision"]) for c in edata["cohorts"]
        ]
        try:
            target = tb.elicit_target(cohorts, profile)
        except ValueError as exc:
            ctx.fail(str(exc), path + ("elicitation_file",))
    else:
        ctx.fail("one of ttb_target or elicitation_file is required", path)
    stop_blk = blk.get("stop_rule", {})
    ctx.check_keys(stop_blk, ("enabled", "kappa", "cutoff"), path + ("stop_rule",))
    prior = _prior_from_block(ctx, prior_block, model.default_prior(), model.param_names)
    try:
        return TtbDesign(
            model=model,
            doses=doses,
            raw_doses=raw,
            ttb_target=target,
            prior=prior,
            n_max=int(blk.get("n_max", 36)),
            cohort_size=int(blk.get("cohort_size", 3)),
            start_index=int(blk.get("start_index", 0)),
            stop_enabled=bool(stop_blk.get("enabled", False)),
            stop_kappa=float(stop_blk.get("kappa", 1.5)),
            stop_cutoff=float(stop_blk.get("cutoff", 0.80)),
            mcmc=settings,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path)


def _build_schedule(ctx, blk, prior_block, settings):
    path = ("design",)
    ctx.check_keys(
        blk,
        (
            "kind", "schedules", "pads", "t_star", "target", "f_max", "p_cut",
            "start_pair", "hazard_family", "n_max", "prior_means",
        ),
        path,
    )
    try:
        grid = sc.ScheduleGrid(
            schedules=tuple(
                tuple(float(t) for t in s) for s in ctx.get(blk, "schedules", path, types=list)
            ),
            pads=tuple(float(d) for d in ctx.get(blk, "pads", path, types=list)),
            t_star=float(ctx.get(blk, "t_star", path)),
            target=float(ctx.get(blk, "target", path)),
            f_max=float(ctx.get(blk, "f_max", path)),
            p_cut=float(blk.get("p_cut", 0.9)),
            start_pair=tuple(int(v) for v in blk.get("start_pair", [0, 0])),
        )
        model = sc.SchedModel(grid, blk.get("hazard_family", "triangular"))
    except ValueError as exc:
        ctx.fail(str(exc), path)
    pm = blk.get("prior_means", {})
    ctx.check_keys(pm, ("area", "rise", "fall"), path + ("prior_means",))
    default = model.default_prior(
        area_mean=float(pm.get("area", 0.3)),
        rise_mean=float(pm.get("rise", 10.0)),
        fall_mean=float(pm.get("fall", 10.0)),
    )
    prior = _prior_from_block(ctx, prior_block, default, model.param_names)
    try:
        return ScheduleDesign(
            model=model,
            prior=prior,
            n_max=int(blk.get("n_max", 36)),
            mcmc=settings,
        )
    except ValueError as exc:
        ctx.fail(str(exc), path)


# ---------------------------------------------------------------------------
# Scenario blocks.


def _build_scenario(ctx, blk, design, path) -> Scenario:
    if not isinstance(blk, dict):
        ctx.fail("scenario must be a mapping", path)
    ctx.check_keys(
        blk,
        (
            "name", "accrual_rate", "eval_window", "t_max", "true_params",
            "dose_outcomes", "covariate_pool", "interventions",
        ),
        path,
    )
    kw = dict(
        kind=design.kind,
        accrual_rate=float(ctx.get(blk, "accrual_rate", path)),
        eval_window=float(blk.get("eval_window", 1.0)),
        t_max=float(blk.get("t_max", math.inf)),
        name=str(blk.get("name", f"scenario{path[-1]}")),
    )
    if "true_params" in blk:
        kw["true_params"] = tuple(float(v) for v in blk["true_params"])
    if "dose_outcomes" in blk:
        kw["dose_outcomes"] = tuple(dict(d) for d in blk["dose_outcomes"])
    if "covariate_pool" in blk:
        kw["covariate_pool"] = tuple(tuple(float(v) for v in z) for z in blk["covariate_pool"])
    if "interventions" in blk:
        kw["interventions"] = {
            int(k): [tuple(int(x) for x in m) for m in v]
            for k, v in blk["interventions"].items()
        }
    needed = {
        "combo": ("true_params",),
        "ttb": ("true_params",),
        "schedule": ("true_params",),
        "efftox": ("dose_outcomes",),
        "covariate-efftox": ("true_params", "covariate_pool"),
    }[design.kind]
    for req in needed:
        if req not in kw or kw.get(req) is None:
            ctx.fail(f"scenario for {design.kind} needs {req!r}", path)
    try:
        return Scenario(**kw)
    except ValueError as exc:
        ctx.fail(str(exc), path)

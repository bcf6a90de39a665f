"""Command-line interface.

Subcommands: ``simulate`` (operating characteristics), ``conduct-step``
(next-treatment recommendation from an event log), ``fit-prior`` (penalized
least-squares prior solver), ``contour`` (dump contour traces), ``validate``
(audit an event log).  Exit codes: 0 ok, 2 configuration error, 3 data
error, 4 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import combo as cb
from . import efftox as et
from .config import ConfigError, EngineConfig, load_config
from .designs import conduct_recommendation, posterior_summary
from .events import EventLogError, TrialState
from .mcmc import DegenerateChainError
from .priors import ConfigurationError
from .simulate import run_replicates, validate_trial

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _load_config_with_override(args) -> EngineConfig:
    cfg = load_config(args.config)
    if getattr(args, "design", None):
        # a design file replaces the config's design/prior blocks
        override = yaml.safe_load(Path(args.design).read_text())
        raw = dict(cfg.raw)
        raw["design"] = override.get("design", override)
        if "prior" in override:
            raw["prior"] = override["prior"]
        from .config import load_config_dict

        cfg = load_config_dict(raw, base_dir=Path(args.config).parent)
    return cfg


def _read_log(path) -> TrialState:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise EventLogError(f"cannot read event log: {exc}")
    return TrialState.from_jsonl(text)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    cfg = _load_config_with_override(args)
    reps = args.reps if args.reps is not None else cfg.replicates
    seed = args.seed if args.seed is not None else cfg.sim_seed
    out_dir = Path(args.out) if args.out else cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    if not cfg.scenarios:
        raise ConfigError("simulate needs at least one scenario")
    report = {"design_kind": cfg.design.kind, "replicates": reps, "seed": seed, "scenarios": {}}
    for scn in cfg.scenarios:
        oc, _ = run_replicates(cfg.design, scn, reps, seed, cfg.jobs)
        report["scenarios"][scn.name] = oc.to_dict()
        rows = sorted(set(oc.selection_freq) | set(oc.mean_patients))
        with open(out_dir / f"oc_{scn.name}.csv", "w") as fh:
            fh.write("treatment\tselection_freq\tmean_patients\n")
            for t in rows:
                fh.write(
                    f"{t}\t{_fmt(oc.selection_freq.get(t, 0.0))}\t"
                    f"{_fmt(oc.mean_patients.get(t, 0.0))}\n"
                )
            fh.write(f"(none)\t{_fmt(oc.no_selection_freq)}\t{_fmt(0.0)}\n")
        with open(out_dir / f"selection_{scn.name}.csv", "w") as fh:
            fh.write("treatment,frequency\n")
            for t in rows:
                fh.write(f"{t},{_fmt(oc.selection_freq.get(t, 0.0))}\n")
            fh.write(f"(none),{_fmt(oc.no_selection_freq)}\n")
    if cfg.design.kind in ("efftox", "covariate-efftox"):
        from .designs import _contour_trace

        trace = _contour_trace(cfg.design.contour)
        (out_dir / "contour_design.json").write_text(json.dumps(trace, sort_keys=True))
    (out_dir / "summary.json").write_text(json.dumps(report, sort_keys=True, indent=2))
    print(f"wrote operating characteristics for {len(cfg.scenarios)} scenario(s) to {out_dir}")
    return EXIT_OK


def cmd_conduct_step(args) -> int:
    cfg = _load_config_with_override(args)
    state = _read_log(args.log)
    z = tuple(float(v) for v in args.z.split(",")) if args.z else None
    seed = args.seed if args.seed is not None else cfg.mcmc_seed
    rec = conduct_recommendation(cfg.design, state, seed, z=z)
    print(f"action: {rec.action}")
    if rec.treatment is not None:
        print(f"treatment: {json.dumps(rec.treatment, sort_keys=True)}")
    if rec.reason:
        print(f"reason: {rec.reason}")
    print(f"outcomes-used: {rec.n_outcomes}")
    if args.out:
        Path(args.out).write_text(json.dumps(rec.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def cmd_fit_prior(args) -> int:
    cfg = _load_config_with_override(args)
    if cfg.design.kind not in ("efftox",):
        raise ConfigError("fit-prior applies to the efficacy-toxicity design")
    moments = yaml.safe_load(Path(args.moments).read_text())
    for key in ("doses", "means", "sds"):
        if key not in moments:
            raise ConfigError(f"moments file missing {key!r}")
    prior, achieved, fitted = et.solve_prior(
        cfg.design.model,
        [float(d) for d in moments["doses"]],
        {k: [float(v) for v in vs] for k, vs in moments["means"].items()},
        {k: [float(v) for v in vs] for k, vs in moments["sds"].items()},
        penalty=float(moments.get("penalty", 0.1)),
        maxiter=int(moments.get("maxiter", 2000)),
    )
    block = {
        "prior": prior.to_dict(),
        "achieved_objective": achieved,
        "fitted_moments": fitted,
    }
    text = yaml.safe_dump(block, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_contour(args) -> int:
    cfg = _load_config_with_override(args)
    design = cfg.design
    seed = args.seed if args.seed is not None else cfg.mcmc_seed
    if design.kind == "combo":
        state = _read_log(args.log) if args.log else TrialState()
        from .designs import fit_posterior

        if state.n_outcomes:
            sample = fit_posterior(design, state, seed)
        else:
            from .mcmc import McmcConfig, sample_posterior
            from .combo import ComboModel

            sample = sample_posterior(
                ComboModel().compiled([]), None, design.prior,
                McmcConfig(seed=seed, iterations=design.mcmc.iterations, burnin=design.mcmc.burnin),
            )
        contour = cb.estimate_contour(sample, design.target, design.contour_grid, design.contour_tol)
        payload = {
            "target": design.target,
            "vertices": [list(v) for v in contour.vertices],
            "tolerance": contour.tolerance,
        }
    elif design.kind in ("efftox", "covariate-efftox"):
        from .designs import _contour_trace

        payload = _contour_trace(design.contour)
        if args.log:
            state = _read_log(args.log)
            payload["posterior"] = posterior_summary(design, state, seed)
    else:
        raise ConfigError(f"the {design.kind} design has no contour to dump")
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config_with_override(args)
    state = _read_log(args.log)
    seed = args.seed if args.seed is not None else cfg.mcmc_seed
    violations = validate_trial(cfg.design, state, seed)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_DATA
    print(f"audit clean: {state.n_assigned} assignments, {state.n_outcomes} outcomes")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosefind",
        description="Bayesian adaptive dose-finding: simulation and trial conduct",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, log_required=False, needs_moments=False):
        p.add_argument("--config", required=True, help="engine config file (YAML)")
        p.add_argument("--design", help="design file overriding the config's design block")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--out", help="output file or directory")
        if log_required is not None:
            p.add_argument(
                "--log", required=log_required, help="trial event log (JSON lines)"
            )

    p = sub.add_parser("simulate", help="estimate operating characteristics")
    common(p, log_required=None)
    p.add_argument("--reps", type=int, help="replicate count override")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("conduct-step", help="recommend the next treatment from a log")
    common(p, log_required=True)
    p.add_argument("--z", help="next patient's covariates, comma-separated")
    p.set_defaults(func=cmd_conduct_step)

    p = sub.add_parser("fit-prior", help="solve prior hyperparameters from elicited moments")
    common(p, log_required=None)
    p.add_argument("--moments", required=True, help="elicited moments file (YAML)")
    p.set_defaults(func=cmd_fit_prior)

    p = sub.add_parser("contour", help="dump contour traces")
    common(p, log_required=False)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("validate", help="audit an event log against the design rules")
    common(p, log_required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EventLogError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateChainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

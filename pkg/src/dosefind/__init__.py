"""Bayesian adaptive dose-finding designs.

Model-based, outcome-adaptive early-phase trial designs with a shared
posterior engine, a Monte-Carlo trial simulator for operating
characteristics, a command-line interface, and an HTTP conduct service.

Design families: two-agent combination surfaces, efficacy-toxicity
trade-off (with and without patient covariates), severity-weighted ordinal
toxicity burden, and joint schedule-dose optimization on time to toxicity.
"""

from .priors import ConfigurationError, PriorEntry, PriorSpec
from .mcmc import (
    CompiledModel,
    DegenerateChainError,
    McmcConfig,
    PosteriorSample,
    posterior_mean,
    posterior_tail_prob,
    sample_posterior,
)
from .events import Event, EventLogError, TrialState
from .designs import (
    ComboDesign,
    CovariateEfftoxDesign,
    EfftoxDesign,
    McmcSettings,
    Recommendation,
    ScheduleDesign,
    TtbDesign,
    final_selection,
    posterior_summary,
    recommend,
)
from .simulate import (
    OperatingCharacteristics,
    Scenario,
    look_ahead,
    run_replicates,
    run_trial,
    validate_trial,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "PriorEntry",
    "PriorSpec",
    "CompiledModel",
    "DegenerateChainError",
    "McmcConfig",
    "PosteriorSample",
    "posterior_mean",
    "posterior_tail_prob",
    "sample_posterior",
    "Event",
    "EventLogError",
    "TrialState",
    "ComboDesign",
    "CovariateEfftoxDesign",
    "EfftoxDesign",
    "McmcSettings",
    "Recommendation",
    "ScheduleDesign",
    "TtbDesign",
    "final_selection",
    "posterior_summary",
    "recommend",
    "OperatingCharacteristics",
    "Scenario",
    "look_ahead",
    "run_replicates",
    "run_trial",
    "validate_trial",
    "__version__",
]

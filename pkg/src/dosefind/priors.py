"""Prior specifications for design model parameters.

A :class:`PriorSpec` is an ordered list of independent univariate priors, one
per model parameter.  It knows how to evaluate the joint log density, report
analytic means (used as chain start points), and draw from itself (used by the
prior-moment solver and by prior-predictive checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

__all__ = ["PriorEntry", "PriorSpec", "ConfigurationError"]

_FAMILIES = ("gamma", "normal", "truncated-normal", "uniform")


class ConfigurationError(ValueError):
    """A design or engine configuration is internally inconsistent."""


@dataclass(frozen=True)
class PriorEntry:
    """One parameter's prior: family, hyperparameters and support bounds.

    Families and their hyperparameters:

    - ``gamma``: ``(shape, rate)``, support ``(0, inf)``
    - ``normal``: ``(mean, sd)``, support ``(-inf, inf)``
    - ``truncated-normal``: ``(mean, sd)`` restricted to ``[lower, upper]``
    - ``uniform``: ``(lower, upper)``
    """

    name: str
    family: str
    params: tuple[float, ...]
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigurationError(f"unknown prior family {self.family!r}")
        if self.family == "gamma":
            shape, rate = self.params
            if shape <= 0 or rate <= 0:
                raise ConfigurationError(
                    f"{self.name}: gamma shape/rate must be > 0, got {self.params}"
                )
            object.__setattr__(self, "lower", max(self.lower, 0.0))
        elif self.family == "normal":
            _, sd = self.params
            if sd <= 0:
                raise ConfigurationError(f"{self.name}: normal sd must be > 0")
        elif self.family == "truncated-normal":
            _, sd = self.params
            if sd <= 0:
                raise ConfigurationError(f"{self.name}: truncated-normal sd must be > 0")
            if not self.lower < self.upper:
                raise ConfigurationError(
                    f"{self.name}: truncated-normal requires lower < upper"
                )
        elif self.family == "uniform":
            lo, hi = self.params
            if not lo < hi:
                raise ConfigurationError(f"{self.name}: uniform requires lower < upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    def log_density(self, x: float) -> float:
        """Log prior density at ``x``; ``-inf`` outside the support."""
        if x < self.lower or x > self.upper:
            return -math.inf
        if self.family == "gamma":
            shape, rate = self.params
            if x <= 0.0:
                return -math.inf
            return (
                shape * math.log(rate)
                - math.lgamma(shape)
                + (shape - 1.0) * math.log(x)
                - rate * x
            )
        if self.family == "normal":
            mean, sd = self.params
            z = (x - mean) / sd
            return -0.5 * z * z - math.log(sd) - 0.5 * math.log(2.0 * math.pi)
        if self.family == "truncated-normal":
            mean, sd = self.params
            z = (x - mean) / sd
            mass = stats.norm.cdf(self.upper, mean, sd) - stats.norm.cdf(
                self.lower, mean, sd
            )
            return (
                -0.5 * z * z
                - math.log(sd)
                - 0.5 * math.log(2.0 * math.pi)
                - math.log(mass)
            )
        lo, hi = self.params
        return -math.log(hi - lo)

    def mean(self) -> float:
        """Analytic prior mean (used as the default chain start)."""
        if self.family == "gamma":
            shape, rate = self.params
            return shape / rate
        if self.family == "normal":
            return self.params[0]
        if self.family == "truncated-normal":
            mean, sd = self.params
            a = (self.lower - mean) / sd
            b = (self.upper - mean) / sd
            num = _phi(a) - _phi(b)
            den = special.ndtr(b) - special.ndtr(a)
            return mean + sd * num / den
        lo, hi = self.params
        return 0.5 * (lo + hi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "gamma":
            shape, rate = self.params
            return rng.gamma(shape, 1.0 / rate, size)
        if self.family == "normal":
            mean, sd = self.params
            return rng.normal(mean, sd, size)
        if self.family == "truncated-normal":
            mean, sd = self.params
            a = special.ndtr((self.lower - mean) / sd)
            b = special.ndtr((self.upper - mean) / sd)
            u = rng.uniform(a, b, size)
            return mean + sd * special.ndtri(u)
        lo, hi = self.params
        return rng.uniform(lo, hi, size)


def _phi(z: float) -> float:
    if not math.isfinite(z):
        return 0.0
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Ordered joint prior over a model's named parameter vector."""

    entries: tuple[PriorEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate prior parameter names in {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def log_prior(self, theta: np.ndarray) -> float:
        """Sum of per-parameter log densities; ``-inf`` if any coordinate is
        outside its support."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ConfigurationError(
                f"theta has shape {theta.shape}, prior expects ({self.dim},)"
            )
        total = 0.0
        for entry, x in zip(self.entries, theta):
            lp = entry.log_density(float(x))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def log_prior_named(self, theta: dict[str, float]) -> float:
        """As :meth:`log_prior` but for a name-keyed draw; names must match."""
        if set(theta) != set(self.names):
            raise ConfigurationError(
                f"draw names {sorted(theta)} do not match prior names {sorted(self.names)}"
            )
        return self.log_prior(np.array([theta[n] for n in self.names]))

    def means(self) -> np.ndarray:
        return np.array([e.mean() for e in self.entries])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([e.lower for e in self.entries])
        hi = np.array([e.upper for e in self.entries])
        return lo, hi

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Independent draws, shape ``(size, dim)``."""
        return np.column_stack([e.sample(rng, size) for e in self.entries])

    def to_dict(self) -> list[dict]:
        out = []
        for e in self.entries:
            d = {"name": e.name, "family": e.family, "params": list(e.params)}
            if math.isfinite(e.lower):
                d["lower"] = e.lower
            if math.isfinite(e.upper):
                d["upper"] = e.upper
            out.append(d)
        return out

    @classmethod
    def from_dict(cls, items: list[dict]) -> "PriorSpec":
        entries = []
        for d in items:
            entries.append(
                PriorEntry(
                    name=d["name"],
                    family=d["family"],
                    params=tuple(float(p) for p in d["params"]),
                    lower=float(d.get("lower", -math.inf)),
                    upper=float(d.get("upper", math.inf)),
                )
            )
        return cls(tuple(entries))

"""Seeded posterior sampling and posterior functionals.

The sampler is a component-wise random-walk Metropolis with per-coordinate
step scales adapted during burn-in toward a target acceptance rate, then
frozen so the kept portion is a valid Markov chain.  Identical
``(model, data, prior, config)`` inputs reproduce the identical chain
bit-for-bit: all randomness is pre-generated from the configured seed.

Models come in two flavours:

- a plain Python callable ``loglik(theta, data) -> float``;
- a :class:`CompiledModel` wrapping a numba-jitted kernel plus packed data
  arrays, used on hot paths (trial simulation).  Both flavours run the same
  algorithm; the kernels are unit-tested pointwise against the Python
  likelihoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .priors import ConfigurationError, PriorSpec

__all__ = [
    "McmcConfig",
    "PosteriorSample",
    "CompiledModel",
    "DegenerateChainError",
    "sample_posterior",
    "posterior_mean",
    "posterior_tail_prob",
]


class DegenerateChainError(RuntimeError):
    """No moves were accepted after burn-in; the chain carries no information."""


@dataclass(frozen=True)
class McmcConfig:
    """Chain configuration. ``iterations`` counts post-burn-in sweeps kept
    before thinning is applied, so the total sweep count is
    ``burnin + iterations * thin``."""

    seed: object = 0
    iterations: int = 8000
    burnin: int = 2000
    thin: int = 1
    step_scales: Sequence[float] | None = None
    adapt_every: int = 50
    target_accept: float = 0.3
    start_fallback: Sequence[float] | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.burnin < 0 or self.thin < 1:
            raise ConfigurationError("iterations >= 1, burnin >= 0, thin >= 1 required")

    def total_sweeps(self) -> int:
        return self.burnin + self.iterations * self.thin


@dataclass(frozen=True)
class CompiledModel:
    """A numba log-likelihood kernel ``kernel(theta, args) -> float`` with its
    packed argument tuple, plus the equivalent Python callable and data."""

    kernel: object
    args: tuple
    python_fn: Callable | None = None
    python_data: object = None


@dataclass(frozen=True)
class PosteriorSample:
    """An ordered, post-burn-in, thinned chain of parameter draws."""

    names: tuple[str, ...]
    draws: np.ndarray
    seed: object
    chain_length: int
    acceptance_rate: float
    step_scales: np.ndarray
    ess: np.ndarray

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def draw(self, i: int) -> dict[str, float]:
        """The i-th draw as a name-keyed parameter vector."""
        return dict(zip(self.names, self.draws[i]))

    @classmethod
    def degenerate(cls, names, theta) -> "PosteriorSample":
        """A one-draw pseudo-sample; handy for tests and worked examples."""
        draws = np.asarray(theta, dtype=float).reshape(1, -1)
        return cls(
            names=tuple(names),
            draws=draws,
            seed=None,
            chain_length=1,
            acceptance_rate=1.0,
            step_scales=np.ones(draws.shape[1]),
            ess=np.ones(draws.shape[1]),
        )


def _rng_from_seed(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(ss))


def _run_chain_py(logpost, x0, lo, hi, scales, config: McmcConfig, normals, logu):
    d = x0.size
    n_sweeps = config.total_sweeps()
    kept = np.empty((config.iterations, d))
    x = x0.copy()
    lp = logpost(x)
    if math.isnan(lp):
        raise ValueError("model returned NaN at the chain start point")
    if lp == -math.inf:
        raise ConfigurationError("log posterior is -inf at the chain start point")
    window_acc = np.zeros(d)
    accepted_kept = 0
    kept_idx = 0
    for i in range(n_sweeps):
        for j in range(d):
            old = x[j]
            x[j] = old + scales[j] * normals[i, j]
            lp_new = logpost(x)
            if math.isnan(lp_new):
                raise ValueError(f"model returned NaN at sweep {i}, coordinate {j}")
            if logu[i, j] < lp_new - lp:
                lp = lp_new
                window_acc[j] += 1.0
                if i >= config.burnin:
                    accepted_kept += 1
            else:
                x[j] = old
        if i < config.burnin and (i + 1) % config.adapt_every == 0:
            for j in range(d):
                rate = window_acc[j] / config.adapt_every
                scales[j] *= math.exp(rate - config.target_accept)
                scales[j] = min(max(scales[j], 1e-8), 1e8)
            window_acc[:] = 0.0
        if i >= config.burnin and (i - config.burnin) % config.thin == 0:
            kept[kept_idx] = x
            kept_idx += 1
    return kept, accepted_kept, scales


def sample_posterior(model, data, prior: PriorSpec, config: McmcConfig) -> PosteriorSample:
    """Draw a posterior chain for ``model`` under ``prior``.

    ``model`` is either ``loglik(theta, data) -> float`` or a
    :class:`CompiledModel`.  The likelihood may return ``-inf`` to reject a
    parameter vector (e.g. ordering or positive-definiteness constraints);
    it must not return NaN.
    """
    d = prior.dim
    lo, hi = prior.bounds()
    rng = _rng_from_seed(config.seed)
    n_sweeps = config.total_sweeps()
    normals = rng.standard_normal((n_sweeps, d))
    logu = np.log(rng.random((n_sweeps, d)))

    if config.step_scales is not None:
        scales = np.asarray(config.step_scales, dtype=float).copy()
        if scales.shape != (d,):
            raise ConfigurationError("step_scales length must match parameter count")
    else:
        scales = np.ones(d)

    x0 = prior.means()
    compiled = isinstance(model, CompiledModel)

    def py_loglik(theta):
        if compiled:
            return model.python_fn(theta, model.python_data)
        return model(theta, data)

    def logpost(theta):
        lp = prior.log_prior(theta)
        if lp == -math.inf:
            return -math.inf
        ll = py_loglik(theta)
        if math.isnan(ll):
            return math.nan
        return lp + ll

    if not np.isfinite(logpost(x0)):
        if config.start_fallback is None:
            raise ConfigurationError(
                "log posterior not finite at the prior mean and no start_fallback configured"
            )
        x0 = np.asarray(config.start_fallback, dtype=float).copy()
        if not np.isfinite(logpost(x0)):
            raise ConfigurationError("log posterior not finite at start_fallback")

    use_kernel = compiled and model.kernel is not None
    if use_kernel:
        from . import _kernels

        fam, p1, p2, plo, phi, logz = _kernels.pack_prior(prior)
        kept, accepted_kept, scales = _kernels.run_chain(
            model.kernel,
            model.args,
            fam,
            p1,
            p2,
            plo,
            phi,
            logz,
            x0,
            scales,
            n_sweeps,
            config.burnin,
            config.thin,
            config.adapt_every,
            config.target_accept,
            normals,
            logu,
            config.iterations,
        )
        if accepted_kept < 0:
            raise ValueError("model returned NaN during sampling")
    else:
        kept, accepted_kept, scales = _run_chain_py(
            logpost, x0, lo, hi, scales, config, normals, logu
        )

    if accepted_kept == 0:
        raise DegenerateChainError(
            "zero accepted moves after burn-in; check step scales and model"
        )
    if np.any(kept < lo) or np.any(kept > hi):
        raise AssertionError("posterior draw outside prior support")

    acc_rate = accepted_kept / (config.iterations * config.thin * d)
    return PosteriorSample(
        names=prior.names,
        draws=kept,
        seed=config.seed,
        chain_length=kept.shape[0],
        acceptance_rate=acc_rate,
        step_scales=scales,
        ess=np.array([_ess(kept[:, j]) for j in range(d)]),
    )


def _ess(x: np.ndarray) -> float:
    """Effective sample size from the initial positive autocorrelation sum."""
    n = x.size
    if n < 4:
        return float(n)
    y = x - x.mean()
    var = float(y @ y) / n
    if var == 0.0:
        return float(n)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, m)
    acf = np.fft.irfft(f * np.conj(f), m)[:n].real / (var * n)
    s = 1.0
    for k in range(1, n):
        if acf[k] <= 0.0:
            break
        s += 2.0 * acf[k]
    return float(min(n, n / s))


def _eval_g(g, sample: PosteriorSample) -> np.ndarray:
    values = np.asarray(g(sample.draws), dtype=float)
    if values.shape != (len(sample),):
        raise ConfigurationError(
            "g must map the (n, dim) draw matrix to an (n,) vector"
        )
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"g is not finite at draw index {int(bad[0])}")
    return values


def posterior_mean(g, sample: PosteriorSample) -> tuple[float, float]:
    """Monte-Carlo posterior mean of ``g`` with a batch-means standard error.

    ``g`` takes the full ``(n, dim)`` draw matrix and returns an ``(n,)``
    vector, one value per draw.
    """
    values = _eval_g(g, sample)
    n = values.size
    mean = float(values.mean())
    nb = max(2, int(math.isqrt(n)))
    bs = n // nb
    if bs < 1:
        return mean, float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    batches = values[: nb * bs].reshape(nb, bs).mean(axis=1)
    se = float(batches.std(ddof=1) / math.sqrt(nb))
    return mean, se


def posterior_tail_prob(g, c: float, direction: str, sample: PosteriorSample) -> float:
    """Fraction of draws with ``g(theta) > c`` (direction ``">"``) or
    ``g(theta) < c`` (direction ``"<"``)."""
    values = _eval_g(g, sample)
    if direction == ">":
        return float(np.mean(values > c))
    if direction == "<":
        return float(np.mean(values < c))
    raise ConfigurationError(f"direction must be '>' or '<', got {direction!r}")

"""Efficacy-toxicity trade-off dose-finding.

Outcome models (trinary 3- and 4-parameter, bivariate binary with Gumbel or
Gaussian-copula joint), the penalized-least-squares prior solver, posterior
dose-acceptability screening, and trade-off-contour desirability selection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .mcmc import PosteriorSample, posterior_mean, posterior_tail_prob
from .priors import ConfigurationError, PriorEntry, PriorSpec

__all__ = [
    "AcceptabilityLimits",
    "TradeoffContour",
    "EfftoxModel",
    "gumbel_joint",
    "gumbel_cells",
    "gaussian_copula_joint",
    "marginalize",
    "fit_tradeoff_contour",
    "ray_intersection",
    "desirability",
    "acceptable_set",
    "select_dose",
    "solve_prior",
    "AssociationError",
    "ElicitationError",
]

IDEAL = (1.0, 0.0)

# Trinary outcome codes.
OUT_N, OUT_E, OUT_T = 0, 1, 2


class AssociationError(ValueError):
    """A joint-distribution cell came out negative; bad association usage."""


class ElicitationError(ValueError):
    """Elicited inputs are internally inconsistent."""


def _inv_link(eta, link):
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        return special.expit(eta)
    if link == "probit":
        return special.ndtr(eta)
    raise ConfigurationError(f"link must be 'logit' or 'probit', got {link!r}")


# ---------------------------------------------------------------------------
# Joint distributions for bivariate binary outcomes.


def gumbel_joint(pi_e, pi_t, psi, a, b):
    """Cell probability Pr(Y_E=a, Y_T=b) under the Gumbel association model.

    The association factor is computed as tanh(psi/2), the overflow-safe form
    of (e^psi - 1)/(e^psi + 1).
    """
    pi_e = np.asarray(pi_e, dtype=float)
    pi_t = np.asarray(pi_t, dtype=float)
    if a not in (0, 1) or b not in (0, 1):
        raise ConfigurationError("outcome indicators a, b must be 0 or 1")
    base = (
        pi_e**a * (1.0 - pi_e) ** (1 - a) * pi_t**b * (1.0 - pi_t) ** (1 - b)
    )
    assoc = pi_e * (1.0 - pi_e) * pi_t * (1.0 - pi_t) * np.tanh(np.asarray(psi) / 2.0)
    cell = base + (-1.0) ** (a + b) * assoc
    if np.any(cell < -1e-12):
        raise AssociationError(
            f"negative cell probability for (a={a}, b={b}); check marginals/psi"
        )
    return cell if cell.ndim else float(cell)


def gumbel_cells(pi_e, pi_t, psi):
    """All four Gumbel cells, ordered (pi_00, pi_10, pi_01, pi_11)."""
    return tuple(gumbel_joint(pi_e, pi_t, psi, a, b) for a, b in ((0, 0), (1, 0), (0, 1), (1, 1)))


def _bvn_cdf(h, k, rho):
    from . import _kernels

    return _kernels.bvn_cdf(float(h), float(k), float(rho))


def gaussian_copula_joint(pi_e, pi_t, psi):
    """Four cells (pi_00, pi_10, pi_01, pi_11) under the Gaussian copula with
    correlation ``psi`` in (-1, 1)."""
    if not -1.0 < psi < 1.0:
        raise ConfigurationError("copula correlation must lie in (-1, 1)")
    pe = float(pi_e)
    pt = float(pi_t)
    h = special.ndtri(1.0 - pe) if 0.0 < pe < 1.0 else (math.inf if pe == 0.0 else -math.inf)
    k = special.ndtri(1.0 - pt) if 0.0 < pt < 1.0 else (math.inf if pt == 0.0 else -math.inf)
    if h == math.inf:
        p00 = 1.0 - pt
    elif k == math.inf:
        p00 = 1.0 - pe
    elif h == -math.inf or k == -math.inf:
        p00 = 0.0
    else:
        p00 = _bvn_cdf(h, k, psi)
    p10 = 1.0 - pt - p00
    p11 = pe + pt + p00 - 1.0
    p01 = 1.0 - pe - p00
    cells = np.array([p00, p10, p01, p11])
    if np.any(cells < -1e-7) or np.any(cells > 1.0 + 1e-7):
        raise AssociationError(f"copula produced an invalid cell vector {cells}")
    cells = np.clip(cells, 0.0, 1.0)
    return tuple(float(c) for c in cells)


def marginalize(cells):
    """Marginals from a cell vector ordered (pi_00, pi_10, pi_01, pi_11).

    Returns ``(pi_E, pi_T, pi_E_given_no_tox)`` where
    pi_E = pi_11 + pi_10, pi_T = pi_11 + pi_01 and the conditional is
    pi_10 / (1 - pi_T).
    """
    cells = np.asarray(cells, dtype=float)
    if cells.shape != (4,):
        raise ConfigurationError("cell vector must have exactly four entries")
    if np.any(cells < 0.0):
        raise ConfigurationError(f"negative cell in {cells}")
    if abs(cells.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"cells must sum to 1, got {cells.sum()!r}")
    p00, p10, p01, p11 = cells
    pi_e = p11 + p10
    pi_t = p11 + p01
    if pi_t >= 1.0:
        raise ZeroDivisionError("pi_T = 1; conditional efficacy undefined")
    return float(pi_e), float(pi_t), float(p10 / (1.0 - pi_t))


# ---------------------------------------------------------------------------
# Outcome models.


@dataclass(frozen=True)
class EfftoxModel:
    """A dose-outcome model: ``kind`` in {'trinary3', 'trinary4', 'bivariate'}.

    The bivariate model uses a quadratic efficacy linear term by default
    (allows non-monotone dose-efficacy curves) and a linear toxicity term;
    its last parameter is the association ``psi``.
    """

    kind: str
    link: str = "probit"
    joint: str = "gumbel"
    quadratic_efficacy: bool = True
    quadratic_toxicity: bool = False

    def __post_init__(self):
        if self.kind not in ("trinary3", "trinary4", "bivariate"):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.joint not in ("gumbel", "copula"):
            raise ConfigurationError(f"unknown joint {self.joint!r}")
        _inv_link(0.0, self.link)

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.kind == "trinary3":
            return ("beta0", "beta1", "beta2")
        if self.kind == "trinary4":
            return ("betaE0", "betaE1", "betaT0", "betaT1")
        names = ["betaE0", "betaE1"]
        if self.quadratic_efficacy:
            names.append("betaE2")
        names += ["betaT0", "betaT1"]
        if self.quadratic_toxicity:
            names.append("betaT2")
        names.append("psi")
        return tuple(names)

    @property
    def positive_params(self) -> tuple[str, ...]:
        if self.kind == "trinary3":
            return ("beta1", "beta2")
        if self.kind == "trinary4":
            return ("betaE1", "betaT1")
        return () if self.quadratic_toxicity else ("betaT1",)

    # -- probabilities -----------------------------------------------------

    def marginals(self, x: float, draws: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(pi_E, pi_T) per draw; ``draws`` has shape (n, dim)."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        if self.kind == "trinary3":
            b0, b1, b2 = draws[:, 0], draws[:, 1], draws[:, 2]
            pi_t = _inv_link(b0 + b2 * x, self.link)
            pi_e = _inv_link(b0 + b1 + b2 * x, self.link) - pi_t
            return pi_e, pi_t
        if self.kind == "trinary4":
            be0, be1, bt0, bt1 = (draws[:, i] for i in range(4))
            pi_t = _inv_link(bt0 + bt1 * x, self.link)
            p_cond = _inv_link(be0 + be1 * x, self.link)
            return p_cond * (1.0 - pi_t), pi_t
        i = 0
        eta_e = draws[:, 0] + draws[:, 1] * x
        i = 2
        if self.quadratic_efficacy:
            eta_e = eta_e + draws[:, 2] * x * x
            i = 3
        eta_t = draws[:, i] + draws[:, i + 1] * x
        if self.quadratic_toxicity:
            eta_t = eta_t + draws[:, i + 2] * x * x
        return _inv_link(eta_e, self.link), _inv_link(eta_t, self.link)

    def trinary_probs(self, x: float, theta) -> tuple[float, float]:
        """(pi_E, pi_T) at a single parameter vector (trinary variants)."""
        if self.kind == "bivariate":
            raise ConfigurationError("trinary_probs applies to trinary variants")
        theta = np.asarray(theta, dtype=float)
        if self.kind == "trinary3" and (theta[1] <= 0 or theta[2] <= 0):
            raise ConfigurationError("trinary3 requires beta1 > 0 and beta2 > 0")
        pi_e, pi_t = self.marginals(x, theta.reshape(1, -1))
        return float(pi_e[0]), float(pi_t[0])

    def cell_probs(self, x: float, draws: np.ndarray) -> np.ndarray:
        """Bivariate cells per draw, shape (n, 4), order (00, 10, 01, 11)."""
        if self.kind != "bivariate":
            raise ConfigurationError("cell_probs applies to the bivariate model")
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        pi_e, pi_t = self.marginals(x, draws)
        psi = draws[:, -1]
        if self.joint == "gumbel":
            cells = np.column_stack(gumbel_cells(pi_e, pi_t, psi))
        else:
            cells = np.array(
                [
                    gaussian_copula_joint(pe, pt, ps)
                    for pe, pt, ps in zip(pi_e, pi_t, psi)
                ]
            )
        return cells

    # -- likelihood ---------------------------------------------------------

    def loglik(self, theta: np.ndarray, data) -> float:
        """Log likelihood of ``data``: a sequence of (x, outcome) pairs where
        outcome is a trinary code (N=0, E=1, T=2) or an (y_E, y_T) pair."""
        theta = np.asarray(theta, dtype=float)
        total = 0.0
        if self.kind == "bivariate":
            for x, (y_e, y_t) in data:
                cells = self.cell_probs(x, theta.reshape(1, -1))[0]
                p = cells[_cell_index(y_e, y_t)]
                if p <= 0.0:
                    return -math.inf
                total += math.log(p)
            return total
        for x, y in data:
            pi_e, pi_t = self.marginals(x, theta.reshape(1, -1))
            pi_e, pi_t = float(pi_e[0]), float(pi_t[0])
            p = pi_t if y == OUT_T else (pi_e if y == OUT_E else 1.0 - pi_e - pi_t)
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
        return total

    def compiled(self, data):
        """A CompiledModel for the hot path, or None when unsupported."""
        from . import _kernels
        from .mcmc import CompiledModel

        link_code = 1 if self.link == "probit" else 0
        if self.kind == "bivariate":
            xs = np.array([x for x, _ in data], dtype=float)
            ye = np.array([int(y[0]) for _, y in data], dtype=np.int64)
            yt = np.array([int(y[1]) for _, y in data], dtype=np.int64)
            args = (
                xs,
                ye,
                yt,
                link_code,
                1 if self.quadratic_efficacy else 0,
                1 if self.quadratic_toxicity else 0,
                0 if self.joint == "gumbel" else 1,
            )
            return CompiledModel(
                kernel=_kernels.loglik_efftox_bivariate,
                args=args,
                python_fn=self.loglik,
                python_data=data,
            )
        xs = np.array([x for x, _ in data], dtype=float)
        ys = np.array([int(y) for _, y in data], dtype=np.int64)
        kernel = (
            _kernels.loglik_trinary3 if self.kind == "trinary3" else _kernels.loglik_trinary4
        )
        return CompiledModel(
            kernel=kernel,
            args=(xs, ys, link_code),
            python_fn=self.loglik,
            python_data=data,
        )

    def default_prior(self, intercept_sd=3.0, slope_sd=3.0, psi_sd=1.0) -> PriorSpec:
        """A weakly informative prior respecting the positivity constraints."""
        entries = []
        for name in self.param_names:
            sd = psi_sd if name == "psi" else (
                intercept_sd if name.endswith("0") else slope_sd
            )
            if name in self.positive_params:
                entries.append(
                    PriorEntry(name, "truncated-normal", (0.0, sd), lower=0.0, upper=math.inf)
                )
            else:
                entries.append(PriorEntry(name, "normal", (0.0, sd)))
        return PriorSpec(tuple(entries))


def _cell_index(y_e, y_t) -> int:
    # cell vector order: (00, 10, 01, 11)
    return {(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 3}[(int(y_e), int(y_t))]


# ---------------------------------------------------------------------------
# Trade-off contour and desirability.


@dataclass(frozen=True)
class TradeoffContour:
    """Monotone target curve p_T = c(p_E) fitted to elicited trade-off pairs.

    Outside the elicited p_E range the curve continues along its end
    tangents.
    """

    pairs: tuple[tuple[float, float], ...]
    coef: tuple[float, ...]  # (c0, c1) or (c0, c1, c2)
    family: str  # 'linear' | 'quadratic'

    @property
    def pe_range(self) -> tuple[float, float]:
        pes = [p[0] for p in self.pairs]
        return min(pes), max(pes)

    def _poly(self, pe):
        c = self.coef
        v = c[0] + c[1] * pe
        if len(c) == 3:
            v += c[2] * pe * pe
        return v

    def _slope(self, pe):
        c = self.coef
        s = c[1]
        if len(c) == 3:
            s += 2.0 * c[2] * pe
        return s

    def value(self, pe: float) -> float:
        lo, hi = self.pe_range
        if pe < lo:
            return self._poly(lo) + self._slope(lo) * (pe - lo)
        if pe > hi:
            return self._poly(hi) + self._slope(hi) * (pe - hi)
        return self._poly(pe)

    def in_range(self, pe: float) -> bool:
        lo, hi = self.pe_range
        return lo <= pe <= hi


def fit_tradeoff_contour(pairs) -> TradeoffContour:
    """Least-squares fit of p_T = c0 + c1 p_E + c2 p_E^2 to elicited pairs,
    falling back to the straight line when the quadratic is not monotone
    increasing on the elicited range."""
    pts = sorted((float(pe), float(pt)) for pe, pt in pairs)
    if len(pts) < 2:
        raise ElicitationError("at least two trade-off pairs are required")
    pes = np.array([p[0] for p in pts])
    pts_t = np.array([p[1] for p in pts])
    if np.any(np.diff(pes) <= 0):
        raise ElicitationError("elicited p_E values must be distinct")
    inc = np.diff(pts_t)
    if np.any(inc <= 0):
        k = int(np.argmax(inc <= 0))
        raise ElicitationError(
            f"elicited p_T must increase with p_E; offending pair {pts[k + 1]}"
        )
    if len(pts) >= 3:
        v = np.column_stack([np.ones_like(pes), pes, pes**2])
        coef, *_ = np.linalg.lstsq(v, pts_t, rcond=None)
        lo, hi = pes[0], pes[-1]
        # derivative is linear; monotone on [lo, hi] iff nonneg at both ends
        if coef[1] + 2 * coef[2] * lo >= 0 and coef[1] + 2 * coef[2] * hi >= 0:
            return TradeoffContour(tuple(pts), tuple(float(c) for c in coef), "quadratic")
    v = np.column_stack([np.ones_like(pes), pes])
    coef, *_ = np.linalg.lstsq(v, pts_t, rcond=None)
    return TradeoffContour(tuple(pts), tuple(float(c) for c in coef), "linear")


@dataclass(frozen=True)
class RayCrossing:
    point: tuple[float, float]
    s: float  # distance from the ideal point in units of ||p - ideal||
    extrapolated: bool


def ray_intersection(p, contour: TradeoffContour, tol: float = 1e-8) -> RayCrossing:
    """Where the line from the ideal point (1, 0) through ``p`` crosses the
    target curve.  Parameterized q(s) = ideal + s (p - ideal), so s=1 at p."""
    pe, pt = float(p[0]), float(p[1])
    if (pe, pt) == IDEAL:
        raise ConfigurationError("the ideal point lies on no trade-off ray")

    def phi(s):
        qe = 1.0 + s * (pe - 1.0)
        qt = s * pt
        return qt - contour.value(qe)

    # Stay inside the unit square first, then extend the search and flag it.
    s_edge = math.inf
    if pe < 1.0:
        s_edge = min(s_edge, 1.0 / (1.0 - pe))
    if pt > 0.0:
        s_edge = min(s_edge, 1.0 / pt)
    s_cap = s_edge if math.isfinite(s_edge) else 1e6
    grid = np.linspace(1e-9, s_cap, 257)
    values = [phi(s) for s in grid]
    bracket = None
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            bracket = (grid[i], grid[i])
            break
        if values[i] < 0.0 <= values[i + 1] or values[i] > 0.0 >= values[i + 1]:
            bracket = (grid[i], grid[i + 1])
            break
    extrapolated = False
    if bracket is None:
        # ray leaves the unit square before crossing; follow the extended curve
        extrapolated = True
        hi = s_cap
        for _ in range(60):
            hi *= 2.0
            if phi(hi) * values[0] < 0.0 or hi > 1e9:
                break
        if phi(hi) * values[0] >= 0.0:
            raise ConfigurationError(
                f"trade-off ray through {p} never crosses the extended target curve"
            )
        bracket = (s_cap, hi)
    lo, hi = bracket
    flo = phi(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = phi(mid)
        if fm == 0.0:
            lo = hi = mid
            break
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    s_c = 0.5 * (lo + hi)
    qe = 1.0 + s_c * (pe - 1.0)
    qt = s_c * pt
    if not contour.in_range(qe):
        extrapolated = True
    return RayCrossing(point=(qe, qt), s=s_c, extrapolated=extrapolated)


def desirability(p, contour: TradeoffContour) -> float:
    """Trade-off desirability: exp(-||p - ideal|| / ||p_C - ideal||), with
    p_C the crossing of the ideal-through-p ray and the target curve.
    Equals 1 at the ideal point and 1/e on the curve itself."""
    pe, pt = float(p[0]), float(p[1])
    if (pe, pt) == IDEAL:
        return 1.0
    crossing = ray_intersection(p, contour)
    return math.exp(-1.0 / crossing.s)


# ---------------------------------------------------------------------------
# Acceptability and dose selection.


@dataclass(frozen=True)
class AcceptabilityLimits:
    """Fixed efficacy floor / toxicity ceiling with posterior cutoffs."""

    eff_floor: float
    tox_ceiling: float
    p_eff: float = 0.9
    p_tox: float = 0.9

    def __post_init__(self):
        for v in (self.eff_floor, self.tox_ceiling, self.p_eff, self.p_tox):
            if not 0.0 < v < 1.0:
                raise ConfigurationError("limits and cutoffs must lie in (0, 1)")


def acceptable_set(
    model: EfftoxModel,
    sample: PosteriorSample,
    doses,
    limits: AcceptabilityLimits,
) -> list[int]:
    """Indices of doses passing both posterior screens: a dose is acceptable
    iff Pr{pi_E < floor | D} <= p_eff and Pr{pi_T > ceiling | D} <= p_tox."""
    out = []
    for i, x in enumerate(doses):
        pi_e, pi_t = model.marginals(x, sample.draws)
        p_low_eff = float(np.mean(pi_e < limits.eff_floor))
        p_high_tox = float(np.mean(pi_t > limits.tox_ceiling))
        if p_low_eff <= limits.p_eff and p_high_tox <= limits.p_tox:
            out.append(i)
    return out


def dose_desirabilities(
    model: EfftoxModel,
    sample: PosteriorSample,
    doses,
    contour: TradeoffContour,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior-mean outcome pair and its desirability for every dose."""
    mu_e = np.empty(len(doses))
    mu_t = np.empty(len(doses))
    delta = np.empty(len(doses))
    for i, x in enumerate(doses):
        pi_e, pi_t = model.marginals(x, sample.draws)
        mu_e[i] = float(pi_e.mean())
        mu_t[i] = float(pi_t.mean())
        delta[i] = desirability((mu_e[i], mu_t[i]), contour)
    return mu_e, mu_t, delta


def select_dose(
    model: EfftoxModel,
    sample: PosteriorSample,
    doses,
    limits: AcceptabilityLimits,
    contour: TradeoffContour,
    max_tried_index: int | None,
) -> int | None:
    """The acceptable dose maximizing desirability, subject to not skipping
    an untried dose when escalating.  Returns None to signal STOP (no
    acceptable dose, or none reachable without skipping).  Ties prefer the
    lower dose."""
    acc = acceptable_set(model, sample, doses, limits)
    if not acc:
        return None
    reach_cap = len(doses) - 1 if max_tried_index is None else max_tried_index + 1
    eligible = [i for i in acc if i <= reach_cap]
    if not eligible:
        return None
    _, _, delta = dose_desirabilities(model, sample, doses, contour)
    best = eligible[0]
    for i in eligible[1:]:
        if delta[i] > delta[best]:
            best = i
    return best


# ---------------------------------------------------------------------------
# Penalized least-squares prior solver.


def solve_prior(
    model: EfftoxModel,
    doses,
    elicited_means,
    elicited_sds,
    penalty: float = 0.1,
    n_draws: int = 10_000,
    inner_seed: int = 20_080_922,
    maxiter: int = 2000,
    x0: np.ndarray | None = None,
):
    """Fit prior hyperparameters to elicited moments of pi_E and pi_T.

    ``elicited_means``/``elicited_sds`` are mappings {'E': [...], 'T': [...]}
    giving the elicited mean and s.d. of pi_y(x_j) at each dose.  The prior
    family is (truncated) normal per parameter; the hyperparameter vector
    interleaves each parameter's location and log-s.d.  The objective adds
    ``penalty`` times the squared spread among prior s.d.'s.  Prior moments
    are Monte-Carlo averages over ``n_draws`` draws generated from a fixed
    inner seed, so the objective is deterministic.

    Returns ``(prior, achieved, fitted_moments)``.
    """
    if len(doses) < 2:
        raise ElicitationError("elicit moments at two or more doses")
    for y in ("E", "T"):
        for v in list(elicited_means[y]) + list(elicited_sds[y]):
            if not 0.0 < v < 1.0:
                raise ElicitationError("elicited moments must lie in (0, 1)")
    if penalty < 0:
        raise ConfigurationError("penalty must be >= 0")

    names = model.param_names
    d = len(names)
    rng = np.random.Generator(np.random.PCG64(inner_seed))
    z = rng.standard_normal((n_draws, d))
    u = rng.random((n_draws, d))
    positive = [n in model.positive_params for n in names]

    def draws_for(xi):
        locs = xi[0::2]
        sds = np.exp(xi[1::2])
        out = np.empty((n_draws, d))
        for j in range(d):
            if positive[j]:
                a = special.ndtr(-locs[j] / sds[j])
                out[:, j] = locs[j] + sds[j] * special.ndtri(a + u[:, j] * (1.0 - a))
            else:
                out[:, j] = locs[j] + sds[j] * z[:, j]
        return out

    def moments(xi):
        th = draws_for(xi)
        mu = {"E": [], "T": []}
        sd = {"E": [], "T": []}
        for x in doses:
            pi_e, pi_t = model.marginals(x, th)
            mu["E"].append(pi_e.mean())
            sd["E"].append(pi_e.std())
            mu["T"].append(pi_t.mean())
            sd["T"].append(pi_t.std())
        return mu, sd

    def objective(xi):
        mu, sd = moments(xi)
        ss = 0.0
        for y in ("E", "T"):
            for j in range(len(doses)):
                ss += (elicited_means[y][j] - mu[y][j]) ** 2
                ss += (elicited_sds[y][j] - sd[y][j]) ** 2
        sds = np.exp(xi[1::2])
        for j in range(d):
            for k in range(j + 1, d):
                ss += penalty * (sds[j] - sds[k]) ** 2
        return ss

    if x0 is None:
        x0 = np.zeros(2 * d)
        x0[1::2] = math.log(1.0)
    res = optimize.minimize(
        objective, x0, method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-6, "fatol": 1e-10},
    )
    if not res.success:
        warnings.warn(
            f"prior solver stagnated ({res.message}); returning best found",
            RuntimeWarning,
        )
    xi = res.x
    entries = []
    for j, name in enumerate(names):
        loc, sd = float(xi[2 * j]), float(math.exp(xi[2 * j + 1]))
        if positive[j]:
            entries.append(
                PriorEntry(name, "truncated-normal", (loc, sd), lower=0.0, upper=math.inf)
            )
        else:
            entries.append(PriorEntry(name, "normal", (loc, sd)))
    prior = PriorSpec(tuple(entries))
    mu, sd = moments(xi)
    fitted = {
        "means": {y: [float(v) for v in vs] for y, vs in mu.items()},
        "sds": {y: [float(v) for v in vs] for y, vs in sd.items()},
    }
    return prior, float(res.fun), fitted

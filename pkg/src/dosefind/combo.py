"""Two-agent combination dose-finding.

A six-parameter toxicity probability surface over standardized dose pairs,
stage-1 selection on a fixed diagonal line, target-isocontour estimation,
and stage-2 selection on the estimated contour by posterior-mean
log-determinant of the accumulated Fisher information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mcmc import PosteriorSample
from .priors import ConfigurationError, PriorEntry, PriorSpec

__all__ = [
    "DiagonalLine",
    "ContourEstimate",
    "ComboModel",
    "combo_tox_prob",
    "combo_tox_grad",
    "single_agent_prob",
    "stage1_select",
    "estimate_contour",
    "fisher_information",
    "fisher_logdet",
    "stage2_select",
]

PARAM_NAMES = ("alpha1", "beta1", "alpha2", "beta2", "alpha3", "beta3")


def _check_pair(x):
    x1, x2 = float(x[0]), float(x[1])
    if not (0.0 <= x1 <= 1.0 and 0.0 <= x2 <= 1.0):
        raise ConfigurationError(f"standardized dose pair out of [0,1]^2: {x}")
    return x1, x2


def combo_tox_prob(x, theta):
    """Toxicity probability of dose pair ``x``; vectorized over parameter
    rows.  Strictly increasing in each dose coordinate for positive
    parameters; 0 at (0, 0)."""
    x1, x2 = _check_pair(x)
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    a1, b1, a2, b2, a3, b3 = (th[:, i] for i in range(6))
    n = a1 * x1**b1 + a2 * x2**b2 + a3 * x1 ** (b1 * b3) * x2 ** (b2 * b3)
    p = n / (1.0 + n)
    return p if np.asarray(theta).ndim > 1 else float(p[0])


def single_agent_prob(agent: int, dose: float, theta_j) -> float:
    """Single-agent toxicity probability: logistic in log standardized dose.
    Evaluated through the full surface with the other agent's dose at zero,
    so the edge-consistency identity holds bit-for-bit."""
    if agent not in (1, 2):
        raise ConfigurationError("agent must be 1 or 2")
    if not 0.0 <= dose <= 1.0:
        raise ConfigurationError("standardized dose must lie in [0, 1]")
    a, b = float(theta_j[0]), float(theta_j[1])
    if agent == 1:
        pair, full = (dose, 0.0), (a, b, 1.0, 1.0, 1.0, 1.0)
    else:
        pair, full = (0.0, dose), (1.0, 1.0, a, b, 1.0, 1.0)
    return float(combo_tox_prob(pair, np.asarray(full).reshape(1, -1))[0])


def combo_tox_grad(x, theta) -> np.ndarray:
    """Analytic gradient of the toxicity surface in the six parameters."""
    x1, x2 = _check_pair(x)
    a1, b1, a2, b2, a3, b3 = (float(v) for v in theta)
    t1 = x1**b1
    t2 = x2**b2
    inter = x1 ** (b1 * b3) * x2 ** (b2 * b3)
    l1 = math.log(x1) if x1 > 0.0 else 0.0
    l2 = math.log(x2) if x2 > 0.0 else 0.0
    n = a1 * t1 + a2 * t2 + a3 * inter
    dn = np.array(
        [
            t1,
            a1 * t1 * l1 + a3 * b3 * l1 * inter,
            t2,
            a2 * t2 * l2 + a3 * b3 * l2 * inter,
            inter,
            a3 * (b1 * l1 + b2 * l2) * inter,
        ]
    )
    return dn / (1.0 + n) ** 2


def fisher_information(x, theta) -> np.ndarray:
    """Single-observation information matrix at dose pair ``x``: the outer
    product of the probability gradient over pi (1 - pi).  Rank one."""
    p = combo_tox_prob(x, np.asarray(theta, dtype=float).reshape(1, -1))
    p = float(p[0])
    if p <= 0.0 or p >= 1.0:
        return None
    g = combo_tox_grad(x, theta)
    return np.outer(g, g) / (p * (1.0 - p))


def fisher_logdet(x, theta, history=()) -> float:
    """Log-determinant of the information accumulated over the doses already
    assigned plus candidate ``x``.  Returns -inf when the total information is
    singular (always the case with fewer than six distinct doses) or when the
    candidate's toxicity probability is numerically 0 or 1."""
    total = np.zeros((6, 6))
    m = fisher_information(x, theta)
    if m is None:
        return -math.inf
    total += m
    for h in history:
        mh = fisher_information(h, theta)
        if mh is not None:
            total += mh
    sign, logdet = np.linalg.slogdet(total)
    if sign <= 0:
        return -math.inf
    return float(logdet)


@dataclass(frozen=True)
class DiagonalLine:
    """Fixed diagonal line for stage 1 with its ordered on-line dose set.

    ``doses`` are dose pairs ordered from lower-left to upper-right;
    ``expansion`` flags the doses that only become available after the first
    toxicity is observed.
    """

    start: tuple[float, float]
    end: tuple[float, float]
    doses: tuple[tuple[float, float], ...]
    expansion: tuple[bool, ...]

    def __post_init__(self):
        _check_pair(self.start)
        _check_pair(self.end)
        if self.start == self.end:
            raise ConfigurationError("line endpoints must be distinct")
        if len(self.doses) != len(self.expansion):
            raise ConfigurationError("doses and expansion flags must align")
        pos = [self.position(d) for d in self.doses]
        if any(p2 <= p1 for p1, p2 in zip(pos, pos[1:])):
            raise ConfigurationError("line doses must be strictly ordered along the line")

    @classmethod
    def from_fractions(cls, start, end, initial_fracs, expansion_fracs=()):
        s = np.asarray(start, dtype=float)
        e = np.asarray(end, dtype=float)
        items = [(f, False) for f in initial_fracs] + [(f, True) for f in expansion_fracs]
        items.sort()
        doses = tuple(tuple(s + f * (e - s)) for f, _ in items)
        flags = tuple(flag for _, flag in items)
        return cls(tuple(start), tuple(end), doses, flags)

    def position(self, point) -> float:
        """Scalar position of a point along the line (projection parameter)."""
        s = np.asarray(self.start)
        d = np.asarray(self.end) - s
        return float(np.dot(np.asarray(point) - s, d) / np.dot(d, d))

    def signed_side(self, point) -> float:
        """Positive left of the line (looking from start to end), negative
        right, ~0 on the line."""
        s = np.asarray(self.start)
        d = np.asarray(self.end) - s
        v = np.asarray(point) - s
        return float(d[0] * v[1] - d[1] * v[0]) / float(np.hypot(d[0], d[1]))

    def allowed_indices(self, any_tox_seen: bool) -> list[int]:
        return [
            i
            for i, exp in enumerate(self.expansion)
            if any_tox_seen or not exp
        ]


def stage1_select(
    sample: PosteriorSample,
    line: DiagonalLine,
    target: float,
    current_index: int,
    any_tox_seen: bool,
) -> int:
    """Stage-1 choice on the line: among allowed doses no more than one
    allowed step above the current dose, minimize |E{pi(x)|D} - target|.
    Ties prefer the lower dose."""
    if not 0 <= current_index < len(line.doses):
        raise ConfigurationError(f"current dose index {current_index} out of range")
    allowed = line.allowed_indices(any_tox_seen)
    if not allowed:
        raise ConfigurationError("the allowed stage-1 dose set is empty")
    if current_index not in allowed:
        # an assigned dose is always considered available
        allowed = sorted(allowed + [current_index])
    pos = allowed.index(current_index)
    candidates = allowed[: pos + 2]
    best = None
    best_err = math.inf
    for i in candidates:
        mean_p = float(np.mean(combo_tox_prob(line.doses[i], sample.draws)))
        err = abs(mean_p - target)
        if err < best_err:
            best, best_err = i, err
    return best


@dataclass(frozen=True)
class ContourEstimate:
    """Polyline approximating the posterior-mean target isocontour, ordered
    by the first dose coordinate.  Empty when the target is unreachable."""

    target: float
    vertices: tuple[tuple[float, float], ...]
    tolerance: float

    def __bool__(self) -> bool:
        return bool(self.vertices)


def estimate_contour(
    sample: PosteriorSample,
    target: float,
    grid: int = 101,
    tolerance: float = 1e-4,
) -> ContourEstimate:
    """For each x1 on the grid, bisect in x2 for the posterior-mean toxicity
    to hit the target; grid points with no root in [0, 1] are omitted.  An
    empty result signals the target is unreachable at the current posterior."""
    if not 0.0 < target < 1.0:
        raise ConfigurationError("target must lie in (0, 1)")
    draws = sample.draws
    vertices = []
    for x1 in np.linspace(0.0, 1.0, grid):
        f_lo = float(np.mean(combo_tox_prob((x1, 0.0), draws))) - target
        f_hi = float(np.mean(combo_tox_prob((x1, 1.0), draws))) - target
        if f_lo > 0.0 or f_hi < 0.0:
            continue
        lo, hi = 0.0, 1.0
        fm = f_lo
        x2 = lo
        for _ in range(200):
            x2 = 0.5 * (lo + hi)
            fm = float(np.mean(combo_tox_prob((x1, x2), draws))) - target
            if abs(fm) <= tolerance:
                break
            if (fm < 0.0) == (f_lo < 0.0):
                lo = x2
            else:
                hi = x2
        if abs(fm) <= tolerance:
            vertices.append((float(x1), float(x2)))
    return ContourEstimate(target=target, vertices=tuple(vertices), tolerance=tolerance)


def _thin_draws(sample, max_draws):
    draws = sample.draws
    if draws.shape[0] > max_draws:
        idx = np.linspace(0, draws.shape[0] - 1, max_draws).astype(int)
        draws = draws[idx]
    return draws


def _history_information(draws, history) -> np.ndarray:
    """Accumulated information of the assigned doses, one matrix per draw."""
    out = np.zeros((draws.shape[0], 6, 6))
    for i, th in enumerate(draws):
        for x in history:
            m = fisher_information(x, th)
            if m is not None:
                out[i] += m
    return out


def _mean_logdet_with_history(vertex, draws, hist_info) -> float:
    vals = np.full(draws.shape[0], -math.inf)
    for i, th in enumerate(draws):
        m = fisher_information(vertex, th)
        if m is None:
            continue
        sign, logdet = np.linalg.slogdet(hist_info[i] + m)
        if sign > 0:
            vals[i] = logdet
    finite = np.isfinite(vals)
    if not np.any(finite):
        return -math.inf
    return float(np.mean(vals[finite]))


def _mean_fisher_logdet(vertex, sample, history, max_draws):
    draws = _thin_draws(sample, max_draws)
    return _mean_logdet_with_history(vertex, draws, _history_information(draws, history))


def stage2_select(
    sample: PosteriorSample,
    contour: ContourEstimate,
    side: str,
    history,
    line: DiagonalLine,
    max_draws: int = 200,
    kill_criterion=None,
) -> tuple[float, float]:
    """Stage-2 choice on the estimated contour, on the requested side of the
    line ('left' or 'right').

    Picks the vertex maximizing the posterior mean log-determinant of the
    accumulated information (history plus candidate).  When a caller-supplied
    anti-disease criterion is given, its optimizer and the information
    optimizer are averaged and the result snapped to the nearest contour
    vertex.  Ties prefer the vertex closer to the line; if the requested side
    holds no vertex, the contour vertex nearest the line is returned.
    """
    if side not in ("left", "right"):
        raise ConfigurationError("side must be 'left' or 'right'")
    if not contour:
        raise ConfigurationError("stage-2 selection requires a nonempty contour")
    sides = np.array([line.signed_side(v) for v in contour.vertices])
    want = sides > 1e-9 if side == "left" else sides < -1e-9
    candidates = [v for v, w in zip(contour.vertices, want) if w]
    if not candidates:
        i = int(np.argmin(np.abs(sides)))
        return contour.vertices[i]

    draws = _thin_draws(sample, max_draws)
    hist_info = _history_information(draws, history)

    def fisher_pick(cands):
        best = None
        best_score = -math.inf
        best_dist = math.inf
        for v in cands:
            score = _mean_logdet_with_history(v, draws, hist_info)
            dist = abs(line.signed_side(v))
            if score > best_score or (score == best_score and dist < best_dist):
                best, best_score, best_dist = v, score, dist
        return best

    chosen = fisher_pick(candidates)
    if kill_criterion is not None:
        kill_best = max(candidates, key=lambda v: kill_criterion(v))
        avg = (
            0.5 * (chosen[0] + kill_best[0]),
            0.5 * (chosen[1] + kill_best[1]),
        )
        i = int(
            np.argmin(
                [
                    (v[0] - avg[0]) ** 2 + (v[1] - avg[1]) ** 2
                    for v in contour.vertices
                ]
            )
        )
        chosen = contour.vertices[i]
    return chosen


@dataclass(frozen=True)
class ComboModel:
    """Bernoulli toxicity observations on the two-agent surface."""

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES

    def loglik(self, theta, data) -> float:
        theta = np.asarray(theta, dtype=float)
        total = 0.0
        for (x1, x2), y in data:
            p = combo_tox_prob((x1, x2), theta.reshape(1, -1))
            p = float(p[0])
            p = p if y else 1.0 - p
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
        return total

    def compiled(self, data):
        from . import _kernels
        from .mcmc import CompiledModel

        x1 = np.array([x[0] for x, _ in data], dtype=float)
        x2 = np.array([x[1] for x, _ in data], dtype=float)
        ys = np.array([int(y) for _, y in data], dtype=np.int64)
        return CompiledModel(
            kernel=_kernels.loglik_combo,
            args=(x1, x2, ys),
            python_fn=self.loglik,
            python_data=data,
        )

    def default_prior(
        self,
        agent_shape=2.0,
        agent_rate=2.0,
        interaction_shape=0.25,
        interaction_rate=0.25,
    ) -> PriorSpec:
        """Gamma priors: informative for each single agent, vague for the
        interaction pair."""
        entries = []
        for name in PARAM_NAMES[:4]:
            entries.append(PriorEntry(name, "gamma", (agent_shape, agent_rate)))
        for name in PARAM_NAMES[4:]:
            entries.append(PriorEntry(name, "gamma", (interaction_shape, interaction_rate)))
        return PriorSpec(tuple(entries))

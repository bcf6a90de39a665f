"""Numba-compiled numerical core.

Everything here mirrors a pure-Python implementation elsewhere in the
package; this module exists so that trial simulation (thousands of posterior
chains) runs at machine speed.  No fastmath: IEEE semantics are kept so each
path is deterministic.

Contents: packed-prior evaluation, the component-wise adaptive random-walk
Metropolis driver, normal CDF/quantile helpers, a Gauss-Legendre bivariate
normal CDF, a quasi-Monte-Carlo integrator for multivariate normal boxes, and
the per-design log-likelihood kernels.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Gauss-Legendre nodes/weights (positive halves) for the bivariate normal CDF.
def _gl_half(n):
    x, w = np.polynomial.legendre.leggauss(n)
    keep = x > 0
    return np.ascontiguousarray(x[keep]), np.ascontiguousarray(w[keep])

_GL6_X, _GL6_W = _gl_half(6)
_GL12_X, _GL12_W = _gl_half(12)
_GL20_X, _GL20_W = _gl_half(20)

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_TWOPI = 2.0 * math.pi

# Square roots of the first primes: Richtmyer lattice generators for QMC.
_SQRT_PRIMES = np.sqrt(np.array([2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0]))

FAM_GAMMA, FAM_NORMAL, FAM_TRUNCNORM, FAM_UNIFORM = 0, 1, 2, 3


def pack_prior(prior):
    """Flatten a PriorSpec into parallel arrays for kernel-side evaluation."""
    from scipy import stats

    d = prior.dim
    fam = np.empty(d, dtype=np.int64)
    p1 = np.empty(d)
    p2 = np.empty(d)
    lo = np.empty(d)
    hi = np.empty(d)
    logz = np.zeros(d)
    for i, e in enumerate(prior.entries):
        lo[i] = e.lower
        hi[i] = e.upper
        if e.family == "gamma":
            fam[i] = FAM_GAMMA
            p1[i], p2[i] = e.params
        elif e.family == "normal":
            fam[i] = FAM_NORMAL
            p1[i], p2[i] = e.params
        elif e.family == "truncated-normal":
            fam[i] = FAM_TRUNCNORM
            p1[i], p2[i] = e.params
            mass = stats.norm.cdf(e.upper, p1[i], p2[i]) - stats.norm.cdf(
                e.lower, p1[i], p2[i]
            )
            logz[i] = math.log(mass)
        else:
            fam[i] = FAM_UNIFORM
            p1[i], p2[i] = e.params
    return fam, p1, p2, lo, hi, logz


@njit(cache=True)
def norm_cdf(x):
    return 0.5 * math.erfc(-x * _SQRT1_2)


@njit(cache=True)
def norm_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(_TWOPI)


@njit(cache=True)
def norm_ppf(p):
    """Inverse standard normal CDF: Acklam's rational approximation plus one
    Halley refinement step (near machine precision)."""
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (
            (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q
        ) / (
            ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
               - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
             - 1.328068155288572e+01) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    e = norm_cdf(x) - p
    u = e * math.sqrt(_TWOPI) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@njit(cache=True)
def log_prior_packed(theta, fam, p1, p2, lo, hi, logz):
    total = 0.0
    for i in range(theta.size):
        x = theta[i]
        if x < lo[i] or x > hi[i]:
            return -math.inf
        f = fam[i]
        if f == 0:  # gamma
            if x <= 0.0:
                return -math.inf
            total += (
                p1[i] * math.log(p2[i])
                - math.lgamma(p1[i])
                + (p1[i] - 1.0) * math.log(x)
                - p2[i] * x
            )
        elif f == 1:  # normal
            z = (x - p1[i]) / p2[i]
            total += -0.5 * z * z - math.log(p2[i]) - 0.5 * math.log(_TWOPI)
        elif f == 2:  # truncated normal
            z = (x - p1[i]) / p2[i]
            total += (
                -0.5 * z * z - math.log(p2[i]) - 0.5 * math.log(_TWOPI) - logz[i]
            )
        else:  # uniform
            total += -math.log(p2[i] - p1[i])
    return total


@njit
def run_chain(
    loglik,
    args,
    fam,
    p1,
    p2,
    lo,
    hi,
    logz,
    x0,
    scales_in,
    n_sweeps,
    burnin,
    thin,
    adapt_every,
    target,
    normals,
    logu,
    n_keep,
):
    """Component-wise adaptive random-walk Metropolis.

    Same algorithm as the Python path in :mod:`dosefind.mcmc`.  Returns
    ``(kept, accepted_kept, scales)``; ``accepted_kept`` is -1 when the model
    produced NaN.
    """
    d = x0.size
    scales = scales_in.copy()
    kept = np.empty((n_keep, d))
    x = x0.copy()
    lp = log_prior_packed(x, fam, p1, p2, lo, hi, logz)
    if lp > -math.inf:
        lp += loglik(x, args)
    window_acc = np.zeros(d)
    accepted_kept = 0
    kept_idx = 0
    for i in range(n_sweeps):
        for j in range(d):
            old = x[j]
            x[j] = old + scales[j] * normals[i, j]
            lp_new = log_prior_packed(x, fam, p1, p2, lo, hi, logz)
            if lp_new > -math.inf:
                lp_new += loglik(x, args)
            if math.isnan(lp_new):
                return kept, -1, scales
            if logu[i, j] < lp_new - lp:
                lp = lp_new
                window_acc[j] += 1.0
                if i >= burnin:
                    accepted_kept += 1
            else:
                x[j] = old
        if i < burnin and (i + 1) % adapt_every == 0:
            for j in range(d):
                rate = window_acc[j] / adapt_every
                scales[j] *= math.exp(rate - target)
                if scales[j] < 1e-8:
                    scales[j] = 1e-8
                elif scales[j] > 1e8:
                    scales[j] = 1e8
            for j in range(d):
                window_acc[j] = 0.0
        if i >= burnin and (i - burnin) % thin == 0:
            kept[kept_idx] = x
            kept_idx += 1
    return kept, accepted_kept, scales


# ---------------------------------------------------------------------------
# Bivariate normal CDF (Gauss-Legendre algorithm of Drezner/Genz style).


@njit(cache=True)
def _bvnu_gauss(h, k, r, gx, gw):
    hk = h * k
    bvn = 0.0
    if abs(r) > 0.0:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        for i in range(gx.size):
            for s in range(2):
                sgn = 1.0 if s == 0 else -1.0
                sn = math.sin(asr * (sgn * gx[i] + 1.0) * 0.5)
                bvn += gw[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (2.0 * _TWOPI)
    return bvn + norm_cdf(-h) * norm_cdf(-k)


@njit(cache=True)
def bvn_upper(dh, dk, r, gx20, gw20, gx12, gw12, gx6, gw6):
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r."""
    if dh == math.inf or dk == math.inf:
        return 0.0
    if dh == -math.inf:
        return norm_cdf(-dk)
    if dk == -math.inf:
        return norm_cdf(-dh)
    if abs(r) < 0.925:
        if abs(r) < 0.3:
            return _bvnu_gauss(dh, dk, r, gx6, gw6)
        elif abs(r) < 0.75:
            return _bvnu_gauss(dh, dk, r, gx12, gw12)
        else:
            return _bvnu_gauss(dh, dk, r, gx20, gw20)
    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if r < 0.0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        ass = (1.0 - r) * (1.0 + r)
        a = math.sqrt(ass)
        bs = (h - k) * (h - k)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -(bs / ass + hk) / 2.0
        if asr > -100.0:
            bvn = (
                a
                * math.exp(asr)
                * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                   + c * d * ass * ass / 5.0)
            )
        if -hk < 100.0:
            b = math.sqrt(bs)
            bvn -= (
                math.exp(-hk / 2.0)
                * math.sqrt(_TWOPI)
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        a = a / 2.0
        for i in range(gx20.size):
            for s in range(2):
                sgn = 1.0 if s == 0 else -1.0
                xs = a * (sgn * gx20[i] + 1.0)
                xs = xs * xs
                rs = math.sqrt(1.0 - xs)
                asr1 = -(bs / xs + hk) / 2.0
                if asr1 > -100.0:
                    sp1 = 1.0 + c * xs * (1.0 + d * xs)
                    ep = math.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                    bvn += a * gw20[i] * math.exp(asr1) * (ep - sp1)
        bvn = -bvn / _TWOPI
    if r > 0.0:
        hmax = h if h > k else k
        bvn += norm_cdf(-hmax)
    else:
        bvn = -bvn
        if k > h:
            bvn += norm_cdf(k) - norm_cdf(h)
    if bvn < 0.0:
        bvn = 0.0
    elif bvn > 1.0:
        bvn = 1.0
    return bvn


@njit(cache=True)
def bvn_cdf(h, k, r):
    """P(X <= h, Y <= k) for standard bivariate normal with correlation r."""
    return bvn_upper(-h, -k, r, _GL20_X, _GL20_W, _GL12_X, _GL12_W, _GL6_X, _GL6_W)


@njit(cache=True)
def bvn_box(a1, b1, a2, b2, r):
    """P(a1 < X <= b1, a2 < Y <= b2), limits may be +-inf."""
    p = bvn_cdf(b1, b2, r) - bvn_cdf(a1, b2, r) - bvn_cdf(b1, a2, r) + bvn_cdf(a1, a2, r)
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return p


# ---------------------------------------------------------------------------
# Quasi-Monte-Carlo multivariate normal box probabilities (separation of
# variables with a Richtmyer lattice; randomized by caller-supplied shifts).


@njit(cache=True)
def loglik_cov_efftox(theta, args):
    """Covariate bivariate-binary model with Gumbel association;
    args = (is_hist, tau_idx, x, Z_std (n, q), yE, yT, link, nE_dose,
    nT_dose, m).  Dose-effect block sizes of zero mean the historical-only
    model."""
    is_hist, tau_idx, xs, zs, ye, yt, link, ne, nt, m = args
    n = xs.size
    q = zs.shape[1]
    psi = theta[theta.size - 1]
    # packed offsets: aE, aT, bE, bT, cE, cT, mE, mT, xiE, xiT, psi
    o_ae = 0
    o_at = o_ae + ne
    o_be = o_at + nt
    o_bt = o_be + q
    joint = 1 if ne > 0 or nt > 0 else 0
    o_ce = o_bt + q
    o_ct = o_ce + (q if joint == 1 else 0)
    o_me = o_ct + (q if joint == 1 else 0)
    o_mt = o_me + m
    o_xe = o_mt + m
    o_xt = o_xe + m * q
    total = 0.0
    for i in range(n):
        eta_e = 0.0
        eta_t = 0.0
        for c in range(q):
            eta_e += theta[o_be + c] * zs[i, c]
            eta_t += theta[o_bt + c] * zs[i, c]
        if is_hist[i] == 1:
            j = tau_idx[i]
            eta_e += theta[o_me + j]
            eta_t += theta[o_mt + j]
            for c in range(q):
                eta_e += theta[o_xe + j * q + c] * zs[i, c]
                eta_t += theta[o_xt + j * q + c] * zs[i, c]
        else:
            x = xs[i]
            eta_e += theta[o_ae] * x
            if ne > 1:
                eta_e += theta[o_ae + 1] * x * x
            eta_t += theta[o_at] * x
            if nt > 1:
                eta_t += theta[o_at + 1] * x * x
            for c in range(q):
                eta_e += x * theta[o_ce + c] * zs[i, c]
                eta_t += x * theta[o_ct + c] * zs[i, c]
        pe = _inv_link_nb(eta_e, link)
        pt = _inv_link_nb(eta_t, link)
        p = _gumbel_cell_nb(pe, pt, psi, ye[i], yt[i])
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def _tri_h_nb(u, a, b, g):
    if u <= 0.0 or u >= b + g:
        return 0.0
    peak = 2.0 * a / (b + g)
    if u <= b:
        return peak * (u / b)
    return peak * ((b + g - u) / g)


@njit(cache=True)
def _tri_H_nb(u, a, b, g):
    if u <= 0.0:
        return 0.0
    if u <= b:
        return a * u * u / ((b + g) * b)
    if u < b + g:
        r = b + g - u
        return a - a * r * r / ((b + g) * g)
    return a


@njit(cache=True)
def loglik_sched(theta, args):
    """Additive-hazard time-to-toxicity likelihood; args = (t_obs, event,
    adm_times (n, K), adm_dose (n, K), adm_count, family) with family
    0 = triangular, 1 = Weibull."""
    t_obs, event, adm_t, adm_d, adm_n, fam = args
    total = 0.0
    for i in range(t_obs.size):
        lam = 0.0
        lam_cum = 0.0
        for a_i in range(adm_n[i]):
            u = t_obs[i] - adm_t[i, a_i]
            if u > 0.0:
                j = adm_d[i, a_i]
                if fam == 0:
                    aj = theta[3 * j]
                    bj = theta[3 * j + 1]
                    gj = theta[3 * j + 2]
                    lam_cum += _tri_H_nb(u, aj, bj, gj)
                    if event[i] == 1:
                        lam += _tri_h_nb(u, aj, bj, gj)
                else:
                    aj = theta[2 * j]
                    bj = theta[2 * j + 1]
                    eb = math.exp(bj)
                    lam_cum += 1.0 - math.exp(-(u**aj) * eb)
                    if event[i] == 1:
                        lam += eb * aj * u ** (aj - 1.0) * math.exp(-(u**aj) * eb)
        if event[i] == 1:
            if lam <= 0.0:
                return -math.inf
            total += math.log(lam)
        total -= lam_cum
    return total


@njit
def loglik_ttb(theta, args):
    """Multivariate ordinal probit; args = (x, levels (n, J), n_levels,
    qmc_shifts, qmc_points, force_qmc).  Disordered cutoffs or a non-PD
    correlation matrix reject the parameter vector (-inf)."""
    xs, ks, m_levels, shifts, npts, force_qmc = args
    J = m_levels.size
    n_beta = 2 * J
    max_nl = 0
    for j in range(J):
        if m_levels[j] > max_nl:
            max_nl = m_levels[j]
    bounds = np.empty((J, max_nl + 1))
    pos = n_beta
    for j in range(J):
        nl = m_levels[j]
        bounds[j, 0] = -math.inf
        bounds[j, 1] = 0.0
        for k in range(2, nl):
            bounds[j, k] = theta[pos]
            pos += 1
        bounds[j, nl] = math.inf
        for k in range(1, nl - 1):
            if bounds[j, k + 1] <= bounds[j, k]:
                return -math.inf
    omega = np.eye(J)
    for i in range(J):
        for j in range(i + 1, J):
            omega[i, j] = theta[pos]
            omega[j, i] = theta[pos]
            pos += 1
    L, ok = _chol_flag(omega)
    if not ok:
        return -math.inf
    a = np.empty(J)
    b = np.empty(J)
    total = 0.0
    for irec in range(xs.size):
        x = xs[irec]
        for j in range(J):
            eta = theta[2 * j] + theta[2 * j + 1] * x
            k = ks[irec, j]
            a[j] = bounds[j, k] - eta
            b[j] = bounds[j, k + 1] - eta
        if J == 1:
            lo = norm_cdf(a[0]) if a[0] > -math.inf else 0.0
            hi = norm_cdf(b[0]) if b[0] < math.inf else 1.0
            p = hi - lo
        elif J == 2 and force_qmc == 0:
            p = bvn_box(a[0], b[0], a[1], b[1], omega[0, 1])
        else:
            p = mvn_box_qmc(a, b, L, shifts, npts)
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def _chol_flag(a):
    """Cholesky factor with a success flag instead of an exception."""
    n = a.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 1e-12:
                    return L, False
                L[i, j] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L, True


# ---------------------------------------------------------------------------
# Design log-likelihood kernels.


@njit(cache=True)
def _inv_link_nb(eta, link):
    if link == 1:  # probit
        return norm_cdf(eta)
    if eta >= 0.0:  # logit, overflow-safe
        return 1.0 / (1.0 + math.exp(-eta))
    t = math.exp(eta)
    return t / (1.0 + t)


@njit(cache=True)
def loglik_trinary3(theta, args):
    """Trinary outcome, 3-parameter model; args = (x, ycode, link)."""
    xs, ys, link = args
    b0, b1, b2 = theta[0], theta[1], theta[2]
    total = 0.0
    for i in range(xs.size):
        pi_t = _inv_link_nb(b0 + b2 * xs[i], link)
        pi_e = _inv_link_nb(b0 + b1 + b2 * xs[i], link) - pi_t
        y = ys[i]
        p = pi_t if y == 2 else (pi_e if y == 1 else 1.0 - pi_e - pi_t)
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def loglik_trinary4(theta, args):
    """Trinary outcome, 4-parameter model; args = (x, ycode, link)."""
    xs, ys, link = args
    be0, be1, bt0, bt1 = theta[0], theta[1], theta[2], theta[3]
    total = 0.0
    for i in range(xs.size):
        pi_t = _inv_link_nb(bt0 + bt1 * xs[i], link)
        pi_e = _inv_link_nb(be0 + be1 * xs[i], link) * (1.0 - pi_t)
        y = ys[i]
        p = pi_t if y == 2 else (pi_e if y == 1 else 1.0 - pi_e - pi_t)
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def loglik_combo(theta, args):
    """Two-agent toxicity surface; args = (x1, x2, y)."""
    x1, x2, ys = args
    a1, b1, a2, b2, a3, b3 = theta[0], theta[1], theta[2], theta[3], theta[4], theta[5]
    total = 0.0
    for i in range(x1.size):
        n = (
            a1 * x1[i] ** b1
            + a2 * x2[i] ** b2
            + a3 * x1[i] ** (b1 * b3) * x2[i] ** (b2 * b3)
        )
        p = n / (1.0 + n)
        if ys[i] == 0:
            p = 1.0 - p
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def _gumbel_cell_nb(pe, pt, psi, a, b):
    base = 1.0
    base *= pe if a == 1 else 1.0 - pe
    base *= pt if b == 1 else 1.0 - pt
    assoc = pe * (1.0 - pe) * pt * (1.0 - pt) * math.tanh(psi / 2.0)
    sign = 1.0 if (a + b) % 2 == 0 else -1.0
    return base + sign * assoc


@njit(cache=True)
def loglik_efftox_bivariate(theta, args):
    """Bivariate binary outcome; args = (x, yE, yT, link, quadE, quadT, joint)
    with joint 0 = Gumbel, 1 = Gaussian copula.  Psi is the last parameter."""
    xs, ye, yt, link, quad_e, quad_t, joint = args
    psi = theta[theta.size - 1]
    i_t = 2 + quad_e
    total = 0.0
    for i in range(xs.size):
        x = xs[i]
        eta_e = theta[0] + theta[1] * x
        if quad_e == 1:
            eta_e += theta[2] * x * x
        eta_t = theta[i_t] + theta[i_t + 1] * x
        if quad_t == 1:
            eta_t += theta[i_t + 2] * x * x
        pe = _inv_link_nb(eta_e, link)
        pt = _inv_link_nb(eta_t, link)
        if joint == 0:
            p = _gumbel_cell_nb(pe, pt, psi, ye[i], yt[i])
        else:
            if psi <= -1.0 or psi >= 1.0:
                return -math.inf
            h = norm_ppf(1.0 - pe)
            k = norm_ppf(1.0 - pt)
            p00 = bvn_cdf(h, k, psi)
            if ye[i] == 0 and yt[i] == 0:
                p = p00
            elif ye[i] == 1 and yt[i] == 0:
                p = 1.0 - pt - p00
            elif ye[i] == 0 and yt[i] == 1:
                p = 1.0 - pe - p00
            else:
                p = pe + pt + p00 - 1.0
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


@njit(cache=True)
def mvn_box_qmc(a, b, L, shifts, npts):
    """P(a < Z <= b) for Z ~ N(0, L L'), via Genz separation of variables.

    ``shifts`` has shape (n_shifts, J-1); the estimate averages the shifted
    lattices, so the result is deterministic given the shifts.
    """
    J = a.size
    if L[0, 0] <= 0.0:
        return 0.0
    d1 = norm_cdf(a[0] / L[0, 0]) if a[0] > -math.inf else 0.0
    e1 = norm_cdf(b[0] / L[0, 0]) if b[0] < math.inf else 1.0
    if J == 1:
        return max(0.0, e1 - d1)
    n_shifts = shifts.shape[0]
    y = np.empty(J - 1)
    total = 0.0
    for s in range(n_shifts):
        acc = 0.0
        for ip in range(npts):
            f = e1 - d1
            d = d1
            e = e1
            for i in range(1, J):
                u = (ip + 1.0) * _SQRT_PRIMES[i - 1] + shifts[s, i - 1]
                u -= math.floor(u)
                z = d + u * (e - d)
                if z < 1e-15:
                    z = 1e-15
                elif z > 1.0 - 1e-15:
                    z = 1.0 - 1e-15
                y[i - 1] = norm_ppf(z)
                mu = 0.0
                for jj in range(i):
                    mu += L[i, jj] * y[jj]
                cii = L[i, i]
                if cii <= 0.0:
                    return 0.0
                d = norm_cdf((a[i] - mu) / cii) if a[i] > -math.inf else 0.0
                e = norm_cdf((b[i] - mu) / cii) if b[i] < math.inf else 1.0
                f *= max(0.0, e - d)
                if f == 0.0:
                    break
            acc += f
        total += acc / npts
    p = total / n_shifts
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return p

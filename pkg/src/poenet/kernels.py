"""MCMC transition kernels: Gibbs full conditionals for the mixture block,
the latent-score update, row-wise Metropolis-Hastings on the structural
matrix, reversible-jump birth/death over prior-graph edges, and the
edge-inclusion probability update.

Every kernel mutates the chain state in place and draws through the supplied
generator, so a fixed call order gives bit-reproducible chains. Kernels that
need the mean-adjusted score matrix accept a shared ``zm = Z - M`` work array
and keep it current; when omitted they compute what they need from the state.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, ndtr

from .graphs import PriorGraph, children, parents
from .model import (
    LOG_2PI,
    ChainState,
    NumericalError,
    conditional_score_law,
    sem_precision,
)
from .truncated import (
    truncated_gamma_lower,
    truncated_gamma_upper,
    truncated_normal,
    truncated_normal_vec,
)


def _zm(state):
    return state.latent.Z - state.mean_cache


def _row_residual(state, i, zm):
    """Row i of B (Z - M): the SEM innovation for gene i across samples."""
    pa = parents(state.graph, i)
    r = zm[i].copy()
    if pa:
        r += state.sem.B[i, pa] @ zm[pa]
    return r


# ---------------------------------------------------------------------------
# mixture block (truncated-conjugate full conditionals)
# ---------------------------------------------------------------------------

def update_alpha(state, data, hyper, j, rng) -> float:
    """Draw the sample effect alpha_j from its truncated-normal conditional.

    Gaussian cells (e=0) contribute conjugate normal terms; each tail cell
    bounds alpha so its residual y - alpha - mu stays inside the cell's
    uniform support: over-expressed cells require it in (0, kappa+], giving
    both a lower and an upper alpha bound, and under-expressed cells the
    mirror image. Keeping both sides (not just the outer kappa bounds) is
    what makes this the exact full conditional.
    """
    mix = state.mixture
    hm = hyper.mixture
    y = data.Y[:, j]
    e = state.latent.E[:, j]
    mask0 = e == 0
    prec = 1.0 / hm.tau_alpha2
    mean_num = 0.0
    if mask0.any():
        s2 = mix.sigma2[mask0]
        prec = prec + np.sum(1.0 / s2)
        mean_num = np.sum((y[mask0] - mix.mu[mask0]) / s2)
    v = 1.0 / prec
    center = v * mean_num
    plus = e == 1
    minus = e == -1
    lo, hi = -np.inf, np.inf
    if plus.any():
        shifted = y[plus] - mix.mu[plus]
        lo = np.max(shifted - mix.kappa_plus[plus])
        hi = np.min(shifted)
    if minus.any():
        shifted = y[minus] - mix.mu[minus]
        lo = max(lo, np.max(shifted))
        hi = min(hi, np.min(shifted + mix.kappa_minus[minus]))
    if not lo < hi:
        raise NumericalError(f"alpha[{j}] conditional has empty support ({lo}, {hi})")
    draw = truncated_normal(rng, center, math.sqrt(v), lo, hi)
    mix.alpha[j] = draw
    return draw


def recenter_alpha(state) -> None:
    """Enforce sum(alpha) = 0 by moving the mean into the gene effects.

    The shift leaves every residual y - alpha - mu unchanged, so this is a
    likelihood-invariant reparameterization applied once per alpha sweep.
    """
    shift = state.mixture.alpha.mean()
    state.mixture.alpha -= shift
    state.mixture.mu += shift


def update_mu(state, data, hyper, i, rng) -> float:
    """Draw the gene effect mu_i from its truncated-normal conditional.

    Support bounds mirror update_alpha: every tail cell of gene i constrains
    mu_i from both sides of its uniform support.
    """
    mix = state.mixture
    hm = hyper.mixture
    y = data.Y[i]
    e = state.latent.E[i]
    mask0 = e == 0
    n0 = int(mask0.sum())
    h_i = 1.0 / mix.sigma2[i]
    v = 1.0 / (1.0 / hm.tau_mu2 + h_i * n0)
    num = hm.th_mu / hm.tau_mu2
    if n0:
        num = num + h_i * np.sum(y[mask0] - mix.alpha[mask0])
    center = v * num
    plus = e == 1
    minus = e == -1
    lo, hi = -np.inf, np.inf
    if plus.any():
        shifted = y[plus] - mix.alpha[plus]
        lo = np.max(shifted) - mix.kappa_plus[i]
        hi = np.min(shifted)
    if minus.any():
        shifted = y[minus] - mix.alpha[minus]
        lo = max(lo, np.max(shifted))
        hi = min(hi, np.min(shifted) + mix.kappa_minus[i])
    if not lo < hi:
        raise NumericalError(f"mu[{i}] conditional has empty support ({lo}, {hi})")
    draw = truncated_normal(rng, center, math.sqrt(v), lo, hi)
    mix.mu[i] = draw
    return draw


def update_sigma2(state, data, hyper, i, rng) -> float:
    """Draw sigma2_i via its precision h = 1/sigma2, a truncated gamma.

    The truncation h >= (kappa0 / min(kappa-, kappa+))^2 keeps the mixture
    tails heavier than the normal component.
    """
    mix = state.mixture
    hm = hyper.mixture
    e = state.latent.E[i]
    mask0 = e == 0
    shape = hm.gamma_sigma + 0.5 * mask0.sum()
    rate = hm.lambda_sigma
    if mask0.any():
        resid = data.Y[i, mask0] - mix.mu[i] - mix.alpha[mask0]
        rate = rate + 0.5 * np.sum(resid * resid)
    h_lo = (hm.kappa0 / min(mix.kappa_minus[i], mix.kappa_plus[i])) ** 2
    h = truncated_gamma_lower(rng, shape, rate, h_lo)
    mix.sigma2[i] = 1.0 / h
    return mix.sigma2[i]


def update_kappa(state, data, hyper, i, side, rng) -> float:
    """Draw a tail width kappa via its reciprocal nu = 1/kappa.

    nu follows a gamma truncated above so every tail observation stays in
    support (kappa >= max residual magnitude) and kappa > kappa0 * sigma.
    Tail cells whose residual currently has the wrong sign carry no support
    constraint (their uniform density is zero for any kappa).
    """
    mix = state.mixture
    hm = hyper.mixture
    e = state.latent.E[i]
    if side == "plus":
        mask = e == 1
        shape0, rate = hm.gamma_kappa_plus, hm.lambda_kappa_plus
        sign = 1.0
    elif side == "minus":
        mask = e == -1
        shape0, rate = hm.gamma_kappa_minus, hm.lambda_kappa_minus
        sign = -1.0
    else:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    cap = 1.0 / (hm.kappa0 * math.sqrt(mix.sigma2[i]))
    n_tail = int(mask.sum())
    if n_tail:
        rmax = np.max(sign * (data.Y[i, mask] - mix.mu[i] - mix.alpha[mask]))
        if rmax > 0.0:
            cap = min(cap, 1.0 / rmax)
    if not cap > 0.0:
        raise NumericalError(f"kappa_{side}[{i}] conditional has empty support")
    nu = truncated_gamma_upper(rng, shape0 + n_tail, rate, cap)
    kappa = 1.0 / nu
    if side == "plus":
        mix.kappa_plus[i] = kappa
    else:
        mix.kappa_minus[i] = kappa
    return kappa


def update_probit_precision(state, data, hyper, i, rng, zm=None) -> float:
    """Conjugate gamma draw for the SEM innovation precision 1/s_i^2."""
    if zm is None:
        zm = _zm(state)
    resid = _row_residual(state, i, zm)
    shape = 0.5 * data.n + hyper.sem.a_s
    rate = hyper.sem.b_s + 0.5 * float(resid @ resid)
    h = rng.gamma(shape, 1.0 / rate)
    state.sem.s2[i] = 1.0 / h
    return state.sem.s2[i]


# ---------------------------------------------------------------------------
# latent scores
# ---------------------------------------------------------------------------

def _log_interval_mass(a, b):
    """log(Phi(b) - Phi(a)) computed stably for intervals deep in either tail."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.empty(a.shape)
    lower = b <= 0.0
    upper = a >= 0.0
    mid = ~(lower | upper)
    if lower.any():
        la = log_ndtr(a[lower])
        lb = log_ndtr(b[lower])
        out[lower] = lb + np.log1p(-np.exp(np.minimum(la - lb, 0.0)))
    if upper.any():
        la = log_ndtr(-a[upper])
        lb = log_ndtr(-b[upper])
        out[upper] = la + np.log1p(-np.exp(np.minimum(lb - la, 0.0)))
    if mid.any():
        out[mid] = np.log(ndtr(b[mid]) - ndtr(a[mid]))
    return out


def _draw_scores(rng, cmean, csd, resid, sigma2_i, kminus_i, kplus_i):
    """Sample (z, e) jointly from the exact cell conditional, vectorized.

    For each threshold interval A the weight is the mixture density of y for
    that class times the normal mass of A under the conditional score law;
    z is then drawn from the conditional normal truncated to the chosen A.
    Weights are combined in log space: the Gaussian class keeps full support
    in y, so at least one weight is always positive.
    """
    cmean = np.asarray(cmean, dtype=float)
    resid = np.asarray(resid, dtype=float)
    log_f0 = -0.5 * (LOG_2PI + math.log(sigma2_i) + resid * resid / sigma2_i)
    in_plus = (resid > 0.0) & (resid <= kplus_i)
    in_minus = (resid > -kminus_i) & (resid <= 0.0)
    t_lo = (-1.0 - cmean) / csd
    t_hi = (1.0 - cmean) / csd
    logw = np.full((3,) + cmean.shape, -np.inf)
    logw[0] = np.where(in_minus, log_ndtr(t_lo) - math.log(kminus_i), -np.inf)
    logw[1] = log_f0 + _log_interval_mass(t_lo, t_hi)
    logw[2] = np.where(in_plus, log_ndtr(-t_hi) - math.log(kplus_i), -np.inf)
    top = logw.max(axis=0)
    if not np.all(np.isfinite(top)):
        raise NumericalError("all latent-class weights vanished for a cell")
    w = np.exp(logw - top)
    total = w.sum(axis=0)
    u = rng.random(cmean.shape) * total
    e = np.where(u < w[0], -1, np.where(u < w[0] + w[1], 0, 1)).astype(np.int8)
    lo = np.where(e == -1, -np.inf, np.where(e == 0, -1.0, 1.0))
    hi = np.where(e == -1, -1.0, np.where(e == 0, 1.0, np.inf))
    z = truncated_normal_vec(rng, cmean, csd, lo, hi)
    return z, e


def update_latent_row(state, data, hyper, i, rng, omega=None, zm=None) -> None:
    """Redraw scores and indicators of gene i for all samples at once.

    Samples are independent given the parameters and the other genes' scores,
    so the n cell conditionals of one gene can be drawn in parallel.
    """
    if omega is None:
        omega = sem_precision(state.sem)
    if zm is None:
        zm = _zm(state)
    w_row = omega[i]
    w_ii = w_row[i]
    if not w_ii > 0.0:
        raise NumericalError(f"nonpositive conditional precision at node {i}")
    mix = state.mixture
    cmean = state.mean_cache[i] - (w_row @ zm - w_ii * zm[i]) / w_ii
    csd = 1.0 / math.sqrt(w_ii)
    resid = data.Y[i] - mix.alpha - mix.mu[i]
    z, e = _draw_scores(
        rng, cmean, csd, resid, mix.sigma2[i], mix.kappa_minus[i], mix.kappa_plus[i]
    )
    state.latent.Z[i] = z
    state.latent.E[i] = e
    zm[i] = z - state.mean_cache[i]


def update_latent_score(state, data, hyper, i, j, rng):
    """Redraw a single cell's (z, e) from its exact full conditional."""
    cmean, cvar = conditional_score_law(
        i, state.latent.Z[:, j], state.mean_cache[:, j], state.sem
    )
    mix = state.mixture
    resid = data.Y[i, j] - mix.alpha[j] - mix.mu[i]
    z, e = _draw_scores(
        rng,
        np.array([cmean]),
        math.sqrt(cvar),
        np.array([resid]),
        mix.sigma2[i],
        mix.kappa_minus[i],
        mix.kappa_plus[i],
    )
    state.latent.Z[i, j] = z[0]
    state.latent.E[i, j] = e[0]
    return float(z[0]), int(e[0])


# ---------------------------------------------------------------------------
# covariate effects
# ---------------------------------------------------------------------------

def update_b_coeffs(state, data, hyper, i, rng, zm=None) -> np.ndarray:
    """Conjugate Gaussian draw for gene i's covariate effect vector.

    The SEM innovations are linear in b_i through row i and through every
    child row where B[l, i] is nonzero; collecting those terms gives a
    normal regression with prior N(0, tau_b2 * I).
    """
    if zm is None:
        zm = _zm(state)
    sem = state.sem
    X = data.X
    d = X.shape[1]
    rows = [i] + children(state.graph, i)
    coefs = [1.0] + [sem.B[l, i] for l in rows[1:]]
    xb_i = state.mean_cache[i]
    prec_scale = 0.0
    lin = np.zeros(d)
    for l, c_li in zip(rows, coefs):
        h_l = 1.0 / sem.s2[l]
        resid_l = _row_residual(state, l, zm)
        partial = resid_l + c_li * xb_i  # row innovation with b_i's term removed
        prec_scale += h_l * c_li * c_li
        lin += h_l * c_li * (X.T @ partial)
    P = prec_scale * (X.T @ X) + np.eye(d) / sem.tau_b2
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(P, lin)
    draw = mean + np.linalg.solve(L.T, rng.standard_normal(d))
    sem.b_coeffs[i] = draw
    new_mean = X @ draw
    state.mean_cache[i] = new_mean
    zm[i] = state.latent.Z[i] - new_mean
    return draw


# ---------------------------------------------------------------------------
# structural matrix and graph moves
# ---------------------------------------------------------------------------

def b_row_log_ratio(state, data, i, beta_new, zm=None):
    """Exact log MH ratio for replacing row i's free coefficients by beta_new.

    Combines the determinant term |det B'|^n / |det B|^n, the change in the
    full quadratic form, and the coefficient prior ratio (the random-walk
    proposal is symmetric). Returns (log_ratio, sign, logabsdet) of the
    proposed matrix; a singular proposal yields -inf.
    """
    pa = parents(state.graph, i)
    if zm is None:
        zm = _zm(state)
    sem = state.sem
    n = zm.shape[1]
    W = zm[pa].T
    r = zm[i]
    h_i = 1.0 / sem.s2[i]
    beta_old = -sem.B[i, pa]
    resid_old = r - W @ beta_old
    resid_new = r - W @ beta_new
    q_old = h_i * float(resid_old @ resid_old)
    q_new = h_i * float(resid_new @ resid_new)
    sem.B[i, pa] = -beta_new
    sign, logdet_new = np.linalg.slogdet(sem.B)
    sem.B[i, pa] = -beta_old
    if sign == 0.0 or not np.isfinite(logdet_new):
        return -np.inf, 0.0, -np.inf
    log_ratio = (
        n * (logdet_new - state.logdet[1])
        - 0.5 * (q_new - q_old)
        - 0.5 * (float(beta_new @ beta_new) - float(beta_old @ beta_old)) / sem.sigma2_beta
    )
    return log_ratio, sign, logdet_new


def update_B_row(state, data, hyper, i, rng, c, zm=None, stats=None):
    """Random-walk MH update of all free coefficients in row i of B.

    Proposal covariance c * (W'W / s_i^2 + I / sigma2_beta)^(-1) with W the
    mean-adjusted parent scores. Returns None when the row has no parents,
    else the acceptance flag; a numerically singular proposal auto-rejects.
    """
    pa = parents(state.graph, i)
    if not pa:
        return None
    if zm is None:
        zm = _zm(state)
    sem = state.sem
    W = zm[pa].T
    h_i = 1.0 / sem.s2[i]
    A = h_i * (W.T @ W) + np.eye(len(pa)) / sem.sigma2_beta
    L = np.linalg.cholesky(A)
    step = math.sqrt(c) * np.linalg.solve(L.T, rng.standard_normal(len(pa)))
    beta_new = -sem.B[i, pa] + step
    log_ratio, sign, logdet_new = b_row_log_ratio(state, data, i, beta_new, zm=zm)
    if stats is not None:
        stats.add("b_row")
    if not np.isfinite(log_ratio) and log_ratio < 0:
        return False
    if math.log(rng.random()) < log_ratio:
        sem.B[i, pa] = -beta_new
        state.logdet = (sign, logdet_new)
        if stats is not None:
            stats.add("b_row", proposed=0, accepted=1)
        return True
    return False


def rj_log_ratio(state, data, i, k, u=None, zm=None):
    """Log acceptance ratio for flipping edge k->i, given the current state.

    If the edge is present this scores its death (coefficient set to zero,
    prior odds (1-phi)/phi); if absent, its birth with coefficient u (prior
    odds phi/(1-phi)). The prior-as-proposal coefficient density cancels.
    Returns (log_ratio, sign, logabsdet, death).
    """
    if zm is None:
        zm = _zm(state)
    sem = state.sem
    n = zm.shape[1]
    h_i = 1.0 / sem.s2[i]
    resid_old = _row_residual(state, i, zm)
    q_old = h_i * float(resid_old @ resid_old)
    phi = state.phi
    death = state.graph.has_edge(k, i)
    old_entry = sem.B[i, k]
    if death:
        resid_new = resid_old - old_entry * zm[k]
        log_prior_odds = math.log1p(-phi) - math.log(phi)
        sem.B[i, k] = 0.0
    else:
        if u is None:
            raise ValueError("birth move requires a proposed coefficient u")
        resid_new = resid_old - u * zm[k]
        log_prior_odds = math.log(phi) - math.log1p(-phi)
        sem.B[i, k] = -u
    sign, logdet_new = np.linalg.slogdet(sem.B)
    sem.B[i, k] = old_entry
    if sign == 0.0 or not np.isfinite(logdet_new):
        return -np.inf, 0.0, -np.inf, death
    q_new = h_i * float(resid_new @ resid_new)
    log_ratio = (
        n * (logdet_new - state.logdet[1]) - 0.5 * (q_new - q_old) + log_prior_odds
    )
    return log_ratio, sign, logdet_new, death


def rj_move(state, data, hyper, g0: PriorGraph, rng, zm=None, stats=None) -> bool:
    """One reversible-jump birth/death attempt on a uniformly drawn G0 edge.

    Births draw the new coefficient from its prior, so the proposal density
    cancels against the prior in the acceptance ratio, leaving the exact
    likelihood ratio times the prior odds phi/(1-phi). Deaths use the
    reciprocal ratio. A numerically singular proposal is rejected outright.
    """
    if zm is None:
        zm = _zm(state)
    sem = state.sem
    t = int(rng.integers(g0.K))
    k, i = g0.edges[t]
    death = state.graph.has_edge(k, i)
    u = None if death else rng.normal(0.0, math.sqrt(sem.sigma2_beta))
    log_ratio, sign, logdet_new, death = rj_log_ratio(state, data, i, k, u=u, zm=zm)
    if stats is not None:
        stats.add("rj_death" if death else "rj_birth")
    if not np.isfinite(log_ratio) and log_ratio < 0:
        return False
    if math.log(rng.random()) < log_ratio:
        state.logdet = (sign, logdet_new)
        if death:
            sem.B[i, k] = 0.0
            state.graph.remove_edge(k, i)
        else:
            sem.B[i, k] = -u
            state.graph.add_edge(k, i)
        if stats is not None:
            stats.add("rj_death" if death else "rj_birth", proposed=0, accepted=1)
            stats.count_edge_move(t, death)
        return True
    return False


def update_phi(state, hyper, g0: PriorGraph, rng) -> float:
    """Conjugate beta draw for the edge-inclusion probability."""
    k_g = state.graph.n_edges
    sp = hyper.structure
    phi = rng.beta(sp.a_phi + k_g, sp.b_phi + g0.K - k_g)
    state.phi = min(max(phi, 1e-12), 1.0 - 1e-12)
    return state.phi

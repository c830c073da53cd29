"""Joint-distribution validation of the sampler (Geweke-style).

The marginal-conditional simulator draws (parameters, graph, scores) from the
prior and observations from the likelihood, independently each time. The
successive-conditional simulator alternates one full MCMC sweep with a fresh
draw of the observations given the current state. If every transition kernel
leaves its conditional invariant, both simulators sample the same joint law,
so moments of any statistic must agree up to Monte Carlo error.
"""

from __future__ import annotations

import math

import numpy as np

from .graphs import PriorGraph, ReciprocalGraph
from .model import (
    ChainState,
    ExpressionDataset,
    LatentState,
    MixtureParams,
    ModelHyperParams,
    SEMParams,
    indicators_from_scores,
)
from .sampler import MoveStats, SamplerConfig, sweep
from .kernels import recenter_alpha


def draw_constrained_scales(p, hyper: ModelHyperParams, rng):
    """Rejection draw of (sigma2, kappa-, kappa+) under min(kappa) > kappa0*sigma."""
    hm = hyper.mixture
    sigma2 = np.empty(p)
    kminus = np.empty(p)
    kplus = np.empty(p)
    todo = np.arange(p)
    while todo.size:
        m = todo.size
        s2 = 1.0 / rng.gamma(hm.gamma_sigma, 1.0 / hm.lambda_sigma, size=m)
        km = 1.0 / rng.gamma(hm.gamma_kappa_minus, 1.0 / hm.lambda_kappa_minus, size=m)
        kp = 1.0 / rng.gamma(hm.gamma_kappa_plus, 1.0 / hm.lambda_kappa_plus, size=m)
        ok = np.minimum(km, kp) > hm.kappa0 * np.sqrt(s2)
        idx = todo[ok]
        sigma2[idx] = s2[ok]
        kminus[idx] = km[ok]
        kplus[idx] = kp[ok]
        todo = todo[~ok]
    return sigma2, kminus, kplus


def prior_draw(X, g0: PriorGraph, hyper: ModelHyperParams, rng) -> ChainState:
    """One exact draw of the full chain state from the prior.

    Structural matrices with |det| below exp(-25) are redrawn; the excluded
    region carries negligible prior mass and breaks the score draw.
    """
    p = g0.p
    n, d = X.shape
    hm, hs, sp = hyper.mixture, hyper.sem, hyper.structure

    phi = float(rng.beta(sp.a_phi, sp.b_phi))
    phi = min(max(phi, 1e-12), 1.0 - 1e-12)
    while True:
        graph = ReciprocalGraph(p)
        B = np.eye(p)
        for (src, dst) in g0.edges:
            if rng.random() < phi:
                graph.add_edge(src, dst)
                B[dst, src] = -rng.normal(0.0, math.sqrt(hs.sigma2_beta))
        sign, logabs = np.linalg.slogdet(B)
        if sign != 0.0 and logabs > -25.0:
            break

    s2 = 1.0 / rng.gamma(hs.a_s, 1.0 / hs.b_s, size=p)
    b = rng.normal(0.0, math.sqrt(hs.tau_b2), size=(p, d))
    sigma2, kminus, kplus = draw_constrained_scales(p, hyper, rng)
    mu = rng.normal(hm.th_mu, math.sqrt(hm.tau_mu2), size=p)
    alpha = rng.normal(0.0, math.sqrt(hm.tau_alpha2), size=n)

    M = b @ X.T
    eps = rng.standard_normal((p, n)) * np.sqrt(s2)[:, None]
    Z = M + np.linalg.solve(B, eps)
    E = indicators_from_scores(Z)

    state = ChainState(
        mixture=MixtureParams(alpha, mu, sigma2, kminus, kplus),
        sem=SEMParams(B=B, s2=s2, b_coeffs=b,
                      sigma2_beta=hs.sigma2_beta, tau_b2=hs.tau_b2),
        latent=LatentState(Z=Z, E=E),
        graph=graph,
        phi=phi,
        rng=rng,
        logdet=(sign, logabs),
    )
    state.mean_cache = M
    recenter_alpha(state)
    return state


def draw_observations(state: ChainState, rng) -> np.ndarray:
    """Sample the expression matrix from the mixture given the state."""
    mix = state.mixture
    E = state.latent.E
    p, n = E.shape
    base = mix.alpha[None, :] + mix.mu[:, None]
    r = rng.standard_normal((p, n)) * np.sqrt(mix.sigma2)[:, None]
    plus = E == 1
    minus = E == -1
    # (1 - u) keeps the draws inside the half-open supports (0, k+] / (-k-, 0]
    if plus.any():
        u = rng.random(int(plus.sum()))
        r[plus] = (1.0 - u) * np.broadcast_to(mix.kappa_plus[:, None], (p, n))[plus]
    if minus.any():
        u = rng.random(int(minus.sum()))
        r[minus] = -(1.0 - u) * np.broadcast_to(mix.kappa_minus[:, None], (p, n))[minus]
    return base + r


def _collect(state):
    return (
        float(state.mixture.mu[0]),
        float(state.graph.n_edges),
        float(state.latent.Z[0, 0]),
    )

STAT_NAMES = ("mu_0", "k_g", "z_00")


def marginal_conditional(n_samples, X, g0, hyper, rng):
    """Independent prior draws; statistics depend on the state only."""
    out = np.empty((n_samples, len(STAT_NAMES)))
    for t in range(n_samples):
        state = prior_draw(X, g0, hyper, rng)
        out[t] = _collect(state)
    return {name: out[:, k] for k, name in enumerate(STAT_NAMES)}


def successive_conditional(n_scans, X, g0, hyper, config: SamplerConfig, rng):
    """Alternate one sweep with a fresh observation draw, recording each scan."""
    n = X.shape[0]
    state = prior_draw(X, g0, hyper, rng)
    data = ExpressionDataset(
        Y=draw_observations(state, rng),
        X=X,
        gene_ids=[f"g{i}" for i in range(g0.p)],
        sample_ids=[f"s{j}" for j in range(n)],
    )
    stats = MoveStats(g0.K)
    out = np.empty((n_scans, len(STAT_NAMES)))
    for t in range(n_scans):
        sweep(state, data, g0, hyper, config, rng, stats)
        data.Y = draw_observations(state, rng)
        out[t] = _collect(state)
    return {name: out[:, k] for k, name in enumerate(STAT_NAMES)}


def batch_se(x, n_batches=100) -> float:
    """Batch-means standard error for an autocorrelated series."""
    x = np.asarray(x, dtype=float)
    size = len(x) // n_batches
    if size < 1:
        return float(np.std(x) / math.sqrt(len(x)))
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def compare(mc_stats, sc_stats):
    """Z-scores of the mean differences; independent SE for the marginal
    simulator, batch-means SE for the successive one."""
    report = {}
    for name in STAT_NAMES:
        a = np.asarray(mc_stats[name])
        b = np.asarray(sc_stats[name])
        se = math.sqrt(
            (np.std(a, ddof=1) / math.sqrt(len(a))) ** 2 + batch_se(b) ** 2
        )
        z = abs(a.mean() - b.mean()) / se if se > 0 else 0.0
        report[name] = {
            "marginal_mean": float(a.mean()),
            "successive_mean": float(b.mean()),
            "se": se,
            "z": float(z),
        }
    return report

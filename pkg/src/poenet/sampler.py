"""Chain construction and the sweep/driver loop.

One sweep updates, in fixed order: all sample effects (then recentering),
all gene effects, variances, tail widths, covariate effects, all latent
score rows, all structural-matrix rows, a batch of reversible-jump moves,
the innovation precisions, and the edge-inclusion probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graphs import PriorGraph, ReciprocalGraph, is_subgraph
from .model import (
    ChainState,
    ExpressionDataset,
    LatentState,
    MixtureParams,
    ModelHyperParams,
    NumericalError,
    SEMParams,
    ValidationError,
    indicators_from_scores,
    sem_precision,
)
from .trace import TraceStore
from .truncated import truncated_normal_vec

INIT_MODES = ("prior-graph-full", "empty-graph", "random")


@dataclass
class SamplerConfig:
    """Run-length, tuning, and initialization settings for one chain."""

    n_iter: int = 100_000
    burn_in: int = 50_000
    thin: int = 10
    mh_scale: float = 1.0
    rj_moves_per_sweep: int = 0   # 0 means one expected visit per G0 edge
    seed: int = 0
    init_mode: str = "prior-graph-full"
    validate_every: int = 0       # 0 disables in-run state validation

    def __post_init__(self):
        if self.burn_in >= self.n_iter:
            raise ValidationError("burn_in must be smaller than n_iter")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.mh_scale <= 0:
            raise ValidationError("mh_scale must be positive")
        if self.init_mode not in INIT_MODES:
            raise ValidationError(
                f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}"
            )

    @property
    def n_retained(self):
        return (self.n_iter - self.burn_in) // self.thin


class MoveStats:
    """Proposal/acceptance counters per kernel plus per-edge birth/death counts."""

    def __init__(self, n_edges):
        self.kernels = {}
        self.edge_births = np.zeros(n_edges, dtype=np.int64)
        self.edge_deaths = np.zeros(n_edges, dtype=np.int64)

    def add(self, name, proposed=1, accepted=0):
        entry = self.kernels.setdefault(name, [0, 0])
        entry[0] += proposed
        entry[1] += accepted
        if entry[1] > entry[0]:
            raise AssertionError(f"{name}: accepted exceeds proposed")

    def count_edge_move(self, edge_index, death):
        if death:
            self.edge_deaths[edge_index] += 1
        else:
            self.edge_births[edge_index] += 1

    def acceptance_rates(self):
        return {
            name: (acc / prop if prop else float("nan"))
            for name, (prop, acc) in sorted(self.kernels.items())
        }

    def to_dict(self):
        return {
            "kernels": {k: {"proposals": v[0], "accepted": v[1]}
                        for k, v in sorted(self.kernels.items())},
            "edge_births": self.edge_births.tolist(),
            "edge_deaths": self.edge_deaths.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        stats = cls(len(d["edge_births"]))
        for k, v in d["kernels"].items():
            stats.kernels[k] = [v["proposals"], v["accepted"]]
        stats.edge_births = np.asarray(d["edge_births"], dtype=np.int64)
        stats.edge_deaths = np.asarray(d["edge_deaths"], dtype=np.int64)
        return stats


def init_state(data: ExpressionDataset, g0: PriorGraph, hyper: ModelHyperParams,
               config: SamplerConfig, rng) -> ChainState:
    """Build the starting state: moment-based gene effects and indicators
    (cells beyond 2 within-gene SDs marked as tails), remaining parameters at
    their hyperprior means, scores drawn consistent with the indicators,
    B = I with the configured graph.

    Gene effects start at the row means rather than the prior mean so every
    tail residual begins inside its uniform support, which the exact
    truncated conditionals then preserve for the whole run.
    """
    p, n = data.p, data.n
    hm = hyper.mixture
    hs = hyper.sem

    alpha = np.zeros(n)
    row_mean = data.Y.mean(axis=1, keepdims=True)
    row_sd = data.Y.std(axis=1, keepdims=True)
    mu = row_mean.ravel().copy()
    E = np.zeros((p, n), dtype=np.int8)
    E[data.Y > row_mean + 2.0 * row_sd] = 1
    E[data.Y < row_mean - 2.0 * row_sd] = -1

    sigma2 = np.full(p, hm.lambda_sigma / hm.gamma_sigma)
    sigma = np.sqrt(sigma2)
    # tail widths: prior scale, but wide enough to cover every assigned tail
    # residual and to clear the kappa > kappa0*sigma restriction
    kplus = np.full(p, hm.lambda_kappa_plus / hm.gamma_kappa_plus)
    kminus = np.full(p, hm.lambda_kappa_minus / hm.gamma_kappa_minus)
    for i in range(p):
        resid = data.Y[i] - mu[i]
        if (E[i] == 1).any():
            kplus[i] = max(kplus[i], 1.05 * resid[E[i] == 1].max())
        if (E[i] == -1).any():
            kminus[i] = max(kminus[i], 1.05 * (-resid[E[i] == -1]).max())
        kplus[i] = max(kplus[i], 1.2 * hm.kappa0 * sigma[i])
        kminus[i] = max(kminus[i], 1.2 * hm.kappa0 * sigma[i])

    graph = ReciprocalGraph(p)
    if config.init_mode == "prior-graph-full":
        graph = g0.graph.copy()
    elif config.init_mode == "random":
        for (src, dst) in g0.edges:
            if rng.random() < 0.5:
                graph.add_edge(src, dst)

    lo = np.where(E == -1, -np.inf, np.where(E == 0, -1.0, 1.0))
    hi = np.where(E == -1, -1.0, np.where(E == 0, 1.0, np.inf))
    Z = truncated_normal_vec(rng, np.zeros((p, n)), 1.0, lo, hi)

    sem = SEMParams(
        B=np.eye(p),
        s2=np.full(p, hs.b_s / hs.a_s),
        b_coeffs=np.zeros((p, data.d)),
        sigma2_beta=hs.sigma2_beta,
        tau_b2=hs.tau_b2,
    )
    state = ChainState(
        mixture=MixtureParams(alpha, mu, sigma2, kminus, kplus),
        sem=sem,
        latent=LatentState(Z=Z, E=E),
        graph=graph,
        phi=hyper.structure.a_phi / (hyper.structure.a_phi + hyper.structure.b_phi),
        iteration=0,
        rng=rng,
        logdet=(1.0, 0.0),
    )
    state.mean_cache = np.zeros((p, n))
    return state


def sweep(state: ChainState, data: ExpressionDataset, g0: PriorGraph,
          hyper: ModelHyperParams, config: SamplerConfig, rng,
          stats: MoveStats) -> None:
    """One full scan over every transition kernel, in fixed order."""
    p, n = data.p, data.n
    for j in range(n):
        kernels.update_alpha(state, data, hyper, j, rng)
    kernels.recenter_alpha(state)
    stats.add("alpha", n, n)
    for i in range(p):
        kernels.update_mu(state, data, hyper, i, rng)
    stats.add("mu", p, p)
    for i in range(p):
        kernels.update_sigma2(state, data, hyper, i, rng)
    stats.add("sigma2", p, p)
    for i in range(p):
        kernels.update_kappa(state, data, hyper, i, "minus", rng)
        kernels.update_kappa(state, data, hyper, i, "plus", rng)
    stats.add("kappa", 2 * p, 2 * p)

    zm = state.latent.Z - state.mean_cache
    for i in range(p):
        kernels.update_b_coeffs(state, data, hyper, i, rng, zm=zm)
    stats.add("b_coeffs", p, p)

    omega = sem_precision(state.sem)
    for i in range(p):
        kernels.update_latent_row(state, data, hyper, i, rng, omega=omega, zm=zm)
    stats.add("latent", p * n, p * n)

    for i in range(p):
        kernels.update_B_row(state, data, hyper, i, rng, config.mh_scale,
                             zm=zm, stats=stats)
    n_rj = config.rj_moves_per_sweep if config.rj_moves_per_sweep > 0 else g0.K
    for _ in range(n_rj):
        kernels.rj_move(state, data, hyper, g0, rng, zm=zm, stats=stats)
    for i in range(p):
        kernels.update_probit_precision(state, data, hyper, i, rng, zm=zm)
    stats.add("s2", p, p)
    kernels.update_phi(state, hyper, g0, rng)
    stats.add("phi", 1, 1)


def validate_state(state: ChainState, data: ExpressionDataset, g0: PriorGraph,
                   hyper: ModelHyperParams, check_support=False) -> None:
    """Assert the structural invariants of a chain state.

    With check_support, also verify every tail residual sits inside its
    uniform support; the exact truncated conditionals preserve this from a
    valid start, so it should hold at any point between kernel calls.
    """
    mix = state.mixture
    if not is_subgraph(state.graph, g0):
        raise AssertionError("current graph leaves the prior model space")
    B = state.sem.B
    p = data.p
    if not np.allclose(np.diag(B), 1.0):
        raise AssertionError("B diagonal must be unity")
    off = ~np.eye(p, dtype=bool)
    nz = np.argwhere((B != 0.0) & off)
    for i, k in nz:
        if not state.graph.has_edge(int(k), int(i)):
            raise AssertionError(f"B[{i},{k}] nonzero without edge {k}->{i}")
    if abs(mix.alpha.sum()) > 1e-8 * max(1.0, np.abs(mix.alpha).max()):
        raise AssertionError("sample effects do not sum to zero")
    if not np.array_equal(state.latent.E, indicators_from_scores(state.latent.Z)):
        raise AssertionError("indicators inconsistent with scores")
    sigma = np.sqrt(mix.sigma2)
    if not np.all(np.minimum(mix.kappa_minus, mix.kappa_plus) > hyper.mixture.kappa0 * sigma):
        raise AssertionError("tail-width restriction kappa > kappa0*sigma violated")
    # heavier-tail interpretability: uniform density below the normal mode
    if not np.all(1.0 / mix.kappa_plus < 1.0 / (math.sqrt(2.0 * math.pi) * sigma)):
        raise AssertionError("upper tail density not below normal mode")
    if not np.all(1.0 / mix.kappa_minus < 1.0 / (math.sqrt(2.0 * math.pi) * sigma)):
        raise AssertionError("lower tail density not below normal mode")
    sign, logabs = np.linalg.slogdet(B)
    if sign == 0.0:
        raise AssertionError("structural matrix is singular")
    if abs(logabs - state.logdet[1]) > 1e-8 * max(1.0, abs(logabs)):
        raise AssertionError("cached log|det B| drifted from fresh LU value")
    if check_support:
        resid = data.Y - mix.alpha[None, :] - mix.mu[:, None]
        E = state.latent.E
        bad_plus = (E == 1) & ~((resid > 0) & (resid <= mix.kappa_plus[:, None]))
        bad_minus = (E == -1) & ~((resid > -mix.kappa_minus[:, None]) & (resid <= 0))
        if bad_plus.any() or bad_minus.any():
            raise AssertionError("tail residual outside its uniform support")


def run_chain(data: ExpressionDataset, g0: PriorGraph, hyper: ModelHyperParams,
              config: SamplerConfig, chain_id=0):
    """Run one chain; returns the trace store and the move statistics.

    Fully deterministic given the seed. Numerical failure aborts with the
    iteration index in the message.
    """
    if g0.p != data.p:
        raise ValidationError(
            f"prior graph has {g0.p} nodes but expression has {data.p} genes"
        )
    if config.n_retained < 1:
        raise ValidationError("no retained iterations: check n_iter/burn_in/thin")
    rng = np.random.default_rng(config.seed)
    state = init_state(data, g0, hyper, config, rng)
    stats = MoveStats(g0.K)
    trace = TraceStore.allocate(data, g0, config, chain_id=chain_id)
    slot = 0
    for t in range(1, config.n_iter + 1):
        try:
            sweep(state, data, g0, hyper, config, rng, stats)
        except NumericalError as err:
            raise NumericalError(f"chain {chain_id} failed at iteration {t}: {err}") from err
        state.iteration = t
        trace.edge_count[t - 1] = state.graph.n_edges
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            trace.record(slot, state, g0)
            slot += 1
        if t % 1000 == 0:
            sign, logabs = np.linalg.slogdet(state.sem.B)
            if abs(logabs - state.logdet[1]) > 1e-8 * max(1.0, abs(logabs)):
                raise NumericalError(f"log-determinant drift detected at iteration {t}")
            state.logdet = (sign, logabs)
        if config.validate_every and t % config.validate_every == 0:
            validate_state(state, data, g0, hyper, check_support=True)
    trace.stats = stats
    trace.final_state = state
    return trace, stats

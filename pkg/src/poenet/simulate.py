"""Synthetic-data generator with retained ground truth.

The generative scheme deliberately differs from the analysis model: latent
scores are Gaussian with a known sparse-precision dependence structure, and
intensities come from a three-component Gaussian mixture with asymmetric
class cuts at -1 and +3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .graphs import PriorGraph, ReciprocalGraph
from .model import ExpressionDataset, ValidationError


@dataclass
class SimulationConfig:
    """Shape, dependence sparsity, and generator settings.

    When ``pi0`` is omitted it is set so the expected number of true edges
    equals ``expected_true_edges`` (default: one per gene).
    """

    p: int = 50
    n: int = 30
    group_split: int = 0          # samples in the reference group; 0 -> n//2
    pi0: float = -1.0             # spike probability; negative -> derived
    expected_true_edges: int = 0  # 0 -> p
    false_edge_count: int = 87
    low_mean: float = -4.0
    low_sd: float = 2.0
    mid_mean: float = 0.0
    mid_sd: float = 1.0
    high_mean: float = 4.0
    high_sd: float = 2.0
    cut_low: float = -1.0
    cut_high: float = 3.0
    m_b: tuple = (0.0, 2.0)       # prior mean of the covariate effects
    sigma_b2: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.p < 2 or self.n < 2:
            raise ValidationError("simulation requires p >= 2 and n >= 2")
        if self.group_split <= 0:
            self.group_split = self.n // 2
        if not 0 < self.group_split < self.n:
            raise ValidationError("group_split must lie strictly inside (0, n)")
        if self.expected_true_edges <= 0:
            self.expected_true_edges = self.p
        if self.pi0 < 0:
            self.pi0 = 1.0 - self.expected_true_edges / (self.p * (self.p - 1))
        if not 0.0 <= self.pi0 <= 1.0:
            raise ValidationError(f"pi0 must be in [0, 1], got {self.pi0}")
        if not self.cut_low < self.cut_high:
            raise ValidationError("cut_low must be below cut_high")


@dataclass
class SimulationTruth:
    """Everything the evaluator needs, recorded at generation time."""

    B_true: np.ndarray
    Omega_z: np.ndarray
    E_star: list                  # true edges (k -> i), i.e. B_true[i, k] != 0
    E_tilde: list = field(default_factory=list)
    W: np.ndarray = None
    Z_true: np.ndarray = None
    e_true: np.ndarray = None
    b_true: np.ndarray = None


def gen_structural_truth(cfg: SimulationConfig, rng=None) -> np.ndarray:
    """Spike-and-slab structural matrix: unit diagonal, off-diagonals zero
    with probability pi0 and otherwise +/- Gamma(2, 1) magnitudes."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = cfg.p
    B = np.eye(p)
    nonzero = rng.random((p, p)) >= cfg.pi0
    signs = np.where(rng.random((p, p)) < 0.5, 1.0, -1.0)
    magnitudes = rng.gamma(2.0, 1.0, size=(p, p))
    off = ~np.eye(p, dtype=bool)
    B[off] = (nonzero * signs * magnitudes)[off]
    return B


def gen_precision(B_true: np.ndarray) -> np.ndarray:
    """Rescale B'B to a correlation-form precision matrix (unit diagonal)."""
    G = B_true.T @ B_true
    dinv = 1.0 / np.sqrt(np.diag(G))
    if not np.all(np.isfinite(dinv)):
        raise ValidationError("structural truth is singular; regenerate upstream")
    return dinv[:, None] * G * dinv[None, :]


def _true_edges(B_true: np.ndarray) -> list:
    p = B_true.shape[0]
    return [(k, i) for i in range(p) for k in range(p)
            if i != k and B_true[i, k] != 0.0]


def gen_dataset(cfg: SimulationConfig, rng=None):
    """Generate (ExpressionDataset, SimulationTruth) under the config."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p, n = cfg.p, cfg.n

    for _ in range(100):
        B_true = gen_structural_truth(cfg, rng)
        sign, logdet = np.linalg.slogdet(B_true)
        if sign != 0.0 and np.isfinite(logdet):
            break
    else:
        raise ValidationError("could not draw a nonsingular structural truth")
    omega = gen_precision(B_true)

    X = np.ones((n, 2))
    X[: cfg.group_split, 1] = 0.0
    b_true = rng.normal(loc=cfg.m_b, scale=np.sqrt(cfg.sigma_b2), size=(p, 2))

    # scores: W has precision omega; draw through the Cholesky factor
    L = np.linalg.cholesky(omega)
    W = solve_triangular(L.T, rng.standard_normal((p, n)), lower=False)
    Z_true = W + b_true @ X.T

    e_true = np.zeros((p, n), dtype=np.int8)
    e_true[Z_true <= cfg.cut_low] = -1
    e_true[Z_true > cfg.cut_high] = 1

    Y = rng.normal(cfg.mid_mean, cfg.mid_sd, size=(p, n))
    lows = e_true == -1
    highs = e_true == 1
    Y[lows] = rng.normal(cfg.low_mean, cfg.low_sd, size=int(lows.sum()))
    Y[highs] = rng.normal(cfg.high_mean, cfg.high_sd, size=int(highs.sum()))

    gene_ids = [f"g{i + 1:03d}" for i in range(p)]
    sample_ids = [f"n{j + 1:02d}" for j in range(cfg.group_split)] + [
        f"t{j + 1:02d}" for j in range(n - cfg.group_split)
    ]
    data = ExpressionDataset(Y=Y, X=X, gene_ids=gene_ids, sample_ids=sample_ids)
    truth = SimulationTruth(
        B_true=B_true,
        Omega_z=omega,
        E_star=_true_edges(B_true),
        W=W,
        Z_true=Z_true,
        e_true=e_true,
        b_true=b_true,
    )
    return data, truth


def gen_prior_graph(truth: SimulationTruth, cfg: SimulationConfig, rng=None) -> PriorGraph:
    """Centering graph: all true edges plus uniformly drawn false edges.

    Fills ``truth.E_tilde`` with the misspecification set.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = cfg.p
    star = set(truth.E_star)
    candidates = [(k, i) for i in range(p) for k in range(p)
                  if i != k and (k, i) not in star]
    if cfg.false_edge_count > len(candidates):
        raise ValidationError(
            f"cannot draw {cfg.false_edge_count} false edges from "
            f"{len(candidates)} free ordered pairs"
        )
    chosen = rng.choice(len(candidates), size=cfg.false_edge_count, replace=False)
    truth.E_tilde = [candidates[c] for c in chosen]
    graph = ReciprocalGraph(p, truth.E_star + truth.E_tilde)
    return PriorGraph(graph)


def simulate_all(cfg: SimulationConfig):
    """One-seed orchestration of dataset and prior graph generation."""
    rng = np.random.default_rng(cfg.seed)
    data, truth = gen_dataset(cfg, rng)
    g0 = gen_prior_graph(truth, cfg, rng)
    return data, truth, g0

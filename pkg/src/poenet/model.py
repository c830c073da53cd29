"""Data containers and density evaluations for the trinary expression mixture
and the simultaneous-equations latent Gaussian.

Observation model, per gene i and sample j with residual r = y - alpha_j - mu_i:

    e =  0   r ~ N(0, sigma2_i)
    e = +1   r ~ U(0, kappa_plus_i]      (over-expression tail)
    e = -1   r ~ U(-kappa_minus_i, 0]    (under-expression tail)

The trinary indicator e is the deterministic image of a latent probit score z
thresholded at -1 and +1. Scores of one sample follow a zero-mean Gaussian
around the covariate surface m, with precision Omega = B' H_z B where B has
unit diagonal, B[i, k] = -beta_ik on graph edges k->i, and H_z = diag(1/s_i^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .graphs import ReciprocalGraph, StructurePriorParams

KAPPA0 = 5.0  # lower bound multiplier: min(kappa-, kappa+) > KAPPA0 * sigma

LOG_2PI = math.log(2.0 * math.pi)


class ValidationError(ValueError):
    """Bad input data, configuration, or file contents (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical failure inside a chain (CLI exit code 3)."""


@dataclass
class ExpressionDataset:
    """Observed p x n expression matrix with per-sample design vectors."""

    Y: np.ndarray            # (p, n) log-ratio expression
    X: np.ndarray            # (n, d) design, explicit intercept column
    gene_ids: list
    sample_ids: list

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.Y.ndim != 2:
            raise ValidationError("expression matrix must be 2-dimensional")
        if self.X.ndim != 2 or self.X.shape[1] < 1:
            raise ValidationError("design matrix must be (n, d) with d >= 1")
        p, n = self.Y.shape
        if self.X.shape[0] != n:
            raise ValidationError(
                f"design has {self.X.shape[0]} rows but expression has {n} samples"
            )
        if len(self.gene_ids) != p or len(self.sample_ids) != n:
            raise ValidationError("id lists do not match matrix dimensions")
        if not np.all(np.isfinite(self.Y)):
            raise ValidationError("expression matrix contains missing/non-finite values")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("design matrix contains missing/non-finite values")

    @property
    def p(self):
        return self.Y.shape[0]

    @property
    def n(self):
        return self.Y.shape[1]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass
class MixtureParams:
    """Sample effects, gene effects, and mixture component scales."""

    alpha: np.ndarray        # (n,) sample effects, sum to zero
    mu: np.ndarray           # (p,) gene effects
    sigma2: np.ndarray       # (p,) normal-component variances
    kappa_minus: np.ndarray  # (p,) lower tail widths
    kappa_plus: np.ndarray   # (p,) upper tail widths


@dataclass
class MixtureHyperParams:
    """Conditionally conjugate priors for the mixture block.

    mu_i ~ N(th_mu, tau_mu2); 1/sigma2_i ~ Gamma(gamma_sigma, lambda_sigma);
    1/kappa_i ~ Gamma(gamma_kappa_*, lambda_kappa_*) per tail, jointly
    restricted to min(kappa-, kappa+) > kappa0 * sigma; alpha_j ~ N(0, tau_alpha2)
    recentered to sum to zero. Gamma(a, b) has expectation a/b.
    """

    th_mu: float = 0.0
    tau_mu2: float = 100.0
    gamma_sigma: float = 2.0
    lambda_sigma: float = 2.0
    gamma_kappa_minus: float = 2.0
    lambda_kappa_minus: float = 10.0
    gamma_kappa_plus: float = 2.0
    lambda_kappa_plus: float = 10.0
    tau_alpha2: float = 100.0
    kappa0: float = KAPPA0

    def __post_init__(self):
        for name in (
            "tau_mu2", "gamma_sigma", "lambda_sigma", "gamma_kappa_minus",
            "lambda_kappa_minus", "gamma_kappa_plus", "lambda_kappa_plus",
            "tau_alpha2", "kappa0",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"hyperparameter {name} must be positive")


@dataclass
class SEMHyperParams:
    """Priors for the latent-score block.

    1/s_i^2 ~ Gamma(a_s, b_s); beta ~ N(0, sigma2_beta) on included edges;
    covariate effects b_i ~ N(0, tau_b2 * I).
    """

    a_s: float = 2.0
    b_s: float = 2.0
    sigma2_beta: float = 1.0
    tau_b2: float = 100.0

    def __post_init__(self):
        for name in ("a_s", "b_s", "sigma2_beta", "tau_b2"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"hyperparameter {name} must be positive")


@dataclass
class ModelHyperParams:
    """All fixed hyperparameters of one analysis."""

    mixture: MixtureHyperParams = field(default_factory=MixtureHyperParams)
    sem: SEMHyperParams = field(default_factory=SEMHyperParams)
    structure: StructurePriorParams = field(default_factory=StructurePriorParams)


@dataclass
class LatentState:
    """Probit scores and their trinary image; E == indicator(Z) everywhere."""

    Z: np.ndarray            # (p, n) float
    E: np.ndarray            # (p, n) int8 in {-1, 0, 1}


@dataclass
class SEMParams:
    """Structural matrix, innovation variances, and covariate effects.

    B has unit diagonal; off-diagonal (i, k) holds -beta_ik and is zero unless
    k->i is in the current graph. sigma2_beta and tau_b2 are the (fixed) prior
    variances of beta and of the covariate effects.
    """

    B: np.ndarray            # (p, p)
    s2: np.ndarray           # (p,) innovation variances
    b_coeffs: np.ndarray     # (p, d) covariate effects
    sigma2_beta: float = 1.0
    tau_b2: float = 100.0


@dataclass
class ChainState:
    """Full MCMC state of one chain at one iteration."""

    mixture: MixtureParams
    sem: SEMParams
    latent: LatentState
    graph: ReciprocalGraph
    phi: float
    iteration: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    # cached log|det B| as (sign, logabsdet); refreshed on accepted B changes
    logdet: tuple = (1.0, 0.0)
    # cached covariate surface m = b_coeffs @ X', kept current by the kernels
    mean_cache: np.ndarray = field(default=None, repr=False)


def indicator_from_score(z: float) -> int:
    """Threshold a probit score at -1 and +1 (upper cut right-open)."""
    if z > 1.0:
        return 1
    if z > -1.0:
        return 0
    return -1


def indicators_from_scores(Z: np.ndarray) -> np.ndarray:
    """Vectorized trinary thresholding of a score array."""
    E = np.zeros(np.shape(Z), dtype=np.int8)
    E[np.asarray(Z) > 1.0] = 1
    E[np.asarray(Z) <= -1.0] = -1
    return E


def mixture_log_density(y, e, alpha, mu, sigma2, kminus, kplus) -> float:
    """Log density of one observation given its trinary class.

    Out-of-support tail residuals return -inf rather than raising.
    """
    r = y - alpha - mu
    if e == 0:
        return -0.5 * (LOG_2PI + math.log(sigma2) + r * r / sigma2)
    if e == 1:
        return -math.log(kplus) if 0.0 < r <= kplus else -math.inf
    if e == -1:
        return -math.log(kminus) if -kminus < r <= 0.0 else -math.inf
    raise ValueError(f"indicator must be in {{-1, 0, 1}}, got {e}")


def mean_surface(X: np.ndarray, b_coeffs: np.ndarray) -> np.ndarray:
    """Covariate mean surface m[i, j] = x_j . b_i, shape (p, n)."""
    X = np.asarray(X, dtype=float)
    b = np.asarray(b_coeffs, dtype=float)
    if X.ndim != 2 or b.ndim != 2 or X.shape[1] != b.shape[1]:
        raise ValidationError(
            f"design {X.shape} and coefficients {b.shape} do not agree"
        )
    return b @ X.T


def sem_precision(sem: SEMParams) -> np.ndarray:
    """Dense score precision Omega = B' H_z B with H_z = diag(1/s2)."""
    return sem.B.T @ (sem.B / sem.s2[:, None])


def sem_log_density(z_col: np.ndarray, m_col: np.ndarray, sem: SEMParams) -> float:
    """Log joint density of one sample's score vector.

    Equals log|det B| - sum_i log(2 pi s_i^2)/2 - ||H^(1/2) B (z - m)||^2 / 2.
    """
    z_col = np.asarray(z_col, dtype=float)
    m_col = np.asarray(m_col, dtype=float)
    p = sem.B.shape[0]
    sign, logabsdet = np.linalg.slogdet(sem.B)
    if sign == 0 or not np.isfinite(logabsdet):
        raise NumericalError("structural matrix B is singular")
    resid = sem.B @ (z_col - m_col)
    return float(
        logabsdet
        - 0.5 * np.sum(np.log(2.0 * np.pi * sem.s2))
        - 0.5 * np.sum(resid * resid / sem.s2)
    )


def conditional_score_law(i, z_col, m_col, sem: SEMParams):
    """Mean and variance of score i given the other scores of a sample.

    With Omega = B' H_z B: var = 1/omega_ii and
    mean = m_i - sum_{k != i} (omega_ik / omega_ii)(z_k - m_k).
    """
    z_col = np.asarray(z_col, dtype=float)
    m_col = np.asarray(m_col, dtype=float)
    col_i = sem.B[:, i] / sem.s2
    omega_row = sem.B.T @ col_i  # row i of Omega
    w_ii = omega_row[i]
    if not w_ii > 0.0:
        raise NumericalError(f"nonpositive conditional precision at node {i}")
    dz = z_col - m_col
    mean = m_col[i] - (omega_row @ dz - w_ii * dz[i]) / w_ii
    return float(mean), float(1.0 / w_ii)


_CLASS_INTERVALS = {-1: (-np.inf, -1.0), 0: (-1.0, 1.0), 1: (1.0, np.inf)}


def orthant_probability_reference(e_col, m_col, sem: SEMParams) -> float:
    """Probability of a trinary configuration by direct quadrature (p <= 3).

    Integrates the score density over the box of threshold intervals implied
    by e_col. Test-support oracle only; absolute error about 1e-6.
    """
    e_col = list(e_col)
    p = len(e_col)
    if p > 3:
        raise ValueError(f"reference integration limited to p <= 3, got p={p}")
    if p == 1:
        # univariate: exact via the normal CDF of the marginal law
        var = 1.0 / sem_precision(sem)[0, 0]
        lo, hi = _CLASS_INTERVALS[e_col[0]]
        sd = math.sqrt(var)
        m = float(np.asarray(m_col).ravel()[0])
        hi_p = ndtr((hi - m) / sd) if np.isfinite(hi) else 1.0
        lo_p = ndtr((lo - m) / sd) if np.isfinite(lo) else 0.0
        return float(hi_p - lo_p)
    ranges = [_CLASS_INTERVALS[e] for e in e_col]
    B = sem.B
    s2 = sem.s2
    m = np.asarray(m_col, dtype=float)
    sign, logabsdet = np.linalg.slogdet(B)
    if sign == 0:
        raise NumericalError("structural matrix B is singular")
    lognorm = logabsdet - 0.5 * np.sum(np.log(2.0 * np.pi * s2))

    def dens(*zs):
        resid = B @ (np.array(zs) - m)
        return math.exp(lognorm - 0.5 * np.sum(resid * resid / s2))

    val, _ = integrate.nquad(
        dens, ranges, opts={"epsabs": 1e-8, "epsrel": 1e-8}
    )
    return float(val)

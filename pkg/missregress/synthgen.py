"""
Synthetic data generation and theoretical risk bounds

Covariates are Gaussian with covariance Q diag(1, 1/2, ..., 1/d) Q^T for a
seeded random orthogonal Q; masks are independent Bernoulli(p_j) per feature.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .core import MaskedDataset, MissingnessModel, Observation
from .errors import InvalidData
from .polyfeat import FeatureMap, expand_complete, expand_dataset

logger = logging.getLogger(__name__)


@dataclass
class SynthConfig:
    """Parameters of the synthetic linear model"""
    d: int
    n: int
    p: Union[float, Sequence[float]] = 1.0
    noise_std: float = 1.0
    beta_star: Optional[Sequence[float]] = None
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise InvalidData(f"d and n must be positive, got d={self.d}, n={self.n}")
        if not math.isfinite(self.noise_std) or self.noise_std < 0:
            raise InvalidData(f"noise_std must be >= 0, got {self.noise_std}")
        p = np.broadcast_to(np.asarray(self.p, dtype=np.float64), (self.d,)).copy()
        if np.any(p <= 0) or np.any(p > 1):
            raise InvalidData(f"Observation probabilities must lie in (0, 1], got {p}")
        self.p = p

    @property
    def eigenvalues(self) -> np.ndarray:
        """1, 1/2, ..., 1/d"""
        return 1.0 / np.arange(1, self.d + 1)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """Complete data (for probes only) alongside the masked stream"""
    X: np.ndarray
    y: np.ndarray
    data: MaskedDataset
    miss: MissingnessModel
    sigma: np.ndarray
    beta_star: np.ndarray
    feature_map: Optional[FeatureMap] = None

    def observations(self) -> List[Observation]:
        return list(self.data.observations())

    def __iter__(self) -> Iterator:
        """Unpack as (X, y, observations, miss)"""
        return iter((self.X, self.y, self.observations(), self.miss))


@dataclass(frozen=True, eq=False)
class Split:
    """Train part (masked, plus its complete version) and a complete test part"""
    train: MaskedDataset
    X_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """
    Haar-distributed orthogonal matrix

    QR of a standard Gaussian matrix, with columns flipped so the triangular
    factor has a positive diagonal (makes the factorization unique).
    """
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def covariance_matrix(Q: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    return (Q * eigenvalues) @ Q.T


def heterogeneous_probs(d: int, low: float, high: float, rng: np.random.Generator) -> np.ndarray:
    """p_j drawn uniformly in [low, high]"""
    if not 0 < low <= high <= 1:
        raise InvalidData(f"Need 0 < low <= high <= 1, got [{low}, {high}]")
    return rng.uniform(low, high, size=d)


def _gaussian_design(cfg: SynthConfig, rng: np.random.Generator):
    Q = random_orthogonal(cfg.d, rng)
    scale = np.sqrt(cfg.eigenvalues)
    X = rng.standard_normal((cfg.n, cfg.d)) @ (Q * scale).T
    return X, covariance_matrix(Q, cfg.eigenvalues)


def _bernoulli_mask(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.random((cfg.n, cfg.d)) < cfg.p


def generate(cfg: SynthConfig) -> SyntheticData:
    """
    Draw X ~ N(0, Sigma), y = X beta* + eps, and Bernoulli(p_j) masks

    Args:
        cfg: Generator parameters; beta_star defaults to ones / sqrt(d)

    Returns:
        SyntheticData with both the complete and the masked data
    """
    rng = np.random.default_rng(cfg.seed)
    beta_star = (np.full(cfg.d, 1.0 / math.sqrt(cfg.d)) if cfg.beta_star is None
                 else np.asarray(cfg.beta_star, dtype=np.float64))
    if beta_star.shape != (cfg.d,):
        raise InvalidData(f"beta_star has shape {beta_star.shape}, expected ({cfg.d},)")

    X, sigma = _gaussian_design(cfg, rng)
    y = X @ beta_star + cfg.noise_std * rng.standard_normal(cfg.n)
    mask = _bernoulli_mask(cfg, rng)
    data = MaskedDataset(np.where(mask, X, 0.0), mask, y)
    logger.info(f"Generated n={cfg.n}, d={cfg.d}, observed fraction {mask.mean():.3f}")
    return SyntheticData(X=X, y=y, data=data, miss=MissingnessModel.supplied(cfg.p),
                         sigma=sigma, beta_star=beta_star)


def generate_poly(cfg: SynthConfig, fm: Optional[FeatureMap] = None) -> SyntheticData:
    """
    Mixed-effects generator: y depends on the degree-2 features only

    Raw covariates and masks are drawn as in generate(); the response is
    built from the expanded design, and raw masks propagate to it.

    Args:
        cfg: Generator parameters over the raw variables; beta_star, when given,
            lives in the expanded space
        fm: Feature map (full degree-2 expansion by default)

    Returns:
        SyntheticData whose X and data are expanded; miss stays over raw variables
    """
    fm = fm or FeatureMap.degree2(cfg.d)
    if fm.d_raw != cfg.d:
        raise InvalidData(f"FeatureMap has {fm.d_raw} raw variables, config has d={cfg.d}")
    if cfg.beta_star is None:
        higher = np.array([len(f) == 2 for f in fm.features], dtype=np.float64)
        beta_star = higher / np.linalg.norm(higher) if higher.any() else np.zeros(fm.d_exp)
    else:
        beta_star = np.asarray(cfg.beta_star, dtype=np.float64)
    if beta_star.shape != (fm.d_exp,):
        raise InvalidData(f"beta_star has shape {beta_star.shape}, expected ({fm.d_exp},)")

    rng = np.random.default_rng(cfg.seed)
    X_raw, sigma = _gaussian_design(cfg, rng)
    X = expand_complete(X_raw, fm)
    y = X @ beta_star + cfg.noise_std * rng.standard_normal(cfg.n)
    mask = _bernoulli_mask(cfg, rng)
    raw = MaskedDataset(np.where(mask, X_raw, 0.0), mask, y)
    return SyntheticData(X=X, y=y, data=expand_dataset(raw, fm), miss=MissingnessModel.supplied(cfg.p),
                         sigma=sigma, beta_star=beta_star, feature_map=fm)


def train_test_split(synth: SyntheticData, test_fraction: float = 0.3, seed: int = 0) -> Split:
    """
    Random split where the test part keeps its complete covariates

    Args:
        synth: Generated data
        test_fraction: Share of rows held out
        seed: Shuffle seed
    """
    if not 0 < test_fraction < 1:
        raise InvalidData(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(synth.data)
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise InvalidData(f"Split of {n} rows with fraction {test_fraction} leaves an empty side")
    test, train = order[:n_test], order[n_test:]
    return Split(train=synth.data.subset(train), X_train=synth.X[train],
                 X_test=synth.X[test], y_test=synth.y[test])


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the averaged-SGD excess-risk bound"""
    gamma: float
    p_m: float
    noise_var: float
    beta_star_norm: float
    d: int
    alpha: float
    L: float
    init_dist: float

    def __post_init__(self):
        if not 0 < self.p_m <= 1:
            raise InvalidData(f"p_m must lie in (0, 1], got {self.p_m}")
        if min(self.gamma, self.noise_var, self.beta_star_norm, self.init_dist) < 0:
            raise InvalidData("gamma, noise_var, beta_star_norm and init_dist must be >= 0")
        if self.alpha <= 0 or self.L <= 0 or self.d < 1:
            raise InvalidData("alpha, L and d must be positive")


def bound_inputs_from_sample(X: np.ndarray, miss: MissingnessModel, noise_var: float,
                             beta_star: np.ndarray, alpha: float, L: float,
                             beta_0: Optional[np.ndarray] = None) -> BoundInputs:
    """
    BoundInputs with gamma taken as the realized maximum row norm

    Gaussian covariates are not almost surely bounded, so the sample maximum
    stands in for the bound; checks against it are inequality-only.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    beta_star = np.asarray(beta_star, dtype=np.float64)
    beta_0 = np.zeros_like(beta_star) if beta_0 is None else np.asarray(beta_0, dtype=np.float64)
    return BoundInputs(
        gamma=float(np.sqrt(np.max(np.sum(X * X, axis=1)))),
        p_m=miss.p_min(),
        noise_var=float(noise_var),
        beta_star_norm=float(np.linalg.norm(beta_star)),
        d=X.shape[1],
        alpha=float(alpha),
        L=float(L),
        init_dist=float(np.linalg.norm(beta_0 - beta_star)),
    )


def variance_constant(inputs: BoundInputs) -> float:
    """c(beta*) = Var(eps)/p_m^2 + (2 + 5 p_m)(1 - p_m)/p_m^3 * gamma^2 ||beta*||^2"""
    p_m = inputs.p_m
    return (inputs.noise_var / p_m ** 2
            + (2.0 + 5.0 * p_m) * (1.0 - p_m) / p_m ** 3 * inputs.gamma ** 2 * inputs.beta_star_norm ** 2)


def excess_risk_bound(inputs: BoundInputs, k: int) -> float:
    """
    Bound on E[R(beta_bar_k) - R(beta*)] for constant step alpha

    (1 / 2k) * (sqrt(c d) / (1 - sqrt(alpha L)) + ||beta_0 - beta*|| / sqrt(alpha))^2
    """
    if k < 1:
        raise InvalidData(f"k must be >= 1, got {k}")
    ratio = inputs.alpha * inputs.L
    if ratio >= 1:
        raise InvalidData(f"alpha * L = {ratio:.4g} >= 1; the bound is undefined")
    c = variance_constant(inputs)
    inner = math.sqrt(c * inputs.d) / (1.0 - math.sqrt(ratio)) + inputs.init_dist / math.sqrt(inputs.alpha)
    return inner ** 2 / (2.0 * k)


def ridge_iterate_bound(inputs: BoundInputs, lam: float, k: int) -> float:
    """Bound on E||beta_bar_k - beta*_lam||^2 under ridge: excess_risk_bound / lam"""
    if lam <= 0:
        raise InvalidData(f"Ridge iterate bound needs lam > 0, got {lam}")
    return excess_risk_bound(inputs, k) / lam


def write_csv(path: Union[str, Path], data: MaskedDataset, columns: Optional[Sequence[str]] = None,
              target: str = 'y', na_token: str = 'NA') -> Path:
    """
    Export a masked dataset as CSV, masked cells written as na_token

    Args:
        path: Output file
        data: Zero-imputed dataset
        columns: Covariate names (x1..xd by default)
        target: Name of the response column
        na_token: Token for unobserved cells

    Returns:
        The written path
    """
    columns = list(columns) if columns is not None else [f"x{j + 1}" for j in range(data.d)]
    if len(columns) != data.d:
        raise InvalidData(f"Got {len(columns)} column names for {data.d} covariates")
    if target in columns:
        raise InvalidData(f"Target name '{target}' collides with a covariate column")
    frame = pd.DataFrame(np.where(data.mask, data.values, np.nan), columns=columns)
    frame[target] = data.y
    path = Path(path)
    frame.to_csv(path, index=False, na_rep=na_token, float_format='%.17g')
    logger.info(f"Wrote {len(data)} rows to {path}")
    return path

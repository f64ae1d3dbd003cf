"""
Debiased stochastic gradients for zero-imputed rows

Zero-imputation biases the least-squares gradient; rescaling by the observation
probabilities and subtracting a diagonal correction removes that bias in
expectation over the mask.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .core import MaskedVector, MissingnessModel, RegularizerConfig
from .errors import InvalidData, NumericalError
from .polyfeat import FeatureMap, build_probability_matrix

logger = logging.getLogger(__name__)

# (values, y, beta) -> direction
Kernel = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


class GradientType(str, Enum):
    PLAIN_DEBIASED = "plain_debiased"
    RIDGE_DEBIASED = "ridge_debiased"
    POLY_DEBIASED = "poly_debiased"
    UNCORRECTED = "uncorrected"


@dataclass(frozen=True)
class GradientKind:
    """Which direction an SGD run follows"""
    kind: GradientType
    lam: float = 0.0
    feature_map: Optional[FeatureMap] = None

    def __post_init__(self):
        RegularizerConfig(self.lam)
        if self.kind == GradientType.POLY_DEBIASED and self.feature_map is None:
            raise InvalidData("Polynomial debiasing requires a FeatureMap")

    @classmethod
    def plain(cls) -> 'GradientKind':
        return cls(GradientType.PLAIN_DEBIASED)

    @classmethod
    def ridge(cls, lam: float) -> 'GradientKind':
        return cls(GradientType.RIDGE_DEBIASED, lam=float(lam))

    @classmethod
    def poly(cls, feature_map: FeatureMap, lam: float = 0.0) -> 'GradientKind':
        return cls(GradientType.POLY_DEBIASED, lam=float(lam), feature_map=feature_map)

    @classmethod
    def uncorrected(cls, lam: float = 0.0) -> 'GradientKind':
        return cls(GradientType.UNCORRECTED, lam=float(lam))

    @property
    def debiased(self) -> bool:
        return self.kind != GradientType.UNCORRECTED

    def bind(self, miss: Optional[MissingnessModel]) -> Kernel:
        """
        Precompute per-run constants and return a row kernel

        Args:
            miss: Observation probabilities of the raw variables (ignored for UNCORRECTED)

        Returns:
            Function mapping (values, y, beta) to the update direction
        """
        lam2 = 2.0 * self.lam

        if self.kind == GradientType.UNCORRECTED:
            def kernel(x, y, beta):
                return x * (x @ beta - y) + lam2 * beta
            return kernel

        if miss is None:
            raise InvalidData(f"{self.kind.value} gradient requires a MissingnessModel")

        if self.kind == GradientType.POLY_DEBIASED:
            U = build_probability_matrix(self.feature_map, miss)
            return _poly_kernel(U, self.lam)

        inv_p = 1.0 / miss.p
        debias = (1.0 - miss.p) * inv_p * inv_p

        def kernel(x, y, beta):
            xs = x * inv_p
            return xs * (xs @ beta - y) - debias * x * x * beta + lam2 * beta
        return kernel


def _poly_kernel(U: np.ndarray, lam: float) -> Kernel:
    inv_U = 1.0 / U
    inv_diag = 1.0 / np.diag(U)
    lam2 = 2.0 * lam

    # (U^-1 . x x^T) beta == x . (U^-1 (x . beta))
    def kernel(x, y, beta):
        return x * (inv_U @ (x * beta)) - inv_diag * x * y + lam2 * beta
    return kernel


def _check_dims(x: MaskedVector, beta: np.ndarray, d: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    if len(x) != d or beta.shape != (d,):
        raise InvalidData(f"Dimension mismatch: row {len(x)}, beta {beta.shape}, expected {d}")
    return beta


def _finite(g: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"Gradient has non-finite entries: {g}")
    return g


def debiased_gradient(x: MaskedVector, y: float, beta: np.ndarray,
                      miss: MissingnessModel) -> np.ndarray:
    """
    Debiased gradient of the squared loss at beta for one zero-imputed row

    Coordinate j is (x_j/p_j)(sum_l x_l beta_l/p_l - y) - ((1-p_j)/p_j^2) x_j^2 beta_j.

    Args:
        x: Zero-imputed row
        y: Response
        beta: Current iterate
        miss: Observation probabilities

    Returns:
        Direction whose expectation over the mask is the complete-data gradient
    """
    beta = _check_dims(x, beta, miss.d)
    return _finite(GradientKind.plain().bind(miss)(x.values, float(y), beta))


def debiased_gradient_ridge(x: MaskedVector, y: float, beta: np.ndarray,
                            miss: MissingnessModel, lam: float) -> np.ndarray:
    """debiased_gradient plus 2 * lam * beta"""
    if lam < 0:
        raise InvalidData(f"Ridge weight must be >= 0, got {lam}")
    beta = _check_dims(x, beta, miss.d)
    return _finite(GradientKind.ridge(lam).bind(miss)(x.values, float(y), beta))


def debiased_direction_poly(x_exp: MaskedVector, y: float, beta: np.ndarray,
                            U: np.ndarray) -> np.ndarray:
    """
    Elementwise-debiased direction for an expanded feature row

    Coordinate j is sum_l (x_j x_l / U_jl) beta_l - (x_j / U_jj) y.

    Args:
        x_exp: Expanded zero-imputed row
        y: Response
        beta: Current iterate in the expanded space
        U: Co-observation probability matrix

    Returns:
        Direction whose expectation over raw masks is the complete expanded gradient
    """
    U = np.asarray(U, dtype=np.float64)
    d = len(x_exp)
    if U.shape != (d, d):
        raise InvalidData(f"U has shape {U.shape}, expected ({d}, {d})")
    if np.any(U <= 0) or np.any(U > 1):
        raise InvalidData("U entries must lie in (0, 1]")
    beta = _check_dims(x_exp, beta, d)
    return _finite(_poly_kernel(U, 0.0)(x_exp.values, float(y), beta))


def least_squares_gradient(values: np.ndarray, y: float, beta: np.ndarray,
                           lam: float = 0.0) -> np.ndarray:
    """Plain gradient x (x^T beta - y) + 2 lam beta, no debiasing"""
    values = np.asarray(values, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if values.shape != beta.shape:
        raise InvalidData(f"Dimension mismatch: row {values.shape}, beta {beta.shape}")
    return _finite(GradientKind.uncorrected(lam).bind(None)(values, float(y), beta))

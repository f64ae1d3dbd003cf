"""
Lipschitz constant estimates for step-size calibration

The debiased gradient of a row x is Lipschitz in beta with constant
||x||^2 / p_m^2, so a dataset bound is the largest row norm over p_m^2.
With missing data the row norms are upweighted by d / (#observed entries).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_CONFIG
from .core import (
    MaskedDataset, MaskedVector, MissingnessModel, Observation, Provenance, estimate_missingness,
)
from .errors import InvalidData

logger = logging.getLogger(__name__)


class LipschitzMethod(str, Enum):
    ORACLE = "oracle"
    FROM_NA = "from_na"


@dataclass(frozen=True)
class LipschitzEstimate:
    """An estimate of L together with the step size it suggests"""
    value: float
    method: LipschitzMethod
    diagnostics: Tuple[str, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value <= 0:
            raise InvalidData(f"Lipschitz estimate must be positive and finite, got {self.value}")
        object.__setattr__(self, 'method', LipschitzMethod(self.method))

    @property
    def suggested_alpha(self) -> float:
        """ALPHA_FACTOR / L, i.e. 1 / (2L) by default"""
        return DEFAULT_CONFIG.optimizer.suggested_alpha(self.value)

    def to_dict(self) -> dict:
        return {'value': self.value, 'method': self.method.value}


def _as_mask_arrays(rows) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(rows, MaskedDataset):
        return rows.values, rows.mask
    rows = list(rows)
    if not rows:
        raise InvalidData("Cannot estimate a Lipschitz constant from zero rows")
    vectors = [r.x if isinstance(r, Observation) else r for r in rows]
    return np.stack([v.values for v in vectors]), np.stack([v.mask for v in vectors])


def _adjusted_norms(values: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, list]:
    d = values.shape[1]
    counts = mask.sum(axis=1)
    empty = counts == 0
    diagnostics = []
    if np.any(empty):
        message = f"Skipped {int(empty.sum())} row(s) with no observed entries"
        logger.warning(message)
        diagnostics.append(message)
    norms = np.sum(values * values, axis=1)
    kept = ~empty
    # d / count is exactly 1.0 for complete rows
    return norms[kept] * (d / counts[kept]), diagnostics


def lipschitz_oracle(complete_rows: np.ndarray, miss: MissingnessModel) -> LipschitzEstimate:
    """
    Oracle estimate from complete covariates: max_k ||X_k||^2 / p_m^2

    Args:
        complete_rows: (n, d) matrix of complete covariates
        miss: Observation probabilities

    Returns:
        LipschitzEstimate with method ORACLE
    """
    X = np.atleast_2d(np.asarray(complete_rows, dtype=np.float64))
    if X.size == 0:
        raise InvalidData("Cannot estimate a Lipschitz constant from an empty matrix")
    value = float(np.max(np.sum(X * X, axis=1))) / miss.p_min() ** 2
    return LipschitzEstimate(value, LipschitzMethod.ORACLE)


def lipschitz_from_na(rows: Union[MaskedDataset, Sequence[MaskedVector], Sequence[Observation]],
                      miss: Optional[MissingnessModel] = None) -> LipschitzEstimate:
    """
    Estimate from incomplete data: max_k ||X~_k||^2 d / (#observed_k) / p^_m^2

    Args:
        rows: Zero-imputed rows
        miss: Probabilities to use for p^_m; estimated from the same rows when omitted

    Returns:
        LipschitzEstimate with method FROM_NA
    """
    values, mask = _as_mask_arrays(rows)
    if miss is None:
        miss = estimate_missingness(MaskedDataset(values, mask, np.zeros(values.shape[0])))
    adjusted, diagnostics = _adjusted_norms(values, mask)
    if adjusted.size == 0:
        raise InvalidData("Every row is fully missing; cannot estimate a Lipschitz constant")
    value = float(adjusted.max()) / miss.p_min() ** 2
    return LipschitzEstimate(value, LipschitzMethod.FROM_NA, tuple(diagnostics))


def lipschitz_poly(values: np.ndarray, U: np.ndarray, mask: Optional[np.ndarray] = None) -> LipschitzEstimate:
    """
    Polynomial-feature analogue: max (adjusted) ||x_exp||^2 / min(U)

    Args:
        values: (n, d_exp) expanded design, complete or zero-imputed
        U: Co-observation probability matrix
        mask: Expanded masks; when given, row norms are upweighted as in lipschitz_from_na

    Returns:
        LipschitzEstimate (ORACLE without a mask, FROM_NA with one)
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise InvalidData("Cannot estimate a Lipschitz constant from an empty matrix")
    u_min = float(np.min(U))
    if mask is None:
        return LipschitzEstimate(float(np.max(np.sum(values * values, axis=1))) / u_min,
                                 LipschitzMethod.ORACLE)
    adjusted, diagnostics = _adjusted_norms(values, np.asarray(mask, dtype=bool))
    if adjusted.size == 0:
        raise InvalidData("Every row is fully missing; cannot estimate a Lipschitz constant")
    return LipschitzEstimate(float(adjusted.max()) / u_min, LipschitzMethod.FROM_NA, tuple(diagnostics))


class LipschitzTracker:
    """
    Incremental estimator for streaming use

    Keeps the running maximum of raw and adjusted squared row norms and the
    running observed counts per column, so a warm-up prefix can be processed
    one row at a time.
    """

    def __init__(self, d: int):
        self.d = d
        self.n = 0
        self.observed = np.zeros(d, dtype=np.int64)
        self.max_norm = 0.0
        self.max_adjusted = 0.0
        self.skipped = 0

    def observe(self, row: MaskedVector) -> None:
        """Fold one row into the running statistics"""
        if len(row) != self.d:
            raise InvalidData(f"Row has {len(row)} entries, tracker expects {self.d}")
        self.n += 1
        self.observed += row.mask
        norm = float(row.values @ row.values)
        self.max_norm = max(self.max_norm, norm)
        count = row.n_observed
        if count == 0:
            self.skipped += 1
            return
        self.max_adjusted = max(self.max_adjusted, norm * (self.d / count))

    def missingness(self) -> MissingnessModel:
        """Running p^ clamped at 1/n"""
        if self.n == 0:
            raise InvalidData("No rows observed yet")
        p_hat = np.maximum(self.observed / self.n, 1.0 / self.n)
        return MissingnessModel(p=np.minimum(p_hat, 1.0), provenance=Provenance.ESTIMATED)

    def estimate(self, method: LipschitzMethod = LipschitzMethod.FROM_NA,
                 miss: Optional[MissingnessModel] = None) -> LipschitzEstimate:
        """
        Current estimate

        Args:
            method: ORACLE uses raw norms (rows must be complete), FROM_NA the adjusted ones
            miss: Probabilities for p_m; the running p^ when omitted
        """
        miss = miss or self.missingness()
        method = LipschitzMethod(method)
        top = self.max_norm if method == LipschitzMethod.ORACLE else self.max_adjusted
        diagnostics = (f"Skipped {self.skipped} row(s) with no observed entries",) if self.skipped else ()
        return LipschitzEstimate(top / miss.p_min() ** 2, method, diagnostics)


def warmup_estimate(rows: Iterable[MaskedVector], warmup: Optional[int] = None,
                    d: Optional[int] = None) -> LipschitzEstimate:
    """
    L^NA from the first min(n, warmup) rows of a stream

    Args:
        rows: Stream of zero-imputed rows
        warmup: Prefix length (default from config, 1000)
        d: Dimension; inferred from the first row when omitted
    """
    warmup = warmup or DEFAULT_CONFIG.optimizer.LIPSCHITZ_WARMUP_ROWS
    tracker = None
    for i, row in enumerate(rows):
        if i >= warmup:
            break
        if tracker is None:
            tracker = LipschitzTracker(d or len(row))
        tracker.observe(row)
    if tracker is None:
        raise InvalidData("Cannot estimate a Lipschitz constant from an empty stream")
    logger.info(f"Lipschitz warm-up used {tracker.n} rows")
    return tracker.estimate(LipschitzMethod.FROM_NA)

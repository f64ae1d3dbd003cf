"""
CSV ingestion with NA tokens

Cells matching an NA token become masked entries holding 0; every other cell
must parse as a finite number. Optional standardization uses observed
entries only.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import AbstractSet, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_CONFIG
from .core import MaskedDataset, MissingnessModel, Observation, estimate_missingness
from .errors import InvalidData

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ColumnScaling:
    """
    Per-column standardization learned on training data

    Covariates are mapped to (x - mean) / std and the target to
    (y - target_mean) / target_std; the identity when disabled.
    """
    columns: Tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    target: str
    target_mean: float = 0.0
    target_std: float = 1.0
    enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'columns', tuple(self.columns))
        object.__setattr__(self, 'mean', np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, 'std', np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != (len(self.columns),) or self.std.shape != self.mean.shape:
            raise InvalidData("Scaling statistics must have one entry per column")
        if np.any(self.std <= 0) or self.target_std <= 0:
            raise InvalidData("Scaling standard deviations must be positive")

    @classmethod
    def identity(cls, columns: Sequence[str], target: str) -> 'ColumnScaling':
        d = len(columns)
        return cls(tuple(columns), np.zeros(d), np.ones(d), target)

    @classmethod
    def fit(cls, values: np.ndarray, mask: np.ndarray, y: np.ndarray,
            columns: Sequence[str], target: str) -> 'ColumnScaling':
        """
        Observed-entry statistics per column

        Args:
            values: Raw (n, d) values; masked cells are ignored
            mask: Observation mask
            y: Responses
            columns: Covariate names
            target: Response name

        Returns:
            Enabled ColumnScaling; constant or unobserved columns get std 1
        """
        min_std = DEFAULT_CONFIG.ingest.MIN_STD
        counts = mask.sum(axis=0)
        safe = np.maximum(counts, 1)
        observed = np.where(mask, values, 0.0)
        mean = observed.sum(axis=0) / safe
        var = np.where(mask, (values - mean) ** 2, 0.0).sum(axis=0) / safe
        std = np.sqrt(var)
        std = np.where(std < min_std, 1.0, std)
        for j in np.flatnonzero(counts == 0):
            logger.warning(f"Column '{columns[j]}' has no observed entries; left unscaled")
        y_std = float(np.std(y))
        return cls(tuple(columns), mean, std, target,
                   target_mean=float(np.mean(y)),
                   target_std=y_std if y_std >= min_std else 1.0,
                   enabled=True)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def apply_target(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def invert_target(self, y_scaled: np.ndarray) -> np.ndarray:
        return np.asarray(y_scaled, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> Dict:
        return {
            'columns': list(self.columns),
            'mean': [float(v) for v in self.mean],
            'std': [float(v) for v in self.std],
            'target': self.target,
            'target_mean': float(self.target_mean),
            'target_std': float(self.target_std),
            'enabled': bool(self.enabled),
        }

    @classmethod
    def from_dict(cls, raw: Dict) -> 'ColumnScaling':
        return cls(
            columns=tuple(raw['columns']),
            mean=np.asarray(raw['mean'], dtype=np.float64),
            std=np.asarray(raw['std'], dtype=np.float64),
            target=raw['target'],
            target_mean=float(raw['target_mean']),
            target_std=float(raw['target_std']),
            enabled=bool(raw['enabled']),
        )


@dataclass(frozen=True, eq=False)
class IngestResult:
    """Zero-imputed data plus everything learned while reading it"""
    data: MaskedDataset
    miss: MissingnessModel
    scaling: ColumnScaling
    columns: Tuple[str, ...]
    rejected_rows: int = 0

    def observations(self) -> List[Observation]:
        return list(self.data.observations())

    def __iter__(self) -> Iterator:
        """Unpack as (observations, miss, scaling)"""
        return iter((self.observations(), self.miss, self.scaling))


def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                            sep=DEFAULT_CONFIG.ingest.DELIMITER, skipinitialspace=True)
    except FileNotFoundError:
        logger.error(f"Data file not found: {path}")
        raise InvalidData(f"Data file not found: {path}")
    except pd.errors.EmptyDataError as e:
        raise InvalidData(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise InvalidData(f"{path} is not valid delimited text: {e}") from e
    if frame.shape[0] == 0:
        raise InvalidData(f"{path} has a header but no data rows")
    return frame


def _to_float(cell: str) -> float:
    # float() round-trips repr output exactly
    try:
        return float(cell)
    except ValueError:
        return math.nan


def _parse_column(cells: pd.Series, na_tokens: AbstractSet[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Numeric values (NaN where missing) and the observation mask of one column"""
    stripped = cells.str.strip()
    missing = stripped.isin(na_tokens).to_numpy()
    parsed = stripped.map(_to_float).to_numpy(dtype=np.float64)
    parsed[missing] = np.nan
    bad = ~missing & ~np.isfinite(parsed)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        # index labels survive row filtering; +2 for the header line and 1-based numbering
        row = int(cells.index[i]) + 2
        raise InvalidData(
            f"Cannot parse cell {cells.iloc[i]!r} at row {row}, column '{cells.name}' as a finite number"
        )
    return parsed, ~missing


def _parse_frame(frame: pd.DataFrame, columns: Sequence[str],
                 na_tokens: AbstractSet[str]) -> Tuple[np.ndarray, np.ndarray]:
    parsed = [_parse_column(frame[c], na_tokens) for c in columns]
    values = np.column_stack([v for v, _ in parsed]) if parsed else np.empty((len(frame), 0))
    mask = np.column_stack([m for _, m in parsed]) if parsed else np.empty((len(frame), 0), dtype=bool)
    return values, mask


def ingest_csv(path: Union[str, Path], target_column: str,
               na_tokens: Optional[AbstractSet[str]] = None,
               scale: bool = False) -> IngestResult:
    """
    Read a training CSV into zero-imputed observations

    Args:
        path: CSV file with a header line
        target_column: Name of the response column
        na_tokens: Cell strings meaning "missing" (defaults from config)
        scale: Standardize covariates and target using observed entries only

    Returns:
        IngestResult with the dataset, estimated p^, the scaling and the
        number of rows rejected for a missing target
    """
    na_tokens = DEFAULT_CONFIG.ingest.NA_TOKENS if na_tokens is None else frozenset(na_tokens)
    frame = _read_frame(path)
    if target_column not in frame.columns:
        raise InvalidData(f"Target column '{target_column}' not in {list(frame.columns)}")
    columns = [c for c in frame.columns if c != target_column]
    if not columns:
        raise InvalidData(f"{path} has no covariate columns")

    y, y_observed = _parse_column(frame[target_column], na_tokens)
    rejected = int((~y_observed).sum())
    if rejected:
        logger.warning(f"Rejected {rejected} row(s) with a missing target in {path}")
    frame = frame.loc[y_observed]
    y = y[y_observed]
    if len(frame) == 0:
        raise InvalidData(f"Every row of {path} has a missing target")

    values, mask = _parse_frame(frame, columns, na_tokens)
    if scale:
        scaling = ColumnScaling.fit(values, mask, y, columns, target_column)
        values = scaling.apply(values)
        y = scaling.apply_target(y)
    else:
        scaling = ColumnScaling.identity(columns, target_column)

    data = MaskedDataset(np.where(mask, values, 0.0), mask, y)
    miss = estimate_missingness(data)
    logger.info(
        f"Ingested {len(data)} rows x {data.d} columns from {path}; "
        f"missing fraction {1.0 - mask.mean():.3f}"
    )
    return IngestResult(data=data, miss=miss, scaling=scaling, columns=tuple(columns),
                        rejected_rows=rejected)


def load_test_csv(path: Union[str, Path], columns: Sequence[str], target_column: Optional[str] = None,
                  na_tokens: Optional[AbstractSet[str]] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Read complete test rows

    Args:
        path: CSV file with a header line
        columns: Covariate names expected by the model, in model order
        target_column: Response column; read only when present in the file
        na_tokens: Cell strings meaning "missing"

    Returns:
        (X, y) with y None when the file has no target column
    """
    na_tokens = DEFAULT_CONFIG.ingest.NA_TOKENS if na_tokens is None else frozenset(na_tokens)
    frame = _read_frame(path)
    absent = [c for c in columns if c not in frame.columns]
    if absent:
        raise InvalidData(f"{path} lacks model columns {absent}")

    X, mask = _parse_frame(frame, columns, na_tokens)
    if not mask.all():
        i, j = (int(v) for v in np.argwhere(~mask)[0])
        raise InvalidData(
            f"Test rows must be complete; row {i + 2}, column '{columns[j]}' is missing"
        )
    y = None
    if target_column is not None and target_column in frame.columns:
        y, y_observed = _parse_column(frame[target_column], na_tokens)
        if not y_observed.all():
            raise InvalidData(f"Target column '{target_column}' has missing entries in {path}")
    return X, y

"""
Core domain types for incomplete observations

A covariate row is stored as zero-imputed values plus a boolean observation
mask; NA never appears inside a numeric array.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidData

logger = logging.getLogger(__name__)


def _is_na(value) -> bool:
    if value is None:
        return True
    try:
        return math.isnan(value)
    except TypeError:
        return False


@dataclass(frozen=True, eq=False)
class MaskedVector:
    """A covariate row: zero-imputed values and observation mask (True = observed)"""
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 1 or values.shape != mask.shape:
            raise InvalidData(
                f"values and mask must be 1-d of equal length, got {values.shape} and {mask.shape}"
            )
        if np.any(values[~mask] != 0.0):
            raise InvalidData("Unobserved slots must hold 0 (zero-imputation convention)")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def to_na_row(self) -> List[Optional[float]]:
        """Re-insert NA (None) where the mask is False"""
        return [float(v) if m else None for v, m in zip(self.values, self.mask)]


@dataclass(frozen=True, eq=False)
class Observation:
    """One (covariates, response) pair; the response is always observed"""
    x: MaskedVector
    y: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.x.values)):
            raise InvalidData("Observation covariates must be finite")
        if not math.isfinite(self.y):
            raise InvalidData(f"Observation response must be finite, got {self.y}")
        object.__setattr__(self, 'y', float(self.y))


class Provenance(str, Enum):
    """Where observation probabilities came from"""
    SUPPLIED = "supplied"
    ESTIMATED = "estimated"


@dataclass(frozen=True, eq=False)
class MissingnessModel:
    """Per-feature observation probabilities p_1..p_d"""
    p: np.ndarray
    provenance: Provenance = Provenance.SUPPLIED
    diagnostics: Tuple[str, ...] = ()

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=np.float64))
        if p.ndim != 1 or p.size == 0:
            raise InvalidData(f"p must be a non-empty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
            raise InvalidData(f"Observation probabilities must lie in (0, 1], got {p}")
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    @classmethod
    def supplied(cls, p: Sequence[float]) -> 'MissingnessModel':
        return cls(p=np.asarray(p, dtype=np.float64), provenance=Provenance.SUPPLIED)

    @classmethod
    def homogeneous(cls, p: float, d: int) -> 'MissingnessModel':
        return cls(p=np.full(d, float(p)), provenance=Provenance.SUPPLIED)

    @property
    def d(self) -> int:
        return self.p.shape[0]

    def p_min(self) -> float:
        """Smallest observation probability (p_m)"""
        return float(self.p.min())

    def mean_collapsed(self) -> 'MissingnessModel':
        """Homogeneous model with the scalar mean of p (ignores heterogeneity)"""
        return MissingnessModel(
            p=np.full(self.d, float(self.p.mean())),
            provenance=self.provenance,
        )

    def to_dict(self) -> dict:
        return {
            'p': [float(v) for v in self.p],
            'provenance': self.provenance.value,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> 'MissingnessModel':
        return cls(p=np.asarray(raw['p'], dtype=np.float64), provenance=Provenance(raw['provenance']))


class StepKind(str, Enum):
    CONSTANT = "constant"
    INVERSE_SQRT = "inverse_sqrt"


@dataclass(frozen=True)
class StepPolicy:
    """Step-size rule: constant alpha, or alpha_k = 1/sqrt(k+1)"""
    kind: StepKind
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind == StepKind.CONSTANT:
            if self.alpha is None or not math.isfinite(self.alpha) or self.alpha <= 0:
                raise InvalidData(f"Constant step requires alpha > 0, got {self.alpha}")

    @classmethod
    def constant(cls, alpha: float) -> 'StepPolicy':
        return cls(StepKind.CONSTANT, float(alpha))

    @classmethod
    def inverse_sqrt(cls) -> 'StepPolicy':
        return cls(StepKind.INVERSE_SQRT)

    def step(self, k: int) -> float:
        """Step size used by update k (1-based)"""
        if self.kind == StepKind.CONSTANT:
            return self.alpha
        return 1.0 / math.sqrt(k + 1)


@dataclass(frozen=True)
class RegularizerConfig:
    """Ridge weight lambda; 0 means plain least squares"""
    lam: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise InvalidData(f"Ridge weight must be finite and >= 0, got {self.lam}")


@dataclass(eq=False)
class OptimizerState:
    """
    Mutable SGD state, owned by a single run

    beta_avg is the running mean of beta_0..beta_k (beta_0 included).
    """
    beta: np.ndarray
    beta_avg: np.ndarray
    k: int
    step: StepPolicy
    averaged: bool = True

    @classmethod
    def initial(cls, d: int, step: StepPolicy, averaged: bool = True) -> 'OptimizerState':
        return cls(beta=np.zeros(d), beta_avg=np.zeros(d), k=0, step=step, averaged=averaged)

    def advance(self, beta_new: np.ndarray) -> None:
        """Record beta_k and fold it into the running average"""
        self.k += 1
        self.beta = beta_new
        k = self.k
        self.beta_avg = (k / (k + 1)) * self.beta_avg + (1.0 / (k + 1)) * beta_new

    @property
    def estimate(self) -> np.ndarray:
        """The algorithm's output: averaged iterate for AvSGD, last iterate otherwise"""
        return self.beta_avg if self.averaged else self.beta


@dataclass(frozen=True, eq=False)
class MaskedDataset:
    """n zero-imputed rows stored contiguously, with masks and responses"""
    values: np.ndarray
    mask: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if values.ndim != 2 or values.shape != mask.shape or values.shape[0] != y.shape[0]:
            raise InvalidData(
                f"Inconsistent dataset shapes: values {values.shape}, mask {mask.shape}, y {y.shape}"
            )
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(y))):
            raise InvalidData("Dataset contains non-finite values")
        if np.any(values[~mask] != 0.0):
            raise InvalidData("Unobserved slots must hold 0 (zero-imputation convention)")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)
        object.__setattr__(self, 'y', y)

    @classmethod
    def from_observations(cls, observations: Sequence[Observation]) -> 'MaskedDataset':
        if len(observations) == 0:
            raise InvalidData("No observations")
        return cls(
            values=np.stack([o.x.values for o in observations]),
            mask=np.stack([o.x.mask for o in observations]),
            y=np.array([o.y for o in observations]),
        )

    @classmethod
    def complete(cls, X: np.ndarray, y: np.ndarray) -> 'MaskedDataset':
        X = np.asarray(X, dtype=np.float64)
        return cls(values=X, mask=np.ones(X.shape, dtype=bool), y=y)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> Observation:
        return Observation(MaskedVector(self.values[i], self.mask[i]), float(self.y[i]))

    def observations(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self[i]

    def rows(self) -> List[MaskedVector]:
        return [MaskedVector(self.values[i], self.mask[i]) for i in range(len(self))]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def subset(self, index: np.ndarray) -> 'MaskedDataset':
        return MaskedDataset(self.values[index], self.mask[index], self.y[index])

    def is_complete(self) -> bool:
        return bool(self.mask.all())

    def observed_fraction(self) -> np.ndarray:
        """Per-column fraction of observed entries"""
        return self.mask.mean(axis=0)


DataLike = Union[MaskedDataset, Sequence[Observation]]


def as_dataset(data: DataLike) -> MaskedDataset:
    """Accept either a MaskedDataset or a sequence of Observation"""
    if isinstance(data, MaskedDataset):
        return data
    return MaskedDataset.from_observations(list(data))


def masked_from_na_row(raw: Sequence[Optional[float]], d: int) -> MaskedVector:
    """
    Zero-impute a raw row

    Args:
        raw: Row of floats where None or NaN marks a missing entry
        d: Expected row length

    Returns:
        MaskedVector with zeros at missing slots
    """
    if len(raw) != d:
        raise InvalidData(f"Row has {len(raw)} entries, expected {d}")
    mask = np.array([not _is_na(v) for v in raw], dtype=bool)
    values = np.zeros(d)
    for j, v in enumerate(raw):
        if mask[j]:
            v = float(v)
            if not math.isfinite(v):
                raise InvalidData(f"Non-finite observed value {v} at position {j}")
            values[j] = v
    return MaskedVector(values, mask)


def estimate_missingness(rows: Union[DataLike, Sequence[MaskedVector]],
                         clamp_floor: Optional[float] = None) -> MissingnessModel:
    """
    Estimate p_j as the observed fraction of column j

    Args:
        rows: MaskedVectors, Observations or a MaskedDataset
        clamp_floor: Lower bound for p_j (defaults to 1/n)

    Returns:
        MissingnessModel with provenance ESTIMATED; clamped columns are listed
        in its diagnostics
    """
    if isinstance(rows, MaskedDataset):
        mask = rows.mask
    else:
        rows = list(rows)
        if not rows:
            raise InvalidData("Cannot estimate missingness from zero rows")
        masks = [r.x.mask if isinstance(r, Observation) else r.mask for r in rows]
        mask = np.stack(masks)
    n = mask.shape[0]
    if n == 0:
        raise InvalidData("Cannot estimate missingness from zero rows")
    floor = 1.0 / n if clamp_floor is None else float(clamp_floor)
    if floor <= 0:
        raise InvalidData(f"clamp_floor must be positive, got {clamp_floor}")

    p_hat = mask.mean(axis=0)
    diagnostics = []
    for j in np.flatnonzero(p_hat < floor):
        message = f"Column {j} observed fraction {p_hat[j]:.4g} clamped to {floor:.4g}"
        logger.warning(message)
        diagnostics.append(message)
    p_hat = np.maximum(p_hat, floor)
    return MissingnessModel(p=np.minimum(p_hat, 1.0), provenance=Provenance.ESTIMATED,
                            diagnostics=tuple(diagnostics))

"""
Degree-2 polynomial features with missingness bookkeeping

Each expanded feature is a multiset of raw variable indices. An expanded entry
is observed only when every raw variable in its support is observed, so the
probability that two expanded features are observed together is the product
of p_j over the union of their supports (the matrix U).
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core import MaskedDataset, MaskedVector, MissingnessModel
from .errors import InvalidData

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureMap:
    """
    Ordered list of expanded features

    Order: raw singletons, then pairs (i < j) lexicographically, then squares.
    The order is part of the model file format.
    """
    features: Tuple[Tuple[int, ...], ...]
    d_raw: int

    def __post_init__(self):
        features = tuple(tuple(sorted(int(i) for i in f)) for f in self.features)
        if len(features) < self.d_raw:
            raise InvalidData("FeatureMap must start with the raw singletons")
        for j in range(self.d_raw):
            if features[j] != (j,):
                raise InvalidData(f"Feature {j} must be the singleton ({j},), got {features[j]}")
        for f in features:
            if not 1 <= len(f) <= 2:
                raise InvalidData(f"Feature {f} has degree {len(f)}; only degree <= 2 is supported")
            if any(i < 0 or i >= self.d_raw for i in f):
                raise InvalidData(f"Feature {f} references a variable outside 0..{self.d_raw - 1}")
        object.__setattr__(self, 'features', features)

    @classmethod
    def degree2(cls, d_raw: int) -> 'FeatureMap':
        """Full degree-2 expansion of d_raw variables"""
        if d_raw < 1:
            raise InvalidData(f"d_raw must be positive, got {d_raw}")
        singles = [(j,) for j in range(d_raw)]
        pairs = [(i, j) for i in range(d_raw) for j in range(i + 1, d_raw)]
        squares = [(j, j) for j in range(d_raw)]
        return cls(features=tuple(singles + pairs + squares), d_raw=d_raw)

    @property
    def d_exp(self) -> int:
        return len(self.features)

    def support(self, f: int) -> frozenset:
        """Raw variables feature f depends on"""
        return frozenset(self.features[f])

    def support_matrix(self) -> np.ndarray:
        """(d_exp, d_raw) boolean indicator of supports"""
        S = np.zeros((self.d_exp, self.d_raw), dtype=bool)
        for a, f in enumerate(self.features):
            S[a, list(f)] = True
        return S

    def names(self, raw_names: Sequence[str] = None) -> List[str]:
        """Readable feature names such as x1, x1*x2, x1^2"""
        raw_names = list(raw_names) if raw_names is not None else [f"x{j + 1}" for j in range(self.d_raw)]
        out = []
        for f in self.features:
            if len(f) == 1:
                out.append(raw_names[f[0]])
            elif f[0] == f[1]:
                out.append(f"{raw_names[f[0]]}^2")
            else:
                out.append(f"{raw_names[f[0]]}*{raw_names[f[1]]}")
        return out

    def to_dict(self) -> Dict:
        return {'d_raw': self.d_raw, 'features': [list(f) for f in self.features]}

    @classmethod
    def from_dict(cls, raw: Dict) -> 'FeatureMap':
        return cls(features=tuple(tuple(f) for f in raw['features']), d_raw=int(raw['d_raw']))


def _index_arrays(fm: FeatureMap) -> Tuple[np.ndarray, np.ndarray]:
    # singletons repeat their only index in both arrays
    first = np.array([f[0] for f in fm.features])
    second = np.array([f[-1] for f in fm.features])
    return first, second


def _expand(values: np.ndarray, mask: np.ndarray, fm: FeatureMap) -> Tuple[np.ndarray, np.ndarray]:
    first, second = _index_arrays(fm)
    single = np.array([len(f) == 1 for f in fm.features])
    exp_values = np.where(single, values[..., first], values[..., first] * values[..., second])
    exp_mask = mask[..., first] & mask[..., second]
    exp_values = np.where(exp_mask, exp_values, 0.0)
    return exp_values, exp_mask


def expand_row(x: MaskedVector, fm: FeatureMap) -> MaskedVector:
    """
    Expand one raw row

    Args:
        x: Raw masked row of length d_raw
        fm: Feature map

    Returns:
        Expanded masked row; an expanded entry is observed iff its whole support is
    """
    if len(x) != fm.d_raw:
        raise InvalidData(f"Row has {len(x)} entries, FeatureMap expects {fm.d_raw}")
    values, mask = _expand(x.values, x.mask, fm)
    return MaskedVector(values, mask)


def expand_dataset(data: MaskedDataset, fm: FeatureMap) -> MaskedDataset:
    """Vectorized expand_row over every row of a dataset"""
    if data.d != fm.d_raw:
        raise InvalidData(f"Dataset has {data.d} columns, FeatureMap expects {fm.d_raw}")
    values, mask = _expand(data.values, data.mask, fm)
    return MaskedDataset(values, mask, data.y)


def expand_complete(X: np.ndarray, fm: FeatureMap) -> np.ndarray:
    """Expand a complete design matrix"""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != fm.d_raw:
        raise InvalidData(f"Matrix has {X.shape[-1]} columns, FeatureMap expects {fm.d_raw}")
    values, _ = _expand(X, np.ones(X.shape, dtype=bool), fm)
    return values


def build_probability_matrix(fm: FeatureMap, miss: MissingnessModel) -> np.ndarray:
    """
    Co-observation probabilities of expanded features

    U[a, b] is the product of p_j over the union of the supports of a and b.

    Args:
        fm: Feature map
        miss: Missingness model over the raw variables

    Returns:
        Dense symmetric (d_exp, d_exp) matrix with entries in (0, 1]
    """
    if miss.d != fm.d_raw:
        raise InvalidData(f"MissingnessModel has {miss.d} entries, FeatureMap expects {fm.d_raw}")
    S = fm.support_matrix()
    U = np.empty((fm.d_exp, fm.d_exp))
    for a in range(fm.d_exp):
        union = S[a] | S
        U[a] = np.where(union, miss.p, 1.0).prod(axis=1)
    logger.debug(f"Built {fm.d_exp}x{fm.d_exp} co-observation matrix, min entry {U.min():.4g}")
    return U

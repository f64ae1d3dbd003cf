"""
Self-contained fitted model

Everything predict needs (coefficients, scaling, feature map) plus the
provenance of the fit, serialized as canonical JSON so that
load -> dump reproduces the file byte for byte.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .core import MissingnessModel
from .errors import InvalidData
from .ingest import ColumnScaling
from .lipschitz import LipschitzEstimate, LipschitzMethod
from .polyfeat import FeatureMap, expand_complete
from .risk import predict

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(eq=False)
class ModelFile:
    """Fitted coefficients and the metadata of their fit"""
    d_raw: int
    miss: MissingnessModel
    beta_avg: np.ndarray
    beta: np.ndarray
    algorithm: str
    gradient: str
    alpha: float
    lam: float
    seed: int
    scaling: ColumnScaling
    feature_map: Optional[FeatureMap] = None
    lipschitz: Optional[LipschitzEstimate] = None
    imputation_means: Optional[List[float]] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.beta_avg = np.asarray(self.beta_avg, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        d = self.feature_map.d_exp if self.feature_map is not None else self.d_raw
        if self.beta_avg.shape != (d,) or self.beta.shape != (d,):
            raise InvalidData(f"Coefficient vectors must have length {d}")
        if len(self.scaling.columns) != self.d_raw:
            raise InvalidData(f"Scaling covers {len(self.scaling.columns)} columns, model has d_raw={self.d_raw}")
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidData(f"Unsupported model schema version {self.schema_version}")

    @property
    def columns(self) -> List[str]:
        return list(self.scaling.columns)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """
        Predictions for complete raw covariates in original units

        Args:
            X: (n, d_raw) unscaled test covariates

        Returns:
            Stored scaling applied, features expanded, X beta_bar, target scaling undone
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d_raw:
            raise InvalidData(f"Test matrix has {X.shape[1]} columns, model expects {self.d_raw}")
        design = self.scaling.apply(X)
        if self.feature_map is not None:
            design = expand_complete(design, self.feature_map)
        return self.scaling.invert_target(predict(design, self.beta_avg))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'd_raw': self.d_raw,
            'feature_map': self.feature_map.to_dict() if self.feature_map is not None else None,
            'missingness': self.miss.to_dict(),
            'beta_avg': [float(v) for v in self.beta_avg],
            'beta': [float(v) for v in self.beta],
            'algorithm': self.algorithm,
            'gradient': self.gradient,
            'alpha': float(self.alpha),
            'lambda': float(self.lam),
            'lipschitz': self.lipschitz.to_dict() if self.lipschitz is not None else None,
            'seed': int(self.seed),
            'scaling': self.scaling.to_dict(),
            'imputation_means': self.imputation_means,
            'extra': self.extra,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'ModelFile':
        try:
            lipschitz = raw['lipschitz']
            return cls(
                schema_version=int(raw['schema_version']),
                d_raw=int(raw['d_raw']),
                feature_map=FeatureMap.from_dict(raw['feature_map']) if raw['feature_map'] else None,
                miss=MissingnessModel.from_dict(raw['missingness']),
                beta_avg=np.asarray(raw['beta_avg'], dtype=np.float64),
                beta=np.asarray(raw['beta'], dtype=np.float64),
                algorithm=raw['algorithm'],
                gradient=raw['gradient'],
                alpha=float(raw['alpha']),
                lam=float(raw['lambda']),
                lipschitz=(LipschitzEstimate(float(lipschitz['value']), LipschitzMethod(lipschitz['method']))
                           if lipschitz else None),
                seed=int(raw['seed']),
                scaling=ColumnScaling.from_dict(raw['scaling']),
                imputation_means=raw.get('imputation_means'),
                extra=raw.get('extra') or {},
            )
        except (KeyError, TypeError) as e:
            raise InvalidData(f"Malformed model file: {e}") from e

    def dumps(self) -> str:
        """Canonical JSON text"""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> 'ModelFile':
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidData(f"Model file is not valid JSON: {e}") from e
        return cls.from_dict(raw)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.dumps())
        logger.info(f"Saved model to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ModelFile':
        path = Path(path)
        if not path.exists():
            raise InvalidData(f"Model file not found: {path}")
        return cls.loads(path.read_text())

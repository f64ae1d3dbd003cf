"""
missregress Configuration

All tunable defaults in one place, plus the benchmark configuration file format.
"""
import math
import os
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .errors import InvalidData

logger = logging.getLogger(__name__)


@dataclass
class OptimizerDefaults:
    """SGD driver defaults"""
    # Trace spacing: 0 means geometric k in {1, 2, 4, ...} plus the final iteration
    TRACE_EVERY = 0

    # step size alpha = ALPHA_FACTOR / L keeps the averaged-SGD guarantee
    ALPHA_FACTOR = 0.5

    # Rows used to estimate L before a single streaming pass
    LIPSCHITZ_WARMUP_ROWS = 1000

    # Abort on the first non-finite coordinate
    CHECK_DIVERGENCE = True

    def suggested_alpha(self, lipschitz: float) -> float:
        """
        Step size suggested for a Lipschitz constant

        Args:
            lipschitz: Estimated Lipschitz constant L (> 0)

        Returns:
            ALPHA_FACTOR / L
        """
        if lipschitz <= 0:
            raise InvalidData(f"Lipschitz constant must be positive, got {lipschitz}")
        return self.ALPHA_FACTOR / lipschitz


@dataclass
class IngestDefaults:
    """CSV ingestion defaults"""
    NA_TOKENS = frozenset({"NA", "NaN", "", "null"})
    DELIMITER = ","

    # Constant columns are divided by 1 instead of 0 when standardizing
    MIN_STD = 1e-12

    def parse_na_tokens(self, raw: Optional[str]) -> frozenset:
        """Parse a comma separated token list from the command line"""
        if raw is None:
            return self.NA_TOKENS
        return frozenset(token.strip() for token in raw.split(","))


@dataclass
class BenchDefaults:
    """Per-scenario benchmark defaults"""
    SCENARIOS = {
        'fig1_right': {
            'd': 10, 'n': 100000, 'p': 0.7, 'passes': 1, 'sampling': 'stream', 'reference': 'population',
            'algorithms': ['avsgd', 'sgd_decay', 'sgd_const'],
        },
        'fig1_left': {
            'd': 10, 'n': 1000, 'p': 0.7, 'passes': 100, 'sampling': 'without_replacement',
            'reference': 'population',
            'algorithms': ['avsgd', 'sgd_decay', 'sgd_const'],
        },
        'fig2': {
            'd': 10, 'n': 100000, 'p_range': [0.5, 1.0], 'passes': 1, 'sampling': 'stream',
            'reference': 'population',
            'algorithms': ['avsgd', 'avsgd_homogeneous'],
        },
        'figS1': {
            'd': 10, 'n': 100000, 'p': 0.7, 'passes': 1, 'sampling': 'stream', 'reference': 'population',
            'algorithms': ['avsgd', 'avsgd_lna'],
        },
        'figS3': {
            'd': 2, 'n': 100000, 'p': 0.7, 'passes': 1, 'sampling': 'stream', 'poly2': True,
            'algorithms': ['avsgd', 'avsgd_complete', 'avsgd_zero_imputed'],
        },
        'prediction': {
            'd': 20, 'n': 20000, 'p_range': [0.7, 1.0], 'passes': 1, 'sampling': 'stream',
            'test_fraction': 0.3,
            'algorithms': ['avsgd', 'avsgd_complete', 'mean_avsgd', 'complete_case'],
        },
        'custom': {
            'd': 10, 'n': 10000, 'p': 0.7, 'passes': 1, 'sampling': 'stream',
            'algorithms': ['avsgd'],
        },
    }

    TRACE_QUANTILES = (0.1, 0.5, 0.9)

    def scenario_defaults(self, scenario: str) -> Dict[str, Any]:
        """Defaults for a scenario name"""
        if scenario not in self.SCENARIOS:
            raise InvalidData(
                f"Unknown scenario '{scenario}', expected one of {sorted(self.SCENARIOS)}"
            )
        return dict(self.SCENARIOS[scenario])


@dataclass
class RuntimeDefaults:
    """Process-level settings"""
    THREADS_ENV_VAR = "MISSREGRESS_THREADS"

    EXIT_OK = 0
    EXIT_DATA_ERROR = 2
    EXIT_NUMERICAL_ERROR = 3

    def get_max_workers(self) -> int:
        """
        Replication parallelism cap

        Returns:
            Value of MISSREGRESS_THREADS, or the CPU count when unset
        """
        raw = os.getenv(self.THREADS_ENV_VAR)
        if raw is None:
            return os.cpu_count() or 1
        try:
            workers = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {self.THREADS_ENV_VAR}={raw!r}")
            return os.cpu_count() or 1
        return max(1, workers)


@dataclass
class MissRegressConfig:
    """Main configuration"""
    optimizer: OptimizerDefaults
    ingest: IngestDefaults
    bench: BenchDefaults
    runtime: RuntimeDefaults

    @classmethod
    def default(cls) -> 'MissRegressConfig':
        """Create default configuration"""
        return cls(
            optimizer=OptimizerDefaults(),
            ingest=IngestDefaults(),
            bench=BenchDefaults(),
            runtime=RuntimeDefaults()
        )

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization"""
        return {
            'optimizer': {
                'trace_every': self.optimizer.TRACE_EVERY,
                'alpha_factor': self.optimizer.ALPHA_FACTOR,
                'lipschitz_warmup_rows': self.optimizer.LIPSCHITZ_WARMUP_ROWS,
            },
            'ingest': {
                'na_tokens': sorted(self.ingest.NA_TOKENS),
                'delimiter': self.ingest.DELIMITER,
            },
            'bench': {
                'scenarios': sorted(self.bench.SCENARIOS),
                'trace_quantiles': list(self.bench.TRACE_QUANTILES),
            },
            'runtime': {
                'threads_env_var': self.runtime.THREADS_ENV_VAR,
            }
        }


# Global default configuration instance
DEFAULT_CONFIG = MissRegressConfig.default()


SAMPLING_MODES = ('stream', 'without_replacement', 'with_replacement')
REFERENCE_KINDS = ('erm', 'population')


@dataclass
class BenchConfig:
    """One benchmark experiment, usually loaded from YAML"""
    scenario: str
    d: int
    n: int
    p: Optional[Union[float, List[float]]] = None
    p_range: Optional[Tuple[float, float]] = None
    seed: int = 0
    replications: int = 1
    passes: int = 1
    sampling: str = 'stream'
    noise_std: float = 1.0
    lam: float = 0.0
    algorithms: List[str] = field(default_factory=lambda: ['avsgd'])
    trace_every: int = 0
    test_fraction: float = 0.3
    poly2: bool = False
    beta_star: Optional[List[float]] = None
    # excess-risk reference: 'erm' (complete-sample minimizer) or 'population'
    reference: str = 'erm'
    # ridge weights tried by k-fold cross-validation on the training split
    lam_grid: Optional[List[float]] = None
    cv_folds: int = 3

    def __post_init__(self):
        DEFAULT_CONFIG.bench.scenario_defaults(self.scenario)
        if self.d < 1 or self.n < 1:
            raise InvalidData(f"d and n must be positive, got d={self.d}, n={self.n}")
        if self.replications < 1:
            raise InvalidData(f"replications must be >= 1, got {self.replications}")
        if self.sampling not in SAMPLING_MODES:
            raise InvalidData(f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}")
        if self.p is None and self.p_range is None:
            raise InvalidData("Either p or p_range must be given")
        if self.p_range is not None:
            low, high = self.p_range
            if not 0 < low <= high <= 1:
                raise InvalidData(f"p_range must satisfy 0 < low <= high <= 1, got {self.p_range}")
            self.p_range = (float(low), float(high))
        if isinstance(self.p, list) and len(self.p) != self.d:
            raise InvalidData(f"p has {len(self.p)} entries, expected d={self.d}")
        if not 0 < self.test_fraction < 1:
            raise InvalidData(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.noise_std < 0 or self.lam < 0:
            raise InvalidData("noise_std and lam must be nonnegative")
        if self.reference not in REFERENCE_KINDS:
            raise InvalidData(f"reference must be one of {REFERENCE_KINDS}, got {self.reference!r}")
        if self.reference == 'population' and self.poly2:
            raise InvalidData("The population reference is only defined for linear features; use reference: erm")
        if self.lam_grid is not None:
            if (not isinstance(self.lam_grid, list) or not self.lam_grid
                    or any(not math.isfinite(v) or v < 0 for v in self.lam_grid)):
                raise InvalidData(f"lam_grid must be a nonempty list of finite weights >= 0, got {self.lam_grid}")
            if self.scenario != 'prediction':
                raise InvalidData("lam_grid needs the held-out split of the prediction scenario")
            self.lam_grid = [float(v) for v in self.lam_grid]
        if self.cv_folds < 2:
            raise InvalidData(f"cv_folds must be >= 2, got {self.cv_folds}")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'BenchConfig':
        """
        Build a config from a mapping, filling scenario defaults

        Args:
            raw: Mapping with at least a 'scenario' key

        Returns:
            Validated BenchConfig
        """
        if not isinstance(raw, dict) or 'scenario' not in raw:
            raise InvalidData("Bench config must be a mapping with a 'scenario' key")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidData(f"Unknown bench config keys: {sorted(unknown)}")

        merged = DEFAULT_CONFIG.bench.scenario_defaults(raw['scenario'])
        merged.update(raw)
        # a user-supplied scalar/vector p overrides a scenario's default range
        if 'p' in raw and 'p_range' not in raw:
            merged.pop('p_range', None)
        if 'p_range' in raw and 'p' not in raw:
            merged.pop('p', None)
        return cls(**merged)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> 'BenchConfig':
        """Load a bench config from a YAML file"""
        try:
            with open(path, 'r') as f:
                raw = yaml.safe_load(f)
        except FileNotFoundError:
            logger.error(f"Bench config not found: {path}")
            raise
        except yaml.YAMLError as e:
            raise InvalidData(f"Invalid YAML in bench config {path}: {e}") from e
        return cls.from_dict(raw or {})

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary (echoed into trace headers)"""
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if out['p_range'] is not None:
            out['p_range'] = list(out['p_range'])
        return out

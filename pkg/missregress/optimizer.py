"""
Averaged SGD driver and baselines

One run is a strictly sequential recursion beta_k = beta_{k-1} - alpha_k g_k(beta_{k-1})
starting from beta_0 = 0, with the Polyak-Ruppert average
beta_bar_k = k/(k+1) beta_bar_{k-1} + 1/(k+1) beta_k maintained alongside.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, List, Optional, Set, Tuple

import numpy as np

from .config import DEFAULT_CONFIG
from .core import DataLike, MaskedDataset, MissingnessModel, OptimizerState, StepPolicy, as_dataset
from .errors import DivergenceError, InvalidData
from .gradient import GradientKind, GradientType
from .lipschitz import lipschitz_oracle

logger = logging.getLogger(__name__)

# beta -> excess risk; supplied by the caller so the optimizer never sees complete data
RiskCallback = Callable[[np.ndarray], float]


class Algorithm(str, Enum):
    AVSGD = "avsgd"
    SGD_DECAY = "sgd_decay"
    SGD_CONST = "sgd_const"


class Sampling(str, Enum):
    STREAM = "stream"
    WITHOUT_REPLACEMENT = "without_replacement"
    WITH_REPLACEMENT = "with_replacement"


@dataclass(frozen=True)
class AlgorithmSpec:
    """Which recursion to run and with which gradient"""
    algorithm: Algorithm
    gradient: GradientKind = field(default_factory=GradientKind.plain)
    alpha: Optional[float] = None
    lipschitz: Optional[float] = None
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))
        if self.algorithm != Algorithm.SGD_DECAY:
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha <= 0:
                raise InvalidData(f"{self.algorithm.value} requires a step size alpha > 0, got {self.alpha}")

    @classmethod
    def avsgd(cls, alpha: float, gradient: Optional[GradientKind] = None, **kwargs) -> 'AlgorithmSpec':
        return cls(Algorithm.AVSGD, gradient or GradientKind.plain(), alpha=alpha, **kwargs)

    @classmethod
    def sgd_decay(cls, gradient: Optional[GradientKind] = None, **kwargs) -> 'AlgorithmSpec':
        return cls(Algorithm.SGD_DECAY, gradient or GradientKind.plain(), **kwargs)

    @classmethod
    def sgd_const(cls, alpha: float, gradient: Optional[GradientKind] = None, **kwargs) -> 'AlgorithmSpec':
        return cls(Algorithm.SGD_CONST, gradient or GradientKind.plain(), alpha=alpha, **kwargs)

    @property
    def name(self) -> str:
        return self.label or self.algorithm.value

    @property
    def averaged(self) -> bool:
        return self.algorithm == Algorithm.AVSGD

    def step_policy(self) -> StepPolicy:
        if self.algorithm == Algorithm.SGD_DECAY:
            return StepPolicy.inverse_sqrt()
        return StepPolicy.constant(self.alpha)


@dataclass(frozen=True)
class RunConfig:
    """
    Pass management

    Only the first pass carries the one-pass guarantees; WITHOUT_REPLACEMENT and
    WITH_REPLACEMENT exist to reproduce multi-pass saturation.
    """
    passes: int = 1
    sampling: Sampling = Sampling.STREAM
    seed: int = 0
    trace_every: int = DEFAULT_CONFIG.optimizer.TRACE_EVERY
    keep_snapshots: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'sampling', Sampling(self.sampling))
        if self.passes < 1:
            raise InvalidData(f"passes must be >= 1, got {self.passes}")
        if self.sampling == Sampling.STREAM and self.passes != 1:
            raise InvalidData("Stream sampling visits each observation once; passes must be 1")
        if self.trace_every < 0:
            raise InvalidData(f"trace_every must be >= 0, got {self.trace_every}")


@dataclass
class TraceRecord:
    """One benchmark sample"""
    algorithm: str
    k: int
    excess_risk_avg: float
    excess_risk_last: float
    wall_ns: int
    seed: int
    averaged: bool = True
    beta_avg: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None

    @property
    def excess_risk(self) -> float:
        """Risk of the algorithm's output (averaged iterate for AvSGD)"""
        return self.excess_risk_avg if self.averaged else self.excess_risk_last


def trace_schedule(total: int, trace_every: int = 0, pass_length: Optional[int] = None) -> Set[int]:
    """
    Iterations at which the trace is sampled

    Args:
        total: Number of updates in the run
        trace_every: 0 for geometric spacing 1, 2, 4, ...; otherwise every trace_every updates
        pass_length: When given, the end of every pass is included

    Returns:
        Set of iteration indices, always containing the final one
    """
    points = {total}
    if trace_every == 0:
        k = 1
        while k < total:
            points.add(k)
            k *= 2
    else:
        points.update(range(trace_every, total, trace_every))
        points.add(1)
    if pass_length:
        points.update(range(pass_length, total + 1, pass_length))
    return points


def _index_stream(n: int, cfg: RunConfig) -> Iterator[np.ndarray]:
    if cfg.sampling == Sampling.STREAM:
        yield np.arange(n)
        return
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.passes):
        if cfg.sampling == Sampling.WITHOUT_REPLACEMENT:
            yield rng.permutation(n)
        else:
            yield rng.integers(0, n, size=n)


def _warn_on_step(spec: AlgorithmSpec) -> None:
    if spec.lipschitz is None or spec.alpha is None:
        return
    limit = 1.0 / (2.0 * spec.lipschitz)
    if spec.alpha > limit:
        logger.warning(
            f"Step size alpha={spec.alpha:.4g} exceeds 1/(2L)={limit:.4g}; "
            f"the convergence guarantee does not apply"
        )


def run(data: DataLike, miss: Optional[MissingnessModel], spec: AlgorithmSpec,
        cfg: Optional[RunConfig] = None,
        probe: Optional[RiskCallback] = None) -> Tuple[OptimizerState, List[TraceRecord]]:
    """
    Run one SGD recursion over the data

    Args:
        data: Zero-imputed observations (expanded rows for polynomial gradients)
        miss: Observation probabilities of the raw variables; may be None for uncorrected gradients
        spec: Algorithm, step size and gradient
        cfg: Pass management and tracing
        probe: Excess-risk callback; without it no trace is recorded

    Returns:
        Final state and the trace
    """
    cfg = cfg or RunConfig()
    ds = as_dataset(data)
    n = len(ds)
    if n == 0:
        raise InvalidData("Cannot run SGD on an empty dataset")
    _check_dimensions(ds, miss, spec.gradient)
    _warn_on_step(spec)

    kernel = spec.gradient.bind(miss if spec.gradient.debiased else None)
    step = spec.step_policy()
    state = OptimizerState.initial(ds.d, step, averaged=spec.averaged)
    total = n * cfg.passes
    schedule = trace_schedule(total, cfg.trace_every, n if cfg.passes > 1 else None)
    check = DEFAULT_CONFIG.optimizer.CHECK_DIVERGENCE
    values, y = ds.values, ds.y
    trace: List[TraceRecord] = []

    logger.debug(f"Running {spec.name}: n={n}, d={ds.d}, passes={cfg.passes}, sampling={cfg.sampling.value}")
    start = time.perf_counter_ns()
    k = 0
    for order in _index_stream(n, cfg):
        for i in order:
            k += 1
            beta = state.beta - step.step(k) * kernel(values[i], y[i], state.beta)
            if check and not np.all(np.isfinite(beta)):
                logger.error(f"{spec.name} diverged at k={k}")
                raise DivergenceError(k)
            state.advance(beta)
            if probe is not None and k in schedule:
                trace.append(TraceRecord(
                    algorithm=spec.name,
                    k=k,
                    excess_risk_avg=float(probe(state.beta_avg)),
                    excess_risk_last=float(probe(state.beta)),
                    wall_ns=time.perf_counter_ns() - start,
                    seed=cfg.seed,
                    averaged=spec.averaged,
                    beta_avg=state.beta_avg.copy() if cfg.keep_snapshots else None,
                    beta=state.beta.copy() if cfg.keep_snapshots else None,
                ))
    return state, trace


def _check_dimensions(ds: MaskedDataset, miss: Optional[MissingnessModel], gradient: GradientKind) -> None:
    if gradient.kind == GradientType.POLY_DEBIASED:
        fm = gradient.feature_map
        if ds.d != fm.d_exp:
            raise InvalidData(f"Expanded rows have {ds.d} columns, FeatureMap has {fm.d_exp} features")
        if miss is not None and miss.d != fm.d_raw:
            raise InvalidData(f"MissingnessModel has {miss.d} entries, FeatureMap has {fm.d_raw} raw variables")
    elif gradient.debiased and miss is not None and miss.d != ds.d:
        raise InvalidData(f"MissingnessModel has {miss.d} entries, data has {ds.d} columns")


def _naive_alpha(values: np.ndarray) -> float:
    d = values.shape[1]
    return lipschitz_oracle(values, MissingnessModel.homogeneous(1.0, d)).suggested_alpha


def mean_impute(data: DataLike) -> Tuple[MaskedDataset, np.ndarray]:
    """
    Replace missing entries by the mean of the observed entries of their column

    Returns:
        Complete dataset and the column means
    """
    ds = as_dataset(data)
    counts = ds.mask.sum(axis=0)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise InvalidData(f"Columns {empty} have no observed entries; cannot mean-impute")
    means = ds.values.sum(axis=0) / counts
    imputed = np.where(ds.mask, ds.values, means)
    return MaskedDataset.complete(imputed, ds.y), means


def run_mean_imputed(data: DataLike, cfg: Optional[RunConfig] = None, alpha: Optional[float] = None,
                     lam: float = 0.0,
                     probe: Optional[RiskCallback] = None) -> Tuple[OptimizerState, List[TraceRecord]]:
    """Standard averaged SGD on mean-imputed rows (no debiasing)"""
    imputed, means = mean_impute(data)
    logger.info(f"Mean-imputed {int((~as_dataset(data).mask).sum())} entries")
    alpha = alpha or _naive_alpha(imputed.values)
    spec = AlgorithmSpec.avsgd(alpha, GradientKind.uncorrected(lam), label='mean_avsgd')
    return run(imputed, None, spec, cfg, probe)


def run_complete_case(data: DataLike, cfg: Optional[RunConfig] = None, alpha: Optional[float] = None,
                      lam: float = 0.0,
                      probe: Optional[RiskCallback] = None) -> Tuple[OptimizerState, List[TraceRecord]]:
    """Standard averaged SGD on the fully observed rows only"""
    ds = as_dataset(data)
    keep = ds.mask.all(axis=1)
    if not keep.any():
        raise InvalidData("No fully observed rows; complete-case analysis is impossible")
    complete = ds.subset(keep)
    logger.info(f"Complete-case analysis keeps {len(complete)} of {len(ds)} rows")
    alpha = alpha or _naive_alpha(complete.values)
    spec = AlgorithmSpec.avsgd(alpha, GradientKind.uncorrected(lam), label='complete_case')
    return run(complete, None, spec, cfg, probe)


def run_zero_imputed(data: DataLike, cfg: Optional[RunConfig] = None, alpha: Optional[float] = None,
                     lam: float = 0.0,
                     probe: Optional[RiskCallback] = None) -> Tuple[OptimizerState, List[TraceRecord]]:
    """Averaged SGD on zero-imputed rows with no debiasing"""
    ds = as_dataset(data)
    alpha = alpha or _naive_alpha(ds.values)
    spec = AlgorithmSpec.avsgd(alpha, GradientKind.uncorrected(lam), label='avsgd_zero_imputed')
    return run(ds, None, spec, cfg, probe)

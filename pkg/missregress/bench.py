"""
Benchmark harness

Runs an algorithm grid on synthetic replications and writes one trace file
per replication plus an NDJSON summary of per-k quantiles. Replications run
in worker processes; every SGD run inside a replication stays sequential.
"""
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from sklearn.model_selection import KFold

from .config import DEFAULT_CONFIG, BenchConfig
from .core import MaskedDataset, MissingnessModel, OptimizerState, estimate_missingness
from .errors import InvalidData
from .gradient import GradientKind
from .lipschitz import LipschitzEstimate, lipschitz_from_na, lipschitz_oracle, lipschitz_poly
from .optimizer import (
    AlgorithmSpec, RunConfig, TraceRecord, run, run_complete_case, run_mean_imputed, run_zero_imputed,
)
from .polyfeat import FeatureMap, build_probability_matrix
from .risk import REFERENCE_CONVENTIONS, RiskProbe, predict, relative_prediction_error
from .synthgen import SynthConfig, generate, generate_poly, heterogeneous_probs, train_test_split
from .tracefile import write_trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReplicationContext:
    """Everything an arm needs for one replication"""
    data: MaskedDataset
    X: np.ndarray
    miss: MissingnessModel
    gradient: GradientKind
    lipschitz: LipschitzEstimate
    run_cfg: RunConfig
    probe: RiskProbe
    lam: float = 0.0
    feature_map: Optional[FeatureMap] = None

    @property
    def alpha(self) -> float:
        return self.lipschitz.suggested_alpha

    def spec(self, **kwargs) -> AlgorithmSpec:
        return AlgorithmSpec(gradient=self.gradient, lipschitz=self.lipschitz.value, **kwargs)

    def raw_masked(self) -> MaskedDataset:
        """Raw-variable view of the data (singletons lead the expanded layout)"""
        if self.feature_map is None:
            return self.data
        d_raw = self.feature_map.d_raw
        return MaskedDataset(self.data.values[:, :d_raw], self.data.mask[:, :d_raw], self.data.y)


ArmResult = Tuple[OptimizerState, List[TraceRecord]]
ArmRunner = Callable[[ReplicationContext], ArmResult]


def _with_ridge(estimate: LipschitzEstimate, lam: float) -> LipschitzEstimate:
    if lam == 0:
        return estimate
    return LipschitzEstimate(estimate.value + 2.0 * lam, estimate.method, estimate.diagnostics)


def _arm_avsgd(ctx: ReplicationContext) -> ArmResult:
    spec = ctx.spec(algorithm='avsgd', alpha=ctx.alpha, label='avsgd')
    return run(ctx.data, ctx.miss, spec, ctx.run_cfg, ctx.probe)


def _arm_sgd_decay(ctx: ReplicationContext) -> ArmResult:
    spec = AlgorithmSpec.sgd_decay(ctx.gradient, label='sgd_decay')
    return run(ctx.data, ctx.miss, spec, ctx.run_cfg, ctx.probe)


def _arm_sgd_const(ctx: ReplicationContext) -> ArmResult:
    spec = ctx.spec(algorithm='sgd_const', alpha=ctx.alpha, label='sgd_const')
    return run(ctx.data, ctx.miss, spec, ctx.run_cfg, ctx.probe)


def _arm_avsgd_homogeneous(ctx: ReplicationContext) -> ArmResult:
    # debias with the scalar mean of p while the masks follow the true p_j
    spec = ctx.spec(algorithm='avsgd', alpha=ctx.alpha, label='avsgd_homogeneous')
    return run(ctx.data, ctx.miss.mean_collapsed(), spec, ctx.run_cfg, ctx.probe)


def _arm_avsgd_lna(ctx: ReplicationContext) -> ArmResult:
    if ctx.feature_map is None:
        estimate = lipschitz_from_na(ctx.data)
    else:
        p_hat = estimate_missingness(ctx.raw_masked())
        U_hat = build_probability_matrix(ctx.feature_map, p_hat)
        estimate = lipschitz_poly(ctx.data.values, U_hat, ctx.data.mask)
    estimate = _with_ridge(estimate, ctx.lam)
    spec = AlgorithmSpec.avsgd(estimate.suggested_alpha, ctx.gradient, lipschitz=estimate.value, label='avsgd_lna')
    return run(ctx.data, ctx.miss, spec, ctx.run_cfg, ctx.probe)


def _arm_avsgd_complete(ctx: ReplicationContext) -> ArmResult:
    complete = MaskedDataset.complete(ctx.X, ctx.data.y)
    estimate = _with_ridge(lipschitz_oracle(ctx.X, MissingnessModel.homogeneous(1.0, ctx.X.shape[1])), ctx.lam)
    spec = AlgorithmSpec.avsgd(estimate.suggested_alpha, GradientKind.uncorrected(ctx.lam),
                               lipschitz=estimate.value, label='avsgd_complete')
    return run(complete, None, spec, ctx.run_cfg, ctx.probe)


def _arm_mean_avsgd(ctx: ReplicationContext) -> ArmResult:
    return run_mean_imputed(ctx.data, ctx.run_cfg, lam=ctx.lam, probe=ctx.probe)


def _arm_complete_case(ctx: ReplicationContext) -> ArmResult:
    return run_complete_case(ctx.data, ctx.run_cfg, lam=ctx.lam, probe=ctx.probe)


def _arm_avsgd_zero_imputed(ctx: ReplicationContext) -> ArmResult:
    return run_zero_imputed(ctx.data, ctx.run_cfg, lam=ctx.lam, probe=ctx.probe)


ARMS: Dict[str, ArmRunner] = {
    'avsgd': _arm_avsgd,
    'sgd_decay': _arm_sgd_decay,
    'sgd_const': _arm_sgd_const,
    'avsgd_homogeneous': _arm_avsgd_homogeneous,
    'avsgd_lna': _arm_avsgd_lna,
    'avsgd_complete': _arm_avsgd_complete,
    'mean_avsgd': _arm_mean_avsgd,
    'complete_case': _arm_complete_case,
    'avsgd_zero_imputed': _arm_avsgd_zero_imputed,
}


@dataclass
class ReplicationResult:
    """Output of one replication (picklable, returned from worker processes)"""
    replication: int
    header: Dict
    records: List[TraceRecord]
    final_excess_risk: Dict[str, float] = field(default_factory=dict)
    prediction_errors: Dict[str, float] = field(default_factory=dict)


@dataclass
class BenchResult:
    config: BenchConfig
    replications: List[ReplicationResult]
    trace_files: List[Path] = field(default_factory=list)
    summary_file: Optional[Path] = None

    def records(self, algorithm: str, replication: int = 0) -> List[TraceRecord]:
        return [r for r in self.replications[replication].records if r.algorithm == algorithm]

    def final_excess_risk(self, algorithm: str) -> List[float]:
        return [rep.final_excess_risk[algorithm] for rep in self.replications]


class ReplicationSeeds(NamedTuple):
    """Independent streams for one replication"""
    probs_rng: np.random.Generator
    data_seed: int
    run_seed: int
    split_seed: int
    cv_seed: int


def replication_seeds(seed: int, replication: int) -> ReplicationSeeds:
    """p_j draws, data generation, sampling order, train/test split and CV folds"""
    probs_ss, *children = np.random.SeedSequence([seed, replication]).spawn(5)
    return ReplicationSeeds(np.random.default_rng(probs_ss),
                            *(int(ss.generate_state(1)[0]) for ss in children))


def resolve_probs(cfg: BenchConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.p is not None:
        return np.broadcast_to(np.asarray(cfg.p, dtype=np.float64), (cfg.d,)).copy()
    low, high = cfg.p_range
    return heterogeneous_probs(cfg.d, low, high, rng)


@dataclass(frozen=True)
class LambdaSelection:
    """Cross-validated ridge weight and the mean held-out error of every candidate"""
    lam: float
    scores: Dict[float, float]

    def to_dict(self) -> Dict:
        return {'selected': self.lam, 'scores': [[lam, err] for lam, err in self.scores.items()]}


def select_lambda_cv(data: MaskedDataset, X: np.ndarray, miss: MissingnessModel,
                     lam_grid: Sequence[float], folds: int = 3, seed: int = 0) -> LambdaSelection:
    """
    Pick the ridge weight by k-fold cross-validation

    Each candidate runs debiased AvSGD (alpha = 1/(2(L_OR + 2 lam))) on all
    folds but one and is scored by the relative prediction error on the
    complete covariates of the held-out fold. Ties go to the earlier grid entry.

    Args:
        data: Masked training rows
        X: Complete covariates of the same rows
        miss: Observation probabilities
        lam_grid: Candidate weights (>= 0)
        folds: Number of folds (2 <= folds <= n)
        seed: Fold assignment seed

    Returns:
        LambdaSelection with the winning weight
    """
    n = len(data)
    if not lam_grid:
        raise InvalidData("lam_grid must not be empty")
    if not 2 <= folds <= n:
        raise InvalidData(f"Need 2 <= folds <= n={n}, got {folds}")
    splits = list(KFold(n_splits=folds, shuffle=True, random_state=seed).split(np.arange(n)))
    scores: Dict[float, float] = {}
    for lam in lam_grid:
        gradient = GradientKind.ridge(lam) if lam > 0 else GradientKind.plain()
        errors = []
        for train, held in splits:
            estimate = _with_ridge(lipschitz_oracle(X[train], miss), lam)
            spec = AlgorithmSpec.avsgd(estimate.suggested_alpha, gradient, lipschitz=estimate.value,
                                       label='avsgd_cv')
            state, _ = run(data.subset(train), miss, spec, RunConfig(seed=seed))
            errors.append(relative_prediction_error(predict(X[held], state.estimate), data.y[held]))
        scores[float(lam)] = float(np.mean(errors))
        logger.debug(f"lambda={lam:g}: mean held-out error {scores[float(lam)]:.4g}")
    best = min(scores, key=scores.get)
    logger.info(f"Cross-validation over {len(scores)} weight(s) selected lambda={best:g}")
    return LambdaSelection(best, scores)


def _validate_algorithms(cfg: BenchConfig) -> None:
    unknown = [a for a in cfg.algorithms if a not in ARMS]
    if unknown:
        raise InvalidData(f"Unknown algorithms {unknown}, expected a subset of {sorted(ARMS)}")


def run_replication(cfg: BenchConfig, replication: int) -> ReplicationResult:
    """
    Generate one dataset and run every configured arm on it

    Args:
        cfg: Experiment configuration
        replication: Replication index, mixed into the seed

    Returns:
        ReplicationResult with trace records and final metrics
    """
    _validate_algorithms(cfg)
    seeds = replication_seeds(cfg.seed, replication)
    p = resolve_probs(cfg, seeds.probs_rng)
    synth_cfg = SynthConfig(d=cfg.d, n=cfg.n, p=p, noise_std=cfg.noise_std,
                            beta_star=cfg.beta_star, seed=seeds.data_seed)
    synth = generate_poly(synth_cfg) if cfg.poly2 else generate(synth_cfg)

    prediction = cfg.scenario == 'prediction'
    if prediction:
        split = train_test_split(synth, cfg.test_fraction, seed=seeds.split_seed)
        data, X = split.train, split.X_train
    else:
        split = None
        data, X = synth.data, synth.X

    selection = None
    lam = cfg.lam
    if cfg.lam_grid is not None:
        selection = select_lambda_cv(data, X, synth.miss, cfg.lam_grid, cfg.cv_folds, seeds.cv_seed)
        lam = selection.lam

    fm = synth.feature_map
    if fm is not None:
        gradient = GradientKind.poly(fm, lam)
        lipschitz = lipschitz_poly(X, build_probability_matrix(fm, synth.miss))
    else:
        gradient = GradientKind.ridge(lam) if lam > 0 else GradientKind.plain()
        lipschitz = lipschitz_oracle(X, synth.miss)

    if cfg.reference == 'population':
        probe = RiskProbe.from_population(synth.sigma, synth.beta_star, lam, noise_var=cfg.noise_std ** 2)
    else:
        probe = RiskProbe.from_complete(X, data.y, lam)

    ctx = ReplicationContext(
        data=data, X=X, miss=synth.miss, gradient=gradient,
        lipschitz=_with_ridge(lipschitz, lam),
        run_cfg=RunConfig(passes=cfg.passes, sampling=cfg.sampling, seed=seeds.run_seed,
                          trace_every=cfg.trace_every),
        probe=probe,
        lam=lam,
        feature_map=fm,
    )

    header = {
        'config': cfg.to_dict(),
        'reference': REFERENCE_CONVENTIONS[cfg.reference],
        'seed': cfg.seed,
        'replication': replication,
        'data_seed': seeds.data_seed,
        'run_seed': seeds.run_seed,
        'p': [float(v) for v in p],
        'beta_star': [float(v) for v in synth.beta_star],
        'lam': lam,
        'lipschitz': ctx.lipschitz.to_dict(),
        'alpha': ctx.alpha,
    }
    if split is not None:
        header['split_seed'] = seeds.split_seed
    if selection is not None:
        header['lam_cv'] = selection.to_dict()
    result = ReplicationResult(replication=replication, header=header, records=[])
    for name in cfg.algorithms:
        logger.info(f"Replication {replication}: running {name}")
        state, trace = ARMS[name](ctx)
        result.records.extend(trace)
        result.final_excess_risk[name] = float(ctx.probe(state.estimate))
        if split is not None:
            y_hat = predict(split.X_test, state.estimate)
            result.prediction_errors[name] = relative_prediction_error(y_hat, split.y_test)
    return result


def _quantiles(values: Sequence[float], qs: Sequence[float]) -> Dict[str, float]:
    return {f"{q:g}": float(np.quantile(values, q)) for q in qs}


def summarize(results: Sequence[ReplicationResult],
              quantiles: Optional[Sequence[float]] = None) -> List[Dict]:
    """
    Per-algorithm, per-k quantiles across replications

    Only k present in every replication are summarized. Prediction errors,
    when present, add one line per algorithm.
    """
    quantiles = quantiles or DEFAULT_CONFIG.bench.TRACE_QUANTILES
    lines = []
    algorithms = list(dict.fromkeys(r.algorithm for res in results for r in res.records))
    for name in algorithms:
        by_k: Dict[int, List[TraceRecord]] = {}
        for res in results:
            for r in res.records:
                if r.algorithm == name:
                    by_k.setdefault(r.k, []).append(r)
        for k in sorted(by_k):
            group = by_k[k]
            if len(group) != len(results):
                continue
            lines.append({
                'algorithm': name,
                'k': k,
                'replications': len(group),
                'excess_risk_at_avg': _quantiles([r.excess_risk_avg for r in group], quantiles),
                'excess_risk_at_last': _quantiles([r.excess_risk_last for r in group], quantiles),
            })
    predicted = list(dict.fromkeys(name for res in results for name in res.prediction_errors))
    for name in predicted:
        errors = [res.prediction_errors[name] for res in results if name in res.prediction_errors]
        lines.append({
            'algorithm': name,
            'metric': 'relative_prediction_error',
            'replications': len(errors),
            'quantiles': _quantiles(errors, quantiles),
        })
    return lines


def write_summary(path: Union[str, Path], lines: Sequence[Dict]) -> Path:
    path = Path(path)
    with open(path, 'w') as f:
        for line in lines:
            f.write(json.dumps(line, sort_keys=True) + "\n")
    return path


def run_scenario(cfg: BenchConfig, out_dir: Optional[Union[str, Path]] = None,
                 max_workers: Optional[int] = None) -> BenchResult:
    """
    Run every replication of a scenario and write its artifacts

    Args:
        cfg: Experiment configuration
        out_dir: Directory for trace_rep{r}.csv, summary.ndjson and config.yaml; nothing is written when None
        max_workers: Parallel replications (MISSREGRESS_THREADS or CPU count by default)

    Returns:
        BenchResult with the in-memory results and written paths
    """
    _validate_algorithms(cfg)
    workers = max_workers or DEFAULT_CONFIG.runtime.get_max_workers()
    workers = max(1, min(workers, cfg.replications))
    logger.info(f"Scenario {cfg.scenario}: {cfg.replications} replication(s), {workers} worker(s)")

    reps = range(cfg.replications)
    if workers == 1:
        results = [run_replication(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_replication, [cfg] * cfg.replications, reps))

    bench = BenchResult(config=cfg, replications=results)
    if out_dir is None:
        return bench

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / 'config.yaml', 'w') as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=True)
    for res in results:
        bench.trace_files.append(write_trace(out_dir / f"trace_rep{res.replication}.csv", res.header, res.records))
    bench.summary_file = write_summary(out_dir / 'summary.ndjson', summarize(results))
    logger.info(f"Wrote {len(bench.trace_files)} trace file(s) and summary to {out_dir}")
    return bench


def loglog_slope(ks: Sequence[int], values: Sequence[float],
                 k_min: Optional[int] = None, k_max: Optional[int] = None) -> float:
    """
    Least-squares slope of log(value) against log(k) over [k_min, k_max]

    Raises:
        InvalidData: fewer than two usable points, or a nonpositive value in the window
    """
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    window = np.ones(ks.shape, dtype=bool)
    if k_min is not None:
        window &= ks >= k_min
    if k_max is not None:
        window &= ks <= k_max
    if window.sum() < 2:
        raise InvalidData("Need at least two trace points in the window to fit a slope")
    if np.any(values[window] <= 0):
        raise InvalidData("Log-log slope needs positive values")
    slope, _ = np.polyfit(np.log(ks[window]), np.log(values[window]), 1)
    return float(slope)

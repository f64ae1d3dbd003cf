"""
Command-line interface

    python -m missregress fit --data train.csv --target y --out model.json
    python -m missregress predict --model model.json --data test.csv --out pred.csv
    python -m missregress bench --config fig1_right.yaml --out results/
    python -m missregress generate --config custom.yaml --out data.csv
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .bench import replication_seeds, resolve_probs, run_scenario
from .config import DEFAULT_CONFIG, BenchConfig
from .core import MaskedDataset, MissingnessModel
from .errors import InvalidData, NumericalError
from .gradient import GradientKind
from .ingest import ingest_csv, load_test_csv
from .lipschitz import LipschitzEstimate, lipschitz_from_na, lipschitz_oracle, lipschitz_poly
from .modelfile import ModelFile
from .optimizer import AlgorithmSpec, RunConfig, mean_impute, run, run_complete_case, run_mean_imputed
from .polyfeat import FeatureMap, build_probability_matrix, expand_dataset
from .risk import relative_prediction_error
from .synthgen import SynthConfig, generate, generate_poly, train_test_split, write_csv

logger = logging.getLogger(__name__)

METHODS = ('avsgd', 'mean', 'complete-case')


def _parse_probs(raw: str, d: int) -> MissingnessModel:
    try:
        p = [float(v) for v in raw.split(',')]
    except ValueError as e:
        raise InvalidData(f"--probs must be comma separated numbers: {e}") from e
    if len(p) != d:
        raise InvalidData(f"--probs has {len(p)} entries, data has {d} covariates")
    return MissingnessModel.supplied(p)


def _estimate_lipschitz(data: MaskedDataset, miss: MissingnessModel, supplied: bool,
                        fm: Optional[FeatureMap], lam: float) -> LipschitzEstimate:
    """Oracle when p is supplied and the data complete, otherwise from the incomplete rows"""
    oracle = supplied and data.is_complete()
    if fm is not None:
        U = build_probability_matrix(fm, miss)
        estimate = lipschitz_poly(data.values, U, None if oracle else data.mask)
    elif oracle:
        estimate = lipschitz_oracle(data.values, miss)
    else:
        estimate = lipschitz_from_na(data, miss)
    if lam > 0:
        estimate = LipschitzEstimate(estimate.value + 2.0 * lam, estimate.method, estimate.diagnostics)
    logger.info(f"Lipschitz estimate {estimate.value:.4g} ({estimate.method.value})")
    return estimate


def _naive_lipschitz(values: np.ndarray, lam: float) -> LipschitzEstimate:
    base = lipschitz_oracle(values, MissingnessModel.homogeneous(1.0, values.shape[1]))
    return LipschitzEstimate(base.value + 2.0 * lam, base.method)


def cmd_fit(args: argparse.Namespace) -> ModelFile:
    """
    Ingest, optionally expand, calibrate alpha, run one pass and save the model

    Returns:
        The saved ModelFile
    """
    if args.lam < 0:
        raise InvalidData(f"--lambda must be >= 0, got {args.lam}")
    na_tokens = DEFAULT_CONFIG.ingest.parse_na_tokens(args.na_tokens)
    ingested = ingest_csv(args.data, args.target, na_tokens=na_tokens, scale=args.scale)
    raw = ingested.data
    supplied = args.probs is not None
    miss = _parse_probs(args.probs, raw.d) if supplied else ingested.miss

    fm = FeatureMap.degree2(raw.d) if args.poly2 else None
    data = expand_dataset(raw, fm) if fm is not None else raw
    run_cfg = RunConfig(seed=args.seed)
    imputation_means = None

    if args.method == 'avsgd':
        lipschitz = _estimate_lipschitz(data, miss, supplied, fm, args.lam)
        if fm is not None:
            gradient = GradientKind.poly(fm, args.lam)
        else:
            gradient = GradientKind.ridge(args.lam) if args.lam > 0 else GradientKind.plain()
        alpha = args.alpha or lipschitz.suggested_alpha
        spec = AlgorithmSpec.avsgd(alpha, gradient, lipschitz=lipschitz.value)
        state, _ = run(data, miss, spec, run_cfg)
        algorithm, gradient_name = spec.name, gradient.kind.value
    elif args.method == 'mean':
        imputed, means = mean_impute(data)
        imputation_means = [float(v) for v in means]
        lipschitz = _naive_lipschitz(imputed.values, args.lam)
        alpha = args.alpha or lipschitz.suggested_alpha
        state, _ = run_mean_imputed(data, run_cfg, alpha=alpha, lam=args.lam)
        algorithm, gradient_name = 'mean_avsgd', GradientKind.uncorrected().kind.value
    else:
        keep = data.mask.all(axis=1)
        if not keep.any():
            raise InvalidData("No fully observed rows; complete-case analysis is impossible")
        lipschitz = _naive_lipschitz(data.values[keep], args.lam)
        alpha = args.alpha or lipschitz.suggested_alpha
        state, _ = run_complete_case(data, run_cfg, alpha=alpha, lam=args.lam)
        algorithm, gradient_name = 'complete_case', GradientKind.uncorrected().kind.value

    model = ModelFile(
        d_raw=raw.d,
        feature_map=fm,
        miss=miss,
        beta_avg=state.beta_avg,
        beta=state.beta,
        algorithm=algorithm,
        gradient=gradient_name,
        alpha=alpha,
        lam=args.lam,
        lipschitz=lipschitz,
        seed=args.seed,
        scaling=ingested.scaling,
        imputation_means=imputation_means,
        extra={'n_rows': len(raw), 'rejected_rows': ingested.rejected_rows},
    )
    model.save(args.out)

    print("\n" + "=" * 60)
    print("FIT RESULT")
    print("=" * 60)
    print(f"Method: {algorithm}")
    print(f"Rows: {len(raw)} (rejected: {ingested.rejected_rows})")
    print(f"Features: {data.d}")
    print(f"p_min: {miss.p_min():.4f} ({miss.provenance.value})")
    print(f"L: {lipschitz.value:.6g} ({lipschitz.method.value}), alpha: {alpha:.6g}")
    print(f"Model: {args.out}")
    print("=" * 60)
    return model


def cmd_predict(args: argparse.Namespace) -> Optional[float]:
    """
    Predict complete test rows with a saved model

    Returns:
        Relative prediction error on the scaled target when the target column is present
    """
    model = ModelFile.load(args.model)
    na_tokens = DEFAULT_CONFIG.ingest.parse_na_tokens(args.na_tokens)
    target = args.target or model.scaling.target
    X, y = load_test_csv(args.data, model.columns, target_column=target, na_tokens=na_tokens)
    y_hat = model.predict(X)
    pd.DataFrame({'prediction': y_hat}).to_csv(args.out, index=False, float_format='%.17g')
    logger.info(f"Wrote {len(y_hat)} predictions to {args.out}")

    error = None
    if y is not None:
        scaling = model.scaling
        error = relative_prediction_error(scaling.apply_target(y_hat), scaling.apply_target(y))

    print("\n" + "=" * 60)
    print("PREDICT RESULT")
    print("=" * 60)
    print(f"Model: {args.model} ({model.algorithm})")
    print(f"Rows: {len(y_hat)}")
    if error is not None:
        print(f"Relative prediction error: {error:.6g}")
    print(f"Predictions: {args.out}")
    print("=" * 60)
    return error


def cmd_bench(args: argparse.Namespace):
    """Run a benchmark scenario and write its traces"""
    cfg = BenchConfig.from_yaml(args.config)
    result = run_scenario(cfg, args.out)

    print("\n" + "=" * 60)
    print(f"BENCH RESULT: {cfg.scenario}")
    print("=" * 60)
    for name in cfg.algorithms:
        finals = result.final_excess_risk(name)
        print(f"{name:>20}: final excess risk (median) {float(np.median(finals)):.4g}")
    for name in result.replications[0].prediction_errors:
        errors = [rep.prediction_errors[name] for rep in result.replications]
        print(f"{name:>20}: relative prediction error (median) {float(np.median(errors)):.4g}")
    print(f"Traces: {len(result.trace_files)} file(s) in {args.out}")
    print("=" * 60)
    return result


def cmd_generate(args: argparse.Namespace) -> Path:
    """Export the first replication of a scenario's synthetic data as CSV"""
    cfg = BenchConfig.from_yaml(args.config)
    seeds = replication_seeds(cfg.seed, 0)
    synth_cfg = SynthConfig(d=cfg.d, n=cfg.n, p=resolve_probs(cfg, seeds.probs_rng), noise_std=cfg.noise_std,
                            beta_star=cfg.beta_star, seed=seeds.data_seed)
    synth = generate_poly(synth_cfg) if cfg.poly2 else generate(synth_cfg)
    # the CSV holds raw variables (leading singleton columns); expansion happens at fit time
    data = MaskedDataset(synth.data.values[:, :cfg.d], synth.data.mask[:, :cfg.d], synth.y)

    if args.test_out:
        split = train_test_split(synth, cfg.test_fraction, seed=seeds.split_seed)
        train = MaskedDataset(split.train.values[:, :cfg.d], split.train.mask[:, :cfg.d], split.train.y)
        write_csv(args.out, train)
        write_csv(args.test_out, MaskedDataset.complete(split.X_test[:, :cfg.d], split.y_test))
    else:
        write_csv(args.out, data)

    print("\n" + "=" * 60)
    print("GENERATE RESULT")
    print("=" * 60)
    print(f"Scenario: {cfg.scenario}, d={cfg.d}, n={cfg.n}")
    print(f"p: {np.round(synth.miss.p, 4).tolist()}")
    print(f"Output: {args.out}" + (f", test: {args.test_out}" if args.test_out else ""))
    print("=" * 60)
    return Path(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='missregress',
        description='Averaged SGD for linear regression with missing covariates'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')
    parser.add_argument('--quiet', action='store_true', help='Warnings and errors only')
    sub = parser.add_subparsers(dest='command', required=True)

    fit = sub.add_parser('fit', help='Fit a model on a CSV file with NA entries')
    fit.add_argument('--data', required=True, help='Training CSV with a header line')
    fit.add_argument('--target', required=True, help='Response column name')
    fit.add_argument('--probs', help='Known observation probabilities p1,..,pd (estimated when omitted)')
    fit.add_argument('--lambda', dest='lam', type=float, default=0.0, help='Ridge weight (default 0)')
    fit.add_argument('--poly2', action='store_true', help='Fit on the full degree-2 feature expansion')
    step = fit.add_mutually_exclusive_group()
    step.add_argument('--alpha', type=float, help='Constant step size')
    step.add_argument('--auto-alpha', action='store_true', help='Step size 1/(2L) from the data (default)')
    fit.add_argument('--seed', type=int, default=0, help='Seed recorded in the model')
    fit.add_argument('--scale', action='store_true', help='Standardize using observed entries only')
    fit.add_argument('--method', choices=METHODS, default='avsgd',
                     help='avsgd (debiased), mean (mean imputation) or complete-case')
    fit.add_argument('--na-tokens', help='Comma separated NA tokens (default: NA,NaN,,null)')
    fit.add_argument('--out', required=True, help='Model file to write')
    fit.set_defaults(handler=cmd_fit)

    pred = sub.add_parser('predict', help='Predict complete test rows')
    pred.add_argument('--model', required=True, help='Model file written by fit')
    pred.add_argument('--data', required=True, help='Test CSV (rows must be complete)')
    pred.add_argument('--target', help='Response column for the error report (model target by default)')
    pred.add_argument('--na-tokens', help='Comma separated NA tokens')
    pred.add_argument('--out', required=True, help='Predictions CSV to write')
    pred.set_defaults(handler=cmd_predict)

    bench = sub.add_parser('bench', help='Run a benchmark scenario')
    bench.add_argument('--config', required=True, help='YAML bench configuration')
    bench.add_argument('--out', required=True, help='Output directory for traces and summary')
    bench.set_defaults(handler=cmd_bench)

    gen = sub.add_parser('generate', help='Export synthetic data as CSV with NA entries')
    gen.add_argument('--config', required=True, help='YAML bench configuration')
    gen.add_argument('--out', required=True, help='CSV to write (training part when --test-out is set)')
    gen.add_argument('--test-out', help='Also write a complete test split here')
    gen.set_defaults(handler=cmd_generate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s'
    )

    runtime = DEFAULT_CONFIG.runtime
    try:
        args.handler(args)
    except InvalidData as e:
        logger.error(f"Data error: {e}")
        return runtime.EXIT_DATA_ERROR
    except NumericalError as e:
        logger.error(f"Numerical error: {e}")
        return runtime.EXIT_NUMERICAL_ERROR
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return runtime.EXIT_DATA_ERROR
    return runtime.EXIT_OK


if __name__ == '__main__':
    sys.exit(main())

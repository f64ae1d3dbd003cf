"""
Unit tests for the averaged SGD driver and its baselines
"""
import logging

import numpy as np
import pytest

from missregress.core import MaskedDataset, MissingnessModel
from missregress.errors import DivergenceError, InvalidData
from missregress.gradient import GradientKind
from missregress.lipschitz import lipschitz_oracle
from missregress.optimizer import (
    AlgorithmSpec, RunConfig, Sampling, TraceRecord, mean_impute, run, run_complete_case, run_mean_imputed,
    run_zero_imputed, trace_schedule,
)
from missregress.polyfeat import FeatureMap
from missregress.synthgen import SynthConfig, generate, generate_poly


def zero_probe(beta):
    return 0.0


def reference_avsgd(X: np.ndarray, y: np.ndarray, alpha: float):
    """Textbook averaged SGD on complete data"""
    beta = np.zeros(X.shape[1])
    avg = np.zeros(X.shape[1])
    for k, (x, target) in enumerate(zip(X, y), start=1):
        beta = beta - alpha * (x * (x @ beta - target))
        avg = (k / (k + 1)) * avg + (1.0 / (k + 1)) * beta
    return beta, avg


class TestAvSGD:
    """Test the main recursion"""

    def test_complete_data_matches_reference(self):
        """With p = 1 the debiased run is bit-identical to plain averaged SGD"""
        synth = generate(SynthConfig(d=3, n=500, p=1.0, seed=0))
        miss = MissingnessModel.homogeneous(1.0, 3)
        alpha = lipschitz_oracle(synth.X, miss).suggested_alpha
        state, _ = run(synth.data, miss, AlgorithmSpec.avsgd(alpha))
        beta, avg = reference_avsgd(synth.X, synth.y, alpha)
        assert np.array_equal(state.beta, beta)
        assert np.array_equal(state.beta_avg, avg)
        assert state.k == 500

    def test_one_dimensional_recursion(self):
        """x = 1, y = beta*, alpha = 1/2: beta_1 = beta*/2, beta_2 = 3 beta*/4"""
        data = MaskedDataset.complete(np.ones((2, 1)), np.array([2.0, 2.0]))
        cfg = RunConfig(trace_every=1, keep_snapshots=True)
        state, trace = run(data, MissingnessModel.homogeneous(1.0, 1), AlgorithmSpec.avsgd(0.5), cfg, zero_probe)
        assert [r.beta.tolist() for r in trace] == [[1.0], [1.5]]
        # beta_bar_2 = (0 + 1 + 1.5) / 3
        assert state.beta_avg[0] == pytest.approx(2.5 / 3.0, rel=1e-15)

    def test_running_average_identity(self):
        """beta_bar_k is the mean of beta_0..beta_k at every traced k"""
        synth = generate(SynthConfig(d=4, n=64, p=0.7, seed=1))
        alpha = lipschitz_oracle(synth.X, synth.miss).suggested_alpha
        cfg = RunConfig(trace_every=1, keep_snapshots=True)
        _, trace = run(synth.data, synth.miss, AlgorithmSpec.avsgd(alpha), cfg, zero_probe)
        iterates = [np.zeros(4)] + [r.beta for r in trace]
        for record in trace:
            expected = np.mean(iterates[:record.k + 1], axis=0)
            np.testing.assert_allclose(record.beta_avg, expected, rtol=1e-12, atol=1e-15)

    def test_risk_callback_receives_both_iterates(self):
        """Traces carry the risk of the average and of the last iterate"""
        synth = generate(SynthConfig(d=2, n=32, p=0.8, seed=2))
        alpha = lipschitz_oracle(synth.X, synth.miss).suggested_alpha
        cfg = RunConfig(trace_every=1, keep_snapshots=True)
        _, trace = run(synth.data, synth.miss, AlgorithmSpec.avsgd(alpha), cfg, lambda b: float(b @ b))
        for record in trace:
            assert record.excess_risk_avg == float(record.beta_avg @ record.beta_avg)
            assert record.excess_risk_last == float(record.beta @ record.beta)
            assert record.excess_risk == record.excess_risk_avg

    def test_no_risk_callback_no_trace(self):
        """Without a probe nothing is recorded"""
        synth = generate(SynthConfig(d=2, n=20, p=0.8, seed=2))
        _, trace = run(synth.data, synth.miss, AlgorithmSpec.avsgd(0.01))
        assert trace == []

    def test_accepts_observation_sequence(self):
        """A list of Observations runs like the dataset"""
        synth = generate(SynthConfig(d=3, n=50, p=0.6, seed=3))
        spec = AlgorithmSpec.avsgd(0.01)
        a, _ = run(synth.data, synth.miss, spec)
        b, _ = run(synth.observations(), synth.miss, spec)
        assert np.array_equal(a.beta_avg, b.beta_avg)

    def test_ridge_shrinks(self):
        """A large ridge weight pulls the average towards zero"""
        synth = generate(SynthConfig(d=3, n=400, p=0.8, noise_std=0.1, seed=4))
        alpha = 0.5 / (lipschitz_oracle(synth.X, synth.miss).value + 2.0 * 5.0)
        plain, _ = run(synth.data, synth.miss, AlgorithmSpec.avsgd(alpha))
        ridge, _ = run(synth.data, synth.miss, AlgorithmSpec.avsgd(alpha, GradientKind.ridge(5.0)))
        assert np.linalg.norm(ridge.beta_avg) < np.linalg.norm(plain.beta_avg)

    def test_polynomial_gradient(self):
        """Expanded rows with raw probabilities run and stay finite"""
        synth = generate_poly(SynthConfig(d=2, n=200, p=0.7, seed=5))
        spec = AlgorithmSpec.avsgd(0.001, GradientKind.poly(synth.feature_map))
        state, _ = run(synth.data, synth.miss, spec)
        assert state.beta_avg.shape == (5,)
        assert np.all(np.isfinite(state.beta_avg))

    def test_polynomial_dimension_checks(self):
        """Expanded width and raw probabilities must match the FeatureMap"""
        synth = generate_poly(SynthConfig(d=2, n=20, p=0.7, seed=5))
        spec = AlgorithmSpec.avsgd(0.001, GradientKind.poly(FeatureMap.degree2(3)))
        with pytest.raises(InvalidData):
            run(synth.data, synth.miss, spec)
        spec = AlgorithmSpec.avsgd(0.001, GradientKind.poly(synth.feature_map))
        with pytest.raises(InvalidData):
            run(synth.data, MissingnessModel.homogeneous(0.7, 5), spec)


class TestValidation:
    """Test argument checks"""

    def test_alpha_required(self):
        """Constant-step algorithms need alpha > 0"""
        with pytest.raises(InvalidData):
            AlgorithmSpec.avsgd(None)
        with pytest.raises(InvalidData):
            AlgorithmSpec.sgd_const(-0.1)
        assert AlgorithmSpec.sgd_decay().alpha is None

    def test_stream_is_single_pass(self):
        """Stream sampling rejects passes > 1"""
        with pytest.raises(InvalidData):
            RunConfig(passes=2, sampling=Sampling.STREAM)
        assert RunConfig(passes=2, sampling='with_replacement').sampling == Sampling.WITH_REPLACEMENT

    def test_empty_data(self):
        """Zero observations are rejected"""
        with pytest.raises(InvalidData):
            run([], MissingnessModel.homogeneous(1.0, 2), AlgorithmSpec.avsgd(0.1))

    def test_dimension_mismatch(self):
        """p must cover every column"""
        data = MaskedDataset.complete(np.ones((3, 2)), np.zeros(3))
        with pytest.raises(InvalidData):
            run(data, MissingnessModel.homogeneous(1.0, 3), AlgorithmSpec.avsgd(0.1))

    def test_divergence_reports_iteration(self):
        """A huge step overflows and the failing k is reported"""
        data = MaskedDataset.complete(np.full((500, 2), 10.0), np.ones(500))
        with np.errstate(over='ignore', invalid='ignore'):
            with pytest.raises(DivergenceError) as excinfo:
                run(data, MissingnessModel.homogeneous(1.0, 2), AlgorithmSpec.sgd_const(1e3))
        assert 1 < excinfo.value.k <= 500

    def test_large_step_warning(self, caplog):
        """alpha > 1/(2L) is allowed but logged"""
        data = MaskedDataset.complete(np.full((3, 1), 0.1), np.zeros(3))
        spec = AlgorithmSpec.avsgd(1.0, lipschitz=1.0)
        with caplog.at_level(logging.WARNING, logger='missregress.optimizer'):
            run(data, MissingnessModel.homogeneous(1.0, 1), spec)
        assert any('exceeds 1/(2L)' in r.getMessage() for r in caplog.records)

    def test_no_warning_at_theory_step(self, caplog):
        """alpha = 1/(2L) is silent"""
        data = MaskedDataset.complete(np.full((3, 1), 0.1), np.zeros(3))
        with caplog.at_level(logging.WARNING, logger='missregress.optimizer'):
            run(data, MissingnessModel.homogeneous(1.0, 1), AlgorithmSpec.avsgd(0.5, lipschitz=1.0))
        assert not caplog.records


class TestVariants:
    """Test SGD variants and pass management"""

    def setup_method(self):
        """Setup test fixtures"""
        self.synth = generate(SynthConfig(d=3, n=100, p=0.7, seed=6))
        self.alpha = lipschitz_oracle(self.synth.X, self.synth.miss).suggested_alpha

    def test_decay_steps(self):
        """SGDDecay uses alpha_k = 1/sqrt(k+1) and outputs the last iterate"""
        data = MaskedDataset.complete(np.ones((2, 1)), np.array([2.0, 2.0]))
        cfg = RunConfig(trace_every=1, keep_snapshots=True)
        state, trace = run(data, MissingnessModel.homogeneous(1.0, 1), AlgorithmSpec.sgd_decay(), cfg, zero_probe)
        beta1 = 2.0 / np.sqrt(2.0)
        beta2 = beta1 - (beta1 - 2.0) / np.sqrt(3.0)
        assert trace[0].beta[0] == pytest.approx(beta1, rel=1e-15)
        assert trace[1].beta[0] == pytest.approx(beta2, rel=1e-15)
        assert not trace[0].averaged
        assert state.estimate is state.beta

    def test_const_reports_last_iterate(self):
        """SGDConst traces the last iterate as its excess risk"""
        cfg = RunConfig(trace_every=10)
        _, trace = run(self.synth.data, self.synth.miss, AlgorithmSpec.sgd_const(self.alpha), cfg,
                       lambda b: float(np.sum(b)))
        assert all(r.excess_risk == r.excess_risk_last for r in trace)

    def test_multi_pass_counts_and_determinism(self):
        """Passes multiply updates; a fixed seed reproduces the run"""
        cfg = RunConfig(passes=3, sampling=Sampling.WITHOUT_REPLACEMENT, seed=11)
        spec = AlgorithmSpec.avsgd(self.alpha)
        a, trace_a = run(self.synth.data, self.synth.miss, spec, cfg, zero_probe)
        b, trace_b = run(self.synth.data, self.synth.miss, spec, cfg, zero_probe)
        assert a.k == 300
        assert np.array_equal(a.beta_avg, b.beta_avg)
        assert [r.k for r in trace_a] == [r.k for r in trace_b]
        assert {100, 200, 300} <= {r.k for r in trace_a}

    def test_sampling_modes_differ(self):
        """With and without replacement draw different orders"""
        spec = AlgorithmSpec.avsgd(self.alpha)
        a, _ = run(self.synth.data, self.synth.miss, spec,
                   RunConfig(passes=2, sampling=Sampling.WITHOUT_REPLACEMENT, seed=1))
        b, _ = run(self.synth.data, self.synth.miss, spec,
                   RunConfig(passes=2, sampling=Sampling.WITH_REPLACEMENT, seed=1))
        assert not np.array_equal(a.beta_avg, b.beta_avg)

    def test_trace_records_seed(self):
        """Each record carries the run seed"""
        _, trace = run(self.synth.data, self.synth.miss, AlgorithmSpec.avsgd(self.alpha),
                       RunConfig(seed=42), zero_probe)
        assert all(isinstance(r, TraceRecord) and r.seed == 42 for r in trace)
        assert all(r.wall_ns >= 0 for r in trace)


class TestTraceSchedule:
    """Test sampling points"""

    def test_geometric(self):
        """Powers of two plus the final iteration"""
        assert trace_schedule(10) == {1, 2, 4, 8, 10}

    def test_regular(self):
        """Every trace_every updates, plus k = 1 and the end"""
        assert trace_schedule(10, trace_every=3) == {1, 3, 6, 9, 10}

    def test_pass_ends(self):
        """Multi-pass runs include every pass boundary"""
        assert {4, 8, 12} <= trace_schedule(12, trace_every=0, pass_length=4)

    def test_single_update(self):
        """A one-row run traces k = 1"""
        assert trace_schedule(1) == {1}


class TestBaselines:
    """Test imputation and complete-case baselines"""

    def test_mean_impute(self):
        """A column {2, NA, 4} is imputed with 3"""
        data = MaskedDataset(np.array([[2.0], [0.0], [4.0]]), np.array([[True], [False], [True]]), np.zeros(3))
        imputed, means = mean_impute(data)
        assert imputed.values[:, 0].tolist() == [2.0, 3.0, 4.0]
        assert means.tolist() == [3.0]
        assert imputed.is_complete()

    def test_mean_impute_unobserved_column(self):
        """A never-observed column cannot be mean-imputed"""
        data = MaskedDataset(np.zeros((2, 1)), np.zeros((2, 1), dtype=bool), np.zeros(2))
        with pytest.raises(InvalidData):
            mean_impute(data)

    def test_complete_case_uses_full_rows_only(self):
        """The run length equals the number of complete rows"""
        synth = generate(SynthConfig(d=3, n=200, p=0.7, seed=7))
        survivors = int(synth.data.mask.all(axis=1).sum())
        state, trace = run_complete_case(synth.data, probe=zero_probe)
        assert state.k == survivors
        assert trace[-1].k == survivors
        assert trace[-1].algorithm == 'complete_case'

    def test_complete_case_survivors_follow_p_to_the_d(self):
        """n=1000, p=0.7, d=10 keeps about n p^d = 28 rows on average"""
        counts = []
        for seed in range(20):
            synth = generate(SynthConfig(d=10, n=1000, p=0.7, seed=seed))
            state, _ = run_complete_case(synth.data)
            counts.append(state.k)
        assert abs(np.mean(counts) - 1000 * 0.7 ** 10) < 5

    def test_complete_case_needs_a_full_row(self):
        """No complete row is a data error"""
        mask = np.array([[True, False], [False, True]])
        data = MaskedDataset(np.where(mask, 1.0, 0.0), mask, np.zeros(2))
        with pytest.raises(InvalidData):
            run_complete_case(data)

    def test_mean_imputed_label_and_length(self):
        """Mean imputation keeps every row"""
        synth = generate(SynthConfig(d=3, n=150, p=0.7, seed=8))
        state, trace = run_mean_imputed(synth.data, probe=zero_probe)
        assert state.k == 150
        assert trace[-1].algorithm == 'mean_avsgd'

    def test_zero_imputed_is_uncorrected(self):
        """The zero-imputed baseline equals an uncorrected run on the same rows"""
        synth = generate(SynthConfig(d=3, n=150, p=0.7, seed=9))
        state, _ = run_zero_imputed(synth.data, alpha=0.01)
        expected, _ = run(synth.data, None, AlgorithmSpec.avsgd(0.01, GradientKind.uncorrected()))
        assert np.array_equal(state.beta_avg, expected.beta_avg)

    def test_zero_imputation_is_biased(self):
        """Correlated features: zero imputation converges about 1.29 beta*, debiasing to beta*"""
        rng = np.random.default_rng(10)
        n = 50000
        z, e = rng.standard_normal(n), rng.standard_normal(n)
        X = np.column_stack([z, 0.8 * z + 0.6 * e])
        beta_star = np.array([1.0, 1.0]) / np.sqrt(2.0)
        mask = rng.random((n, 2)) < 0.5
        data = MaskedDataset(np.where(mask, X, 0.0), mask, X @ beta_star)
        miss = MissingnessModel.homogeneous(0.5, 2)
        alpha = lipschitz_oracle(X, miss).suggested_alpha
        fixed, _ = run(data, miss, AlgorithmSpec.avsgd(alpha))
        naive, _ = run_zero_imputed(data, alpha=alpha)
        err_fixed = np.linalg.norm(fixed.beta_avg - beta_star)
        err_naive = np.linalg.norm(naive.beta_avg - beta_star)
        assert err_fixed < err_naive

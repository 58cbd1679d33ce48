"""Tests for the sequential optimization driver and replication runner."""

import warnings

import numpy as np
import pytest

from randbo import gp
from randbo.acquisition import CandidateSet
from randbo.analysis import CounterexampleSampler
from randbo.confidence import Constant, ShiftedExpFinite
from randbo.engine import (
    AcquisitionSpec,
    FixedInstanceSampler,
    ProblemInstance,
    RunConfig,
    run_bo,
    run_replications,
)
from randbo.errors import ConfigurationError, NumericalError


def se(dim, ell=0.4):
    return gp.KernelSpec.isotropic("squared_exponential", ell, dim)


def random_instance(seed, m=20, dim=2, noise=0.05):
    rng = np.random.default_rng(seed)
    pts = rng.random((m, dim))
    vals = gp.sample_prior(se(dim), pts, rng)
    return ProblemInstance.finite(CandidateSet(pts), vals, noise)


def ucb_config(horizon, m, **kw):
    return RunConfig(kernel=se(kw.pop("dim", 2)), horizon=horizon,
                     schedule=ShiftedExpFinite(m), noise_variance=1e-3, **kw)


class TestProblemInstance:
    def test_finite_factory_consistency(self):
        inst = random_instance(0)
        assert inst.optimum_value == inst.true_values.max()
        assert inst.true_values[inst.optimum_index] == inst.optimum_value

    def test_inconsistent_optimum_rejected(self):
        pts = CandidateSet([[0.0], [1.0]])
        with pytest.raises(ConfigurationError):
            ProblemInstance(pts, 0.0, true_values=np.array([1.0, 2.0]),
                            optimum_index=0, optimum_value=1.0)

    def test_needs_exactly_one_mode(self):
        pts = CandidateSet([[0.0]])
        with pytest.raises(ConfigurationError):
            ProblemInstance(pts, 0.0)


class TestRunBo:
    def test_singleton_domain_zero_regret(self):
        inst = ProblemInstance.finite(CandidateSet([[0.0]]), [2.5], 0.0)
        cfg = RunConfig(kernel=se(1), horizon=1, schedule=Constant(1.0),
                        noise_variance=1e-3)
        trace = run_bo(inst, cfg, 0)
        assert trace.selected_index.tolist() == [0]
        assert trace.instantaneous_regret.tolist() == [0.0]
        assert trace.cumulative_regret.tolist() == [0.0]

    def test_zero_confidence_sequence_is_greedy_repeat(self):
        # No noise, zero exploration width: after seeing the best point once,
        # the driver repeats it and regret stays zero.
        pts = CandidateSet([[0.0], [1.0], [2.0]])
        inst = ProblemInstance.finite(pts, [0.0, 3.0, 1.0], 0.0)
        cfg = RunConfig(kernel=se(1, ell=0.1), horizon=5, noise_variance=1e-6,
                        zeta_sequence=np.zeros(5), initial_design=[1])
        trace = run_bo(inst, cfg, 3)
        assert trace.selected_index.tolist() == [1] * 5
        assert trace.cumulative_regret[-1] == 0.0

    def test_counterexample_event_locks_first_point(self):
        sampler = CounterexampleSampler(rho=0.0, noise_stddev=0.0)
        inst = sampler.instance_for([3.0, 4.1])
        cfg = RunConfig(kernel=sampler.kernel, horizon=40,
                        schedule=Constant(1.0), noise_variance=1.0)
        trace = run_bo(inst, cfg, 0)
        assert np.all(trace.selected_index == 0)
        np.testing.assert_allclose(trace.instantaneous_regret, 1.1)
        assert np.all(trace.instantaneous_regret > 1.0)

    def test_bitwise_deterministic(self):
        inst = random_instance(5)
        cfg = ucb_config(30, 20, initial_design=4)
        a = run_bo(inst, cfg, 11)
        b = run_bo(inst, cfg, 11)
        for field in ("selected_index", "selected_x", "zeta_value", "observed_y",
                      "mean_at_selection", "sd_at_selection",
                      "instantaneous_regret", "cumulative_regret"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))

    def test_regret_accounting_exact(self):
        inst = random_instance(8)
        trace = run_bo(inst, ucb_config(25, 20, initial_design=2), 4)
        want = inst.true_values[inst.optimum_index] - inst.true_values[trace.selected_index]
        np.testing.assert_array_equal(trace.instantaneous_regret, want)
        np.testing.assert_allclose(trace.cumulative_regret,
                                   np.cumsum(trace.instantaneous_regret), rtol=0, atol=0)

    def test_simple_regret_non_increasing(self):
        for seed in range(3):
            inst = random_instance(seed)
            trace = run_bo(inst, ucb_config(40, 20), seed)
            simple = np.minimum.accumulate(trace.instantaneous_regret)
            assert np.all(np.diff(simple) <= 0.0)

    def test_posterior_replay_through_batch_gp(self):
        # Recorded moments at iteration t must equal a batch posterior built
        # from the initial design plus the first t-1 selections.
        inst = random_instance(2, m=15)
        cfg = ucb_config(20, 15, initial_design=3)
        trace = run_bo(inst, cfg, 9)
        pts = inst.candidates.points
        for t in range(trace.horizon):
            X = np.vstack([trace.initial_x, trace.selected_x[:t]])
            y = np.concatenate([trace.initial_y, trace.observed_y[:t]])
            state = gp.batch_state(cfg.kernel, X, y, cfg.noise_variance)
            mean, var = gp.posterior_batch(state, pts)
            i = trace.selected_index[t]
            assert abs(mean[i] - trace.mean_at_selection[t]) < 1e-8
            assert abs(np.sqrt(var[i]) - trace.sd_at_selection[t]) < 1e-8

    def test_recorded_zeta_mean_matches_schedule(self):
        inst = random_instance(1, m=16, noise=0.2)
        cfg = RunConfig(kernel=se(2), horizon=3000, schedule=ShiftedExpFinite(16),
                        noise_variance=0.5)
        trace = run_bo(inst, cfg, 21)
        want = 2.0 + 2.0 * np.log(8.0)
        se_hat = trace.zeta_value.std(ddof=1) / np.sqrt(trace.horizon)
        assert abs(trace.zeta_value.mean() - want) < 3 * se_hat
        assert np.all(trace.zeta_value >= 2.0 * np.log(8.0))

    def test_initial_design_variants(self):
        inst = random_instance(3)
        cfg = ucb_config(4, 20, initial_design=[0, 3, 7])
        trace = run_bo(inst, cfg, 0)
        np.testing.assert_array_equal(trace.initial_indices, [0, 3, 7])
        np.testing.assert_allclose(trace.initial_x, inst.candidates.points[[0, 3, 7]])
        with pytest.raises(ConfigurationError):
            run_bo(inst, ucb_config(4, 20, initial_design=99), 0)
        with pytest.raises(ConfigurationError):
            run_bo(inst, ucb_config(4, 20, initial_design=[50]), 0)

    def test_ei_ts_pims_produce_valid_traces(self):
        inst = random_instance(4, m=12)
        for kind in ("ei", "ts", "pims"):
            cfg = RunConfig(kernel=se(2), horizon=8, noise_variance=1e-3,
                            acquisition=AcquisitionSpec(kind, num_features=128),
                            initial_design=2)
            trace = run_bo(inst, cfg, 6)
            assert np.all((0 <= trace.selected_index) & (trace.selected_index < 12))
            assert np.all(np.isnan(trace.zeta_value))

    def test_refit_switches_kernel(self):
        rng = np.random.default_rng(0)
        pts = rng.random((40, 1))
        truth = se(1, ell=0.1)
        vals = gp.sample_prior(truth, pts, 7)
        inst = ProblemInstance.finite(CandidateSet(pts), vals, 0.01)
        grid = (se(1, ell=0.1), se(1, ell=1.0))
        cfg = RunConfig(kernel=se(1, ell=1.0), horizon=12,
                        schedule=ShiftedExpFinite(40), noise_variance=1e-4,
                        initial_design=10, refit_period=5, refit_grid=grid)
        trace = run_bo(inst, cfg, 1)
        assert trace.horizon == 12  # refit path executed without error

    def test_refit_requires_grid(self):
        with pytest.raises(ConfigurationError):
            RunConfig(kernel=se(1), horizon=2, schedule=Constant(1.0),
                      refit_period=5)

    def test_ucb_without_schedule_rejected(self):
        with pytest.raises(ConfigurationError):
            RunConfig(kernel=se(1), horizon=2)


def _objective(x):
    return float(-np.sum((x - 0.25) ** 2))


class TestObjectiveMode:
    def test_per_iteration_candidates(self):
        cands = CandidateSet(np.full((1, 2), 0.5), provenance="per_iteration_random",
                             resample_count=64)
        inst = ProblemInstance(cands, noise_stddev=0.0, objective=_objective,
                               optimum_value=0.0)
        cfg = RunConfig(kernel=se(2), horizon=10, schedule=ShiftedExpFinite(64),
                        noise_variance=1e-4, initial_design=3)
        trace = run_bo(inst, cfg, 2)
        assert np.all(trace.instantaneous_regret >= 0.0)
        assert trace.selected_x.shape == (10, 2)
        # candidate resampling: repeated coordinates across rounds are
        # vanishingly unlikely
        assert len({tuple(x) for x in trace.selected_x}) == 10

    def test_finite_instance_cannot_resample(self):
        cands = CandidateSet([[0.0], [1.0]], provenance="per_iteration_random",
                             resample_count=4)
        with pytest.raises(ConfigurationError):
            ProblemInstance.finite(cands, [0.0, 1.0], 0.0)


def _bad_instance(rep, rng):
    return ProblemInstance.finite(CandidateSet([[0.0]]), [float("nan")], 0.0)


class _FailingSampler:
    """Sampler whose third replication cannot be built."""

    def __init__(self, base):
        self.base = base

    def __call__(self, rep, rng):
        if rep == 2:
            return _bad_instance(rep, rng)
        return self.base(rep, rng)


class TestRunReplications:
    def test_single_rep_equals_run_bo(self):
        inst = random_instance(12)
        sampler = FixedInstanceSampler(inst)
        cfg = ucb_config(10, 20)
        [trace] = run_replications(sampler, cfg, 1, 77)
        direct = run_bo(inst, cfg, 77, rep=0)
        np.testing.assert_array_equal(trace.selected_index, direct.selected_index)
        np.testing.assert_array_equal(trace.observed_y, direct.observed_y)

    def test_same_seed_identical(self):
        sampler = FixedInstanceSampler(random_instance(1))
        cfg = ucb_config(6, 20)
        a = run_replications(sampler, cfg, 5, 3)
        b = run_replications(sampler, cfg, 5, 3)
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.observed_y, tb.observed_y)

    def test_parallel_matches_serial(self):
        sampler = FixedInstanceSampler(random_instance(2))
        cfg = ucb_config(6, 20)
        serial = run_replications(sampler, cfg, 6, 5, n_jobs=1)
        parallel = run_replications(sampler, cfg, 6, 5, n_jobs=2)
        for ta, tb in zip(serial, parallel):
            np.testing.assert_array_equal(ta.observed_y, tb.observed_y)
            np.testing.assert_array_equal(ta.selected_index, tb.selected_index)

    def test_ts_first_pick_balanced_across_replications(self):
        # Two effectively independent candidates under the prior: the first
        # selection should split about evenly across replications.
        pts = CandidateSet([[0.0], [10.0]])
        inst = ProblemInstance.finite(pts, [0.0, 0.0], 0.1)
        sampler = FixedInstanceSampler(inst)
        cfg = RunConfig(kernel=se(1, ell=0.5), horizon=1, noise_variance=1e-3,
                        acquisition=AcquisitionSpec("ts", num_features=128))
        traces = run_replications(sampler, cfg, 100, 13)
        firsts = np.array([t.selected_index[0] for t in traces])
        assert abs(firsts.mean() - 0.5) <= 0.15

    def test_failures_recorded_not_fatal(self):
        base = FixedInstanceSampler(random_instance(3))
        cfg = ucb_config(4, 20)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            traces = run_replications(_FailingSampler(base), cfg, 5, 1)
        assert len(traces) == 4
        assert any("replication 2 failed" in str(w.message) for w in caught)

    def test_all_failures_raise(self):
        cfg = ucb_config(4, 20)
        with pytest.raises(NumericalError):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                run_replications(_bad_instance, cfg, 3, 0)

    def test_n_reps_validated(self):
        with pytest.raises(ConfigurationError):
            run_replications(FixedInstanceSampler(random_instance(0)),
                             ucb_config(2, 20), 0, 0)

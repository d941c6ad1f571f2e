import math

import numpy as np
import pytest
import torch

from memno_lab.errors import ConfigError, ResolutionMismatchError, TrainingDivergenceError, ZeroEnergyError
from memno_lab.models import model_config, training
from memno_lab.models.memno import build_model
from memno_lab.modules import autodiff, solvers
from memno_lab.types import TrainConfig


def small_model(name="memory", resolution=16, seed=0, **overrides):
    config = model_config.preset(name, **{"hidden": 6, "expanded": 12, "state_dim": 4, **overrides})
    return build_model(config, resolution, seed=seed)


class TestNrmse:
    """Normalised root mean squared error."""

    def test_scaled_prediction(self):
        truth = torch.tensor([[3.0, 4.0]], dtype=autodiff.DTYPE)
        assert float(training.nrmse(0.9 * truth, truth)) == pytest.approx(0.1)

    def test_perfect(self):
        truth = torch.ones(2, 3, 4, dtype=autodiff.DTYPE)
        assert float(training.nrmse(truth, truth)) == 0

    def test_two_dimensional_norm(self):
        truth = torch.ones(1, 2, 2, dtype=autodiff.DTYPE)
        pred = truth.clone()
        pred[0, 0, 0] = 0
        assert float(training.nrmse_per_sample(pred, truth, spatial_dims=2)[0]) == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            training.nrmse(torch.zeros(2, 3), torch.ones(2, 4))

    def test_zero_target(self):
        with pytest.raises(ZeroEnergyError):
            training.nrmse(torch.ones(1, 3), torch.zeros(1, 3))


class TestNoise:
    """Gaussian input noise."""

    def test_zero_sigma_is_identity(self):
        u = torch.ones(3)
        assert training.inject_noise(u, 0.0) is u

    def test_fresh_draws(self, torch_gen):
        u = torch.zeros(20000, dtype=autodiff.DTYPE)
        a = training.inject_noise(u, 0.1, torch_gen)
        b = training.inject_noise(u, 0.1, torch_gen)
        assert not torch.equal(a, b)
        assert float(a.std()) == pytest.approx(0.1, rel=0.05)


class TestTrain:
    """Teacher-forced training loop."""

    def test_loss_curve(self, tiny_trajectories):
        model = small_model()
        curve = training.train(model, tiny_trajectories, TrainConfig(lr=1e-2, epochs=15, batch_size=4, seed=1))
        assert curve.epochs == list(range(15))
        assert all(math.isfinite(v) for v in curve.train_nrmse)
        assert min(curve.train_nrmse[-3:]) < curve.train_nrmse[0]

    def test_cosine_schedule(self, tiny_trajectories):
        curve = training.train(small_model(), tiny_trajectories, TrainConfig(lr=1e-3, epochs=4, batch_size=2))
        assert curve.lrs[0] == pytest.approx(1e-3)
        assert curve.lrs[2] == pytest.approx(0.5e-3)

    def test_step_schedule(self, tiny_trajectories):
        cfg = TrainConfig(lr=1e-3, epochs=3, batch_size=4, schedule="step", step_period=2)
        curve = training.train(small_model(), tiny_trajectories, cfg)
        assert curve.lrs == pytest.approx([1e-3, 1e-3, 0.5e-3])

    def test_reproducible(self, tiny_trajectories):
        cfg = TrainConfig(lr=1e-2, epochs=2, batch_size=2, noise_sigma=0.01, seed=4)
        a = training.train(small_model(seed=2), tiny_trajectories, cfg)
        b = training.train(small_model(seed=2), tiny_trajectories, cfg)
        assert a.train_nrmse == b.train_nrmse

    def test_rollout_training(self, tiny_trajectories):
        cfg = TrainConfig(lr=1e-3, epochs=1, batch_size=4, teacher_forcing=False)
        curve = training.train(small_model(), tiny_trajectories, cfg)
        assert math.isfinite(curve.train_nrmse[0])

    def test_resolution_mismatch(self, tiny_trajectories):
        with pytest.raises(ResolutionMismatchError):
            training.train(small_model(resolution=32), tiny_trajectories, TrainConfig(epochs=1))

    def test_divergence(self, tiny_trajectories):
        model = small_model()
        with torch.no_grad():
            model.decoder.bias.fill_(float("nan"))
        with pytest.raises(TrainingDivergenceError) as info:
            training.train(model, tiny_trajectories, TrainConfig(epochs=1))
        assert (info.value.epoch, info.value.batch) == (0, 0)

    def test_too_short_for_inputs(self, tiny_trajectories):
        model = small_model("multi_input", multi_input_k=6)
        with pytest.raises(ConfigError):
            training.train(model, tiny_trajectories, TrainConfig(epochs=1))


class TestEvaluate:
    """Autoregressive rollouts."""

    def test_rollout_shape(self):
        model = small_model()
        out = training.rollout(model, torch.zeros(2, 1, 16, dtype=autodiff.DTYPE), 4, window=2)
        assert out.shape == (2, 5, 16)

    def test_report(self, tiny_trajectories):
        model = small_model()
        report = training.evaluate(model, tiny_trajectories, TrainConfig(batch_size=3))
        assert report.per_step.shape == (5,)
        assert report.n_traj == 4
        assert report.mean == pytest.approx(float(np.mean(report.per_step)))
        assert report.provenance["start"] == 1
        assert report.provenance["times"] == pytest.approx(list(tiny_trajectories.times[1:]))

    def test_later_start(self, tiny_trajectories):
        report = training.evaluate(small_model(), tiny_trajectories, TrainConfig(), start=3)
        assert report.per_step.shape == (3,)

    def test_start_bounds(self, tiny_trajectories):
        model = small_model("multi_input", multi_input_k=2)
        with pytest.raises(ConfigError):
            training.evaluate(model, tiny_trajectories, TrainConfig(), start=1)
        with pytest.raises(ConfigError):
            training.evaluate(model, tiny_trajectories, TrainConfig(), start=6)

    def test_difference(self, tiny_trajectories):
        a = training.evaluate(small_model(seed=0), tiny_trajectories, TrainConfig())
        b = training.evaluate(small_model(seed=1), tiny_trajectories, TrainConfig(), start=2)
        np.testing.assert_array_equal(a.difference(a), np.zeros(5))
        with pytest.raises(ConfigError):
            a.difference(b)


DESK_SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def ks_desk_sets():
    """KS at nu=0.1 solved at f=256: 256 training and 32 test trajectories."""

    spec = solvers.default_spec("ks", nu=0.1)
    return spec, solvers.generate(spec, 256, seed=0), solvers.generate(spec, 32, seed=1)


def desk_score(sets, name, resolution, window=0):
    spec, train_full, test_full = sets
    train_set = solvers.observe(train_full, resolution)
    test_set = solvers.observe(test_full, resolution)
    scores = []
    for seed in DESK_SEEDS:
        cfg = TrainConfig(epochs=50, seed=seed, window=window)
        model = build_model(model_config.preset(name, window=window), resolution, lengths=(spec.length,), seed=seed)
        training.train(model, train_set, cfg)
        scores.append(training.evaluate(model, test_set, cfg).mean)
    return float(np.mean(scores))


@pytest.mark.slow
class TestMemoryAtLowResolution:
    """Memory pays off when the grid drops high modes and not when it resolves them."""

    def test_memory_beats_markovian_at_32(self, ks_desk_sets):
        memory = desk_score(ks_desk_sets, "SSTSS", 32)
        markovian = desk_score(ks_desk_sets, "SSSS", 32)
        assert memory <= 0.75 * markovian

    def test_parity_at_128(self, ks_desk_sets):
        memory = desk_score(ks_desk_sets, "SSTSS", 128)
        markovian = desk_score(ks_desk_sets, "SSSS", 128)
        assert 0.75 * markovian <= memory <= 1.25 * markovian


@pytest.mark.slow
class TestWindowTrend:
    """Longer memory windows lower the rollout error at resolution 32."""

    def test_window_sweep(self, ks_desk_sets):
        scores = [desk_score(ks_desk_sets, "SSTSS", 32, window=K) for K in (1, 5, 25)]
        assert scores[0] >= scores[1] >= scores[2]
        assert scores[2] <= 0.85 * scores[0]

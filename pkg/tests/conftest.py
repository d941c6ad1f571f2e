import numpy as np
import pytest
import torch

from memno_lab.modules import solvers
from memno_lab.types import Grid1D, TrajectorySet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def torch_gen():
    gen = torch.Generator()
    gen.manual_seed(1234)
    return gen


@pytest.fixture
def grid64():
    return Grid1D(1.0, 64)


@pytest.fixture
def tiny_ks_spec():
    return solvers.default_spec("ks", resolution=32, end_time=0.5, nt=5, dt=0.01)


@pytest.fixture
def tiny_trajectories():
    """Smooth 1D trajectories (heat flow of random sinusoids) at f=16."""

    spec = solvers.default_spec("linear", resolution=16, end_time=0.5, nt=5, dt=0.01, nu=0.01)
    return solvers.generate(spec, 4, seed=7, threads=1)


@pytest.fixture(autouse=True)
def isolated_base_dir(tmp_path, monkeypatch):
    from memno_lab import settings

    monkeypatch.setattr(settings, "BASE_DIR", str(tmp_path / "runs"))
    return tmp_path


def make_set(data: np.ndarray, spec) -> TrajectorySet:
    lengths = (spec.length,) * (data.ndim - 2)
    return TrajectorySet(data, spec.times, lengths, spec)

import logging
import struct

import numpy as np
import pytest
import torch

from memno_lab.errors import (
    BadMagicError,
    ContainerError,
    ContainerIOError,
    NonFinitePayloadError,
    TruncatedContainerError,
    UnsupportedVersionError,
)
from memno_lab.modules import file, store
from memno_lab.types import TrajectorySet


@pytest.fixture
def dataset_path(tmp_path, tiny_trajectories):
    path = tmp_path / "train.mno"
    store.write_dataset(tiny_trajectories, path)
    return path


class TestContainer:
    """MNO1 layout and its validation order."""

    def test_header(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(store.encode_container(np.arange(6.0).reshape(2, 3), {"x": np.array([1.5, 2.5])}))
        header = store.read_header(path)
        assert header.version == 1 and header.dtype_code == 1
        assert header.extents == (2, 3)
        np.testing.assert_array_equal(header.fields["x"], [1.5, 2.5])
        assert header.payload_bytes == 48

    def test_payload(self, tmp_path):
        path = tmp_path / "a.mno"
        array = np.random.default_rng(0).standard_normal((3, 4, 5))
        path.write_bytes(store.encode_container(array, {}))
        _, payload = store.read_container(path)
        np.testing.assert_array_equal(payload, array)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(b"MNO2" + store.encode_container(np.zeros(2), {})[4:])
        with pytest.raises(BadMagicError):
            store.read_container(path)

    def test_version(self, tmp_path):
        raw = bytearray(store.encode_container(np.zeros(2), {}))
        raw[4:6] = struct.pack("<H", 2)
        path = tmp_path / "a.mno"
        path.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVersionError):
            store.read_container(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(store.encode_container(np.zeros(4), {})[:-3])
        with pytest.raises(TruncatedContainerError) as info:
            store.read_container(path)
        assert info.value.actual == info.value.expected - 3

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(store.encode_container(np.zeros(4), {"times": np.zeros(10)})[:20])
        with pytest.raises(TruncatedContainerError):
            store.read_header(path)

    def test_bad_magic_wins_over_truncation(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(b"XX")
        with pytest.raises(BadMagicError):
            store.read_container(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "a.mno"
        path.write_bytes(store.encode_container(np.array([1.0, np.nan, 2.0]), {}))
        with pytest.raises(NonFinitePayloadError):
            store.read_container(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ContainerIOError):
            store.read_container(tmp_path / "nope.mno")

    def test_exit_code(self):
        assert ContainerError.exit_code == 3


class TestDatasets:
    """Trajectory sets with their key=value sidecar."""

    def test_round_trip(self, dataset_path, tiny_trajectories):
        loaded = store.read_dataset(dataset_path)
        np.testing.assert_array_equal(loaded.data, tiny_trajectories.data)
        np.testing.assert_array_equal(loaded.times, tiny_trajectories.times)
        assert loaded.lengths == tiny_trajectories.lengths
        assert loaded.spec == tiny_trajectories.spec

    def test_sidecar(self, dataset_path, tiny_trajectories):
        values = file.read_key_values(f"{dataset_path}.spec")
        assert values["kind"] == "linear"
        assert int(values["n_traj"]) == tiny_trajectories.n_traj
        assert int(values["stored_resolution"]) == 16

    def test_sidecar_mismatch_warns(self, dataset_path, caplog):
        file.write_file(f"{dataset_path}.spec", "kind=ks\n")
        with caplog.at_level(logging.WARNING):
            store.read_dataset(dataset_path)
        assert "does not match" in caplog.text

    def test_two_dimensional(self, tmp_path):
        from memno_lab.modules import solvers

        spec = solvers.default_spec("ns2d", resolution=8, end_time=0.01, nt=1, dt=1e-3)
        ts = TrajectorySet(np.random.default_rng(1).standard_normal((2, 2, 8, 8)), spec.times, (1.0, 1.0), spec)
        store.write_dataset(ts, tmp_path / "ns.mno")
        loaded = store.read_dataset(tmp_path / "ns.mno")
        assert loaded.dim == 2
        np.testing.assert_array_equal(loaded.data, ts.data)

    def test_no_leftover_temp_files(self, dataset_path):
        assert sorted(p.name for p in dataset_path.parent.iterdir()) == ["train.mno", "train.mno.spec"]


class TestCheckpoints:
    """State dicts flattened into one container."""

    def test_round_trip(self, tmp_path):
        layer = torch.nn.Linear(3, 2, dtype=torch.float64)
        path = tmp_path / "m.ckpt"
        store.write_checkpoint(path, layer.state_dict(), "layers=SSTSS\n", extra={"epoch": 4})
        state, config_text, extra = store.read_checkpoint(path)
        assert list(state) == ["weight", "bias"]
        torch.testing.assert_close(state["weight"], layer.weight.detach())
        assert config_text == "layers=SSTSS\n"
        np.testing.assert_array_equal(extra["epoch"], [4.0])

    def test_missing_config(self, tmp_path):
        path = tmp_path / "m.ckpt"
        store.write_checkpoint(path, {"w": torch.ones(2)}, "")
        (tmp_path / "m.ckpt.config").unlink()
        with pytest.raises(ContainerIOError):
            store.read_checkpoint(path)

import os

import pytest

from memno_lab import settings
from memno_lab.models.instruments import ExperimentInstruments
from memno_lab.modules import file


class TestExperimentInstruments:
    """Run directories and the metadata written on exit."""

    def test_default_root(self):
        instruments = ExperimentInstruments("train_x__00_00_00")
        assert instruments.root_dir == os.path.join(settings.BASE_DIR, "train_x__00_00_00")

    def test_metadata_on_success(self, tmp_path):
        with ExperimentInstruments("run", root=str(tmp_path / "run")) as (instruments, metadata):
            metadata["seeds"] = {"train": 1}
        saved = file.read_yml_file(instruments.metadata_file)
        assert saved["status"] == "ok"
        assert saved["seeds"] == {"train": 1}
        assert {"python", "numpy", "scipy", "torch"} <= set(saved["versions"])

    def test_metadata_on_failure(self, tmp_path):
        instruments = ExperimentInstruments("run", root=str(tmp_path / "run"))
        with pytest.raises(ValueError):
            with instruments:
                raise ValueError("boom")
        saved = file.read_yml_file(instruments.metadata_file)
        assert saved["status"].startswith("failed: ValueError")

    def test_reset_clears_files(self, tmp_path):
        root = tmp_path / "run"
        root.mkdir()
        (root / "old.csv").write_text("x")
        with ExperimentInstruments("run", root=str(root)):
            assert not (root / "old.csv").exists()

    def test_reopen_keeps_files(self, tmp_path):
        root = tmp_path / "run"
        root.mkdir()
        (root / "a.ckpt").write_text("x")
        with ExperimentInstruments("run", root=str(root), reset=False, metadata_name="eval_metadata.yml"):
            pass
        assert (root / "a.ckpt").exists()
        assert (root / "eval_metadata.yml").exists()

    def test_layout(self, tmp_path):
        instruments = ExperimentInstruments("run", root=str(tmp_path))
        assert instruments.dataset_file("train").endswith("train.mno")
        assert instruments.checkpoint_file("SSTSS_w0").endswith("SSTSS_w0.ckpt")
        assert instruments.loss_curve_file("SSTSS_w0").endswith("SSTSS_w0_loss.csv")
        assert instruments.mz_file("gap").endswith("mz_gap.csv")

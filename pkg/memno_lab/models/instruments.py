import logging
import os
import platform
from datetime import datetime
from typing import Optional

import numpy as np
import scipy
import torch

from memno_lab import settings
from memno_lab.modules import file

logger = logging.getLogger(__name__)


class ExperimentInstruments:
    """
    Run directory, file layout and metadata for one CLI invocation.

    Every command works inside `BASE_DIR/<run_id>` (or an explicit
    directory). On exit the collected metadata, including flags, seeds,
    library versions and the outcome, is written to `metadata.yml`.

    Attributes:
        run_id (str): Directory name of the run.
        metadata (dict): Free-form record written on exit.
    """

    def __init__(
        self, run_id: str, root: Optional[str] = None, reset: bool = True, metadata_name: str = "metadata.yml"
    ) -> None:
        """Initializes the class instance.

        Args:
            run_id (str): The run identifier.
            root (Optional[str]): Explicit run directory; defaults to BASE_DIR/run_id.
            reset (bool): Clear existing files on entry. Off when reopening a run.
            metadata_name (str): File the metadata is written to inside the run directory.
        """

        self.run_id = run_id
        self._root = root
        self.reset = reset
        self.metadata_name = metadata_name
        self.metadata = {
            "run_id": run_id,
            "started": datetime.now().isoformat(timespec="seconds"),
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "torch": str(torch.__version__),
            },
        }

    def __enter__(self):
        """Context manager entry point.

        Prepares the run directory.

        Returns:
            tuple: The instruments and the metadata dict to fill in.
        """

        if self.reset:
            self.reset_files()
        else:
            os.makedirs(self.root_dir, exist_ok=True)
        return self, self.metadata

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Context manager exit point.

        Records the outcome and writes metadata.yml; exceptions propagate.
        """

        self.metadata["finished"] = datetime.now().isoformat(timespec="seconds")
        self.metadata["status"] = "ok" if exc_type is None else f"failed: {exc_type.__name__}: {exc_val}"
        try:
            file.write_yml_file(self.metadata_file, self.metadata)
        except Exception as e:
            logger.warning(f"ExperimentInstruments.__exit__(): could not write metadata: {e}")
        return False

    def reset_files(self):
        """Clears all files within the root directory.

        Creates the directory if it doesn't exist.
        """

        if not os.path.exists(self.root_dir):
            os.makedirs(self.root_dir)

        for fname in os.listdir(self.root_dir):
            path = os.path.join(self.root_dir, fname)
            if os.path.isfile(path):
                os.remove(path)

    def get_file_path(self, fname: str):
        return os.path.join(self.root_dir, fname)

    @property
    def root_dir(self):
        return self._root or os.path.join(settings.BASE_DIR, self.run_id)

    # ------------------------------ file layout ------------------------------

    @property
    def metadata_file(self):
        return self.get_file_path(self.metadata_name)

    def dataset_file(self, split: str):
        return self.get_file_path(f"{split}.mno")

    def checkpoint_file(self, name: str):
        return self.get_file_path(f"{name}.ckpt")

    def loss_curve_file(self, name: str):
        return self.get_file_path(f"{name}_loss.csv")

    @property
    def eval_file(self):
        return self.get_file_path("eval.csv")

    @property
    def eval_summary_file(self):
        return self.get_file_path("eval_summary.csv")

    def mz_file(self, kind: str):
        """mz_gap.csv, mz_lemmas.csv, mz_gle.csv and mz_refinement.csv."""

        return self.get_file_path(f"mz_{kind}.csv")

    @property
    def omega_file(self):
        return self.get_file_path("omega.csv")

    @property
    def compare_file(self):
        return self.get_file_path("compare.csv")

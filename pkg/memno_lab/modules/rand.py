from datetime import datetime
from typing import Optional

import numpy as np
import torch


def generate_run_id(command: str, tag: Optional[str] = None) -> str:
    """Generates a run directory name from the command and current time.

    The id joins the command, an optional tag (lowercased, spaces replaced
    with underscores, truncated to 30 characters) and the time as HH_MM_SS.

    Args:
        command: CLI subcommand, e.g. "train".
        tag: Free-form label such as a config name.

    Returns:
        A run id like "train_sstss__14_03_59".
    """

    now = datetime.now()
    short_time = f"{now.hour:02}_{now.minute:02}_{now.second:02}"

    name = command if not tag else f"{command}_{tag}"
    name = name.lower().replace(" ", "_").replace("'", "")[:30]
    return name + "__" + short_time


def numpy_stream(seed: int, *index: int) -> np.random.Generator:
    """Independent numpy stream for (seed, index...)."""

    return np.random.default_rng([int(seed), *(int(i) for i in index)])


def torch_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    return gen

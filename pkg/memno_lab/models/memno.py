import logging
from typing import List, Optional, Sequence

import torch
import torch.nn as nn

from memno_lab.errors import ShapeError
from memno_lab.models import layers, model_config
from memno_lab.modules import autodiff
from memno_lab.types import ModelConfig

logger = logging.getLogger(__name__)


class MemNO(nn.Module):
    """Memory neural operator: encoder, a stack of S (FFNO) and T (memory) layers, decoder.

    The forward pass maps a sequence of states u_0..u_{T-1} to predictions of
    u_1..u_T. Spatial layers act on each time step independently and memory
    layers are causal in time, so output t only depends on inputs 0..t.

    Attributes:
        config (ModelConfig): Hyperparameters; `modes` is bound to the resolution.
        resolution (int): Grid points per spatial axis the model is bound to.
        lengths (Tuple[float, ...]): Domain length per axis, used by the encoding.
    """

    def __init__(self, config: ModelConfig, resolution: int, lengths: Sequence[float] = (1.0,)):
        super().__init__()
        model_config.validate(config, resolution)
        self.config = config
        self.resolution = resolution
        self.modes = model_config.bind_modes(config, resolution)
        self.lengths = tuple(float(v) for v in lengths)
        if len(self.lengths) != config.dim:
            raise ShapeError(f"{len(self.lengths)} domain lengths for a {config.dim}D model", self.lengths)

        self.encoder = layers.Encoder(config.input_steps, config.dim, config.hidden)
        blocks = []
        for letter in config.layers:
            if letter == "S":
                blocks.append(layers.FFNOLayer(config.hidden, config.expanded, self.modes, config.dim))
            else:
                blocks.append(layers.MemoryLayer(
                    config.hidden,
                    config.state_dim,
                    config.dt_min,
                    config.dt_max,
                    window=config.window,
                    reset_interval=config.reset_interval,
                ))
        self.blocks = nn.ModuleList(blocks)
        self.decoder = nn.Linear(config.hidden, 1, dtype=autodiff.DTYPE)

        if config.dim == 1:
            grid = layers.positional_encoding(resolution, self.lengths[0])
        else:
            grid = layers.positional_encoding_2d(resolution, self.lengths)
        self.register_buffer("grid", grid, persistent=False)

    def stack_inputs(self, u: torch.Tensor) -> torch.Tensor:
        """[B, T, *spatial] -> [B, T, *spatial, K] holding u_{t-K+1..t}, oldest first.

        Steps before the first state repeat u_0.
        """

        K = self.config.input_steps
        if K == 1:
            return u.unsqueeze(-1)
        T = u.shape[1]
        first = u[:, :1].expand(-1, K - 1, *u.shape[2:])
        padded = torch.cat([first, u], dim=1)
        return torch.stack([padded[:, k: k + T] for k in range(K)], dim=-1)

    def forward(self, u_seq: torch.Tensor) -> torch.Tensor:
        unbatched = u_seq.dim() == 1 + self.config.dim
        if unbatched:
            u_seq = u_seq.unsqueeze(0)
        if u_seq.dim() != 2 + self.config.dim:
            raise ShapeError(f"MemNO expects [batch, time, *spatial] with {self.config.dim} spatial axes", u_seq.shape)
        spatial = tuple(u_seq.shape[2:])
        if spatial != (self.resolution,) * self.config.dim:
            raise ShapeError(f"model is bound to resolution {self.resolution}", u_seq.shape)

        x = self.stack_inputs(u_seq.to(autodiff.DTYPE))
        grid = self.grid.expand(*x.shape[:2], *self.grid.shape)
        x = self.encoder(torch.cat([x, grid], dim=-1))
        for block in self.blocks:
            x = block(x)
        out = self.decoder(x).squeeze(-1)
        return out[0] if unbatched else out

    def parameter_report(self) -> List[dict]:
        """Per-layer parameter counts, checking FFNO layers against
        2 k_max h^2 d + h h' + h' h + h' + h."""

        h, h2, d = self.config.hidden, self.config.expanded, self.config.dim
        ffno_expected = 2 * self.modes * h * h * d + h * h2 + h2 * h + h2 + h
        rows = [{"layer": "encoder", "kind": "E", "count": _count(self.encoder), "expected": None, "ok": True}]
        for i, (letter, block) in enumerate(zip(self.config.layers, self.blocks)):
            count = _count(block)
            expected = ffno_expected if letter == "S" else None
            rows.append({
                "layer": f"block_{i}",
                "kind": letter,
                "count": count,
                "expected": expected,
                "ok": expected is None or count == expected,
            })
        rows.append({"layer": "decoder", "kind": "D", "count": _count(self.decoder), "expected": None, "ok": True})
        return rows

    @property
    def parameter_total(self) -> int:
        return _count(self)


def _count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def build_model(config: ModelConfig, resolution: int, lengths: Sequence[float] = (1.0,), seed: Optional[int] = None) -> MemNO:
    """Constructs a MemNO; with a seed the initialisation is reproducible."""

    if seed is not None:
        torch.manual_seed(seed)
    model = MemNO(config, resolution, lengths)
    logger.info(f"build_model(): {config.layers} at resolution {resolution}, {model.parameter_total} parameters")
    return model

"""Building blocks of MemNO: positional encoding, encoder, FFNO and S4D memory layers.

All layers work channels-last in float64. Spatial layers take
[..., *spatial, h]; the memory layer takes [batch, time, *spatial, h].
"""

import logging
import math
from typing import Optional, Sequence

import torch
import torch.nn as nn
from einops import rearrange, repeat

from memno_lab.errors import ShapeError, UnstableKernelError
from memno_lab.modules import autodiff

logger = logging.getLogger(__name__)


def positional_encoding(f: int, length: float) -> torch.Tensor:
    """E_i = i / L for i = 0..f-1, shaped [f, 1]."""

    return (torch.arange(f, dtype=autodiff.DTYPE) / length).unsqueeze(-1)


def positional_encoding_2d(f: int, lengths: Sequence[float]) -> torch.Tensor:
    """E_ij = (i / L_x, j / L_y), shaped [f, f, 2]."""

    i = torch.arange(f, dtype=autodiff.DTYPE) / lengths[0]
    j = torch.arange(f, dtype=autodiff.DTYPE) / lengths[1]
    grid_i, grid_j = torch.meshgrid(i, j, indexing="ij")
    return torch.stack([grid_i, grid_j], dim=-1)


class Encoder(nn.Module):
    """Pointwise lifting of (u_{t-K+1..t}, E) to the hidden width."""

    def __init__(self, in_steps: int, dim: int, hidden: int):
        super().__init__()
        self.in_channels = in_steps + dim
        self.linear = nn.Linear(self.in_channels, hidden, dtype=autodiff.DTYPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_channels:
            raise ShapeError(f"encoder expects {self.in_channels} input channels", x.shape)
        return self.linear(x)


class FFNOLayer(nn.Module):
    """Factorised Fourier layer: v + MLP(sum over axes of IFFT[R_a FFT_a v]).

    Each axis owns a complex weight [modes, h, h], stored as real pairs and
    scaled by 1/(h * modes) at init. Bins at or above `modes` are zeroed.
    """

    def __init__(self, hidden: int, expanded: int, modes: int, dim: int = 1, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.hidden = hidden
        self.modes = modes
        self.dim = dim
        scale = 1.0 / (hidden * modes)
        self.weights = nn.ParameterList([
            nn.Parameter(autodiff.complex_parameter(modes, hidden, hidden, scale=scale, generator=generator))
            for _ in range(dim)
        ])
        self.mlp = nn.Sequential(
            nn.Linear(hidden, expanded, dtype=autodiff.DTYPE),
            nn.GELU(),
            nn.Linear(expanded, hidden, dtype=autodiff.DTYPE),
        )

    def _spectral(self, v: torch.Tensor, axis: int, weight: torch.Tensor) -> torch.Tensor:
        n = v.shape[axis]
        if self.modes > n // 2 + 1:
            raise ShapeError(f"{self.modes} modes do not fit an axis of {n} points", v.shape)
        x = v.movedim(axis, -1)  # [..., h, n]
        x_ft = autodiff.rfft(x, axis=-1)
        out_ft = torch.zeros_like(x_ft)
        out_ft[..., : self.modes] = torch.einsum(
            "...im,mio->...om", x_ft[..., : self.modes], autodiff.as_complex(weight)
        )
        return autodiff.irfft(out_ft, n=n, axis=-1).movedim(-1, axis)

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        if v.shape[-1] != self.hidden:
            raise ShapeError(f"FFNO layer expects {self.hidden} channels", v.shape)
        mixed = 0
        for a, weight in enumerate(self.weights):
            mixed = mixed + self._spectral(v, -2 - a, weight)
        return autodiff.add(v, self.mlp(mixed))

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class S4DKernel(nn.Module):
    """Diagonal SSM parameters per channel.

    A_n = -exp(log_A_real) + i A_imag starts at -1/2 + i pi n, the step
    is log-uniform in [dt_min, dt_max], C is complex normal and D starts at 0.
    """

    def __init__(
        self,
        channels: int,
        state_dim: int = 16,
        dt_min: float = 1e-3,
        dt_max: float = 1e-1,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        log_dt = torch.rand(channels, dtype=autodiff.DTYPE, generator=generator) * (
            math.log(dt_max) - math.log(dt_min)
        ) + math.log(dt_min)
        C = torch.randn(channels, state_dim, dtype=autodiff.CDTYPE, generator=generator)

        self.log_dt = nn.Parameter(log_dt)
        self.C = nn.Parameter(torch.view_as_real(C).clone())
        self.log_A_real = nn.Parameter(torch.log(0.5 * torch.ones(channels, state_dim, dtype=autodiff.DTYPE)))
        self.A_imag = nn.Parameter(math.pi * repeat(torch.arange(state_dim, dtype=autodiff.DTYPE), "n -> h n", h=channels))
        self.D = nn.Parameter(torch.zeros(channels, dtype=autodiff.DTYPE))

    def discretize(self):
        """Returns (A_bar, B_bar, C) under zero-order hold with B = 1."""

        dt = torch.exp(self.log_dt)
        A = -torch.exp(self.log_A_real) + 1j * self.A_imag
        A_bar = torch.exp(A * dt.unsqueeze(-1))
        modulus = A_bar.detach().abs()
        if torch.any(modulus >= 1):
            raise UnstableKernelError(f"|A_bar| reaches {float(modulus.max()):.6f} >= 1")
        B_bar = (A_bar - 1.0) / A
        return A_bar, B_bar, autodiff.as_complex(self.C)


def ssm_kernel(params: S4DKernel, T: int) -> torch.Tensor:
    """K_j = sum_n Re(C_n A_bar_n^j B_bar_n) for j < T, shaped [h, T]."""

    A_bar, B_bar, C = params.discretize()
    j = torch.arange(T, dtype=autodiff.DTYPE)
    powers = torch.exp(torch.log(A_bar).unsqueeze(-1) * j)  # [h, n, T]
    return torch.einsum("hn,hnl->hl", C * B_bar, powers).real


def ssm_recurrence(params: S4DKernel, u: torch.Tensor) -> torch.Tensor:
    """Explicit scan x_j = A_bar x_{j-1} + B_bar u_j, y_j = Re(C x_j) + D u_j.

    Args:
        params: SSM parameters over h channels.
        u: Input [batch, T, h].

    Returns:
        torch.Tensor: [batch, T, h]
    """

    A_bar, B_bar, C = params.discretize()
    state = torch.zeros(u.shape[0], *A_bar.shape, dtype=autodiff.CDTYPE)
    outputs = []
    for j in range(u.shape[1]):
        state = A_bar * state + B_bar * u[:, j].unsqueeze(-1)
        outputs.append((C * state).sum(-1).real + params.D * u[:, j])
    return torch.stack(outputs, dim=1)


def causal_convolution(u: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    """y_j = sum_{i <= j} K_{j-i} u_i by FFT of length 2T; u is [batch, T, h], kernel [h, T]."""

    T = u.shape[1]
    u_f = torch.fft.rfft(rearrange(u, "b t h -> b h t"), n=2 * T)
    k_f = torch.fft.rfft(kernel, n=2 * T)
    y = autodiff.slice_axis(autodiff.irfft(u_f * k_f, n=2 * T, axis=-1), -1, 0, T)
    return rearrange(y, "b h t -> b t h")


class MemoryLayer(nn.Module):
    """Residual causal S4D layer over time, applied per spatial point and channel.

    With a window K or a reset interval r the sequence is cut into
    independent chunks of min(K, r) steps (ignoring zeros) and each chunk
    starts from a zero state.
    """

    def __init__(
        self,
        hidden: int,
        state_dim: int = 16,
        dt_min: float = 1e-3,
        dt_max: float = 1e-1,
        window: int = 0,
        reset_interval: int = 0,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        self.ssm = S4DKernel(hidden, state_dim, dt_min, dt_max, generator=generator)
        self.window = window
        self.reset_interval = reset_interval

    @property
    def chunk(self) -> int:
        sizes = [s for s in (self.window, self.reset_interval) if s > 0]
        return min(sizes) if sizes else 0

    def sequence_forward(self, u: torch.Tensor) -> torch.Tensor:
        """SSM output (without residual) for u [batch, T, h]."""

        T = u.shape[1]
        chunk = self.chunk if 0 < self.chunk < T else T
        n_chunks = -(-T // chunk)
        pad = n_chunks * chunk - T
        if pad:
            u = torch.cat([u, u.new_zeros(u.shape[0], pad, u.shape[2])], dim=1)
        blocks = rearrange(u, "b (n c) h -> (b n) c h", c=chunk)
        y = causal_convolution(blocks, ssm_kernel(self.ssm, chunk)) + self.ssm.D * blocks
        y = rearrange(y, "(b n) c h -> b (n c) h", n=n_chunks)
        return autodiff.slice_axis(y, 1, 0, T)

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        if v.dim() < 4:
            raise ShapeError("memory layer expects [batch, time, *spatial, h]", v.shape)
        batch, T = v.shape[:2]
        spatial = v.shape[2:-1]
        flat = rearrange(v, "b t ... h -> b ... t h").reshape(-1, T, v.shape[-1])
        y = self.sequence_forward(flat)
        y = y.reshape(batch, *spatial, T, v.shape[-1]).movedim(-2, 1)
        return autodiff.add(v, y)

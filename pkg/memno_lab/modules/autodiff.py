"""Double-precision tensors with reverse-mode differentiation.

The tape is torch autograd running in float64 on the CPU. This module adds
the shape contract the rest of the package relies on: elementwise operands
must match exactly or differ only by a leading batch axis, transforms reject
empty axes, and `backward` only accepts scalar roots. Complex weights are
kept as real tensors with a trailing (real, imag) axis so gradients flow
through two real channels.
"""

import logging
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch.func import functional_call

from memno_lab.errors import EmptyAxisError, NonFiniteError, NonScalarRootError, ShapeError

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CDTYPE = torch.complex128


def tensor(values, requires_grad: bool = False) -> torch.Tensor:
    """Creates a float64 leaf tensor."""

    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE).clone().requires_grad_(requires_grad)


def complex_parameter(*shape: int, scale: float = 1.0, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Real storage [*shape, 2] for a complex weight, uniform in [0, scale) per channel."""

    return scale * torch.rand(*shape, 2, dtype=DTYPE, generator=generator)


def as_complex(weight: torch.Tensor) -> torch.Tensor:
    if weight.shape[-1] != 2:
        raise ShapeError("complex storage needs a trailing axis of 2", weight.shape)
    return torch.view_as_complex(weight.contiguous())


# ------------------------------ shape checks ------------------------------


def _check_elementwise(name: str, a: torch.Tensor, b: torch.Tensor):
    if a.shape == b.shape or a.dim() == 0 or b.dim() == 0:
        return
    # one operand may carry an extra leading batch axis
    if a.shape[1:] == b.shape or b.shape[1:] == a.shape:
        return
    raise ShapeError(f"{name}: incompatible shapes", a.shape, b.shape)


def _check_axis(name: str, x: torch.Tensor, axis: int):
    if x.dim() == 0:
        raise ShapeError(f"{name}: scalar has no axis {axis}", x.shape)
    if x.shape[axis] == 0:
        raise EmptyAxisError(f"{name}: zero-length axis {axis}", x.shape)


# ------------------------------ forward ops ------------------------------


def add(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_elementwise("add", a, b)
    return a + b


def sub(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_elementwise("sub", a, b)
    return a - b


def mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_elementwise("mul", a, b)
    return a * b


def scale(a: torch.Tensor, s: float) -> torch.Tensor:
    return a * s


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() < 1 or b.dim() < 1 or a.shape[-1] != b.shape[-2 if b.dim() > 1 else 0]:
        raise ShapeError("matmul: inner dimensions differ", a.shape, b.shape)
    return a @ b


def transpose(a: torch.Tensor, dim0: int = -2, dim1: int = -1) -> torch.Tensor:
    return a.transpose(dim0, dim1)


def reshape(a: torch.Tensor, shape: Sequence[int]) -> torch.Tensor:
    target = tuple(shape)
    known = int(np.prod([s for s in target if s != -1], dtype=np.int64))
    if -1 not in target and known != a.numel():
        raise ShapeError("reshape: element count differs", a.shape, target)
    if -1 in target and (known == 0 or a.numel() % known):
        raise ShapeError("reshape: cannot infer axis", a.shape, target)
    return a.reshape(target)


def slice_axis(a: torch.Tensor, axis: int, start: int, stop: int) -> torch.Tensor:
    n = a.shape[axis]
    if not 0 <= start <= stop <= n:
        raise ShapeError(f"slice [{start}:{stop}] out of range on axis {axis} of length {n}", a.shape)
    return a.narrow(axis, start, stop - start)


def concat(tensors: Sequence[torch.Tensor], axis: int = 0) -> torch.Tensor:
    ref = tensors[0]
    for t in tensors[1:]:
        if t.dim() != ref.dim() or any(
            t.shape[d] != ref.shape[d] for d in range(ref.dim()) if d != axis % ref.dim()
        ):
            raise ShapeError(f"concat along axis {axis}: mismatched shapes", ref.shape, t.shape)
    return torch.cat(list(tensors), dim=axis)


def gelu(a: torch.Tensor) -> torch.Tensor:
    return F.gelu(a)


def sum(a: torch.Tensor, axis: Optional[int] = None) -> torch.Tensor:
    return a.sum() if axis is None else a.sum(dim=axis)


def mean(a: torch.Tensor, axis: Optional[int] = None) -> torch.Tensor:
    return a.mean() if axis is None else a.mean(dim=axis)


def fft(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    """Unnormalised forward DFT along `axis`."""

    _check_axis("fft", x, axis)
    return torch.fft.fft(x, dim=axis, norm="backward")


def ifft(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    """Inverse DFT along `axis`, carrying the 1/n factor."""

    _check_axis("ifft", x, axis)
    return torch.fft.ifft(x, dim=axis, norm="backward")


def rfft(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    _check_axis("rfft", x, axis)
    return torch.fft.rfft(x, dim=axis, norm="backward")


def irfft(x: torch.Tensor, n: int, axis: int = -1) -> torch.Tensor:
    _check_axis("irfft", x, axis)
    return torch.fft.irfft(x, n=n, dim=axis, norm="backward")


def complex_mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_elementwise("complex_mul", a, b)
    return a * b


def gather_modes(x: torch.Tensor, axis: int, lead: int, trail: int = 0) -> torch.Tensor:
    """Concatenates the first `lead` and last `trail` entries of `axis`."""

    n = x.shape[axis]
    if lead + trail > n:
        raise ShapeError(f"gather_modes: {lead}+{trail} modes from an axis of {n}", x.shape)
    parts = [x.narrow(axis, 0, lead)]
    if trail:
        parts.append(x.narrow(axis, n - trail, trail))
    return torch.cat(parts, dim=axis)


# ------------------------------ backward ------------------------------


def backward(root: torch.Tensor):
    """Accumulates d(root)/d(leaf) into every leaf's `.grad`.

    Args:
        root (torch.Tensor): Single-element tensor connected to the tape.

    Raises:
        NonScalarRootError: If `root` has more than one element.
    """

    if root.numel() != 1:
        raise NonScalarRootError(f"backward needs a scalar root, got shape {tuple(root.shape)}")
    root.backward(retain_graph=True)


def grad_check(
    f: Callable[[torch.Tensor], torch.Tensor],
    x: torch.Tensor,
    h: float = 1e-5,
    coords: Optional[Iterable[int]] = None,
) -> float:
    """Compares autograd against central differences.

    Args:
        f: Scalar-valued function of one tensor.
        x: Point of evaluation; its values are copied.
        h: Finite-difference step.
        coords: Flat coordinate indices to check, all by default.

    Returns:
        float: max over checked coordinates of |analytic - fd| / max(1, |fd|).

    Raises:
        NonFiniteError: If f or its gradient is non-finite; carries the coordinate.
    """

    x0 = x.detach().to(DTYPE).clone().requires_grad_(True)
    y = f(x0)
    if y.numel() != 1:
        raise NonScalarRootError(f"grad_check needs a scalar function, got shape {tuple(y.shape)}")
    if not torch.isfinite(y).all():
        raise NonFiniteError("non-finite function value at the evaluation point")
    (analytic,) = torch.autograd.grad(y, x0)
    analytic = analytic.reshape(-1)

    flat = x0.detach().reshape(-1)
    checked = range(flat.numel()) if coords is None else coords
    worst = 0.0
    with torch.no_grad():
        for i in checked:
            index = tuple(int(v) for v in np.unravel_index(i, tuple(x0.shape))) if x0.dim() else ()
            xp = flat.clone()
            xp[i] += h
            xm = flat.clone()
            xm[i] -= h
            fp = float(f(xp.view_as(x0)))
            fm = float(f(xm.view_as(x0)))
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NonFiniteError("non-finite value in central difference", index)
            fd = (fp - fm) / (2 * h)
            a = float(analytic[i])
            if not np.isfinite(a):
                raise NonFiniteError("non-finite analytic gradient", index)
            worst = max(worst, abs(a - fd) / max(1.0, abs(fd)))
    logger.debug(f"grad_check(): max relative error {worst:.3e}")
    return worst


def grad_check_module(
    module: torch.nn.Module,
    loss_fn: Callable[[Callable], torch.Tensor],
    h: float = 1e-5,
    coords: Optional[Iterable[int]] = None,
) -> float:
    """Runs `grad_check` over the flattened parameters of `module`.

    `loss_fn` receives a callable with the module's signature that evaluates
    the module at the perturbed parameter vector, and returns a scalar.
    """

    named = [(n, p) for n, p in module.named_parameters()]
    names = [n for n, _ in named]
    shapes = [p.shape for _, p in named]
    sizes = [p.numel() for _, p in named]
    flat0 = torch.cat([p.detach().reshape(-1) for _, p in named])

    def as_function(flat: torch.Tensor) -> torch.Tensor:
        chunks = torch.split(flat, sizes)
        params = {n: c.view(s) for n, c, s in zip(names, chunks, shapes)}
        return loss_fn(lambda *args, **kwargs: functional_call(module, params, args, kwargs))

    return grad_check(as_function, flat0, h=h, coords=coords)

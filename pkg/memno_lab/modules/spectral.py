"""Fourier conventions, aliasing and resolution changes on periodic grids.

Conventions:
    - A "continuous" SpectralField holds Fourier-series coefficients,
      u(x) = sum_k a_k exp(i 2 pi k x / L).
    - `dft` is unnormalised: u_bar_k = sum_n u(x_n) exp(-i 2 pi n k / f).
      Sampling a continuous field at resolution f therefore gives
      u_bar_k = f * sum_{k' = k mod f} a_k' (Poisson summation).
    - The observed band is |k| <= floor(f/2). For even f both k = +f/2 and
      k = -f/2 are listed and carry the same DFT bin.
"""

import logging
from typing import Dict, Iterable, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from memno_lab.errors import ConfigError, EmptyAxisError, ZeroEnergyError
from memno_lab.types import SpectralField, TrajectorySet

logger = logging.getLogger(__name__)


def observed_modes(f: int) -> np.ndarray:
    fc = f // 2
    return np.arange(-fc, fc + 1)


def integer_modes(n: int) -> np.ndarray:
    """Signed mode index of each numpy FFT bin."""

    return np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)


def dft(values, length: float = 1.0) -> SpectralField:
    """Unnormalised DFT of real samples on a periodic grid.

    Args:
        values: Samples u(x_0..x_{f-1}).
        length: Domain length L carried on the result.

    Returns:
        SpectralField: Discrete coefficients for |k| <= floor(f/2).

    Raises:
        EmptyAxisError: For an empty input.
    """

    values = np.asarray(values)
    if values.size == 0:
        raise EmptyAxisError("dft of empty input", values.shape)
    f = values.shape[-1]
    bins = np.fft.fft(values)
    return SpectralField(bins[observed_modes(f) % f], length, "discrete")


def idft(field: SpectralField, resolution: int) -> np.ndarray:
    """Inverse of `dft` at the given resolution.

    For even resolution the two listed Nyquist entries are averaged into the
    single bin, which keeps the reconstruction of a real field real.
    """

    f = resolution
    if field.band > f // 2:
        raise ConfigError(f"field band {field.band} exceeds resolution {f}")
    bins = np.zeros(f, dtype=np.complex128)
    for k in field.modes:
        c = field.coeff(int(k))
        if f % 2 == 0 and abs(k) == f // 2:
            bins[f // 2] += 0.5 * c
        else:
            bins[k % f] += c
    samples = np.fft.ifft(bins)
    if field.is_real:
        return samples.real
    return samples


def sample(field: SpectralField, f: int) -> np.ndarray:
    """Evaluates a continuous field at the f grid points i L / f."""

    if field.convention != "continuous":
        raise ConfigError("sample needs a continuous-convention field")
    x = np.arange(f) / f
    phase = np.exp(2j * np.pi * np.outer(x, field.modes))
    values = phase @ field.coeffs
    if field.is_real:
        return values.real
    return values


def fourier_truncate(field: SpectralField, k: int) -> SpectralField:
    """Keeps modes with |n| <= k and zeroes the rest."""

    if k < 0:
        raise ConfigError(f"truncation cutoff must be >= 0, got {k}")
    coeffs = np.where(np.abs(field.modes) <= k, field.coeffs, 0)
    return SpectralField(coeffs, field.length, field.convention)


def alias_sum(continuous: SpectralField, f: int) -> SpectralField:
    """Discrete spectrum at resolution f predicted by Poisson summation."""

    if f < 1:
        raise ConfigError(f"resolution must be positive, got {f}")
    observed = observed_modes(f)
    congruent = (observed[:, None] - continuous.modes[None, :]) % f == 0
    return SpectralField(f * (congruent @ continuous.coeffs), continuous.length, "discrete")


# ------------------------------ unobserved-energy diagnostic ------------------------------


def omega_f(field: SpectralField, f: int) -> float:
    """Fraction of energy in modes |n| > floor(f/2).

    Raises:
        ZeroEnergyError: If the field has no energy.
    """

    energy = np.abs(field.coeffs) ** 2
    total = energy.sum()
    if total == 0:
        raise ZeroEnergyError("omega_f of a zero-energy field")
    return float(energy[np.abs(field.modes) > f // 2].sum() / total)


def _omega_from_power(power: np.ndarray, modes: Tuple[np.ndarray, ...], f: int) -> np.ndarray:
    """Per-frame omega from |bins|^2 over the trailing spatial axes.

    `modes` holds one broadcastable integer-mode grid per spatial axis. A
    mode is unobserved once any axis index exceeds floor(f/2).
    """

    unobserved = np.zeros(np.broadcast_shapes(*(m.shape for m in modes)), dtype=bool)
    for m in modes:
        unobserved = unobserved | (np.abs(m) > f // 2)
    axes = tuple(range(-len(modes), 0))
    total = power.sum(axis=axes)
    above = np.where(unobserved, power, 0.0).sum(axis=axes)
    with np.errstate(invalid="ignore", divide="ignore"):
        return above / total


def omega_f_2d(values: np.ndarray, f: int) -> float:
    """omega_f of one 2D field sampled at its native resolution."""

    values = np.asarray(values)
    n = values.shape[-1]
    power = np.abs(np.fft.fft2(values)) ** 2
    km = integer_modes(n)
    ratio = _omega_from_power(power, (km[:, None], km[None, :]), f)
    if not np.isfinite(ratio):
        raise ZeroEnergyError("omega_f of a zero-energy field")
    return float(ratio)


def dataset_omega(ts: TrajectorySet, fs: Iterable[int]) -> Dict[int, Tuple[float, float]]:
    """Mean and std of omega_f over every trajectory and saved timestep.

    Spectra come from the DFT at the set's own (highest available)
    resolution. Frames with zero energy are skipped.
    """

    n = ts.resolution
    km = integer_modes(n)
    if ts.dim == 1:
        power = np.abs(np.fft.fft(ts.data, axis=-1)) ** 2
        grids = (km,)
    else:
        power = np.abs(np.fft.fft2(ts.data, axes=(-2, -1))) ** 2
        grids = (km[:, None], km[None, :])
    frame_energy = power.reshape(*power.shape[:2], -1).sum(axis=-1)
    keep = frame_energy > 0
    if not keep.any():
        raise ZeroEnergyError("every frame of the dataset has zero energy")
    if (~keep).any():
        logger.debug(f"dataset_omega(): skipping {int((~keep).sum())} zero-energy frames")

    out = {}
    for f in fs:
        ratios = _omega_from_power(power, grids, f)[keep]
        out[int(f)] = (float(ratios.mean()), float(ratios.std()))
    return out


# ------------------------------ resolution changes ------------------------------


def resample_1d(traj: np.ndarray, target_f: int) -> np.ndarray:
    """Periodic cubic-spline interpolation of the last axis onto target_f points."""

    traj = np.asarray(traj, dtype=np.float64)
    f = traj.shape[-1]
    if target_f < 2:
        raise ConfigError(f"target resolution must be >= 2, got {target_f}")
    if target_f > f:
        raise ConfigError(f"target resolution {target_f} exceeds source resolution {f}")
    if target_f == f:
        return traj.copy()

    x = np.arange(f + 1) / f
    closed = np.concatenate([traj, traj[..., :1]], axis=-1)
    spline = CubicSpline(x, closed, axis=-1, bc_type="periodic")
    return spline(np.arange(target_f) / target_f)


def downsample_2d(traj: np.ndarray, target_f: int) -> np.ndarray:
    """Strided subsampling of the last two axes, anchored at index 0."""

    traj = np.asarray(traj)
    f = traj.shape[-1]
    if target_f < 1 or f % target_f:
        raise ConfigError(f"target resolution {target_f} does not divide {f}")
    stride = f // target_f
    return traj[..., ::stride, ::stride].copy()

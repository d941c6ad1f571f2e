"""Ground-truth trajectory generation.

KS and Burgers are integrated pseudospectrally with exponential time
differencing RK4, so the stiff linear part is exact. NS2D uses the
vorticity-streamfunction form on the unit torus with Crank-Nicolson
viscosity and second-order Adams-Bashforth advection.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np
from tqdm import tqdm

from memno_lab import settings
from memno_lab.errors import ConfigError, ShapeError, SolverDivergenceError
from memno_lab.modules import rand, spectral
from memno_lab.types import FourierSymbol, Grid1D, Grid2D, SolverSpec, SpectralField, TrajectorySet

logger = logging.getLogger(__name__)

N_WAVES = 21
MAX_WAVENUMBER = 8
CONTOUR_POINTS = 64

# desk-scale defaults per family
KS_DEFAULTS = dict(kind="ks", nu=0.1, length=64.0, end_time=2.5, nt=25, dt=0.01, resolution=256)
BURGERS_DEFAULTS = dict(kind="burgers", nu=0.01, length=1.0, end_time=1.0, nt=20, dt=1e-4, resolution=256)
NS2D_DEFAULTS = dict(kind="ns2d", nu=1e-3, length=1.0, end_time=3.2, nt=32, dt=1e-4, resolution=64)
LINEAR_DEFAULTS = dict(kind="linear", nu=0.01, length=1.0, end_time=1.0, nt=20, dt=1e-3, resolution=256)

DEFAULTS = {
    "ks": KS_DEFAULTS,
    "burgers": BURGERS_DEFAULTS,
    "ns2d": NS2D_DEFAULTS,
    "linear": LINEAR_DEFAULTS,
}


def default_spec(kind: str, **overrides) -> SolverSpec:
    if kind not in DEFAULTS:
        raise ConfigError(f"no defaults for pde kind {kind!r}")
    return SolverSpec(**{**DEFAULTS[kind], **overrides})


# ------------------------------ initial conditions ------------------------------


def sample_sinusoid_ic(seed: int, grid: Grid1D, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Superposition of 21 random sine waves with wavenumbers 1..8.

    Args:
        seed: Seed of a fresh generator, ignored when `rng` is given.
        grid: Target grid.
        rng: Optional generator to draw from instead.

    Returns:
        np.ndarray: u0 sampled at the grid points.
    """

    rng = np.random.default_rng(seed) if rng is None else rng
    amplitude = rng.uniform(-0.5, 0.5, N_WAVES)
    wavenumber = rng.integers(1, MAX_WAVENUMBER + 1, N_WAVES)
    phase = rng.uniform(0.0, 2 * np.pi, N_WAVES)
    x = grid.points / grid.length
    return np.sum(amplitude[:, None] * np.sin(2 * np.pi * wavenumber[:, None] * x[None, :] + phase[:, None]), axis=0)


def grf_spectrum(f: int) -> np.ndarray:
    """Per-mode standard deviation 7^{3/2} (4 pi^2 |k|^2 + 49)^{-5/4}, mean mode zeroed."""

    k = spectral.integer_modes(f)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    sigma = 7.0 ** 1.5 * (4 * np.pi ** 2 * k2 + 49.0) ** (-1.25)
    sigma[0, 0] = 0.0
    return sigma


def sample_grf_ic_2d(seed: int, f: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Gaussian random field on the unit torus with E|a_k|^2 = sigma_k^2.

    The coefficients are symmetrised as (c_k + conj(c_-k)) / sqrt(2) from
    complex normal draws, so the field is real and every mode keeps the
    target variance, including the self-conjugate ones.
    """

    if f % 2:
        raise ConfigError(f"GRF resolution must be even, got {f}")
    rng = np.random.default_rng(seed) if rng is None else rng
    sigma = grf_spectrum(f)
    c = sigma * (rng.standard_normal((f, f)) + 1j * rng.standard_normal((f, f))) / np.sqrt(2)
    flipped = np.roll(np.flip(c, axis=(0, 1)), shift=1, axis=(0, 1))
    coeffs = (c + np.conj(flipped)) / np.sqrt(2)
    return np.fft.ifft2(coeffs).real * f * f


# ------------------------------ exponential time differencing ------------------------------


def etdrk4_coefficients(linear: np.ndarray, dt: float, contour_points: int = CONTOUR_POINTS):
    """ETDRK4 weights for a real diagonal linear part, by contour averaging.

    Returns:
        tuple: (E, E2, Q, f1, f2, f3) broadcast like `linear`.
    """

    L = dt * np.asarray(linear, dtype=np.float64)
    roots = np.exp(1j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
    LR = L[..., None] + roots
    E = np.exp(L)
    E2 = np.exp(L / 2)
    Q = dt * np.mean((np.exp(LR / 2) - 1) / LR, axis=-1).real
    f1 = dt * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=-1).real
    f2 = dt * np.mean((2 + LR + np.exp(LR) * (LR - 2)) / LR ** 3, axis=-1).real
    f3 = dt * np.mean((-4 - 3 * LR - LR ** 2 + np.exp(LR) * (4 - LR)) / LR ** 3, axis=-1).real
    return E, E2, Q, f1, f2, f3


def dealias_mask_1d(f: int) -> np.ndarray:
    """2/3 rule over the rfft half-spectrum."""

    k = np.arange(f // 2 + 1)
    return k <= f // 3


def _etdrk4_march(spec: SolverSpec, u0: np.ndarray, linear: np.ndarray) -> np.ndarray:
    f = spec.resolution
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (f,):
        raise ShapeError(f"{spec.kind} initial condition must have {f} points", u0.shape, (f,))

    k_tilde = 2 * np.pi * np.arange(f // 2 + 1) / spec.length
    mask = dealias_mask_1d(f)
    g = -0.5j * k_tilde * mask
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(linear, spec.dt)

    def nonlinear(v):
        if not spec.nonlinear:
            return np.zeros_like(v)
        u = np.fft.irfft(v * mask, n=f)
        return g * np.fft.rfft(u * u)

    steps = spec.steps_per_save
    out = np.empty((spec.nt + 1, f))
    out[0] = u0
    v = np.fft.rfft(u0)
    for i in range(1, spec.nt + 1):
        for _ in range(steps):
            Nv = nonlinear(v)
            a = E2 * v + Q * Nv
            Na = nonlinear(a)
            b = E2 * v + Q * Na
            Nb = nonlinear(b)
            c = E2 * a + Q * (2 * Nb - Nv)
            Nc = nonlinear(c)
            v = E * v + Nv * f1 + 2 * (Na + Nb) * f2 + Nc * f3
        if not np.all(np.isfinite(v)):
            raise SolverDivergenceError(spec.kind, float(spec.times[i]))
        out[i] = np.fft.irfft(v, n=f)
    return out


def ks_linear_symbol(spec: SolverSpec) -> np.ndarray:
    k_tilde = 2 * np.pi * np.arange(spec.resolution // 2 + 1) / spec.length
    return k_tilde ** 2 - spec.nu * k_tilde ** 4


def burgers_linear_symbol(spec: SolverSpec) -> np.ndarray:
    k_tilde = 2 * np.pi * np.arange(spec.resolution // 2 + 1) / spec.length
    return -spec.nu * k_tilde ** 2


def ks_solve(spec: SolverSpec, u0: np.ndarray) -> np.ndarray:
    """Kuramoto-Sivashinsky u_t + u u_x + u_xx + nu u_xxxx = 0.

    Returns:
        np.ndarray: Saved states [nt + 1, f].

    Raises:
        SolverDivergenceError: On a non-finite state, with the saved time.
    """

    if spec.kind != "ks":
        raise ConfigError(f"ks_solve got a {spec.kind} spec")
    return _etdrk4_march(spec, u0, ks_linear_symbol(spec))


def burgers_solve(spec: SolverSpec, u0: np.ndarray) -> np.ndarray:
    """Viscous Burgers u_t + u u_x = nu u_xx in conservation form."""

    if spec.kind != "burgers":
        raise ConfigError(f"burgers_solve got a {spec.kind} spec")
    return _etdrk4_march(spec, u0, burgers_linear_symbol(spec))


def linear_evolve(symbol: FourierSymbol, g: SpectralField, t: float) -> SpectralField:
    """u_k(t) = exp(C_k t) g_k for every mode carried by g."""

    rates = np.zeros(g.coeffs.shape, dtype=np.complex128)
    for j, k in enumerate(g.modes):
        # zero coefficients may sit outside the symbol's support
        if g.coeffs[j] != 0:
            rates[j] = symbol(int(k))
    return SpectralField(np.exp(rates * t) * g.coeffs, g.length, g.convention)


def linear_solve(spec: SolverSpec, u0: np.ndarray) -> np.ndarray:
    """Heat equation u_t = nu u_xx evolved exactly mode by mode."""

    if spec.kind != "linear":
        raise ConfigError(f"linear_solve got a {spec.kind} spec")
    f = spec.resolution
    v0 = np.fft.rfft(np.asarray(u0, dtype=np.float64))
    symbol = burgers_linear_symbol(spec)
    return np.stack([np.fft.irfft(np.exp(symbol * t) * v0, n=f) for t in spec.times])


# ------------------------------ Navier-Stokes 2D ------------------------------


class _TorusOperators:
    """Wavenumber grids shared by the NS march and its diagnostics."""

    def __init__(self, f: int):
        k = spectral.integer_modes(f).astype(np.float64)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.lap = 4 * np.pi ** 2 * (self.kx ** 2 + self.ky ** 2)
        self.lap_safe = self.lap.copy()
        self.lap_safe[0, 0] = 1.0
        self.dealias = (np.abs(self.kx) <= f / 3) & (np.abs(self.ky) <= f / 3)

    def velocity_hat(self, w_hat: np.ndarray):
        psi_hat = w_hat / self.lap_safe
        psi_hat[..., 0, 0] = 0.0
        return 2j * np.pi * self.ky * psi_hat, -2j * np.pi * self.kx * psi_hat


def ns_forcing(f: int) -> np.ndarray:
    X, Y = Grid2D((1.0, 1.0), f).points
    return 0.1 * (np.sin(2 * np.pi * (X + Y)) + np.cos(2 * np.pi * (X + Y)))


def spectral_divergence(w: np.ndarray) -> float:
    """max |i k . u_hat| of the velocity recovered from vorticity samples."""

    w = np.asarray(w, dtype=np.float64)
    ops = _TorusOperators(w.shape[-1])
    u_hat, v_hat = ops.velocity_hat(np.fft.fft2(w))
    div = 2j * np.pi * (ops.kx * u_hat + ops.ky * v_hat)
    return float(np.max(np.abs(div)))


def ns2d_solve(spec: SolverSpec, w0: np.ndarray) -> np.ndarray:
    """Vorticity form of 2D incompressible NS on the unit torus.

    w_t + u . grad w = nu lap w + f with -lap psi = w, u = (psi_y, -psi_x).
    Viscosity is Crank-Nicolson; advection is explicit and 2/3 dealiased,
    forward Euler on the first step and Adams-Bashforth 2 afterwards.

    Returns:
        np.ndarray: Vorticity [nt + 1, f, f].
    """

    if spec.kind != "ns2d":
        raise ConfigError(f"ns2d_solve got a {spec.kind} spec")
    f = spec.resolution
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (f, f):
        raise ShapeError(f"vorticity must be {f}x{f}", w0.shape, (f, f))

    ops = _TorusOperators(f)
    dt, nu = spec.dt, spec.nu
    f_hat = np.fft.fft2(ns_forcing(f)) if spec.forcing else np.zeros((f, f), dtype=np.complex128)
    implicit = 1.0 + 0.5 * dt * nu * ops.lap
    explicit = 1.0 - 0.5 * dt * nu * ops.lap

    def advection(w_hat):
        if not spec.nonlinear:
            return np.zeros_like(w_hat)
        u_hat, v_hat = ops.velocity_hat(w_hat)
        u = np.fft.ifft2(u_hat).real
        v = np.fft.ifft2(v_hat).real
        wx = np.fft.ifft2(2j * np.pi * ops.kx * w_hat).real
        wy = np.fft.ifft2(2j * np.pi * ops.ky * w_hat).real
        return np.fft.fft2(u * wx + v * wy) * ops.dealias

    steps = spec.steps_per_save
    out = np.empty((spec.nt + 1, f, f))
    out[0] = w0
    w_hat = np.fft.fft2(w0)
    previous = None
    for i in range(1, spec.nt + 1):
        for _ in range(steps):
            current = advection(w_hat)
            adv = current if previous is None else 1.5 * current - 0.5 * previous
            w_hat = (explicit * w_hat + dt * (f_hat - adv)) / implicit
            previous = current
        if not np.all(np.isfinite(w_hat)):
            raise SolverDivergenceError(spec.kind, float(spec.times[i]))
        out[i] = np.fft.ifft2(w_hat).real
    return out


# ------------------------------ batches ------------------------------


SOLVERS = {
    "ks": ks_solve,
    "burgers": burgers_solve,
    "linear": linear_solve,
    "ns2d": ns2d_solve,
}


def initial_condition(spec: SolverSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "ns2d":
        return sample_grf_ic_2d(0, spec.resolution, rng=rng)
    return sample_sinusoid_ic(0, Grid1D(spec.length, spec.resolution), rng=rng)


def generate(
    spec: SolverSpec,
    n: int,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    progress: bool = False,
) -> TrajectorySet:
    """Solves n trajectories with independent initial-condition streams.

    Trajectory i draws its initial condition from numpy_stream(seed, i),
    so the set is identical for any thread count.

    Args:
        spec: Solver settings; `spec.seed` is used when `seed` is None.
        n: Number of trajectories, >= 1.
        seed: Base seed override.
        threads: Worker cap, MEMNO_THREADS by default.
        progress: Show a tqdm bar.

    Returns:
        TrajectorySet: Data [n, nt + 1, *spatial] in trajectory order.
    """

    if n < 1:
        raise ConfigError(f"trajectory count must be >= 1, got {n}")
    seed = spec.seed if seed is None else seed
    solve: Callable = SOLVERS[spec.kind]
    workers = min(n, threads or settings.thread_count())

    def run(index: int) -> np.ndarray:
        rng = rand.numpy_stream(seed, index)
        return solve(spec, initial_condition(spec, rng))

    logger.info(f"generate(): {n} {spec.kind} trajectories at f={spec.resolution} on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(tqdm(pool.map(run, range(n)), total=n, disable=not progress, desc=spec.kind))

    lengths = (spec.length,) * (2 if spec.kind == "ns2d" else 1)
    return TrajectorySet(np.stack(results), spec.times, lengths, spec)


def observe(ts: TrajectorySet, target_f: int) -> TrajectorySet:
    """Low-resolution observation: cubic resampling in 1D, striding in 2D."""

    if ts.dim == 1:
        data = spectral.resample_1d(ts.data, target_f)
    else:
        data = spectral.downsample_2d(ts.data, target_f)
    return TrajectorySet(data, ts.times, ts.lengths, ts.spec)

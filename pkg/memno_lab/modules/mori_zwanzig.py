"""Mori-Zwanzig memory for partially observed linear PDEs.

Two settings are covered.

Mixing operator: L u = sign * (-lap) u + B (e^{-ix} + e^{ix}) u, written in
the basis e_0 = 1, e_n = e^{-inx} + e^{inx}. Its coefficients obey
    da_0/dt = 2B a_1
    da_n/dt = sign n^2 a_n + B a_{n-1} + B a_{n+1}
so the truncated matrix is tridiagonal with M[0][1] = 2B. Observing the
first two coefficients, the memoryless model evolves them with P1 L P1,
while the exact projected dynamics carry a memory integral over the
unobserved modes. With sign = +1 the diagonal grows like n^2 and no finite
truncation converges, so evolutions default to the diffusive sign = -1.

Discrete linear GLE: a linear PDE with symbol C_k is observed through the
resolution-f DFT. The observed spectrum u_bar and the residual
beta = u_hat - gamma0 u_bar form a closed block-linear system.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from memno_lab import settings
from memno_lab.errors import ConfigError, IllPosedEvolutionError, ZeroEnergyError
from memno_lab.modules import spectral
from memno_lab.types import (
    FourierSymbol,
    GleSolution,
    GleSystem,
    LemmaReport,
    MemoryGapReport,
    SpectralField,
    TruncatedOperator,
)

logger = logging.getLogger(__name__)

DIFFUSIVE = -1
ANTI_DIFFUSIVE = 1

LEMMA_LOWER = 0.1
LEMMA_UPPER = 10.0
CLOSED_FORM_TOL = 1e-8

L1_B_GRID = np.round(np.arange(0.05, 50.0 + 1e-9, 0.05), 10)
L2_B_GRID = np.round(np.arange(0.01, 20.0 + 1e-9, 0.01), 10)


def _check_sign(sign: int):
    if sign not in (DIFFUSIVE, ANTI_DIFFUSIVE):
        raise ConfigError(f"sign must be -1 or +1, got {sign}")


def series_expm(A: np.ndarray, terms: int = 30) -> np.ndarray:
    """Matrix exponential by Taylor series with scaling and squaring.

    Independent of scipy's Pade route; used to cross-check closed forms.
    """

    A = np.asarray(A, dtype=np.float64)
    norm = np.abs(A).sum(axis=1).max() if A.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    X = A / 2.0 ** squarings
    term = np.eye(A.shape[0])
    out = term.copy()
    for k in range(1, terms + 1):
        term = term @ X / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


# ------------------------------ mixing operator ------------------------------


def build_mixing_operator(B: float, N: int, sign: int = DIFFUSIVE) -> TruncatedOperator:
    """Tridiagonal (N+1) x (N+1) matrix of the mixing operator.

    Args:
        B: Mixing strength, >= 0.
        N: Truncation, >= 1. Row N drops its coupling to mode N+1.
        sign: +1 gives diagonal n^2, -1 gives -n^2.

    Returns:
        TruncatedOperator
    """

    if B < 0:
        raise ConfigError(f"mixing strength must be >= 0, got {B}")
    if N < 1:
        raise ConfigError(f"truncation must be >= 1, got {N}")
    _check_sign(sign)
    n = np.arange(N + 1)
    M = np.diag(sign * n.astype(np.float64) ** 2)
    M[n[:-1], n[:-1] + 1] = B
    M[n[:-1] + 1, n[:-1]] = B
    M[0, 1] = 2 * B
    return TruncatedOperator(M, float(B), int(N), int(sign))


def dominant_eigenvalue(op: TruncatedOperator) -> float:
    return float(np.max(np.linalg.eigvals(op.matrix).real))


def toeplitz_reference(B: float, N: int) -> float:
    """Largest eigenvalue 2B cos(pi / (N + 2)) of the pure coupling part."""

    return 2 * B * np.cos(np.pi / (N + 2))


def _propagate(M: np.ndarray, t: float, x0: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        x = expm(t * M) @ x0
    if not np.all(np.isfinite(x)):
        raise IllPosedEvolutionError(
            f"propagator overflowed at t={t} for a {M.shape[0]}-mode truncation; use the diffusive sign"
        )
    return x


# ------------------------------ memoryless and memory evolutions ------------------------------


def markovian_closed_form(B: float, t: float, sign: int = ANTI_DIFFUSIVE) -> np.ndarray:
    """exp(t [[0, 2B], [B, s]]) through g = p + q, h = p - q with r = sqrt(8B^2 + s^2)."""

    s = float(sign)
    r = np.sqrt(8 * B * B + s * s)
    p = np.exp((r + s) * t / 2)
    q = np.exp(-(r - s) * t / 2)
    g, h = p + q, p - q
    return np.array([
        [r * g - s * h, 4 * B * h],
        [2 * B * h, r * g + s * h],
    ]) / (2 * r)


def markovian_evolve(B: float, a0: Sequence[float], t: float, sign: int = DIFFUSIVE) -> np.ndarray:
    """Memoryless model du1/dt = P1 L u1 on the observed pair (a_0, a_1)."""

    if t < 0:
        raise ConfigError(f"time must be >= 0, got {t}")
    op = build_mixing_operator(B, 1, sign)
    return _propagate(op.matrix, t, np.asarray(a0, dtype=np.float64))


def full_evolve(B: float, a0: Sequence[float], t: float, n_oracle: int = 64, sign: int = DIFFUSIVE) -> np.ndarray:
    """All N+1 coefficients of exp(t L_N) applied to a0 padded with zeros."""

    op = build_mixing_operator(B, n_oracle, sign)
    x0 = np.zeros(n_oracle + 1)
    a0 = np.asarray(a0, dtype=np.float64)
    x0[: a0.size] = a0
    return _propagate(op.matrix, t, x0)


def memory_evolve_projection(
    B: float, a0: Sequence[float], t: float, n_oracle: int = 64, sign: int = DIFFUSIVE
) -> np.ndarray:
    """Exact GLE solution: evolve the truncated full system, keep (a_0, a_1)."""

    return full_evolve(B, a0, t, n_oracle, sign)[:2]


def truncation_refinement(
    B: float, a0: Sequence[float], t: float, n_oracle: int = 64, sign: int = DIFFUSIVE
) -> float:
    """Relative change of the observed pair when the truncation doubles."""

    coarse = memory_evolve_projection(B, a0, t, n_oracle, sign)
    fine = memory_evolve_projection(B, a0, t, 2 * n_oracle, sign)
    return float(np.max(np.abs(coarse - fine)) / max(np.max(np.abs(fine)), np.finfo(float).tiny))


def _trapezoid_gle(blocks, a0: np.ndarray, t: float, steps: int) -> np.ndarray:
    """One trapezoid march of x' = A11 x + int_0^t A12 e^{A22 (t-s)} A21 x(s) ds."""

    A11, A12, A21, A22 = blocks
    h = t / steps
    step_propagator = expm(h * A22)

    kernel = np.empty((steps + 1, 2, 2))
    V = A21.copy()
    kernel[0] = A12 @ V
    for j in range(1, steps + 1):
        V = step_propagator @ V
        kernel[j] = A12 @ V

    x = np.empty((steps + 1, 2))
    x[0] = a0
    rate = A11 @ a0
    implicit = np.eye(2) - 0.5 * h * (A11 + 0.5 * h * kernel[0])
    for m in range(steps):
        # memory integral at t_{m+1} without its implicit x_{m+1} endpoint
        history = 0.5 * kernel[m + 1] @ x[0] + np.einsum("jab,jb->a", kernel[m:0:-1], x[1: m + 1])
        history *= h
        x[m + 1] = np.linalg.solve(implicit, x[m] + 0.5 * h * (rate + history))
        rate = A11 @ x[m + 1] + history + 0.5 * h * kernel[0] @ x[m + 1]
    return x[-1]


def memory_evolve_quadrature(
    B: float,
    a0: Sequence[float],
    t: float,
    quad_steps: int = 256,
    n_oracle: int = 64,
    sign: int = DIFFUSIVE,
) -> np.ndarray:
    """Integrates the GLE for (a_0, a_1) directly.

    The Markovian term is P L P; the memory integral uses the composite
    trapezoid rule with the kernel P L Q exp(Q L Q tau) Q L P evaluated
    exactly at the grid offsets. Marches at quad_steps, 2x and 4x are
    Romberg-combined to cancel the h^2 and h^4 error terms.

    Args:
        B: Mixing strength.
        a0: Observed initial pair; unobserved modes start at zero.
        t: Final time.
        quad_steps: Coarsest step count, >= 16.
        n_oracle: Truncation of the unobserved block.
        sign: Operator orientation.

    Returns:
        np.ndarray: (a_0(t), a_1(t)).
    """

    if quad_steps < 16:
        raise ConfigError(f"quad_steps must be >= 16, got {quad_steps}")
    if t < 0:
        raise ConfigError(f"time must be >= 0, got {t}")
    a0 = np.asarray(a0, dtype=np.float64)
    if t == 0:
        return a0.copy()

    op = build_mixing_operator(B, n_oracle, sign)
    M = op.matrix
    blocks = (M[:2, :2], M[:2, 2:], M[2:, :2], M[2:, 2:])
    # keep h times the fastest growth rate at or below 0.1
    steps = min(max(quad_steps, int(np.ceil(10 * max(dominant_eigenvalue(op), 0.0) * t))), 16 * quad_steps)
    if steps != quad_steps:
        logger.debug(f"memory_evolve_quadrature(): raising quad_steps {quad_steps} -> {steps} at B={B}, t={t}")
    with np.errstate(over="ignore", invalid="ignore"):
        coarse, mid, fine = (_trapezoid_gle(blocks, a0, t, n) for n in (steps, 2 * steps, 4 * steps))
    out = (64 * fine - 20 * mid + coarse) / 45
    if not np.all(np.isfinite(out)):
        raise IllPosedEvolutionError(f"GLE quadrature overflowed at t={t}; use the diffusive sign")
    return out


# ------------------------------ theorem report ------------------------------


def coefficient_norm(a: np.ndarray, norm: str = "euclidean") -> float:
    """Norm of (a_0, a_1, ...); "l2" weights by ||e_0|| = sqrt(2 pi), ||e_n|| = sqrt(4 pi)."""

    a = np.asarray(a, dtype=np.float64)
    if norm == "euclidean":
        return float(np.linalg.norm(a))
    if norm == "l2":
        weights = np.full(a.size, np.sqrt(4 * np.pi))
        weights[0] = np.sqrt(2 * np.pi)
        return float(np.linalg.norm(weights * a))
    raise ConfigError(f"unknown norm convention {norm!r}")


def explicit_floor(B: float, t: float, a0: Sequence[float]) -> float:
    """(sqrt2 / 200) B t e^{sqrt2 B t} (a_0 + a_1)."""

    a0 = np.asarray(a0, dtype=np.float64)
    return float(np.sqrt(2) / 200 * B * t * np.exp(np.sqrt(2) * B * t) * (a0[0] + a0[1]))


def proof_bound(B: float, t: float, a0: Sequence[float]) -> float:
    """(1/200) e^{sqrt2 B t} (sqrt2 B t + 10 sqrt2 - 1)(a_0 + a_1), valid for B large."""

    a0 = np.asarray(a0, dtype=np.float64)
    x = np.sqrt(2) * B * t
    return float(np.exp(x) * (x + 10 * np.sqrt(2) - 1) / 200 * (a0[0] + a0[1]))


def theorem_gap_report(
    B: float,
    a0: Sequence[float],
    times: Iterable[float],
    n_oracle: int = 64,
    sign: int = DIFFUSIVE,
    floor_c1: float = 0.0,
    norm: str = "euclidean",
) -> MemoryGapReport:
    """Compares the memoryless pair u1 with the memory-augmented pair u2.

    r1 = ||u1 - u2|| / (B t ||u1||) must exceed `floor_c1` (and be positive
    when B > 0); ||u1 - u2|| must exceed the explicit floor. At B = 0 the
    gap vanishes, the ratios are reported as 0 and no floor applies.

    Raises:
        ConfigError: If a0 has a non-positive component.
    """

    a0 = np.asarray(a0, dtype=np.float64)
    if a0.shape != (2,) or np.any(a0 <= 0):
        raise ConfigError(f"a0 must be a strictly positive pair, got {a0}")
    times = np.asarray([float(t) for t in times], dtype=np.float64)
    if np.any(times <= 0):
        logger.debug(f"theorem_gap_report(): dropping {int(np.sum(times <= 0))} non-positive times")
    times = times[times > 0]

    rows = {k: [] for k in ("u1", "u2", "gap", "r1", "r2", "floor", "proof")}
    for t in times:
        u1 = markovian_evolve(B, a0, t, sign)
        u2 = memory_evolve_projection(B, a0, t, n_oracle, sign)
        n1 = coefficient_norm(u1, norm)
        gap = coefficient_norm(u1 - u2, norm)
        rows["u1"].append(n1)
        rows["u2"].append(coefficient_norm(u2, norm))
        rows["gap"].append(gap)
        if B > 0:
            rows["r1"].append(gap / (B * t * n1))
            rows["r2"].append(gap / (B * t * np.exp(np.sqrt(2) * B * t)))
            rows["floor"].append(explicit_floor(B, t, a0))
            rows["proof"].append(proof_bound(B, t, a0))
        else:
            rows["r1"].append(0.0)
            rows["r2"].append(0.0)
            rows["floor"].append(0.0)
            rows["proof"].append(0.0)

    r1 = np.array(rows["r1"])
    gap = np.array(rows["gap"])
    floor = np.array(rows["floor"])
    if B > 0:
        r1_ok = (r1 > 0) & (r1 >= floor_c1)
        r2_ok = gap >= floor
    else:
        r1_ok = np.ones(times.size, dtype=bool)
        r2_ok = np.ones(times.size, dtype=bool)

    return MemoryGapReport(
        B=float(B),
        times=times,
        norm_u1=np.array(rows["u1"]),
        norm_u2=np.array(rows["u2"]),
        norm_gap=gap,
        r1=r1,
        r2=np.array(rows["r2"]),
        floor=floor,
        r1_ok=r1_ok,
        r2_ok=r2_ok,
        norm_convention=norm,
        proof_bound=np.array(rows["proof"]),
    )


def cross_oracle_suite(
    Bs: Sequence[float],
    times: Sequence[float],
    seed: int = 0,
    cases_per_pair: int = 1,
    n_oracle: int = 64,
    quad_steps: int = 256,
    sign: int = DIFFUSIVE,
) -> List[dict]:
    """Projection vs quadrature deviation over (B, t, random positive a0) cases."""

    rng = np.random.default_rng(seed)
    cases = [
        (float(B), float(t), rng.uniform(0.1, 1.0, 2))
        for B in Bs for t in times for _ in range(cases_per_pair)
    ]

    def run(case):
        B, t, a0 = case
        projection = memory_evolve_projection(B, a0, t, n_oracle, sign)
        quadrature = memory_evolve_quadrature(B, a0, t, quad_steps, n_oracle, sign)
        deviation = float(np.max(np.abs(projection - quadrature)) / np.max(np.abs(projection)))
        return {"B": B, "t": t, "a0_0": a0[0], "a0_1": a0[1], "rel_deviation": deviation}

    with ThreadPoolExecutor(max_workers=settings.thread_count()) as pool:
        return list(pool.map(run, cases))


# ------------------------------ lemma certification ------------------------------


def scan_b_min(bound_holds: Callable[[float], bool], grid: Sequence[float]) -> Optional[float]:
    """Smallest grid value from which the bound holds at every larger grid value."""

    b_min = None
    for B in sorted(grid, reverse=True):
        if not bound_holds(B):
            break
        b_min = float(B)
    return b_min


def _rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)))


def _l1_bound_ok(B: float, t: float) -> np.ndarray:
    scale = np.exp(np.sqrt(2) * B * t)
    value = markovian_closed_form(B, t, ANTI_DIFFUSIVE)
    return (value >= LEMMA_LOWER * scale) & (value <= LEMMA_UPPER * scale)


def lemma_l1_check(B: float, t: float, b_min: Optional[float] = None) -> LemmaReport:
    """Certifies that exp(t [[0, 2B], [B, 1]]) entries lie in [0.1, 10] e^{sqrt2 B t}.

    The bound is only asserted for B >= b_min; when b_min is not given it is
    found by scanning `L1_B_GRID` at this t.
    """

    if B <= 0 or t <= 0:
        raise ConfigError(f"lemma l1 needs B > 0 and t > 0, got B={B}, t={t}")
    closed = markovian_closed_form(B, t, ANTI_DIFFUSIVE)
    series = series_expm(t * np.array([[0.0, 2 * B], [B, 1.0]]))
    entries_ok = _l1_bound_ok(B, t)
    if b_min is None:
        b_min = scan_b_min(lambda b: bool(_l1_bound_ok(b, t).all()), L1_B_GRID)
    diff = _rel_diff(closed, series)
    below = b_min is None or B < b_min
    passed = diff <= CLOSED_FORM_TOL and bool(entries_ok.all() or below)
    return LemmaReport("l1", float(B), float(t), closed, series, diff, entries_ok, b_min, passed)


def lemma_l2_closed_form(B: float) -> np.ndarray:
    """exp([[0, B, 0], [B, 0, B], [0, B, 0]]) written with c = sqrt2 B."""

    c = np.sqrt(2) * B
    e1, e2 = np.exp(c), np.exp(2 * c)
    corner = 2 * e1 + e2 + 1
    anti = -2 * e1 + e2 + 1
    edge = np.sqrt(2) * e2 - np.sqrt(2)
    centre = 2 * (e2 + 1)
    return 0.25 * np.exp(-c) * np.array([
        [corner, edge, anti],
        [edge, centre, edge],
        [anti, edge, corner],
    ])


def _l2_bound_ok(B: float) -> np.ndarray:
    return lemma_l2_closed_form(B) >= LEMMA_LOWER * np.exp(np.sqrt(2) * B)


def lemma_l2_check(B: float, b_min: Optional[float] = None) -> LemmaReport:
    """Certifies exp([[0,B,0],[B,0,B],[0,B,0]]) >= 0.1 e^{sqrt2 B} entrywise.

    The (0, 2) corners behave like (cosh(sqrt2 B) - 1) / 2 and fall below
    the bound for B under about 0.71; the threshold is recorded as b_min.
    """

    if B <= 0:
        raise ConfigError(f"lemma l2 needs B > 0, got {B}")
    closed = lemma_l2_closed_form(B)
    series = series_expm(np.array([[0.0, B, 0.0], [B, 0.0, B], [0.0, B, 0.0]]))
    entries_ok = _l2_bound_ok(B)
    if b_min is None:
        b_min = scan_b_min(lambda b: bool(_l2_bound_ok(b).all()), L2_B_GRID)
    diff = _rel_diff(closed, series)
    below = b_min is None or B < b_min
    passed = diff <= CLOSED_FORM_TOL and bool(entries_ok.all() or below)
    return LemmaReport("l2", float(B), 1.0, closed, series, diff, entries_ok, b_min, passed)


# ------------------------------ discrete linear GLE ------------------------------


def _full_band_field(g: SpectralField, F: int) -> SpectralField:
    if g.band <= F:
        return g.padded(F)
    outside = np.abs(g.modes) > F
    if np.any(g.coeffs[outside] != 0):
        raise ConfigError(f"field has energy beyond the band limit F={F}")
    return SpectralField(g.coeffs[~outside], g.length, g.convention)


def _projection(u_hat: np.ndarray, u_pad: np.ndarray) -> complex:
    norm2 = np.vdot(u_pad, u_pad).real
    if norm2 == 0:
        raise ZeroEnergyError("observed spectrum is zero; gamma0 is undefined")
    return complex(np.vdot(u_pad, u_hat) / norm2)


def build_discrete_gle(symbol: FourierSymbol, g: SpectralField, f: int, F: int) -> GleSystem:
    """Assembles the block system of the linear GLE for observation at resolution f.

    The state is (u_bar, beta) with u_bar the observed DFT spectrum on
    |k| <= f_c and beta_k = u_hat_k - gamma0 u_bar_k over |k| <= F, where
    u_bar is zero outside the observed band. Couplings run over congruence
    classes k = k' (mod f).

    Args:
        symbol: Growth rates C_k on |k| <= F.
        g: Continuous initial field band-limited to |k| <= F.
        f: Observation resolution.
        F: Band limit, >= floor(f/2).

    Returns:
        GleSystem

    Raises:
        ZeroEnergyError: If the observed initial spectrum is zero.
    """

    fc = f // 2
    if F < fc:
        raise ConfigError(f"band limit F={F} below the observed band {fc}")
    g_full = _full_band_field(g, F)
    obs = spectral.observed_modes(f)
    full = np.arange(-F, F + 1)

    u_bar0 = spectral.alias_sum(g_full, f).coeffs
    u_pad = np.zeros(full.size, dtype=np.complex128)
    u_pad[obs + F] = u_bar0
    gamma0 = _projection(g_full.coeffs, u_pad)
    beta0 = g_full.coeffs - gamma0 * u_pad

    C_obs = symbol.array(obs)
    C_full = symbol.array(full)
    cong_oo = ((obs[:, None] - obs[None, :]) % f == 0).astype(np.float64)
    cong_of = ((obs[:, None] - full[None, :]) % f == 0).astype(np.float64)
    cong_ff = ((full[:, None] - full[None, :]) % f == 0).astype(np.float64)
    delta_fo = (full[:, None] == obs[None, :]).astype(np.float64)
    observed_row = (np.abs(full) <= fc).astype(np.float64)[:, None]

    a11 = f * gamma0 * C_obs[None, :] * cong_oo
    a12 = f * C_full[None, :] * cong_of
    a21 = gamma0 * C_full[:, None] * delta_fo - observed_row * f * gamma0 ** 2 * C_obs[None, :] * cong_of.T
    a22 = np.diag(C_full) - observed_row * gamma0 * f * C_full[None, :] * cong_ff

    # unrestricted draft formulas, kept only to report how far they are off
    a21_draft = C_obs[None, :] * gamma0 * (1 - gamma0 * f) * delta_fo
    a22_draft = (np.eye(full.size) * C_full[None, :] - gamma0 * f * C_full[None, :]) * cong_ff
    discrepancy = float(max(np.max(np.abs(a21 - a21_draft)), np.max(np.abs(a22 - a22_draft))))
    if discrepancy > 1e-12:
        logger.debug(f"build_discrete_gle(): draft block formulas differ by {discrepancy:.3e} (f={f}, F={F})")

    return GleSystem(
        a11=a11,
        a12=a12,
        a21=a21,
        a22=a22,
        beta0=beta0,
        gamma0=gamma0,
        eta0=1 - f * gamma0,
        resolution=f,
        band=F,
        observed_modes=obs,
        full_modes=full,
        u_bar0=u_bar0,
        draft_discrepancy=discrepancy,
    )


def aliasing_oracle(symbol: FourierSymbol, g: SpectralField, f: int, t: float) -> np.ndarray:
    """u_bar_k(t) = f sum_{k' = k mod f} exp(C_k' t) g_k'."""

    evolved = SpectralField(np.exp(symbol.array(g.modes) * t) * g.coeffs, g.length, g.convention)
    return spectral.alias_sum(evolved, f).coeffs


def gle_solve(system: GleSystem, symbol: FourierSymbol, g: SpectralField, t: float) -> GleSolution:
    """Observed spectrum at t from the GLE blocks, next to the aliasing oracle."""

    block = np.block([[system.a11, system.a12], [system.a21, system.a22]])
    z0 = np.concatenate([system.u_bar0, system.beta0])
    gle = (expm(t * block) @ z0)[: system.observed_modes.size]
    oracle = aliasing_oracle(symbol, _full_band_field(g, system.band), system.resolution, t)
    scale = max(float(np.max(np.abs(oracle))), np.finfo(float).tiny)
    return GleSolution(gle, oracle, float(np.max(np.abs(gle - oracle)) / scale))


def eta_curve(symbol: FourierSymbol, g: SpectralField, f: int, F: int, times: Iterable[float]) -> np.ndarray:
    """eta(t) = 1 - f <u_hat(t), u_bar(t)> / ||u_bar(t)||^2 over the given times."""

    g_full = _full_band_field(g, F)
    obs = spectral.observed_modes(f)
    out = []
    for t in times:
        u_hat = np.exp(symbol.array(g_full.modes) * t) * g_full.coeffs
        u_bar = spectral.alias_sum(SpectralField(u_hat, g.length), f).coeffs
        u_pad = np.zeros(g_full.coeffs.size, dtype=np.complex128)
        u_pad[obs + F] = u_bar
        out.append(1 - f * _projection(u_hat, u_pad))
    return np.array(out)


def random_real_field(rng: np.random.Generator, band: int, support: Optional[int] = None) -> SpectralField:
    """Conjugate-symmetric random coefficients on |k| <= support, padded to `band`."""

    support = band if support is None else support
    coeffs = np.zeros(2 * band + 1, dtype=np.complex128)
    positive = rng.standard_normal(support) + 1j * rng.standard_normal(support)
    coeffs[band + 1: band + support + 1] = positive
    coeffs[band - support: band][::-1] = np.conj(positive)
    coeffs[band] = rng.standard_normal()
    return SpectralField(coeffs)


def gle_suite(
    seed: int = 0,
    fs: Sequence[int] = (4, 8),
    symbols: Sequence[str] = ("diffusion", "drift"),
    n_cases: int = 20,
    t: float = 0.1,
    band_limited: bool = False,
) -> List[dict]:
    """Randomised GLE-vs-oracle deviations over resolutions, bands and symbols.

    With `band_limited` the random fields live on the unaliased band
    |k| <= ceil(f/2) - 1, otherwise on the full band |k| <= F.
    """

    rng = np.random.default_rng(seed)
    rows = []
    for case in range(n_cases):
        f = int(fs[case % len(fs)])
        kind = symbols[case % len(symbols)]
        fc = f // 2
        F = int(rng.integers(fc, 2 * f + 1))
        symbol = (
            FourierSymbol.diffusion(1.0, F) if kind == "diffusion"
            else FourierSymbol.drift_diffusion(1.0, float(rng.uniform(-2, 2)), F)
        )
        support = -(-f // 2) - 1 if band_limited else F
        g = random_real_field(rng, F, support)
        system = build_discrete_gle(symbol, g, f, F)
        solution = gle_solve(system, symbol, g, t)
        rows.append({
            "case": case,
            "symbol": kind,
            "f": f,
            "F": F,
            "t": t,
            "band_limited": band_limited,
            "rel_deviation": solution.max_rel_deviation,
            "abs_beta0": float(np.max(np.abs(system.beta0))),
            "eta0_abs": float(abs(system.eta0)),
            "draft_discrepancy": system.draft_discrepancy,
        })
    return rows

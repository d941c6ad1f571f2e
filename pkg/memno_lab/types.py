from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from memno_lab.errors import ConfigError, NonFiniteError


# ------------------------------ grids and spectra ------------------------------


@dataclass(frozen=True)
class Grid1D:
    """An equispaced periodic grid on [0, L).

    Attributes:
        length (float): Domain length L.
        resolution (int): Number of points f; x_f is identified with x_0.
    """

    length: float
    resolution: int

    def __post_init__(self):
        if self.resolution < 2:
            raise ConfigError(f"grid resolution must be >= 2, got {self.resolution}")
        if self.length <= 0:
            raise ConfigError(f"grid length must be positive, got {self.length}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.resolution) * self.length / self.resolution

    @property
    def spacing(self) -> float:
        return self.length / self.resolution


@dataclass(frozen=True)
class Grid2D:
    """An f x f periodic grid on [0, Lx) x [0, Ly).

    Attributes:
        lengths (Tuple[float, float]): Domain lengths per axis.
        resolution (int): Points per axis.
    """

    lengths: Tuple[float, float]
    resolution: int

    def __post_init__(self):
        if self.resolution < 2:
            raise ConfigError(f"grid resolution must be >= 2, got {self.resolution}")

    def axis(self, i: int) -> Grid1D:
        return Grid1D(self.lengths[i], self.resolution)

    @property
    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X, Y) with X varying along the first axis."""

        return tuple(np.meshgrid(self.axis(0).points, self.axis(1).points, indexing="ij"))


@dataclass
class SpectralField:
    """Complex Fourier coefficients indexed by k = -K..K.

    `coeffs[j]` holds the coefficient of mode k = j - K. Under the
    "continuous" convention the field is u(x) = sum_k a_k exp(i 2 pi k x / L);
    under "discrete" the entries are unnormalised DFT bins.

    Attributes:
        coeffs (np.ndarray): Complex array of odd length 2K + 1.
        length (float): Domain length L.
        convention (str): "continuous" or "discrete".
    """

    coeffs: np.ndarray
    length: float = 1.0
    convention: str = "continuous"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim != 1 or self.coeffs.size % 2 == 0:
            raise ConfigError(f"coefficients must be a 1D array of odd length, got shape {self.coeffs.shape}")
        if self.convention not in ("continuous", "discrete"):
            raise ConfigError(f"unknown convention {self.convention!r}")

    @classmethod
    def from_modes(cls, modes: Dict[int, complex], length: float = 1.0, band: Optional[int] = None,
                   convention: str = "continuous") -> "SpectralField":
        """Builds a field from a sparse {k: a_k} map, padded to |k| <= band."""

        k_max = max((abs(k) for k in modes), default=0)
        band = k_max if band is None else band
        if band < k_max:
            raise ConfigError(f"band {band} smaller than largest mode {k_max}")
        coeffs = np.zeros(2 * band + 1, dtype=np.complex128)
        for k, value in modes.items():
            coeffs[k + band] += value
        return cls(coeffs, length, convention)

    @property
    def band(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.band, self.band + 1)

    def coeff(self, k: int) -> complex:
        if abs(k) > self.band:
            return 0j
        return complex(self.coeffs[k + self.band])

    def padded(self, band: int) -> "SpectralField":
        """Returns the same field re-indexed on |k| <= band (band >= current)."""

        if band < self.band:
            raise ConfigError(f"cannot pad band {self.band} down to {band}")
        out = np.zeros(2 * band + 1, dtype=np.complex128)
        out[band - self.band: band + self.band + 1] = self.coeffs
        return SpectralField(out, self.length, self.convention)

    @property
    def is_real(self) -> bool:
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=1e-12))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


@dataclass
class FourierSymbol:
    """Per-mode growth rates C_k of a linear PDE written as d/dt u_k = C_k u_k.

    Attributes:
        values (Dict[int, complex]): Map from mode k to C_k.
    """

    values: Dict[int, complex]

    def __post_init__(self):
        if not all(np.isfinite(complex(v)) for v in self.values.values()):
            raise ConfigError("Fourier symbol entries must be finite")

    def __call__(self, k: int) -> complex:
        try:
            return complex(self.values[k])
        except KeyError:
            raise ConfigError(f"mode {k} outside symbol support |k| <= {self.band}") from None

    @property
    def band(self) -> int:
        return max(abs(k) for k in self.values)

    def array(self, modes) -> np.ndarray:
        return np.array([self(int(k)) for k in modes], dtype=np.complex128)

    @classmethod
    def diffusion(cls, diffusivity: float, band: int) -> "FourierSymbol":
        """C_k = -D k^2."""
        return cls({k: -diffusivity * k * k for k in range(-band, band + 1)})

    @classmethod
    def drift_diffusion(cls, diffusivity: float, omega: float, band: int) -> "FourierSymbol":
        """C_k = -D k^2 + i omega k."""
        return cls({k: complex(-diffusivity * k * k, omega * k) for k in range(-band, band + 1)})


# ------------------------------ PDE trajectories ------------------------------


PDE_KINDS = ("ks", "burgers", "linear", "ns2d")


@dataclass
class SolverSpec:
    """Provenance of a generated trajectory set.

    Attributes:
        kind (str): One of "ks", "burgers", "linear", "ns2d".
        nu (float): Viscosity.
        length (float): Domain length per axis.
        end_time (float): Final time T.
        nt (int): Number of saved intervals; N_t + 1 states are stored.
        dt (float): Internal integration step.
        resolution (int): Spatial points per axis used by the solver.
        seed (int): Base seed of the initial-condition streams.
        nonlinear (bool): Include the quadratic term (off for linear-limit checks).
        forcing (bool): Include the NS forcing term.
    """

    kind: str
    nu: float
    length: float
    end_time: float
    nt: int
    dt: float
    resolution: int
    seed: int = 0
    nonlinear: bool = True
    forcing: bool = True

    def __post_init__(self):
        if self.kind not in PDE_KINDS:
            raise ConfigError(f"unknown pde kind {self.kind!r}, expected one of {PDE_KINDS}")
        if self.kind != "linear" and self.nu <= 0:
            raise ConfigError(f"{self.kind} needs nu > 0, got {self.nu}")
        if self.end_time <= 0:
            raise ConfigError(f"end_time must be positive, got {self.end_time}")
        if self.nt < 1:
            raise ConfigError(f"nt must be >= 1, got {self.nt}")
        if self.resolution < 8 or self.resolution % 2:
            raise ConfigError(f"resolution must be even and >= 8, got {self.resolution}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.end_time, self.nt + 1)

    @property
    def steps_per_save(self) -> int:
        """Internal steps between saved states; the save interval must be a multiple of dt."""

        ratio = self.end_time / self.nt / self.dt
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > 1e-6 * max(1.0, ratio):
            raise ConfigError(f"save interval {self.end_time / self.nt} is not a multiple of dt={self.dt}")
        return steps

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrajectorySet:
    """A batch of solution trajectories on a shared space-time grid.

    Attributes:
        data (np.ndarray): Real array [n_traj, nt + 1, *spatial].
        times (np.ndarray): Equispaced saved times starting at 0.
        lengths (Tuple[float, ...]): Domain length per spatial axis.
        spec (SolverSpec): Generation provenance.
    """

    data: np.ndarray
    times: np.ndarray
    lengths: Tuple[float, ...]
    spec: SolverSpec

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.lengths = tuple(float(v) for v in self.lengths)
        if self.data.ndim < 3:
            raise ConfigError(f"trajectory data needs [n, t, space...], got shape {self.data.shape}")
        if self.data.shape[1] != self.times.size:
            raise ConfigError(f"{self.data.shape[1]} saved states but {self.times.size} times")
        if len(self.lengths) != self.data.ndim - 2:
            raise ConfigError(f"{len(self.lengths)} lengths for {self.data.ndim - 2} spatial axes")
        bad = np.argwhere(~np.isfinite(self.data))
        if bad.size:
            raise NonFiniteError("trajectory data contains NaN/Inf", tuple(int(i) for i in bad[0]))
        if self.times.size > 1 and not np.allclose(np.diff(self.times), self.times[1] - self.times[0]):
            raise ConfigError("time grid must be equispaced")
        if self.times[0] != 0.0:
            raise ConfigError("time grid must start at t=0")

    @property
    def n_traj(self) -> int:
        return self.data.shape[0]

    @property
    def resolution(self) -> int:
        return self.data.shape[-1]

    @property
    def dim(self) -> int:
        return self.data.ndim - 2

    def subset(self, index) -> "TrajectorySet":
        return TrajectorySet(self.data[index], self.times, self.lengths, self.spec)


# ------------------------------ Mori-Zwanzig ------------------------------


@dataclass
class TruncatedOperator:
    """Dense (N+1) x (N+1) matrix of the mixing operator in the {e_n} basis.

    Attributes:
        matrix (np.ndarray): Tridiagonal real matrix.
        B (float): Mixing strength.
        N (int): Truncation.
        sign (int): Orientation of the Laplacian part, -1 diffusive, +1 anti-diffusive.
    """

    matrix: np.ndarray
    B: float
    N: int
    sign: int


@dataclass
class GleSystem:
    """Observed/unobserved block system of the discrete linear GLE.

    Attributes:
        a11, a12, a21, a22 (np.ndarray): Blocks over observed (|k| <= f_c) and full (|k| <= F) modes.
        beta0 (np.ndarray): Unobserved residual at t=0 over the full band.
        gamma0 (complex): Projection coefficient <u_hat, u_bar>/||u_bar||^2.
        eta0 (complex): 1 - f gamma0.
        resolution (int): Observation resolution f.
        band (int): Band limit F of the continuous field.
        observed_modes (np.ndarray): -f_c..f_c.
        full_modes (np.ndarray): -F..F.
        u_bar0 (np.ndarray): Observed spectrum at t=0.
        draft_discrepancy (float): Max deviation of A21/A22 from the unrestricted draft formulas.
    """

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    beta0: np.ndarray
    gamma0: complex
    eta0: complex
    resolution: int
    band: int
    observed_modes: np.ndarray
    full_modes: np.ndarray
    u_bar0: np.ndarray
    draft_discrepancy: float = 0.0


@dataclass
class GleSolution:
    """GLE-route and aliasing-oracle observed spectra at one time.

    Attributes:
        gle (np.ndarray): Spectrum from the block matrix exponential.
        oracle (np.ndarray): f * sum_{k' = k mod f} exp(C_k' t) g_k'.
        max_rel_deviation (float): max |gle - oracle| / max |oracle|.
    """

    gle: np.ndarray
    oracle: np.ndarray
    max_rel_deviation: float


@dataclass
class MemoryGapReport:
    """Memoryless vs memory-augmented evolution over a set of times.

    Attributes:
        B (float): Mixing strength.
        times (np.ndarray): Positive sample times.
        norm_u1, norm_u2, norm_gap (np.ndarray): ||u1||, ||u2||, ||u1 - u2|| per time.
        r1, r2 (np.ndarray): ||u1-u2||/(B t ||u1||) and ||u1-u2||/(B t e^{sqrt2 B t}).
        floor (np.ndarray): Explicit lower bound on ||u1 - u2|| per time.
        r1_ok, r2_ok (np.ndarray): Per-time pass flags.
        norm_convention (str): "euclidean" or "l2".
        proof_bound (Optional[np.ndarray]): Large-B bound on ||u1 - u2||, reported only.
    """

    B: float
    times: np.ndarray
    norm_u1: np.ndarray
    norm_u2: np.ndarray
    norm_gap: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    floor: np.ndarray
    r1_ok: np.ndarray
    r2_ok: np.ndarray
    norm_convention: str = "euclidean"
    proof_bound: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return bool(np.all(self.r1_ok) and np.all(self.r2_ok))

    def report_rows(self) -> List[dict]:
        rows = []
        for i, t in enumerate(self.times):
            rows.append({
                "B": self.B,
                "t": float(t),
                "norm_u1": float(self.norm_u1[i]),
                "norm_u2": float(self.norm_u2[i]),
                "norm_gap": float(self.norm_gap[i]),
                "r1": float(self.r1[i]),
                "r2": float(self.r2[i]),
                "floor": float(self.floor[i]),
                "r1_ok": bool(self.r1_ok[i]),
                "r2_ok": bool(self.r2_ok[i]),
                "norm": self.norm_convention,
                "proof_bound": None if self.proof_bound is None else float(self.proof_bound[i]),
            })
        return rows


@dataclass
class LemmaReport:
    """Certification of one growth-order lemma instance.

    Attributes:
        name (str): "l1" or "l2".
        B (float): Mixing strength.
        t (float): Time (1 for l2).
        closed_form (np.ndarray): Matrix exponential from the closed form.
        series (np.ndarray): Matrix exponential from the series.
        max_rel_diff (float): Entrywise relative difference of the two.
        entries_ok (np.ndarray): Per-entry bound flags.
        b_min (Optional[float]): Threshold below which the bound is not asserted.
        passed (bool): Closed form agrees and the bound holds (or B < b_min).
    """

    name: str
    B: float
    t: float
    closed_form: np.ndarray
    series: np.ndarray
    max_rel_diff: float
    entries_ok: np.ndarray
    b_min: Optional[float]
    passed: bool


# ------------------------------ models and training ------------------------------


@dataclass
class ModelConfig:
    """Hyperparameters of a MemNO network.

    Attributes:
        layers (str): Layer string over {S, T}; S is an FFNO layer, T a memory layer.
        hidden (int): Hidden width h.
        expanded (int): MLP width h' inside each FFNO layer.
        modes (Optional[int]): Retained Fourier modes per axis; None binds to floor(f/2).
        state_dim (int): S4D state size N per channel.
        dim (int): Spatial dimensionality, 1 or 2.
        window (int): Memory window K, 0 for unlimited.
        reset_interval (int): Zero the memory state every r steps, 0 for never.
        multi_input_k (int): Number of stacked past states fed to the encoder, 0 for one.
        dt_min (float): Lower bound of the S4D step initialisation.
        dt_max (float): Upper bound of the S4D step initialisation.
    """

    layers: str = "SSTSS"
    hidden: int = 32
    expanded: int = 128
    modes: Optional[int] = None
    state_dim: int = 16
    dim: int = 1
    window: int = 0
    reset_interval: int = 0
    multi_input_k: int = 0
    dt_min: float = 1e-3
    dt_max: float = 1e-1

    @property
    def has_memory(self) -> bool:
        return "T" in self.layers

    @property
    def input_steps(self) -> int:
        return max(1, self.multi_input_k)


@dataclass
class TrainConfig:
    """Optimisation settings of one training run.

    Attributes:
        lr (float): Initial learning rate.
        epochs (int): Passes over the training set.
        batch_size (int): Trajectories per step.
        schedule (str): "cosine" or "step" (halve every `step_period` epochs).
        step_period (int): Epochs between halvings for the step schedule.
        noise_sigma (float): Std of Gaussian noise added to inputs.
        seed (int): Seed of parameter init, shuffling and noise.
        window (int): Memory window K used during evaluation rollouts.
        teacher_forcing (bool): Feed ground truth history during training.
        clip_norm (float): Global gradient-norm clip, 0 disables.
    """

    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 16
    schedule: str = "cosine"
    step_period: int = 90
    noise_sigma: float = 0.0
    seed: int = 0
    window: int = 0
    teacher_forcing: bool = True
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.schedule not in ("cosine", "step"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")


@dataclass
class LossCurve:
    """Per-epoch training record.

    Attributes:
        epochs (List[int]): Epoch index.
        lrs (List[float]): Learning rate used during the epoch.
        train_nrmse (List[float]): Mean teacher-forced nRMSE over the epoch.
    """

    epochs: List[int] = field(default_factory=list)
    lrs: List[float] = field(default_factory=list)
    train_nrmse: List[float] = field(default_factory=list)

    def append(self, epoch: int, lr: float, loss: float):
        self.epochs.append(epoch)
        self.lrs.append(lr)
        self.train_nrmse.append(loss)

    def rows(self) -> List[dict]:
        return [
            {"epoch": e, "lr": lr, "train_nrmse": loss}
            for e, lr, loss in zip(self.epochs, self.lrs, self.train_nrmse)
        ]


@dataclass
class EvalReport:
    """Autoregressive rollout error against ground truth.

    Attributes:
        per_step (np.ndarray): nRMSE at t = 1..N_t.
        mean (float): Mean over the predicted steps.
        n_traj (int): Trajectories evaluated.
        provenance (dict): Model/train config and dataset info.
    """

    per_step: np.ndarray
    mean: float
    n_traj: int
    provenance: dict = field(default_factory=dict)

    def difference(self, other: "EvalReport") -> np.ndarray:
        """Per-timestep nRMSE of self minus other."""

        if self.per_step.shape != other.per_step.shape:
            raise ConfigError(f"cannot compare reports with {self.per_step.size} and {other.per_step.size} steps")
        return self.per_step - other.per_step


# ------------------------------ persistence ------------------------------


@dataclass
class ContainerHeader:
    """Parsed header of an MNO1 container.

    Attributes:
        version (int): Format version.
        dtype_code (int): Element type, 1 = float64.
        extents (Tuple[int, ...]): Payload shape.
        fields (Dict[str, np.ndarray]): Named float64 metadata arrays.
        payload_offset (int): Byte offset of the payload.
    """

    version: int
    dtype_code: int
    extents: Tuple[int, ...]
    fields: Dict[str, np.ndarray]
    payload_offset: int

    @property
    def payload_bytes(self) -> int:
        return int(np.prod(self.extents, dtype=np.int64)) * 8

"""Teacher-forced training and autoregressive evaluation of MemNO models."""

import logging
from typing import Optional

import numpy as np
import torch
from tqdm import tqdm

from memno_lab.errors import ConfigError, ResolutionMismatchError, TrainingDivergenceError, ZeroEnergyError
from memno_lab.models.memno import MemNO
from memno_lab.modules import autodiff, rand
from memno_lab.types import EvalReport, LossCurve, TrainConfig, TrajectorySet

logger = logging.getLogger(__name__)


def nrmse_per_sample(pred: torch.Tensor, truth: torch.Tensor, spatial_dims: int = 1) -> torch.Tensor:
    """||truth - pred|| / ||truth|| over the trailing spatial axes."""

    if pred.shape != truth.shape:
        raise ConfigError(f"prediction {tuple(pred.shape)} and target {tuple(truth.shape)} differ")
    axes = tuple(range(-spatial_dims, 0))
    norm = torch.linalg.vector_norm(truth, dim=axes)
    if torch.any(norm == 0):
        raise ZeroEnergyError("nrmse against a zero-norm target")
    return torch.linalg.vector_norm(truth - pred, dim=axes) / norm


def nrmse(pred: torch.Tensor, truth: torch.Tensor, spatial_dims: int = 1) -> torch.Tensor:
    """Per-sample nRMSE averaged over every leading axis."""

    return nrmse_per_sample(pred, truth, spatial_dims).mean()


def inject_noise(u: torch.Tensor, sigma: float, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """u + N(0, sigma^2), freshly sampled on every call; sigma = 0 returns u itself."""

    if sigma == 0:
        return u
    return u + sigma * torch.randn(u.shape, dtype=u.dtype, generator=generator)


def _check_binding(model: MemNO, ts: TrajectorySet):
    if ts.resolution != model.resolution:
        raise ResolutionMismatchError(ts.resolution, model.resolution)
    if ts.dim != model.config.dim:
        raise ConfigError(f"{ts.dim}D dataset for a {model.config.dim}D model")


def _scheduler(optimizer: torch.optim.Optimizer, cfg: TrainConfig):
    if cfg.schedule == "cosine":
        return torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs, eta_min=0.0)
    return torch.optim.lr_scheduler.StepLR(optimizer, step_size=cfg.step_period, gamma=0.5)


def rollout(
    model: MemNO,
    initial: torch.Tensor,
    steps: int,
    window: int = 0,
    noise_sigma: float = 0.0,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Feeds predictions back as inputs for `steps` steps.

    Args:
        model: Trained model.
        initial: Ground-truth prefix [B, n0, *spatial].
        steps: Number of predicted states.
        window: Keep only the last `window` states as model input, 0 for all.
        noise_sigma: Input noise, redrawn at every step.

    Returns:
        torch.Tensor: [B, n0 + steps, *spatial], the prefix followed by predictions.
    """

    history = initial
    keep = max(window, model.config.input_steps) if window else 0
    for _ in range(steps):
        inputs = history[:, -keep:] if keep else history
        prediction = model(inject_noise(inputs, noise_sigma, generator))[:, -1]
        history = torch.cat([history, prediction.unsqueeze(1)], dim=1)
    return history


def train(model: MemNO, train_set: TrajectorySet, cfg: TrainConfig, progress: bool = False) -> LossCurve:
    """Trains on next-step prediction over every saved step of every trajectory.

    With teacher forcing the whole ground-truth sequence is fed in one
    causal pass; otherwise the loss is taken on a rollout from the first
    input states. Noise is added to inputs only.

    Raises:
        ResolutionMismatchError: If the set does not match the model's grid.
        TrainingDivergenceError: On a non-finite loss.
    """

    _check_binding(model, train_set)
    torch.manual_seed(cfg.seed)
    generator = rand.torch_generator(cfg.seed)
    data = torch.from_numpy(train_set.data).to(autodiff.DTYPE)
    K = model.config.input_steps
    if data.shape[1] <= K:
        raise ConfigError(f"trajectories of {data.shape[1]} states leave nothing to predict after {K} inputs")

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)
    scheduler = _scheduler(optimizer, cfg)
    curve = LossCurve()
    n = data.shape[0]

    model.train()
    for epoch in tqdm(range(cfg.epochs), desc="train", disable=not progress):
        lr = optimizer.param_groups[0]["lr"]
        order = torch.randperm(n, generator=generator)
        losses = []
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            batch = data[order[start: start + cfg.batch_size]]
            if cfg.teacher_forcing:
                pred = model(inject_noise(batch[:, :-1], cfg.noise_sigma, generator))[:, K - 1:]
            else:
                pred = rollout(model, batch[:, :K], data.shape[1] - K, cfg.window, cfg.noise_sigma, generator)[:, K:]
            loss = nrmse(pred, batch[:, K:], train_set.dim)
            if not torch.isfinite(loss):
                raise TrainingDivergenceError(epoch, batch_index, float(loss))

            optimizer.zero_grad()
            loss.backward()
            if cfg.clip_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            optimizer.step()
            losses.append(float(loss))
        curve.append(epoch, lr, float(np.mean(losses)))
        scheduler.step()
        logger.debug(f"train(): epoch {epoch} lr {lr:.3e} nrmse {curve.train_nrmse[-1]:.4e}")

    logger.info(f"train(): {cfg.epochs} epochs, final nrmse {curve.train_nrmse[-1]:.4e}")
    return curve


def evaluate(
    model: MemNO,
    test_set: TrajectorySet,
    cfg: TrainConfig,
    start: Optional[int] = None,
    progress: bool = False,
) -> EvalReport:
    """Autoregressive rollout from the first `start` ground-truth states.

    `start` defaults to the model's input steps. Per-step nRMSE is reported
    for every predicted state, i.e. times[start:].
    """

    _check_binding(model, test_set)
    K = model.config.input_steps
    start = K if start is None else start
    if start < K:
        raise ConfigError(f"rollout start {start} is shorter than the {K} input states")
    total = test_set.times.size
    if start >= total:
        raise ConfigError(f"rollout start {start} leaves no states to predict out of {total}")

    generator = rand.torch_generator(cfg.seed)
    data = torch.from_numpy(test_set.data).to(autodiff.DTYPE)
    model.eval()
    per_traj = []
    with torch.no_grad():
        for i in tqdm(range(0, data.shape[0], cfg.batch_size), desc="eval", disable=not progress):
            batch = data[i: i + cfg.batch_size]
            predicted = rollout(model, batch[:, :start], total - start, cfg.window, cfg.noise_sigma, generator)
            per_traj.append(nrmse_per_sample(predicted[:, start:], batch[:, start:], test_set.dim))
    errors = torch.cat(per_traj).numpy()
    per_step = errors.mean(axis=0)
    return EvalReport(
        per_step=per_step,
        mean=float(per_step.mean()),
        n_traj=test_set.n_traj,
        provenance={
            "layers": model.config.layers,
            "resolution": model.resolution,
            "start": start,
            "times": [float(t) for t in test_set.times[start:]],
            "window": cfg.window,
            "noise_sigma": cfg.noise_sigma,
        },
    )

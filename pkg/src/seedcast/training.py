"""Loss functions, Adam training loop with early stopping, and metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .model import SeedModel
from .rng import RngState
from .spectral import entropy_tensor


# -- losses -------------------------------------------------------------------


def loss_pred(y, yhat: T.Tensor) -> T.Tensor:
    """Mean squared error over every forecast entry."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeError(f"target shape {y.shape} != forecast shape {yhat.shape}")
    diff = yhat - T.Tensor(y)
    return (diff * diff).mean()


def target_entropy(y: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Per-variable spectral entropy of fixed targets (no gradient, chunked)."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty(y.shape[:-1])
    with T.no_grad():
        for i in range(0, y.shape[0], chunk):
            out[i : i + chunk] = entropy_tensor(
                T.Tensor(y[i : i + chunk]), degenerate="zero"
            ).data
    return out


def _entropy_gap(yhat: T.Tensor, ent_y: np.ndarray) -> T.Tensor:
    diff = entropy_tensor(yhat, degenerate="zero") - T.Tensor(ent_y)
    return (diff * diff).mean()


def loss_spen(y, yhat: T.Tensor) -> T.Tensor:
    """Mean squared per-variable gap between target and forecast spectral entropy.

    Entropies are computed on the raw horizon-length series (no shaping
    filter); constant series map to entropy 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeError(f"target shape {y.shape} != forecast shape {yhat.shape}")
    with T.no_grad():
        ent_y = entropy_tensor(T.Tensor(y), degenerate="zero").data
    return _entropy_gap(yhat, ent_y)


def total_loss(y, yhat: T.Tensor, lam: float) -> T.Tensor:
    """Prediction MSE plus lam times the entropy-matching term."""
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    lp = loss_pred(y, yhat)
    if lam == 0.0:
        return lp
    return lp + lam * loss_spen(y, yhat)


# -- optimizer -----------------------------------------------------------------


class Adam:
    """Adaptive moments with bias correction; nothing exotic."""

    def __init__(self, params: list[T.Tensor], lr: float = 1e-3,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1**self.t)
            v_hat = self.v[i] / (1 - self.b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- configs and reports ---------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    lam: float | None = None  # None: use the model config's lambda
    patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "learning_rate": self.learning_rate, "lambda": self.lam,
            "patience": self.patience, "seed": self.seed,
        }


@dataclass
class MetricsReport:
    mse: float
    mae: float
    horizon_mse: list[float]
    horizon_mae: list[float]
    epochs: int = 0
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "horizon": {"mse": self.horizon_mse, "mae": self.horizon_mae},
            "epochs": self.epochs,
            "seconds": self.seconds,
        }


@dataclass
class SplitWindows:
    """Materialized sliding windows for one split: x (M,C,L), y (M,C,T)."""

    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class DatasetSplits:
    train: SplitWindows
    val: SplitWindows
    test: SplitWindows


# -- evaluation -------------------------------------------------------------------


def _forecast_batched(model: SeedModel, x: np.ndarray, batch: int = 256) -> np.ndarray:
    outs = []
    with T.no_grad():
        for i in range(0, x.shape[0], batch):
            outs.append(model.forward(x[i : i + batch]).data)
    return np.concatenate(outs, axis=0)


def evaluate(model: SeedModel, split: SplitWindows, batch: int = 256) -> MetricsReport:
    """MSE/MAE over all windows of the split, on de-normalized values."""
    t0 = time.perf_counter()
    yhat = _forecast_batched(model, split.x, batch)
    err = yhat - split.y
    mse_steps = (err**2).mean(axis=(0, 1))  # per horizon step
    mae_steps = np.abs(err).mean(axis=(0, 1))
    return MetricsReport(
        mse=float((err**2).mean()),
        mae=float(np.abs(err).mean()),
        horizon_mse=[float(v) for v in mse_steps],
        horizon_mae=[float(v) for v in mae_steps],
        seconds=time.perf_counter() - t0,
    )


def validation_mse(model: SeedModel, split: SplitWindows, batch: int = 256) -> float:
    yhat = _forecast_batched(model, split.x, batch)
    return float(((yhat - split.y) ** 2).mean())


def persistence_report(split: SplitWindows) -> MetricsReport:
    """Repeat-last-value baseline: the weakest credible reference forecast."""
    yhat = np.broadcast_to(split.x[..., -1:], split.y.shape)
    err = yhat - split.y
    return MetricsReport(
        mse=float((err**2).mean()),
        mae=float(np.abs(err).mean()),
        horizon_mse=[float(v) for v in (err**2).mean(axis=(0, 1))],
        horizon_mae=[float(v) for v in np.abs(err).mean(axis=(0, 1))],
    )


# -- training loop ------------------------------------------------------------------


def train(model: SeedModel, splits: DatasetSplits, cfg: TrainConfig,
          on_epoch=None) -> tuple[SeedModel, MetricsReport]:
    """Adam with early stopping on validation MSE; restores the best checkpoint.

    Deterministic given the seed: batch order comes from the config's RNG and
    every update is sequential. ``on_epoch(epoch, val_mse)``, when given, is
    called after each epoch's validation pass.
    """
    for name, part in (("train", splits.train), ("val", splits.val), ("test", splits.test)):
        if len(part) == 0:
            raise DataError(f"{name} split has no windows")
    lam = cfg.lam if cfg.lam is not None else model.config.lam
    rng = RngState(cfg.seed)
    opt = Adam(model.params(), cfg.learning_rate)
    t0 = time.perf_counter()
    ent_y = target_entropy(splits.train.y) if lam > 0 else None
    best_val = np.inf
    best_state = model.state_arrays()
    bad_epochs = 0
    epochs_run = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(splits.train))
        for step, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            yhat = model.forward(splits.train.x[idx])
            loss = loss_pred(splits.train.y[idx], yhat)
            if lam > 0:
                loss = loss + lam * _entropy_gap(yhat, ent_y[idx])
            if not np.isfinite(loss.data):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, step {step}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
        epochs_run = epoch + 1
        val = validation_mse(model, splits.val)
        if on_epoch is not None:
            on_epoch(epoch, val)
        if val < best_val:
            best_val = val
            best_state = model.state_arrays()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    model.load_state_arrays(best_state)
    report = evaluate(model, splits.test)
    report.epochs = epochs_run
    report.seconds = time.perf_counter() - t0
    return model, report

"""Training loop, evaluation and the sweep/ablation harnesses."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..attention import ablation_keep
from ..spectral import spectral_gap
from .encoder import EncoderSpec, attention_maps, forward, init_params, loss_and_grads
from .tasks import SyntheticTask

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    batch_size: int = 16
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_epoch: int | None = 19
    decay_factor: float = 5.0
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.decay_epoch is not None and not 0 < self.decay_epoch:
            raise ValueError("decay_epoch must be a positive epoch index")

    def lr_at(self, epoch: int) -> float:
        """Learning rate used during 1-based ``epoch``."""
        if self.decay_epoch is not None and epoch >= self.decay_epoch:
            return self.lr / self.decay_factor
        return self.lr


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def evaluate(spec, params, inputs, labels, keep=None, batch_size=256):
    """(loss, accuracy) over a dataset."""
    losses, correct = [], 0
    for lo in range(0, len(labels), batch_size):
        x = inputs[lo : lo + batch_size]
        y = labels[lo : lo + batch_size]
        k = None if keep is None else keep[lo : lo + batch_size]
        logits = forward(spec, params, x, keep=k).astype(np.float64)
        z = logits - logits.max(1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(1, keepdims=True))
        losses.append(-logp[np.arange(len(y)), y].sum())
        correct += int((logits.argmax(1) == y).sum())
    return float(np.sum(losses) / len(labels)), correct / len(labels)


@dataclass
class TrainResult:
    spec: EncoderSpec
    config: TrainConfig
    params: dict
    history: list

    @property
    def test_accuracy(self) -> float:
        return [r for r in self.history if r["split"] == "test"][-1]["accuracy"]


def train(spec: EncoderSpec, task: SyntheticTask, cfg: TrainConfig) -> TrainResult:
    """Train with Adam on the task's train split.

    History rows carry (epoch, split, loss, accuracy, lr); epoch 0 is the
    evaluation at initialization.
    """
    dtype = np.dtype(cfg.dtype)
    params = init_params(spec, seed=cfg.seed, dtype=dtype)
    xtr, ytr = task.split("train")
    xte, yte = task.split("test")
    xtr, xte = xtr.astype(dtype), xte.astype(dtype)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(params, cfg.beta1, cfg.beta2, cfg.eps)

    history = []

    def record(epoch, lr):
        for split, x, y in (("train", xtr, ytr), ("test", xte, yte)):
            try:
                loss, acc = evaluate(spec, params, x, y)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            history.append(
                {"epoch": epoch, "split": split, "loss": loss, "accuracy": acc, "lr": lr}
            )
        return history[-2]["loss"]

    initial = record(0, cfg.lr_at(1))
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(len(ytr))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            _, grads = loss_and_grads(spec, params, xtr[idx], ytr[idx])
            opt.step(params, grads, lr)
        train_loss = record(epoch, lr)
        if not np.isfinite(train_loss) or train_loss > 10 * initial:
            raise TrainingDiverged(
                f"epoch {epoch}: train loss {train_loss:.4g} vs initial {initial:.4g}"
            )
    return TrainResult(spec, cfg, params, history)


def mean_spectral_gap(spec, params, inputs, limit=100):
    """Mean first-layer, first-head spectral gap over up to ``limit`` sequences."""
    maps = attention_maps(spec, params, inputs[:limit].astype(params["embed"].dtype))[0]
    return float(np.mean([spectral_gap(a[0].astype(np.float64)) for a in maps]))


def _sweep_cell(args):
    spec, task, cfg = args
    t0 = time.perf_counter()
    res = train(spec, task, cfg)
    xte, _ = task.split("test")
    return {
        "variant": spec.label,
        "projection": spec.projection,
        "d": spec.d,
        "depth": spec.depth,
        "seed": cfg.seed,
        "test_accuracy": res.test_accuracy,
        "spectral_gap": mean_spectral_gap(spec, res.params, xte),
        "seconds": time.perf_counter() - t0,
    }


def sweep(base: EncoderSpec, task, cfg: TrainConfig, dims, depths, variants, projections=None,
          seeds=range(5), workers=1):
    """Train every (variant, projection, d, depth, seed) cell.

    ``variants`` holds (variant, alpha) pairs. Returns one row per cell in a
    fixed order regardless of ``workers``.
    """
    projections = projections or [base.projection]
    jobs = []
    for variant, alpha in variants:
        for proj in projections:
            for d in dims:
                for depth in depths:
                    spec = replace(base, d=d, depth=depth, variant=variant, alpha=alpha,
                                   projection=proj)
                    for seed in seeds:
                        jobs.append((spec, task, replace(cfg, seed=seed)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sweep_cell, jobs))
    return [_sweep_cell(j) for j in jobs]


def summarize(rows, key="test_accuracy"):
    """Mean and std of ``key`` per (variant, projection, d, depth)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["variant"], r["projection"], r["d"], r["depth"]), []).append(r[key])
    return [
        {"variant": v, "projection": p, "d": d, "depth": L, "mean": float(np.mean(x)),
         "std": float(np.std(x)), "count": len(x)}
        for (v, p, d, L), x in groups.items()
    ]


def ablation_sweep(result: TrainResult, task: SyntheticTask, p_grid=None, mode="nodes", seed=0):
    """Test accuracy after Bernoulli(p) removal of attention edges or nodes."""
    if p_grid is None:
        p_grid = np.round(np.linspace(0.0, 1.0, 11), 10)
    xte, yte = task.split("test")
    xte = xte.astype(result.params["embed"].dtype)
    shape = (len(yte), task.n, task.n)
    rows = []
    for p in p_grid:
        rng = np.random.default_rng(seed)
        keep = None if p == 0 else ablation_keep(shape, float(p), mode, rng)
        loss, acc = evaluate(result.spec, result.params, xte, yte, keep=keep)
        rows.append({"p": float(p), "mode": mode, "loss": loss, "accuracy": acc})
    return rows


def config_dict(spec: EncoderSpec, cfg: TrainConfig) -> dict:
    return {"encoder": spec.to_dict(), "train": asdict(cfg)}

from dataclasses import replace

import numpy as np
import pytest

from fna.model import (
    EncoderSpec,
    TrainConfig,
    ablation_sweep,
    evaluate,
    init_params,
    loss_and_grads,
    make_synthetic_task,
    sweep,
    train,
)
from fna.model.encoder import projections
from fna.model.tasks import MIXTURE_MODES
from fna.model.training import Adam, TrainingDiverged, mean_spectral_gap, summarize

TWO_MODES = MIXTURE_MODES[:2]
VARIANTS = [("fna", 1.2), ("fna", 2.0), ("dot_product", 2.0)]


def cluster_task(seed=0, n_samples=600):
    return make_synthetic_task("cluster_label", 8, 8, seed=seed, n_samples=n_samples,
                               modes=TWO_MODES)


def cluster_spec(**kw):
    return EncoderSpec(d=8, vocab_size=8, max_len=8, **kw)


def test_train_config_validation_and_schedule():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(decay_epoch=0)
    cfg = TrainConfig(lr=1e-3, decay_epoch=19, decay_factor=5)
    assert cfg.lr_at(18) == 1e-3 and cfg.lr_at(19) == pytest.approx(2e-4)
    assert TrainConfig(decay_epoch=None).lr_at(100) == 1e-3


def test_zero_epochs_is_initial_evaluation():
    task = cluster_task()
    spec = cluster_spec()
    res = train(spec, task, TrainConfig(epochs=0))
    assert [r["epoch"] for r in res.history] == [0, 0]
    params = init_params(spec, seed=0, dtype=np.float32)
    xtr, ytr = task.split("train")
    loss, acc = evaluate(spec, params, xtr.astype(np.float32), ytr)
    assert res.history[0]["loss"] == loss and res.history[0]["accuracy"] == acc


def test_training_is_deterministic():
    task = cluster_task(n_samples=200)
    cfg = TrainConfig(epochs=2, seed=3)
    a = train(cluster_spec(), task, cfg)
    b = train(cluster_spec(), task, cfg)
    assert a.history == b.history
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


@pytest.mark.parametrize("projection", ["orthogonal", "tied"])
def test_orthogonality_preserved_every_step(projection):
    spec = cluster_spec(projection=projection, depth=2)
    task = cluster_task(n_samples=160)
    params = init_params(spec, seed=0)
    opt = Adam(params)
    xtr, ytr = task.split("train")
    for lo in range(0, 128, 16):
        _, grads = loss_and_grads(spec, params, xtr[lo:lo + 16], ytr[lo:lo + 16])
        opt.step(params, grads, 1e-2)
        for layer in range(2):
            wq, wk, _, _ = projections(spec, params, layer)
            for w in (wq, wk):
                assert np.max(np.abs(w.T @ w - np.eye(8))) <= 1e-8
    assert np.abs(params["l0.s_q" if projection == "orthogonal" else "l0.s_qk"]).max() > 0


@pytest.mark.parametrize("variant,alpha", VARIANTS)
def test_loss_decreases_on_cluster_task(variant, alpha):
    task = cluster_task()
    for seed in range(3):
        res = train(cluster_spec(variant=variant, alpha=alpha), task,
                    TrainConfig(epochs=5, seed=seed))
        train_rows = [r for r in res.history if r["split"] == "train"]
        assert train_rows[5]["loss"] < train_rows[0]["loss"]


def pooled_logistic_accuracy(task, steps=2000, lr=0.5):
    # independent oracle: logistic regression on per-sequence mean features
    xtr, ytr = task.split("train")
    xte, yte = task.split("test")
    ftr, fte = xtr.mean(1), xte.mean(1)
    w, b = np.zeros(ftr.shape[1]), 0.0
    for _ in range(steps):
        p = 1 / (1 + np.exp(-(ftr @ w + b)))
        w -= lr * ftr.T @ (p - ytr) / len(ytr)
        b -= lr * np.mean(p - ytr)
    return np.mean(((fte @ w + b) > 0) == yte)


def test_separable_cluster_task_reaches_95_percent():
    task = cluster_task(n_samples=1000)
    assert pooled_logistic_accuracy(task) >= 0.95
    res = train(cluster_spec(alpha=1.2), task, TrainConfig(epochs=25))
    assert res.test_accuracy >= 0.95


def test_divergence_aborts():
    task = make_synthetic_task("long_range_pair", 8, 8, n_samples=400)
    with pytest.raises(TrainingDiverged):
        train(cluster_spec(), task, TrainConfig(lr=50.0, epochs=3))


@pytest.fixture(scope="module")
def long_range_models():
    task = make_synthetic_task("long_range_pair", 8, 8, seed=0)
    cfg = TrainConfig(lr=3e-3)
    out = {}
    for variant, alpha in [("fna", 1.2), ("dot_product", 2.0)]:
        spec = EncoderSpec(d=8, vocab_size=8, max_len=8, variant=variant, alpha=alpha)
        out[variant] = [train(spec, task, replace(cfg, seed=s))
                        for s in range(5)]
    return task, out


def test_dp_not_better_than_fna_on_long_range(long_range_models):
    _, models = long_range_models
    wins = sum(d.test_accuracy <= f.test_accuracy
               for d, f in zip(models["dot_product"], models["fna"]))
    assert wins >= 4


def test_ablation_p_zero_matches_evaluation(long_range_models):
    task, models = long_range_models
    res = models["fna"][0]
    row = ablation_sweep(res, task, [0.0])[0]
    xte, yte = task.split("test")
    loss, acc = evaluate(res.spec, res.params, xte.astype(np.float32), yte)
    assert row["accuracy"] == acc and row["loss"] == loss


def test_ablation_trend_non_increasing(long_range_models):
    task, models = long_range_models
    grid = [0.0, 0.3, 0.6, 1.0]
    for variant in models:
        curves = np.array([[r["accuracy"] for r in ablation_sweep(m, task, grid)]
                           for m in models[variant]])
        means = curves.mean(0)
        # seed noise: two standard errors of the 5-seed mean
        noise = 2 * curves.std(0, ddof=1) / np.sqrt(len(curves))
        rise = np.diff(means)
        assert np.all(rise <= np.maximum(noise[1:], noise[:-1])), (variant, means, noise)


def test_ablation_default_grid():
    task = cluster_task(n_samples=100)
    res = train(cluster_spec(), task, TrainConfig(epochs=0))
    rows = ablation_sweep(res, task)
    assert [r["p"] for r in rows] == [round(0.1 * i, 1) for i in range(11)]


def test_single_cell_sweep_matches_train():
    task = cluster_task(n_samples=200)
    spec, cfg = cluster_spec(), TrainConfig(epochs=2)
    rows = sweep(spec, task, cfg, [8], [1], [("fna", 1.2)], seeds=[0])
    res = train(spec, task, cfg)
    assert len(rows) == 1 and rows[0]["test_accuracy"] == res.test_accuracy
    xte, _ = task.split("test")
    assert rows[0]["spectral_gap"] == mean_spectral_gap(spec, res.params, xte)


def test_parallel_sweep_matches_serial():
    task = cluster_task(n_samples=120)
    args = (cluster_spec(), task, TrainConfig(epochs=1), [4, 8], [1, 2],
            [("fna", 1.2), ("dot_product", 2.0)])
    serial = sweep(*args, projections=["tied", "general"], seeds=range(2))
    parallel = sweep(*args, projections=["tied", "general"], seeds=range(2), workers=2)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]  # noqa: E731
    assert strip(serial) == strip(parallel)
    assert len(serial) == 2 * 2 * 2 * 2 * 2
    summary = summarize(serial)
    assert len(summary) == 16 and all(s["count"] == 2 for s in summary)

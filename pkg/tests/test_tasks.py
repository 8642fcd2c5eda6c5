import numpy as np
import pytest

from fna.model import make_synthetic_task
from fna.model.tasks import MIXTURE_MODES, nearest_mode, sample_mixture


def test_cluster_labels_are_nearest_mode():
    task = make_synthetic_task("cluster_label", 6, 4, seed=1, n_samples=500)
    assert task.n_classes == 3 and task.inputs.shape == (500, 6, 4)
    assert np.all(task.inputs[..., 2:] == 0)
    assert np.array_equal(task.labels, nearest_mode(task.inputs[..., :2].mean(1)))


def test_long_range_label_rule():
    task = make_synthetic_task("long_range_pair", 10, 8, seed=2, n_samples=400)
    tokens = task.inputs.argmax(-1)
    assert np.array_equal(task.labels, (tokens[:, 0] == tokens[:, -1]).astype(int))
    assert np.all(task.inputs.sum(-1) == 1)


def test_two_token_long_range_is_adjacent_pair():
    task = make_synthetic_task("long_range_pair", 2, 4, seed=3, n_samples=200)
    tokens = task.inputs.argmax(-1)
    assert task.n == 2
    assert np.array_equal(task.labels, (tokens[:, 0] == tokens[:, 1]).astype(int))


@pytest.mark.parametrize("kind", ["cluster_label", "long_range_pair"])
def test_class_balance(kind):
    task = make_synthetic_task(kind, 8, 8, seed=4, n_samples=10_000)
    freq = np.bincount(task.labels, minlength=task.n_classes) / 10_000
    assert np.max(np.abs(freq - 1 / task.n_classes)) <= 0.02


def test_split_and_determinism():
    a = make_synthetic_task("long_range_pair", 8, 8, seed=5, n_samples=1000)
    b = make_synthetic_task("long_range_pair", 8, 8, seed=5, n_samples=1000)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.train_idx, b.train_idx)
    assert len(a.train_idx) == 800 and len(a.test_idx) == 200
    assert not set(a.train_idx) & set(a.test_idx)


def test_task_errors():
    with pytest.raises(ValueError):
        make_synthetic_task("parity", 8, 8)
    with pytest.raises(ValueError):
        make_synthetic_task("long_range_pair", 1, 8)
    with pytest.raises(ValueError):
        make_synthetic_task("long_range_pair", 8, 3)
    with pytest.raises(ValueError):
        make_synthetic_task("cluster_label", 8, 1)


def test_mixture_sampler():
    X, comp = sample_mixture(3000, seed=0)
    for k in range(3):
        pts = X[comp == k]
        np.testing.assert_allclose(pts.mean(0), MIXTURE_MODES[k], atol=0.05)
        np.testing.assert_allclose(pts.std(0), 0.5, atol=0.03)

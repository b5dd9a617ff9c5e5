import numpy as np
import pytest

from dqa.dataset import Dataset


def build_dataset(features, heu=None, real=None, names=None, dataset_id="t", active="realistic"):
    """Small helper: build a Dataset from a plain nested list."""
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    heu = np.zeros(n, dtype=np.int8) if heu is None else np.asarray(heu, dtype=np.int8)
    real = heu.copy() if real is None else np.asarray(real, dtype=np.int8)
    if names is None:
        names = tuple(f"c{j}" for j in range(features.shape[1]))
    return Dataset(
        id=dataset_id,
        feature_names=tuple(names),
        features=features,
        label_heuristic=heu,
        label_realistic=real,
        active_label=active,
    )


def blob_dataset(seed, rows=80, features=4, gap=6.0):
    """Two separable labeled blobs; no cleanliness guarantees."""
    rng = np.random.default_rng(seed)
    y = np.zeros(rows, dtype=np.int8)
    y[rows // 2 :] = 1
    direction = np.where(y == 1, 1.0, -1.0)
    cols = [10.0 + direction * gap / 2.0 + rng.normal(0, 1, rows) for _ in range(features)]
    order = rng.permutation(rows)
    return build_dataset(np.column_stack(cols)[order], heu=y[order])


@pytest.fixture
def tiny_dataset():
    return build_dataset(
        [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]],
        heu=[0, 1, 0, 1],
        real=[0, 1, 1, 1],
    )

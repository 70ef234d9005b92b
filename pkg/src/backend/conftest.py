import sys
from pathlib import Path

import numpy as np
import pytest

backend_dir = Path(__file__).parent
sys.path.insert(0, str(backend_dir))
sys.path.insert(0, str(backend_dir.parent))

from data_processor import Dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blob_dataset():
    """
    240 rows, 4 features. Features 0 and 1 separate three tight blobs and the
    labeled rows all sit in the first blob; features 2 and 3 are uniform noise.
    """
    gen = np.random.default_rng(7)
    centers = np.array([[0.1, 0.1], [0.5, 0.9], [0.9, 0.2]])
    informative = np.vstack([c + gen.normal(0, 0.02, size=(80, 2)) for c in centers])
    noise = gen.uniform(0, 1, size=(240, 2))
    s = np.zeros(240, dtype=np.int8)
    s[:40] = 1
    return Dataset(
        X=np.hstack([informative, noise]),
        s=s,
        feature_names=["a", "b", "noise_0", "noise_1"],
        relevant_truth=np.array([1, 1, 0, 0]),
    )


@pytest.fixture
def pu_csv(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("x1,x2,label\n2,10,1\n4,20,0\n6,30,0\n8,40,1\n", encoding="utf-8")
    return path

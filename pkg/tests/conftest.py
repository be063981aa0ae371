import numpy as np
import pytest

from dicnn.synthetic import separable_blobs, write_kronodroid_csv


@pytest.fixture(scope="session")
def blobs():
    return separable_blobs(n_samples=40, n_features=16, seed=3)


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory):
    """Small synthetic malware table shared across CLI tests."""
    path = tmp_path_factory.mktemp("data") / "kronodroid_small.csv"
    write_kronodroid_csv(
        path, n_benign=400, families={"SMS": 300, "BankBot": 250},
        n_features=60, seed=11,
    )
    return path


def small_config_values(csv_path, out_dir, **extra):
    values = {
        "data.csv": str(csv_path),
        "data.drop_columns": "package_name,sha256",
        "data.family": "SMS",
        "rfe.target_features": "20",
        "model.channels": "8",
        "train.max_epochs": "10",
        "train.batch_size": "64",
        "train.patience": "10",
        "out.dir": str(out_dir),
    }
    values.update(extra)
    return values


@pytest.fixture
def rng_np():
    return np.random.Generator(np.random.PCG64(1234))

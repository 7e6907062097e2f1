import numpy as np
import pytest

from switchcost.dataset import COLUMNS, DataError, Dataset
from switchcost.gmm import StructuralParams
from switchcost.synth import NoiseSpec, synthesize_dataset


@pytest.fixture(scope="module")
def data():
    return synthesize_dataset(StructuralParams(), n=187, seed=7)


def test_size_and_columns(data):
    assert len(data) == 187
    assert list(data.columns) == COLUMNS


def test_deterministic(data):
    again = synthesize_dataset(StructuralParams(), n=187, seed=7)
    assert again.to_csv_text() == data.to_csv_text()
    other = synthesize_dataset(StructuralParams(), n=187, seed=8)
    assert other.to_csv_text() != data.to_csv_text()


def test_records_do_not_depend_on_n(data):
    short = synthesize_dataset(StructuralParams(), n=20, seed=7)
    assert short.to_csv_text().splitlines() == data.to_csv_text().splitlines()[:21]


def test_covariate_moments():
    big = synthesize_dataset(StructuralParams(), n=4000, seed=0)
    assert big["tfrac"].mean() == pytest.approx(0.404, abs=0.01)
    assert big["h"].mean() == pytest.approx(3.63, abs=0.05)
    assert np.all(big["tport"] * big["dport"] == 0)


def test_noise_changes_only_noisy_columns(data):
    noisy = synthesize_dataset(StructuralParams(), n=187, seed=7, noise=NoiseSpec.modest())
    assert not np.allclose(noisy["price"], data["price"])
    assert np.array_equal(noisy["y"], data["y"])


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        synthesize_dataset(StructuralParams(), n=0)
    with pytest.raises(ValueError):
        synthesize_dataset(StructuralParams(alpha1=-5.0), n=10)


def test_dataset_round_trip(tmp_path, data):
    path = tmp_path / "d.csv"
    data.save(path)
    back = Dataset.load(path)
    assert back.to_csv_text() == data.to_csv_text()
    assert np.array_equal(back.has_forward, data.has_forward)


def test_dataset_validation(tmp_path, data):
    cols = dict(data.columns)
    cols["y"] = cols["y"] + 2.0
    with pytest.raises(DataError):
        Dataset(cols)
    cols = dict(data.columns)
    del cols["price"]
    with pytest.raises(DataError):
        Dataset(cols)
    path = tmp_path / "bad.csv"
    lines = data.to_csv_text().splitlines()
    lines[3] = lines[3] + ",1"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=":4:"):
        Dataset.load(path)


def test_subset_and_canonical(data):
    both = len(data.subset(0)) + len(data.subset(1))
    assert both == len(data)
    rev = data.take(np.arange(len(data))[::-1])
    assert rev.canonical().to_csv_text() == data.canonical().to_csv_text()

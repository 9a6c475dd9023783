import numpy as np
import pytest

from blockedlmm import crossed_design, insteval_path, load_csv
from blockedlmm.datasets import write_csv


def test_insteval_bundled():
    assert insteval_path().is_file()


def test_crossed_design_levels():
    t = crossed_design(100, 30, 7, seed=1)
    assert t.nrows == 100
    assert len(np.unique(t["a"])) == 30 and len(np.unique(t["b"])) == 7
    with pytest.raises(ValueError):
        crossed_design(5, 30, 7)


def test_csv_roundtrip(tmp_path):
    t = crossed_design(50, 5, 4, seed=0)
    back = load_csv(write_csv(t, tmp_path / "t.csv"))
    for c in t.columns:
        assert np.array_equal(back[c], t[c])

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarsort.domain import (
    CLASS_ORDER,
    ClassificationWindow,
    Dataset,
    FeatureVector,
    Frame,
    MaterialClass,
    RangeAxis,
    bin_for_distance,
    class_code,
    code_class,
)
from radarsort.errors import DataError, InvalidCodeError, RangeAxisError


@pytest.mark.parametrize("d, expected", [(100.0, 0), (250.0, 60), (101.25, 0), (101.26, 1), (397.5, 119)])
def test_bin_for_distance(d, expected):
    assert bin_for_distance(RangeAxis(100, 2.5, 120), d) == expected


@pytest.mark.parametrize("d", [99.99, 397.51, math.nan])
def test_bin_for_distance_out_of_range(d):
    with pytest.raises(RangeAxisError, match=r"\[100.0, 397.5\]"):
        bin_for_distance(RangeAxis(100, 2.5, 120), d)


@given(
    start=st.floats(-500, 500),
    step=st.floats(0.01, 20),
    n=st.integers(2, 400),
    data=st.data(),
)
def test_bin_center_round_trip(start, step, n, data):
    axis = RangeAxis(start, step, n)
    i = data.draw(st.integers(0, n - 1))
    assert bin_for_distance(axis, axis.bin_center(i)) == i


@pytest.mark.parametrize("kwargs", [dict(step_mm=0), dict(step_mm=-1), dict(num_bins=1)])
def test_axis_rejects_bad_geometry(kwargs):
    with pytest.raises(DataError):
        RangeAxis(**kwargs)


def test_default_axis_brackets_standoff(axis):
    assert (axis.start_mm, axis.step_mm, axis.num_bins) == (100.0, 2.5, 120)
    assert axis.stop_mm == 397.5
    assert axis.bin_center(60) == 250.0


def test_class_codes():
    assert class_code(MaterialClass.METAL) == 0
    assert class_code(MaterialClass.EMPTY) == 4
    assert code_class(class_code(MaterialClass.GLASS)) is MaterialClass.GLASS
    assert [c.label for c in CLASS_ORDER] == ["metal", "plastic", "glass", "paper", "empty"]


def test_class_code_round_trip_is_bijection():
    assert sorted(class_code(c) for c in MaterialClass) == list(range(5))
    for i in range(5):
        assert class_code(code_class(i)) == i
    for c in MaterialClass:
        assert code_class(class_code(c)) is c


@pytest.mark.parametrize("bad", [-1, 5, 100, 1.0, True, "0"])
def test_code_class_rejects_invalid(bad):
    with pytest.raises(InvalidCodeError):
        code_class(bad)


@pytest.mark.parametrize("bad", [[0.1, -0.01], [0.1, math.inf], [math.nan, 0.0]])
def test_frame_rejects_negative_or_nonfinite(bad):
    with pytest.raises(DataError):
        Frame(bad)


def test_frame_is_read_only():
    f = Frame([0.1, 0.2])
    with pytest.raises(ValueError):
        f.amplitudes[0] = 1.0


def test_window_checks_shape(axis):
    with pytest.raises(DataError, match="frames"):
        ClassificationWindow(np.zeros((29, 120)), axis, 30)
    with pytest.raises(DataError, match="bins"):
        ClassificationWindow(np.zeros((30, 119)), axis, 30)


def test_window_from_frames_requires_shared_axis(axis):
    frames = [Frame(np.zeros(120))] * 29 + [Frame(np.zeros(100))]
    with pytest.raises(DataError):
        ClassificationWindow.from_frames(frames, axis)
    w = ClassificationWindow.from_frames([Frame(np.full(120, 0.5))] * 30, axis)
    assert w.frames_per_window == 30
    assert len(w.frames) == 30


def test_feature_vector_validation():
    fv = FeatureVector(0.6, 0.3, 2.0, 0.0, 0.0, 0.0)
    assert FeatureVector.from_array(fv.as_array()) == fv
    with pytest.raises(DataError):
        FeatureVector(0.6, -0.3, 2.0, 0.0, 0.0, 0.0)
    with pytest.raises(DataError):
        FeatureVector(0.6, 0.3, math.inf, 0.0, 0.0, 0.0)


def test_dataset_records_round_trip():
    recs = [
        (FeatureVector(0.8, 0.01, 80.0, 1e-4, 1e-5, 10.0), MaterialClass.METAL),
        (FeatureVector(0.5, 0.4, 1.25, 1e-3, 1e-3, 1.0), MaterialClass.PLASTIC),
    ]
    ds = Dataset.from_records(recs, {"seed": 1})
    assert ds.records == recs
    assert list(ds.class_counts()) == [1, 1, 0, 0, 0]
    with pytest.raises(InvalidCodeError):
        Dataset(np.zeros((1, 6)), [7])

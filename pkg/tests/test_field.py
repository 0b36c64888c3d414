import json

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import SQRT3, fields
from lipext.field import (
    FieldError,
    JetSample,
    OneField,
    detect_affine,
    dump_field,
    eval_jet,
    load_field,
    save_field,
)

E1_TEXT = json.dumps({
    "dim": 2,
    "samples": [
        {"x": [-1, 0], "f": 0.57735026919, "df": [0, 1]},
        {"x": [1, 0], "f": -0.57735026919, "df": [0, -1]},
    ],
})


def test_load_two_point_text():
    f = load_field(E1_TEXT)
    assert f.dim == 2 and len(f) == 2


def test_load_single_sample():
    f = load_field({"dim": 1, "samples": [{"x": [0], "f": 0, "df": [0]}]})
    assert f.dim == 1 and len(f) == 1


def test_load_from_path(tmp_path, e1):
    p = tmp_path / "e1.json"
    save_field(e1, p)
    g = load_field(p)
    np.testing.assert_array_equal(g.points, e1.points)
    np.testing.assert_array_equal(g.values, e1.values)
    np.testing.assert_array_equal(g.grads, e1.grads)


@pytest.mark.parametrize(
    "payload, match",
    [
        ({"dim": 2, "samples": [{"x": [0, 0], "f": 0, "df": [0, 0]}, {"x": [0, 0], "f": 1, "df": [0, 0]}]}, "duplicate"),
        ({"dim": 2, "samples": [{"x": [0, 0], "f": 0, "df": [0]}]}, "dimension mismatch"),
        ({"dim": 1, "samples": [{"x": [0], "f": float("nan"), "df": [0]}]}, "non-finite"),
        ({"dim": 1, "samples": [{"x": [0], "f": 0, "df": [0], "extra": 1}]}, "unknown"),
        ({"dim": 1, "samples": []}, "non-empty"),
        ({"dim": 1, "samples": [{"x": [0], "f": 0}]}, "missing"),
    ],
)
def test_load_rejects(payload, match):
    with pytest.raises(FieldError, match=match):
        load_field(payload)


def test_parse_error():
    with pytest.raises(FieldError, match="parse"):
        load_field("{not json")


def test_near_duplicate_rejected():
    with pytest.raises(FieldError):
        OneField([[0.0], [1e-13]], [0, 0], [[0], [0]])


def test_immutable(e1):
    with pytest.raises(AttributeError):
        e1.points = None
    with pytest.raises(ValueError):
        e1.values[0] = 3.0


def test_eval_jet_two_point(e1):
    assert eval_jet(e1, 0, [0.0, 1 / SQRT3]) == pytest.approx(2 / SQRT3, abs=1e-15)


def test_eval_jet_errors(e1):
    with pytest.raises(IndexError):
        eval_jet(e1, 5, [0, 0])
    with pytest.raises(FieldError):
        eval_jet(e1, 0, [0, 0, 0])


@given(fields())
@settings(max_examples=50, deadline=None)
def test_eval_jet_at_base_point(f):
    for i in range(len(f)):
        assert eval_jet(f, i, f.points[i]) == pytest.approx(f.values[i], abs=1e-14)


def test_eval_jet_constant():
    f = OneField([[1.0, 2.0]], [3.5], [[0.0, 0.0]])
    assert eval_jet(f, 0, [10.0, -4.0]) == 3.5


def test_detect_affine():
    v = np.array([1.0, -2.0])
    x = np.random.default_rng(0).normal(size=(6, 2))
    f = OneField(x, 0.5 + x @ v, np.tile(v, (6, 1)))
    poly = detect_affine(f)
    assert poly is not None and poly.p == pytest.approx(0.5) and np.allclose(poly.v, v)
    assert poly(np.array([1.0, 1.0])) == pytest.approx(-0.5)


def test_detect_affine_none(e1):
    assert detect_affine(e1) is None
    with pytest.raises(ValueError):
        detect_affine(e1, tol=-1)


@given(fields())
@settings(max_examples=30, deadline=None)
def test_round_trip_exact(f):
    g = load_field(dump_field(f))
    np.testing.assert_array_equal(g.points, f.points)
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_array_equal(g.grads, f.grads)


def test_samples_and_negation(e1):
    g = OneField.from_samples(e1.samples)
    assert isinstance(e1.samples[0], JetSample)
    np.testing.assert_array_equal(g.values, e1.values)
    np.testing.assert_array_equal(e1.negated().grads, -e1.grads)
    assert len(e1.union(OneField([[0.0, 5.0]], [0], [[0, 0]]))) == 3

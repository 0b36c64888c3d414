"""
1-fields: first-order jets (value and gradient) attached to scattered points.

A 1-field assigns to every sample point ``x`` the first degree polynomial
``a -> f_x + <D_x f, a - x>``.  Everything else in the package consumes the
immutable :class:`OneField` defined here.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "FieldError",
    "JetSample",
    "AffinePolynomial",
    "OneField",
    "load_field",
    "dump_field",
    "save_field",
    "eval_jet",
    "detect_affine",
    "DUPLICATE_TOL",
]

#: Points closer than this are treated as the same point.
DUPLICATE_TOL = 1e-12


class FieldError(ValueError):
    """Invalid 1-field data."""


@dataclass(frozen=True)
class JetSample:
    x: np.ndarray
    f: float
    df: np.ndarray


@dataclass(frozen=True)
class AffinePolynomial:
    """The polynomial ``a -> p + <v, a>``."""

    p: float
    v: np.ndarray

    def __call__(self, a):
        return self.p + float(np.dot(self.v, a))


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class OneField:
    """
    Immutable 1-field on a finite set of points.

    Parameters
    ----------
    points : array_like, shape (m, n)
        Sample locations.
    values : array_like, shape (m,)
        Function values ``f_x``.
    grads : array_like, shape (m, n)
        Gradients ``D_x f``.
    check_duplicates : bool, optional
        Reject point pairs closer than :data:`DUPLICATE_TOL`.
    """

    __slots__ = ("points", "values", "grads")

    def __init__(self, points, values, grads, check_duplicates=True):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        grads = np.atleast_2d(np.asarray(grads, dtype=float))
        if points.ndim != 2 or points.shape[0] == 0:
            raise FieldError("a 1-field needs at least one sample")
        m, n = points.shape
        if n == 0:
            raise FieldError("dimension must be positive")
        if values.shape != (m,):
            raise FieldError(f"expected {m} values, got shape {values.shape}")
        if grads.shape != (m, n):
            raise FieldError(
                f"gradient shape {grads.shape} does not match points {points.shape}"
            )
        for name, arr in (("x", points), ("f", values), ("df", grads)):
            if not np.all(np.isfinite(arr)):
                raise FieldError(f"non-finite entry in {name}")
        if check_duplicates and m > 1:
            pairs = cKDTree(points).query_pairs(DUPLICATE_TOL, output_type="ndarray")
            if len(pairs):
                i, j = sorted(pairs[0])
                raise FieldError(f"duplicate points: samples {i} and {j}")
        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "grads", _frozen(grads))

    def __setattr__(self, name, value):
        raise AttributeError("OneField is immutable")

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def samples(self):
        return [
            JetSample(self.points[i], float(self.values[i]), self.grads[i])
            for i in range(len(self))
        ]

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            raise FieldError("a 1-field needs at least one sample")
        return cls(
            [s.x for s in samples], [s.f for s in samples], [s.df for s in samples]
        )

    def negated(self):
        """The field ``-F`` (values and gradients negated)."""
        return OneField(self.points, -self.values, -self.grads, check_duplicates=False)

    def scaled(self, s):
        return OneField(self.points, s * self.values, s * self.grads, check_duplicates=False)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return OneField(
            self.points[idx], self.values[idx], self.grads[idx], check_duplicates=False
        )

    def union(self, other):
        if other.dim != self.dim:
            raise FieldError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return OneField(
            np.vstack([self.points, other.points]),
            np.concatenate([self.values, other.values]),
            np.vstack([self.grads, other.grads]),
        )

    def __repr__(self):
        return f"OneField(dim={self.dim}, samples={len(self)})"


def eval_jet(field, i, a):
    """
    Evaluate the polynomial attached to sample ``i`` at ``a``.

    Returns ``f_i + <D_i f, a - x_i>``.
    """
    m = len(field)
    if not -m <= i < m:
        raise IndexError(f"sample index {i} out of range for {m} samples")
    a = np.asarray(a, dtype=float)
    if a.shape != (field.dim,):
        raise FieldError(f"query has shape {a.shape}, field dimension is {field.dim}")
    return float(field.values[i] + field.grads[i] @ (a - field.points[i]))


def detect_affine(field, tol=1e-12):
    """
    Return the polynomial shared by every jet, or None.

    The candidate is read off sample 0 and then checked against all other
    samples (values and gradients) with absolute tolerance `tol`.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    v = field.grads[0]
    p = float(field.values[0] - v @ field.points[0])
    pred = p + field.points @ v
    if np.max(np.abs(pred - field.values)) > tol:
        return None
    if np.max(np.linalg.norm(field.grads - v, axis=1)) > tol:
        return None
    return AffinePolynomial(p, np.array(v))


# -- serialization ---------------------------------------------------------

_TOP_KEYS = {"dim", "samples"}
_SAMPLE_KEYS = {"x", "f", "df"}


def _num(x):
    return format(float(x), ".17g")


def _vec(v):
    return "[" + ", ".join(_num(c) for c in v) + "]"


def _parse_json(path_or_text):
    if isinstance(path_or_text, dict):
        return path_or_text
    if isinstance(path_or_text, (str, os.PathLike)):
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
    else:
        text = path_or_text.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FieldError(f"parse error: {exc}") from exc


def load_field(path_or_text):
    """
    Load a 1-field from a JSON file, JSON text, or an already parsed dict.

    The expected layout is
    ``{"dim": n, "samples": [{"x": [...], "f": <real>, "df": [...]}, ...]}``.
    Unknown keys are rejected.
    """
    data = _parse_json(path_or_text)
    if not isinstance(data, dict):
        raise FieldError("top level must be a JSON object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise FieldError(f"unknown keys: {sorted(extra)}")
    samples = data.get("samples")
    if not isinstance(samples, list) or not samples:
        raise FieldError("'samples' must be a non-empty list")
    pts, vals, grads = [], [], []
    for k, s in enumerate(samples):
        if not isinstance(s, dict):
            raise FieldError(f"sample {k} is not an object")
        extra = set(s) - _SAMPLE_KEYS
        missing = _SAMPLE_KEYS - set(s)
        if extra:
            raise FieldError(f"sample {k}: unknown keys {sorted(extra)}")
        if missing:
            raise FieldError(f"sample {k}: missing keys {sorted(missing)}")
        try:
            x = np.asarray(s["x"], dtype=float).reshape(-1)
            df = np.asarray(s["df"], dtype=float).reshape(-1)
            f = float(s["f"])
        except (TypeError, ValueError) as exc:
            raise FieldError(f"sample {k}: {exc}") from exc
        pts.append(x)
        vals.append(f)
        grads.append(df)
    dim = data.get("dim", len(pts[0]))
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise FieldError(f"invalid dim {dim!r}")
    for k, (x, df) in enumerate(zip(pts, grads)):
        if len(x) != dim or len(df) != dim:
            raise FieldError(
                f"dimension mismatch in sample {k}: expected {dim}, "
                f"got x of length {len(x)} and df of length {len(df)}"
            )
    return OneField(np.array(pts), np.array(vals), np.array(grads))


def dump_field(field):
    """Serialize to JSON text with 17 significant digits per number."""
    rows = [
        f'    {{"x": {_vec(s.x)}, "f": {_num(s.f)}, "df": {_vec(s.df)}}}'
        for s in field.samples
    ]
    return '{\n  "dim": %d,\n  "samples": [\n%s\n  ]\n}\n' % (field.dim, ",\n".join(rows))


def save_field(field, path):
    Path(path).write_text(dump_field(field))

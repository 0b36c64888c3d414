"""
Lipschitz maps R^m -> R^n extended through a 1-field on R^(m+n).

A map sample ``u(x)`` becomes the jet at ``(x, 0)`` with value 0 and gradient
``(0, u(x))``.  The field constant of this lift equals the Lipschitz constant
of ``u``, and the last ``n`` gradient components of an extremal extension
evaluated on the zero section give a Lipschitz extension of ``u`` with the
same constant.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .field import FieldError, OneField
from .supinf import ExtremalSolver

__all__ = [
    "LipschitzMapData",
    "load_map",
    "dump_map",
    "save_map",
    "lipschitz_constant",
    "lift_map",
    "MapExtender",
    "extend_map",
    "one_point_oracle",
]


@dataclass(frozen=True)
class LipschitzMapData:
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if x.shape[0] == 0 or x.shape[0] != u.shape[0]:
            raise FieldError(f"{x.shape[0]} inputs but {u.shape[0]} outputs")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise FieldError("non-finite entry in map data")
        # distinctness is enforced by the lifted field
        OneField(x, np.zeros(len(x)), np.zeros_like(x))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def dim_in(self):
        return self.x.shape[1]

    @property
    def dim_out(self):
        return self.u.shape[1]

    def __len__(self):
        return self.x.shape[0]


def load_map(path_or_text):
    if isinstance(path_or_text, dict):
        data = path_or_text
    else:
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FieldError(f"parse error: {exc}") from exc
    extra = set(data) - {"dim_in", "dim_out", "samples"}
    if extra:
        raise FieldError(f"unknown keys: {sorted(extra)}")
    samples = data.get("samples")
    if not isinstance(samples, list) or not samples:
        raise FieldError("'samples' must be a non-empty list")
    try:
        x = [np.asarray(s["x"], dtype=float).reshape(-1) for s in samples]
        u = [np.asarray(s["u"], dtype=float).reshape(-1) for s in samples]
    except (KeyError, TypeError, ValueError) as exc:
        raise FieldError(f"bad sample: {exc}") from exc
    m = data.get("dim_in", len(x[0]))
    n = data.get("dim_out", len(u[0]))
    if any(len(a) != m for a in x) or any(len(b) != n for b in u):
        raise FieldError("dimension mismatch in map samples")
    return LipschitzMapData(np.array(x), np.array(u))


def dump_map(data):
    return json.dumps(
        {
            "dim_in": data.dim_in,
            "dim_out": data.dim_out,
            "samples": [{"x": a.tolist(), "u": b.tolist()} for a, b in zip(data.x, data.u)],
        },
        indent=2,
    )


def save_map(data, path):
    Path(path).write_text(dump_map(data))


def lipschitz_constant(data):
    """Largest ratio ``|u(a) - u(b)| / |a - b|`` over pairs (0 for one sample)."""
    if len(data) < 2:
        return 0.0
    dx = data.x[:, None, :] - data.x[None, :, :]
    du = data.u[:, None, :] - data.u[None, :, :]
    num = np.linalg.norm(du, axis=2)
    den = np.linalg.norm(dx, axis=2)
    np.fill_diagonal(den, np.inf)
    return float(np.max(num / den))


def lift_map(data):
    m, n = data.dim_in, data.dim_out
    pts = np.hstack([data.x, np.zeros((len(data), n))])
    grads = np.hstack([np.zeros((len(data), m)), data.u])
    return OneField(pts, np.zeros(len(data)), grads, check_duplicates=False)


class MapExtender:
    """Evaluate the extended map at many points, reusing the lifted field."""

    def __init__(self, data, tol=1e-8):
        self.data = data
        self.field = lift_map(data)
        self.l = lipschitz_constant(data)
        self.tol = tol
        self._solvers = {
            "plus": ExtremalSolver(self.field, self.l, tol=tol),
            "minus": ExtremalSolver(self.field.negated(), self.l, tol=tol),
        }

    def __call__(self, x, sign="plus"):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.data.dim_in,):
            raise FieldError(f"query has {x.size} coordinates, expected {self.data.dim_in}")
        if sign not in self._solvers:
            raise ValueError(f"bad sign {sign!r}")
        r = self._solvers[sign].solve(np.concatenate([x, np.zeros(self.data.dim_out)]))
        g = r.gradient if sign == "plus" else -r.gradient
        return g[self.data.dim_in:].copy()


def extend_map(data, x, sign="plus", tol=1e-8):
    """Value at `x` of the extended map (``k_plus`` or ``k_minus``)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return MapExtender(data, tol)(x, sign)


def one_point_oracle(data, x):
    """
    Best value at a new point `x` for the map's Lipschitz ratio.

    Minimizes ``max_i |y - u_i| / |x - a_i|`` over ``y`` (a weighted
    smallest enclosing ball) in epigraph form with SLSQP.  Returns
    ``{"value": y, "ratio": r}``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = np.linalg.norm(data.x - x, axis=1)
    if np.any(d <= 1e-12 * (1.0 + np.abs(data.x).max())):
        raise FieldError("query coincides with a data point")
    w2 = 1.0 / d**2
    if len(data) == 1:
        return {"value": data.u[0].copy(), "ratio": 0.0}
    n = data.dim_out

    def ratio(y):
        return float(np.sqrt(np.max(w2 * np.sum((data.u - y) ** 2, axis=1))))

    y0 = (w2 @ data.u) / w2.sum()
    z0 = np.concatenate([y0, [ratio(y0) ** 2]])
    cons = {
        "type": "ineq",
        "fun": lambda z: z[n] - w2 * np.sum((data.u - z[:n]) ** 2, axis=1),
        "jac": lambda z: np.hstack([(2.0 * w2[:, None]) * (data.u - z[:n]), np.ones((len(data), 1))]),
    }
    res = minimize(
        lambda z: z[n], z0, jac=lambda z: np.r_[np.zeros(n), 1.0],
        constraints=[cons], method="SLSQP", options={"ftol": 1e-15, "maxiter": 500},
    )
    y = res.x[:n] if ratio(res.x[:n]) <= ratio(y0) else y0
    return {"value": y, "ratio": ratio(y)}

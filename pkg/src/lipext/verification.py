"""
Fixtures and independent checks.

* ``e1_fixture``: the two-point field in the plane with a = (-1, 0),
  b = (1, 0), gradients (0, 1) and (0, -1), values +-1/sqrt(3).
* ``BiponctualModel``: the explicit piecewise-quadratic extension of any
  two-point field, pinched at ``c``.
* ``two_circles_fixture``: radially aligned samples on the circles of radius
  1 (value 0) and 2 (value 1) with zero gradients.
* quasi-uniform samplers and the sampled AMLE check.
"""

from dataclasses import dataclass

import numpy as np

from .field import FieldError, OneField
from .gamma import gamma1
from .supinf import ExtremalSolver

__all__ = [
    "e1_fixture",
    "BiponctualModel",
    "biponctual_mle",
    "two_circles_fixture",
    "two_circles_closed_form",
    "fibonacci_ball",
    "fibonacci_sphere",
    "sampled_gamma_region",
    "extension_jets",
    "amle_check",
]

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def e1_fixture():
    s = 1.0 / np.sqrt(3.0)
    return OneField([[-1.0, 0.0], [1.0, 0.0]], [s, -s], [[0.0, 1.0], [0.0, -1.0]])


@dataclass(frozen=True)
class BiponctualModel:
    a: np.ndarray
    b: np.ndarray
    kappa: float
    c: np.ndarray
    u_c: float
    d_c: np.ndarray
    p_coef: np.ndarray
    q_coef: np.ndarray

    @classmethod
    def from_field(cls, field):
        if len(field) != 2:
            raise FieldError("the two-point model needs exactly two samples")
        kappa = gamma1(field)
        if kappa <= 0:
            raise FieldError("the two-point model needs a positive field constant")
        a, b = field.points
        Da, Db = field.grads
        c = 0.5 * (a + b) + (Da - Db) / (2.0 * kappa)
        scale = 1.0 + np.abs(field.points).max()
        if min(np.linalg.norm(a - c), np.linalg.norm(b - c)) <= 1e-10 * scale:
            raise FieldError("unsupported configuration: pinch point coincides with a sample")
        u_c = field.values[0] + Da @ (c - a) - 0.5 * kappa * (a - c) @ (a - c)
        d_c = Da + kappa * (a - c)
        return cls(a.copy(), b.copy(), float(kappa), c, float(u_c), d_c, a - c, b - c)

    def __call__(self, z):
        """``(value, gradient)`` at `z`."""
        z = np.asarray(z, dtype=float)
        d = z - self.c
        p = float(self.p_coef @ d)
        q = float(self.q_coef @ d)
        value = self.u_c + float(self.d_c @ d)
        grad = self.d_c.copy()
        k = self.kappa
        if p > 0:
            na = self.p_coef @ self.p_coef
            value -= 0.5 * k * p * p / na
            grad = grad - k * p / na * self.p_coef
        if q > 0:
            nb = self.q_coef @ self.q_coef
            value += 0.5 * k * q * q / nb
            grad = grad + k * q / nb * self.q_coef
        return value, grad


def biponctual_mle(field, z):
    value, grad = BiponctualModel.from_field(field)(z)
    return {"value": value, "gradient": grad}


def two_circles_fixture(n_per_circle):
    """Samples at angles ``2 pi k / N`` on radii 1 and 2 (inner first)."""
    if n_per_circle < 8:
        raise ValueError("n_per_circle must be at least 8")
    th = 2.0 * np.pi * np.arange(n_per_circle) / n_per_circle
    u = np.column_stack([np.cos(th), np.sin(th)])
    pts = np.vstack([u, 2.0 * u])
    vals = np.r_[np.zeros(n_per_circle), np.ones(n_per_circle)]
    return OneField(pts, vals, np.zeros_like(pts))


def two_circles_closed_form(x, sign="plus"):
    """
    Extremal extensions of the continuous two-circle data (kappa = 4).

    Radial profiles, with ``r = |x|``::

        r <= 1/2          w+ = 1 - 2 r^2          w- = -w+
        1/2 <= r <= 1     w+ = 2 (r - 1)^2        w- = -w+
        1 <= r <= 3/2     w+ = w- = 2 (r - 1)^2
        3/2 <= r <= 2     w+ = w- = 1 - 2 (r - 2)^2
        r >= 2            w+ = 1 + 2 (r - 2)^2    w- = 1 - 2 (r - 2)^2

    Returns ``(value, gradient)``.
    """
    if sign not in ("plus", "minus"):
        raise ValueError(f"bad sign {sign!r}")
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r <= 0.5:
        val, der = 1.0 - 2.0 * r * r, -4.0 * r
    elif r <= 1.5:
        val, der = 2.0 * (r - 1.0) ** 2, 4.0 * (r - 1.0)
    elif r <= 2.0:
        val, der = 1.0 - 2.0 * (r - 2.0) ** 2, -4.0 * (r - 2.0)
    elif sign == "plus":
        val, der = 1.0 + 2.0 * (r - 2.0) ** 2, 4.0 * (r - 2.0)
    else:
        val, der = 1.0 - 2.0 * (r - 2.0) ** 2, -4.0 * (r - 2.0)
    if sign == "minus" and r < 1.0:
        val, der = -val, -der
    grad = der * x / r if r > 0 else np.zeros_like(x)
    return val, grad


def fibonacci_sphere(n_points, center, radius):
    """Quasi-uniform points on a circle (2D) or sphere (3D)."""
    center = np.asarray(center, dtype=float)
    k = np.arange(n_points)
    if center.size == 1:
        dirs = np.where(k % 2 == 0, 1.0, -1.0)[:, None]
    elif center.size == 2:
        th = 2.0 * np.pi * k / n_points
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    elif center.size == 3:
        zc = 1.0 - 2.0 * (k + 0.5) / n_points
        rr = np.sqrt(1.0 - zc**2)
        th = k * _GOLDEN_ANGLE
        dirs = np.column_stack([rr * np.cos(th), rr * np.sin(th), zc])
    else:
        raise ValueError("only dimensions 1 to 3 are supported")
    return center + radius * dirs


def fibonacci_ball(n_points, center, radius):
    """Quasi-uniform points in an open disk (2D) or ball (3D)."""
    center = np.asarray(center, dtype=float)
    k = np.arange(n_points)
    frac = (k + 0.5) / n_points
    if center.size == 1:
        return center + radius * (2.0 * frac - 1.0)[:, None]
    if center.size == 2:
        r = np.sqrt(frac)
        th = k * _GOLDEN_ANGLE
        return center + radius * np.column_stack([r * np.cos(th), r * np.sin(th)])
    if center.size == 3:
        return center + radius * np.cbrt(frac)[:, None] * fibonacci_sphere(n_points, np.zeros(3), 1.0)
    raise ValueError("only dimensions 1 to 3 are supported")


def sampled_gamma_region(jets):
    if len(jets) < 2:
        raise FieldError("at least two jets are needed")
    return gamma1(jets)


def extension_jets(field, kappa, points, sign="plus", tol=1e-8, threads=1):
    """
    Jets of the extension at `points` as a new field (data jets not included).

    ``sign`` is ``"plus"``, ``"minus"`` or ``"avg"`` (half-sum of both).
    """
    signs = ("plus", "minus") if sign == "avg" else (sign,)
    if any(s not in ("plus", "minus") for s in signs):
        raise ValueError(f"bad sign {sign!r}")
    solvers = [
        (1.0 if s == "plus" else -1.0, ExtremalSolver(field if s == "plus" else field.negated(), kappa, tol=tol))
        for s in signs
    ]
    points = np.asarray(points, dtype=float)

    def one(x):
        vals, grads = [], []
        for sg, solver in solvers:
            r = solver.solve(x)
            vals.append(sg * r.value)
            grads.append(sg * r.gradient)
        return float(np.mean(vals)), np.mean(grads, axis=0)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, points))
    else:
        out = [one(x) for x in points]
    return OneField(points, [o[0] for o in out], [o[1] for o in out])


def amle_check(field, kappa, region, n_interior=500, n_boundary=360, sign="plus",
               tol_rel=0.05, tol_abs=0.0, tol=1e-8, threads=1):
    """
    Compare the sampled field constant of an extension on a closed ball and
    on its boundary sphere.

    `region` is ``(center, radius)``.  Passes iff
    ``gamma_V <= gamma_dV * (1 + tol_rel) + tol_abs``.

    Boundary samples of a circle sit at angles ``2 pi k / n_boundary``.  For
    data sampled at angular resolution ``N``, sampling the boundary more
    finely than the data resolves the piecewise-quadratic ripples of the
    finite-data extension rather than the continuum profile; the default of
    360 matches the 360-per-circle fixture.
    """
    center, radius = region
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size != field.dim:
        raise FieldError(f"region center has dimension {center.size}, field has {field.dim}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if min(n_interior, n_boundary) < 16:
        raise ValueError("at least 16 interior and 16 boundary samples are required")
    dist = np.linalg.norm(field.points - center, axis=1)
    if np.any(dist <= radius * (1.0 + 1e-12)):
        raise FieldError("the closed region must not contain data points")
    if kappa is None:
        kappa = gamma1(field)
    inner = fibonacci_ball(n_interior, center, radius)
    bnd = fibonacci_sphere(n_boundary, center, radius)
    jets = extension_jets(field, kappa, np.vstack([inner, bnd]), sign, tol, threads)
    boundary_jets = jets.subset(np.arange(n_interior, n_interior + n_boundary))
    gamma_V = sampled_gamma_region(jets)
    gamma_dV = sampled_gamma_region(boundary_jets)
    return {
        "gamma_V": gamma_V,
        "gamma_dV": gamma_dV,
        "ratio": gamma_V / gamma_dV if gamma_dV > 0 else float("inf"),
        "pass": bool(gamma_V <= gamma_dV * (1.0 + tol_rel) + tol_abs),
    }

"""
Wells's explicit piecewise-quadratic extension for finite data.

For the upper construction every data point ``p`` gives a shifted point
``p~ = p - D_p f / k`` and a paraboloid

    d_p(x) = f_p - |D_p f|^2 / (2k) + k/4 |x - p~|^2.

Subsets ``S`` of the data on which the lower envelope ``min_p d_p`` is
attained exactly by ``S`` somewhere index the cells.  For such an ``S``:
``S_H`` is the affine hull of the shifted points, ``S_E`` the affine set
where all ``d_p`` (p in S) agree, ``S_C`` their single intersection point and
``S_*`` the part of ``S_E`` where ``S`` is minimal.  The cell
``T_S = (conv(S~) + S_*) / 2`` carries the quadratic

    w_S(x) = d_S(S_C) + k/2 dist(x, S_H)^2 - k/2 dist(x, S_E)^2.

The lower construction is obtained by applying the same code to ``-F``
and negating.  Subsets are enumerated exhaustively, so this module is an
oracle for small data sets rather than a production path.
"""

import json
import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog, nnls

from .field import FieldError
from .gamma import gamma1

__all__ = [
    "WellsError",
    "WellsPointData",
    "WellsCell",
    "wells_prep",
    "enumerate_cells",
    "cell_membership",
    "cell_margin",
    "WellsExtension",
    "wells_value",
    "cells_to_json",
    "MAX_SUBSET_POINTS",
]

log = logging.getLogger(__name__)

MAX_SUBSET_POINTS = 20
_RANK_TOL = 1e-10
_SLACK_TOL = 1e-10


class WellsError(RuntimeError):
    pass


@dataclass(frozen=True)
class WellsPointData:
    p_tilde: np.ndarray
    d_const: float
    sign: str

    def d(self, x, kappa):
        s = 1.0 if self.sign == "plus" else -1.0
        r = np.asarray(x, dtype=float) - self.p_tilde
        return self.d_const + s * 0.25 * kappa * float(r @ r)


@dataclass(frozen=True)
class WellsCell:
    """
    One cell of the upper construction (for ``sign="minus"`` the geometry
    refers to the negated field).

    ``hull_basis`` spans the directions of ``S_H`` and ``eq_basis`` those of
    ``S_E``; both are orthonormal and pass through ``s_c``.  ``S_*`` is
    ``{z in S_E : star_a @ z <= star_b}`` (rows normalized).
    """

    members: tuple
    s_tilde: np.ndarray
    hull_basis: np.ndarray
    eq_basis: np.ndarray
    s_c: np.ndarray
    d_sc: float
    star_a: np.ndarray
    star_b: np.ndarray
    sign: str

    @property
    def star_inequalities(self):
        return list(zip(self.star_a, self.star_b))


def wells_prep(field, kappa, sign="plus"):
    """
    Shifted points and paraboloid constants.

    ``plus``:  p~ = p - D_p/k,  d_const = f_p - |D_p|^2 / (2k)
    ``minus``: p~ = p + D_p/k,  d_const = f_p + |D_p|^2 / (2k)
    """
    if kappa <= 0:
        raise FieldError("kappa must be positive; affine fields are handled upstream")
    s = 1.0 if sign == "plus" else -1.0
    if sign not in ("plus", "minus"):
        raise ValueError(f"bad sign {sign!r}")
    out = []
    for x, f, D in zip(field.points, field.values, field.grads):
        out.append(WellsPointData(x - s * D / kappa, float(f - s * 0.5 * (D @ D) / kappa), sign))
    return out


def _upper_data(field, kappa, sign):
    """Shifted points and constants of the upper construction for +/-F."""
    prep = wells_prep(field if sign == "plus" else field.negated(), kappa, "plus")
    P = np.array([w.p_tilde for w in prep])
    c = np.array([w.d_const for w in prep])
    return P, c


def _affine_parts(P, c, kappa, S):
    """
    Equality system of ``S_E``: ``M x = r``.  Returns ``(M, r)`` with rows
    ``p~ - p0~`` for p in S minus the first member.
    """
    p0 = S[0]
    M = P[list(S[1:])] - P[p0]
    r = (2.0 / kappa) * (c[list(S[1:])] - c[p0]) + 0.5 * (
        np.sum(P[list(S[1:])] ** 2, axis=1) - P[p0] @ P[p0]
    )
    return M, r


def _build_cell(P, c, kappa, S, sign, scale):
    n = P.shape[1]
    M, r = _affine_parts(P, c, kappa, S)
    if len(M):
        _, sv, Vt = np.linalg.svd(M)
        rank = int(np.sum(sv > _RANK_TOL * max(1.0, sv[0] if len(sv) else 1.0)))
    else:
        Vt = np.eye(n)
        rank = 0
    H = Vt[:rank]
    E = Vt[rank:] if rank < n else np.zeros((0, n))
    if len(M) and rank == 0:
        # coincident shifted points: consistent only if the constants agree
        if np.max(np.abs(r)) > _RANK_TOL * scale:
            return None
    p0 = P[S[0]]
    if rank:
        w = np.linalg.lstsq(M @ H.T, r - M @ p0, rcond=None)[0]
        s_c = p0 + H.T @ w
        if np.max(np.abs(M @ s_c - r)) > 1e-8 * scale:
            return None
    else:
        s_c = p0.copy()
    out = np.setdiff1d(np.arange(len(P)), S)
    # d_p0(z) <= d_q(z):  (k/2) <q~ - p0~, z> <= c_q - c_p0 + k/4 (|q~|^2 - |p0~|^2)
    A = 0.5 * kappa * (P[out] - p0)
    b = c[out] - c[S[0]] + 0.25 * kappa * (np.sum(P[out] ** 2, axis=1) - p0 @ p0)
    norms = np.linalg.norm(A, axis=1)
    flat = norms <= _RANK_TOL * (1.0 + kappa * scale)
    if np.any(flat & (b <= _SLACK_TOL * scale)):
        return None
    A, b, norms = A[~flat], b[~flat], norms[~flat]
    A = A / norms[:, None]
    b = b / norms
    if len(A):
        # maximize the smallest slack over z = s_c + E^T y
        k = E.shape[0]
        G = np.hstack([A @ E.T, np.ones((len(A), 1))]) if k else np.ones((len(A), 1))
        h = b - A @ s_c
        res = linprog(
            np.r_[np.zeros(k), -1.0], A_ub=G, b_ub=h,
            bounds=[(None, None)] * k + [(None, 1.0)], method="highs",
        )
        if res.status != 0 or -res.fun <= _SLACK_TOL * scale:
            return None
    d_sc = float(c[S[0]] + 0.25 * kappa * np.sum((s_c - p0) ** 2))
    return WellsCell(tuple(int(i) for i in S), P[list(S)].copy(), H, E, s_c, d_sc, A, b, sign)


def enumerate_cells(field, kappa=None, sign="plus", max_points=MAX_SUBSET_POINTS, max_dim=3):
    """
    All cells of the construction, by exhaustive subset enumeration.

    A subset ``S`` is admitted when its equal-value set is nonempty and the
    largest achievable margin ``min_{q not in S} (d_q - d_S)`` on ``S_E`` is
    positive (computed by a linear program).  ``S = A`` is admitted whenever
    its equal-value set is nonempty.
    """
    if kappa is None:
        kappa = gamma1(field)
    m, n = len(field), field.dim
    if m > max_points:
        raise WellsError(f"{m} points exceed the subset enumeration budget of {max_points}")
    if n > max_dim:
        raise WellsError(f"dimension {n} exceeds max_dim={max_dim}")
    if kappa <= 0:
        raise FieldError("kappa must be positive; affine fields are handled upstream")
    if kappa < gamma1(field) - 1e-12 * max(1.0, kappa):
        raise FieldError("kappa is below the field constant")
    P, c = _upper_data(field, kappa, sign)
    scale = 1.0 + np.abs(P).max() + np.abs(c).max()
    _warn_coincident(P, c, scale)
    cells = []
    # affinely independent shifted points in general position: |S| <= n + 1,
    # larger subsets only appear with degeneracies and are still checked
    for size in range(1, m + 1):
        for S in combinations(range(m), size):
            cell = _build_cell(P, c, kappa, list(S), sign, scale)
            if cell is not None:
                cells.append(cell)
    return cells


def _warn_coincident(P, c, scale):
    for i, j in combinations(range(len(P)), 2):
        if np.linalg.norm(P[i] - P[j]) <= _RANK_TOL * scale and abs(c[i] - c[j]) > _RANK_TOL * scale:
            log.warning("points %d and %d have coincident shifted points with different constants", i, j)


def cell_margin(cell, x):
    """
    How far `x` is from the cell (0 when inside).

    ``x = (y + z)/2`` with ``y`` in the affine hull and ``z`` in the equal-value
    set has a unique solution, ``y = s_c + 2 P_H (x - s_c)`` and
    ``z = s_c + 2 P_E (x - s_c)``.  The margin combines the distance of ``y``
    to ``conv(S~)`` and the worst violated inequality of ``S_*`` at ``z``,
    each halved to express it in ``x`` units.
    """
    x = np.asarray(x, dtype=float)
    d = x - cell.s_c
    H, E = cell.hull_basis, cell.eq_basis
    y = cell.s_c + 2.0 * H.T @ (H @ d)
    z = cell.s_c + 2.0 * E.T @ (E @ d)
    viol = 0.0
    if len(cell.star_a):
        viol = max(0.0, float(np.max(cell.star_a @ z - cell.star_b)))
    hull = _hull_distance(cell.s_tilde, y)
    return 0.5 * max(hull, viol)


def _hull_distance(pts, y):
    if len(pts) == 1:
        return float(np.linalg.norm(y - pts[0]))
    w = 1e4 * (1.0 + np.abs(pts).max())
    A = np.vstack([w * np.ones(len(pts)), pts.T])
    lam, _ = nnls(A, np.r_[w, y])
    lam = lam / lam.sum()
    return float(np.linalg.norm(lam @ pts - y))


def cell_membership(cell, x, tol=1e-9):
    """True iff `x` lies in the cell up to distance `tol`."""
    return cell_margin(cell, x) <= tol


def _cell_value(cell, x, kappa):
    d = np.asarray(x, dtype=float) - cell.s_c
    ph = cell.hull_basis.T @ (cell.hull_basis @ d)
    pe = cell.eq_basis.T @ (cell.eq_basis @ d)
    value = cell.d_sc + 0.5 * kappa * float(pe @ pe) - 0.5 * kappa * float(ph @ ph)
    grad = kappa * (pe - ph)
    return value, grad


class WellsExtension:
    """
    Cached cell complex for repeated evaluation of ``w_plus`` or ``w_minus``.
    """

    def __init__(self, field, kappa=None, sign="plus", max_points=MAX_SUBSET_POINTS, max_dim=3):
        if sign not in ("plus", "minus"):
            raise ValueError(f"bad sign {sign!r}")
        self.field = field
        self.kappa = gamma1(field) if kappa is None else float(kappa)
        self.sign = sign
        self.cells = enumerate_cells(field, self.kappa, sign, max_points, max_dim)
        if not self.cells:
            raise WellsError("no cells found")

    def locate(self, x, tol=1e-9):
        """Containing cells with their margins, best first."""
        margins = np.array([cell_margin(c, x) for c in self.cells])
        order = np.argsort(margins, kind="stable")
        return [(self.cells[k], float(margins[k])) for k in order if margins[k] <= tol] or [
            (self.cells[order[0]], float(margins[order[0]]))
        ]

    def __call__(self, x, tol=1e-9):
        """``(value, gradient, members)`` at `x`."""
        x = np.asarray(x, dtype=float)
        scale = 1.0 + np.abs(x).max()
        found = self.locate(x, tol * scale)
        cell, margin = found[0]
        if margin > tol * scale:
            raise WellsError(f"no cell contains {x.tolist()} (closest margin {margin:.3g})")
        value, grad = _cell_value(cell, x, self.kappa)
        for other, _ in found[1:]:
            v2, _ = _cell_value(other, x, self.kappa)
            if abs(v2 - value) > 1e-6 * (1.0 + abs(value)):
                raise WellsError(
                    f"cells {cell.members} and {other.members} disagree at {x.tolist()}: {value} vs {v2}"
                )
        if self.sign == "minus":
            value, grad = -value, -grad
        return value, grad, cell.members


def wells_value(field, kappa, x, sign="plus"):
    """Value of the Wells extension at `x` and the members of its cell."""
    value, _, members = WellsExtension(field, kappa, sign)(x)
    return {"value": value, "cell": members}


def cells_to_json(cells):
    return json.dumps(
        [
            {
                "members": list(c.members),
                "sign": c.sign,
                "s_c": c.s_c.tolist(),
                "hull_basis": c.hull_basis.tolist(),
                "eq_basis": c.eq_basis.tolist(),
                "s_tilde": c.s_tilde.tolist(),
            }
            for c in cells
        ],
        indent=2,
    )

"""
Extremal minimal Lipschitz extensions of a 1-field.

For a query point ``x`` write, for every data point ``a``,

    U_a(x) = F(a)(x) + k/2 |x - a|^2,   q_a = D_a f + k (x - a)
    L_a(x) = F(a)(x) - k/2 |x - a|^2,   p_a = D_a f - k (x - a)

Then ``psi_plus(x, a, v) = U_a - |v - q_a|^2 / (4k)`` and
``psi_minus(x, a, v) = L_a + |v - p_a|^2 / (4k)``, and the admissible
gradient set ``Lambda_x`` is exactly the set of ``v`` where
``max_b psi_minus <= min_a psi_plus``.  Consequently ``u_plus(x)`` and
``u_minus(x)`` are the largest and smallest ``t`` over the convex body

    K_x = {(v, t) : |v - q_a|^2 <= 4k (U_a - t),  |v - p_b|^2 <= 4k (t - L_b)}

and the gradients are the ``v`` attaining them.  The body is described by
``2m`` constraints; the ``m^2`` pair balls of ``Lambda_x`` are only
materialized for diagnostics and for :func:`project_lambda`.
"""

from dataclasses import dataclass, field as dc_field

import clarabel
import numpy as np
from scipy import sparse
from scipy.optimize import nnls

from .field import DUPLICATE_TOL, FieldError, OneField, detect_affine
from .gamma import gamma1

__all__ = [
    "SolverError",
    "LambdaSet",
    "ExtensionResult",
    "lambda_constraints",
    "project_lambda",
    "psi",
    "ExtremalSolver",
    "u_extremal",
    "certify_mle_point",
    "extend_field",
    "extension_records",
]

_SIGNS = ("plus", "minus")
# violated constraints added per constraint-generation round
_ADD_PER_ROUND = 24
# relative pair-ball radius below which the gradient is taken as pinned
_PIN_RTOL = 1e-7


class SolverError(RuntimeError):
    """Raised when an optimization does not reach the requested accuracy."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class LambdaSet:
    """Intersection of closed balls; one ball per ordered data pair."""

    centers: np.ndarray
    radii: np.ndarray
    query: np.ndarray
    pairs: np.ndarray = dc_field(default=None, repr=False)

    def overshoot(self, v):
        """Largest amount by which `v` lies outside a ball (0 if inside all)."""
        d = np.linalg.norm(self.centers - v, axis=1) - self.radii
        return max(0.0, float(d.max()))

    def __len__(self):
        return len(self.radii)


@dataclass
class ExtensionResult:
    value: float
    gradient: np.ndarray
    iterations: int
    constraint_violation: float
    stationarity_gap: float
    pinned: bool = False


def _check_sign(sign):
    if sign not in _SIGNS:
        raise ValueError(f"sign must be one of {_SIGNS}, got {sign!r}")


def _check_kappa(field, kappa, gamma=None):
    if gamma is None:
        gamma = gamma1(field)
    if kappa < gamma - 1e-12 * max(1.0, gamma):
        raise FieldError(f"kappa={kappa!r} is below the field constant {gamma!r}")
    return gamma


def _pair_geometry(field, kappa, x):
    """Paraboloid data ``(U, q, L, p)`` at query `x`."""
    X, f, D = field.points, field.values, field.grads
    dx = x - X
    lin = f + np.einsum("ij,ij->i", D, dx)
    sq = np.einsum("ij,ij->i", dx, dx)
    U = lin + 0.5 * kappa * sq
    L = lin - 0.5 * kappa * sq
    q = D + kappa * dx
    p = D - kappa * dx
    return U, q, L, p


def _pair_alpha(field, kappa, rows, cols):
    """The x-independent part ``alpha_ab`` of the squared pair radii."""
    X, f, D = field.points, field.values, field.grads
    a, b = X[rows][:, None, :], X[cols][None, :, :]
    Da, Db = D[rows][:, None, :], D[cols][None, :, :]
    dD = Da - Db
    ab = a - b
    return (
        2.0 * kappa * (f[rows][:, None] - f[cols][None, :])
        + kappa * np.einsum("ijk,ijk->ij", Da + Db, b - a)
        - 0.5 * np.einsum("ijk,ijk->ij", dD, dD)
        + 0.5 * kappa**2 * np.einsum("ijk,ijk->ij", ab, ab)
    )


def _pair_balls(field, kappa, x, rows=None, cols=None, alpha=None):
    """
    Centers and squared radii ``alpha + beta(x)`` of the pair balls.

    ``beta`` is a squared norm, so the radii stay accurate when they are
    tiny relative to the paraboloid values.
    """
    m = len(field)
    rows = np.arange(m) if rows is None else np.asarray(rows)
    cols = np.arange(m) if cols is None else np.asarray(cols)
    X, D = field.points, field.grads
    a, b = X[rows][:, None, :], X[cols][None, :, :]
    Da, Db = D[rows][:, None, :], D[cols][None, :, :]
    centers = 0.5 * (Da + Db) + 0.5 * kappa * (b - a)
    if alpha is None:
        alpha = _pair_alpha(field, kappa, rows, cols)
    w = 0.5 * (Da - Db) + 0.5 * kappa * (2.0 * x - a - b)
    return centers, alpha + np.einsum("ijk,ijk->ij", w, w)


def lambda_constraints(field, kappa, x):
    """
    Ball description of the admissible gradients at `x`.

    For every ordered pair ``(a, b)`` (including ``a == b``) the ball has
    center ``(D_a + D_b)/2 + k (b - a)/2`` and squared radius
    ``alpha_ab + beta_ab(x)`` with

        alpha_ab = (k A_ab - B_ab^2 / 2 + k^2 / 2) |a - b|^2
        beta_ab  = |(D_a - D_b)/2 + k (2x - a - b)/2|^2.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (field.dim,):
        raise FieldError(f"query has shape {x.shape}, field dimension is {field.dim}")
    if kappa <= 0:
        raise FieldError("kappa must be positive (use detect_affine for affine fields)")
    _check_kappa(field, kappa)
    X, f, D = field.points, field.values, field.grads
    m, n = X.shape
    ia, ib = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    ia, ib = ia.ravel(), ib.ravel()
    a, b = X[ia], X[ib]
    Da, Db = D[ia], D[ib]
    ab = a - b
    centers = 0.5 * (Da + Db) + 0.5 * kappa * (b - a)
    alpha = (
        2.0 * kappa * (f[ia] - f[ib])
        + kappa * np.einsum("ij,ij->i", Da + Db, b - a)
        - 0.5 * np.einsum("ij,ij->i", Da - Db, Da - Db)
        + 0.5 * kappa**2 * np.einsum("ij,ij->i", ab, ab)
    )
    w = 0.5 * (Da - Db) + 0.5 * kappa * (2.0 * x - a - b)
    beta = np.einsum("ij,ij->i", w, w)
    radii = np.sqrt(np.maximum(alpha + beta, 0.0))
    return LambdaSet(centers, radii, x.copy(), np.column_stack([ia, ib]))


def project_lambda(lset, v0, tol=1e-10, max_iter=10_000):
    """
    Euclidean projection of `v0` onto the intersection of the balls.

    Dykstra's cyclic projection with one correction vector per ball.  Raises
    :class:`SolverError` if the overshoot is still above `tol` after
    `max_iter` sweeps.
    """
    v = np.array(v0, dtype=float)
    C, R = lset.centers, lset.radii
    if lset.overshoot(v) <= tol:
        return v
    corr = np.zeros_like(C)
    sweep = 0
    for sweep in range(1, max_iter + 1):
        v_prev = v.copy()
        for k in range(len(R)):
            y = v + corr[k]
            d = y - C[k]
            nd = np.linalg.norm(d)
            proj = y if nd <= R[k] else C[k] + (R[k] / nd) * d
            corr[k] = y - proj
            v = proj
        if lset.overshoot(v) <= tol and np.linalg.norm(v - v_prev) <= tol:
            return v
    raise SolverError(
        f"Dykstra projection stopped after {sweep} sweeps with overshoot {lset.overshoot(v):.3g}",
        iterations=sweep,
        residual=lset.overshoot(v),
    )


def psi(field, kappa, x, a_idx, v, sign):
    """
    The comparison functions for the extremal extensions.

    ``plus``:  f_a + <D_a + v, x - a>/2 + k/4 |a - x|^2 - |D_a - v|^2 / (4k)
    ``minus``: f_a + <D_a + v, x - a>/2 - k/4 |a - x|^2 + |D_a - v|^2 / (4k)
    """
    _check_sign(sign)
    if kappa <= 0:
        raise FieldError("kappa must be positive")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != (field.dim,) or v.shape != (field.dim,):
        raise FieldError("dimension mismatch")
    a = field.points[a_idx]
    Da = field.grads[a_idx]
    s = 1.0 if sign == "plus" else -1.0
    return float(
        field.values[a_idx]
        + 0.5 * (Da + v) @ (x - a)
        + s * 0.25 * kappa * (a - x) @ (a - x)
        - s * (Da - v) @ (Da - v) / (4.0 * kappa)
    )


class ExtremalSolver:
    """
    Evaluate the upper extremal extension of a 1-field at many points.

    The lower extension is obtained through ``u_minus(F) = -u_plus(-F)``;
    see :func:`u_extremal`.

    Parameters
    ----------
    field : OneField
    kappa : float, optional
        Lipschitz level, at least the field constant.  Defaults to it.
    tol : float
        Target accuracy for the reported duality gap.
    """

    def __init__(self, field, kappa=None, tol=1e-8, max_iter=10_000):
        self.field = field
        gamma = gamma1(field)
        self.kappa = gamma if kappa is None else float(kappa)
        self.tol = tol
        self.max_iter = max_iter
        self.affine = None
        if self.kappa == 0.0:
            self.affine = detect_affine(field, tol=1e-12 * max(1.0, np.abs(field.values).max()))
            if self.affine is None:
                raise FieldError("kappa = 0 requires an affine field")
        else:
            _check_kappa(field, self.kappa, gamma)
            self._pinch_pairs = self._find_pinch_pairs()
        scale = np.abs(field.points).max() + 1.0
        self._dup_tol = DUPLICATE_TOL * scale

    # -- body description ---------------------------------------------------

    def _body(self, x):
        U, q, L, p = _pair_geometry(self.field, self.kappa, x)
        centers = np.vstack([q, p])
        sgn = np.concatenate([np.ones(len(U)), -np.ones(len(L))])
        e = np.concatenate([U, -L])
        return centers, sgn, e

    def _g(self, body, v, t):
        c, sgn, e = body
        return np.sum((v - c) ** 2, axis=1) / (4.0 * self.kappa) + sgn * t - e

    # -- top level ----------------------------------------------------------

    def data_index(self, x):
        d = np.linalg.norm(self.field.points - x, axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= self._dup_tol else None

    def solve(self, x, method="conic", v0=None, seed=0):
        """
        Upper extension value and gradient at `x`.

        `v0` is the starting gradient: the shift of the conic formulation or
        the start of the supergradient ascent.  `seed` randomizes the latter's
        start when `v0` is not given.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.field.dim,):
            raise FieldError(f"query has shape {x.shape}, field dimension is {self.field.dim}")
        if self.affine is not None:
            return ExtensionResult(self.affine(x), self.affine.v.copy(), 0, 0.0, 0.0)
        i = self.data_index(x)
        if i is not None:
            return ExtensionResult(
                float(self.field.values[i]), self.field.grads[i].copy(), 0, 0.0, 0.0, pinned=True
            )
        # the diagonal ball of the nearest sample has radius k |x - a|; when
        # that is negligible the Taylor jet is exact to k |x - a|^2 / 2
        X, D = self.field.points, self.field.grads
        dist = np.linalg.norm(X - x, axis=1)
        j = int(np.argmin(dist))
        gscale = 1.0 + np.abs(D).max() + self.kappa * np.abs(x - X).max()
        if self.kappa * dist[j] <= _PIN_RTOL * gscale:
            value = float(self.field.values[j] + D[j] @ (x - X[j]))
            return ExtensionResult(
                value, D[j].copy(), 0, self.violation(x, D[j]), 0.0, pinned=True
            )
        pinned = self._pinned_gradient(x)
        if pinned is not None:
            v = pinned
            body = self._body(x)
            t = float(np.min(body[2][: len(self.field)] - np.sum(
                (v - body[0][: len(self.field)]) ** 2, axis=1) / (4.0 * self.kappa)))
            res = ExtensionResult(t, v, 0, 0.0, 0.0, pinned=True)
        elif method == "conic":
            res = self._solve_conic(x, objective=1.0, v_ref=v0)
        elif method == "supergradient":
            res = self._solve_supergradient(x, v0=v0, seed=seed)
        else:
            raise ValueError(f"unknown method {method!r}")
        res.constraint_violation = self.violation(x, res.gradient)
        return res

    def violation(self, x, v):
        """
        Largest overshoot ``|v - c_ab| - r_ab`` over the pair balls.

        Uses ``psi_plus_a(v) - psi_minus_b(v) = (r_ab^2 - |v - c_ab|^2) / (2k)``:
        only pairs with ``psi_plus_a < psi_minus_b`` can overshoot.
        """
        U, q, L, p = _pair_geometry(self.field, self.kappa, x)
        hi = U - np.sum((v - q) ** 2, axis=1) / (4.0 * self.kappa)
        lo = L + np.sum((v - p) ** 2, axis=1) / (4.0 * self.kappa)
        if lo.max() <= hi.min():
            return 0.0
        rows = np.where(hi < lo.max())[0]
        cols = np.where(lo > hi.min())[0]
        centers, r2 = _pair_balls(self.field, self.kappa, x, rows, cols)
        d = np.linalg.norm(centers - v, axis=2) - np.sqrt(np.maximum(r2, 0.0))
        return max(0.0, float(d.max()))

    def _pinned_gradient(self, x):
        """Center of a (nearly) degenerate pair ball, if one pins the gradient."""
        ia, ib, alpha = self._pinch_pairs
        if len(ia) == 0:
            return None
        X, D = self.field.points, self.field.grads
        w = 0.5 * (D[ia] - D[ib]) + 0.5 * self.kappa * (2.0 * x - X[ia] - X[ib])
        r2 = alpha + np.einsum("ij,ij->i", w, w)
        k = int(np.argmin(r2))
        gscale = 1.0 + np.abs(D).max() + self.kappa * np.abs(x - X).max()
        if r2[k] <= (_PIN_RTOL * gscale) ** 2:
            return 0.5 * (D[ia[k]] + D[ib[k]]) + 0.5 * self.kappa * (X[ib[k]] - X[ia[k]])
        return None

    def _find_pinch_pairs(self, block=256):
        """
        Off-diagonal pairs whose ball can shrink to a point, i.e. with
        ``alpha_ab`` at rounding level; only these can pin the gradient.
        """
        X, D = self.field.points, self.field.grads
        m = len(X)
        out_a, out_b, out_al = [], [], []
        cols = np.arange(m)
        for start in range(0, m, block):
            rows = np.arange(start, min(m, start + block))
            al = _pair_alpha(self.field, self.kappa, rows, cols)
            dx = X[rows][:, None, :] - X[None, :, :]
            dD = D[rows][:, None, :] - D[None, :, :]
            scale = self.kappa**2 * np.einsum("ijk,ijk->ij", dx, dx) + np.einsum("ijk,ijk->ij", dD, dD)
            hit = al <= 1e-9 * scale
            hit[rows - start, rows] = False
            r, c = np.nonzero(hit)
            out_a.append(rows[r])
            out_b.append(c)
            out_al.append(np.maximum(al[r, c], 0.0))
        return np.concatenate(out_a), np.concatenate(out_b), np.concatenate(out_al)

    # -- conic route ----------------------------------------------------------

    def _solve_conic(self, x, objective=1.0, v_ref=None):
        """
        Extreme ``t`` over the body: ``objective=+1`` maximizes, ``-1`` minimizes.

        Large bodies are handled by constraint generation: solve with the
        tightest few constraints of each kind, add the violated ones, repeat.
        A relaxed optimum that satisfies every constraint is optimal.
        """
        body = self._body(x)
        c, sgn, e = body
        m = len(self.field)
        kappa = self.kappa
        U_min = float(np.min(e[sgn > 0]))
        L_max = float(-np.min(e[sgn < 0]))
        vscale = 1.0 + abs(U_min) + abs(L_max)
        if v_ref is None:
            v_ref = self.field.grads[int(np.argmin(np.sum((self.field.points - x) ** 2, axis=1)))]
        # seed with the most binding constraints of each kind at a reference
        # point; keeping far constraints out keeps the subproblem well scaled
        g0 = self._g(body, np.asarray(v_ref, dtype=float), 0.5 * (U_min + L_max))
        k0 = min(m, self.field.dim + 1)
        sel = np.r_[np.argsort(-g0[:m], kind="stable")[:k0], m + np.argsort(-g0[m:], kind="stable")[:k0]]
        iters = 0
        while True:
            v, t, it = self._conic_subproblem(x, body, sel, objective, v_ref)
            iters += it
            g = self._g(body, v, t)
            g[sel] = -np.inf
            bad = np.where(g > 1e-9 * vscale)[0]
            if len(bad) == 0:
                break
            worst = bad[np.argsort(-g[bad], kind="stable")][:_ADD_PER_ROUND]
            sel = np.union1d(sel, worst)
        v, t, lam, it = self._polish(body, v, t, objective)
        gap = self._dual_gap(body, v, t, lam, objective)
        return ExtensionResult(float(t), v, iters + it, 0.0, gap)

    def _conic_subproblem(self, x, body, sel, objective, v_ref=None):
        c, sgn, e = body
        c, sgn, e = c[sel], sgn[sel], e[sel]
        kappa = self.kappa
        nb, n = c.shape
        # shift and rescale: v = v_ref + w, t = t_ref + sigma * tau
        U_min = float(np.min(e[sgn > 0]))
        L_max = float(-np.min(e[sgn < 0]))
        t_ref = 0.5 * (U_min + L_max)
        sigma = max(abs(U_min - L_max), 1e-12 * (1.0 + abs(t_ref)))
        if v_ref is None:
            j_near = int(np.argmin(np.sum((self.field.points - x) ** 2, axis=1)))
            v_ref = self.field.grads[j_near]
        v_ref = np.array(v_ref, dtype=float)
        # constraint i:  |y_i|^2 <= h_i,  y_i = (w - (c_i - v_ref)) r,  r = 1 / (2 sqrt(k sigma)),
        # h_i = (e_i - s_i t_ref) / sigma - s_i tau.  As a second-order cone with a
        # balancing constant beta_i ~ sqrt(h_i) (so that no entry is of order h_i):
        #   ((h_i / beta_i + beta_i) / 2, y_i, (h_i / beta_i - beta_i) / 2) in Q
        r = 1.0 / (2.0 * np.sqrt(kappa * sigma))
        h0 = (e - sgn * t_ref) / sigma
        beta = np.sqrt(np.maximum(np.abs(h0), 1.0))
        bm = np.empty((nb, n + 2))
        bm[:, 0] = 0.5 * (h0 / beta + beta)
        bm[:, 1:n + 1] = -(c - v_ref) * r
        bm[:, n + 1] = 0.5 * (h0 / beta - beta)
        base = (n + 2) * np.arange(nb)
        rows = np.concatenate([base, base + n + 1] + [base + 1 + j for j in range(n)])
        cols = np.concatenate([np.full(2 * nb, n)] + [np.full(nb, j) for j in range(n)])
        tau_coef = 0.5 * sgn / beta
        vals = np.concatenate([tau_coef, tau_coef, np.full(n * nb, -r)])
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(nb * (n + 2), n + 1))
        b = bm.ravel()
        P = sparse.csc_matrix((n + 1, n + 1))
        qobj = np.zeros(n + 1)
        qobj[n] = -objective
        cones = [clarabel.SecondOrderConeT(n + 2)] * nb
        status, fallback = "not run", None
        for ctol in (1e-12, 1e-9, 1e-7):
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            settings.max_iter = 200
            settings.tol_gap_abs = ctol
            settings.tol_gap_rel = ctol
            settings.tol_feas = ctol
            settings.tol_ktratio = min(1e-6, 100 * ctol)
            sol = clarabel.DefaultSolver(P, qobj, A, b, cones, settings).solve()
            status = str(sol.status)
            xs = np.asarray(sol.x)
            if xs.shape != (n + 1,) or not np.all(np.isfinite(xs)):
                continue
            cand = (v_ref + xs[:n], t_ref + sigma * xs[n], int(sol.iterations))
            if status.endswith("Solved"):
                return cand
            if status.endswith(("InsufficientProgress", "MaxIterations")) and fallback is None:
                fallback = cand
        if fallback is not None:
            return fallback
        raise SolverError(f"conic solver status {status}", iterations=int(sol.iterations))

    def _polish(self, body, v, t, objective):
        """
        Newton iterations on the KKT system.

        Candidate active sets: the support of the least-squares multipliers
        and, when small enough, every constraint within a relative threshold.
        The candidate with the smallest KKT residual wins.
        """
        c, sgn, e = body
        kappa = self.kappa
        n = len(v)
        g = self._g(body, v, t)
        vscale = 1.0 + abs(t) + float(np.min(np.abs(e[sgn > 0] + e[sgn < 0])))
        lam0 = self._multipliers(body, v, t, np.where(g > -1e-6 * vscale)[0], objective)
        best = (v, t, lam0, 0)
        best_res = self._kkt_residual(body, *best[:3], objective)
        candidates = [np.where(lam0 > 0)[0]]
        for act in (1e-5, 1e-7, 1e-9):
            I = np.where(g > -act * vscale)[0]
            if len(I) <= 4 * (n + 1):
                candidates.append(I)
        iters = 0
        for I in candidates:
            if len(I) == 0:
                continue
            lamI = self._multipliers(body, v, t, I, objective)[I]
            y = np.concatenate([v, [t], lamI])
            k = len(I)
            for _ in range(30):
                iters += 1
                vv, tt, ll = y[:n], y[n], y[n + 1:]
                dv = vv - c[I]
                R = np.concatenate([
                    ll @ dv / (2.0 * kappa),
                    [ll @ sgn[I] - objective],
                    np.sum(dv**2, axis=1) / (4.0 * kappa) + sgn[I] * tt - e[I],
                ])
                J = np.zeros((n + 1 + k, n + 1 + k))
                J[:n, :n] = np.eye(n) * ll.sum() / (2.0 * kappa)
                J[:n, n + 1:] = dv.T / (2.0 * kappa)
                J[n, n + 1:] = sgn[I]
                J[n + 1:, :n] = dv / (2.0 * kappa)
                J[n + 1:, n] = sgn[I]
                step = np.linalg.lstsq(J, -R, rcond=None)[0]
                y = y + step
                if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(y)):
                    break
            vv, tt = y[:n], float(y[n])
            lam = np.zeros(len(e))
            lam[I] = y[n + 1:]
            if lam.min() < -1e-9 * max(1.0, lam.max()):
                continue
            lam = np.maximum(lam, 0.0)
            res = self._kkt_residual(body, vv, tt, lam, objective)
            if res < best_res:
                best, best_res = (vv, tt, lam, iters), res
        return best

    def _multipliers(self, body, v, t, I, objective):
        c, sgn, e = body
        lam = np.zeros(len(e))
        if len(I) == 0:
            return lam
        M = np.vstack([((v - c[I]) / (2.0 * self.kappa)).T, sgn[I][None, :]])
        rhs = np.zeros(len(v) + 1)
        rhs[-1] = objective
        lam[I] = nnls(M, rhs)[0]
        return lam

    def _kkt_residual(self, body, v, t, lam, objective):
        c, sgn, e = body
        g = self._g(body, v, t)
        stat = np.concatenate([lam @ (v - c) / (2.0 * self.kappa), [lam @ sgn - objective]])
        feas = max(0.0, float(g.max()))
        comp = float(np.max(np.abs(lam * g))) if len(g) else 0.0
        return float(np.linalg.norm(stat)) + feas + comp

    def _dual_gap(self, body, v, t, lam, objective):
        """Certified distance from `t` to the optimum, from the multipliers."""
        c, sgn, e = body
        S = lam.sum()
        ls = lam @ sgn
        if S <= 0 or abs(ls) < 1e-300:
            return np.inf
        lam = lam * (objective / ls)
        S = lam.sum()
        vhat = lam @ c / S
        bound = lam @ e - (lam @ np.sum((vhat - c) ** 2, axis=1)) / (4.0 * self.kappa)
        primal_viol = max(0.0, float(self._g(body, v, t).max()))
        # objective * t <= objective * bound for any feasible point
        return float(max(0.0, objective * (objective * bound - t)) + primal_viol)

    # -- projected supergradient route ---------------------------------------

    def _solve_supergradient(self, x, v0=None, seed=0):
        """
        Projected supergradient ascent of ``min_a psi_plus`` over the ball set.

        Slow compared to the conic route; kept as an independent solver.
        """
        kappa = self.kappa
        lset = lambda_constraints(self.field, kappa, x)
        U, q, L, p = _pair_geometry(self.field, kappa, x)
        body = self._body(x)

        def h(v):
            vals = U - np.sum((v - q) ** 2, axis=1) / (4.0 * kappa)
            k = int(np.argmin(vals))
            return float(vals[k]), k

        if v0 is None:
            # unconstrained maximizer of the smooth part, then projected
            v0 = q.mean(axis=0) if seed == 0 else q.mean(axis=0) + np.random.default_rng(seed).normal(
                scale=kappa, size=self.field.dim)
        v = project_lambda(lset, v0, tol=1e-12, max_iter=self.max_iter)
        best_v, (best_h, _) = v.copy(), h(v)
        gap = np.inf
        k = 0
        for k in range(1, self.max_iter + 1):
            hv, a = h(v)
            g = -(v - q[a]) / (2.0 * kappa)
            step = 4.0 * kappa / (k + 2)
            v = project_lambda(lset, v + step * g, tol=1e-12, max_iter=self.max_iter)
            hv, _ = h(v)
            if hv > best_h:
                best_v, best_h = v.copy(), hv
            if k % 50 == 0:
                lam = self._multipliers(body, best_v, best_h, np.where(
                    self._g(body, best_v, best_h) > -1e-3 * (1 + abs(best_h)))[0], 1.0)
                gap = self._dual_gap(body, best_v, best_h, lam, 1.0)
                if gap <= self.tol:
                    break
        if gap > self.tol:
            lam = self._multipliers(body, best_v, best_h, np.where(
                self._g(body, best_v, best_h) > -1e-3 * (1 + abs(best_h)))[0], 1.0)
            gap = self._dual_gap(body, best_v, best_h, lam, 1.0)
        return ExtensionResult(best_h, best_v, k, 0.0, gap)


def u_extremal(field, kappa=None, x=None, sign="plus", tol=1e-8, method="conic",
               max_iter=10_000, strict=False):
    """
    Value and gradient of the upper (``sign="plus"``) or lower extension at `x`.

    The lower extension is computed as ``-u_plus(-F)``.  With ``strict=True``
    a :class:`SolverError` is raised when the certified gap exceeds `tol`.
    """
    _check_sign(sign)
    src = field if sign == "plus" else field.negated()
    res = ExtremalSolver(src, kappa, tol=tol, max_iter=max_iter).solve(x, method=method)
    if strict and res.stationarity_gap > tol:
        raise SolverError(
            f"gap {res.stationarity_gap:.3g} above tol {tol:.3g}",
            iterations=res.iterations, residual=res.stationarity_gap,
        )
    if sign == "minus":
        res.value = -res.value
        res.gradient = -res.gradient
    return res


def certify_mle_point(field, kappa, x, value, gradient, tol=1e-8):
    """
    Check whether adding the jet ``(value, gradient)`` at `x` keeps ``kappa``.

    The jet is admissible iff the gradient lies in the admissible set and
    ``max_a psi_minus <= value <= min_a psi_plus`` (evaluated at that gradient).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(gradient, dtype=float)
    U, q, L, p = _pair_geometry(field, kappa, x)
    upper = float(np.min(U - np.sum((v - q) ** 2, axis=1) / (4.0 * kappa)))
    lower = float(np.max(L + np.sum((v - p) ** 2, axis=1) / (4.0 * kappa)))
    centers, r2 = _pair_balls(field, kappa, x)
    over = float((np.linalg.norm(centers - v, axis=2) - np.sqrt(np.maximum(r2, 0.0))).max())
    feasible = over <= tol
    return {
        "feasible_gradient": bool(feasible),
        "lower": lower,
        "upper": upper,
        "pass": bool(feasible and lower - tol <= value <= upper + tol),
    }


def extension_records(field, kappa, queries, signs=("plus", "minus"), tol=1e-8, threads=1):
    """
    Evaluate the requested extensions at every query.

    Returns a list of dicts keyed ``u_plus``/``du_plus``/``u_minus``/... plus
    ``iterations`` and ``gap`` (the worst over the signs).  Results are in
    query order regardless of `threads`.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    solvers = {}
    for s in signs:
        _check_sign(s)
        src = field if s == "plus" else field.negated()
        solvers[s] = ExtremalSolver(src, kappa, tol=tol)

    def one(k):
        x = queries[k]
        rec = {"x": x.tolist(), "iterations": 0, "gap": 0.0}
        for s, solver in solvers.items():
            try:
                r = solver.solve(x)
            except SolverError as exc:
                raise SolverError(f"query {k}: {exc}", exc.iterations, exc.residual) from exc
            sgn = 1.0 if s == "plus" else -1.0
            rec[f"u_{s}"] = sgn * r.value
            rec[f"du_{s}"] = (sgn * r.gradient).tolist()
            rec["iterations"] += r.iterations
            rec["gap"] = max(rec["gap"], r.stationarity_gap)
        return rec

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(queries))))
    return [one(k) for k in range(len(queries))]


def extend_field(field, kappa=None, queries=(), sign="plus", tol=1e-8):
    """
    Append extension jets at `queries` to the field.

    Queries that coincide with data points are skipped (their jet is the data
    jet).  ``sign`` may be ``"plus"``, ``"minus"`` or ``"avg"`` (half-sum).
    """
    queries = np.asarray(queries, dtype=float).reshape(-1, field.dim)
    if sign == "avg":
        signs = ("plus", "minus")
    else:
        _check_sign(sign)
        signs = (sign,)
    solvers = {
        s: ExtremalSolver(field if s == "plus" else field.negated(), kappa, tol=tol)
        for s in signs
    }
    new_x, new_f, new_d = [], [], []
    for k, x in enumerate(queries):
        if solvers[signs[0]].data_index(x) is not None:
            continue
        vals, grads = [], []
        for s in signs:
            try:
                r = solvers[s].solve(x)
            except SolverError as exc:
                raise SolverError(f"query {k}: {exc}", exc.iterations, exc.residual) from exc
            sgn = 1.0 if s == "plus" else -1.0
            vals.append(sgn * r.value)
            grads.append(sgn * r.gradient)
        new_x.append(x)
        new_f.append(np.mean(vals))
        new_d.append(np.mean(grads, axis=0))
    if not new_x:
        return field
    return OneField(
        np.vstack([field.points, new_x]),
        np.concatenate([field.values, new_f]),
        np.vstack([field.grads, new_d]),
    )

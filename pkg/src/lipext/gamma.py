"""
The Lipschitz functional of a 1-field and related quantities.

For two jets at ``a != b`` define

    A = [2 (f_a - f_b) + <D_a f + D_b f, b - a>] / |a - b|^2
    B = |D_a f - D_b f| / |a - b|

then the pair constant is ``sqrt(A^2 + B^2) + |A|`` and the constant of the
whole field is the maximum over all pairs.
"""

from dataclasses import dataclass

import numpy as np

from .field import FieldError

__all__ = [
    "PairStats",
    "pair_stats",
    "pair_matrices",
    "gamma1",
    "gamma1_argmax",
    "lip_df",
    "gamma1_pair_bruteforce",
    "decomposition_check",
    "gamma_report",
]

_BLOCK = 256


@dataclass(frozen=True)
class PairStats:
    a_val: float
    b_val: float
    gamma: float


def pair_stats(field, i, j):
    """A, B and the pair constant for samples `i` and `j`."""
    if i == j:
        raise FieldError("pair_stats needs two distinct samples")
    xa, xb = field.points[i], field.points[j]
    d = xb - xa
    dd = float(d @ d)
    a_val = (2.0 * (field.values[i] - field.values[j]) + (field.grads[i] + field.grads[j]) @ d) / dd
    b_val = float(np.linalg.norm(field.grads[i] - field.grads[j]) / np.sqrt(dd))
    return PairStats(float(a_val), b_val, float(np.hypot(a_val, b_val) + abs(a_val)))


def _block_stats(field, rows):
    X, f, D = field.points, field.values, field.grads
    d = X[None, :, :] - X[rows, None, :]
    dd = np.einsum("ijk,ijk->ij", d, d)
    s = np.einsum("ijk,ijk->ij", D[rows, None, :] + D[None, :, :], d)
    gd = D[rows, None, :] - D[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        A = (2.0 * (f[rows, None] - f[None, :]) + s) / dd
        B = np.sqrt(np.einsum("ijk,ijk->ij", gd, gd) / dd)
    A[dd == 0] = 0.0
    B[dd == 0] = 0.0
    return A, B


def pair_matrices(field):
    """Dense ``(A, B, gamma)`` matrices; diagonal entries are zero."""
    m = len(field)
    A = np.zeros((m, m))
    B = np.zeros((m, m))
    for start in range(0, m, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, m))
        A[rows], B[rows] = _block_stats(field, rows)
    return A, B, np.hypot(A, B) + np.abs(A)


def gamma1_argmax(field):
    """
    Field constant and the pair attaining it.

    Returns ``(gamma, (i, j))``; a single-sample field gives ``(0.0, None)``.
    """
    m = len(field)
    if m < 2:
        return 0.0, None
    best, arg = -1.0, None
    for start in range(0, m, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, m))
        A, B = _block_stats(field, rows)
        G = np.hypot(A, B) + np.abs(A)
        G[np.arange(len(rows)), rows] = -1.0
        k = int(np.argmax(G))
        r, c = divmod(k, m)
        if G[r, c] > best:
            best, arg = float(G[r, c]), tuple(sorted((int(rows[r]), int(c))))
    return best, arg


def gamma1(field):
    return gamma1_argmax(field)[0]


def lip_df(field):
    """Largest gradient difference ratio ``max B`` over pairs."""
    m = len(field)
    if m < 2:
        raise FieldError("lip_df needs at least two samples")
    best = 0.0
    for start in range(0, m, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, m))
        _, B = _block_stats(field, rows)
        best = max(best, float(B.max()))
    return best


def gamma1_pair_bruteforce(field, i, j, m=1_000_000, rng_seed=0, chunk=65_536):
    """
    Monte-Carlo estimate of the pair constant from the ball-sup form.

    Samples `m` points uniformly in the closed ball with diameter
    ``[x_i, x_j]`` and returns

        2 * max |F(x_i)(y) - F(x_j)(y)| / (|x_i - y|^2 + |x_j - y|^2).

    The estimate never exceeds the closed form (up to roundoff).  Each chunk
    of `chunk` accepted samples uses its own generator seeded from
    ``(rng_seed, chunk_index)``, so the result does not depend on how the
    chunks are scheduled.
    """
    if i == j:
        raise FieldError("gamma1_pair_bruteforce needs two distinct samples")
    if m < 1:
        raise ValueError("m must be >= 1")
    xa, xb = field.points[i], field.points[j]
    fa, fb = field.values[i], field.values[j]
    Da, Db = field.grads[i], field.grads[j]
    center = 0.5 * (xa + xb)
    radius = 0.5 * np.linalg.norm(xb - xa)
    n = field.dim
    best = -np.inf
    for k, start in enumerate(range(0, m, chunk)):
        want = min(chunk, m - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([rng_seed, k])))
        got = []
        have = 0
        while have < want:
            u = rng.uniform(-1.0, 1.0, size=(2 * want, n))
            u = u[np.einsum("ij,ij->i", u, u) <= 1.0]
            got.append(u)
            have += len(u)
        y = center + radius * np.concatenate(got)[:want]
        diff = (fa - fb) + (y - xa) @ Da - (y - xb) @ Db
        den = np.sum((y - xa) ** 2, axis=1) + np.sum((y - xb) ** 2, axis=1)
        best = max(best, float(np.max(2.0 * np.abs(diff) / den)))
    return best


def decomposition_check(interior, boundary, tol):
    """
    Sampled check of ``Gamma(F; U) <= max(Lip(DF; U), Gamma(F; boundary))``.

    `interior` and `boundary` are samples of one field on an open set and on
    its boundary.  The reverse inequality holds automatically on samples.
    """
    if boundary is None or len(boundary) == 0:
        raise FieldError("boundary samples are required")
    if interior.dim != boundary.dim:
        raise FieldError(f"dimension mismatch: {interior.dim} vs {boundary.dim}")
    union = interior.union(boundary)
    lhs = gamma1(union)
    rhs = max(lip_df(union), gamma1(boundary))
    return {"lhs": lhs, "rhs": rhs, "pass": bool(lhs <= rhs + tol)}


def gamma_report(field):
    g, arg = gamma1_argmax(field)
    return {
        "gamma1": g,
        "lip_df": lip_df(field) if len(field) > 1 else 0.0,
        "argmax_pair": list(arg) if arg is not None else None,
    }

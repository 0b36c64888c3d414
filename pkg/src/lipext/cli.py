"""Command-line interface: ``lipext <command> [options]``."""

import argparse
import csv
import io
import itertools
import json
import os
import sys
from pathlib import Path

import numpy as np

from .field import FieldError, dump_field, load_field
from .gamma import gamma1, gamma_report
from .kirszbraun import MapExtender, lipschitz_constant, load_map
from .supinf import ExtremalSolver, SolverError, certify_mle_point, extension_records
from .verification import amle_check, e1_fixture, two_circles_fixture
from .wells import WellsError, WellsExtension, cells_to_json

COMMANDS = ("gamma", "extend", "wells", "kirszbraun", "check-amle", "verify", "fixture")


class UsageError(ValueError):
    pass


class CheckFailed(RuntimeError):
    """Raised after the output is written when a requested check fails."""


# -- parsing helpers ----------------------------------------------------------


def parse_grid(spec, dim=None):
    """``"min,max,count;min,max,count"`` -> array of grid nodes (first axis slowest)."""
    axes = []
    for part in spec.split(";"):
        try:
            lo, hi, cnt = part.split(",")
            lo, hi, cnt = float(lo), float(hi), int(cnt)
        except ValueError as exc:
            raise UsageError(f"bad grid axis {part!r}; expected min,max,count") from exc
        if cnt < 1:
            raise UsageError(f"grid axis {part!r} needs a positive count")
        axes.append(np.linspace(lo, hi, cnt))
    if dim is not None and len(axes) != dim:
        raise UsageError(f"grid has {len(axes)} axes but the data dimension is {dim}")
    return np.array(list(itertools.product(*axes)), dtype=float)


def parse_region(spec):
    """``"cx,cy;r"`` -> ``(center, radius)``."""
    try:
        c, r = spec.split(";")
        return np.array([float(v) for v in c.split(",")]), float(r)
    except ValueError as exc:
        raise UsageError(f"bad region {spec!r}; expected c1,c2,...;radius") from exc


def load_queries(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("queries")
    try:
        q = np.atleast_2d(np.asarray(data, dtype=float))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad query file: {exc}") from exc
    return q


def _queries(args, dim):
    if args.grid and args.queries:
        raise UsageError("use either --grid or --queries, not both")
    if args.grid:
        return parse_grid(args.grid, dim)
    if args.queries:
        q = load_queries(args.queries)
        if q.shape[1] != dim:
            raise UsageError(f"queries have dimension {q.shape[1]}, data has {dim}")
        return q
    raise UsageError("--grid or --queries is required")


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("LIPEXT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"LIPEXT_THREADS={env!r} is not an integer") from exc
    return 1


def _kappa(args, field):
    g = gamma1(field)
    if args.kappa is None:
        return g
    if args.kappa < g - 1e-12 * max(1.0, g):
        raise UsageError(f"--kappa {args.kappa!r} is below the field constant {g!r}")
    return float(args.kappa)


def _emit(args, text):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2) + "\n"


# -- commands -------------------------------------------------------------------


def cmd_gamma(args):
    field = load_field(args.input)
    _emit(args, _json(gamma_report(field)))
    return True


def _records_csv(records, dim, signs):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = [f"x{i + 1}" for i in range(dim)]
    for s in signs:
        head += [f"u_{s}"] + [f"du_{s}_{i + 1}" for i in range(dim)]
    w.writerow(head)
    for r in records:
        row = [repr(v) for v in r["x"]]
        for s in signs:
            row += [repr(r[f"u_{s}"])] + [repr(v) for v in r[f"du_{s}"]]
        w.writerow(row)
    return buf.getvalue()


def cmd_extend(args):
    field = load_field(args.input)
    kappa = _kappa(args, field)
    q = _queries(args, field.dim)
    signs = ("plus", "minus") if args.sign in ("both", "avg") else (args.sign,)
    recs = extension_records(field, kappa, q, signs, tol=args.tol, threads=_threads(args))
    ok = True
    worst_gap = max((r["gap"] for r in recs), default=0.0)
    if worst_gap > args.tol:
        ok = False
    if len(signs) == 2:
        for r in recs:
            if r["u_minus"] > r["u_plus"] + 1e-8 * (1.0 + abs(r["u_plus"])):
                ok = False
    if args.sign == "avg":
        for r in recs:
            r["u_avg"] = 0.5 * (r["u_plus"] + r["u_minus"])
            r["du_avg"] = [0.5 * (a + b) for a, b in zip(r["du_plus"], r["du_minus"])]
        signs = ("avg",)
    if args.output and args.output.endswith(".csv"):
        _emit(args, _records_csv(recs, field.dim, signs))
    else:
        _emit(args, _json({"kappa": kappa, "queries": recs}))
    if not ok:
        raise CheckFailed(f"extension check failed (worst gap {worst_gap:.3g})")
    return True


def cmd_wells(args):
    field = load_field(args.input)
    kappa = _kappa(args, field)
    if kappa == 0:
        raise UsageError("the Wells construction needs a positive kappa")
    q = _queries(args, field.dim)
    signs = ("plus", "minus") if args.sign in ("both", "avg") else (args.sign,)
    ext = {s: WellsExtension(field, kappa, s) for s in signs}
    out = []
    for x in q:
        rec = {"x": x.tolist()}
        for s in signs:
            v, g, members = ext[s](x)
            rec[f"w_{s}"] = v
            rec[f"dw_{s}"] = g.tolist()
            rec[f"cell_{s}"] = list(members)
        out.append(rec)
    _emit(args, _json({"kappa": kappa, "queries": out}))
    if args.cells_out:
        Path(args.cells_out).write_text(cells_to_json([c for s in signs for c in ext[s].cells]))
    return True


def cmd_kirszbraun(args):
    data = load_map(args.input)
    q = _queries(args, data.dim_in)
    ext = MapExtender(data, tol=args.tol)
    signs = ("plus", "minus") if args.sign in ("both", "avg") else (args.sign,)
    out = []
    for x in q:
        rec = {"x": x.tolist()}
        for s in signs:
            rec[f"k_{s}"] = ext(x, s).tolist()
        out.append(rec)
    _emit(args, _json({"lipschitz": lipschitz_constant(data), "queries": out}))
    return True


def cmd_check_amle(args):
    field = load_field(args.input)
    kappa = _kappa(args, field)
    if not args.region:
        raise UsageError("--region is required")
    sign = "plus" if args.sign == "both" else args.sign
    rep = amle_check(
        field, kappa, parse_region(args.region), args.n_interior, args.n_boundary,
        sign, args.tol_rel, tol=args.tol, threads=_threads(args),
    )
    rep["kappa"] = kappa
    _emit(args, _json(rep))
    if not rep["pass"]:
        raise CheckFailed(f"AMLE check failed: gamma_V={rep['gamma_V']:.6g}, gamma_dV={rep['gamma_dV']:.6g}")
    return True


def run_verify(field, kappa, n_queries=50, seed=0, tol=1e-8, wells_max_points=8):
    """
    Invariant suite on one field.  Returns ``{name: {"pass": bool, ...}}``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    lo = field.points.min(axis=0) - 1.0
    hi = field.points.max(axis=0) + 1.0
    q = rng.uniform(lo, hi, size=(n_queries, field.dim))
    plus = ExtremalSolver(field, kappa, tol=tol)
    minus = ExtremalSolver(field.negated(), kappa, tol=tol)
    res = {}

    worst = 0.0
    for i in range(len(field)):
        for solver, sg in ((plus, 1.0), (minus, -1.0)):
            r = solver.solve(field.points[i])
            worst = max(worst, abs(sg * r.value - field.values[i]),
                        float(np.max(np.abs(sg * r.gradient - field.grads[i]))))
    res["interpolation"] = {"pass": worst <= 1e-10, "worst": worst}

    up = [plus.solve(x) for x in q]
    dn = [minus.solve(x) for x in q]
    margin = min(u.value + d.value for u, d in zip(up, dn))  # u+ - u-
    res["sandwich"] = {"pass": margin >= -1e-8, "min_margin": margin}

    gaps = max(max(u.stationarity_gap, d.stationarity_gap) for u, d in zip(up, dn))
    res["certified_gap"] = {"pass": gaps <= tol, "worst": gaps}

    cert = all(
        certify_mle_point(field, kappa, x, u.value, u.gradient, 1e-7)["pass"] for x, u in zip(q, up)
    )
    res["mle_certificate"] = {"pass": cert}

    from .field import OneField

    aug = OneField(
        np.vstack([field.points, q]),
        np.concatenate([field.values, [u.value for u in up]]),
        np.vstack([field.grads, [u.gradient for u in up]]),
    )
    g_aug = gamma1(aug)
    res["mle_augmentation"] = {"pass": g_aug <= kappa + 1e-5, "gamma1": g_aug}

    h = 1e-5
    fd = 0.0
    for x, u in zip(q, up):
        est = np.array([
            (plus.solve(x + h * e).value - plus.solve(x - h * e).value) / (2 * h)
            for e in np.eye(field.dim)
        ])
        fd = max(fd, float(np.max(np.abs(est - u.gradient))))
    res["gradient_fd"] = {"pass": fd <= kappa * h + 1e-6, "worst": fd}

    if len(field) <= wells_max_points and field.dim <= 3 and kappa > 0:
        wp = WellsExtension(field, kappa, "plus")
        wm = WellsExtension(field, kappa, "minus")
        diff = max(
            max(abs(wp(x)[0] - u.value), abs(wm(x)[0] + d.value)) for x, u, d in zip(q, up, dn)
        )
        res["wells_equivalence"] = {"pass": diff <= 1e-6, "worst": diff}
    return res


def cmd_verify(args):
    field = load_field(args.input)
    kappa = _kappa(args, field)
    res = run_verify(field, kappa, n_queries=args.n_queries, seed=args.seed, tol=args.tol)
    ok = all(v["pass"] for v in res.values())
    _emit(args, _json({"kappa": kappa, "checks": res, "pass": ok}))
    if not ok:
        failed = [k for k, v in res.items() if not v["pass"]]
        raise CheckFailed(f"failed checks: {', '.join(failed)}")
    return True


def cmd_fixture(args):
    name = args.name
    if name == "e1":
        field = e1_fixture()
    elif name.startswith("two-circles-"):
        try:
            n = int(name[len("two-circles-"):])
        except ValueError as exc:
            raise UsageError(f"bad fixture name {name!r}") from exc
        field = two_circles_fixture(n)
    else:
        raise UsageError(f"unknown fixture {name!r}; choose e1 or two-circles-N")
    _emit(args, dump_field(field))
    return True


# -- entry point -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="lipext",
        description="Minimal Lipschitz extensions of 1-fields (value and gradient data).",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("--input", "-i", required=True, help="input JSON file")
        sp.add_argument("--output", "-o", help="output file (default: stdout; .csv selects CSV where supported)")
        sp.add_argument("--kappa", type=float, help="Lipschitz level; must be at least the field constant")
        sp.add_argument("--tol", type=float, default=1e-8, help="solver tolerance (default 1e-8)")
        sp.add_argument("--max-iter", type=int, default=10_000, help="iteration cap for iterative solvers")
        sp.add_argument("--seed", type=int, default=0, help="seed for random test points")
        sp.add_argument("--threads", type=int, help="worker threads (fallback: LIPEXT_THREADS, else 1)")

    def queries(sp):
        sp.add_argument("--grid", help='grid "min,max,count;min,max,count;..." (one axis per dimension)')
        sp.add_argument("--queries", help='JSON file with a list of points or {"queries": [...]}')
        sp.add_argument("--sign", choices=("plus", "minus", "both", "avg"), default="both")

    sp = sub.add_parser("gamma", help="field constant and gradient Lipschitz ratio")
    common(sp)
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("extend", help="evaluate the extremal extensions")
    common(sp)
    queries(sp)
    sp.set_defaults(func=cmd_extend)

    sp = sub.add_parser("wells", help="evaluate the explicit piecewise-quadratic construction")
    common(sp)
    queries(sp)
    sp.add_argument("--cells-out", help="write the cell complex as JSON")
    sp.set_defaults(func=cmd_wells)

    sp = sub.add_parser("kirszbraun", help="extend a Lipschitz map")
    common(sp)
    queries(sp)
    sp.set_defaults(func=cmd_kirszbraun)

    sp = sub.add_parser("check-amle", help="sampled AMLE check on a ball")
    common(sp)
    sp.add_argument("--region", help='ball "c1,c2,...;radius"')
    sp.add_argument("--sign", choices=("plus", "minus", "both", "avg"), default="plus")
    sp.add_argument("--n-interior", type=int, default=500)
    sp.add_argument("--n-boundary", type=int, default=360)
    sp.add_argument("--tol-rel", type=float, default=0.05)
    sp.set_defaults(func=cmd_check_amle)

    sp = sub.add_parser("verify", help="run the invariant suite on a field")
    common(sp)
    sp.add_argument("--n-queries", type=int, default=50)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("fixture", help="write a named fixture (e1, two-circles-N)")
    sp.add_argument("name")
    common(sp, needs_input=False)
    sp.set_defaults(func=cmd_fixture)
    return p


def _error(kind, exc, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


_VALUE_FLAGS = ("--grid", "--region")


def _glue_values(argv):
    """Let ``--grid -2,2,41`` through argparse by rewriting it as ``--grid=-2,2,41``."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_values(argv))
    if args.tol <= 0:
        return _error("usage", "--tol must be positive", 2)
    try:
        args.func(args)
    except CheckFailed as exc:
        return _error("check_failed", exc, 1)
    except SolverError as exc:
        return _error("solver", exc, 3)
    except (UsageError, FieldError, WellsError) as exc:
        return _error(type(exc).__name__, exc, 2)
    except (OSError, json.JSONDecodeError) as exc:
        return _error("io", exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())

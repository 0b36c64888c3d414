import numpy as np
import pytest

from conftest import SQRT3, random_field
from lipext.field import FieldError, OneField
from lipext.gamma import gamma1, pair_stats
from lipext.supinf import ExtremalSolver, certify_mle_point, u_extremal
from lipext.verification import (
    BiponctualModel,
    amle_check,
    biponctual_mle,
    extension_jets,
    fibonacci_ball,
    fibonacci_sphere,
    sampled_gamma_region,
    two_circles_closed_form,
    two_circles_fixture,
)

# -- two-point model --------------------------------------------------------------------


def test_model_invariants(e1):
    m = BiponctualModel.from_field(e1)
    a, b = e1.points
    assert np.linalg.norm(m.c - 0.5 * (a + b)) <= 0.5 * np.linalg.norm(a - b)
    Da, Db = e1.grads
    assert np.allclose(Da + m.kappa * (a - m.c), m.d_c, atol=1e-10)
    assert np.allclose(Db - m.kappa * (b - m.c), m.d_c, atol=1e-10)


def test_e1_pinch_and_interpolation(e1):
    out = biponctual_mle(e1, [0.0, 1.0 / SQRT3])
    assert abs(out["value"]) < 1e-12
    assert np.allclose(out["gradient"], [-SQRT3, 0.0], atol=1e-12)
    for p, f, d in zip(e1.points, e1.values, e1.grads):
        out = biponctual_mle(e1, p)
        assert out["value"] == pytest.approx(f, abs=1e-12)
        assert np.allclose(out["gradient"], d, atol=1e-12)


def test_model_rejects_wrong_sizes(e1):
    with pytest.raises(FieldError):
        BiponctualModel.from_field(random_field(0, m=3))
    flat = OneField([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0], [[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(FieldError):
        BiponctualModel.from_field(flat)


@pytest.mark.parametrize("seed", range(3))
def test_branch_continuity(seed):
    f = random_field(seed, m=2)
    m = BiponctualModel.from_field(f)
    rng = np.random.default_rng(seed)
    eps = 1e-12
    for coef in (m.p_coef, m.q_coef):
        perp = np.array([-coef[1], coef[0]])
        for s in rng.normal(size=50) * 3:
            z = m.c + s * perp
            n = coef / np.linalg.norm(coef)
            v1, g1 = m(z + eps * n)
            v2, g2 = m(z - eps * n)
            assert abs(v1 - v2) < 1e-9
            assert np.abs(g1 - g2).max() < 1e-9


def test_sandwich_and_grid_gamma(e1):
    rng = np.random.default_rng(0)
    up, dn = ExtremalSolver(e1), ExtremalSolver(e1.negated())
    for z in rng.uniform(-2, 2, size=(200, 2)):
        v = biponctual_mle(e1, z)["value"]
        assert -dn.solve(z).value - 1e-6 <= v <= up.solve(z).value + 1e-6
    grid = np.array([[x, y] for x in np.linspace(-2, 2, 41) for y in np.linspace(-2, 2, 41)])
    m = BiponctualModel.from_field(e1)
    jets = [m(z) for z in grid]
    cloud = OneField(grid, [j[0] for j in jets], [j[1] for j in jets])
    assert gamma1(cloud) <= SQRT3 + 1e-6


@pytest.mark.parametrize("seed", [0, 1, 5])
def test_segment_pinch(seed):
    f = random_field(seed, m=2)
    m = BiponctualModel.from_field(f)
    for end in f.points:
        ts = np.linspace(0.0, 1.0, 9)
        pts = [end + t * (m.c - end) for t in ts]
        jets = [m(z) for z in pts]
        cloud = OneField(pts, [j[0] for j in jets], [j[1] for j in jets])
        for i in range(len(pts)):
            for j in range(i):
                assert pair_stats(cloud, i, j).gamma == pytest.approx(m.kappa, abs=1e-8)


# -- two circles ----------------------------------------------------------------------------


@pytest.mark.parametrize("n", [8, 360])
def test_two_circle_gamma(n):
    f = two_circles_fixture(n)
    assert len(f) == 2 * n
    assert gamma1(f) == pytest.approx(4.0, abs=1e-12)


def test_fixture_size_check():
    with pytest.raises(ValueError):
        two_circles_fixture(4)


def test_two_circle_values(circles360):
    s = ExtremalSolver(circles360, 4.0)
    assert s.solve(np.array([0.75, 0.0])).value == pytest.approx(0.125, abs=1e-3)
    assert s.solve(np.zeros(2)).value == pytest.approx(1.0, abs=2e-2)


def test_closed_form_profiles():
    for r in (0.5, 1.0, 1.5, 2.0):
        for sign in ("plus", "minus"):
            lo = two_circles_closed_form([r - 1e-9, 0.0], sign)[0]
            hi = two_circles_closed_form([r + 1e-9, 0.0], sign)[0]
            assert lo == pytest.approx(hi, abs=1e-7)
    assert two_circles_closed_form([0.75, 0.0])[0] == pytest.approx(0.125)
    assert two_circles_closed_form([0.0, 0.0], "minus")[0] == -1.0


def test_closed_form_jets_on_circle_and_ball():
    bnd = fibonacci_sphere(256, [0.0, 0.0], 0.75)
    inner = fibonacci_ball(500, [0.0, 0.0], 0.75)

    def jets(pts):
        out = [two_circles_closed_form(x) for x in pts]
        return OneField(pts, [o[0] for o in out], [o[1] for o in out])

    assert sampled_gamma_region(jets(bnd)) == pytest.approx(4.0 / 3.0, abs=5e-2)
    assert sampled_gamma_region(jets(inner)) == pytest.approx(4.0, abs=5e-2)


def test_sampled_gamma_of_affine_jets_is_zero():
    pts = fibonacci_ball(30, [0.0, 0.0], 1.0)
    v = np.array([0.3, -1.0])
    cloud = OneField(pts, 2.0 + pts @ v, np.tile(v, (30, 1)))
    assert sampled_gamma_region(cloud) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(FieldError):
        sampled_gamma_region(cloud.subset([0]))


def test_samplers():
    c = np.array([1.0, -2.0])
    s = fibonacci_sphere(64, c, 0.5)
    assert np.allclose(np.linalg.norm(s - c, axis=1), 0.5)
    b = fibonacci_ball(100, c, 0.5)
    assert np.all(np.linalg.norm(b - c, axis=1) < 0.5)
    s3 = fibonacci_sphere(50, np.zeros(3), 2.0)
    assert np.allclose(np.linalg.norm(s3, axis=1), 2.0)
    assert np.all(np.linalg.norm(fibonacci_ball(50, np.zeros(3), 2.0), axis=1) < 2.0)


def test_midline_agreement(circles360):
    rng = np.random.default_rng(3)
    r = rng.uniform(1.0, 2.0, 40)
    th = rng.uniform(0, 2 * np.pi, 40)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    up = extension_jets(circles360, 4.0, pts, "plus")
    dn = extension_jets(circles360, 4.0, pts, "minus")
    assert np.abs(up.values - dn.values).max() <= 2e-2


# -- AMLE check -------------------------------------------------------------------------------


def _clear_ball(f, rng):
    while True:
        c = rng.uniform(-2, 2, size=2)
        d = np.linalg.norm(f.points - c, axis=1).min()
        if d > 0.3:
            return c, 0.4 * d


@pytest.mark.parametrize("seed", range(3))
def test_amle_finite_domain(seed):
    f = random_field(seed, m=4)
    rng = np.random.default_rng(seed)
    rep = amle_check(f, gamma1(f), _clear_ball(f, rng), n_interior=120, n_boundary=60)
    assert rep["pass"], rep


def test_amle_precondition(e1):
    with pytest.raises(FieldError):
        amle_check(e1, SQRT3, (e1.points[0], 0.5))
    with pytest.raises(ValueError):
        amle_check(e1, SQRT3, ([0.0, 3.0], 0.5), n_interior=8)


@pytest.mark.slow
def test_two_circle_amle_failure(circles360):
    rep = amle_check(circles360, 4.0, ([0.0, 0.0], 0.75), threads=4)
    assert not rep["pass"]
    assert rep["gamma_V"] == pytest.approx(4.0, abs=0.2)
    assert rep["gamma_dV"] == pytest.approx(4.0 / 3.0, abs=0.07)


@pytest.mark.slow
def test_average_field_amle(circles360):
    # the half-sum vanishes on the disk up to solver roundoff
    rep = amle_check(circles360, 4.0, ([0.0, 0.0], 0.75), n_interior=200, sign="avg",
                     tol_abs=1e-8, threads=4)
    assert rep["gamma_V"] < 1e-8
    assert rep["pass"]


def test_three_distinct_amle_candidates(e1):
    x0 = np.array([0.4, -1.2])
    up = u_extremal(e1, SQRT3, x0, "plus")
    dn = u_extremal(e1, SQRT3, x0, "minus")
    jets = [
        (up.value, up.gradient),
        (dn.value, dn.gradient),
        (0.5 * (up.value + dn.value), 0.5 * (up.gradient + dn.gradient)),
    ]
    vals = [j[0] for j in jets]
    assert min(abs(vals[0] - vals[1]), abs(vals[0] - vals[2]), abs(vals[1] - vals[2])) > 1e-3
    for value, grad in jets:
        assert certify_mle_point(e1, SQRT3, x0, value, grad, 1e-7)["pass"]
        aug = OneField(np.vstack([e1.points, x0]), np.r_[e1.values, value], np.vstack([e1.grads, grad]))
        assert gamma1(aug) <= SQRT3 + 1e-6
        # the extremal extension of each augmented field is an AMLE of the original data
        rng = np.random.default_rng(0)
        rep = amle_check(aug, SQRT3, _clear_ball(aug, rng), n_interior=80, n_boundary=40)
        assert rep["pass"], rep

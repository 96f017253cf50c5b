import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpsquare.grid import RegionMask, SampledField, make_grid, norm
from lpsquare.kernel import builtin_kernel, convolution_kernel
from lpsquare.operators import (ConeSpec, TLadder, UpperHalfField, ball_counts, default_ladder, g_star,
                                lattice_ball_count, maximal_function, psi_transform, s_alpha_series_majorant,
                                square_function)

K1 = builtin_kernel("gauss_derivative", 1)


def bump(g, c=0.0, w=0.5):
    return g.sample(lambda *x: np.exp(-sum((xi - c) ** 2 for xi in x) / w**2))


def random_field(g, seed):
    r = np.random.default_rng(seed)
    v = sum(r.uniform(0.5, 2) * np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(g.mesh(), r.uniform(-1, 1, g.dim)))
                                        / r.uniform(0.1, 0.6) ** 2) for _ in range(3))
    return SampledField(g, v)


def test_ladder_geometric():
    L = TLadder(0.01, 10.0, 4)
    v = L.values
    assert v[0] == 0.01 and v[-1] <= 10.0 * (1 + 1e-12)
    np.testing.assert_allclose(v[1:] / v[:-1], 2 ** 0.25)
    np.testing.assert_allclose(L.weights, v * np.log(2) / 4)
    with pytest.raises(ValueError):
        TLadder(1.0, 0.5)
    with pytest.raises(ValueError):
        TLadder(0.0, 1.0)


def test_default_ladder_bounds():
    g = make_grid(2, [-1, -1], [1, 1], 32)
    L = default_ladder(g)
    assert L.t_min == pytest.approx(g.spacing) and L.t_max == pytest.approx(g.diameter)


def test_cone_spec_precondition():
    with pytest.raises(ValueError):
        ConeSpec(0.5)


def test_psi_zero_and_dimension_mismatch():
    g = make_grid(1, [-4], [4], 128)
    L = default_ladder(g)
    assert not psi_transform(K1, g.zeros(), L).values.any()
    with pytest.raises(ValueError):
        psi_transform(builtin_kernel("mexican_hat", 2), g.zeros(), L)


def test_psi_annihilates_constants_in_interior():
    g = make_grid(1, [-16], [16], 2048)
    L = TLadder(0.25, 1.0, 2)
    P = psi_transform(K1, g.sample(lambda x: np.full_like(x, 3.0)), L)
    interior = np.abs(g.axis()) < 16 - 8 * L.t_max
    assert np.max(np.abs(P.values[:, interior])) < 1e-6


def test_psi_of_near_delta_reproduces_profile():
    g = make_grid(1, [-8], [8], 2048)
    f = g.sample(lambda x: np.exp(-(x / (2 * g.spacing)) ** 2))
    f = f * (1 / norm(f, 1))
    P = psi_transform(K1, f, TLadder(1.0, 1.5, 1))
    phi = K1.profile(g.axis()[:, None])
    assert np.max(np.abs(P.values[0] - phi)) < 0.01 * np.max(np.abs(phi))


def test_convolution_and_direct_paths_agree():
    g = make_grid(2, [-2, -2], [2, 2], 16)
    L = default_ladder(g, 2)
    prof = builtin_kernel("mexican_hat", 2).profile
    direct = convolution_kernel(prof, 2, 0.75, 0.5)
    direct = type(direct)(2, 0.75, 0.5, direct.evaluate, "direct")  # drop the profile: forces direct summation
    f = random_field(g, 3)
    np.testing.assert_allclose(psi_transform(direct, f, L).values,
                               psi_transform(builtin_kernel("mexican_hat", 2), f, L).values, atol=1e-10)


def brute_square(P, alpha, lam=None):
    g, L = P.grid, P.ladder
    pts = g.centers()
    n = g.dim
    out = np.zeros(len(pts))
    for j, (t, w) in enumerate(zip(L.values, L.weights)):
        e = P.values[j].ravel() ** 2
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        wt = (d < alpha * t) if lam is None else (t / (t + d)) ** (n * lam)
        out += (wt * e[None, :]).sum(1) * g.cell_volume * w / t ** (n + 1)
    return np.sqrt(out).reshape(g.shape)


@pytest.mark.parametrize("dim", [1, 2])
def test_square_function_matches_brute_force(dim):
    g = make_grid(dim, [-2] * dim, [2] * dim, 64 if dim == 1 else 16)
    P = psi_transform(builtin_kernel("mexican_hat", dim), random_field(g, 1), default_ladder(g, 2))
    for a in (1.0, 2.0):
        np.testing.assert_allclose(square_function(P, a).values, brute_square(P, a), rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(g_star(P, 3.0).values, brute_square(P, None, 3.0), rtol=1e-8, atol=1e-10)


def test_zero_fields():
    g = make_grid(1, [-2], [2], 64)
    P = psi_transform(K1, g.zeros(), default_ladder(g))
    assert not square_function(P).values.any()
    assert not g_star(P, 3).values.any()
    assert not s_alpha_series_majorant(P, 3, 4).values.any()


def test_g_star_precondition():
    g = make_grid(1, [-2], [2], 16)
    P = psi_transform(K1, g.zeros(), default_ladder(g))
    with pytest.raises(ValueError):
        g_star(P, 1.0)


def test_majorant_examples():
    g = make_grid(1, [-8], [8], 1024)
    P = psi_transform(K1, bump(g), default_ladder(g))
    np.testing.assert_array_equal(s_alpha_series_majorant(P, 3, 0).values, square_function(P, 1).values)
    full = s_alpha_series_majorant(P, 3, 8).values
    tail = 2.0 ** -12 * square_function(P, 256).values
    assert np.max(tail / full) < 0.01


def test_aperture_l2_scaling():
    g = make_grid(1, [-32], [32], 2048)
    P = psi_transform(K1, g.sample(lambda x: np.exp(-x**2)), default_ladder(g, 8))
    s1 = norm(square_function(P, 1), 2)
    for a in (2, 4):
        assert norm(square_function(P, a), 2) / s1 == pytest.approx(a**0.5, rel=0.1)


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_cone_and_weight_monotonicity(dim, seed):
    g = make_grid(dim, [-3] * dim, [3] * dim, 128 if dim == 1 else 32)
    P = psi_transform(builtin_kernel("mexican_hat", dim), random_field(g, seed), default_ladder(g, 4))
    S = [square_function(P, a).values for a in (1, 1.5, 2, 4)]
    for lo, hi in zip(S, S[1:]):
        assert np.all(hi >= lo * (1 - 1e-9) - 1e-12)
    G = [g_star(P, lam).values for lam in (1.5, 2, 3, 6)]
    for a, b in zip(G, G[1:]):
        assert np.all(b <= a * (1 + 1e-9) + 1e-12)
    for lam, Gl in zip((1.5, 2, 3, 6), G):
        assert np.all(Gl >= 2 ** (-dim * lam / 2) * S[0] * (1 - 1e-9) - 1e-12)


@given(st.integers(0, 10**6), st.floats(-3, 3), st.floats(-3, 3))
def test_psi_linear(seed, a, b):
    g = make_grid(1, [-3], [3], 128)
    L = default_ladder(g, 2)
    f, h = random_field(g, seed), random_field(g, seed + 1)
    lhs = psi_transform(K1, a * f + b * h, L).values
    rhs = a * psi_transform(K1, f, L).values + b * psi_transform(K1, h, L).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_upper_half_field_shape_check():
    g = make_grid(1, [0], [1], 8)
    L = default_ladder(g)
    with pytest.raises(ValueError):
        UpperHalfField(g, L, np.zeros((len(L), 7)))


# -- maximal function ----------------------------------------------------------------


def interval_mask(g, a=0.0, b=1.0):
    x = g.axis()
    return RegionMask(g, (x > a) & (x < b))


def test_maximal_of_constant():
    g = make_grid(1, [-4], [4], 256)
    M = maximal_function(g.sample(lambda x: np.ones_like(x)), [0.5, 1.0])
    assert np.allclose(M.values, 1.0)


def test_maximal_interval_closed_form():
    g = make_grid(1, [-4], [4], 2048)
    M = maximal_function(interval_mask(g))
    x = g.axis()
    assert M.values[np.argmin(np.abs(x - 2))] == pytest.approx(0.5, rel=0.02)
    for d in (0.1, 0.5, 1.0, 2.0):
        i = np.argmin(np.abs(x - (1 + d)))
        assert M.values[i] == pytest.approx(1 / (1 + (x[i] - 1)), rel=0.02)
    inside = (x > 0) & (x < 1)
    assert np.all(M.values[inside] == 1.0)


def brute_maximal(vals, g, radii):
    pts = g.centers()
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    h = g.spacing
    best = np.zeros(len(pts))
    v = vals.ravel()
    for r in radii:
        inball = d < r * (1 - 1e-12)
        count = lattice_ball_count(g.dim, r / h)
        if count == 0:
            continue
        avg = (inball * v[None, :]).sum(1) / count
        # x receives every ball centered at y that contains x
        best = np.maximum(best, np.max(np.where(inball, avg[:, None], 0), axis=0))
    return best.reshape(g.shape)


@pytest.mark.parametrize("dim, cells", [(1, 48), (2, 12)])
def test_maximal_matches_brute_force(dim, cells):
    g = make_grid(dim, [0] * dim, [1] * dim, cells)
    r = np.random.default_rng(7)
    vals = r.uniform(0, 1, g.shape) * (r.uniform(size=g.shape) < 0.3)
    radii = g.spacing * np.array([0.7, 1.3, 2.0, 2.6, 3.5, 5.0])
    np.testing.assert_allclose(maximal_function(SampledField(g, vals), radii).values,
                               brute_maximal(vals, g, radii), atol=1e-12)
    mask = RegionMask(g, vals > 0)
    np.testing.assert_allclose(maximal_function(mask, radii).values,
                               brute_maximal(mask.member.astype(float), g, radii), atol=1e-12)


@given(st.integers(1, 2), st.integers(0, 10**6), st.floats(-4, 4))
def test_maximal_sublinear_and_homogeneous(dim, seed, c):
    g = make_grid(dim, [0] * dim, [1] * dim, 64 if dim == 1 else 16)
    r = np.random.default_rng(seed)
    f, h = SampledField(g, r.normal(size=g.shape)), SampledField(g, r.normal(size=g.shape))
    Mf, Mh = maximal_function(f).values, maximal_function(h).values
    assert np.all(maximal_function(f + h).values <= Mf + Mh + 1e-12)
    np.testing.assert_allclose(maximal_function(c * f).values, abs(c) * Mf, atol=1e-12)
    assert np.all(Mf <= norm(f, np.inf) + 1e-12)


def test_ball_counts_full_count():
    g = make_grid(2, [0, 0], [1, 1], 16)
    full = RegionMask(g, np.ones(g.shape, bool))
    inside, count = ball_counts(full, 2.5 * g.spacing)
    assert count == lattice_ball_count(2, 2.5) == 21
    assert inside[8, 8] == 21

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpsquare.families import MeanZeroInput, random_bump_mixture
from lpsquare.grid import RegionMask, SampledField, integrate, make_grid, norm
from lpsquare.kernel import builtin_kernel
from lpsquare.ntv_decomposition import (BadPart, EmptySuperlevelSet, GoodBadSplit, build_e_family, good_bad_split,
                                        mean_zero_residuals, mean_zero_tail_check, weak_type_accounting)
from lpsquare.operators import default_ladder
from lpsquare.whitney import Cube, WhitneyCover

K1 = builtin_kernel("gauss_derivative", 1)


def indicator_case(rho=0.5):
    g = make_grid(1, [-2], [2], 1024)
    x = g.axis()
    return g, g.sample(lambda x: 2 * rho * ((x > 0) & (x < 1)))


def test_indicator_split():
    rho = 0.5
    g, f = indicator_case(rho)
    s = good_bad_split(f, rho)
    x = g.axis()
    np.testing.assert_array_equal(s.omega.member, (x > 0) & (x < 1))
    assert not s.good.values.any()
    np.testing.assert_array_equal(s.bad.values, f.values)
    inv = s.invariants()
    assert all(inv[k] for k in ("reconstruction_ok", "good_sup_ok", "cube_measure_ok", "bad_l1_ok"))


def test_pure_good_case_signal():
    g, f = indicator_case(0.5)
    with pytest.raises(EmptySuperlevelSet) as err:
        good_bad_split(f, 2.0)
    assert err.value.good is f


def test_split_preconditions():
    g = make_grid(1, [0], [1], 64)
    with pytest.raises(ValueError):
        good_bad_split(g.sample(lambda x: x - 0.5), 0.1)
    with pytest.raises(ValueError):
        good_bad_split(g.sample(lambda x: np.ones_like(x)), 0.5)
    with pytest.raises(ValueError):
        good_bad_split(g.sample(lambda x: x), 0.0)


@pytest.mark.parametrize("dim", [1, 2])
@given(seed=st.integers(0, 10**6))
def test_random_split_invariants(dim, seed):
    g = make_grid(dim, [-4] * dim, [4] * dim, 512 if dim == 1 else 64)
    f = g.sample(random_bump_mixture(np.random.default_rng(seed), dim, 3))
    rho = float(np.median(f.values[f.values > 1e-3]))
    s = good_bad_split(f, rho)
    inv = s.invariants()
    assert inv["reconstruction_ok"] and inv["good_sup_ok"] and inv["cube_measure_ok"] and inv["bad_l1_ok"]
    fam = build_e_family(s)
    assert fam.measure() <= norm(f, 1) / rho * (1 + 1e-12)
    assert np.all(mean_zero_residuals(s, fam) < 1e-8)
    for e in fam.entries:
        if e.cube is not None:
            assert e.cube.volume == pytest.approx(e.mass / rho)
    # Lebesgue doubling with a = 6n: |Omega u E*| <= |Omega| + (6n)^n sum |E_i| up to one cell per cube
    n = g.dim
    bound = s.omega.measure() + (6 * n) ** n * sum(e.mass for e in fam.entries) / rho
    slack = len(fam.entries) * 2 * n * (6 * n * max(e.radius for e in fam.entries)) ** (n - 1) * g.spacing
    assert (s.omega | fam.E_star).measure() <= bound + slack


def _hand_split(masses, rho):
    g = make_grid(1, [-8], [8], 1024)
    parts, v = [], np.zeros(1024)
    for k, a in enumerate(masses):
        start = 100 + 200 * k
        index = (slice(start, start + 16),)
        block = np.full(16, a / (16 * g.spacing))
        v[index] = block
        q = Cube((g.lo[0] + (start + 8) * g.spacing,), 16 * g.spacing)
        parts.append(BadPart(q, index, block, g))
    f = SampledField(g, v)
    om = RegionMask(g, v > 0)
    return GoodBadSplit(f, rho, g.zeros(), tuple(parts), om, WhitneyCover(tuple(p.cube for p in parts), om, 1, 4))


def test_e_family_examples():
    s = _hand_split([2.0, 0.0], 4.0)
    fam = build_e_family(s)
    e0, e1 = fam.entries
    assert e0.radius == pytest.approx(0.5) and e0.cube.volume == pytest.approx(0.5)
    assert e1.cube is None and not fam.indicator(1).values.any()
    assert fam.measure() == pytest.approx(0.5)
    assert fam.E_star.measure() == pytest.approx(3.0, abs=2 * s.f.grid.spacing)
    assert mean_zero_residuals(s, fam).max() < 1e-12


def test_accounting_pure_good():
    g, f = indicator_case(0.5)
    L = default_ladder(g)
    rep = weak_type_accounting(f, 5.0, K1, L)
    assert rep.I == rep.II == rep.III == 0.0
    assert rep.decomposition_ok


def test_accounting_spike():
    g = make_grid(1, [-8], [8], 1024)
    f = g.sample(lambda x: np.exp(-(x / 0.05) ** 2))
    f = f * (1 / norm(f, 1))
    rep = weak_type_accounting(f, 1.0, K1, default_ladder(g))
    assert np.isfinite(rep.ratio) and rep.ratio > 0
    assert rep.I >= rep.omega_measure
    assert rep.decomposition_ok
    d = rep.to_dict()
    assert {"rho", "I", "II", "III", "ratio", "grid", "kernel", "ladder"} <= set(d)


def test_accounting_stable_under_refinement():
    g = make_grid(1, [-8], [8], 1024)
    fn = lambda x: np.exp(-((x - 0.3) / 0.2) ** 2) + 0.5 * np.exp(-((x + 1) / 0.1) ** 2)
    ratios = []
    for grid in (g, g.refined(2)):
        f = grid.sample(fn)
        f = f * (1 / norm(f, 1))
        ratios.append(weak_type_accounting(f, 0.5, K1, default_ladder(grid)).ratio)
    assert abs(ratios[1] - ratios[0]) / ratios[0] < 0.3


def test_tail_zero_field():
    g = make_grid(1, [-8], [8], 512)
    assert mean_zero_tail_check(K1, [0.0], 1.0, g.zeros(), default_ladder(g)) == (0.0, 0.0)


def test_tail_preconditions():
    g = make_grid(1, [-8], [8], 1024)
    L = default_ladder(g)
    inp = MeanZeroInput((0.0,), 1.0, (0.2,), (-0.2,), 0.3, 0.3, zero_mean=False)
    with pytest.raises(ValueError, match="mean zero"):
        mean_zero_tail_check(K1, inp.center, inp.side, inp.sample(g), L)
    ok = MeanZeroInput((0.0,), 1.0, (0.2,), (-0.2,), 0.3, 0.3)
    with pytest.raises(ValueError, match="supported"):
        mean_zero_tail_check(K1, (3.0,), 1.0, ok.sample(g), L)


def test_odd_pair_tail_converges_with_box():
    inp = MeanZeroInput((0.0,), 0.25, (0.06,), (-0.06,), 0.1, 0.1)
    g = make_grid(1, [-8], [8], 1024)
    vals = []
    for grid in (g, g.doubled_box()):
        f = inp.sample(grid)
        assert abs(integrate(f)) < 1e-12
        tail, ratio = mean_zero_tail_check(K1, inp.center, inp.side, f, default_ladder(grid))
        assert np.isfinite(ratio) and tail > 0
        vals.append(tail)
    assert abs(vals[1] - vals[0]) / vals[0] < 0.10

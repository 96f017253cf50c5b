import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpsquare.families import random_cube_family, random_region
from lpsquare.grid import RegionMask, make_grid
from lpsquare.io import read_cover_csv, write_cover_csv
from lpsquare.whitney import (Cube, WhitneyCover, WhitneyError, cube_dist_to_complement, doubling_union_check,
                              union_coverage, union_measure, verify_whitney, whitney_decompose)


def interval(g, a, b):
    x = g.axis()
    return RegionMask(g, (x > a) & (x < b))


def test_cube_geometry():
    q = Cube((1.0, 2.0), 2.0)
    np.testing.assert_allclose(q.lower, [0, 1])
    np.testing.assert_allclose(q.upper, [2, 3])
    assert q.volume == 4.0 and q.diameter == pytest.approx(2 * np.sqrt(2))
    assert q.scaled(3).side == 6.0 and q.scaled(3).center == q.center
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)


def test_unit_interval_cover():
    g = make_grid(1, [-2], [2], 1024)
    cover = whitney_decompose(interval(g, 0, 1))
    rep = verify_whitney(cover)
    assert rep.passed, rep.to_dict()
    sides = np.array([c.side for c in cover.cubes])
    centers = np.array([c.center[0] for c in cover.cubes])
    # cubes shrink toward both endpoints
    assert sides[np.argmin(centers)] == sides.min() and sides[np.argmax(centers)] == sides.min()
    assert sides[np.argmin(np.abs(centers - 0.5))] == sides.max()
    assert sum(sides) == pytest.approx(interval(g, 0, 1).measure())


def test_whole_grid_and_empty_region_rejected():
    g = make_grid(1, [0], [1], 64)
    with pytest.raises(WhitneyError):
        whitney_decompose(RegionMask(g, np.ones(64, bool)))
    with pytest.raises(WhitneyError):
        whitney_decompose(RegionMask(g, np.zeros(64, bool)))
    with pytest.raises(WhitneyError):
        whitney_decompose(interval(g, 0.2, 0.8), 2.0, 4.0)


def test_square_minus_point():
    g = make_grid(2, [0, 0], [1, 1], 64)
    X, Y = g.mesh()
    m = (X > 0.125) & (X < 0.875) & (Y > 0.125) & (Y < 0.875)
    hole = g.index_of((0.5, 0.5))
    m[hole] = False
    cover = whitney_decompose(RegionMask(g, m))
    assert verify_whitney(cover).passed
    hole_c = g.centers().reshape(64, 64, 2)[hole]
    d = np.array([np.linalg.norm(np.asarray(c.center) - hole_c) for c in cover.cubes])
    s = np.array([c.side for c in cover.cubes])
    near, far = s[d < 0.05], s[(d > 0.15) & (d < 0.25)]
    assert near.max() < far.max()


def test_verify_reports_overlap_with_pair():
    g = make_grid(1, [0], [1], 64)
    cover = WhitneyCover((Cube((0.375,), 0.125), Cube((0.4375,), 0.125)), interval(g, 0.25, 0.75), 1.0, 4.0)
    rep = verify_whitney(cover)
    assert not rep.disjoint and not rep.passed
    assert rep.witnesses["disjoint_interiors"][0]["pair"] == [0, 1]


def test_verify_reports_zero_distance():
    g = make_grid(1, [0], [1], 64)
    region = interval(g, 0.25, 0.75)
    cover = WhitneyCover((Cube((0.5,), 0.5),), region, 1.0, 4.0)
    rep = verify_whitney(cover)
    assert not rep.dist_bracket
    assert rep.witnesses["dist_bracket"][0]["distance"] < g.spacing


def test_cube_distance_examples():
    g = make_grid(1, [-4], [4], 2048)
    assert abs(cube_dist_to_complement(Cube((0.5,), 1.0), interval(g, -1, 2)) - 1.0) <= g.spacing
    assert cube_dist_to_complement(Cube((0.5,), 1.0), interval(g, 0, 1.5)) <= g.spacing
    with pytest.raises(WhitneyError):
        cube_dist_to_complement(Cube((0.0,), 1.0), RegionMask(g, np.ones(2048, bool)))


@given(st.floats(0.05, 0.3), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_cube_distance_annulus_brute_force(side, cx, cy):
    g = make_grid(2, [-1, -1], [1, 1], 64)
    r = np.hypot(*g.mesh())
    region = RegionMask(g, (r > 0.05) & (r < 0.8) | (r < 0.02))
    q = Cube((cx, cy), side)
    comp = g.centers()[~region.member.ravel()]
    gap = np.clip(np.abs(comp - np.array([cx, cy])) - side / 2, 0, None)
    assert cube_dist_to_complement(q, region) == pytest.approx(np.sqrt((gap**2).sum(1)).min(), abs=1e-12)


@pytest.mark.parametrize("dim, cells, pieces", [(1, 4096, 8), (2, 128, 6)])
@given(seed=st.integers(0, 10**6))
def test_random_regions_pass_all_invariants(dim, cells, pieces, seed):
    g = make_grid(dim, [0] * dim, [1] * dim, cells)
    region = random_region(g, np.random.default_rng(seed), pieces)
    cover = whitney_decompose(region)
    rep = verify_whitney(cover)
    assert rep.passed, rep.to_dict()["witnesses"]
    assert abs(union_measure(cover.cubes, g) - region.measure()) <= region.measure() + 1e-12
    again = whitney_decompose(region)
    assert again.cubes == cover.cubes


@given(st.integers(0, 10**6))
def test_section4_constants_with_diam_convention(seed):
    g = make_grid(1, [0], [1], 2048)
    region = random_region(g, np.random.default_rng(seed), 4)
    cover = whitney_decompose(region, 6.0, 24.0, "diam")
    rep = verify_whitney(cover)
    assert rep.disjoint and rep.coverage and rep.side_ratio and rep.touching


def test_doubling_examples():
    g = make_grid(1, [-8], [8], 1024)
    r = doubling_union_check([Cube((0.0,), 1.0)], 2, g)
    assert r["lhs"] == pytest.approx(2) and r["rhs"] == pytest.approx(2) and r["ok"]
    r = doubling_union_check([Cube((-4.0,), 1.0), Cube((4.0,), 1.0)], 2, g)
    assert r["lhs"] == pytest.approx(4) and r["rhs"] == pytest.approx(4) and r["ok"]
    with pytest.raises(ValueError):
        doubling_union_check([Cube((0.0,), 1.0)], 1.0, g)
    with pytest.raises(ValueError):
        doubling_union_check([Cube((7.0,), 1.0)], 3.0, g)
    assert not doubling_union_check([Cube((0.0,), 1.0)], 2, g, constant=1.0)["ok"]


@pytest.mark.parametrize("dim", [1, 2])
@given(seed=st.integers(0, 10**6), a=st.sampled_from([2.0, 3.0]))
def test_doubling_random(dim, seed, a):
    g = make_grid(dim, [0] * dim, [1] * dim, 1024 if dim == 1 else 128)
    cubes = random_cube_family(g, np.random.default_rng(seed), a, max_count=50)
    assert doubling_union_check(cubes, a, g)["ok"]


def _interval_union_length(cubes):
    iv = sorted((c.lower[0], c.upper[0]) for c in cubes)
    total, cur = 0.0, None
    for a, b in iv:
        if cur is None or a > cur[1]:
            if cur:
                total += cur[1] - cur[0]
            cur = [a, b]
        else:
            cur[1] = max(cur[1], b)
    return total + (cur[1] - cur[0] if cur else 0.0)


@given(st.lists(st.tuples(st.floats(0.1, 0.9), st.floats(0.001, 0.2)), min_size=1, max_size=10))
def test_union_coverage_exact_1d(specs):
    g = make_grid(1, [-1], [2], 97)
    cubes = [Cube((c,), s) for c, s in specs]
    assert union_measure(cubes, g) == pytest.approx(_interval_union_length(cubes), abs=1e-12)
    cov = union_coverage(cubes, g).values
    assert cov.min() >= 0 and cov.max() <= 1


@given(st.lists(st.tuples(st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0.01, 0.3)), min_size=1, max_size=6))
def test_union_coverage_2d_against_fine_raster(specs):
    g = make_grid(2, [0, 0], [1, 1], 16)
    fine = g.refined(32)
    cubes = [Cube((x, y), s) for x, y, s in specs]
    pts = fine.centers()
    m = np.zeros(len(pts), bool)
    for q in cubes:
        m |= q.contains_points(pts, closed=False)
    per = sum(4 * q.side for q in cubes)
    assert union_measure(cubes, g) == pytest.approx(m.sum() * fine.cell_volume, abs=per * fine.spacing)


def test_cover_csv_roundtrip(tmp_path):
    g = make_grid(2, [0, 0], [1, 1], 32)
    X, Y = g.mesh()
    cover = whitney_decompose(RegionMask(g, (X - 0.5) ** 2 + (Y - 0.5) ** 2 < 0.1))
    p = write_cover_csv(tmp_path / "c.csv", cover.cubes, 2)
    assert p.read_text().splitlines()[0] == "center_x,center_y,side"
    back = read_cover_csv(p)
    assert [(c.center, c.side) for c in back] == [(c.center, c.side) for c in cover.cubes]


@given(st.integers(1, 2), st.sampled_from([7, 16, 33]),
       st.lists(st.tuples(st.floats(-0.2, 1.2), st.floats(-0.2, 1.2), st.floats(0.001, 0.6),
                          st.booleans(), st.integers(0, 66), st.integers(1, 4)), min_size=1, max_size=6))
def test_rasterize_count_matches_pointwise(dim, cells, specs):
    from lpsquare.whitney import rasterize_count

    g = make_grid(dim, [0] * dim, [1] * dim, cells)
    h = g.spacing
    cubes = []
    for x, y, side, snap, k, m in specs:
        c = (k * h / 2, k * h / 2) if snap else (x, y)
        cubes.append(Cube(c[:dim], m * h if snap else side))
    expect = sum(q.contains_points(g.centers(), closed=False).reshape(g.shape).astype(int) for q in cubes)
    np.testing.assert_array_equal(rasterize_count(cubes, g), expect)


@given(st.integers(1, 2), st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15), st.integers(0, 3)),
                                   min_size=1, max_size=40))
def test_pair_detection_matches_all_pairs(dim, specs):
    from lpsquare.whitney import _pairs

    h = 1 / 64
    cubes = [Cube(tuple((np.array([x, y][:dim]) * 4 + 2**k / 2) * h), 2**k * h) for x, y, k in specs]
    overlap, touch = _pairs(cubes, 1e-9 * h)
    exp_o, exp_t = set(), set()
    for a in range(len(cubes)):
        for b in range(a + 1, len(cubes)):
            ov = np.minimum(cubes[a].upper, cubes[b].upper) - np.maximum(cubes[a].lower, cubes[b].lower)
            if np.all(ov > 1e-9 * h):
                exp_o.add((a, b))
            elif np.all(ov >= -1e-9 * h):
                exp_t.add((a, b))
    assert set(map(tuple, overlap.tolist())) == exp_o
    assert set(map(tuple, touch.tolist())) == exp_t


def test_batched_distances_match_single():
    from lpsquare.whitney import _ComplementIndex

    g = make_grid(2, [0, 0], [1, 1], 64)
    region = random_region(g, np.random.default_rng(5), 6)
    cover = whitney_decompose(region)
    idx = _ComplementIndex(region)
    np.testing.assert_array_equal(idx.distances(list(cover.cubes)), [idx.distance(c) for c in cover.cubes])

"""Inequality checkers.

Every checker returns a :class:`CheckReport` carrying the measured left and
right sides, their ratio and the slack it was judged with, never a bare
boolean. Implied constants are measured and then tested for stability under
grid refinement or domain extension rather than compared to absolute values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import hyp2f1

from . import io
from .families import GridSpike, MeanZeroInput, TestFunction, random_cube_family, random_region, spike
from .grid import Grid, RegionMask, SampledField, distribution_function, make_grid, norm
from .kernel import (KernelSpec, builtin_kernel, convolution_kernel, estimate_smoothness_constant, profile_integral,
                     size_constant_convergence)
from .ntv_decomposition import (EmptySuperlevelSet, build_e_family, good_bad_split, mean_zero_residuals,
                                mean_zero_tail_check, weak_type_accounting)
from .operators import (TLadder, UpperHalfField, ball_counts, default_ladder, default_radii, g_star, ladder_radii,
                        lattice_ball_count, maximal_function, psi_transform, s_alpha_series_majorant,
                        square_function)
from .whitney import Cube, WhitneyCover, doubling_union_check, verify_whitney


@dataclass
class CheckReport:
    checker: str
    inputs: dict
    lhs: float
    rhs: float
    ratio: float
    slack: float
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def inputs_digest(self) -> str:
        return io.digest(self.inputs)

    def to_dict(self) -> dict:
        return io.to_jsonable({
            "checker": self.checker,
            "inputs_digest": self.inputs_digest,
            "inputs": self.inputs,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "slack": self.slack,
            "pass": bool(self.passed),
            "details": self.details,
        })


def _ratio(a: float, b: float) -> float:
    if b > 0:
        return a / b
    return 0.0 if a == 0 else np.inf


def _rel_change(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(b - a) / abs(a) if a != 0 else np.inf


# -- kernel ------------------------------------------------------------------------------


def check_kernel(spec: KernelSpec, radii=(4.0, 8.0, 16.0, 32.0, 64.0), sample_count: int = 4096,
                 tol: float = 0.05) -> CheckReport:
    """Size constant over growing radii (must settle within ``tol``) and finite smoothness constants."""
    conv = size_constant_convergence(spec, tuple(radii), sample_count, tol)
    smooth = {w: estimate_smoothness_constant(spec, w, sample_count, max(radii)) for w in ("first_slot", "second_slot")}
    mass = profile_integral(spec) if spec.is_convolution else float("nan")
    est = conv["estimates"][-1]
    finite = bool(np.isfinite(est) and all(np.isfinite(v) for v in smooth.values()))
    return CheckReport("kernel_check", {"kernel": spec.describe(), "sample_count": sample_count,
                                        "radii": list(radii)},
                       est, conv["estimates"][-2], conv["relative_change"], tol, finite and conv["converged"],
                       {"size_estimates": conv["estimates"], "smoothness": smooth, "profile_integral": mass})


# -- geometry ---------------------------------------------------------------------------


def check_whitney(cover: WhitneyCover) -> CheckReport:
    rep = verify_whitney(cover)
    d = rep.to_dict()
    failed = [k for k, v in d["invariants"].items() if not v]
    return CheckReport("whitney", {"grid": cover.grid.describe(), "cubes": len(cover),
                                   "dist_lo": cover.dist_lo, "dist_hi": cover.dist_hi,
                                   "convention": cover.convention},
                       float(len(failed)), 0.0, float(len(failed)), cover.grid.spacing, rep.passed,
                       {**d, "failed_invariants": failed})


def check_doubling(cubes: Sequence[Cube], a: float, grid: Grid, constant: float | None = None) -> CheckReport:
    r = doubling_union_check(cubes, a, grid, constant)
    return CheckReport("doubling_union", {"a": a, "cubes": [[*c.center, c.side] for c in cubes],
                                          "constant": r["constant"], "grid": grid.describe()},
                       r["lhs"], r["rhs"], r["ratio"], r["slack"], r["ok"], {})


def check_doubling_family(grid: Grid, count: int = 200, alphas: Sequence[float] = (2.0, 3.0), seed: int = 0,
                          constant: float | None = None) -> CheckReport:
    """Random cube families; ``constant`` overrides a^n for every case."""
    rng = np.random.default_rng(seed)
    worst, fails = 0.0, []
    for i in range(count):
        a = float(alphas[i % len(alphas)])
        r = doubling_union_check(random_cube_family(grid, rng, a), a, grid, constant)
        worst = max(worst, r["lhs"] / (r["rhs"] * (1 + r["slack"])))
        if not r["ok"]:
            fails.append({"case": i, "a": a, "lhs": r["lhs"], "rhs": r["rhs"]})
    return CheckReport("doubling_union", {"grid": grid.describe(), "count": count, "alphas": list(alphas),
                                          "seed": seed, "constant": constant},
                       worst, 1.0, worst, 0.0, not fails, {"violations": len(fails), "witnesses": fails[:10]})


# -- series bound and the J integral -----------------------------------------------------


def _series_lhs(r, dist, n, delta, decay=None):
    d = delta if decay is None else decay

    def f(t):
        return r**n * ((t + dist) ** (-n) * (t / (t + dist)) ** d) ** 2 / t ** (n + 1)

    total, a = 0.0, r
    for b in ([dist] if dist > r else []) + [np.inf]:
        total += quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-11)[0]
        a = b
    return np.sqrt(total)


def _series_rhs(r, dist, n, delta, K):
    k = np.arange(1, K + 1)
    s = 2.0**k * r
    return float(np.sum(2.0 ** (-k * n / 2) * (s + dist) ** (-n) * (s / (s + dist)) ** delta))


def _series_pre(r, dist, n, delta, K):
    if not r > 0:
        raise ValueError("r must be positive")
    if dist < 0:
        raise ValueError("dist must be nonnegative")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n == 1 and delta >= 0.5:
        raise ValueError("n = 1 needs delta < 1/2 for the series to converge")
    if K < 8:
        raise ValueError("K must be at least 8")


def check_series_bound(r: float, dist: float, n: int, delta: float, K: int = 64,
                       lhs_decay: float | None = None) -> CheckReport:
    """lhs: the truncated-below t-integral; rhs: the dyadic series truncated at K terms.

    ``lhs_decay`` replaces delta in the integrand only (failure fixtures).
    """
    _series_pre(r, dist, n, delta, K)
    lhs = _series_lhs(r, dist, n, delta, lhs_decay)
    rhs = _series_rhs(r, dist, n, delta, K)
    ratio = _ratio(lhs, rhs)
    return CheckReport("series_bound", {"r": r, "dist": dist, "n": n, "delta": delta, "K": K,
                                        "lhs_decay": lhs_decay},
                       lhs, rhs, ratio, 0.0, bool(np.isfinite(ratio) and rhs > 0), {})


def _ratio_table(rs, dists, n, delta, K, decay):
    return np.array([[_series_lhs(r, d, n, delta, decay) / _series_rhs(r, d, n, delta, K) for d in dists]
                     for r in rs])


def check_series_family(n: int, delta: float, K: int = 64, span=(-2.0, 2.0), points: int = 10,
                        tol: float = 0.2, scale_tol: float = 1e-3, lhs_decay: float | None = None) -> CheckReport:
    """Implied constant C = sup lhs/rhs over a (r, dist) grid and its stability.

    C is recomputed on the same span with a refined grid and on grids extended by
    one decade in each direction; all must agree within ``tol``. Scale invariance
    (r, dist) -> (s r, s dist) and the K vs 2K truncation are checked as well.
    """
    _series_pre(1.0, 0.0, n, delta, K)
    lo, hi = span
    rs = np.logspace(lo, hi, points)
    ds = np.logspace(lo, hi, points)
    base = _ratio_table(rs, ds, n, delta, K, lhs_decay)
    C = float(base.max())
    variants = {
        "refined": _ratio_table(np.logspace(lo, hi, 2 * points - 1), np.logspace(lo, hi, 2 * points - 1),
                                n, delta, K, lhs_decay).max(),
        "extended_dist": _ratio_table(rs, np.logspace(lo, hi + 1, points), n, delta, K, lhs_decay).max(),
        "extended_r": _ratio_table(np.logspace(lo - 1, hi, points), ds, n, delta, K, lhs_decay).max(),
    }
    changes = {k: _rel_change(C, float(v)) for k, v in variants.items()}
    scale_err = 0.0
    for i, j in [(0, 0), (0, points - 1), (points - 1, 0), (points // 2, points // 2), (2, 7)]:
        for s in (2.0, 10.0):
            q = _series_lhs(s * rs[i], s * ds[j], n, delta, lhs_decay) / _series_rhs(s * rs[i], s * ds[j], n, delta, K)
            scale_err = max(scale_err, _rel_change(base[i, j], q))
    trunc = max(abs(_series_rhs(r, d, n, delta, K) - _series_rhs(r, d, n, delta, 2 * K)) / _series_rhs(r, d, n, delta, 2 * K)
                for r in rs for d in ds)
    worst = max(changes.values())
    passed = bool(np.isfinite(C) and worst < tol and scale_err < scale_tol and trunc < 1e-6)
    return CheckReport("series_bound", {"n": n, "delta": delta, "K": K, "span": list(span), "points": points,
                                        "lhs_decay": lhs_decay},
                       C, float(max(variants.values())), worst, tol, passed,
                       {"constant": C, "constant_variants": variants, "relative_changes": changes,
                        "pointwise_min": float(base.min()), "pointwise_spread": float(C / base.min()),
                        "scale_invariance_error": scale_err, "truncation_change": trunc})


def remark_j_closed_form(delta: float, upper: float = 1.0) -> float:
    """J for the upper limit ``upper * dist``: J^2 = u^(2d)/(2d) 2F1(2d, 2d; 2d+1; -u)."""
    a = 2 * delta
    return float(np.sqrt(upper**a / a * hyp2f1(a, a, a + 1, -upper)))


def check_remark_j(delta: float, dist: float, upper_factor: float = 1.0, tol: float = 1e-4) -> CheckReport:
    """J = (int_0^{dist} (t/(t+dist))^(2 delta) dt/t)^(1/2) against 1/sqrt(2 delta).

    ``upper_factor`` stretches the upper limit (failure fixtures).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not dist > 0:
        raise ValueError("dist must be positive")
    a = 2 * delta
    top = upper_factor * dist
    # integrand t^(2d-1) (t+dist)^(-2d): algebraic endpoint weight at 0
    val, err = quad(lambda t: (t + dist) ** (-a), 0.0, top, weight="alg", wvar=(a - 1, 0.0),
                    epsabs=0.0, epsrel=1e-12, limit=200)
    J = float(np.sqrt(val))
    bound = 1 / np.sqrt(a)
    exact = remark_j_closed_form(delta, upper_factor)
    q_err = abs(J - exact)
    return CheckReport("remark_j", {"delta": delta, "dist": dist, "upper_factor": upper_factor},
                       J, float(bound), J / bound, tol, bool(J <= bound and q_err < tol),
                       {"closed_form": exact, "quadrature_error": q_err, "quad_error_estimate": err})


# -- cone geometry -----------------------------------------------------------------------


def lemma_o_sets(region: RegionMask, alpha: float, ladder: TLadder, u_threshold: float | None = None):
    """(U, M chi_O) with U = {M chi_O > 1/(2 alpha^n)}; M includes the radii t_j and alpha t_j."""
    grid = region.grid
    thr = 1 / (2 * alpha**grid.dim) if u_threshold is None else u_threshold
    radii = np.concatenate([default_radii(grid), ladder_radii(ladder, (1.0, alpha))])
    M = maximal_function(region, radii)
    return RegionMask(grid, M.values > thr), M


def check_lemma_o(region: RegionMask, alpha: float, ladder: TLadder, max_pairs: int = 2_000_000,
                  u_threshold: float | None = None, max_witnesses: int = 5) -> CheckReport:
    """Items (i)-(iii) at every pair (y, t) of Gamma_alpha(complement of U), y a cell center, t on the ladder.

    Ball measures are lattice counts; lattice points outside the box count as
    outside both O and U. Each item is allowed one boundary layer of cells.
    """
    grid = region.grid
    if region.is_empty() or region.is_full():
        raise ValueError("region must be nonempty with nonempty complement")
    if not alpha >= 1:
        raise ValueError("alpha must be >= 1")
    n, h = grid.dim, grid.spacing
    U, _ = lemma_o_sets(region, alpha, ladder, u_threshold)
    notU = ~U
    an = alpha**n
    total = sum(int((ball_counts(notU, alpha * t)[0] > 0).sum()) for t in ladder.values)
    stride = max(1, int(np.ceil(total / max_pairs)))
    ok = {"i": True, "ii": True, "iii": True}
    wit = {"i": [], "ii": [], "iii": []}
    worst_iii, seen, counter = 0.0, 0, 0
    pts = grid.centers()
    for t in ladder.values:
        near = (ball_counts(notU, alpha * t)[0] > 0).ravel()
        idx = np.flatnonzero(near)
        # deterministic stride subsampling across the whole pair list
        keep = ((counter + np.arange(idx.size)) % stride) == 0
        counter += idx.size
        idx = idx[keep]
        if not idx.size:
            continue
        seen += idx.size
        inO, full_t = ball_counts(region, t)
        inO_plus, full_tp = ball_counts(region, t + h)
        inU, full_at = ball_counts(U, alpha * t)
        layer_t = lattice_ball_count(n, (t + h) / h) - full_t
        layer_at = lattice_ball_count(n, (alpha * t + h) / h) - full_at
        Oc = full_t - inO.ravel()[idx]
        Oc_plus = full_tp - inO_plus.ravel()[idx]
        Uc = full_at - inU.ravel()[idx]
        bad_i = full_t > 2 * Oc + layer_t
        bad_ii = Oc_plus < 1
        rhs_iii = 2 * an * Oc + layer_at + 2 * an * layer_t
        bad_iii = Uc > rhs_iii
        worst_iii = max(worst_iii, float(np.max(Uc / np.maximum(rhs_iii, 1e-300))))
        for key, bad in (("i", bad_i), ("ii", bad_ii), ("iii", bad_iii)):
            if bad.any():
                ok[key] = False
                for k in np.flatnonzero(bad)[: max_witnesses - len(wit[key])]:
                    wit[key].append({"y": pts[idx[k]].tolist(), "t": float(t), "ball": int(full_t),
                                     "outside_O": int(Oc[k]), "outside_U_alpha": int(Uc[k])})
    passed = all(ok.values())
    return CheckReport("lemma_o", {"grid": grid.describe(), "alpha": alpha, "ladder": ladder.describe(),
                                   "region_cells": region.count, "u_threshold": u_threshold},
                       worst_iii, 1.0, worst_iii, 1.0, passed,
                       {"i_ok": ok["i"], "ii_ok": ok["ii"], "iii_ok": ok["iii"], "pairs": seen,
                        "stride": stride, "U_cells": U.count, "witnesses": {k: v for k, v in wit.items() if v}})


def check_cone_energy(f: SampledField, threshold: float, alpha: float, kernel: KernelSpec, ladder: TLadder,
                      slack: float = 0.05, u_threshold: float | None = None, region: RegionMask | None = None,
                      field: UpperHalfField | None = None) -> CheckReport:
    """int_{U^c} S_alpha f^2 <= 2 alpha^n int_{O^c} S_1 f^2 with O = {S_1 f > threshold} (or ``region``).

    ``field`` may carry a precomputed psi_t f on the same ladder.
    """
    if not alpha >= 1:
        raise ValueError("alpha must be >= 1")
    grid = f.grid
    P = psi_transform(kernel, f, ladder) if field is None else field
    S1 = square_function(P, 1.0).values
    Sa = square_function(P, alpha).values
    O = RegionMask(grid, S1 > threshold) if region is None else region
    if O.is_empty():
        U = RegionMask(grid, np.zeros(grid.shape, bool))
    else:
        U, _ = lemma_o_sets(O, alpha, ladder, u_threshold)
    if U.is_full():
        raise ValueError("U covers the whole box; enlarge the box or raise the threshold")
    vol = grid.cell_volume
    lhs = float((Sa[~U.member] ** 2).sum() * vol)
    rhs = float(2 * alpha**grid.dim * (S1[~O.member] ** 2).sum() * vol)
    return CheckReport("cone_energy", {"grid": grid.describe(), "threshold": threshold, "alpha": alpha,
                                       "kernel": kernel.describe(), "ladder": ladder.describe(),
                                       "u_threshold": u_threshold},
                       lhs, rhs, _ratio(lhs, rhs), slack, bool(lhs <= rhs * (1 + slack)),
                       {"O_cells": O.count, "U_cells": U.count})


# -- weak type and aperture --------------------------------------------------------------


def _operator(name, kernel: KernelSpec, lam: float | None, levels_per_octave: int):
    if callable(name):
        return name
    if name == "S1":
        return lambda f: square_function(psi_transform(kernel, f, default_ladder(f.grid, levels_per_octave)), 1.0)
    if name == "g_star":
        if lam is None or not lam > 2:
            raise ValueError(f"g* weak type needs lambda > 2, got {lam}")
        return lambda f: g_star(psi_transform(kernel, f, default_ladder(f.grid, levels_per_octave)), lam)
    raise ValueError(f"operator must be 'S1', 'g_star' or a callable, got {name!r}")


def weak_ratios(Tf: SampledField, f: SampledField, rhos) -> np.ndarray:
    """rho |{|Tf| > rho}| / ||f||_1 for each rho."""
    rhos = np.asarray(rhos, float)
    l1 = norm(f, 1)
    if l1 == 0:
        return np.zeros_like(rhos)
    return rhos * distribution_function(Tf, rhos) / l1


def _sup_weak(op, fn, grid, rhos):
    f = fn.sample(grid) if hasattr(fn, "sample") else fn
    r = weak_ratios(op(f), f, rhos)
    k = int(np.argmax(r))
    return float(r[k]), float(rhos[k])


def check_weak_type(operator, family: Sequence, rho_ladder, kernel: KernelSpec, grid: Grid | None = None,
                    lam: float | None = None, levels_per_octave: int = 8, stability: float = 0.3,
                    refine: bool = True) -> CheckReport:
    """sup over family and rho of rho |{Op f > rho}| / ||f||_1, and its change under one 2x refinement.

    Family members exposing ``sample(grid)`` are resampled on the refined grid;
    plain fields are used as given and only finiteness is judged.
    """
    op = _operator(operator, kernel, lam, levels_per_octave)
    rhos = np.asarray(rho_ladder, float)
    if not len(family):
        raise ValueError("family is empty")
    continuous = all(hasattr(fn, "sample") for fn in family)
    if continuous and grid is None:
        raise ValueError("a grid is needed to sample the family")
    base_grid = grid if continuous else family[0].grid
    per = []
    for fn in family:
        w, rho = _sup_weak(op, fn, base_grid, rhos)
        per.append({"name": getattr(fn, "name", "field"), "ratio": w, "argmax_rho": rho})
    worst = max(p["ratio"] for p in per)
    details = {"per_input": per}
    refined, change = np.nan, 0.0
    if refine and continuous:
        fine = base_grid.refined(2)
        for p, fn in zip(per, family):
            p["ratio_refined"] = _sup_weak(op, fn, fine, rhos)[0]
        refined = max(p["ratio_refined"] for p in per)
        change = _rel_change(worst, refined)
        details["per_input_change_max"] = max(_rel_change(p["ratio"], p["ratio_refined"]) for p in per)
    name = operator if isinstance(operator, str) else getattr(operator, "__name__", "custom")
    passed = bool(np.isfinite(worst) and (not refine or not continuous or change < stability))
    return CheckReport("weak_type", {"operator": name, "lambda": lam, "grid": base_grid.describe(),
                                     "kernel": kernel.describe(), "levels_per_octave": levels_per_octave,
                                     "rho_ladder": rhos.tolist(), "family": [p["name"] for p in per]},
                       worst, float(refined), change, stability, passed, details)


def check_aperture_reduction(f: SampledField, alphas: Sequence[float], kernel: KernelSpec, ladder: TLadder,
                             rho_ladder, exponent: float | None = None, tol: float = 0.3) -> CheckReport:
    """W_alpha = sup_rho rho |{S_alpha f > rho}| / ||f||_1 against C alpha^exponent (default exponent n).

    C is the alpha = 1 value; passes when every W_alpha / alpha^exponent is at most (1 + tol) C.
    """
    if any(a < 1 for a in alphas):
        raise ValueError("apertures must be >= 1")
    e = f.grid.dim if exponent is None else exponent
    P = psi_transform(kernel, f, ladder)
    rhos = np.asarray(rho_ladder, float)
    al = sorted(set([1.0] + [float(a) for a in alphas]))
    W = {a: float(weak_ratios(square_function(P, a), f, rhos).max()) for a in al}
    C = W[1.0]
    fitted = {a: W[a] / a**e for a in al}
    worst = max(fitted.values())
    return CheckReport("aperture_reduction", {"grid": f.grid.describe(), "alphas": al, "exponent": e,
                                              "kernel": kernel.describe(), "ladder": ladder.describe()},
                       worst, C, _ratio(worst, C), tol, bool(np.isfinite(worst) and worst <= (1 + tol) * C),
                       {"W": {str(a): v for a, v in W.items()}, "normalized": {str(a): v for a, v in fitted.items()}})


def check_g_star_domination(family: Sequence, grid: Grid, kernel: KernelSpec, lam: float = 3.0, K: int = 8,
                            lam_g: float | None = None, levels_per_octave: int = 8, spread_tol: float = 0.2,
                            refine: bool = True) -> CheckReport:
    """C_f = max_x g*_lam f / sum_{k<=K} 2^(-k lam n/2) S_{2^k} f; one C must serve the family within ``spread_tol``.

    ``lam_g`` evaluates g* with a different lambda than the majorant (failure fixtures).
    """
    lg = lam if lam_g is None else lam_g

    def constants(g):
        L = default_ladder(g, levels_per_octave)
        out = []
        for fn in family:
            P = psi_transform(kernel, fn.sample(g), L)
            gs = g_star(P, lg).values
            maj = s_alpha_series_majorant(P, lam, K).values
            pos = maj > 0
            if np.any(gs[~pos] > 0):
                out.append(np.inf)
            else:
                out.append(float(np.max(gs[pos] / maj[pos], initial=0.0)))
        return np.array(out)

    Cs = constants(grid)
    C = float(Cs.max())
    spread = float((C - Cs.min()) / C) if C > 0 else 0.0
    details = {"per_input": {getattr(fn, "name", str(i)): float(c) for i, (fn, c) in enumerate(zip(family, Cs))},
               "spread": spread}
    change = 0.0
    if refine:
        Cf = constants(grid.refined(2))
        details["constant_refined"] = float(Cf.max())
        change = _rel_change(C, float(Cf.max()))
        details["refinement_change"] = change
    passed = bool(np.isfinite(C) and spread <= spread_tol and change <= spread_tol)
    return CheckReport("g_star_domination", {"grid": grid.describe(), "lambda": lam, "lambda_g": lg, "K": K,
                                             "kernel": kernel.describe(), "levels_per_octave": levels_per_octave,
                                             "family": [getattr(fn, "name", "field") for fn in family]},
                       C, float(Cs.min()), spread, spread_tol, passed, details)


def check_ok_uk_containment(f: SampledField, xi: float, k_max: int, kernel: KernelSpec, ladder: TLadder,
                            u_mode: str = "maximal") -> CheckReport:
    """U_k = {M chi_{O_k} > 2^(-kn-1)} with O_k = {S_1 f > 2^(kn) xi} must sit inside U for k <= k_max.

    ``u_mode='maximal'``: U = {M(S_1 f) > xi/2}, the set the containment argument reaches.
    ``u_mode='indicator'``: U = {M chi_O > 1/2^(n+1)} with O = {S_1 f > xi}.
    ``u_mode='literal'``: U = {M chi_O > xi/2} with O = {S_1 f > 1}.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    grid = f.grid
    n = grid.dim
    S1 = square_function(psi_transform(kernel, f, ladder), 1.0)
    radii = default_radii(grid)
    if u_mode == "maximal":
        U = maximal_function(S1, radii).values > xi / 2
    elif u_mode == "indicator":
        U = maximal_function(RegionMask(grid, S1.values > xi), radii).values > 1 / 2 ** (n + 1)
    elif u_mode == "literal":
        U = maximal_function(RegionMask(grid, S1.values > 1.0), radii).values > xi / 2
    else:
        raise ValueError(f"u_mode must be 'maximal', 'indicator' or 'literal', got {u_mode!r}")
    per, prev, monotone = [], None, True
    for k in range(0, k_max + 1):
        Ok = RegionMask(grid, S1.values > 2 ** (k * n) * xi)
        if prev is not None and not Ok.issubset(prev):
            monotone = False
        prev = Ok
        Uk = maximal_function(Ok, radii).values > 2.0 ** (-k * n - 1)
        per.append({"k": k, "O_k": Ok.count, "U_k": int(Uk.sum()), "outside_U": int((Uk & ~U).sum())})
    bad = max(p["outside_U"] for p in per)
    return CheckReport("ok_uk_containment", {"grid": grid.describe(), "xi": xi, "k_max": k_max, "u_mode": u_mode,
                                             "kernel": kernel.describe(), "ladder": ladder.describe()},
                       float(bad), 0.0, float(bad), 0.0, bool(bad == 0 and monotone),
                       {"per_k": per, "U_cells": int(U.sum()), "monotone_chain": monotone,
                        "note": "O taken at level xi; U threshold per u_mode"})


# -- bad-part checks ---------------------------------------------------------------------


def check_mean_zero_tail(inputs: Sequence[MeanZeroInput], grid: Grid, kernel: KernelSpec, levels_per_octave: int = 8,
                         refine_tol: float = 0.25, box_tol: float = 0.10) -> CheckReport:
    """Tail L1 of S_1 f outside Q(c, 6nr) over ||f||_1; stable under 2x refinement and box doubling."""
    per = []
    for inp in inputs:
        row = {}
        for key, g in (("base", grid), ("refined", grid.refined(2)), ("doubled", grid.doubled_box())):
            f = inp.sample(g)
            row[key] = mean_zero_tail_check(kernel, inp.center, inp.side, f, default_ladder(g, levels_per_octave),
                                            require_mean_zero=inp.zero_mean)[1]
        row["refine_change"] = _rel_change(row["base"], row["refined"])
        row["box_change"] = _rel_change(row["base"], row["doubled"])
        per.append(row)
    worst = max(p["base"] for p in per)
    rc = max(p["refine_change"] for p in per)
    bc = max(p["box_change"] for p in per)
    passed = bool(np.isfinite(worst) and rc < refine_tol and bc < box_tol)
    return CheckReport("mean_zero_tail", {"grid": grid.describe(), "kernel": kernel.describe(), "inputs": len(inputs),
                                          "zero_mean": [bool(i.zero_mean) for i in inputs]},
                       worst, float(max(rc, bc)), worst, box_tol, passed,
                       {"refine_change_max": rc, "box_change_max": bc, "per_input": per})


def check_ntv_split(fields: Sequence[SampledField], rhos: Sequence[float], mean_tol: float = 1e-8,
                    radius_scale: float = 1.0) -> CheckReport:
    """Split invariants and the per-cube mean-zero identity across fields and levels."""
    per, ok, worst_resid = [], True, 0.0
    for i, f in enumerate(fields):
        for rho in rhos:
            try:
                s = good_bad_split(f, rho)
            except EmptySuperlevelSet:
                continue
            inv = s.invariants()
            fam = build_e_family(s, radius_scale=radius_scale)
            res = mean_zero_residuals(s, fam)
            r = float(res.max(initial=0.0))
            worst_resid = max(worst_resid, r)
            good = all(inv[k] for k in ("reconstruction_ok", "good_sup_ok", "cube_measure_ok", "bad_l1_ok"))
            good = good and r <= mean_tol
            ok = ok and good
            per.append({"input": i, "rho": float(rho), "pass": good, "mean_zero_residual": r,
                        "E_measure": fam.measure(), "E_bound": norm(f, 1) / rho, **inv})
    return CheckReport("ntv_split", {"fields": len(fields), "rhos": [float(r) for r in rhos],
                                     "radius_scale": radius_scale},
                       worst_resid, mean_tol, _ratio(worst_resid, mean_tol), mean_tol, bool(ok and per),
                       {"cases": per})


def check_weak_type_accounting(fields: Sequence[tuple[str, SampledField]], rhos: Sequence[float], kernel: KernelSpec,
                               ladder: TLadder, c2: float = 1.0, C2: float = 1.0) -> CheckReport:
    """|{S_1 f > rho}| <= good + I + II + III for every (field, rho); reports the largest (I+II+III) rho / ||f||_1."""
    terms = []
    for name, f in fields:
        for rho in rhos:
            terms.append({"input": name, **weak_type_accounting(f, float(rho), kernel, ladder, c2, C2).to_dict()})
    if not terms:
        raise ValueError("no (field, rho) pairs to account")
    worst = max(t["ratio"] for t in terms)
    ok = all(t["decomposition_ok"] for t in terms)
    return CheckReport("weak_type_accounting", {"grid": fields[0][1].grid.describe(), "kernel": kernel.describe(),
                                                "family": [n for n, _ in fields], "c2": c2, "C2": C2},
                       worst, 1.0, worst, 0.0, bool(np.isfinite(worst) and ok), {"terms": terms})


# -- counterexample fixtures -------------------------------------------------------------


def _fx_kernel_slow_decay():
    # |psi| (1+|u|)^(n+delta) grows like (1+|u|)^delta: the size estimate never settles
    slow = convolution_kernel(lambda u: 1.0 / (1.0 + np.abs(u[..., 0])), 1, 0.4, 0.5, "slow_decay")
    return check_kernel(slow)


def _fx_overlapping_cubes():
    g = Grid(1, (0.0,), (1.0,), 64)
    region = RegionMask(g, (g.axis() > 0.25) & (g.axis() < 0.75))
    cubes = (Cube((0.375,), 0.125), Cube((0.4375,), 0.125))
    return check_whitney(WhitneyCover(cubes, region, 1.0, 4.0))


def _fx_zero_distance_cube():
    g = Grid(1, (0.0,), (1.0,), 64)
    region = RegionMask(g, (g.axis() > 0.25) & (g.axis() < 0.75))
    # the cube reaches the region edge, at distance h/2 from the first complement center
    return check_whitney(WhitneyCover((Cube((0.375,), 0.25),), region, 1.0, 4.0))


def _fx_doubling_constant_one():
    g = Grid(2, (0.0, 0.0), (1.0, 1.0), 128)
    return check_doubling_family(g, count=10, constant=1.0)


def _fx_series_mismatched_decay():
    return check_series_family(1, 0.4, lhs_decay=0.0)


def _fx_remark_j_wide_limit():
    return check_remark_j(0.4, 1.0, upper_factor=10.0)


def _fx_lemma_o_wrong_threshold():
    g = Grid(1, (-4.0,), (4.0,), 512)
    region = RegionMask(g, (g.axis() > 0) & (g.axis() < 1))
    return check_lemma_o(region, 1.0, default_ladder(g), u_threshold=0.9)


def _fx_cone_energy_empty_u():

    g = Grid(1, (-8.0,), (8.0,), 1024)
    f = TestFunction("bump", "bump_mixture", lambda x: np.exp(-x**2)).sample(g)
    k = builtin_kernel("gauss_derivative", 1)
    L = default_ladder(g)
    S1 = square_function(psi_transform(k, f, L), 1.0).values
    return check_cone_energy(f, float(np.median(S1)), 2.0, k, L, u_threshold=1.0)


def _fx_weak_type_pointwise_square():

    def pointwise_square(f):
        return f.with_values(f.values**2)

    g = Grid(1, (-8.0,), (8.0,), 1024)
    return check_weak_type(pointwise_square, [GridSpike((0.0,), 4.0)], np.logspace(-2, 5, 64),
                           builtin_kernel("gauss_derivative", 1), g)


def _fx_containment_literal():

    # O read as {S_1 f > 1}: at xi = 2 the set {M chi_O > xi/2} is empty while U_0 is not
    g = Grid(1, (-8.0,), (8.0,), 1024)
    f = 100.0 * TestFunction("spike", "spike", lambda x: np.exp(-(x / 0.05) ** 2)).sample(g)
    k = builtin_kernel("gauss_derivative", 1)
    return check_ok_uk_containment(f, 2.0, 4, k, default_ladder(g), u_mode="literal")


def _fx_aperture_flat_fit():

    g = Grid(1, (-32.0,), (32.0,), 2048)
    f = TestFunction("indicator", "indicator", lambda x: (np.abs(x) < 0.5).astype(float)).sample(g)
    return check_aperture_reduction(f, [2.0, 4.0], builtin_kernel("gauss_derivative", 1), default_ladder(g),
                                    np.logspace(-2, 1.5, 16), exponent=0.0)


def _fx_mean_zero_nonzero_mean():

    inp = MeanZeroInput((0.0,), 0.25, (0.0,), (0.0,), 0.2, 0.2, zero_mean=False)
    return check_mean_zero_tail([inp], Grid(1, (-8.0,), (8.0,), 1024), builtin_kernel("gauss_derivative", 1))


def _fx_gstar_mismatched_decay():
    from .families import standard_family

    g = Grid(1, (-8.0,), (8.0,), 1024)
    return check_g_star_domination(standard_family(1), g, builtin_kernel("gauss_derivative", 1), lam=3.0,
                                   lam_g=1.2, refine=False)


def _fx_ntv_wrong_radius():
    g = Grid(1, (-8.0,), (8.0,), 1024)
    f = TestFunction("bump", "bump_mixture", lambda x: 3 * np.exp(-(x / 0.3) ** 2)).sample(g, normalize=False)
    return check_ntv_split([f], [1.0], radius_scale=1.1)


COUNTEREXAMPLES: dict[str, Callable[[], CheckReport]] = {
    "kernel_slow_decay": _fx_kernel_slow_decay,
    "overlapping_cubes": _fx_overlapping_cubes,
    "zero_distance_cube": _fx_zero_distance_cube,
    "doubling_constant_one": _fx_doubling_constant_one,
    "series_mismatched_decay": _fx_series_mismatched_decay,
    "remark_j_wide_limit": _fx_remark_j_wide_limit,
    "lemma_o_wrong_threshold": _fx_lemma_o_wrong_threshold,
    "cone_energy_empty_u": _fx_cone_energy_empty_u,
    "weak_type_pointwise_square": _fx_weak_type_pointwise_square,
    "containment_literal_u": _fx_containment_literal,
    "aperture_flat_fit": _fx_aperture_flat_fit,
    "mean_zero_nonzero_mean": _fx_mean_zero_nonzero_mean,
    "gstar_mismatched_decay": _fx_gstar_mismatched_decay,
    "ntv_wrong_radius": _fx_ntv_wrong_radius,
}


def _fx_accounting_tiny_constants():
    # thresholds rho / sqrt(c2) blow up, leaving only |Omega u E*| to cover {S_1 f > rho}
    g = make_grid(1, [-8], [8], 512)
    f = TestFunction("spike", "spike", spike((0.0,), 0.2, 1)).sample(g)
    return check_weak_type_accounting([("spike", f)], [0.05, 0.2], builtin_kernel("gauss_derivative", 1), default_ladder(g),
                                      c2=1e-4, C2=1e-4)


COUNTEREXAMPLES["accounting_tiny_constants"] = _fx_accounting_tiny_constants


def run_counterexample(name: str) -> CheckReport:
    if name not in COUNTEREXAMPLES:
        raise KeyError(f"unknown counterexample {name!r}; known: {sorted(COUNTEREXAMPLES)}")
    return COUNTEREXAMPLES[name]()

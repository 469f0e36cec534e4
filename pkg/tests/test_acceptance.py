"""Acceptance suite: one PASS/FAIL line per criterion.

Run with pytest (the lines are repeated in the terminal summary) or directly:
    python3 tests/test_acceptance.py
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np

from cmskit.analysis import contraction_ratios, estimate_contraction_rate, jo_profile, moment_bound, variation_class
from cmskit.coding import coding_convergence, sample_words
from cmskit.estimators import (
    empirical_measure,
    ergodic_average,
    estimate_entropy_integral,
    estimate_entropy_lyapunov,
    representative_distance,
)
from cmskit.martingale import coupled_run, martingale_check_exact, tail_bound_check, y_martingale_check_exact
from cmskit.simulate import cesaro_U, cylinder_prob, iterate_U_exact, iterate_U_mc, word_frequencies
from cmskit.system import builtin, validate

ORACLES = json.loads((Path(__file__).parent / "oracles.json").read_text())
P_TWO = [[0.7, 0.3], [0.4, 0.6]]
F_NORM = "min(norm1(x, y), 10)"
RESULTS: list[str] = []


def report(number: int, ok: bool, detail: str, elapsed: float, limit: float) -> bool:
    ok = ok and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail} [{elapsed:.1f} s, limit {limit:g} s]"
    RESULTS.append(line)
    print(line)
    return ok


def systems():
    return {"example_r1": builtin("example_r1"), "example_r2": builtin("example_r2"),
            "gmarkov": builtin("gmarkov", P_TWO)}


def words_from(sys, v, n):
    if n == 0:
        yield ()
        return
    for w in words_from(sys, v, n - 1):
        last = sys.graph.target(w[-1]) if w else v
        for e in sys.out_edges(last):
            yield w + (e.id,)


# --- criteria ---------------------------------------------------------------------------

def check_rates():
    t0 = time.perf_counter()
    r2 = estimate_contraction_rate(builtin("example_r2"), 1_000_000, seed=7)
    t_r2 = time.perf_counter() - t0
    a2 = 209 / 210
    ok2 = 0.985 <= r2.max_ratio <= a2 + 1e-9 and r2.exceeding == 0
    t0 = time.perf_counter()
    sys1 = builtin("example_r1")
    r1 = estimate_contraction_rate(sys1, 1_000_000, seed=7)
    # the x = 0 stratum: every pair (0, t) has ratio p_0(0)/2 + 2 p_1(0)
    t = np.geomspace(1e-6, 1e3, 50)[:, None]
    at_zero = contraction_ratios(sys1, 1, np.zeros_like(t), t)
    t_r1 = time.perf_counter() - t0
    a1 = 45 / 48
    ok1 = (0.93 <= r1.max_ratio <= a1 + 1e-9 and r1.exceeding == 0
           and float(np.max(np.abs(at_zero - a1))) <= 1e-12)
    return report(1, ok1 and ok2 and t_r1 < 30,
                  f"rate r2 max {r2.max_ratio:.10f} ({r2.exceeding} of {r2.pairs} pairs above 209/210); "
                  f"r1 max {r1.max_ratio:.12f}, x=0 stratum off by {np.max(np.abs(at_zero - a1)):.1e}",
                  t_r2, 30)


def check_probability_axioms():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, sys in systems().items():
        rep = validate(sys, 10_000, seed=0)
        ok &= rep.passed and rep.min_prob >= sys.delta
        parts.append(f"{name} sum err {rep.max_sum_error:.1e} min p {rep.min_prob:.4f} >= {sys.delta:.4f}")
    return report(2, ok, "; ".join(parts), time.perf_counter() - t0, 5)


def check_square_summable():
    t0 = time.perf_counter()
    rep = variation_class(jo_profile(0.5, math.exp(-1), 1_000_000))
    ok = (0.410 <= rep.S2 <= 0.41124 and rep.S1 >= 6.9 and rep.S1_growing
          and rep.classification == "square_summable_not_dini")
    return report(3, ok, f"S2 = {rep.S2:.8f}, S1 = {rep.S1:.4f} (growing {rep.S1_growing}), {rep.classification}",
                  time.perf_counter() - t0, 5)


def check_cylinder_calculus():
    t0 = time.perf_counter()
    worst_exact, worst_z, words_checked = 0.0, 0.0, 0
    m = 100_000
    for name, sys in systems().items():
        x = sys.representative(1)
        for n in range(1, 7):
            words = list(words_from(sys, 1, n))
            worst_exact = max(worst_exact, abs(math.fsum(cylinder_prob(sys, x, w) for w in words) - 1))
            for w in words:
                ext = [w + (e.id,) for e in sys.out_edges(sys.graph.target(w[-1]))]
                diff = math.fsum(cylinder_prob(sys, x, u) for u in ext) - cylinder_prob(sys, x, w)
                worst_exact = max(worst_exact, abs(diff))
        counts = word_frequencies(sys, x, 3, m, seed=0, stream_id=0)
        for n in range(1, 4):
            for w in words_from(sys, 1, n):
                p = cylinder_prob(sys, x, w)
                se = math.sqrt(p * (1 - p) / m)
                z = abs(counts.get(w, 0) / m - p) / se if se > 0 else 0.0
                worst_z = max(worst_z, z)
                words_checked += 1
    ok = worst_exact <= 1e-12 and worst_z <= 3
    return report(4, ok, f"identities off by {worst_exact:.1e} at depth <= 6; "
                         f"{words_checked} words at depth <= 3, worst |z| = {worst_z:.2f}",
                  time.perf_counter() - t0, 60)


def check_martingales():
    t0 = time.perf_counter()
    sys = builtin("example_r2")
    x, y = (0.0, 1.0), (1.0, 2.0)
    worst = 0.0
    for n in range(0, 6):
        worst = max(worst, martingale_check_exact(sys, x, y, n).max_discrepancy,
                    y_martingale_check_exact(sys, x, y, n).max_discrepancy)
    run = coupled_run(sys, x, y, 100, 1000, seed=0, stream_id=5)
    logX = np.cumsum(np.log(run.py) - np.log(run.px), axis=0)
    Y = np.cumsum((run.py - run.px) / run.py, axis=0)
    Z = np.cumsum((run.py - run.px) ** 2, axis=0) / sys.delta ** 2
    gap = float(np.min(Y + Z - logX))
    ok = worst <= 1e-10 and gap >= -1e-12
    return report(5, ok, f"exact discrepancy {worst:.1e} for n <= 5; min (Y+Z-log X) = {gap:.3e} "
                         f"over 1000 paths of length 100", time.perf_counter() - t0, 60)


def check_tail_bound():
    t0 = time.perf_counter()
    rep = tail_bound_check(builtin("example_r2"), (0.0, 1.0), (1.0, 2.0), 20, 100_000, seed=0)
    worst = max(r.frequency - r.bound - 3 * r.std_error for r in rep.rows)
    return report(6, rep.violations == 0,
                  f"{rep.violations} of 20 rows above a^(i/2) + 3 s.e.; worst margin {worst:.3e}",
                  time.perf_counter() - t0, 30)


def check_entropy():
    t0 = time.perf_counter()
    gm = builtin("gmarkov", P_TWO)
    h = ORACLES["gmarkov_entropy"]
    x = gm.representative(1)
    g_l = estimate_entropy_lyapunov(gm, x, 100_000, seed=1)
    g_i = estimate_entropy_integral(gm, x, 100_000, seed=1)
    r1 = builtin("example_r1")
    h1 = ORACLES["example_r1_pinned_entropy"]
    r_l = estimate_entropy_lyapunov(r1, (0.0,), 100_000, seed=1)
    r_i = estimate_entropy_integral(r1, (0.0,), 100_000, seed=1)
    ok = (abs(g_l.value - h) <= 0.01 and abs(g_i.value - h) <= 0.01
          and abs(r_l.value - h1) <= 0.005 and abs(r_i.value - h1) <= 0.005)
    return report(7, ok, f"gmarkov {g_l.value:.5f} / {g_i.value:.5f} vs {h:.5f}; "
                         f"example_r1 {r_l.value:.5f} / {r_i.value:.5f} vs {h1:.5f}",
                  time.perf_counter() - t0, 60)


def check_uniqueness():
    t0 = time.perf_counter()
    sys = builtin("example_r2")
    starts = [(0.0, 1.0), (3.0, 5.0), (-2.0, 1.5), (0.0, -1.0), (4.0, -6.0)]
    ests = [ergodic_average(sys, s, F_NORM, 100_000, seed=0, stream_id=10 + k) for k, s in enumerate(starts)]
    worst = 0.0
    for a, b in itertools.combinations(ests, 2):
        worst = max(worst, abs(a.value - b.value) / math.hypot(a.std_error, b.std_error))
    r1 = ergodic_average(builtin("example_r1"), (1.0,), "min(abs(x), 1)", 100_000, seed=0)
    ok = worst <= 3 and r1.value <= 0.01
    vals = ", ".join(f"{e.value:.4f}" for e in ests)
    return report(8, ok, f"r2 averages {vals} (worst pair {worst:.2f} s.e.); r1 average {r1.value:.2e}",
                  time.perf_counter() - t0, 60)


def check_coding():
    t0 = time.perf_counter()
    gm = builtin("gmarkov", P_TWO)
    grid = (1, 2, 5, 10, 20, 40)
    L = grid[-1] + 1
    rep = coding_convergence(gm, seed=0, depth_grid=grid, words=1000)
    W = sample_words(gm, L, 1000, seed=0)
    loops = {k for k, e in enumerate(gm.graph.edges) if e.source == e.target}
    law_ok = True
    for m in grid:
        # the codes at depths m and m+1 differ first at symbol m+1, unless it is the anchor loop
        expected = np.where(np.isin(W[:, L - m - 1], list(loops)), 0.0, 2.0 ** -m)
        law_ok &= bool(np.array_equal(rep.successive[m], expected)) and rep.successive[m].max() == 2.0 ** -m
    sys = builtin("example_r2")
    r2 = coding_convergence(sys, seed=0, depth_grid=(5000,), words=1000)
    s = r2.stats[0]
    ok = law_ok and s.successive_frac_small >= 0.99 and s.start_frac_small >= 0.99
    return report(9, ok, f"gmarkov successive distances follow the 2^-m law on depths {list(grid)}: {law_ok}; "
                         f"r2 depth 5000: {s.successive_frac_small:.3f} successive and "
                         f"{s.start_frac_small:.3f} start-independence below 1e-6",
                  time.perf_counter() - t0, 120)


def check_operator():
    t0 = time.perf_counter()
    sys = builtin("example_r2")
    x = (0.0, 1.0)
    exact = iterate_U_exact(sys, F_NORM, x, 5)
    mc = iterate_U_mc(sys, F_NORM, x, 5, 100_000, seed=0, stream_id=20)
    c_exact = cesaro_U(sys, F_NORM, x, 5, mode="exact")
    c_mc = cesaro_U(sys, F_NORM, x, 5, mode="mc", trajectories=100_000, seed=0, stream_id=21)
    z1 = abs(exact - mc.value) / mc.std_error
    z2 = abs(c_exact.value - c_mc.value) / c_mc.std_error
    return report(10, z1 <= 3 and z2 <= 3,
                  f"U^5 f exact {exact:.6f} vs MC {mc.value:.6f} ({z1:.2f} s.e.); "
                  f"Cesaro exact {c_exact.value:.6f} vs MC {c_mc.value:.6f} ({z2:.2f} s.e.)",
                  time.perf_counter() - t0, 60)


def check_moment_bound():
    t0 = time.perf_counter()
    sys = builtin("example_r2")
    mu = empirical_measure(sys, (0.0, 1.0), 100_000, seed=0, stream_id=30)
    est = representative_distance(sys, mu)
    bound = moment_bound(sys)
    return report(11, est.value <= bound + 3 * est.std_error,
                  f"mean d(x, x_vertex) = {est.value:.4f} +- {est.std_error:.4f} vs bound {bound:.4f}",
                  time.perf_counter() - t0, 30)


CHECKS = [check_rates, check_probability_axioms, check_square_summable, check_cylinder_calculus,
          check_martingales, check_tail_bound, check_entropy, check_uniqueness, check_coding,
          check_operator, check_moment_bound]


def test_criterion_01_contraction_rates():
    assert check_rates()


def test_criterion_02_probability_axioms():
    assert check_probability_axioms()


def test_criterion_03_square_summable():
    assert check_square_summable()


def test_criterion_04_cylinder_calculus():
    assert check_cylinder_calculus()


def test_criterion_05_martingale_exactness():
    assert check_martingales()


def test_criterion_06_tail_bound():
    assert check_tail_bound()


def test_criterion_07_entropy():
    assert check_entropy()


def test_criterion_08_uniqueness():
    assert check_uniqueness()


def test_criterion_09_coding_map():
    assert check_coding()


def test_criterion_10_operator_oracle():
    assert check_operator()


def test_criterion_11_moment_bound():
    assert check_moment_bound()


if __name__ == "__main__":
    passed = sum(bool(c()) for c in CHECKS)
    print(f"{passed}/{len(CHECKS)} criteria passed")
    raise SystemExit(0 if passed == len(CHECKS) else 1)

import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from epsbai import kernels
from epsbai.families import Family, kl_div
from epsbai.oracle import (BanditInstance, brute_force_T, characteristic_time, g_b, g_range, grid_objective,
                           lambda_b, lambda_interval, pair_divergences, lower_bound_general, solve_weights_for_arm, two_arm, x_b)

BERN = Family.bernoulli()
GAUSS = Family.gaussian(1.0)
MU1 = (0.2, 0.4, 0.5, 0.55, 0.7)
MU2 = (0.4, 0.5, 0.6, 0.7, 0.75, 0.8)
MU3 = (0.2, 0.3, 0.45, 0.55, 0.6, 0.6)
W_MU2 = [0.024, 0.036, 0.060, 0.136, 0.275, 0.469]
W_MU3_A4 = [0.008, 0.0133, 0.035, 0.114, 0.436, 0.393]


def bern(means, eps):
    return BanditInstance(BERN, tuple(means), eps)


# --- pair maps ----------------------------------------------------------------------

def test_lambda_b_values():
    inst = bern((0.7, 0.5), 0.1)
    assert lambda_b(inst, 0, 1, 0.0) == pytest.approx(0.7)
    # mpmath root of the first-order condition; grid minimum at step 1e-6 agrees
    assert lambda_b(inst, 0, 1, 1.0) == pytest.approx(0.5440862874647881, abs=1e-10)
    lam = np.arange(0.4, 0.7, 1e-6)
    vals = [kl_div(BERN, 0.7, l) + kl_div(BERN, 0.5, l + 0.1) for l in lam[::1000]]
    assert lambda_b(inst, 0, 1, 1.0) == pytest.approx(lam[::1000][int(np.argmin(vals))], abs=1e-3)
    g = BanditInstance(GAUSS, (1.0, 0.0), 0.0)
    assert lambda_b(g, 0, 1, 1.0) == pytest.approx(0.5)
    # boundary: mu_a above mu+ - eps
    assert lambda_b(bern((0.95, 0.5), 0.1), 0, 1, 0.0) == pytest.approx(0.9, abs=1e-9)


def test_lambda_interval_and_errors():
    inst = bern((0.7, 0.5), 0.1)
    lo, hi = lambda_interval(inst, 0, 1)
    assert lo == pytest.approx(0.4) and hi == pytest.approx(0.7)
    with pytest.raises(ValueError):
        lambda_b(inst, 0, 0, 1.0)
    with pytest.raises(ValueError):
        lambda_b(bern((0.2, 0.5), 0.1), 0, 1, 1.0)


def test_g_b_values():
    g = BanditInstance(GAUSS, (1.0, 0.0), 0.0)
    assert g_b(g, 0, 1, 0.0) == 0.0
    assert g_b(g, 0, 1, 1.0) == pytest.approx(0.25)
    inst = bern((0.7, 0.5), 0.1)
    assert g_b(inst, 0, 1, 0.0) == 0.0
    assert g_b(inst, 0, 1, 1.0) == pytest.approx(0.09417199786237820, rel=1e-10)
    lo, hi = g_range(inst, 0, 1)
    assert lo == 0.0 and hi == pytest.approx(kl_div(BERN, 0.7, 0.4))


def test_g_b_degenerate_constant():
    inst = bern((0.95, 1.0), 0.1)
    target = kl_div(BERN, 0.95, 0.9)
    for x in (0.0, 0.5, 3.0, 100.0):
        # the 1e-12 endpoint shrink moves the value by ~1e-11
        assert g_b(inst, 0, 1, x) == pytest.approx(target, rel=1e-8)


def test_x_b_inverse():
    inst = bern((0.7, 0.5), 0.1)
    assert x_b(inst, 0, 1, g_b(inst, 0, 1, 1.0)) == pytest.approx(1.0, abs=1e-8)
    g = BanditInstance(GAUSS, (1.0, 0.0), 0.0)
    assert x_b(g, 0, 1, 0.25) == pytest.approx(1.0, abs=1e-12)
    assert x_b(inst, 0, 1, 1e-14) < 1e-6
    assert x_b(inst, 0, 1, 0.0) == 0.0
    with pytest.raises(ValueError):
        x_b(inst, 0, 1, g_range(inst, 0, 1)[1] + 0.01)
    with pytest.raises(ValueError):
        x_b(inst, 0, 1, -0.1)
    ys = np.linspace(0, 0.99 * g_range(inst, 0, 1)[1], 60)
    xs = [x_b(inst, 0, 1, y) for y in ys]
    assert all(b > a for a, b in zip(xs, xs[1:]))


# --- per-candidate solves --------------------------------------------------------------

def test_two_arm_gaussian_weights():
    sol = solve_weights_for_arm(BanditInstance(GAUSS, (1.0, 0.0), 0.0), 0)
    assert sol.t_star == pytest.approx(8.0, rel=1e-12)
    np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-12)


def test_mu2_weights_for_best_arm():
    sol = solve_weights_for_arm(bern(MU2, 0.15), 5)
    np.testing.assert_allclose(sol.weights, W_MU2, atol=0.01)
    assert sol.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert sol.t_star == pytest.approx(1.0 / (sol.weights[5] * sol.y_star), rel=1e-10)


def test_degenerate_indicator():
    inst = bern((0.95, 1.0, 0.5), 0.1)
    sol = solve_weights_for_arm(inst, 0)
    np.testing.assert_array_equal(sol.weights, [1.0, 0.0, 0.0])
    assert sol.t_star == pytest.approx(1.0 / kl_div(BERN, 0.95, 0.9), rel=1e-12)
    assert sol.status == kernels.INDICATOR


def test_not_candidate_rejected():
    with pytest.raises(ValueError):
        solve_weights_for_arm(bern((0.5, 0.6, 0.8), 0.05), 0)
    # mu_b = mu_a + eps: a is not a candidate
    with pytest.raises(ValueError):
        solve_weights_for_arm(bern((0.5, 0.6), 0.1), 0)


# --- characteristic time -----------------------------------------------------------------

def test_benchmark_instances():
    for means, eps, ref, tol in ((MU1, 0.1, 97, 3), (MU2, 0.15, 108, 3), (MU3, 0.1, 531, 15)):
        sol = characteristic_time(bern(means, eps))
        assert abs(sol.t_star * math.log(10) - ref) <= tol
    sol = characteristic_time(bern(MU3, 0.1))
    assert not sol.regular
    assert sol.optimal_arms == [4, 5]
    assert sol.chosen == 4
    assert len(sol.w_star_set) == 2
    np.testing.assert_allclose(sol.w_star_set[0], W_MU3_A4, atol=0.01)
    swapped = list(W_MU3_A4)
    swapped[4], swapped[5] = swapped[5], swapped[4]
    np.testing.assert_allclose(sol.w_star_set[1], swapped, atol=0.01)


def test_frozen_characteristic_times():
    # pinned after agreement with the grid objective at the solver weights
    assert characteristic_time(bern(MU1, 0.1)).t_star == pytest.approx(42.099867435415, rel=1e-9)
    assert characteristic_time(bern(MU2, 0.15)).t_star == pytest.approx(46.809139967890, rel=1e-9)
    assert characteristic_time(bern(MU3, 0.1)).t_star == pytest.approx(230.657228250331, rel=1e-9)


def test_solution_invariants():
    sol = characteristic_time(bern(MU2, 0.15))
    assert sol.regular
    assert sol.t_star == min(c.t_star for c in sol.per_candidate)
    for c in sol.per_candidate:
        assert np.all(c.weights >= 0) and abs(c.weights.sum() - 1) <= 1e-9
    d = sol.to_dict()
    assert d["regular"] is True and d["chosen"] == 5


def test_eps_zero_tie_is_infinite():
    sol = characteristic_time(bern((0.3, 0.6, 0.6), 0.0))
    assert sol.t_star == math.inf
    np.testing.assert_allclose(sol.weights, [0, 0.5, 0.5])
    assert sol.uniform_fallback


def test_gaussian_reduction_example():
    inst = BanditInstance(GAUSS, (0.0, 0.7, 1.0, 0.4), 0.2)
    shifted = inst.with_means((-0.2, 0.5, 1.0, 0.2), eps=0.0)
    assert characteristic_time(inst).t_star == pytest.approx(characteristic_time(shifted).t_star, rel=1e-9)


def test_two_arm_closed_form():
    inst = BanditInstance(GAUSS, (1.0, 0.0), 0.5)
    t, (m12, m21) = two_arm(inst)
    assert t == pytest.approx(8 / 1.5 ** 2, rel=1e-12)
    assert t == pytest.approx(characteristic_time(inst).t_star, rel=1e-9)
    assert m12 == pytest.approx((1.0 + 0.0 - 0.5) / 2, abs=1e-12)
    assert m21 is None
    eq = BanditInstance(BERN, (0.4, 0.4), 0.1)
    t, (m12, m21) = two_arm(eq)
    assert kl_div(BERN, 0.4, m12) == pytest.approx(kl_div(BERN, 0.4, m21), rel=1e-9)
    assert t == pytest.approx(characteristic_time(eq).t_star, rel=1e-7)
    with pytest.raises(ValueError):
        two_arm(bern(MU1, 0.1))


def test_two_arm_bernoulli_matches_solver():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = rng.uniform(0.05, 0.95, 2)
        eps = rng.uniform(0.0, 0.2)
        inst = bern(m, eps)
        assert two_arm(inst)[0] == pytest.approx(characteristic_time(inst).t_star, rel=1e-7)


def test_brute_force_examples():
    bf = brute_force_T(BanditInstance(GAUSS, (1.0, 0.0), 0.0), weight_step=0.005)
    assert bf.t_star == pytest.approx(8.0, rel=1e-3)
    assert not bf.coarse
    assert brute_force_T(BanditInstance(GAUSS, (1.0, 0.0), 0.0), weight_step=0.05, lambda_points=101).coarse
    with pytest.raises(ValueError):
        brute_force_T(bern(MU1, 0.1))
    base = (0.3, 0.5, 0.6)
    ts = [brute_force_T(bern(base, e), weight_step=0.01).t_star for e in (0.0, 0.05, 0.1)]
    assert ts[0] >= ts[1] >= ts[2]


def test_grid_objective_matches_solver():
    for means, eps in ((MU1, 0.1), (MU2, 0.15)):
        inst = bern(means, eps)
        sol = characteristic_time(inst)
        assert 1 / grid_objective(inst, sol.weights) == pytest.approx(sol.t_star, rel=1e-7)


def test_lower_bound_general():
    inst = bern(MU1, 0.1)
    t = characteristic_time(inst).t_star
    assert len(inst.eps_optimal()) == 1
    assert lower_bound_general(inst, 0.1) == pytest.approx(t * (0.9 * math.log(10) - math.log(2)))
    d = 1e-6
    assert lower_bound_general(inst, d) / math.log(1 / d) == pytest.approx(t * (1 - d), rel=0.06)
    inst3 = bern(MU3, 0.1)
    assert inst3.eps_optimal() == [3, 4, 5]
    t3 = characteristic_time(inst3).t_star
    assert lower_bound_general(inst3, 1e-3) == pytest.approx(t3 * (0.999 / 3 * math.log(1e3) - math.log(2)))
    assert lower_bound_general(inst3, 0.1) == 0.0
    with pytest.raises(ValueError):
        lower_bound_general(inst, 1.0)


# --- structure properties --------------------------------------------------------------------

@st.composite
def bern_instances(draw, k_min=3, k_max=6):
    k = draw(st.integers(k_min, k_max))
    means = draw(st.lists(st.floats(0.02, 0.98), min_size=k, max_size=k))
    eps = draw(st.floats(0.0, 0.15))
    return bern(means, eps)


def ratio_sum(inst, a, y):
    mu = inst.means
    total = 0.0
    for b in range(inst.n_arms):
        if b == a:
            continue
        num, den = pair_divergences(inst, a, b, x_b(inst, a, b, y))
        total += num / den
    return total


@settings(max_examples=60, deadline=None)
@given(bern_instances())
def test_equalization_and_ratio_sum(inst):
    sol = characteristic_time(inst)
    for c in sol.per_candidate:
        if c.status != kernels.OK:
            continue
        for b in range(inst.n_arms):
            if b != c.arm:
                xb = c.weights[b] / c.weights[c.arm]
                assert abs(g_b(inst, c.arm, b, xb) - c.y_star) <= 1e-8
        assert abs(ratio_sum(inst, c.arm, c.y_star) - 1.0) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(bern_instances(2, 4))
def test_monotone_maps(inst):
    for a in inst.candidates():
        ranges = [g_range(inst, a, b) for b in range(inst.n_arms) if b != a]
        ys_lo, ys_hi = max(r[0] for r in ranges), min(r[1] for r in ranges)
        for b in range(inst.n_arms):
            if b == a:
                continue
            xs = np.geomspace(1e-3, 1e3, 40)
            lam = [lambda_b(inst, a, b, x) for x in xs]
            g = [g_b(inst, a, b, x) for x in xs]
            assert all(l2 <= l1 + 1e-13 for l1, l2 in zip(lam, lam[1:]))
            assert all(g2 >= g1 - 1e-13 for g1, g2 in zip(g, g[1:]))
            if lam[0] - lam[-1] > 1e-6:
                assert g[-1] > g[0]
        if inst.n_arms > 2:
            ys = np.linspace(ys_lo, ys_lo + (ys_hi - ys_lo) * (1 - 1e-6), 25)[1:]
            # keep weight ratios below 1e6; beyond that the maps are flat to double precision
            ys = [y for y in ys if max(x_b(inst, a, b, y) for b in range(inst.n_arms) if b != a) < 1e6]
            f = [ratio_sum(inst, a, y) for y in ys]
            assert all(f2 >= f1 - 1e-12 for f1, f2 in zip(f, f[1:]))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.0, 0.2), st.floats(0.01, 10), st.floats(0.01, 10))
def test_restricted_infimum_equals_full_range(mu_a, mu_b, eps, w_a, w_b):
    if mu_a < mu_b - eps:
        mu_a, mu_b = mu_b, mu_a
    restricted = kernels.pair_value(BERN.code, 1.0, mu_a, mu_b, eps, w_a, w_b)

    def f(l):
        return w_a * kernels.kl(1, 1.0, mu_a, l) + w_b * kernels.kl(1, 1.0, mu_b, l + eps)

    full = minimize_scalar(f, bounds=(1e-12, 1 - eps - 1e-12), method="bounded",
                           options={"xatol": 1e-13}).fun
    assert abs(restricted - full) <= 1e-8
    assert restricted <= full + 1e-12


def test_gaussian_sandwich_and_permutation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        k = int(rng.integers(2, 7))
        mu = rng.normal(0, 1, k)
        eps = rng.uniform(0, 0.5)
        inst = BanditInstance(Family.gaussian(rng.uniform(0.5, 2)), tuple(mu), eps)
        t = characteristic_time(inst).t_star
        best = int(np.argmax(mu))
        terms = [2 * inst.family.sigma2 / (mu[best] + eps - mu[a]) ** 2 for a in range(k) if a != best]
        s = sum(terms)
        assert t >= s * (1 - 1e-9)
        # upper side holds once the best arm's own term (smallest gap) is counted
        full = s + max(terms)
        assert full * (1 - 1e-9) <= t <= 2 * full * (1 + 1e-9)
    inst = bern((0.3, 0.5, 0.6, 0.62), 0.05)
    base = characteristic_time(inst)
    for perm in list(permutations(range(4)))[:8]:
        p = characteristic_time(inst.with_means([inst.means[i] for i in perm]))
        assert p.t_star == pytest.approx(base.t_star, rel=1e-10)
        assert sorted(perm[a] for a in p.optimal_arms) == base.optimal_arms

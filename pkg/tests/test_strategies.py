import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epsbai.families import Family, kl_div
from epsbai.harness import run_replication
from epsbai.oracle import BanditInstance, characteristic_time
from epsbai.strategies import (KLLUCB, KLRacing, UGapE, EpsTrackAndStop, FixedWeights, StrategyState,
                               baseline_step, forced_arm, glrt_value, kl_confidence_bounds, oracle_weights,
                               parse_strategy, pglrt_check, tracking_next_arm, z_stat)
from epsbai.thresholds import ThresholdSpec

BERN = Family.bernoulli()
GAUSS = Family.gaussian(1.0)


def state(fam, counts, means, eps=0.0):
    return StrategyState.from_counts(fam, counts, means, eps)


def test_state_bookkeeping():
    s = StrategyState(BERN, 3, 0.1)
    for arm, x in [(0, 1.0), (1, 0.0), (2, 1.0), (0, 0.0)]:
        s.update(arm, x)
    assert s.t == 4 and s.counts.sum() == 4
    np.testing.assert_allclose(s.means(), [0.5, 0.0, 1.0])
    assert math.isnan(StrategyState(BERN, 2).means()[0])


def test_z_stat_values():
    assert z_stat(state(GAUSS, [3, 4], [0.2, 0.2]), 0, 1) == pytest.approx(0.0, abs=1e-15)
    assert z_stat(state(GAUSS, [2, 2], [1.0, 0.0], 0.5), 0, 1) == pytest.approx(1.125)
    # Bernoulli against a 1e-6 grid over the pair interval
    s = state(BERN, [7, 4], [0.6, 0.45], 0.05)
    assert z_stat(s, 0, 1) == pytest.approx(0.2056160158682389, abs=1e-6)
    with pytest.raises(ValueError):
        z_stat(state(GAUSS, [2, 2], [0.0, 1.0], 0.5), 0, 1)
    with pytest.raises(ValueError):
        z_stat(state(GAUSS, [0, 2], [0.0, 1.0]), 0, 1)


def test_z_stat_gaussian_symmetric_at_eps0():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.integers(1, 50, 2)
        m = rng.normal(0, 1, 2)
        s = state(GAUSS, n, m)
        hi, lo = (0, 1) if m[0] >= m[1] else (1, 0)
        assert z_stat(s, hi, lo) == pytest.approx(
            n[0] * n[1] / (n[0] + n[1]) * (m[0] - m[1]) ** 2 / 2, rel=1e-12)


def test_z_stat_gaussian_below_leader_uses_signed_gap():
    # mu_a below mu_b but within eps: the GLR uses mu_a - mu_b + eps
    s = state(GAUSS, [4, 4], [0.0, 0.3], 0.5)
    assert z_stat(s, 0, 1) == pytest.approx(2 * 0.2 ** 2 / 2)
    brute = min(4 * (0.0 - l) ** 2 / 2 + 4 * (0.3 - l - 0.5) ** 2 / 2 for l in np.linspace(-1, 1, 200001))
    assert z_stat(s, 0, 1) == pytest.approx(brute, abs=1e-8)


def test_pglrt_check():
    s = state(GAUSS, [20, 20], [1.0, 0.0], 0.5)
    assert glrt_value(s)[0] == pytest.approx(11.25)
    assert pglrt_check(s, 10.0) == 0
    assert pglrt_check(s, 12.0) is None
    eq = state(GAUSS, [5, 5, 5], [0.3, 0.3, 0.3])
    assert glrt_value(eq)[0] == 0.0
    assert pglrt_check(eq, 1e-9) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=3, max_size=6), st.data(), st.floats(0, 0.3))
def test_pglrt_recommends_inside_empirical_eps_set(counts, data, eps):
    k = len(counts)
    means = [data.draw(st.integers(0, n)) / n for n in counts]
    s = state(BERN, counts, means, eps)
    value, arm = glrt_value(s)
    top = max(means)
    assert means[arm] >= top - eps
    assert pglrt_check(s, value - 1e-9) == arm


def test_forced_exploration_and_tracking():
    s = state(BERN, [1, 5, 5, 5], [0.5] * 4)
    assert forced_arm(s) == 0
    assert tracking_next_arm(s, np.full(4, 0.25)) == (0, False)
    s = state(BERN, [5, 5], [0.6, 0.4])
    assert forced_arm(s) is None
    assert tracking_next_arm(s, np.array([0.6, 0.4])) == (0, False)
    assert tracking_next_arm(s, lambda st_: np.array([0.4, 0.6])) == (1, False)
    # all scores tied
    s = state(BERN, [3, 3, 3], [0.2, 0.5, 0.7])
    assert tracking_next_arm(s, np.full(3, 1 / 3)) == (0, False)


def test_tracking_uses_oracle_weights():
    means = [0.2, 0.4, 0.5, 0.55, 0.7]
    s = state(BERN, [40, 40, 40, 40, 40], means, 0.1)
    w, status = oracle_weights(s)
    ref = characteristic_time(BanditInstance(BERN, tuple(means), 0.1)).weights
    np.testing.assert_allclose(w, ref, rtol=1e-12)
    assert status == 0
    arm, fb = tracking_next_arm(s)
    assert arm == int(np.argmax(200 * ref - 40)) and not fb
    # tie at the top with eps = 0: uniform over the empirical best arms
    tie = state(BERN, [10, 10, 10], [0.3, 0.6, 0.6])
    w, status = oracle_weights(tie)
    assert status == 1
    np.testing.assert_allclose(w, [0, 0.5, 0.5])


def test_kl_confidence_bounds():
    s = state(BERN, [10, 1], [0.5, 0.5])
    assert kl_confidence_bounds(s, 0, 0.0) == (0.5, 0.5)
    lo, hi = kl_confidence_bounds(s, 0, 1.0)
    assert hi == pytest.approx(0.7128786314558240, abs=1e-12)
    assert lo == pytest.approx(0.2871213685441760, abs=1e-12)
    assert 10 * kl_div(BERN, 0.5, hi) == pytest.approx(1.0, abs=1e-9)
    g = state(Family.gaussian(2.0), [8, 1], [0.3, 0.0])
    lo, hi = kl_confidence_bounds(g, 0, 3.0)
    assert hi == pytest.approx(0.3 + math.sqrt(2 * 2.0 * 3.0 / 8))
    assert lo == pytest.approx(0.3 - math.sqrt(2 * 2.0 * 3.0 / 8))
    edge = state(BERN, [5, 5], [1.0, 0.0])
    assert kl_confidence_bounds(edge, 0, 2.0)[1] == 1.0
    assert kl_confidence_bounds(edge, 1, 2.0)[0] == 0.0
    # 5 kl(1, q) = 50 at q = e^-10
    assert kl_confidence_bounds(edge, 0, 50.0)[0] == pytest.approx(math.exp(-10), rel=1e-9)


def test_baselines_stop_on_disjoint_intervals():
    s = state(BERN, [400, 400, 400], [0.9, 0.2, 0.1], 0.05)
    for kind in ("kl-lucb", "ugape", "kl-racing"):
        dec = baseline_step(kind, s, 3.0)
        assert dec.stop and dec.recommendation == 0


def test_baselines_keep_sampling_when_uncertain():
    s = state(BERN, [3, 3, 3], [0.6, 0.5, 0.4], 0.05)
    assert baseline_step("kl-lucb", s, 3.0).arms == (0, 1)
    dec = baseline_step("ugape", s, 3.0)
    assert not dec.stop and len(dec.arms) == 1
    assert baseline_step("kl-racing", s, 3.0).arms == (0, 1, 2)
    assert baseline_step("kl-lucb", s, 3.0, eps=10.0).stop


def test_racing_eliminates():
    s = state(BERN, [300, 300, 300], [0.8, 0.75, 0.1], 0.0)
    r = KLRacing()
    r.start(s)
    dec = r.decide(s, 2.0)
    assert not dec.stop
    assert dec.arms == (0, 1)
    assert list(r.active) == [True, True, False]


def test_identical_gaussian_arms_stop_when_intervals_shrink():
    eps, beta = 0.2, 2.0
    # each half-width sqrt(2 beta / N) below eps / 2 needs N > 8 beta / eps^2 = 400
    for n, expect in ((390, False), (410, True)):
        s = state(GAUSS, [n, n], [0.0, 0.0], eps)
        assert baseline_step("kl-lucb", s, beta).stop is expect
        assert baseline_step("ugape", s, beta).stop is expect


def test_parse_strategy():
    assert isinstance(parse_strategy("eps-tas"), EpsTrackAndStop)
    assert parse_strategy("eps-tas:0").eps == 0.0
    assert isinstance(parse_strategy("kl-lucb"), KLLUCB)
    assert isinstance(parse_strategy("UGapE"), UGapE)
    assert isinstance(parse_strategy("kl-racing"), KLRacing)
    f = parse_strategy("fixed:0.25,0.75")
    assert isinstance(f, FixedWeights) and f.describe() == "fixed:0.25,0.75"
    for bad in ("fixed:0.5,0.6", "fixed:", "kl-lucb:3", "thompson", "eps-tas:-1"):
        with pytest.raises(ValueError):
            parse_strategy(bad)


INST = BanditInstance(BERN, (0.2, 0.4, 0.5, 0.55, 0.7), 0.1)
THR = ThresholdSpec("practical", 0.1, 5)


class Recorder(EpsTrackAndStop):
    def __init__(self):
        super().__init__()
        self.trace = []

    def decide(self, state, beta_value):
        self.trace.append(state.counts.copy())
        return super().decide(state, beta_value)


@pytest.mark.parametrize("strategy", ["eps-tas", "kl-lucb", "ugape", "kl-racing", "fixed:0.2,0.2,0.2,0.2,0.2"])
def test_counts_sum_to_t(strategy):
    r = run_replication(INST, strategy, THR, seed=3, cap=100000)
    assert r.proportions.sum() == pytest.approx(1.0, abs=1e-12)
    assert not r.capped


def test_forced_exploration_guarantee_on_trace():
    rec = Recorder()
    run_replication(INST, rec, THR, seed=5, cap=100000)
    k = INST.n_arms
    for counts in rec.trace:
        t = counts.sum()
        assert np.all(counts >= math.sqrt(t) - k / 2 - 1)


def test_proportions_drift_towards_optimal_weights():
    w = characteristic_time(INST).weights
    closer = 0
    for seed in range(20):
        rec = Recorder()
        run_replication(INST, rec, THR, seed=seed, cap=100000)
        start = np.abs(rec.trace[0] / rec.trace[0].sum() - w).sum()
        end = np.abs(rec.trace[-1] / rec.trace[-1].sum() - w).sum()
        closer += end < start
    assert closer >= 16

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from scenebench.stats.posthoc import cluster_groups, tukey_kramer


def test_equal_means_nothing_significant():
    ph = tukey_kramer([0.4] * 5, [20] * 5, 0.01, 80)
    assert not ph.significant.any()
    assert cluster_groups(ph).groups == (("0", "1", "2", "3", "4"),)


@pytest.mark.parametrize("seed", range(20))
def test_two_groups_match_t_test(seed):
    r = np.random.default_rng(seed)
    a = r.normal(0.0, 1.0, int(r.integers(4, 15)))
    b = r.normal(r.uniform(-1.5, 1.5), 1.0, int(r.integers(4, 15)))
    df = a.size + b.size - 2
    mse = (np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)) / df
    ph = tukey_kramer([a.mean(), b.mean()], [a.size, b.size], mse, df)
    t = stats.ttest_ind(a, b)
    assert ph.q_stat[0, 1] == pytest.approx(np.sqrt(2) * abs(t.statistic), rel=1e-12)
    assert ph.is_significant("0", "1") == (t.pvalue < 0.05)


def test_permutation_equivariance(rng):
    means = rng.uniform(0, 1, 6)
    ns = rng.integers(5, 20, 6)
    names = [f"s{i}" for i in range(6)]
    a = tukey_kramer(means, ns, 0.02, 60, systems=names)
    perm = rng.permutation(6)
    b = tukey_kramer(means[perm], ns[perm], 0.02, 60, systems=[names[i] for i in perm])
    for x in names:
        for y in names:
            assert a.is_significant(x, y) == b.is_significant(x, y)


@settings(max_examples=80)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(0.1, 10))
def test_affine_invariance(seed, shift, scale):
    r = np.random.default_rng(seed)
    means = r.uniform(0, 1, 5)
    a = tukey_kramer(means, [10] * 5, 0.03, 45)
    b = tukey_kramer(means * scale + shift, [10] * 5, 0.03 * scale * scale, 45)
    assert np.allclose(a.q_stat, b.q_stat, rtol=1e-9)
    near = np.isclose(a.q_stat, a.q_crit, rtol=1e-8)
    assert np.array_equal(a.significant[~near], b.significant[~near])


def test_input_validation():
    with pytest.raises(ValueError):
        tukey_kramer([1, 2], [3, 3], 0.0, 4)
    with pytest.raises(ValueError):
        tukey_kramer([1, 2], [3, 3], 1.0, 0)
    with pytest.raises(ValueError):
        tukey_kramer([1, 2], [3, 0], 1.0, 4)
    with pytest.raises(ValueError):
        tukey_kramer([1, 2], [3], 1.0, 4)


def test_all_pairs_significant():
    ph = tukey_kramer([0.9, 0.6, 0.3, 0.0], [50] * 4, 0.001, 150)
    grp = cluster_groups(ph)
    assert grp.sizes() == [1, 1, 1, 1]
    assert [g[0] for g in grp.groups] == ["0", "1", "2", "3"]


def test_four_blocks():
    # blocks of near-equal performers, far apart from each other
    block_means = [0.71, 0.36, 0.21, 0.02]
    sizes = [4, 3, 3, 1]
    means, names = [], []
    for bi, (m, size) in enumerate(zip(block_means, sizes)):
        for j in range(size):
            means.append(m + 0.001 * j)
            names.append(f"b{bi}_{j}")
    ph = tukey_kramer(means, [54] * len(means), 0.005, 530, systems=names)
    grp = cluster_groups(ph)
    assert grp.sizes() == [4, 3, 3, 1]
    assert [sorted(g) for g in grp.groups] == [sorted(n for n in names if n.startswith(f"b{i}_")) for i in range(4)]
    assert grp.group_means[0] == pytest.approx(0.7115)


def test_overlapping_groups():
    # b sits between a and c: neither a-b nor b-c differ but a-c does
    ph = tukey_kramer([1.0, 0.8, 0.6], [10] * 3, 0.05, 27, systems=["a", "b", "c"])
    assert ph.is_significant("a", "c") and not ph.is_significant("a", "b") and not ph.is_significant("b", "c")
    assert cluster_groups(ph).groups == (("a", "b"), ("b", "c"))


@settings(max_examples=150)
@given(st.integers(0, 2**32 - 1), st.integers(2, 11))
def test_group_properties(seed, k):
    r = np.random.default_rng(seed)
    means = r.uniform(0, 1, k)
    ph = tukey_kramer(means, r.integers(3, 30, k), float(r.uniform(0.01, 0.5)), 100)
    grp = cluster_groups(ph)
    covered = set()
    order = sorted(range(k), key=lambda i: -means[i])
    rank = {ph.systems[i]: pos for pos, i in enumerate(order)}
    for members in grp.groups:
        covered.update(members)
        for a in members:
            for b in members:
                assert not ph.is_significant(a, b)
        pos = sorted(rank[m] for m in members)
        assert pos == list(range(pos[0], pos[-1] + 1))
        # maximal: neither neighbour in the ranking can join
        for nb in (pos[0] - 1, pos[-1] + 1):
            if 0 <= nb < k:
                cand = ph.systems[order[nb]]
                assert any(ph.is_significant(cand, m) for m in members)
    assert covered == set(ph.systems)
    assert list(grp.group_means) == sorted(grp.group_means, reverse=True)

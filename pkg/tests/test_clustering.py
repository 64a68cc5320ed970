import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from cilm.clustering import (DpmmState, draw_centroid, draw_concentration, draw_sticks,
                             draw_theta, dpmm_gibbs, extract_assignment, hurdle_nb_logpmf,
                             kmeans, sample_hurdle_nb, standardize, stick_weights,
                             within_cluster_ss)
from cilm.core import EpidemicRecord, Population, ValidationError
from cilm.simulate import generate_population, scenario


def _pts(rows):
    return Population(np.array(rows, dtype=float))


# ------------------------------------------------------------------ K-means

def test_kmeans_separable_pair():
    pop = _pts([[0, 0], [0, 1], [10, 10], [10, 11]])
    cl = kmeans(pop, 2, np.random.default_rng(0))
    got = sorted(map(tuple, cl.centroids.round(12)))
    assert got == [(0.0, 0.5), (10.0, 10.5)]


def test_kmeans_single_cluster_is_mean():
    pop = Population(np.random.default_rng(1).uniform(0, 5, (20, 2)))
    cl = kmeans(pop, 1, np.random.default_rng(0))
    assert np.allclose(cl.centroids[0], pop.coords.mean(axis=0))


def test_kmeans_k_equals_n():
    pop = Population(np.random.default_rng(2).uniform(0, 5, (8, 2)))
    cl = kmeans(pop, 8, np.random.default_rng(0))
    assert cl.K == 8 and within_cluster_ss(pop, cl) == 0.0


def test_kmeans_ten_clusters_nonempty():
    pop, _ = generate_population(scenario("low3"), 100, np.random.default_rng(3))
    cl = kmeans(pop, 10, np.random.default_rng(4))
    assert np.all(np.bincount(cl.membership, minlength=10) > 0)


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(ValidationError):
        kmeans(_pts([[0, 0], [1, 1]]), 3, np.random.default_rng(0))


# ------------------------------------------------------------ standardizing

def test_standardize_maps_ranges():
    pop = _pts([[0, 5], [30, 1], [60, 9]])
    rec = EpidemicRecord((None, 0, 7), (None, None, None), 30)
    d = standardize(pop, rec)
    assert d.x.tolist() == [0.0, 15.0, 30.0]
    assert d.y.min() == 0.0 and d.y.max() == 30.0
    assert d.t.tolist() == [0, 1, 7]
    ox, oy = d.to_original(d.x, d.y)
    assert np.allclose(ox, pop.x) and np.allclose(oy, pop.y)


def test_standardize_rejects_degenerate_range():
    with pytest.raises(ValidationError):
        standardize(_pts([[1, 0], [1, 5]]), t_max=10)


# --------------------------------------------------------------- hurdle NB

def test_hurdle_examples():
    assert hurdle_nb_logpmf(0, 0.3, 2.0, 1.0) == pytest.approx(math.log(0.3), abs=1e-15)
    assert hurdle_nb_logpmf(1, 0.5, 2.0, 1.0) == pytest.approx(math.log(1 / 6), abs=1e-14)


@pytest.mark.parametrize("bad", [(0.0, 2.0, 1.0), (1.0, 2.0, 1.0), (0.5, 0.0, 1.0),
                                 (0.5, 2.0, -1.0)])
def test_hurdle_domain(bad):
    with pytest.raises(ValidationError):
        hurdle_nb_logpmf(1, *bad)


@given(st.floats(0.05, 0.95), st.floats(0.5, 20), st.floats(0.3, 8))
def test_hurdle_normalizes(theta, mu, phi):
    total = np.exp(hurdle_nb_logpmf(np.arange(0, 4000), theta, mu, phi)).sum()
    assert total == pytest.approx(1.0, abs=1e-6)


def test_hurdle_sampler_matches_pmf():
    rng = np.random.default_rng(5)
    draws = sample_hurdle_nb(0.4, 3.0, 2.0, rng, size=50_000)
    freq = np.bincount(draws, minlength=6)[:6] / draws.size
    pmf = np.exp(hurdle_nb_logpmf(np.arange(6), 0.4, 3.0, 2.0))
    assert np.all(np.abs(freq - pmf) < 4 * np.sqrt(pmf * (1 - pmf) / draws.size))


# ----------------------------------------------------------- stick-breaking

def test_stick_example():
    assert np.allclose(stick_weights(np.array([0.5, 0.4, 1.0])), [0.5, 0.2, 0.3], atol=1e-15)


@given(st.lists(st.floats(0.0, 0.999), min_size=1, max_size=40))
def test_sticks_sum_to_one(u):
    pi = stick_weights(np.array(u + [1.0]))
    assert abs(pi.sum() - 1.0) <= 1e-12 and np.all(pi >= 0)


# ------------------------------------------------------ conjugate updates

N_DRAWS = 10_000


def _within_3se(draws, mean, var):
    n = draws.size
    se_mean = math.sqrt(var / n)
    m4 = np.mean((draws - draws.mean()) ** 4)
    se_var = math.sqrt(max(m4 - draws.var() ** 2, 1e-300) / n)
    return abs(draws.mean() - mean) < 3 * se_mean and abs(draws.var(ddof=1) - var) < 3 * se_var


def test_centroid_draw_example():
    rng = np.random.default_rng(0)
    xs = np.array([1.0, 3.0])
    d = np.array([draw_centroid(xs.mean(), 1.0, 2, rng) for _ in range(N_DRAWS)])
    assert _within_3se(d, 2.0, 0.5)


def test_theta_draw_moments():
    rng = np.random.default_rng(1)
    d = draw_theta(np.full(N_DRAWS, 4), np.full(N_DRAWS, 7), rng)
    a, b = 6, 9
    assert _within_3se(d, a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1)))


def test_stick_draw_moments():
    rng = np.random.default_rng(2)
    counts = np.array([5, 3, 0, 2])
    d = np.stack([draw_sticks(counts, 1.5, rng) for _ in range(N_DRAWS)])
    assert np.all(d[:, -1] == 1.0)
    for m, (a, b) in enumerate([(6, 6.5), (4, 3.5), (1, 3.5)]):
        assert _within_3se(d[:, m], a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1)))


def test_concentration_example():
    M = 30
    U = np.full(M, 1 - math.exp(-10 / (M - 1)))
    U[-1] = 1.0
    rng = np.random.default_rng(3)
    d = np.array([draw_concentration(U, rng) for _ in range(N_DRAWS)])
    assert _within_3se(d, 30 / 12, 30 / 144)


# ----------------------------------------------------------------- DPMM

def _state(g, M=4):
    z = np.zeros(M)
    return DpmmState(np.asarray(g), z + 5.0, z + 5.0, z + 1.0, z + 0.5, 1.0, 1.0, 1.0,
                     np.r_[np.full(M - 1, 0.5), 1.0], z + 0.25, 1.0, (0.0, 10.0))


def test_extract_constant_chain():
    pop = _pts([[0, 0], [1, 1], [9, 9]])
    cl = extract_assignment([_state([2, 2, 0])] * 5, pop)
    assert cl.membership.tolist() == [1, 1, 0]


def test_extract_single_label_compacts():
    pop = _pts([[0, 0], [1, 1], [9, 9]])
    cl = extract_assignment([_state([3, 3, 3])] * 4, pop)
    assert cl.K == 1 and cl.membership.tolist() == [0, 0, 0]


def test_extract_empty_chain():
    with pytest.raises(ValidationError):
        extract_assignment([], _pts([[0, 0], [1, 1]]))


def _blobs(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal([5, 5], 1.0, (40, 2))
    b = rng.normal([25, 25], 1.0, (40, 2))
    return Population(np.vstack([a, b])), np.array([[5.0, 5.0], [25.0, 25.0]])


def test_two_blobs_recovered_on_most_seeds():
    ok = 0
    for seed in range(10):
        pop, truth = _blobs(seed)
        data = standardize(pop, t_max=30)
        chain = dpmm_gibbs(data, iters=2000, rng=np.random.default_rng(100 + seed),
                           spatial_only=True)
        cl = extract_assignment(chain, pop, data)
        if cl.K == 2:
            got = cl.centroids[np.argsort(cl.centroids[:, 0])]
            ok += bool(np.all(np.hypot(*(got - truth).T) < 1.0))
    assert ok >= 9


def test_spatiotemporal_dpmm_runs_and_is_deterministic():
    pop, _ = _blobs(0)
    rec = EpidemicRecord(tuple([1] * 40 + [12] * 40), (None,) * 80, 30)
    data = standardize(pop, rec)
    runs = [extract_assignment(dpmm_gibbs(data, iters=200, rng=np.random.default_rng(7)), pop,
                               data) for _ in range(2)]
    assert runs[0].membership.tolist() == runs[1].membership.tolist()
    assert runs[0].K == 2


def test_dpmm_weights_valid_along_chain():
    pop, _ = _blobs(1)
    data = standardize(pop, t_max=30)
    for s in dpmm_gibbs(data, M=10, iters=60, rng=np.random.default_rng(0), spatial_only=True):
        assert abs(s.pi.sum() - 1) < 1e-12 and s.U[-1] == 1.0
        assert s.g.min() >= 0 and s.g.max() < 10 and s.gamma_dp > 0


def test_prior_only_sticks_follow_stick_breaking_prior():
    # With no data the stick draws reduce to Beta(1, gamma)
    rng = np.random.default_rng(11)
    d = np.array([draw_sticks(np.zeros(3), 2.0, rng)[0] for _ in range(N_DRAWS)])
    assert stats.kstest(d, stats.beta(1, 2).cdf).pvalue > 1e-3

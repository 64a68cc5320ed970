import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cilm.core import (NEVER, SEIR, SIR, ModelParams, Population, ValidationError,
                       build_timeline, pairwise_distances)
from cilm.kernel import ClusterAssignment, ModelSpec, Spark, infection_probability
from cilm.simulate import (SCENARIOS, SimConfig, even_split, generate_population,
                           run_from_state, scenario, simulate_epidemic, simulate_seir)


def test_seven_scenarios():
    assert list(SCENARIOS) == ["csr", "low3", "low5", "low8", "high3", "high5", "high8"]
    assert scenario("high5").variance == 8.0 and scenario("low8").k == 8
    with pytest.raises(ValidationError):
        scenario("medium3")


def test_even_split_labels():
    pop, labels = generate_population(scenario("low3"), 100, np.random.default_rng(0))
    assert sorted(np.bincount(labels).tolist(), reverse=True) == [34, 33, 33]
    assert even_split(10, 4).tolist() == [3, 3, 2, 2]


def test_csr_has_no_labels_and_stays_in_bounds():
    pop, labels = generate_population(scenario("csr"), 200, np.random.default_rng(1))
    assert labels is None
    assert pop.coords.min() >= 0 and pop.coords.max() <= 30


def test_clustered_spread_matches_variance():
    pop, labels = generate_population(scenario("high3"), 3000, np.random.default_rng(2))
    resid = np.concatenate([pop.coords[labels == k] - pop.coords[labels == k].mean(axis=0)
                            for k in range(3)])
    assert resid.var() == pytest.approx(8.0, rel=0.08)


def test_population_is_seed_deterministic():
    a, _ = generate_population(scenario("low5"), 50, np.random.default_rng(9))
    b, _ = generate_population(scenario("low5"), 50, np.random.default_rng(9))
    assert np.array_equal(a.coords, b.coords)


def _pop(n=60, seed=0):
    return Population(np.random.default_rng(seed).uniform(0, 10, (n, 2)))


def test_epidemic_is_seed_deterministic():
    pop = _pop()
    cfg = SimConfig(ModelParams(0.8, 2.0), n=60, t_max=20, seed=4)
    assert simulate_epidemic(pop, cfg) == simulate_epidemic(pop, cfg)


def test_zero_alpha_infects_nobody_else():
    pop = _pop()
    rec = simulate_epidemic(pop, SimConfig(ModelParams(0.0, 2.0), n=60, t_max=20,
                                           initial_count=2, seed=1))
    assert sum(v is not None for v in rec.infection_time) == 2
    assert set(v for v in rec.infection_time if v is not None) == {0}


def test_single_individual():
    pop = Population(np.array([[1.0, 1.0]]))
    rec = simulate_epidemic(pop, SimConfig(ModelParams(0.8, 2.0), n=1, t_max=31, seed=0))
    assert rec.infection_time == (0,) and rec.removal_time == (3,)


@given(st.integers(0, 2 ** 32 - 1))
def test_infectious_for_exactly_the_period(seed):
    pop = _pop(30, 5)
    rec = simulate_epidemic(pop, SimConfig(ModelParams(1.5, 1.5), n=30, t_max=25, seed=seed))
    tl = build_timeline(rec, infectious_period=3)
    for i, a in enumerate(rec.infection_time):
        if a is None:
            continue
        days = [t for t in range(26) if i in tl.I(t)]
        assert days == list(range(a, min(a + 3, 26)))


def test_simulated_record_has_finite_likelihood():
    pop = _pop()
    rec = simulate_epidemic(pop, SimConfig(ModelParams(0.8, 2.0), n=60, t_max=20, seed=2))
    spec = ModelSpec(SIR, Spark.ZERO, False, None, None, 3)
    assert np.isfinite(spec.likelihood(rec, pairwise_distances(pop), pop)(ModelParams(0.8, 2.0)))


def test_infection_frequency_matches_probability():
    pop = Population(np.array([[0.0, 0.0], [1.5, 0.0], [0.0, 2.5]]))
    spec = ModelSpec(SIR, Spark.ZERO, False, None, None, 3)
    params = ModelParams(0.6, 2.0)
    s_exit = np.array([0, NEVER, NEVER])
    i_start = np.array([0, NEVER, NEVER])
    r_start = np.array([3, NEVER, NEVER])
    dist = pairwise_distances(pop)
    rng = np.random.default_rng(12)
    reps = 100_000
    hits = 0
    for _ in range(reps):
        rec = run_from_state(pop, params, spec, s_exit, i_start, r_start, 1, 2, rng, dist)
        hits += rec.infection_time[1] is not None
    p = infection_probability(0.6 / 1.5 ** 2)
    se = math.sqrt(p * (1 - p) / reps)
    assert abs(hits / reps - p) < 3 * se


def test_seir_periods():
    pop = _pop(40, 3)
    cfg = SimConfig(ModelParams(1.0, 1.5), n=40, t_max=40, seed=3, frame=SEIR,
                    latent_period=5, infectious_period=4)
    rec = simulate_seir(pop, cfg)
    tl = build_timeline(rec, SEIR, latent_period=5, infectious_period=4)
    for i, a in enumerate(rec.infection_time):
        if a is None:
            continue
        inf_days = [t for t in range(41) if i in tl.I(t)]
        assert inf_days == [t for t in range(a + 5, a + 9) if t <= 40]


def test_seir_zero_alpha():
    pop = _pop(20)
    cfg = SimConfig(ModelParams(0.0, 1.5), n=20, t_max=30, seed=3, frame=SEIR, latent_period=5,
                    infectious_period=4)
    assert sum(v is not None for v in simulate_seir(pop, cfg).infection_time) == 1


def test_seir_with_zero_latency_reproduces_sir_trace():
    pop = _pop()
    for seed in range(5):
        sir = SimConfig(ModelParams(0.8, 2.0), n=60, t_max=20, seed=seed)
        seir = SimConfig(ModelParams(0.8, 2.0), n=60, t_max=20, seed=seed, frame=SEIR,
                         latent_period=0)
        assert simulate_epidemic(pop, sir) == simulate_seir(pop, seir)


def test_composite_zero_spark_stays_in_seed_cluster():
    coords = np.vstack([np.random.default_rng(0).uniform(0, 2, (10, 2)),
                        np.random.default_rng(1).uniform(50, 52, (10, 2))])
    pop = Population(coords)
    clusters = ClusterAssignment.from_labels(pop, [0] * 10 + [1] * 10)
    cfg = SimConfig(ModelParams(5.0, 1.0), n=20, t_max=15, seed=0, spark=Spark.ZERO,
                    composite=True, clusters=clusters)
    rec = simulate_epidemic(pop, cfg)
    seeded = next(i for i, v in enumerate(rec.infection_time) if v == 0) // 10
    other = range(10, 20) if seeded == 0 else range(10)
    assert all(rec.infection_time[i] is None for i in other)


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(ModelParams(0.8, 2.0), n=10, initial_count=11)
    with pytest.raises(ValidationError):
        SimConfig(ModelParams(0.8, 2.0), frame=SEIR)
    with pytest.raises(ValidationError):
        simulate_epidemic(_pop(5), SimConfig(ModelParams(-1.0, 2.0), n=5))

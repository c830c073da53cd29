"""Chain driver: determinism, state validity, tuning response, errors."""

import pickle

import numpy as np
import pytest

from chainutils import make_env
from poenet.graphs import PriorGraph, ReciprocalGraph
from poenet.model import ModelHyperParams, ValidationError
from poenet.sampler import (
    MoveStats,
    SamplerConfig,
    init_state,
    run_chain,
    sweep,
    validate_state,
)
from poenet.simulate import SimulationConfig, simulate_all


@pytest.fixture(scope="module")
def small_problem():
    cfg = SimulationConfig(p=4, n=8, expected_true_edges=4,
                           false_edge_count=4, seed=5)
    data, truth, g0 = simulate_all(cfg)
    return data, g0


def test_equal_seeds_give_identical_traces(small_problem):
    data, g0 = small_problem
    config = SamplerConfig(n_iter=400, burn_in=200, thin=4, seed=99)
    hyper = ModelHyperParams()
    t1, s1 = run_chain(data, g0, hyper, config)
    t2, s2 = run_chain(data, g0, hyper, config)
    assert np.array_equal(t1.edge_count, t2.edge_count)
    assert np.array_equal(t1.mu, t2.mu)
    assert np.array_equal(t1.alpha, t2.alpha)
    assert np.array_equal(t1.edge_beta, t2.edge_beta)
    assert np.array_equal(t1.counts_plus, t2.counts_plus)
    assert s1.to_dict() == s2.to_dict()


def test_different_seeds_differ(small_problem):
    data, g0 = small_problem
    hyper = ModelHyperParams()
    t1, _ = run_chain(data, g0, hyper, SamplerConfig(n_iter=200, burn_in=100,
                                                     thin=2, seed=1))
    t2, _ = run_chain(data, g0, hyper, SamplerConfig(n_iter=200, burn_in=100,
                                                     thin=2, seed=2))
    assert not np.array_equal(t1.mu, t2.mu)


def test_sweeps_preserve_state_validity(small_problem):
    data, g0 = small_problem
    hyper = ModelHyperParams()
    config = SamplerConfig(n_iter=100, burn_in=50, thin=1, seed=7)
    rng = np.random.default_rng(7)
    state = init_state(data, g0, hyper, config, rng)
    validate_state(state, data, g0, hyper)
    stats = MoveStats(g0.K)
    for _ in range(30):
        sweep(state, data, g0, hyper, config, rng, stats)
        # at sweep boundaries the latent refresh has restored full support
        validate_state(state, data, g0, hyper, check_support=True)


def test_init_modes(small_problem):
    data, g0 = small_problem
    hyper = ModelHyperParams()
    rng = np.random.default_rng(0)
    full = init_state(data, g0, hyper,
                      SamplerConfig(init_mode="prior-graph-full"), rng)
    assert full.graph.n_edges == g0.K
    assert np.array_equal(full.sem.B, np.eye(data.p))
    empty = init_state(data, g0, hyper,
                       SamplerConfig(init_mode="empty-graph"), rng)
    assert empty.graph.n_edges == 0
    rnd = init_state(data, g0, hyper, SamplerConfig(init_mode="random"), rng)
    assert 0 <= rnd.graph.n_edges <= g0.K


def test_acceptance_rate_monotone_in_proposal_scale(small_problem):
    data, g0 = small_problem
    hyper = ModelHyperParams()
    rates = []
    for c in (0.2, 4.0):
        config = SamplerConfig(n_iter=200, burn_in=100, thin=2, seed=3,
                               mh_scale=c)
        _, stats = run_chain(data, g0, hyper, config)
        prop, acc = stats.kernels["b_row"]
        rates.append(acc / prop)
    assert rates[0] > rates[1]


def test_dimension_mismatch_rejected(small_problem):
    data, _ = small_problem
    wrong = PriorGraph(ReciprocalGraph(data.p + 1, [(0, 1)]))
    with pytest.raises(ValidationError):
        run_chain(data, wrong, ModelHyperParams(), SamplerConfig(
            n_iter=10, burn_in=5, thin=1))


def test_config_validation():
    with pytest.raises(ValidationError):
        SamplerConfig(n_iter=10, burn_in=10)
    with pytest.raises(ValidationError):
        SamplerConfig(thin=0)
    with pytest.raises(ValidationError):
        SamplerConfig(init_mode="bogus")
    with pytest.raises(ValidationError):
        SamplerConfig(mh_scale=0.0)


def test_no_retained_draws_rejected(small_problem):
    data, g0 = small_problem
    with pytest.raises(ValidationError):
        run_chain(data, g0, ModelHyperParams(),
                  SamplerConfig(n_iter=10, burn_in=9, thin=5))


def test_state_is_picklable():
    env = make_env(seed=0)
    blob = pickle.dumps(env.state)
    clone = pickle.loads(blob)
    assert np.array_equal(clone.sem.B, env.state.sem.B)
    assert clone.graph.edges == env.state.graph.edges


def test_movestats_guard():
    stats = MoveStats(3)
    stats.add("x", 2, 1)
    with pytest.raises(AssertionError):
        stats.add("x", 0, 5)


def test_edge_count_trace_covers_every_sweep(small_problem):
    data, g0 = small_problem
    config = SamplerConfig(n_iter=120, burn_in=60, thin=3, seed=13)
    trace, _ = run_chain(data, g0, ModelHyperParams(), config)
    assert len(trace.edge_count) == 120
    assert trace.n_saved == 20
    assert trace.iterations[0] == 63
    assert trace.iterations[-1] == 120

import numpy as np
import pytest

from miscost.errors import BudgetExceeded
from miscost.graphs import (
    GraphInstance,
    brute_force_alpha,
    make_stream,
    sample_gnp,
)
from miscost.numerics import ModelParams
from miscost.search import (
    CostSample,
    run_exhaustive_mis,
    sample_Y,
    sample_Z,
    samples_to_csv,
    search_cost_python,
)


def complete(n):
    return GraphInstance.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def empty(n):
    return GraphInstance(n=n, adj=(0,) * n)


def test_empty_instance_cost_zero():
    assert run_exhaustive_mis(empty(0)) == (0, 0)


def test_single_vertex():
    assert run_exhaustive_mis(empty(1)) == (1, 1)


@pytest.mark.parametrize("n", range(1, 21))
def test_complete_graph_cost_one(n):
    alpha, cost = run_exhaustive_mis(complete(n))
    assert (alpha, cost) == (1, 1)


@pytest.mark.parametrize("n", range(1, 21))
def test_empty_graph_cost_doubles(n):
    alpha, cost = run_exhaustive_mis(empty(n))
    assert (alpha, cost) == (n, 2 ** (n - 1))


def test_kernel_matches_python_reference(p_half):
    for rep in range(40):
        g = sample_gnp(13, p_half, make_stream(11, rep))
        assert run_exhaustive_mis(g) == search_cost_python(g)


@pytest.mark.parametrize("p_str", ["1/4", "1/2", "3/4"])
@pytest.mark.parametrize("n", [8, 12, 15])
def test_alpha_agrees_with_brute_force(p_str, n):
    params = ModelParams.from_string(p_str)
    for rep in range(200):
        g = sample_gnp(n, params, make_stream(1001, n, rep))
        alpha, cost = run_exhaustive_mis(g)
        assert alpha == brute_force_alpha(g)
        assert cost >= 1


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        run_exhaustive_mis(empty(21), budget=1000)
    with pytest.raises(BudgetExceeded):
        search_cost_python(empty(21), budget=1000)


def test_sample_Y_base_cases(p_half):
    stream = make_stream(2, 0)
    assert sample_Y(0, p_half, stream) == 0
    assert sample_Y(1, p_half, stream) == 1


def test_sample_Y_two_vertices_distribution():
    # Y_2 = 1 w.p. p, 2 w.p. q
    params = ModelParams.from_string("1/4")
    draws = [sample_Y(2, params, make_stream(3, rep)) for rep in range(4000)]
    assert set(draws) <= {1, 2}
    frac_two = sum(1 for d in draws if d == 2) / len(draws)
    # q = 3/4; binomial 4-sigma band
    assert abs(frac_two - 0.75) < 4 * (0.75 * 0.25 / 4000) ** 0.5


def test_sample_Z_base_cases():
    stream = make_stream(4, 0)
    assert sample_Z(0, stream) == 0
    assert sample_Z(1, stream) == 1


def test_sample_Z_two_vertices():
    draws = [sample_Z(2, make_stream(5, rep)) for rep in range(4000)]
    assert set(draws) <= {1, 2}
    frac_two = sum(1 for d in draws if d == 2) / len(draws)
    assert abs(frac_two - 0.5) < 4 * (0.25 / 4000) ** 0.5


def test_sample_Z_budget():
    with pytest.raises(BudgetExceeded):
        sample_Z(64, make_stream(6, 0), budget=100)


def test_sampler_determinism(p_half):
    a = [sample_Y(40, p_half, make_stream(9, rep)) for rep in range(20)]
    b = [sample_Y(40, p_half, make_stream(9, rep)) for rep in range(20)]
    assert a == b
    za = [sample_Z(30, make_stream(10, rep)) for rep in range(20)]
    zb = [sample_Z(30, make_stream(10, rep)) for rep in range(20)]
    assert za == zb


def test_cost_sample_validation():
    with pytest.raises(Exception):
        CostSample("Y", 0, 5)
    with pytest.raises(Exception):
        CostSample("Y", 3, 0)


def test_samples_to_csv_format():
    rows = [
        CostSample("X", 5, 7, alpha=3, replicate_id=0, seed=42),
        CostSample("Y", 5, 9, replicate_id=1, seed=42),
    ]
    text = samples_to_csv(rows, "1/2")
    lines = text.strip().splitlines()
    assert lines[0] == "kind,n,p,replicate,cost,alpha,seed"
    assert lines[1] == "X,5,1/2,0,7,3,42"
    assert lines[2] == "Y,5,1/2,1,9,,42"


def test_Y_expectation_is_mu(p_half):
    # E[Y_n] = mu_n: R = 4000 at n = 30, 3-stderr band
    from miscost.exact import mu_recurrence

    mu = float(mu_recurrence(30, p_half)[30])
    draws = np.array([sample_Y(30, p_half, make_stream(12, rep)) for rep in range(4000)], float)
    stderr = draws.std(ddof=1) / len(draws) ** 0.5
    assert abs(draws.mean() - mu) < 3 * stderr


def test_Z_expectation_is_nu():
    from miscost.exact import nu_recurrence

    nu = float(nu_recurrence(36)[36])
    draws = np.array([sample_Z(36, make_stream(13, rep)) for rep in range(3000)], float)
    stderr = draws.std(ddof=1) / len(draws) ** 0.5
    assert abs(draws.mean() - nu) < 3 * stderr

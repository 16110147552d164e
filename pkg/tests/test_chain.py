import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ergoseq.chain import (
    ChainSolution,
    Method,
    SolverSettings,
    deflate,
    metropolis_hastings,
    optimize_fmrmc,
    optimize_modified_upper_bound,
    optimize_upper_bound,
    slem,
    solve_chain,
)
from ergoseq.errors import Infeasible, NotApplicable, StationarityViolated
from ergoseq.graph import RegionGraph, TargetDistribution, fig2_graph
from ergoseq.linalg import spectral_norm
from oracles import grid_search_chain


def complete(n, loops=True):
    return RegionGraph.from_edges(n, undirected=[(i, j) for i in range(n) for j in range(i + 1, n)],
                                  allow_self_loops=loops)


def path3():
    return RegionGraph.from_edges(3, undirected=[(0, 1), (1, 2)], allow_self_loops=True)


def random_target(rng, n):
    return TargetDistribution.normalized(rng.random(n) + 0.05)


# Metropolis-Hastings

def test_mh_complete_uniform_doubly_stochastic():
    sol = metropolis_hastings(complete(3), TargetDistribution.uniform(3))
    assert_allclose(sol.transition.sum(axis=0), 1.0)
    assert_allclose(sol.transition.sum(axis=1), 1.0)


def test_mh_two_node_detailed_balance():
    g = RegionGraph.from_edges(2, undirected=[(0, 1)])
    w = np.array([2 / 3, 1 / 3])
    P = metropolis_hastings(g, w).transition
    assert abs(P[0, 1] * w[1] - P[1, 0] * w[0]) <= 1e-9
    assert_allclose(P @ w, w, atol=1e-12)


def test_mh_directed_rejects_one_way_moves():
    g = fig2_graph(directed=True)
    P = metropolis_hastings(g, TargetDistribution.uniform(9)).transition
    assert P[4, 1] == 0.0 and P[7, 6] == 0.0


def test_mh_without_self_loops_not_applicable():
    g = RegionGraph.from_edges(3, undirected=[(0, 1), (1, 2), (0, 2)], allow_self_loops=False)
    with pytest.raises(NotApplicable):
        metropolis_hastings(g, [0.6, 0.3, 0.1])


def test_mh_not_applicable_when_rejection_disconnects():
    g = RegionGraph.from_edges(3, directed=[(0, 1), (1, 2), (2, 0)], allow_self_loops=True)
    with pytest.raises(NotApplicable):
        metropolis_hastings(g, TargetDistribution.uniform(3))


# deflation and SLEM

def test_deflate_rank_one_chain_is_zero():
    w = np.array([0.2, 0.3, 0.5])
    assert_allclose(deflate(np.outer(w, np.ones(3)), w), 0.0, atol=1e-15)


def test_deflate_identity():
    from ergoseq.linalg import eigenvalue_moduli
    m = eigenvalue_moduli(deflate(np.eye(4), TargetDistribution.uniform(4)))
    assert_allclose(m, [1, 1, 1, 0], atol=1e-12)


def random_stochastic_with_stationary(rng, n):
    P = rng.random((n, n)) + 0.01
    P /= P.sum(axis=0, keepdims=True)
    vals, vecs = np.linalg.eig(P)
    w = np.abs(np.real(vecs[:, np.argmin(np.abs(vals - 1))]))
    return P, w / w.sum()


def test_deflate_spectrum_k4(rng):
    from ergoseq.linalg import eigenvalue_moduli
    for _ in range(20):
        P, w = random_stochastic_with_stationary(rng, 4)
        ref = np.linalg.eigvals(P)
        ref[np.argmin(np.abs(ref - 1.0))] = 0.0
        assert_allclose(eigenvalue_moduli(deflate(P, w)), np.sort(np.abs(ref))[::-1], atol=1e-7)


def test_deflate_requires_stationarity():
    P = np.array([[0.9, 0.5], [0.1, 0.5]])
    with pytest.raises(StationarityViolated):
        deflate(P, [0.5, 0.5])


def test_slem_rank_one_zero():
    w = np.array([0.1, 0.9])
    assert slem(np.outer(w, np.ones(2)), w) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_slem_two_node_closed_form(a, b):
    P = np.array([[1 - a, b], [a, 1 - b]])
    w = np.array([b, a]) / (a + b)
    assert slem(P, w) == pytest.approx(abs(1 - a - b), abs=1e-9)


def test_slem_below_deflated_norm(rng):
    for _ in range(30):
        P, w = random_stochastic_with_stationary(rng, 5)
        assert slem(P, w) <= spectral_norm(deflate(P, w)) + 1e-9


# optimizers

def test_upper_bound_complete_graph_rank_one():
    w = TargetDistribution.normalized([1, 2, 3, 4])
    sol = optimize_upper_bound(complete(4), w)
    assert sol.objective_value < 1e-4
    assert_allclose(sol.transition, np.outer(w.weights, np.ones(4)), atol=1e-4)


def test_fmrmc_complete_uniform():
    sol = optimize_fmrmc(complete(4), TargetDistribution.uniform(4))
    assert sol.slem < 1e-4
    assert_allclose(sol.transition, 0.25, atol=1e-4)


def test_modified_complete_any_w():
    sol = optimize_modified_upper_bound(complete(4), TargetDistribution.normalized([5, 1, 1, 3]))
    assert sol.slem < 1e-4


@pytest.mark.parametrize("method,similarity,reversible", [
    (optimize_upper_bound, False, False),
    (optimize_fmrmc, True, True),
    (optimize_modified_upper_bound, True, False),
])
def test_path3_matches_grid_oracle(method, similarity, reversible):
    g = path3()
    w = TargetDistribution.uniform(3)
    sol = method(g, w)
    S = g.support() & g.support().T if reversible else g.support()
    oracle = grid_search_chain(3, S, w.weights, similarity, reversible)
    assert abs(sol.objective_value - oracle) <= 1e-3


def test_fmrmc_detailed_balance(rng):
    g = fig2_graph(directed=False)
    sol = optimize_fmrmc(g, random_target(rng, 9))
    Pw = sol.transition * sol.target.weights[None, :]
    assert np.abs(Pw - Pw.T).max() <= 1e-7


def test_fmrmc_removes_one_way_edges():
    sol = optimize_fmrmc(fig2_graph(directed=True), TargetDistribution.uniform(9))
    assert sorted(sol.removed_edges) == [(1, 4), (6, 7)]
    assert sol.transition[4, 1] == 0.0 and sol.transition[7, 6] == 0.0


def test_fmrmc_infeasible_when_removal_disconnects():
    g = RegionGraph.from_edges(3, directed=[(0, 1), (1, 2), (2, 0)], allow_self_loops=True)
    with pytest.raises(Infeasible):
        optimize_fmrmc(g, TargetDistribution.uniform(3))


def test_modified_matches_fmrmc_on_undirected(rng):
    g = fig2_graph(directed=False)
    for _ in range(3):
        w = random_target(rng, 9)
        assert abs(optimize_modified_upper_bound(g, w).slem - optimize_fmrmc(g, w).slem) <= 1e-4


def test_modified_uses_one_way_edges():
    g = fig2_graph(directed=True)
    w = TargetDistribution.uniform(9)
    sol = optimize_modified_upper_bound(g, w)
    assert sol.slem <= optimize_fmrmc(g, w).slem + 1e-4


def test_subgradient_schedule_feasible_and_close():
    g = path3()
    w = TargetDistribution.normalized([1, 2, 3])
    fast = optimize_modified_upper_bound(g, w)
    slow = optimize_modified_upper_bound(g, w, SolverSettings(step_schedule="subgradient", max_iterations=5000))
    slow.check(g)
    assert slow.objective_value >= fast.objective_value - 1e-6
    assert slow.objective_value <= fast.objective_value + 1e-2


def test_unknown_schedule_rejected():
    with pytest.raises(ValueError):
        optimize_upper_bound(path3(), TargetDistribution.uniform(3), SolverSettings(step_schedule="newton"))


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(tolerance=0)


def test_solution_roundtrip(tmp_path):
    sol = optimize_modified_upper_bound(fig2_graph(directed=True), TargetDistribution.uniform(9))
    sol.save(tmp_path / "s.json")
    back = ChainSolution.load(tmp_path / "s.json")
    assert back.method is Method.MODIFIED_UPPER_BOUND
    assert_allclose(back.transition, sol.transition)
    assert back.slem == sol.slem
    back.check(fig2_graph(directed=True))


def test_solve_chain_dispatch():
    for m in Method:
        sol = solve_chain(m.value, fig2_graph(directed=False), TargetDistribution.uniform(9))
        assert sol.method is m


small_graphs = st.integers(2, 4).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.sampled_from([(i, j) for i in range(n) for j in range(i + 1, n)]), min_size=n - 1, unique=True),
    st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
))


@settings(max_examples=25)
@given(small_graphs)
def test_solutions_satisfy_invariants(case):
    n, edges, w = case
    g = RegionGraph.from_edges(n, undirected=edges, allow_self_loops=True)
    from ergoseq.graph import graph_report
    if not graph_report(g).irreducible:
        return
    w = TargetDistribution.normalized(w)
    for m in Method:
        sol = solve_chain(m, g, w)
        sol.check(g)
        if m is not Method.METROPOLIS_HASTINGS:
            assert sol.slem <= sol.objective_value + 1e-6


def test_adding_edges_never_hurts(rng):
    base = [(0, 1), (1, 2), (2, 3)]
    extra = [(0, 2), (1, 3), (0, 3)]
    for _ in range(2):
        w = random_target(rng, 4)
        prev = {}
        for k in range(len(extra) + 1):
            g = RegionGraph.from_edges(4, undirected=base + extra[:k])
            for name, fn in (("ub", optimize_upper_bound), ("mod", optimize_modified_upper_bound)):
                v = fn(g, w).objective_value
                if name in prev:
                    assert v <= prev[name] + 1e-4
                prev[name] = v


def test_cvxpy_cross_check():
    cp = pytest.importorskip("cvxpy")
    g = fig2_graph(directed=True)
    rng = np.random.default_rng(4)
    w = rng.random(9) + 0.05
    w /= w.sum()
    q = np.sqrt(w)
    S = g.support()
    P = cp.Variable((9, 9))
    cons = [P >= 0, cp.sum(P, axis=0) == 1, P @ w == w, P[~S] == 0]
    obj = cp.Minimize(cp.sigma_max(np.diag(1 / q) @ P @ np.diag(q) - np.outer(q, q)))
    val = cp.Problem(obj, cons).solve()
    ours = optimize_modified_upper_bound(g, w).objective_value
    assert abs(ours - val) <= 1e-3

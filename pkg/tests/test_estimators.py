"""Tests for the pair estimators, parameter rules, and error bounds."""

import math

import numpy as np
import pytest

from pprbench.estimators import (
    EstimatorParams,
    PROFILES,
    bidirectional_ppr,
    estimate_many_pairs,
    fwbw_mcmc_practical,
    fwbw_mcmc_single,
    optimal_parameters,
    reference_error_bounds,
    stack_sparse_columns,
)
from pprbench.graphs import Graph, exact_ppr, exact_ppr_rows, \
    basis_vector, generate_directed_er

ALPHA = 0.2
CYCLE3 = (0.2 / 0.488, 0.16 / 0.488, 0.128 / 0.488)


def make_params(**kw):
    base = dict(alpha=ALPHA, delta=0.001, eps=0.5, p_fail=0.1,
                r_max_s=0.1, r_max_t=0.01, r_tilde_max_s=0.001,
                c=10.0, seed=0)
    base.update(kw)
    return EstimatorParams(**base)


# ---------------------------------------------------------------------------
# single-pair wrappers
# ---------------------------------------------------------------------------

def test_cycle_single_estimate_close(cycle3):
    params = make_params(seed=3)
    est, _ = estimate_many_pairs(cycle3, [0], [1], params, walks=100_000)
    value = est[0, 0]
    assert abs(value - CYCLE3[1]) <= 0.02 * CYCLE3[1]


def test_disconnected_pair_is_zero():
    g = Graph([[0], [1]])  # two self-loop components
    params = make_params(seed=1)
    est = fwbw_mcmc_single(g, 0, 1, params)
    assert est.value == 0.0


def test_bidirectional_source_without_in_edges_exact():
    g = Graph([[1], [1]])  # node 0 unreachable, so pi_0(0) = alpha
    params = make_params(seed=2)
    est = bidirectional_ppr(g, 0, 0, params)
    assert est.value == ALPHA
    assert est.method == "bidir"


def test_single_wrappers_match_many(cycle3):
    params = make_params(seed=9)
    single = fwbw_mcmc_single(cycle3, 0, 1, params)
    many, _ = estimate_many_pairs(cycle3, [0], [1], params,
                                  mode="shared", variant="standard")
    assert single.value == many[0, 0]

    practical = fwbw_mcmc_practical(cycle3, 0, 1, params)
    many_p, _ = estimate_many_pairs(cycle3, [0], [1], params,
                                    mode="shared", variant="practical")
    assert practical.value == many_p[0, 0]
    assert practical.method == "fwbw"


def test_estimate_validates_inputs(cycle3):
    params = make_params()
    with pytest.raises(ValueError):
        estimate_many_pairs(cycle3, [0, 0], [1], params)
    with pytest.raises(ValueError):
        estimate_many_pairs(cycle3, [0], [5], params)
    with pytest.raises(ValueError):
        estimate_many_pairs(cycle3, [0], [1], params, mode="nope")
    with pytest.raises(ValueError):
        estimate_many_pairs(cycle3, [0], [1], params, variant="nope")
    with pytest.raises(ValueError):
        make_params(alpha=1.5).validate()


# ---------------------------------------------------------------------------
# walk budgets
# ---------------------------------------------------------------------------

def test_standard_budget_formula(cycle3):
    params = make_params(c=7.0, r_max_s=0.2, r_max_t=0.05, delta=0.01)
    _, stats = estimate_many_pairs(cycle3, [0], [1], params)
    expect = math.ceil(7.0 * 0.2 * 0.05 / 0.01)
    assert stats["walks_per_source"] == [expect]


def test_baseline_budget_ignores_forward_threshold(cycle3):
    params = make_params(c=7.0, r_max_s=0.2, r_max_t=0.05, delta=0.01)
    _, stats = estimate_many_pairs(cycle3, [0], [1], params, mode="baseline")
    expect = math.ceil(7.0 * 0.05 / 0.01)
    assert stats["walks_per_source"] == [expect]
    assert stats["merge_stats"].merge_count == 0


def test_practical_budget_scales_with_residual_norm():
    g = generate_directed_er(60, 0.1, seed=4)
    params = make_params(seed=4, c=5.0, r_max_t=0.02, delta=0.01,
                         r_tilde_max_s=0.01)
    _, stats = estimate_many_pairs(g, [0, 1, 2], [3, 4, 5], params,
                                   variant="practical")
    w_cont = 5.0 * 0.02 / 0.01
    assert stats["w"] == w_cont
    for budget, norm in zip(stats["walks_per_source"], stats["residual_norms"]):
        assert budget == math.ceil(w_cont * norm)


def test_practical_threshold_one_behaves_like_bidirectional(cycle3):
    # ratio r(s)/d(s) starts at 1, so a threshold of 1 stops immediately
    params = make_params(seed=6, r_tilde_max_s=1.0)
    _, stats = estimate_many_pairs(cycle3, [0], [1], params, variant="practical")
    assert stats["forward_iterations"] == [0]
    assert stats["residual_norms"] == [1.0]


def test_identical_sigma_sources_share_every_walk():
    # every source pushes its full mass onto the hub in one step, so all
    # sigma vectors coincide and the consolidated plan collapses to the
    # budget of a single source
    g = Graph([[3], [3], [3], [3]])  # three sources, hub with self-loop
    params = make_params(seed=11, r_max_s=0.7, c=50.0)
    _, stats = estimate_many_pairs(g, [0, 1, 2], [3, 0, 1], params)
    per = stats["walks_per_source"]
    assert per[0] == per[1] == per[2] > 1
    assert stats["plan_walks"] == per[0]


def test_shared_walks_used_at_most_sum_of_budgets():
    g = generate_directed_er(80, 0.08, seed=7)
    params = make_params(seed=7, c=40.0)
    _, stats = estimate_many_pairs(g, [0, 1, 2, 3], [9, 10, 11, 12], params)
    assert stats["plan_walks"] <= sum(stats["walks_per_source"])


# ---------------------------------------------------------------------------
# statistical behaviour
# ---------------------------------------------------------------------------

def test_estimator_is_unbiased_on_er_graph():
    g = generate_directed_er(40, 0.12, seed=13)
    exact = exact_ppr(g, basis_vector(g.n, 0), ALPHA)[7]
    values = []
    for seed in range(400):
        params = make_params(seed=seed, r_max_s=0.3, r_max_t=0.1)
        est, _ = estimate_many_pairs(g, [0], [7], params, walks=40)
        values.append(est[0, 0])
    mean = np.mean(values)
    se = np.std(values, ddof=1) / math.sqrt(len(values))
    assert abs(mean - exact) <= max(3.0 * se, 1e-12)


def test_baseline_and_shared_agree_in_expectation():
    g = generate_directed_er(40, 0.12, seed=17)
    exact = exact_ppr(g, basis_vector(g.n, 2), ALPHA)[5]
    for mode in ("shared", "baseline"):
        values = []
        for seed in range(200):
            params = make_params(seed=seed, r_max_s=0.3, r_max_t=0.1)
            est, _ = estimate_many_pairs(g, [2], [5], params,
                                         mode=mode, walks=40)
            values.append(est[0, 0])
        mean = np.mean(values)
        se = np.std(values, ddof=1) / math.sqrt(len(values))
        assert abs(mean - exact) <= max(3.5 * se, 1e-12), mode


def test_many_pairs_matrix_matches_exact_with_heavy_sampling():
    g = generate_directed_er(30, 0.15, seed=19)
    S, T = [0, 1, 2], [3, 4, 5]
    params = make_params(seed=19, r_max_s=0.2, r_max_t=0.05)
    est, _ = estimate_many_pairs(g, S, T, params, walks=200_000)
    exact = exact_ppr_rows(g, S, ALPHA)[:, T]
    assert np.max(np.abs(est - exact)) <= 5e-3


def test_threads_do_not_change_estimates():
    g = generate_directed_er(60, 0.08, seed=23)
    params = make_params(seed=23)
    one, _ = estimate_many_pairs(g, [0, 1], [2, 3], params, walks=500,
                                 threads=1)
    four, _ = estimate_many_pairs(g, [0, 1], [2, 3], params, walks=500,
                                  threads=4)
    assert np.array_equal(one, four)


# ---------------------------------------------------------------------------
# parameter selection
# ---------------------------------------------------------------------------

def test_optimal_parameters_worked_example():
    out = optimal_parameters(1000, 0.001, 0.5, math.exp(-1.0))
    r = out["worst_case"]["r_max_s"]
    assert abs(r - 0.5 ** (7.0 / 9.0)) <= 1e-12
    assert out["worst_case"]["r_max_t"] == r
    assert out["precondition_ok"]
    assert not out["clamped"]


def test_optimal_parameters_balances_push_and_walk_work():
    for m, delta, eps, p_fail in ((1000, 1e-3, 0.5, math.exp(-1.0)),
                                  (50_000, 1e-5, 0.3, 0.05)):
        out = optimal_parameters(m, delta, eps, p_fail)
        if out["clamped"]:
            continue
        r_s = out["worst_case"]["r_max_s"]
        r_t = out["worst_case"]["r_max_t"]
        k = math.log(1.0 / p_fail) / (delta * eps ** (7.0 / 3.0))
        lhs = m / r_s
        rhs = k * r_s * r_t
        assert abs(lhs - rhs) <= 1e-6 * lhs


def test_optimal_parameters_clamps_to_unit_interval():
    out = optimal_parameters(10, 0.9, 0.9, 0.5)
    assert out["worst_case"]["r_max_s"] <= 1.0
    assert out["clamped"]
    assert not out["precondition_ok"]


def test_optimal_parameters_practical_block_needs_n():
    out = optimal_parameters(1000, 0.001, 0.5, 0.1)
    assert "practical" not in out
    out = optimal_parameters(1000, 0.001, 0.5, 0.1, n=500)
    prac = out["practical"]
    assert 0 < prac["r_max_t"] <= 1.0
    assert 0 < prac["r_tilde_max_s"] <= 1.0


def test_profiles_cover_every_dataset_and_validate():
    assert len(PROFILES) == 9
    for name, profile in PROFILES.items():
        for method in ("fwbw", "fwbw-l1", "bidir"):
            params = profile.params(2000, method=method)
            params.validate()
            assert params.delta == profile.delta_scale / 2000
        assert profile.params(2000, method="bidir").r_max_s == 1.0


# ---------------------------------------------------------------------------
# certified error bounds
# ---------------------------------------------------------------------------

def test_reference_bounds_exact_match_gives_floor_terms(cycle3):
    n = cycle3.n
    delta, eta = 0.1, 0.01
    # feed the reference values back in: deviation is zero, so the
    # bounds collapse to eta/delta and eta
    from pprbench.push import backward_push
    ref = backward_push(cycle3, 0, ALPHA, eta)
    rows = reference_error_bounds(
        cycle3, 0, eta, [(s, ref.p.get(s, 0.0)) for s in range(n)], delta)
    for row in rows:
        assert row["label"] == "significant"
        assert abs(row["relative_bound"] - eta / delta) <= 1e-15
        assert abs(row["absolute_bound"] - eta) <= 1e-15


def test_reference_bounds_dominate_true_error():
    g = generate_directed_er(50, 0.1, seed=29)
    t = 4
    exact = exact_ppr_rows(g, list(range(g.n)), ALPHA)[:, t]
    params = make_params(seed=29, r_max_s=0.3, r_max_t=0.1)
    est, _ = estimate_many_pairs(g, list(range(g.n)), [t], params, walks=2000)
    estimates = [(s, est[s, 0]) for s in range(g.n)]
    delta, eta = 10.0 / g.n, 1.0 / g.n
    rows = reference_error_bounds(g, t, eta, estimates, delta)
    checked = 0
    for row in rows:
        true_err = abs(row["value"] - exact[row["s"]])
        assert true_err <= row["absolute_bound"] + 1e-12
        if row["label"] == "significant":
            assert true_err / exact[row["s"]] \
                <= row["relative_bound"] + 1e-12
            checked += 1
    assert checked > 0


def test_reference_bounds_label_partition(cycle3):
    with pytest.raises(ValueError):
        reference_error_bounds(cycle3, 0, 0.5, [(0, 0.1)], 0.5)
    rows = reference_error_bounds(cycle3, 0, 1e-6, [(0, 0.4), (1, 0.0)],
                                  0.1)
    labels = {row["s"]: row["label"] for row in rows}
    assert labels[0] == "significant"


# ---------------------------------------------------------------------------
# shared infrastructure
# ---------------------------------------------------------------------------

def test_stack_sparse_columns_layout():
    mat = stack_sparse_columns([{0: 1.0, 2: 0.5}, {1: 2.0}], 3)
    dense = np.asarray(mat.todense())
    assert dense.shape == (3, 2)
    assert dense[0, 0] == 1.0 and dense[2, 0] == 0.5 and dense[1, 1] == 2.0
    assert dense[0, 1] == 0.0

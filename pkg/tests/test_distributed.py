"""Tests for source partitioning and the simulated machine pipeline."""

import math

import numpy as np
import pytest

from pprbench.distributed import (
    MachineReport,
    Partition,
    load_push_store,
    partition_balance,
    partition_distance,
    partition_objective_avg,
    partition_objective_max,
    run_distributed_estimation,
    save_push_store,
    source_partition_avg,
    source_partition_avg_alt,
    source_partition_max,
)
from pprbench.estimators import EstimatorParams
from pprbench.graphs import exact_ppr_rows, generate_directed_sbm
from pprbench.metrics import sigma_infinity_one
from pprbench.push import backward_push_many
from pprbench.sketch import stable_rank

ALPHA = 0.2


def make_params(**kw):
    base = dict(alpha=ALPHA, delta=0.01, eps=0.5, p_fail=0.1,
                r_max_s=0.1, r_max_t=0.02, r_tilde_max_s=0.005,
                c=10.0, seed=3)
    base.update(kw)
    return EstimatorParams(**base)


def random_sigmas(count, n, rng, support=6):
    out = []
    for _ in range(count):
        nodes = rng.choice(n, size=support, replace=False)
        mass = rng.random(support)
        mass /= mass.sum()
        out.append({int(v): float(x) for v, x in zip(nodes, mass)})
    return out


# ---------------------------------------------------------------------------
# partition distance
# ---------------------------------------------------------------------------

def test_partition_distance_examples():
    assert partition_distance({0: 0.5}, {0: 0.5}) == 0.0
    assert partition_distance({0: 1.0}, {1: 0.7, 2: 0.3}) == 1.0
    got = partition_distance({0: 0.6, 1: 0.4}, {0: 0.5, 1: 0.2, 2: 0.3})
    assert abs(got - 0.3) <= 1e-15


def test_partition_distance_norm_increase_identity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        sigma = random_sigmas(1, 30, rng)[0]
        agg_members = random_sigmas(3, 30, rng)
        agg = {}
        for member in agg_members:
            for v, x in member.items():
                agg[v] = max(agg.get(v, 0.0), x)
        joined = dict(agg)
        for v, x in sigma.items():
            joined[v] = max(joined.get(v, 0.0), x)
        lhs = partition_distance(sigma, agg)
        rhs = math.fsum(joined.values()) - math.fsum(agg.values())
        assert abs(lhs - rhs) <= 1e-12


# ---------------------------------------------------------------------------
# greedy partition on elementwise-max norms
# ---------------------------------------------------------------------------

def test_partition_max_extreme_k():
    rng = np.random.default_rng(2)
    sigmas = random_sigmas(8, 40, rng)
    part = source_partition_max(sigmas, 8, rng=5)
    assert sorted(len(p) for p in part.parts) == [1] * 8
    assert abs(partition_objective_max(sigmas, part) - 1.0) <= 1e-12

    part = source_partition_max(sigmas, 1, rng=5)
    assert len(part.parts) == 1
    expect = sigma_infinity_one(sigmas)
    assert abs(partition_objective_max(sigmas, part) - expect) <= 1e-12


def test_partition_max_beats_random_split_on_clustered_sets():
    g = generate_directed_sbm(400, 4, 9.0, 1.0, seed=7)
    from pprbench.push import forward_push_degree_normalized
    S = [v for block in range(4) for v in range(block * 100, block * 100 + 25)]
    sigmas = []
    for s in S:
        res = forward_push_degree_normalized(g, s, ALPHA, 0.005)
        norm = math.fsum(res.r.values())
        sigmas.append({v: x / norm for v, x in res.r.items()})
    wins = 0
    for seed in range(20):
        part = source_partition_max(sigmas, 4, rng=seed)
        heuristic = partition_objective_max(sigmas, part)
        rng = np.random.default_rng((seed, 99))
        order = rng.permutation(len(S))
        random_part = Partition(parts=[list(order[i::4]) for i in range(4)])
        if heuristic <= partition_objective_max(sigmas, random_part):
            wins += 1
    assert wins >= 19


def test_partition_max_identical_sources_fall_back_to_uniform_seeding():
    sigmas = [{0: 0.5, 1: 0.5} for _ in range(6)]
    part = source_partition_max(sigmas, 3, rng=11)
    part.check_cover(6)
    assert len(part.parts) == 3
    assert abs(partition_objective_max(sigmas, part) - 1.0) <= 1e-12


def test_partition_validates_k():
    with pytest.raises(ValueError):
        source_partition_max([{0: 1.0}], 2, rng=0)
    with pytest.raises(ValueError):
        source_partition_max([{0: 1.0}], 0, rng=0)


# ---------------------------------------------------------------------------
# stable-rank partitioners
# ---------------------------------------------------------------------------

def test_avg_join_cost_worked_examples():
    # identical rows stack to rank one
    assert abs(math.sqrt(2 * stable_rank(np.array([[1.0, 0.0],
                                                   [1.0, 0.0]]))) -
               math.sqrt(2)) <= 1e-12
    part = source_partition_avg_alt([(1.0, 0.0), (1.0, 1.0)], 1, rng=0,
                                    audit=True)
    ((s, j, d_hat, before),) = part.audit
    assert j == 0 and abs(d_hat - math.sqrt(2)) <= 1e-12
    # the exact cost for the same join
    rows = np.array([(1.0, 0.0), (1.0, 1.0)])
    stacked = rows[sorted(before) + [s], :]
    d_tilde = math.sqrt((len(before) + 1) * stable_rank(stacked))
    assert d_hat <= d_tilde + 1e-12
    assert abs(d_tilde - math.sqrt(2 * 3 / (3 + math.sqrt(5)) * 2)) <= 1e-9


def test_avg_alt_equality_cases():
    part = source_partition_avg_alt([(1.0, 0.0), (1.0, 0.0)], 1, rng=0,
                                    audit=True)
    ((_, _, d_hat, _),) = part.audit
    assert abs(d_hat - math.sqrt(2)) <= 1e-12

    part = source_partition_avg_alt([(1.0, 0.0), (0.0, 1.0)], 1, rng=0,
                                    audit=True)
    ((_, _, d_hat, _),) = part.audit
    assert abs(d_hat - 2.0) <= 1e-12


def test_avg_alt_never_exceeds_exact_cost():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        rows = rng.random((12, 5))
        part = source_partition_avg_alt(rows, 3, rng=seed, audit=True)
        part.check_cover(12)
        assert part.audit
        for s, j, d_hat, before in part.audit:
            stacked = rows[sorted(before) + [s], :]
            d_tilde = math.sqrt((len(before) + 1) * stable_rank(stacked))
            assert d_hat <= d_tilde + 1e-9


def test_avg_partitioners_agree_on_identical_rows():
    rows = [(0.2, 0.8)] * 6
    exact = source_partition_avg(rows, 2, rng=4)
    fast = source_partition_avg_alt(rows, 2, rng=4)
    exact.check_cover(6)
    fast.check_cover(6)
    # rank-one parts score sqrt(|part|) under both objectives
    obj = partition_objective_avg(rows, exact)
    assert abs(obj - math.sqrt(max(len(p) for p in exact.parts))) <= 1e-9


def test_avg_partitioner_rejects_bad_rows():
    with pytest.raises(ValueError):
        source_partition_avg([(1.0, 0.0), (0.0, 0.0)], 1, rng=0)
    with pytest.raises(ValueError):
        source_partition_avg_alt([(1.0, -0.5)], 1, rng=0)


# ---------------------------------------------------------------------------
# simulated distributed runs
# ---------------------------------------------------------------------------

def sbm_fixture():
    g = generate_directed_sbm(200, 4, 8.0, 1.0, seed=0)
    S = list(range(0, 20)) + list(range(50, 70))
    return g, S, [7, 8, 9, 11]


def test_distributed_baseline_walk_counts_exact():
    g, S, T = sbm_fixture()
    report, est = run_distributed_estimation(
        g, S, 4, "baseline", make_params(), w=50, targets=T)
    for row in report.machines:
        assert row.walks == 10 * 50  # |S|/k sources, w walks each
        assert row.push_work == 0
        assert row.modeled_time_ms == row.walks / ALPHA
    assert report.total_walks == sum(r.walks for r in report.machines)
    assert est.shape == (len(S), len(T))


def test_distributed_heuristic_shares_walks():
    g, S, T = sbm_fixture()
    params = make_params()
    base, _ = run_distributed_estimation(g, S, 2, "baseline", params, w=400,
                                         targets=T)
    heur, _ = run_distributed_estimation(g, S, 2, "heuristic_max", params,
                                         w=400, targets=T)
    assert heur.max_walks < base.max_walks
    assert all(row.push_work > 0 for row in heur.machines)


def test_distributed_estimates_accurate():
    g, S, T = sbm_fixture()
    exact = exact_ppr_rows(g, S, ALPHA)[:, T]
    for scheme in ("baseline", "heuristic_max", "heuristic_avg_alt",
                   "oracle"):
        kw = {"k": 2} if scheme == "oracle" else {"k": 4}
        if scheme == "oracle":
            _, est = run_distributed_estimation(
                g, S, 2, scheme, make_params(), w=600, targets=T)
        else:
            _, est = run_distributed_estimation(
                g, S, 4, scheme, make_params(), w=600, targets=T)
        assert np.max(np.abs(est - exact)) <= 0.02, scheme


def test_distributed_k1_schemes_coincide():
    g, S, T = sbm_fixture()
    S = S[:10]
    params = make_params()
    outputs = []
    for scheme in ("heuristic_max", "heuristic_avg", "heuristic_avg_alt"):
        report, est = run_distributed_estimation(g, S, 1, scheme, params,
                                                 w=100, targets=T)
        assert partition_balance(report.partition) == {"min": 10, "max": 10}
        outputs.append((report.machines[0].walks, est))
    for walks, est in outputs[1:]:
        assert walks == outputs[0][0]
        assert np.array_equal(est, outputs[0][1])


def test_distributed_deterministic_across_threads():
    g, S, T = sbm_fixture()
    params = make_params()
    rep1, est1 = run_distributed_estimation(g, S, 4, "heuristic_max",
                                            params, w=200, targets=T,
                                            threads=1)
    rep4, est4 = run_distributed_estimation(g, S, 4, "heuristic_max",
                                            params, w=200, targets=T,
                                            threads=4)
    assert [r.walks for r in rep1.machines] == [r.walks for r in rep4.machines]
    assert np.array_equal(est1, est4)


def test_distributed_oracle_uses_labels():
    g, S, T = sbm_fixture()
    report, _ = run_distributed_estimation(g, S, 2, "oracle", make_params(),
                                           w=50, targets=T)
    parts = [sorted(S[i] for i in part) for part in report.partition.parts]
    assert parts == [list(range(0, 20)), list(range(50, 70))]
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 4, "oracle", make_params(), w=50)


def test_distributed_validates_inputs():
    g, S, T = sbm_fixture()
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 3, "baseline", make_params(), w=10)
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 2, "bogus", make_params(), w=10)
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 2, "heuristic_avg", make_params(),
                                   w=10)  # needs targets for surrogates
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 2, "baseline", make_params(), w=0)


def test_distributed_without_targets_reports_only():
    g, S, _ = sbm_fixture()
    report, est = run_distributed_estimation(g, S, 4, "heuristic_max",
                                             make_params(), w=100)
    assert est is None
    assert isinstance(report, MachineReport)
    assert report.max_walks > 0


# ---------------------------------------------------------------------------
# push-table store
# ---------------------------------------------------------------------------

def test_push_store_round_trip(tmp_path):
    g, S, T = sbm_fixture()
    params = make_params()
    bwd, _ = backward_push_many(g, T, ALPHA, params.r_max_t)
    store = tmp_path / "tables"
    save_push_store(store, dict(zip(T, bwd)), ALPHA, params.r_max_t, g.n)
    tables, meta = load_push_store(store)
    assert meta == {"alpha": ALPHA, "r_max_t": params.r_max_t, "n": g.n}
    assert sorted(tables) == sorted(T)
    for t, res in zip(T, bwd):
        assert tables[t].p == res.p
        assert tables[t].r == res.r


def test_push_store_feeds_distributed_run(tmp_path):
    g, S, T = sbm_fixture()
    params = make_params()
    bwd, _ = backward_push_many(g, T, ALPHA, params.r_max_t)
    store = tmp_path / "tables"
    save_push_store(store, dict(zip(T, bwd)), ALPHA, params.r_max_t, g.n)
    _, est_inline = run_distributed_estimation(
        g, S, 2, "heuristic_avg", params, w=100, targets=T)
    _, est_store = run_distributed_estimation(
        g, S, 2, "heuristic_avg", params, w=100, targets=T,
        push_store=store)
    assert np.array_equal(est_inline, est_store)


def test_push_store_rejects_mismatch(tmp_path):
    g, S, T = sbm_fixture()
    params = make_params()
    bwd, _ = backward_push_many(g, T, ALPHA, params.r_max_t)
    store = tmp_path / "tables"
    save_push_store(store, dict(zip(T, bwd)), ALPHA, params.r_max_t, g.n)
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 2, "baseline",
                                   make_params(r_max_t=0.05), w=10,
                                   targets=T, push_store=store)
    with pytest.raises(ValueError):
        run_distributed_estimation(g, S, 2, "baseline", params, w=10,
                                   targets=[T[0], 199], push_store=store)

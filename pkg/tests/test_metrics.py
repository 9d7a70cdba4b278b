"""Tests for sharing metrics, target clustering counts, and the
community-level correlation protocol."""

import math

import numpy as np
import pytest

from pprbench.graphs import Graph, generate_directed_sbm
from pprbench.metrics import (
    clustering_correlation_protocol,
    oracle_lookup,
    push_interval_lookup,
    sigma_infinity_one,
    target_clustering_ct,
)
from pprbench.push import backward_push_many

ALPHA = 0.2
CYCLE3 = (0.2 / 0.488, 0.16 / 0.488, 0.128 / 0.488)


# ---------------------------------------------------------------------------
# max-norm sum of the start distributions
# ---------------------------------------------------------------------------

def test_sigma_infinity_one_examples():
    assert sigma_infinity_one([{0: 1.0}]) == 1.0
    assert sigma_infinity_one([{0: 1.0}, {1: 1.0}]) == 2.0
    rows = [{0: 0.5, 1: 0.5}, {1: 0.5, 2: 0.5}]
    assert abs(sigma_infinity_one(rows) - 1.5) <= 1e-12


def test_sigma_infinity_one_bounds():
    rows = [{i: 0.25 for i in range(4)} for _ in range(5)]
    value = sigma_infinity_one(rows)
    assert 1.0 - 1e-12 <= value <= 5.0 + 1e-12
    assert abs(value - 1.0) <= 1e-12  # identical rows collapse to one


def test_sigma_infinity_one_validates():
    with pytest.raises(ValueError):
        sigma_infinity_one([{0: 0.7}])
    with pytest.raises(ValueError):
        sigma_infinity_one([{0: 1.5, 1: -0.5}])
    with pytest.raises(ValueError):
        sigma_infinity_one([])


# ---------------------------------------------------------------------------
# target clustering count
# ---------------------------------------------------------------------------

def test_ct_on_cycle_counts_ordered_pairs(cycle3):
    lookup = oracle_lookup(cycle3, [0, 1], ALPHA)
    # pi_0(1) = 0.3279 > 0.3 counts; order matters
    out = target_clustering_ct(lookup, [0, 1], 0.3)
    assert out.count == 1 and out.ambiguous == 0
    out = target_clustering_ct(lookup, [1, 0], 0.3)
    assert out.count == 0  # pi_1(0) = 0.2623 < 0.3
    out = target_clustering_ct(lookup, [0, 1], 0.25)
    assert out.count == 1
    out = target_clustering_ct(lookup, [1, 0], 0.25)
    assert out.count == 1  # pi_1(0) = 0.2623 > 0.25
    lookup3 = oracle_lookup(cycle3, [0, 1, 2], ALPHA)
    out = target_clustering_ct(lookup3, [0, 1, 2], 0.25)
    assert out.count == 3  # every earlier target lands above 0.25


def test_ct_zero_when_threshold_large(cycle3):
    lookup = oracle_lookup(cycle3, [0, 1, 2], ALPHA)
    out = target_clustering_ct(lookup, [0, 1, 2], 0.99)
    assert out.count == 0


def test_ct_rejects_duplicate_targets(cycle3):
    lookup = oracle_lookup(cycle3, [0, 1], ALPHA)
    with pytest.raises(ValueError):
        target_clustering_ct(lookup, [0, 0], 0.3)


def test_push_interval_lookup_flags_ambiguity(cycle3):
    r_max_t = 0.3
    results, _ = backward_push_many(cycle3, [0, 1], ALPHA, r_max_t)
    lookup = push_interval_lookup(dict(zip([0, 1], results)), r_max_t)
    out = target_clustering_ct(lookup, [0, 1], r_max_t)
    # settled mass alone cannot always separate the two cases
    assert out.count + out.ambiguous >= 1
    assert out.ambiguous >= 0


def test_push_interval_bounds_contain_truth(cycle3):
    r_max_t = 0.1
    results, _ = backward_push_many(cycle3, [0, 1, 2], ALPHA, r_max_t)
    lookup = push_interval_lookup(dict(zip([0, 1, 2], results)), r_max_t)
    for s in range(3):
        for t in range(3):
            lo, hi = lookup(s, t)
            truth = CYCLE3[(t - s) % 3]
            assert lo - 1e-12 <= truth <= hi + 1e-12


# ---------------------------------------------------------------------------
# correlation protocol
# ---------------------------------------------------------------------------

def test_protocol_rows_have_expected_shape():
    g = generate_directed_sbm(200, 4, 8.0, 2.0, seed=5)
    rows = clustering_correlation_protocol(
        g, 10, [1, 2], r_max_t=0.01, levels=[1, 2, 4])
    assert len(rows) == 6
    for row in rows:
        assert set(row) >= {"level", "seed", "phi_S", "sigma_inf1",
                            "phi_T", "c_T", "srank"}
        assert 0.0 <= row["phi_S"] <= 1.0
        assert 0.0 <= row["phi_T"] <= 1.0
        assert 1.0 <= row["sigma_inf1"] <= 10.0 + 1e-9
        assert row["c_T"] >= 0
        assert math.isfinite(row["srank"])


def test_protocol_sigma_tracks_clustering_level():
    # sets drawn inside one community should share far more walk mass
    # than sets scattered over every community
    g = generate_directed_sbm(400, 4, 10.0, 1.0, seed=9)
    rows = clustering_correlation_protocol(
        g, 20, [1, 2, 3], r_max_t=0.01, levels=[1, 4])
    by_level = {}
    for row in rows:
        by_level.setdefault(row["level"], []).append(row["sigma_inf1"])
    assert np.mean(by_level[1]) < np.mean(by_level[4])


def test_protocol_requires_labels(cycle3):
    with pytest.raises(ValueError):
        clustering_correlation_protocol(cycle3, 2, [1])


def test_protocol_push_mode_reports_ambiguous():
    g = generate_directed_sbm(200, 4, 8.0, 2.0, seed=13)
    rows = clustering_correlation_protocol(
        g, 10, [1], r_max_t=0.01, levels=[2], ct_mode="push")
    assert all("ct_ambiguous" in row for row in rows)

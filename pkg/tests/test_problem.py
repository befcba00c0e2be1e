"""Classical layer checks: encoding, cost, exhaustive scan, penalty schedule,
and distribution metrics.

The penalty tests compare against tests/penalty_reference.py, a full
independent reimplementation of the separation schedule; only the raw
mean-variance cost primitive is shared.  The two routes must agree bitwise.
"""

import json
import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from penalty_reference import reference_penalty_coefficient

from ternary_qaoa.finance import ParameterError, build_instance, random_instance
from ternary_qaoa.problem import (
    BasisTable,
    PenaltyModel,
    approximation_ratio,
    build_basis_table,
    cost,
    cost_many,
    constraint_gap,
    decode_all_indices,
    decode_bitstring,
    distribution_metrics,
    encode_ternary,
    enumerate_feasible,
    enumerate_ternary,
    estimate_penalty_coefficient,
    NormalizationError,
    parse_ternary,
    penalized_cost,
    probabilities_from_mapping,
    ternary_string,
)
from ternary_qaoa.sim import CapacityError, index_to_bitstring


# ---------------------------------------------------------------------------
# encoding


def test_single_asset_decodings():
    assert decode_bitstring("01")[0] == 1      # short=0, long=1
    assert decode_bitstring("10")[0] == -1
    assert decode_bitstring("00")[0] == 0
    assert decode_bitstring("11")[0] == 0      # degenerate no-position
    with pytest.raises(ParameterError):
        decode_bitstring("011")


def test_encode_is_canonical():
    assert encode_ternary(np.array([1, -1, 0])) == "011000"
    with pytest.raises(ParameterError):
        encode_ternary(np.array([2]))


@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=8))
def test_decode_inverts_encode(z_list):
    z = np.array(z_list, dtype=np.int8)
    assert np.array_equal(decode_bitstring(encode_ternary(z)), z)


@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=8))
def test_ternary_string_roundtrip(z_list):
    z = np.array(z_list, dtype=np.int8)
    assert np.array_equal(parse_ternary(ternary_string(z)), z)


def test_parse_ternary_rejects_bad_characters():
    with pytest.raises(ParameterError):
        parse_ternary("+-x")


@pytest.mark.parametrize("n_assets", [1, 2, 3])
def test_decode_all_indices_matches_per_index_decode(n_assets):
    table = decode_all_indices(n_assets)
    assert table.shape == (1 << (2 * n_assets), n_assets)
    for index in range(1 << (2 * n_assets)):
        bits = index_to_bitstring(index, 2 * n_assets)
        assert np.array_equal(table[index], decode_bitstring(bits))


# ---------------------------------------------------------------------------
# cost


def loop_cost(instance, z):
    # full double sum over all (i, j) pairs, diagonal included
    total = 0.0
    for i in range(instance.n_assets):
        for j in range(instance.n_assets):
            total += instance.q * instance.sigma[i, j] * z[i] * z[j]
    for i in range(instance.n_assets):
        total -= (1.0 - instance.q) * instance.mu[i] * z[i]
    return total


def test_cost_is_full_double_sum(rng):
    inst = random_instance(4, 2, seed=3)
    for _ in range(20):
        z = rng.integers(-1, 2, size=4)
        assert abs(cost(inst, z) - loop_cost(inst, z)) < 1e-12


def test_cost_shape_check(small_instance):
    with pytest.raises(ParameterError):
        cost(small_instance, np.array([1, 0]))


def test_cost_many_matches_cost(small_instance):
    z_rows = enumerate_ternary(small_instance.n_assets)
    f = cost_many(small_instance, z_rows)
    for row, fv in zip(z_rows, f):
        assert abs(fv - cost(small_instance, row)) < 1e-12


def test_penalized_cost_adds_quadratic_gap(small_instance):
    pen = PenaltyModel(0.7, small_instance.budget)
    z = np.array([1, 1, 1])
    gap = 3 - small_instance.budget
    expected = cost(small_instance, z) + 0.7 * gap * gap
    assert abs(penalized_cost(small_instance, z, pen) - expected) < 1e-12
    assert constraint_gap(z, small_instance.budget) == gap


def test_penalty_model_rejects_negative():
    with pytest.raises(ParameterError):
        PenaltyModel(-0.1, 1)


# ---------------------------------------------------------------------------
# enumeration


def test_enumerate_ternary_order_and_count():
    z = enumerate_ternary(3)
    assert z.shape == (27, 3)
    assert np.array_equal(z[0], [-1, -1, -1])
    assert np.array_equal(z[1], [-1, -1, 0])   # last asset least significant
    assert np.array_equal(z[-1], [1, 1, 1])
    codes = (z + 1) @ np.array([9, 3, 1])
    assert np.array_equal(codes, np.arange(27))
    with pytest.raises(CapacityError):
        enumerate_ternary(17)


@pytest.mark.parametrize(
    "n,b,count",
    [
        # hand combinatorics: sum over m short positions of
        # N! / ((m+b)! m! (N-2m-b)!)
        (2, 1, 2),
        (5, 2, 30),
        (8, 4, 266),
    ],
)
def test_feasible_count(n, b, count):
    inst = random_instance(n, b, seed=1)
    assert enumerate_feasible(inst).feasible_count == count


@pytest.mark.parametrize("n,b", [(2, 1), (4, 2), (5, 2), (8, 4)])
def test_encoding_multiplicity_identity(n, b):
    # feasible encoded bitstrings have Hamming weight N+B, so summing
    # 2^(zero count) over feasible ternary vectors gives C(2N, N+B)
    z_all = enumerate_ternary(n)
    feas = z_all[z_all.sum(axis=1) == b]
    total = sum(2 ** int((row == 0).sum()) for row in feas)
    assert total == math.comb(2 * n, n + b)


def test_enumerate_feasible_against_brute_loops():
    inst = random_instance(3, 1, seed=9)
    best, worst, arg = None, None, set()
    n_feas = 0
    for z_tuple in product((-1, 0, 1), repeat=3):
        z = np.array(z_tuple)
        if z.sum() != 1:
            continue
        n_feas += 1
        f = loop_cost(inst, z)
        if best is None or f < best - 1e-12:
            best, arg = f, {ternary_string(z)}
        elif abs(f - best) <= 1e-12:
            arg.add(ternary_string(z))
        worst = f if worst is None else max(worst, f)
    summary = enumerate_feasible(inst)
    assert summary.feasible_count == n_feas
    assert abs(summary.f_min - best) < 1e-12
    assert abs(summary.f_max - worst) < 1e-12
    assert set(summary.argmin_set) == arg
    assert not summary.degenerate


def test_degenerate_instance():
    inst = build_instance(np.zeros(2), np.zeros((2, 2)), q=1 / 3, budget=1)
    summary = enumerate_feasible(inst)
    assert summary.degenerate
    assert approximation_ratio(inst, summary, np.array([1, 0])) == 1.0
    assert approximation_ratio(inst, summary, np.array([1, 1])) == 0.0


def test_summary_json_fields(small_instance):
    summary = enumerate_feasible(small_instance)
    raw = json.loads(summary.to_json())
    assert set(raw) == {"f_min", "f_max", "argmin_set", "feasible_count", "degenerate"}
    assert raw["feasible_count"] == summary.feasible_count


# ---------------------------------------------------------------------------
# penalty schedule: dual implementation (tests/penalty_reference.py)


def test_penalty_sub_ulp_stall_converges():
    # this instance parks the binding infeasible value one ulp below the
    # threshold; without forced progress the schedule loops to the guard
    inst = random_instance(5, 2, seed=7)
    model = estimate_penalty_coefficient(inst)
    a_ref, threshold = reference_penalty_coefficient(inst)
    assert model.coefficient_a == a_ref
    z_all = enumerate_ternary(5)
    gap = z_all.sum(axis=1) - inst.budget
    f = cost_many(inst, z_all)
    infeasible = gap != 0
    vals = f[infeasible] + model.coefficient_a * gap[infeasible].astype(float) ** 2
    assert vals.min() >= threshold


@pytest.mark.parametrize("seed", [0, 3, 4, 7, 12, 19])
def test_penalty_matches_dual_implementation_exactly(seed):
    inst = random_instance(4, 2, seed=seed)
    model = estimate_penalty_coefficient(inst)
    a_ref, threshold = reference_penalty_coefficient(inst)
    assert model.coefficient_a == a_ref
    assert model.budget == inst.budget
    # separation inequality: every infeasible penalized value clears the
    # midpoint of feasible minimum and weighted feasible mean
    z_all = enumerate_ternary(4)
    gap = z_all.sum(axis=1) - inst.budget
    f = cost_many(inst, z_all)
    infeasible = gap != 0
    vals = f[infeasible] + model.coefficient_a * gap[infeasible].astype(float) ** 2
    assert vals.min() >= threshold


def test_penalty_capacity_guard():
    inst = random_instance(4, 2, seed=0)
    object.__setattr__(inst, "n_assets", 13)
    with pytest.raises(CapacityError):
        estimate_penalty_coefficient(inst)


# ---------------------------------------------------------------------------
# metrics


def test_approximation_ratio_anchors():
    inst = random_instance(3, 1, seed=21)
    summary = enumerate_feasible(inst)
    z_opt = parse_ternary(summary.argmin_set[0])
    assert abs(approximation_ratio(inst, summary, z_opt) - 1.0) < 1e-9
    # infeasible outcomes score zero
    assert approximation_ratio(inst, summary, np.array([1, 1, 1])) == 0.0
    # the feasible maximum scores zero
    z_all = enumerate_ternary(3)
    feas = z_all[z_all.sum(axis=1) == 1]
    worst = feas[np.argmax(cost_many(inst, feas))]
    assert abs(approximation_ratio(inst, summary, worst)) < 1e-9


def test_basis_table_against_per_index_loop():
    inst = random_instance(2, 1, seed=13)
    summary = enumerate_feasible(inst)
    table = build_basis_table(inst, summary)
    assert isinstance(table, BasisTable)
    for index in range(16):
        z = decode_bitstring(index_to_bitstring(index, 4))
        assert abs(table.cost_values[index] - cost(inst, z)) < 1e-12
        assert table.gap[index] == z.sum() - 1
        assert table.feasible[index] == (z.sum() == 1)
        assert abs(table.ratio[index] - approximation_ratio(inst, summary, z)) < 1e-12
        assert table.optimal[index] == (
            z.sum() == 1 and ternary_string(z) in summary.argmin_set
        )


def test_optimal_marks_degenerate_encodings():
    # optimum (+1, 0) has two encodings: no-position as 00 and as 11
    inst = build_instance(
        np.array([0.5, 0.0]), np.eye(2) * 1e-4, q=1 / 3, budget=1
    )
    summary = enumerate_feasible(inst)
    assert summary.argmin_set == ("+0",)
    table = build_basis_table(inst, summary)
    canonical = int("0100"[::-1], 2)   # short1=0 long1=1 short2=0 long2=0
    doubled = int("0111"[::-1], 2)     # same portfolio, no-position as (1,1)
    assert table.optimal[canonical] and table.optimal[doubled]
    assert int(table.optimal.sum()) == 2
    metrics = distribution_metrics(
        inst, summary, {"0100": 0.25, "0111": 0.25, "1000": 0.5}
    )
    assert abs(metrics.p_opt - 0.5) < 1e-12


def test_scaled_penalized_values(small_instance):
    summary = enumerate_feasible(small_instance)
    table = build_basis_table(small_instance, summary)
    vals = table.scaled_penalized_values(12.0, 0.25)
    index = 5  # bits 101000: asset1 (1,0) short, asset2 (1,0)... decode below
    z = decode_all_indices(3)[index]
    pen = PenaltyModel(0.25, small_instance.budget)
    assert abs(vals[index] - 12.0 * penalized_cost(small_instance, z, pen)) < 1e-12


def test_probabilities_from_mapping_validation():
    with pytest.raises(ParameterError):
        probabilities_from_mapping({"0": 1.0}, 2)
    with pytest.raises(NormalizationError):
        probabilities_from_mapping({"00": 0.5}, 2)
    with pytest.raises(NormalizationError):
        probabilities_from_mapping({"00": 1.5, "01": -0.5}, 2)
    with pytest.raises(ParameterError):
        probabilities_from_mapping(np.ones(3) / 3, 2)
    p = probabilities_from_mapping({"00": 0.25, "10": 0.75}, 2)
    assert p[0] == 0.25 and p[1] == 0.75


def test_distribution_metrics_hand_case():
    inst = random_instance(2, 1, seed=5)
    summary = enumerate_feasible(inst)
    opt_bits = encode_ternary(parse_ternary(summary.argmin_set[0]))
    # any feasible non-optimal vector
    other = next(
        s for s in ("+-", "0+", "+0", "-+")
        if s not in summary.argmin_set and int(parse_ternary(s).sum()) == 1
    )
    other_bits = encode_ternary(parse_ternary(other))
    infeasible_bits = "1010"  # decodes to (-1, -1)
    dist = {opt_bits: 0.5, other_bits: 0.3, infeasible_bits: 0.2}
    m = distribution_metrics(inst, summary, dist)
    r_other = approximation_ratio(inst, summary, parse_ternary(other))
    assert abs(m.r_bar - (0.5 + 0.3 * r_other)) < 1e-12
    assert abs(m.p_opt - 0.5) < 1e-12
    assert abs(m.p_feasible - 0.8) < 1e-12

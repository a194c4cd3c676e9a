import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from twsc import instances as I
from twsc._rational import as_fraction, fmt, parse_number
from twsc.instances import Instance, InstanceError, TreeDecomposition


def naive_sparsest(inst):
    """Plain enumeration of every bipartition (oracle for the vectorized search)."""
    best = None
    for bits in itertools.product((0, 1), repeat=inst.n - 1):
        side0 = {0} | {v + 1 for v, b in enumerate(bits) if b == 0}
        cap = sum((w for u, v, w in inst.edges if (u in side0) != (v in side0)), Fraction(0))
        dem = sum((w for u, v, w in inst.demands if (u in side0) != (v in side0)), Fraction(0))
        if dem and (best is None or cap / dem < best):
            best = cap / dem
    return best


def test_fractions_round_trip():
    assert parse_number(fmt(Fraction(-7, 3))) == Fraction(-7, 3)
    assert as_fraction("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_fraction(0.5)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_build_merges_and_drops():
    inst = Instance.build(3, [(1, 0, 1), (0, 1, 2)], [(0, 2, 0), (2, 1, "1/2")])
    assert inst.edges == ((0, 1, Fraction(3)),)
    assert inst.demands == ((1, 2, Fraction(1, 2)),)


@pytest.mark.parametrize("edges,demands", [
    ([(0, 0, 1)], []),
    ([(0, 5, 1)], []),
    ([(0, 1, -1)], []),
])
def test_build_rejects(edges, demands):
    with pytest.raises(InstanceError):
        Instance.build(3, edges, demands)


def test_four_cycle_with_diagonal_demands():
    inst = Instance.build(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)], [(0, 2, 1), (1, 3, 1)])
    rep = I.brute_force_sparsest_cut(inst)
    # every balanced cut crosses two cycle edges and at least one diagonal;
    # {0,1} | {2,3} separates both diagonals: 2 / 2
    assert rep.sparsity == 1
    assert rep.side0 == frozenset({0, 1})


def test_guard_and_env(monkeypatch):
    inst, _ = I.gen_path(12, seed=1, num_demands=2)
    with pytest.raises(InstanceError):
        I.brute_force_sparsest_cut(inst, guard=10)
    monkeypatch.setenv("TWSC_GUARD_N", "11")
    assert I.oracle_guard() == 11
    with pytest.raises(InstanceError):
        I.brute_force_sparsest_cut(inst)


@given(st.integers(0, 10_000), st.integers(3, 9), st.integers(1, 3))
def test_brute_force_matches_enumeration(seed, n, r):
    inst, td = I.gen_partial_ktree(n, min(r, n - 1), 0.8, seed=seed, num_demands=3)
    rep = I.brute_force_sparsest_cut(inst)
    assert rep.sparsity == naive_sparsest(inst)
    if rep.sparsity is not None:
        assert I.evaluate_cut(inst, rep.side0).sparsity == rep.sparsity


@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 4), st.floats(0.3, 1.0))
def test_generated_decompositions_are_valid(seed, n, r, keep):
    r = min(r, n - 1)
    inst, td = I.gen_partial_ktree(n, r, keep, seed=seed, num_demands=2)
    check = I.validate_decomposition(inst, td)
    assert check.valid, check.violations
    assert check.width <= r


@given(st.integers(0, 10_000), st.integers(1, 9))
def test_instance_and_decomposition_json_round_trip(seed, n):
    inst, td = I.gen_partial_ktree(n + 1, min(2, n), 0.7, seed=seed, num_demands=3)
    assert Instance.from_json(json.loads(json.dumps(inst.to_json()))) == inst
    assert TreeDecomposition.from_json(json.loads(json.dumps(td.to_json()))) == td


@given(st.integers(0, 10_000))
def test_cut_complement_has_same_sparsity(seed):
    inst, _ = I.gen_partial_ktree(8, 2, 1.0, seed=seed, num_demands=4)
    side0 = {v for v in range(inst.n) if (seed >> v) & 1} | {0}
    a = I.evaluate_cut(inst, side0)
    b = I.evaluate_cut(inst, set(range(inst.n)) - side0)
    assert (a.cut_capacity, a.cut_demand, a.sparsity) == (b.cut_capacity, b.cut_demand, b.sparsity)


def test_validate_reports_each_violation_kind():
    inst = Instance.build(4, [(0, 1, 1), (2, 3, 1)], [(0, 3, 1)])
    kinds = lambda td: {v.kind for v in I.validate_decomposition(inst, td).violations}  # noqa: E731
    assert "edge_uncovered" in kinds(TreeDecomposition((frozenset({0, 1}), frozenset({2})), ((0, 1),)))
    assert "vertex_uncovered" in kinds(TreeDecomposition((frozenset({0, 1}), frozenset({2})), ((0, 1),)))
    bags = (frozenset({0, 1}), frozenset({2, 3}), frozenset({0}))
    assert "vertex_not_connected" in kinds(TreeDecomposition(bags, ((0, 1), (1, 2))))
    assert "disconnected_tree" in kinds(TreeDecomposition(bags, ((0, 1),)))
    assert "not_a_tree" in kinds(TreeDecomposition(bags, ((0, 1), (1, 2), (0, 2))))


def test_find_decomposition_small():
    k4 = Instance.build(4, [(u, v, 1) for u, v in itertools.combinations(range(4), 2)], [(0, 1, 1)])
    assert I.find_decomposition_small(k4, 2) is None
    td = I.find_decomposition_small(k4, 3)
    assert td.width == 3 and I.validate_decomposition(k4, td).valid


@given(st.integers(0, 10_000), st.integers(5, 11))
def test_find_decomposition_recovers_width(seed, n):
    inst, td = I.gen_partial_ktree(n, 2, 0.9, seed=seed, num_demands=2)
    found = I.find_decomposition_small(inst, 2)
    assert found is not None
    assert I.validate_decomposition(inst, found).valid and found.width <= 2


def test_maxcut_reduction_shape():
    inst, td = I.maxcut_reduction(3, [(0, 1), (1, 2)])
    assert inst.n == 5
    assert ((3, 4, Fraction(27))) in inst.demands
    assert I.validate_decomposition(inst, td).valid and td.width == 2
    assert I.brute_force_max_cut(3, [(0, 1), (1, 2)])[0] == 2

import random

import pytest

from capsac import oracle
from capsac.model import lower_bound, makespan, validate_solution

from conftest import make, random_doc, t4_doc


def diagonal_doc(t_hat="inf"):
    # every rectangle pair mixes both holders, so transfers cannot be avoided
    doc = t4_doc(t_hat=t_hat)
    for p in doc["photos"]:
        p["holders"] = [1] if p["lat"] == p["lng"] else [2]
    return doc


def test_t4_optimum_hits_lower_bound(t4):
    res = oracle.brute_force_opt(t4)
    assert res.optimum == 20.0 == lower_bound(t4)
    assert res.optimal_coverings == 2
    assert oracle.brute_force_opt(make(t4_doc(sigma=2))).optimum == 40.0


def test_delay_threshold_on_diagonal_holders():
    assert oracle.brute_force_opt(make(diagonal_doc(9.99))).optimum is None
    res = oracle.brute_force_opt(make(diagonal_doc(10.0)))
    assert res.optimum == 20.0
    assert res.solution.delays == {(1, 2): 10.0, (2, 1): 10.0}
    assert not oracle.brute_force_opt(make(diagonal_doc(1.0))).feasible


def test_size_guard(monkeypatch, t4):
    monkeypatch.setattr(oracle, "SUBSET_LIMIT", 5)
    with pytest.raises(oracle.TooLarge, match="oracle limit"):
        oracle.brute_force_opt(t4)


def test_rectangles_are_distinct_photo_sets(t4):
    rects = oracle.all_rects(t4)
    sets = [tuple(t4.photos_in(r)) for r in rects]
    assert len(rects) == 9 and len(set(sets)) == 9


def test_solution_is_valid_and_consistent():
    rng = random.Random(41)
    for _ in range(30):
        inst = make(random_doc(rng, n_cols=3, n_rows=2, n_drones=3, n_capable=rng.randint(2, 3),
                               sigma=rng.randint(1, 2), t_hat=rng.choice(["inf", 5.0])))
        if inst.occupied_cells() < inst.m:
            continue
        res = oracle.brute_force_opt(inst)
        if res.feasible:
            assert validate_solution(inst, res.solution) == []
            assert makespan(inst, res.solution.regions, res.solution.assignment) == res.optimum
            assert res.optimum >= lower_bound(inst)


def test_monotone_in_sigma_and_t_hat():
    rng = random.Random(43)
    for _ in range(20):
        inst = make(random_doc(rng, n_cols=3, n_rows=2, n_drones=3, n_capable=3, t_hat=4.0))
        if inst.occupied_cells() < inst.m:
            continue
        values = [oracle.brute_force_opt(inst.with_params(t_hat=t)).optimum for t in (2.0, 4.0, 8.0, float("inf"))]
        finite = [v for v in values if v is not None]
        # relaxing the delay bound never hurts, and feasibility is kept once reached
        assert finite == sorted(finite, reverse=True)
        assert values[len(values) - len(finite):] == finite
        one = oracle.brute_force_opt(inst.with_params(sigma=1, t_hat=float("inf"))).optimum
        two = oracle.brute_force_opt(inst.with_params(sigma=2, t_hat=float("inf"))).optimum
        assert two >= one

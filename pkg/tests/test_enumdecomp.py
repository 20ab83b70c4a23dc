import math
import random
from pathlib import Path

import pytest

from capsac import enumdecomp, generator
from capsac.enumdecomp import DecompConfig, decompose_solve, enumerate_rects, export_milp, solve_restricted
from capsac.model import lower_bound, validate_solution
from capsac.oracle import all_rects, brute_force_opt

from conftest import make, random_doc, t4_doc, t9_doc
from oracles import solve_lp_text

GOLDEN = Path(__file__).parent / "golden"


def band_doc(t_hat="inf"):
    # four photos in a row, all held by a drone that cannot reconstruct
    photos = [{"id": i, "lat": 0.0, "lng": float(i), "lambda_s": 10.0, "mu_mb": 10.0, "holders": [3]}
              for i in range(4)]
    return {"name": "band", "photos": photos,
            "drones": [{"id": 1, "capable": True}, {"id": 2, "capable": True}, {"id": 3, "capable": False}],
            "links": [{"u": 3, "v": 1, "capacity_mbps": 1.0}, {"u": 3, "v": 2, "capacity_mbps": 2.0}],
            "sigma": 1, "t_hat_s": t_hat}


def test_catalog_sizes_and_omega():
    t4 = enumerate_rects(make(t4_doc()))
    assert len(t4) == 9 and t4.omega == [1, 2, 4]
    assert len(t4.omega_map[2]) == 4
    t9 = enumerate_rects(make(t9_doc()))
    assert len(t9) == 36 and t9.omega == [1, 2, 3, 4, 6, 9]
    one = make(dict(t4_doc(), photos=t4_doc()["photos"][:1]))
    assert len(enumerate_rects(one)) == 1


def test_catalog_matches_naive_rectangles():
    rng = random.Random(21)
    for _ in range(40):
        inst = make(random_doc(rng, n_cols=rng.randint(1, 4), n_rows=rng.randint(1, 4)))
        cat = enumerate_rects(inst)
        rects = [e.rect for e in cat.regions]
        assert len(set(rects)) == len(rects) and set(rects) == set(all_rects(inst))
        for e in cat.regions:
            members = inst.photos_in(e.rect)
            assert e.count == len(members)
            assert e.time == math.fsum(inst.photos[i].lam for i in sorted(members))


def test_restricted_solves():
    t4 = make(t4_doc())
    cat = enumerate_rects(t4)
    assert solve_restricted(t4, cat, cat.omega_map[2]).solution.makespan == 20.0
    none = solve_restricted(t4, cat, cat.omega_map[1])
    assert none.solution is None and none.optimal
    t9 = make(t9_doc())
    cat9 = enumerate_rects(t9)
    res = solve_restricted(t9, cat9, cat9.omega_map[3])
    assert res.solution.makespan == 30.0 and res.optimal
    assert validate_solution(t9, res.solution) == []


def test_t4_decomposition_intervals():
    res = decompose_solve(make(t4_doc()))
    assert res.solution.makespan == 20.0
    assert res.initial_interval == (2, 2)
    assert res.found_interval == (2, 2)
    assert res.final_interval == (1, 4)
    assert [s.t_max for s in res.trace] == [20.0, 20.0]


def test_decomposition_matches_oracle_on_tiny_instances():
    rng = random.Random(31)
    for _ in range(25):
        doc = random_doc(rng, n_cols=3, n_rows=rng.randint(1, 3), n_drones=3, n_capable=rng.randint(2, 3),
                         sigma=rng.randint(1, 2), t_hat=rng.choice(["inf", 6.0]))
        inst = make(doc)
        if inst.occupied_cells() < inst.m:
            continue
        res = decompose_solve(inst, DecompConfig(until_full=True))
        want = brute_force_opt(inst).optimum
        got = res.solution.makespan if res.solution else None
        assert got == want
        assert res.proven_infeasible == (want is None)


def test_budget_exhaustion_is_reported():
    inst = make(t9_doc())
    cat = enumerate_rects(inst)
    res = solve_restricted(inst, cat, range(len(cat)), budget=3)
    assert not res.optimal and res.nodes >= 3


@pytest.mark.slow
def test_generated_d5_70_stand_in():
    inst = generator.generate(generator.GenConfig(200, 5, 70, seed=1))
    res = decompose_solve(inst, DecompConfig(budget=200000))
    assert math.isclose(res.solution.makespan, 1870.40, rel_tol=1e-9)
    assert math.isclose(lower_bound(inst), 1781.3333333, rel_tol=1e-6)
    assert res.final_interval == (64, 72)


def test_export_golden():
    inst = make(t4_doc(t_hat=25.0))
    cat = enumerate_rects(inst)
    text = export_milp(inst, cat, range(len(cat)))
    assert text == (GOLDEN / "t4_that25.lp").read_text()


def test_export_rows_follow_parameters():
    inst = make(t4_doc())
    cat = enumerate_rects(inst)
    text = export_milp(inst, cat, range(len(cat)))
    assert "c3_" not in text
    assert "cov_" not in text
    assert "cov_1" in export_milp(inst, cat, range(len(cat)), per_drone_coverage=True)
    binaries = text.split("Binaries")[1].split()
    assert sum(v.startswith("q_") for v in binaries) == 18
    assert sum(v.startswith("o_") for v in binaries) == 9
    assert sum(v.startswith("z_") for v in binaries) == 2
    with pytest.raises(ValueError, match="no candidate"):
        export_milp(inst, cat, cat.omega_map[1][:2])


def test_exported_model_solves_to_oracle_value():
    for t_hat, expected in [(25.0, 20.0), (17.0, 30.0), (14.0, None)]:
        inst = make(band_doc(t_hat))
        cat = enumerate_rects(inst)
        value = solve_lp_text(export_milp(inst, cat, range(len(cat)), per_drone_coverage=True))
        assert brute_force_opt(inst).optimum == expected
        if expected is None:
            assert value is None
        else:
            assert value == pytest.approx(expected, abs=1e-6)
    inst = make(t4_doc(t_hat=25.0))
    assert solve_lp_text((GOLDEN / "t4_that25.lp").read_text()) == pytest.approx(20.0, abs=1e-6)


def test_catalog_csv():
    cat = enumerate_rects(make(t4_doc()))
    lines = enumdecomp.catalog_csv(cat).splitlines()
    assert lines[0] == "index,c_lt,c_gt,l_lo,l_hi,cardinality,time_s"
    assert len(lines) == 10
    assert all(len(line.split(",")) == 7 for line in lines)

import random

import pytest
from hypothesis import given, settings, strategies as st

from capsac import geosum
from capsac.model import Rect

from conftest import make, random_doc


def naive(inst, rect, value):
    return sum(value(p) for p, c, r in zip(inst.photos, inst.cols, inst.rows) if rect.contains(c, r))


def random_rect(rng, inst):
    c = sorted(rng.randrange(inst.n_cols) for _ in range(2))
    l = sorted(rng.randrange(inst.n_rows) for _ in range(2))
    return Rect(c[0], c[1], l[0], l[1])


def test_t4_totals_and_strips(t4):
    g = geosum.build(t4)
    assert g.total_time == 40
    assert g.time.left[1] == 20  # two photos strictly left of the rightmost column


def test_t9_center_quadrant(t9):
    g = geosum.build(t9)
    assert g.count.q3[1][1] == 1
    assert g.count.q1[1][1] == 1 and g.count.q2[1][1] == 1 and g.count.q4[1][1] == 1


def test_single_photo_has_empty_strips():
    rng = random.Random(0)
    inst = make(random_doc(rng, n_photos=1))
    g = geosum.build(inst)
    tab = g.count
    assert tab.left == [0] and tab.right == [0] and tab.up == [0] and tab.down == [0]
    assert tab.q1 == tab.q2 == tab.q3 == tab.q4 == [[0]]
    assert g.region_count(inst.full_rect()) == 1


def test_region_time_examples(t4, t9):
    g4, g9 = geosum.build(t4), geosum.build(t9)
    assert g4.region_time(t4.full_rect()) == 40.0
    assert g4.region_time(Rect(0, 0, 0, 1)) == 20.0
    assert g9.region_time(Rect(1, 1, 1, 1)) == 10.0


def test_region_data_examples(t4):
    g = geosum.build(t4)
    assert g.region_data(1, Rect(0, 0, 0, 1)) == 10.0
    assert g.region_data(1, Rect(1, 1, 0, 1)) == 0.0
    assert g.region_data(2, t4.full_rect()) == 10.0
    with pytest.raises(ValueError, match="unknown drone"):
        g.region_data(42, t4.full_rect())


def test_region_count_examples(t4, t9):
    assert geosum.build(t4).region_count(t4.full_rect()) == 4
    assert geosum.build(t9).region_count(Rect(0, 2, 1, 1)) == 3
    assert geosum.build(t9).region_count(Rect(2, 2, 0, 0)) == 1


def test_strip_identities():
    rng = random.Random(5)
    for _ in range(30):
        inst = make(random_doc(rng, n_cols=4, n_rows=3))
        g = geosum.build(inst)
        for c in range(inst.n_cols):
            on = naive(inst, Rect(c, c, 0, inst.n_rows - 1), lambda p: p.lam)
            assert g.time.left[c] + g.time.right[c] + on == g.total_time
        for l in range(inst.n_rows):
            on = naive(inst, Rect(0, inst.n_cols - 1, l, l), lambda p: p.lam)
            assert g.time.down[l] + g.time.up[l] + on == g.total_time


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_matches_naive_sum(seed):
    rng = random.Random(seed)
    inst = make(random_doc(rng, n_cols=rng.randint(1, 5), n_rows=rng.randint(1, 5)))
    g = geosum.build(inst)
    for _ in range(20):
        r = random_rect(rng, inst)
        assert g.region_time(r) == naive(inst, r, lambda p: p.lam)
        assert g.region_count(r) == naive(inst, r, lambda p: 1)
        for h in inst.drone_ids:
            assert g.region_data(h, r) == naive(inst, r, lambda p: p.mu if h in p.holders else 0.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_additivity_across_split(seed):
    rng = random.Random(seed)
    inst = make(random_doc(rng, n_cols=4, n_rows=4))
    g = geosum.build(inst)
    r = random_rect(rng, inst)
    if r.c_lt < r.c_gt:
        k = rng.randrange(r.c_lt, r.c_gt)
        parts = [Rect(r.c_lt, k, r.l_lo, r.l_hi), Rect(k + 1, r.c_gt, r.l_lo, r.l_hi)]
    elif r.l_lo < r.l_hi:
        k = rng.randrange(r.l_lo, r.l_hi)
        parts = [Rect(r.c_lt, r.c_gt, r.l_lo, k), Rect(r.c_lt, r.c_gt, k + 1, r.l_hi)]
    else:
        return
    assert g.region_time(r) == sum(g.region_time(p) for p in parts)


def test_real_valued_data_within_relative_tolerance():
    rng = random.Random(9)
    for _ in range(50):
        inst = make(random_doc(rng, n_cols=5, n_rows=5, int_values=False))
        g = geosum.build(inst)
        for _ in range(20):
            r = random_rect(rng, inst)
            assert g.region_time(r) == pytest.approx(naive(inst, r, lambda p: p.lam), rel=1e-9, abs=1e-9)


def test_tighten_and_occupied():
    rng = random.Random(21)
    for _ in range(100):
        inst = make(random_doc(rng, n_cols=4, n_rows=4))
        g = geosum.build(inst)
        r = random_rect(rng, inst)
        inside = [(c, l) for c, l in zip(inst.cols, inst.rows) if r.contains(c, l)]
        t = g.tighten(r)
        if not inside:
            assert t is None
            continue
        cs = [c for c, _ in inside]
        ls = [l for _, l in inside]
        assert t == Rect(min(cs), max(cs), min(ls), max(ls))
        assert g.occupied(r, "lng") == sorted(set(cs))
        assert g.occupied(r, "lat") == sorted(set(ls))

"""Variable neighborhood search over partition trees and drone assignments."""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from . import ptree
from .geosum import GeoSums
from .mmf import MmfMemo
from .model import Instance, Rect, Solution, lower_bound, makespan
from .ptree import PartitionTree

log = logging.getLogger(__name__)

REL_EPS = 1e-9
Assignment = Tuple[FrozenSet[int], ...]


@dataclass
class Evaluation:
    t_max: float
    totals: Dict[int, float]
    d_max: FrozenSet[int]
    loads: Dict[Tuple[int, int], float]
    delays: Dict[Tuple[int, int], float]
    feasible: bool
    violation: float


@dataclass
class SearchState:
    tree: PartitionTree
    assignment: Assignment
    eval: Evaluation


def better(a: Evaluation, b: Evaluation) -> bool:
    """Is ``a`` strictly better than ``b``?

    Feasible beats infeasible; two infeasible evaluations compare on
    (violation, T_max); two feasible ones on T_max.  Ties within a relative
    1e-9 are not improvements.
    """
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        if a.violation < b.violation * (1 - REL_EPS):
            return True
        if a.violation > b.violation * (1 + REL_EPS):
            return False
    return a.t_max < b.t_max * (1 - REL_EPS)


class Evaluator:
    """Scores (tree, assignment) pairs; caches per-rect aggregates and MMF rates."""

    def __init__(self, inst: Instance, g: GeoSums, memo: Optional[MmfMemo] = None):
        self.inst = inst
        self.g = g
        self.memo = memo if memo is not None else MmfMemo(inst.topology)
        self._rects: Dict[Rect, Tuple[float, List[Tuple[int, float]]]] = {}
        self.count = 0

    def _rect(self, r: Rect):
        hit = self._rects.get(r)
        if hit is None:
            data = [(h, v) for h, v in zip(self.g.holders, self.g.region_data_all(r)) if v > 0]
            hit = (self.g.region_time(r), data)
            self._rects[r] = hit
        return hit

    def evaluate(self, regions: Sequence[Rect], assignment: Sequence[FrozenSet[int]]) -> Evaluation:
        self.count += 1
        totals = {d: 0.0 for d in self.inst.capable}
        loads: Dict[Tuple[int, int], float] = {}
        for r, drones in zip(regions, assignment):
            t, data = self._rect(r)
            for d in sorted(drones):
                totals[d] += t
                for h, mb in data:
                    if h != d:
                        loads[(h, d)] = loads.get((h, d), 0.0) + mb
        t_max = max(totals.values())
        d_max = frozenset(d for d, v in totals.items() if v >= t_max * (1 - REL_EPS))
        delays = {}
        if loads:
            rates = self.memo.rates(loads)
            delays = {k: v / rates[k] for k, v in loads.items()}
        worst = max(delays.values(), default=0.0)
        violation = max(0.0, worst - self.inst.t_hat)
        return Evaluation(t_max, totals, d_max, loads, delays, violation == 0.0, violation)

    def state(self, tree: PartitionTree, assignment: Assignment) -> SearchState:
        return SearchState(tree, assignment, self.evaluate(tree.regions, assignment))


def random_assignment(inst: Instance, m: int, rng: random.Random) -> Assignment:
    """Exactly sigma drones per leaf, then repair so every capable drone gets a leaf."""
    cap = list(inst.capable)
    slots = [set(rng.sample(cap, inst.sigma)) for _ in range(m)]
    while True:
        used: Dict[int, int] = {}
        for s in slots:
            for d in s:
                used[d] = used.get(d, 0) + 1
        idle = [d for d in cap if d not in used]
        if not idle:
            break
        d = idle[0]
        # some drone appears twice whenever one is idle and m == |capable|
        options = [(i, e) for i, s in enumerate(slots) for e in sorted(s) if used[e] > 1]
        i, e = rng.choice(options)
        slots[i].remove(e)
        slots[i].add(d)
    return tuple(frozenset(s) for s in slots)


def initial_state(inst: Instance, ev: Evaluator, rng: random.Random) -> SearchState:
    tree = ptree.random_tree(ev.g, inst.m, rng)
    return ev.state(tree, random_assignment(inst, tree.m, rng))


# -- neighborhoods ---------------------------------------------------------------


def _counts(assignment: Assignment) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for s in assignment:
        for d in s:
            out[d] = out.get(d, 0) + 1
    return out


def transfers(inst: Instance, st: SearchState) -> Iterator[Assignment]:
    """N1: hand a leaf from a D_max drone to a drone outside D_max."""
    dmax = st.eval.d_max
    counts = _counts(st.assignment)
    for i, drones in enumerate(st.assignment):
        for giver in sorted(drones & dmax):
            if counts[giver] < 2:
                continue
            for recv in inst.capable:
                if recv in dmax or recv in drones:
                    continue
                new = list(st.assignment)
                new[i] = (drones - {giver}) | {recv}
                yield tuple(new)


def swaps(inst: Instance, st: SearchState) -> Iterator[Assignment]:
    """N2: exchange a D_max drone's leaf with a leaf of a drone outside D_max."""
    dmax = st.eval.d_max
    a = st.assignment
    for i, di in enumerate(a):
        for giver in sorted(di & dmax):
            for j, dj in enumerate(a):
                if j == i or giver in dj:
                    continue
                for other in sorted(dj - dmax):
                    if other in di:
                        continue
                    new = list(a)
                    new[i] = (di - {giver}) | {other}
                    new[j] = (dj - {other}) | {giver}
                    yield tuple(new)


def hyperplane_trees(g: GeoSums, st: SearchState) -> Iterator[PartitionTree]:
    """N3: hyperplane moves under the parents of leaves held by D_max drones."""
    dmax = st.eval.d_max
    held = [i for i, s in enumerate(st.assignment) if s & dmax]
    for parent in ptree.leaf_parents(st.tree, held):
        for _, tree in ptree.hyperplane_neighbors(g, st.tree, parent):
            yield tree


def neighbors(ev: Evaluator, st: SearchState, hood: int) -> Iterator[SearchState]:
    if hood == 3:
        for tree in hyperplane_trees(ev.g, st):
            yield ev.state(tree, st.assignment)
        return
    gen = transfers if hood == 1 else swaps
    for a in gen(ev.inst, st):
        yield ev.state(st.tree, a)


def local_search(ev: Evaluator, st: SearchState, hood: int, deadline: float = math.inf) -> SearchState:
    """First improvement until no neighbor in ``hood`` improves the state."""
    improved = True
    while improved:
        improved = False
        for cand in neighbors(ev, st, hood):
            if better(cand.eval, st.eval):
                st = cand
                improved = True
                break
            if time.perf_counter() > deadline:
                return st
    return st


def active_hoods(sigma: int, hoods: Sequence[int]) -> List[int]:
    return [h for h in sorted(set(hoods)) if not (h == 1 and sigma == 1)]


def vnd(ev: Evaluator, st: SearchState, hoods: Sequence[int] = (1, 2, 3), deadline: float = math.inf) -> SearchState:
    order = active_hoods(ev.inst.sigma, hoods)
    t = 0
    while t < len(order):
        nxt = local_search(ev, st, order[t], deadline)
        if better(nxt.eval, st.eval):
            st = nxt
            t = 0
        else:
            t += 1
        if time.perf_counter() > deadline:
            break
    return st


def shake(ev: Evaluator, st: SearchState, k: int, rng: random.Random) -> Optional[SearchState]:
    """Rebuild a random sub-tree rooted at depth D(T) - k (or the nearest shallower depth)."""
    inner = st.tree.internal_paths()
    if not inner:
        return None
    depth = st.tree.depth - k
    while depth > 0 and not any(len(p) == depth for p in inner):
        depth -= 1
    pool = [p for p in inner if len(p) == max(depth, 0)]
    path = rng.choice(pool)
    tree = ptree.reconstruct_subtree(ev.g, st.tree, path, rng)
    return ev.state(tree, st.assignment)


# -- driver ------------------------------------------------------------------------


@dataclass
class VnsConfig:
    time_limit: float = 5.0
    seed: int = 0
    neighborhoods: Tuple[int, ...] = (1, 2, 3)
    runs: int = 1
    # a run also ends after this many shakes in a row without improvement
    max_idle: Optional[int] = 200
    max_iterations: Optional[int] = None


@dataclass
class RunOutcome:
    seed: int
    makespan: float
    feasible: bool
    violation: float
    time_to_best: float
    iterations: int
    solution: Solution = field(repr=False)


@dataclass
class VnsResult:
    solution: Solution
    runs: List[RunOutcome]

    @property
    def average(self) -> float:
        return math.fsum(r.makespan for r in self.runs) / len(self.runs)

    @property
    def average_time(self) -> float:
        return math.fsum(r.time_to_best for r in self.runs) / len(self.runs)


def to_solution(inst: Instance, st: SearchState) -> Solution:
    # report the makespan exactly as an independent re-evaluation would compute it
    regions = st.tree.regions
    return Solution(
        regions=regions,
        assignment=list(st.assignment),
        makespan=makespan(inst, regions, st.assignment),
        delays=dict(sorted(st.eval.delays.items())),
        feasible=st.eval.feasible,
    )


def vns_run(inst: Instance, ev: Evaluator, cfg: VnsConfig, seed: int,
            on_improve: Optional[Callable[[float, SearchState, int], None]] = None) -> RunOutcome:
    if cfg.time_limit <= 0:
        raise ValueError("time limit must be positive")
    rng = random.Random(seed)
    start = time.perf_counter()
    deadline = start + cfg.time_limit
    lb = lower_bound(inst)

    best = vnd(ev, initial_state(inst, ev, rng), cfg.neighborhoods, deadline)
    found_at = time.perf_counter() - start
    k, idle, it = 1, 0, 0
    while time.perf_counter() < deadline:
        if best.eval.feasible and best.eval.t_max <= lb * (1 + REL_EPS):
            break
        if cfg.max_iterations is not None and it >= cfg.max_iterations:
            break
        if cfg.max_idle is not None and idle >= cfg.max_idle:
            break
        it += 1
        shaken = shake(ev, best, k, rng)
        if shaken is None:
            break
        cand = vnd(ev, shaken, cfg.neighborhoods, deadline)
        if better(cand.eval, best.eval):
            best = cand
            found_at = time.perf_counter() - start
            k, idle = 1, 0
            log.info("%.3fs T_max=%.4f k=%d feasible=%s", found_at, best.eval.t_max, k, best.eval.feasible)
            if on_improve:
                on_improve(found_at, best, k)
        else:
            idle += 1
            k = k + 1 if k < max(best.tree.depth, 1) else 1
    sol = to_solution(inst, best)
    return RunOutcome(seed, sol.makespan, sol.feasible, best.eval.violation, found_at, it, sol)


def vns_solve(inst: Instance, cfg: VnsConfig = VnsConfig(), g: Optional[GeoSums] = None) -> VnsResult:
    """Independent runs with seeds seed, seed+1, ...; the best solution over all runs wins."""
    g = g if g is not None else GeoSums(inst)
    if 1 in cfg.neighborhoods and inst.sigma == 1:
        log.info("n1 inactive at sigma=1")
    ev = Evaluator(inst, g)
    runs = [vns_run(inst, ev, cfg, cfg.seed + i) for i in range(cfg.runs)]

    def rank(r: RunOutcome):
        return (not r.feasible, r.violation if not r.feasible else 0.0, r.makespan)

    best = min(runs, key=rank)
    return VnsResult(best.solution, runs)

"""Rectangle enumeration, cardinality-interval decomposition and an exact restricted solver.

Photos are encoded as bits of a Python int, ordered by (column, row), so a
rectangle's photo set is a bitmask and coverage checks are single AND/OR ops.
"""

from __future__ import annotations

import bisect
import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .geosum import GeoSums
from .mmf import MmfMemo
from .model import Instance, Rect, Solution, format_t_hat, lower_bound, makespan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    rect: Rect
    count: int
    time: float
    mask: int
    data: Tuple[Tuple[int, float], ...]  # (holder, MB) pairs with positive data


@dataclass
class SubRegionCatalog:
    regions: List[CatalogEntry]
    omega: List[int]
    omega_map: Dict[int, List[int]]
    photo_order: List[int]  # bit position -> photo position in the instance
    lam_bits: List[float]  # processing time of the photo at each bit

    def __len__(self):
        return len(self.regions)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.photo_order)) - 1


def build_cardinality_index(regions: Sequence[CatalogEntry]) -> Tuple[List[int], Dict[int, List[int]]]:
    omega_map: Dict[int, List[int]] = {}
    for i, e in enumerate(regions):
        omega_map.setdefault(e.count, []).append(i)
    return sorted(omega_map), omega_map


def enumerate_rects(inst: Instance, g: Optional[GeoSums] = None) -> SubRegionCatalog:
    """All distinct tight rectangles holding at least one photo."""
    g = g if g is not None else GeoSums(inst)
    order = sorted(range(len(inst.photos)), key=lambda i: (inst.cols[i], inst.rows[i], i))
    col_bits = [0] * inst.n_cols
    row_bits = [0] * inst.n_rows
    for bit, i in enumerate(order):
        col_bits[inst.cols[i]] |= 1 << bit
        row_bits[inst.rows[i]] |= 1 << bit

    found: Dict[Rect, int] = {}
    for c0 in range(inst.n_cols):
        cm = 0
        for c1 in range(c0, inst.n_cols):
            cm |= col_bits[c1]
            for l0 in range(inst.n_rows):
                rm = 0
                for l1 in range(l0, inst.n_rows):
                    rm |= row_bits[l1]
                    mask = cm & rm
                    if mask:
                        t = g.tighten(Rect(c0, c1, l0, l1))
                        found.setdefault(t, mask)

    regions = []
    for rect in sorted(found, key=lambda r: (r.c_lt, r.c_gt, r.l_lo, r.l_hi)):
        data = tuple((h, v) for h, v in zip(g.holders, g.region_data_all(rect)) if v > 0)
        regions.append(CatalogEntry(rect, g.region_count(rect), g.region_time(rect), found[rect], data))
    omega, omega_map = build_cardinality_index(regions)
    lam_bits = [inst.photos[i].lam for i in order]
    return SubRegionCatalog(regions, omega, omega_map, order, lam_bits)


# -- restricted problem -----------------------------------------------------------


@dataclass
class RestrictedResult:
    solution: Optional[Solution]
    optimal: bool
    nodes: int
    chosen: Optional[Tuple[int, ...]] = None


class _Budget(Exception):
    pass


def _demand_loads(entries: Sequence[CatalogEntry], assignment: Sequence[Sequence[int]]):
    loads: Dict[Tuple[int, int], float] = {}
    for e, drones in zip(entries, assignment):
        for d in sorted(drones):
            for h, mb in e.data:
                if h != d:
                    loads[(h, d)] = loads.get((h, d), 0.0) + mb
    return loads


def _delays(memo: MmfMemo, loads):
    if not loads:
        return {}
    rates = memo.rates(loads)
    return {k: v / rates[k] for k, v in loads.items()}


def best_assignment(inst: Instance, entries: Sequence[CatalogEntry], bound: float, memo: MmfMemo,
                    per_drone: bool = True):
    """Cheapest exactly-sigma assignment of ``entries`` with makespan below ``bound``.

    Returns (makespan, assignment) or None.  Regions are tried longest first so
    load pruning bites early; delays are checked only at complete assignments.
    """
    cap = inst.capable
    combos = list(itertools.combinations(cap, inst.sigma))
    order = sorted(range(len(entries)), key=lambda i: (-entries[i].time, i))
    m = len(entries)
    loads = {d: 0.0 for d in cap}
    used = {d: 0 for d in cap}
    picked: List[Optional[Tuple[int, ...]]] = [None] * m
    best = [bound, None]
    check_delay = not math.isinf(inst.t_hat)

    def rec(k: int, idle: int):
        if per_drone and idle > (m - k) * inst.sigma:
            return
        if k == m:
            value = max(loads.values())
            if value >= best[0]:
                return
            if check_delay:
                delays = _delays(memo, _demand_loads(entries, picked))
                if any(t > inst.t_hat for t in delays.values()):
                    return
            best[0], best[1] = value, list(picked)
            return
        i = order[k]
        t = entries[i].time
        for combo in combos:
            if any(loads[d] + t >= best[0] for d in combo):
                continue
            fresh = 0
            for d in combo:
                loads[d] += t
                fresh += used[d] == 0
                used[d] += 1
            picked[i] = combo
            rec(k + 1, idle - fresh)
            for d in combo:
                loads[d] -= t
                used[d] -= 1
        picked[i] = None

    rec(0, len(cap))
    if best[1] is None:
        return None
    return best[0], [frozenset(c) for c in best[1]]


def _popcount_lam(bits: int, lam_bits: Sequence[float]) -> float:
    total = 0.0
    while bits:
        low = bits & -bits
        total += lam_bits[low.bit_length() - 1]
        bits ^= low
    return total


def solve_restricted(
    inst: Instance,
    catalog: SubRegionCatalog,
    candidates: Sequence[int],
    budget: Optional[int] = None,
    incumbent: Optional[Tuple[float, Tuple[int, ...], list]] = None,
    memo: Optional[MmfMemo] = None,
    per_drone: bool = True,
) -> RestrictedResult:
    """Exact optimum over coverings by exactly m distinct regions from ``candidates``.

    Branch on the lowest uncovered photo over the candidates containing it;
    regions passed over at a branch are excluded below it, so each region set is
    visited once.  ``incumbent`` = (makespan, region indices, assignment) seeds
    the upper bound.  ``budget`` caps the number of search nodes.
    """
    memo = memo if memo is not None else MmfMemo(inst.topology)
    m, sigma = inst.m, inst.sigma
    regs = catalog.regions
    cand = sorted(set(candidates))
    full = catalog.full_mask
    target = math.fsum(catalog.lam_bits) / m
    by_bit: Dict[int, List[int]] = {}
    for i in cand:
        mask = regs[i].mask
        while mask:
            low = mask & -mask
            by_bit.setdefault(low.bit_length() - 1, []).append(i)
            mask ^= low
    for lst in by_bit.values():
        lst.sort(key=lambda i: (abs(regs[i].time - target), i))
    min_t = min((regs[i].time for i in cand), default=0.0)

    best_val = math.inf
    best: Optional[Tuple[Tuple[int, ...], list]] = None
    if incumbent is not None:
        best_val, chosen0, assign0 = incumbent
        best = (tuple(chosen0), assign0)
    nodes = [0]

    def bound(sum_t: float, max_t: float, k: int, uncovered: float) -> float:
        rest = max(uncovered, (m - k) * min_t) if k < m else 0.0
        return max(max_t, sigma * (sum_t + rest) / m)

    def leaf(chosen: List[int]):
        nonlocal best_val, best
        found = best_assignment(inst, [regs[i] for i in chosen], best_val, memo, per_drone)
        if found is not None:
            best_val = found[0]
            best = (tuple(chosen), found[1])

    def rec(chosen: List[int], covered: int, banned: frozenset, sum_t: float, max_t: float,
            unc_lam: float, fill_from: int = 0):
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            raise _Budget
        k = len(chosen)
        if bound(sum_t, max_t, k, unc_lam) >= best_val:
            return
        if covered == full:
            if k == m:
                leaf(chosen)
                return
            # fillers come in increasing index order and are never banned regions
            for i in cand:
                if i < fill_from or i in banned or i in chosen:
                    continue
                e = regs[i]
                rec(chosen + [i], covered, banned, sum_t + e.time, max(max_t, e.time), 0.0, i + 1)
            return
        if k == m:
            return
        free = full & ~covered
        bit = (free & -free).bit_length() - 1
        skipped = []
        for i in by_bit.get(bit, []):
            if i in banned or i in chosen:
                continue
            e = regs[i]
            new = e.mask & ~covered
            rec(chosen + [i], covered | e.mask, banned | frozenset(skipped), sum_t + e.time,
                max(max_t, e.time), unc_lam - _popcount_lam(new, catalog.lam_bits))
            skipped.append(i)

    optimal = True
    try:
        rec([], 0, frozenset(), 0.0, 0.0, math.fsum(catalog.lam_bits))
    except _Budget:
        optimal = False
    if best is None:
        return RestrictedResult(None, optimal, nodes[0])
    chosen, assignment = best
    return RestrictedResult(_solution(inst, catalog, chosen, assignment, memo), optimal, nodes[0], chosen)


def _solution(inst, catalog, chosen, assignment, memo) -> Solution:
    entries = [catalog.regions[i] for i in chosen]
    regions = [e.rect for e in entries]
    delays = _delays(memo, _demand_loads(entries, assignment))
    return Solution(
        regions=regions,
        assignment=list(assignment),
        makespan=makespan(inst, regions, assignment),
        delays=dict(sorted(delays.items())),
        feasible=all(t <= inst.t_hat for t in delays.values()),
    )


# -- decomposition loop -------------------------------------------------------------


@dataclass
class DecompStep:
    index: int
    n_lo: int
    n_hi: int
    candidates: int
    t_max: Optional[float]
    optimal: bool
    nodes: int


@dataclass
class DecompResult:
    solution: Optional[Solution]
    trace: List[DecompStep]
    final_interval: Tuple[int, int]  # interval of the last restricted solve
    found_interval: Optional[Tuple[int, int]]  # interval where the returned incumbent first appeared
    initial_interval: Tuple[int, int]  # floor/ceil of |P|/m snapped into omega
    omega: List[int]
    proven_infeasible: bool
    candidate_sets: List[int] = field(default_factory=list, repr=False)


@dataclass
class DecompConfig:
    budget: Optional[int] = None  # search nodes per restricted solve
    until_full: bool = False  # ignore the repeat stop and run until every region is a candidate
    per_drone: bool = True


def _snap(omega: List[int], n_bar: float) -> Tuple[int, int]:
    lo, hi = math.floor(n_bar), math.ceil(n_bar)
    i = bisect.bisect_right(omega, lo) - 1
    j = bisect.bisect_left(omega, hi)
    n_lo = omega[i] if i >= 0 else omega[0]
    n_hi = omega[j] if j < len(omega) else omega[-1]
    return n_lo, n_hi


def decompose_solve(inst: Instance, cfg: DecompConfig = DecompConfig(), catalog: Optional[SubRegionCatalog] = None,
                    g: Optional[GeoSums] = None) -> DecompResult:
    catalog = catalog if catalog is not None else enumerate_rects(inst, g)
    omega = catalog.omega
    memo = MmfMemo(inst.topology)
    n_lo, n_hi = _snap(omega, len(inst.photos) / inst.m)
    initial = (n_lo, n_hi)
    chosen: set = set()
    trace: List[DecompStep] = []
    sizes: List[int] = []
    incumbent = None
    result: Optional[RestrictedResult] = None
    found_at = None
    prev_t = None
    i = 0
    while True:
        i += 1
        chosen.update(catalog.omega_map[n_lo])
        chosen.update(catalog.omega_map[n_hi])
        res = solve_restricted(inst, catalog, sorted(chosen), cfg.budget, incumbent, memo, cfg.per_drone)
        t = res.solution.makespan if res.solution else None
        trace.append(DecompStep(i, n_lo, n_hi, len(chosen), t, res.optimal, res.nodes))
        sizes.append(len(chosen))
        log.info("iteration %d interval [%d,%d] candidates=%d T_max=%s optimal=%s",
                 i, n_lo, n_hi, len(chosen), t, res.optimal)
        if not res.optimal:
            log.warning("iteration %d hit the node budget; continuing with the best found", i)
        if res.solution is not None:
            if result is None or result.solution is None or res.solution.makespan < result.solution.makespan:
                found_at = (n_lo, n_hi)
            result = res
            incumbent = (t, res.chosen, res.solution.assignment)
        final = (n_lo, n_hi)
        if t is not None and prev_t is not None and t == prev_t and not cfg.until_full:
            break
        if len(chosen) == len(catalog):
            break
        prev_t = t
        a = bisect.bisect_left(omega, n_lo)
        b = bisect.bisect_right(omega, n_hi)
        n_lo = omega[a - 1] if a > 0 else n_lo
        n_hi = omega[b] if b < len(omega) else n_hi
    sol = result.solution if result else None
    return DecompResult(
        solution=sol,
        trace=trace,
        final_interval=final,
        found_interval=found_at if sol else None,
        initial_interval=initial,
        omega=list(omega),
        proven_infeasible=sol is None and len(chosen) == len(catalog) and all(s.optimal for s in trace),
        candidate_sets=sizes,
    )


# -- exports ------------------------------------------------------------------------------


def catalog_csv(catalog: SubRegionCatalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "c_lt", "c_gt", "l_lo", "l_hi", "cardinality", "time_s"])
    for i, e in enumerate(catalog.regions):
        r = e.rect
        w.writerow([i, r.c_lt, r.c_gt, r.l_lo, r.l_hi, e.count, repr(e.time)])
    return buf.getvalue()


def _num(x: float) -> str:
    return format(x, ".15g")


def _expr(terms: Sequence[Tuple[float, str]]) -> str:
    parts = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        parts.append(f"{sign} {body}")
    if parts and parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    # wrap long rows; LP readers accept continuation lines
    lines, cur = [], ""
    for p in parts:
        if len(cur) + len(p) > 200:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return "\n".join(lines)


def export_milp(inst: Instance, catalog: SubRegionCatalog, candidates: Sequence[int],
                per_drone_coverage: bool = False) -> str:
    """The region-based MILP over ``candidates`` in CPLEX LP text format."""
    cand = sorted(set(candidates))
    if not cand:
        raise ValueError("candidate set is empty")
    regs = catalog.regions
    cap = inst.capable
    topo = inst.topology
    capacity = topo.capacity
    demands = [(h, d) for h in inst.drone_ids for d in cap if h != d]
    on_link: Dict[Tuple[int, int], List[Tuple[int, int]]] = {l: [] for l in sorted(capacity)}
    for f in demands:
        for l in topo.path(*f):
            on_link[l].append(f)

    def q(s, d):
        return f"q_{s}_{d}"

    def mu(s, h):
        return dict(regs[s].data).get(h, 0.0)

    rows: List[str] = []

    def row(name: str, terms, sense: str, rhs: float):
        rows.append(f" {name}: {_expr(terms)} {sense} {_num(rhs)}")

    for d in cap:
        row(f"c2_{d}", [(1.0, "Tmax")] + [(-regs[s].time, q(s, d)) for s in cand], ">=", 0)
    if not math.isinf(inst.t_hat):
        for h, d in demands:
            terms = [(-mu(s, h), q(s, d)) for s in cand if mu(s, h) > 0]
            row(f"c3_{h}_{d}", [(inst.t_hat, f"phi_{h}_{d}")] + terms, ">=", 0)
    for s in cand:
        row(f"c4_{s}", [(1.0, q(s, d)) for d in cap] + [(-float(inst.sigma), f"o_{s}")], ">=", 0)
    for bit, p in enumerate(catalog.photo_order):
        terms = [(1.0, f"o_{s}") for s in cand if regs[s].mask >> bit & 1]
        if not terms:
            raise ValueError(f"photo {inst.photos[p].id} is in no candidate region")
        row(f"c5_{inst.photos[p].id}", terms, ">=", 1)
    row("c6", [(1.0, f"o_{s}") for s in cand], "=", inst.m)
    for h, d in demands:
        terms = [(-mu(s, h), q(s, d)) for s in cand if mu(s, h) > 0]
        row(f"c7_{h}_{d}", [(1.0, f"z_{h}_{d}")] + terms, "<=", 0)
    for h, d in demands:
        cbar = min(capacity[l] for l in topo.path(h, d))
        row(f"c8_{h}_{d}", [(1.0, f"phi_{h}_{d}"), (-cbar, f"z_{h}_{d}")], "<=", 0)
    for h, d in demands:
        terms = [(1.0, f"w_{h}_{d}_{i}_{j}") for i, j in topo.path(h, d)]
        row(f"c9_{h}_{d}", terms + [(-1.0, f"z_{h}_{d}")], ">=", 0)
    for (i, j), fs in on_link.items():
        if fs:
            row(f"c10_{i}_{j}", [(1.0, f"phi_{a}_{b}") for a, b in fs], "<=", capacity[(i, j)])
    for (i, j), fs in on_link.items():
        c = capacity[(i, j)]
        for h, d in fs:
            row(f"c11_{i}_{j}_{h}_{d}", [(1.0, f"phi_{a}_{b}") for a, b in fs] + [(-c, f"w_{h}_{d}_{i}_{j}")], ">=", 0)
    for (i, j), fs in on_link.items():
        for h, d in fs:
            row(f"c12_{i}_{j}_{h}_{d}", [(1.0, f"u_{i}_{j}"), (-1.0, f"phi_{h}_{d}")], ">=", 0)
    for (i, j), fs in on_link.items():
        c = capacity[(i, j)]
        for h, d in fs:
            row(f"c13_{i}_{j}_{h}_{d}",
                [(1.0, f"phi_{h}_{d}"), (-1.0, f"u_{i}_{j}"), (-c, f"w_{h}_{d}_{i}_{j}")], ">=", -c)
    if per_drone_coverage:
        for d in cap:
            row(f"cov_{d}", [(1.0, q(s, d)) for s in cand], ">=", 1)

    binaries = [q(s, d) for s in cand for d in cap] + [f"o_{s}" for s in cand]
    binaries += [f"z_{h}_{d}" for h, d in demands]
    binaries += [f"w_{h}_{d}_{i}_{j}" for h, d in demands for i, j in topo.path(h, d)]
    out = [
        f"\\ region-based covering-assignment model: {inst.name or 'instance'}",
        f"\\ sigma={inst.sigma} t_hat={format_t_hat(inst.t_hat)} m={inst.m} candidates={len(cand)}",
        f"\\ lower bound {_num(lower_bound(inst))}",
        "Minimize",
        " obj: Tmax",
        "Subject To",
        *rows,
        "Bounds",
        " Tmax >= 0",
        *[f" phi_{h}_{d} >= 0" for h, d in demands],
        *[f" u_{i}_{j} >= 0" for (i, j) in sorted(capacity)],
        "Binaries",
        *[f" {v}" for v in binaries],
        "End",
    ]
    return "\n".join(out) + "\n"

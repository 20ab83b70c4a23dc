"""Exhaustive exact solver for tiny instances, built without GeoSums or pruning."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional

from . import mmf
from .model import Instance, Rect, Solution, transfer_loads

SUBSET_LIMIT = 10**6
ASSIGN_LIMIT = 10**6


class TooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    optimum: Optional[float]  # None when no feasible solution exists
    solution: Optional[Solution]
    optimal_coverings: int

    @property
    def feasible(self) -> bool:
        return self.optimum is not None


def all_rects(inst: Instance) -> List[Rect]:
    """Every distinct nonempty photo set cut out by a rectangle, as its tight Rect."""
    seen = {}
    for c0 in range(inst.n_cols):
        for c1 in range(c0, inst.n_cols):
            for l0 in range(inst.n_rows):
                for l1 in range(l0, inst.n_rows):
                    inside = tuple(inst.photos_in(Rect(c0, c1, l0, l1)))
                    if inside and inside not in seen:
                        cols = [inst.cols[i] for i in inside]
                        rows = [inst.rows[i] for i in inside]
                        seen[inside] = Rect(min(cols), max(cols), min(rows), max(rows))
    return [seen[k] for k in sorted(seen, key=lambda k: (len(k), k))]


def brute_force_opt(inst: Instance) -> OracleResult:
    rects = all_rects(inst)
    m, sigma = inst.m, inst.sigma
    if math.comb(len(rects), m) > SUBSET_LIMIT:
        raise TooLarge(f"{math.comb(len(rects), m)} region subsets exceed the oracle limit")
    if math.comb(m, sigma) ** m > ASSIGN_LIMIT:
        raise TooLarge("assignment enumeration exceeds the oracle limit")

    members = [set(inst.photos_in(r)) for r in rects]
    times = [math.fsum(inst.photos[i].lam for i in sorted(s)) for s in members]
    everyone = set(range(len(inst.photos)))
    cap = inst.capable
    options = list(itertools.combinations(cap, sigma))
    rates_cache = {}

    def delays_ok(regions, assignment):
        loads = transfer_loads(inst, regions, assignment)
        if not loads:
            return True, {}
        key = tuple(sorted(loads))
        if key not in rates_cache:
            ds = mmf.make_demands(inst.topology, dict.fromkeys(key, 1.0))
            rates_cache[key] = mmf.water_fill(inst.topology, ds).rates
        rates = rates_cache[key]
        delays = {k: v / rates[k] for k, v in loads.items()}
        return all(t <= inst.t_hat for t in delays.values()), delays

    best = math.inf
    best_sol = None
    n_best = 0
    for subset in itertools.combinations(range(len(rects)), m):
        if set().union(*(members[i] for i in subset)) != everyone:
            continue
        regions = [rects[i] for i in subset]
        local = math.inf
        local_sol = None
        for combo in itertools.product(options, repeat=m):
            if set(itertools.chain.from_iterable(combo)) != set(cap):
                continue
            totals = dict.fromkeys(cap, 0.0)
            for i, ds in zip(subset, combo):
                for d in ds:
                    totals[d] += times[i]
            value = max(totals.values())
            if value >= local:
                continue
            ok, delays = delays_ok(regions, combo)
            if ok:
                local = value
                local_sol = Solution(regions, [frozenset(c) for c in combo], value,
                                     dict(sorted(delays.items())), True)
        if local < best:
            best, best_sol, n_best = local, local_sol, 1
        elif local == best and local < math.inf:
            n_best += 1
    if best_sol is None:
        return OracleResult(None, None, 0)
    return OracleResult(best, best_sol, n_best)

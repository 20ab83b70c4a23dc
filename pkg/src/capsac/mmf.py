"""Max-min fair rate allocation over a tree network (water-filling)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

Link = Tuple[int, int]
DemandKey = Tuple[int, int]

SATURATION_TOL = 1e-9


@dataclass(frozen=True)
class Demand:
    h: int
    d: int
    load: float
    path: Tuple[Link, ...]

    @property
    def key(self) -> DemandKey:
        return (self.h, self.d)


@dataclass
class RateAllocation:
    rates: Dict[DemandKey, float] = field(default_factory=dict)
    link_usage: Dict[Link, float] = field(default_factory=dict)
    bottleneck: Dict[DemandKey, Link] = field(default_factory=dict)


def make_demands(topo, loads: Mapping[DemandKey, float]) -> List[Demand]:
    """Active demands (positive load, h != d) routed over ``topo``."""
    return [
        Demand(h, d, load, topo.path(h, d))
        for (h, d), load in sorted(loads.items())
        if load > 0 and h != d
    ]


def water_fill(topo, demands: Sequence[Demand]) -> RateAllocation:
    """Progressive filling: saturate the tightest link, freeze its demands, repeat.

    Only which demands are active matters; loads are ignored.
    """
    capacity = topo.capacity
    keys = sorted({dm.key for dm in demands})
    paths = {}
    for dm in demands:
        if not dm.path:
            raise ValueError(f"demand {dm.key} has an empty path")
        paths[dm.key] = dm.path
    on_link: Dict[Link, List[DemandKey]] = {}
    for k in keys:
        for link in paths[k]:
            if not capacity[link] > 0:
                raise ValueError(f"link {link} has nonpositive capacity")
            on_link.setdefault(link, []).append(k)

    residual = {link: capacity[link] for link in on_link}
    unfrozen = {link: len(ks) for link, ks in on_link.items()}
    rates: Dict[DemandKey, float] = {}
    while len(rates) < len(keys):
        share = min(residual[link] / n for link, n in unfrozen.items() if n > 0)
        tight = [
            link
            for link in sorted(unfrozen)
            if unfrozen[link] > 0
            and residual[link] / unfrozen[link] <= share * (1 + 1e-12)
        ]
        frozen_now = []
        for link in tight:
            for k in on_link[link]:
                if k not in rates:
                    rates[k] = share
                    frozen_now.append(k)
        for k in frozen_now:
            for link in paths[k]:
                residual[link] -= share
                unfrozen[link] -= 1

    usage = {link: math.fsum(rates[k] for k in ks) for link, ks in sorted(on_link.items())}
    alloc = RateAllocation(rates=rates, link_usage=usage)
    alloc.bottleneck = _witnesses(capacity, paths, on_link, alloc)
    return alloc


def _witnesses(capacity, paths, on_link, alloc: RateAllocation) -> Dict[DemandKey, Link]:
    found = {}
    for k, path in paths.items():
        for link in path:
            if _is_bottleneck(k, link, capacity, on_link, alloc):
                found[k] = link
                break
    return found


def _is_bottleneck(k, link, capacity, on_link, alloc: RateAllocation) -> bool:
    saturated = alloc.link_usage.get(link, 0.0) >= capacity[link] - SATURATION_TOL
    top = max(alloc.rates[o] for o in on_link[link])
    return saturated and alloc.rates[k] >= top - SATURATION_TOL


def delays(alloc: RateAllocation, demands: Iterable[Demand]) -> Dict[DemandKey, float]:
    """Transfer time (load / rate) of each demand."""
    out = {}
    for dm in demands:
        rate = alloc.rates.get(dm.key, 0.0)
        if not rate > 0:
            raise ValueError(f"demand {dm.key} has zero rate")
        out[dm.key] = dm.load / rate
    return out


def check_feasible(delay_map: Mapping[DemandKey, float], t_hat: float) -> bool:
    return all(t <= t_hat for t in delay_map.values())


def verify_mmf(topo, demands: Sequence[Demand], alloc: RateAllocation) -> List[str]:
    """Check capacity limits and the two bottleneck conditions for every active demand."""
    capacity = topo.capacity
    violations = []
    on_link: Dict[Link, List[DemandKey]] = {}
    for dm in demands:
        for link in dm.path:
            on_link.setdefault(link, []).append(dm.key)
    usage = {
        link: math.fsum(alloc.rates.get(k, 0.0) for k in ks) for link, ks in on_link.items()
    }
    for link in sorted(usage):
        if usage[link] > capacity[link] + SATURATION_TOL:
            violations.append(
                f"link {link} oversubscribed: {usage[link]:g} > {capacity[link]:g}"
            )
    for dm in demands:
        if dm.load <= 0:
            continue
        rate = alloc.rates.get(dm.key)
        if rate is None or not rate > 0:
            violations.append(f"demand {dm.key} has no positive rate")
            continue
        has_bottleneck = False
        for link in dm.path:
            saturated = usage[link] >= capacity[link] - SATURATION_TOL
            top = max(alloc.rates.get(o, 0.0) for o in on_link[link])
            if saturated and rate >= top - SATURATION_TOL:
                has_bottleneck = True
                break
        if not has_bottleneck:
            violations.append(f"demand {dm.key} has no bottleneck link")
    return violations


class MmfMemo:
    """Caches allocations by the set of active demands; capacities are fixed per topology."""

    def __init__(self, topo):
        self.topo = topo
        self._table: Dict[Tuple[DemandKey, ...], Dict[DemandKey, float]] = {}
        self.hits = 0
        self.misses = 0

    def rates(self, keys: Iterable[DemandKey]) -> Dict[DemandKey, float]:
        key = tuple(sorted(keys))
        found = self._table.get(key)
        if found is None:
            self.misses += 1
            demands = [Demand(h, d, 1.0, self.topo.path(h, d)) for h, d in key]
            found = water_fill(self.topo, demands).rates
            self._table[key] = found
        else:
            self.hits += 1
        return found

    def __len__(self):
        return len(self._table)


def transfer_delays(
    topo, loads: Mapping[DemandKey, float], memo: Optional[MmfMemo] = None
) -> Dict[DemandKey, float]:
    """Delays for every active demand in ``loads``."""
    active = {k: v for k, v in loads.items() if v > 0 and k[0] != k[1]}
    if not active:
        return {}
    if memo is not None:
        rates = memo.rates(active)
        return {k: load / rates[k] for k, load in active.items()}
    demands = make_demands(topo, active)
    return delays(water_fill(topo, demands), demands)

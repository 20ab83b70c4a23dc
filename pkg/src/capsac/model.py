"""Problem instance and solution data model.

Photos live on a planar grid whose axes are the sorted distinct longitudes
(columns) and latitudes (rows).  Regions are axis-aligned rectangles given by
border indices into those axes, with inclusive borders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import jsonschema
import networkx as nx

from capsac import mmf

Link = Tuple[int, int]
DemandKey = Tuple[int, int]


class InstanceError(ValueError):
    """Raised when an instance document is malformed or inconsistent."""


@dataclass(frozen=True)
class Photo:
    id: int
    lat: float
    lng: float
    lam: float
    mu: float
    holders: FrozenSet[int]


@dataclass(frozen=True)
class Drone:
    id: int
    capable: bool


@dataclass(frozen=True)
class Topology:
    """Undirected tree over drones; each link has one capacity shared by both directions."""

    nodes: Tuple[int, ...]
    links: Tuple[Tuple[int, int, float], ...]
    _paths: Dict[DemandKey, Tuple[Link, ...]] = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        for u, v, cap in self.links:
            if u not in g or v not in g:
                raise InstanceError(f"link ({u}, {v}) references unknown drone")
            if not cap > 0:
                raise InstanceError(f"link ({u}, {v}) has nonpositive capacity")
            if g.has_edge(u, v) or u == v:
                raise InstanceError("topology is not a tree")
            g.add_edge(u, v)
        if len(self.nodes) == 0 or not nx.is_tree(g):
            raise InstanceError("topology is not a tree")
        paths = {}
        for src, targets in nx.all_pairs_shortest_path(g):
            for dst, nodes in targets.items():
                if src != dst:
                    paths[(src, dst)] = tuple(
                        link_key(a, b) for a, b in zip(nodes, nodes[1:])
                    )
        object.__setattr__(self, "_paths", paths)

    @property
    def capacity(self) -> Dict[Link, float]:
        return {link_key(u, v): cap for u, v, cap in self.links}

    def path(self, h: int, d: int) -> Tuple[Link, ...]:
        """Links on the unique tree path from ``h`` to ``d`` (empty when h == d)."""
        if h == d:
            return ()
        return self._paths[(h, d)]


def link_key(u: int, v: int) -> Link:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Rect:
    """Rectangle of border indices: columns c_lt..c_gt, rows l_lo..l_hi (inclusive)."""

    c_lt: int
    c_gt: int
    l_lo: int
    l_hi: int

    def contains(self, col: int, row: int) -> bool:
        return self.c_lt <= col <= self.c_gt and self.l_lo <= row <= self.l_hi

    def is_valid(self, n_cols: int, n_rows: int) -> bool:
        return (0 <= self.c_lt <= self.c_gt < n_cols) and (0 <= self.l_lo <= self.l_hi < n_rows)


@dataclass(frozen=True)
class Instance:
    photos: Tuple[Photo, ...]
    drones: Tuple[Drone, ...]
    topology: Topology
    sigma: int
    t_hat: float = math.inf
    name: str = ""
    lngs: Tuple[float, ...] = field(init=False, repr=False)
    lats: Tuple[float, ...] = field(init=False, repr=False)
    cols: Tuple[int, ...] = field(init=False, repr=False)
    rows: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.photos:
            raise InstanceError("instance has no photos")
        drone_ids = [d.id for d in self.drones]
        if len(set(drone_ids)) != len(drone_ids):
            raise InstanceError("duplicate drone ids")
        photo_ids = [p.id for p in self.photos]
        if len(set(photo_ids)) != len(photo_ids):
            raise InstanceError("duplicate photo ids")
        known = set(drone_ids)
        for p in self.photos:
            if p.lam < 0 or p.mu < 0:
                raise InstanceError(f"photo {p.id} has negative lambda or mu")
            if not p.holders:
                raise InstanceError(f"photo {p.id} is not held by any drone")
            for h in p.holders:
                if h not in known:
                    raise InstanceError(f"photo {p.id} references unknown drone {h}")
        if set(self.topology.nodes) != known:
            raise InstanceError("topology nodes differ from drone ids")
        m = sum(1 for d in self.drones if d.capable)
        if m < 1:
            raise InstanceError("instance has no capable drones")
        if self.sigma < 1:
            raise InstanceError("sigma must be at least 1")
        if self.sigma > m:
            raise InstanceError("sigma exceeds capable drones")
        if not (self.t_hat > 0):
            raise InstanceError("t_hat must be positive")

        lngs = tuple(sorted({p.lng for p in self.photos}))
        lats = tuple(sorted({p.lat for p in self.photos}))
        col_of = {v: i for i, v in enumerate(lngs)}
        row_of = {v: i for i, v in enumerate(lats)}
        object.__setattr__(self, "lngs", lngs)
        object.__setattr__(self, "lats", lats)
        object.__setattr__(self, "cols", tuple(col_of[p.lng] for p in self.photos))
        object.__setattr__(self, "rows", tuple(row_of[p.lat] for p in self.photos))

    @property
    def capable(self) -> Tuple[int, ...]:
        """Sorted ids of the 3D-capable drones."""
        return tuple(sorted(d.id for d in self.drones if d.capable))

    @property
    def drone_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(d.id for d in self.drones))

    @property
    def m(self) -> int:
        return len(self.capable)

    @property
    def n_cols(self) -> int:
        return len(self.lngs)

    @property
    def n_rows(self) -> int:
        return len(self.lats)

    def full_rect(self) -> Rect:
        return Rect(0, self.n_cols - 1, 0, self.n_rows - 1)

    def photos_in(self, rect: Rect) -> List[int]:
        """Positions (into ``photos``) of the photos inside ``rect``."""
        return [i for i, (c, r) in enumerate(zip(self.cols, self.rows)) if rect.contains(c, r)]

    def occupied_cells(self) -> int:
        return len(set(zip(self.cols, self.rows)))

    def with_params(self, sigma: Optional[int] = None, t_hat: Optional[float] = None) -> "Instance":
        return Instance(
            photos=self.photos,
            drones=self.drones,
            topology=self.topology,
            sigma=self.sigma if sigma is None else sigma,
            t_hat=self.t_hat if t_hat is None else t_hat,
            name=self.name,
        )


@dataclass
class Solution:
    regions: List[Rect]
    assignment: List[FrozenSet[int]]
    makespan: float
    delays: Dict[DemandKey, float] = field(default_factory=dict)
    feasible: bool = True


# ---------------------------------------------------------------------------
# JSON documents

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["photos", "drones", "links", "sigma", "t_hat_s"],
    "properties": {
        "name": {"type": "string"},
        "photos": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "lat", "lng", "lambda_s", "mu_mb", "holders"],
                "properties": {
                    "id": {"type": "integer"},
                    "lat": {"type": "number"},
                    "lng": {"type": "number"},
                    "lambda_s": {"type": "number", "minimum": 0},
                    "mu_mb": {"type": "number", "minimum": 0},
                    "holders": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
                },
            },
        },
        "drones": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "capable"],
                "properties": {"id": {"type": "integer"}, "capable": {"type": "boolean"}},
            },
        },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["u", "v", "capacity_mbps"],
                "properties": {
                    "u": {"type": "integer"},
                    "v": {"type": "integer"},
                    "capacity_mbps": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "sigma": {"type": "integer", "minimum": 1},
        "t_hat_s": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "inf"}]},
    },
}


def parse_t_hat(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        return float(value)
    return float(value)


def format_t_hat(value: float):
    return "inf" if math.isinf(value) else value


def instance_from_dict(doc: Mapping) -> Instance:
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InstanceError(f"schema violation: {exc.message}") from exc
    photos = tuple(
        Photo(
            id=p["id"],
            lat=float(p["lat"]),
            lng=float(p["lng"]),
            lam=float(p["lambda_s"]),
            mu=float(p["mu_mb"]),
            holders=frozenset(p["holders"]),
        )
        for p in doc["photos"]
    )
    drones = tuple(Drone(id=d["id"], capable=d["capable"]) for d in doc["drones"])
    topology = Topology(
        nodes=tuple(sorted(d.id for d in drones)),
        links=tuple((lk["u"], lk["v"], float(lk["capacity_mbps"])) for lk in doc["links"]),
    )
    return Instance(
        photos=photos,
        drones=drones,
        topology=topology,
        sigma=doc["sigma"],
        t_hat=parse_t_hat(doc["t_hat_s"]),
        name=doc.get("name", ""),
    )


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"schema violation: {exc}") from exc
    return instance_from_dict(doc)


def instance_to_dict(inst: Instance) -> dict:
    doc = {}
    if inst.name:
        doc["name"] = inst.name
    doc["photos"] = [
        {
            "id": p.id,
            "lat": p.lat,
            "lng": p.lng,
            "lambda_s": p.lam,
            "mu_mb": p.mu,
            "holders": sorted(p.holders),
        }
        for p in inst.photos
    ]
    doc["drones"] = [{"id": d.id, "capable": d.capable} for d in inst.drones]
    doc["links"] = [{"u": u, "v": v, "capacity_mbps": c} for u, v, c in inst.topology.links]
    doc["sigma"] = inst.sigma
    doc["t_hat_s"] = format_t_hat(inst.t_hat)
    return doc


def serialize_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, ensure_ascii=False) + "\n"


# Readers for other instance encodings register here (e.g. the public benchmark set,
# once its layout is inspected).  Each reader maps raw file text to an Instance.
INSTANCE_READERS = {"json": parse_instance}


def register_reader(fmt: str, reader) -> None:
    INSTANCE_READERS[fmt] = reader


def load_instance(path, fmt: str = "json") -> Instance:
    try:
        reader = INSTANCE_READERS[fmt]
    except KeyError:
        raise InstanceError(f"no reader registered for format {fmt!r}") from None
    with open(path, encoding="utf-8") as fh:
        return reader(fh.read())


def solution_to_dict(sol: Solution) -> dict:
    return {
        "makespan_s": sol.makespan,
        "regions": [
            {
                "c_lt": r.c_lt,
                "c_gt": r.c_gt,
                "l_lo": r.l_lo,
                "l_hi": r.l_hi,
                "drones": sorted(a),
            }
            for r, a in zip(sol.regions, sol.assignment)
        ],
        "delays": [
            {"from": h, "to": d, "seconds": t} for (h, d), t in sorted(sol.delays.items())
        ],
        "feasible": sol.feasible,
    }


def solution_from_dict(doc: Mapping) -> Solution:
    regions = [Rect(r["c_lt"], r["c_gt"], r["l_lo"], r["l_hi"]) for r in doc["regions"]]
    assignment = [frozenset(r["drones"]) for r in doc["regions"]]
    delays = {(e["from"], e["to"]): float(e["seconds"]) for e in doc.get("delays", [])}
    return Solution(
        regions=regions,
        assignment=assignment,
        makespan=float(doc["makespan_s"]),
        delays=delays,
        feasible=bool(doc.get("feasible", True)),
    )


# ---------------------------------------------------------------------------
# Evaluation


def lower_bound(inst: Instance) -> float:
    """Perfect division of the total processing work over the capable drones."""
    return inst.sigma * math.fsum(p.lam for p in inst.photos) / inst.m


def region_time_naive(inst: Instance, rect: Rect) -> float:
    return math.fsum(inst.photos[i].lam for i in inst.photos_in(rect))


def drone_totals(
    inst: Instance, region_times: Sequence[float], assignment: Sequence[Iterable[int]]
) -> Dict[int, float]:
    capable = set(inst.capable)
    totals = {d: 0.0 for d in inst.capable}
    for t, drones in zip(region_times, assignment):
        for d in drones:
            if d not in capable:
                raise ValueError(f"assignment references non-capable drone {d}")
            totals[d] += t
    return totals


def makespan(inst: Instance, regions: Sequence[Rect], assignment: Sequence[Iterable[int]]) -> float:
    """Largest total processing time over the capable drones."""
    if len(regions) != len(assignment):
        raise ValueError("assignment does not match regions")
    times = [region_time_naive(inst, r) for r in regions]
    return max(drone_totals(inst, times, assignment).values())


def transfer_loads(
    inst: Instance, regions: Sequence[Rect], assignment: Sequence[Iterable[int]]
) -> Dict[DemandKey, float]:
    """Megabytes each holder must ship to each reconstructing drone (self-demands excluded)."""
    loads: Dict[DemandKey, float] = {}
    for rect, drones in zip(regions, assignment):
        inside = inst.photos_in(rect)
        for d in drones:
            for i in inside:
                p = inst.photos[i]
                for h in p.holders:
                    if h != d:
                        loads[(h, d)] = loads.get((h, d), 0.0) + p.mu
    return {k: v for k, v in loads.items() if v > 0}


def solution_delays(
    inst: Instance, regions: Sequence[Rect], assignment: Sequence[Iterable[int]]
) -> Dict[DemandKey, float]:
    loads = transfer_loads(inst, regions, assignment)
    return mmf.transfer_delays(inst.topology, loads)


def validate_solution(inst: Instance, sol: Solution) -> List[str]:
    """List every constraint the solution breaks; empty when it is feasible."""
    violations: List[str] = []
    if len(sol.regions) != inst.m:
        violations.append(f"expected {inst.m} regions, got {len(sol.regions)}")
    if len(sol.assignment) != len(sol.regions):
        violations.append("assignment does not match regions")
        return violations

    valid_regions = []
    for i, r in enumerate(sol.regions):
        if r.is_valid(inst.n_cols, inst.n_rows):
            valid_regions.append(r)
        else:
            violations.append(f"region {i} has invalid borders")
    covered = set()
    for r in valid_regions:
        covered.update(inst.photos_in(r))
    for i, p in enumerate(inst.photos):
        if i not in covered:
            violations.append(f"photo {p.id} uncovered")

    capable = set(inst.capable)
    used = set()
    assignment_ok = True
    for i, drones in enumerate(sol.assignment):
        for d in sorted(set(drones) - capable):
            violations.append(f"region {i} assigned to non-capable drone {d}")
            assignment_ok = False
        n = len(set(drones) & capable)
        if n < inst.sigma:
            violations.append(f"region {i} assigned to {n} < σ={inst.sigma} drones")
        used.update(drones)
    for d in inst.capable:
        if d not in used:
            violations.append(f"drone {d} has no region")

    if assignment_ok and len(valid_regions) == len(sol.regions):
        expected = makespan(inst, sol.regions, sol.assignment)
        if not math.isclose(expected, sol.makespan, rel_tol=1e-9, abs_tol=1e-9):
            violations.append(f"reported makespan {sol.makespan} differs from {expected}")
        delays = solution_delays(inst, sol.regions, sol.assignment)
        for (h, d), t in sorted(delays.items()):
            if t > inst.t_hat:
                violations.append(f"delay {h}->{d} of {t:g}s exceeds T̂={inst.t_hat:g}s")
    return violations

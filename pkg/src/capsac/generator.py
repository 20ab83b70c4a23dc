"""Deterministic synthetic instances shaped like the public benchmark families."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Tuple

from .model import Instance, instance_from_dict


@dataclass
class GenConfig:
    photos: int
    drones: int
    capable_pct: float
    weighted: bool = False
    lambda_s: float = 26.72
    mu_mb: float = 5.0
    capacity_mbps: float = 10.0
    grid: Optional[Tuple[int, int]] = None  # (rows, cols)
    sigma: int = 1
    t_hat: float = math.inf
    seed: int = 0


def squarest_grid(n: int) -> Tuple[int, int]:
    """(rows, cols) with rows * cols == n, rows <= cols, as close to square as possible."""
    rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
    return rows, n // rows


def instance_name(cfg: GenConfig) -> str:
    tag = "w" if cfg.weighted else "u"
    pct = int(cfg.capable_pct) if float(cfg.capable_pct).is_integer() else cfg.capable_pct
    return f"{tag}-P{cfg.photos}D{cfg.drones}%D̄{pct}"


def capable_count(drones: int, pct: float) -> int:
    return math.floor(drones * pct / 100 + 1e-9)


def generate_doc(cfg: GenConfig) -> dict:
    if cfg.photos < 1 or cfg.drones < 1:
        raise ValueError("need at least one photo and one drone")
    if not 0 < cfg.capable_pct <= 100:
        raise ValueError("capable percentage must be in (0, 100]")
    n_cap = capable_count(cfg.drones, cfg.capable_pct)
    if n_cap < 1:
        raise ValueError("capable percentage leaves no capable drone")
    if not 1 <= cfg.sigma <= n_cap:
        raise ValueError("sigma must lie in [1, capable drones]")
    rows, cols = cfg.grid if cfg.grid else squarest_grid(cfg.photos)
    if rows * cols < cfg.photos:
        raise ValueError(f"grid {rows}x{cols} has fewer cells than photos")

    rng = random.Random(cfg.seed)
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    if len(cells) > cfg.photos:
        cells = sorted(rng.sample(cells, cfg.photos))
    ids = list(range(1, cfg.drones + 1))
    spots = {d: (rng.uniform(0, rows - 1), rng.uniform(0, cols - 1)) for d in ids}
    capable = set(rng.sample(ids, n_cap))

    photos = []
    for i, (r, c) in enumerate(cells):
        holder = min(ids, key=lambda d: ((spots[d][0] - r) ** 2 + (spots[d][1] - c) ** 2, d))
        lam = rng.uniform(0.5 * cfg.lambda_s, 1.5 * cfg.lambda_s) if cfg.weighted else cfg.lambda_s
        photos.append({"id": i, "lat": float(r), "lng": float(c), "lambda_s": lam,
                       "mu_mb": cfg.mu_mb, "holders": [holder]})

    order = ids[:]
    rng.shuffle(order)
    links = [{"u": order[k], "v": order[rng.randrange(k)], "capacity_mbps": cfg.capacity_mbps}
             for k in range(1, len(order))]
    return {
        "name": instance_name(cfg),
        "photos": photos,
        "drones": [{"id": d, "capable": d in capable} for d in ids],
        "links": links,
        "sigma": cfg.sigma,
        "t_hat_s": "inf" if math.isinf(cfg.t_hat) else cfg.t_hat,
    }


def generate(cfg: GenConfig) -> Instance:
    return instance_from_dict(generate_doc(cfg))

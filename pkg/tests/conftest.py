import json
import math
import random

import pytest

from capsac.model import parse_instance


def t4_doc(sigma=1, t_hat="inf"):
    # 2x2 unit grid; drone 1 holds the left column, drone 2 the right one
    photos = [
        {"id": 0, "lat": 0.0, "lng": 0.0, "lambda_s": 10.0, "mu_mb": 5.0, "holders": [1]},
        {"id": 1, "lat": 1.0, "lng": 0.0, "lambda_s": 10.0, "mu_mb": 5.0, "holders": [1]},
        {"id": 2, "lat": 0.0, "lng": 1.0, "lambda_s": 10.0, "mu_mb": 5.0, "holders": [2]},
        {"id": 3, "lat": 1.0, "lng": 1.0, "lambda_s": 10.0, "mu_mb": 5.0, "holders": [2]},
    ]
    return {
        "name": "T4",
        "photos": photos,
        "drones": [{"id": 1, "capable": True}, {"id": 2, "capable": True}],
        "links": [{"u": 1, "v": 2, "capacity_mbps": 1.0}],
        "sigma": sigma,
        "t_hat_s": t_hat,
    }


def t9_doc(sigma=1, t_hat="inf"):
    # 3x3 unit grid; column j is held by drone j + 1; chain 1-2-3
    photos = []
    for col in range(3):
        for row in range(3):
            photos.append(
                {
                    "id": 3 * col + row,
                    "lat": float(row),
                    "lng": float(col),
                    "lambda_s": 10.0,
                    "mu_mb": 1.0,
                    "holders": [col + 1],
                }
            )
    return {
        "name": "T9",
        "photos": photos,
        "drones": [{"id": i, "capable": True} for i in (1, 2, 3)],
        "links": [
            {"u": 1, "v": 2, "capacity_mbps": 1.0},
            {"u": 2, "v": 3, "capacity_mbps": 1.0},
        ],
        "sigma": sigma,
        "t_hat_s": t_hat,
    }


def make(doc):
    return parse_instance(json.dumps(doc))


@pytest.fixture
def t4():
    return make(t4_doc())


@pytest.fixture
def t9():
    return make(t9_doc())


def random_doc(rng: random.Random, n_cols=3, n_rows=3, n_photos=None, n_drones=None,
               n_capable=None, sigma=1, t_hat="inf", int_values=True):
    """Small random instance: photos on distinct cells of an n_cols x n_rows grid."""
    cells = [(c, r) for c in range(n_cols) for r in range(n_rows)]
    if n_photos is None:
        n_photos = rng.randint(1, len(cells))
    chosen = rng.sample(cells, n_photos)
    if n_drones is None:
        n_drones = rng.randint(2, 4)
    if n_capable is None:
        n_capable = rng.randint(1, n_drones)
    ids = list(range(1, n_drones + 1))
    capable = set(rng.sample(ids, n_capable))
    photos = []
    for i, (c, r) in enumerate(chosen):
        lam = float(rng.randint(1, 9)) if int_values else rng.uniform(0.5, 9.5)
        mu = float(rng.randint(1, 4)) if int_values else rng.uniform(0.5, 4.5)
        holders = rng.sample(ids, rng.choice([1, 1, 1, 2]))
        photos.append({"id": i, "lat": float(r), "lng": float(c), "lambda_s": lam,
                       "mu_mb": mu, "holders": holders})
    order = ids[:]
    rng.shuffle(order)
    links = []
    for k in range(1, len(order)):
        links.append({"u": order[k], "v": order[rng.randrange(k)],
                      "capacity_mbps": float(rng.randint(1, 4))})
    return {"photos": photos, "drones": [{"id": i, "capable": i in capable} for i in ids],
            "links": links, "sigma": min(sigma, n_capable), "t_hat_s": t_hat}


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])

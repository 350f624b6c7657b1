"""Pairwise distances between the metaplectic routes on random matrices.

    python3 scripts/route_equivalence.py --dim 2 --count 12 --out routes.csv
"""
import argparse
import csv
import math
import time
from dataclasses import dataclass

from metaplectic.errors import RangeEmpty, SingularBlockA
from metaplectic.grid import GridSpec, gaussian, norm2
from metaplectic.grid import phase_invariant_distance as pid
from metaplectic.ops import ROUTES, apply
from metaplectic.symplectic import random_symplectic_rank


@dataclass
class Config:
    dim: int = 1
    count: int = 10
    n: int = 128
    extent: float = math.sqrt(128)
    seed: int = 0
    out: str = "routes.csv"


def run(cfg: Config):
    spec = GridSpec(cfg.dim, cfg.n, cfg.extent)
    f = gaussian(spec, center=[0.3] * cfg.dim, freq=[0.2] * cfg.dim)
    rows = []
    for i in range(cfg.count):
        rank = i % (cfg.dim + 1)
        S = random_symplectic_rank(cfg.dim, rank, seed=cfg.seed + i)
        outs, times = {}, {}
        for r in ROUTES:
            t0 = time.perf_counter()
            try:
                outs[r] = apply(S, f, r)
            except (SingularBlockA, RangeEmpty):
                continue
            times[r] = time.perf_counter() - t0
        keys = sorted(outs)
        for a_i, a in enumerate(keys):
            for b in keys[a_i + 1:]:
                rows.append({"matrix": i, "rank": rank, "route_a": a, "route_b": b,
                             "distance": pid(outs[a], outs[b]),
                             "norm_a": norm2(outs[a]), "seconds_a": times[a]})
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    worst = max(r["distance"] for r in rows)
    print(f"{len(rows)} route pairs, worst distance {worst:.3e} -> {cfg.out}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in Config.__dataclass_fields__.items():
        p.add_argument(f"--{k}", type=type(v.default), default=v.default)
    run(Config(**vars(p.parse_args())))

"""Compare the single-integral FIO form with ``sigma^w mu(S)`` over random pairs.

Also reports the type-I and zero-block branches when they apply.
"""
import argparse
import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from metaplectic.fio import fio_compose, fio_khee, fio_type1
from metaplectic.grid import GridSpec, gaussian
from metaplectic.grid import phase_invariant_distance as pid
from metaplectic.quantize import PhaseSymbol
from metaplectic.symplectic import random_symplectic_rank


@dataclass
class Config:
    dim: int = 1
    count: int = 8
    n: int = 128
    extent: float = math.sqrt(128)
    amp: float = 0.5
    seed: int = 0
    out: str = "khee.csv"


def bump(d, amp, x0=0.4, xi0=-0.3, width=1.5):
    def fn(x, xi):
        r = sum((x[i] - x0) ** 2 + (xi[i] - xi0) ** 2 for i in range(d))
        return 1 + amp * np.exp(-np.pi * r / width) * np.exp(1j * x[0])
    return fn


def run(cfg: Config):
    spec = GridSpec(cfg.dim, cfg.n, cfg.extent)
    sig = PhaseSymbol.from_function(spec, bump(cfg.dim, cfg.amp))
    f = gaussian(spec, center=[0.3] * cfg.dim, freq=[0.2] * cfg.dim)
    rows = []
    for i in range(cfg.count):
        rank = i % (cfg.dim + 1)
        S = random_symplectic_rank(cfg.dim, rank, seed=cfg.seed + i)
        t0 = time.perf_counter()
        ref = fio_compose(sig, S).apply(f)
        T = fio_khee(sig, S)
        row = {"pair": i, "rank": rank, "form": T.form, "khee": pid(T.apply(f), ref), "type1": ""}
        if rank == cfg.dim:
            row["type1"] = pid(fio_type1(sig, S).apply(f), ref)
        row["seconds"] = time.perf_counter() - t0
        rows.append(row)
        print(row)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in Config.__dataclass_fields__.items():
        p.add_argument(f"--{k}", type=type(v.default), default=v.default)
    run(Config(**vars(p.parse_args())))

"""Gabor-matrix decay of FIO operators, with two controls.

A smooth symbol should give a large fitted exponent; a rough symbol or a
wrong target matrix should not.
"""
import argparse
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from metaplectic.fio import fio_compose, fio_khee, gabor_class_check
from metaplectic.grid import GridSpec
from metaplectic.quantize import PhaseSymbol
from metaplectic.symplectic import J, random_symplectic_rank
from metaplectic.tf import concentration, gabor_matrix, gaussian_window


@dataclass
class Config:
    n: int = 128
    extent: float = math.sqrt(128)
    radius: float = 4.0
    seeds: int = 3
    out: str = "gabor.json"


def run(cfg: Config):
    spec = GridSpec(1, cfg.n, cfg.extent)
    smooth = PhaseSymbol.from_function(
        spec, lambda x, xi: 1 + 0.5 * np.exp(-np.pi * ((x[0] - 0.4) ** 2 + (xi[0] + 0.3) ** 2) / 1.5))
    rng = np.random.default_rng(0)
    rough = PhaseSymbol(spec, values=np.exp(2j * np.pi * rng.random(spec.shape * 2)))
    g = gaussian_window(spec)
    results = []
    for rank in (0, 1):
        for seed in range(cfg.seeds):
            S = random_symplectic_rank(1, rank, seed=seed)
            T = fio_khee(smooth, S)
            G = gabor_matrix(T.apply, g, 1.0, cfg.radius)
            res = {
                "rank": rank, "seed": seed,
                "concentration": concentration(G, S.matrix.T),
                "smooth": asdict(gabor_class_check(T, radius=cfg.radius)),
                "rough": asdict(gabor_class_check(fio_compose(rough, S), radius=cfg.radius)),
                "wrong_matrix": asdict(gabor_class_check(T, radius=cfg.radius,
                                                         matrix=J(1) @ S.matrix.T)),
            }
            results.append(res)
            print(rank, seed, f"conc {res['concentration']:.3f}",
                  f"s_hat smooth {res['smooth']['s_hat']:.2f}",
                  f"rough {res['rough']['s_hat']:.2f}", f"wrong {res['wrong_matrix']['s_hat']:.2f}")
    with open(cfg.out, "w") as fh:
        json.dump({"config": asdict(cfg), "results": results}, fh, indent=2)


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in Config.__dataclass_fields__.items():
        p.add_argument(f"--{k}", type=type(v.default), default=v.default)
    run(Config(**vars(p.parse_args())))

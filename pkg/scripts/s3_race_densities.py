"""Ordering densities of the S3 Chebotarev race over F_7(t).

Prints the Monte Carlo density of each of the six orderings of C1, C2, C3
next to the fraction of n <= X at which the explicit-formula values are in
that order, and the first n where each ordering holds.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from kwrace.density import densities, empirical_density
from kwrace.ffrace import build_cumulative_race, build_race, load_builtin
from kwrace.sampler import SamplerConfig


@dataclass(frozen=True)
class Config:
    seed: int = 0
    samples: int = 200_000
    X: int = 10**6
    cumulative: bool = False


def run(cfg: Config) -> None:
    spec = load_builtin("s3_f7")
    br = (build_cumulative_race if cfg.cumulative else build_race)(spec)
    print(f"angles: {[round(float(t), 6) for t in br.system.angles]}")
    print(f"relations: {[list(v) for v in br.lattice.relations]}  d = {br.closure.d}")
    reps = densities(br.race, br.closure, SamplerConfig(seed=cfg.seed, n_samples=cfg.samples),
                     orderings="all", positivity_n_max=10**4)
    print(f"{'ordering':<12}{'density':>10}{'stderr':>10}{'orbit':>10}{'first n':>9}  existence")
    total = 0.0
    for rep in reps:
        emp = empirical_density(br.race, br.system, cfg.X, rep.ordering).value
        total += rep.value.value
        first = "" if rep.positivity_witness is None else rep.positivity_witness
        print(f"{rep.label:<12}{rep.value.value:>10.5f}{rep.value.stderr:>10.5f}{emp:>10.5f}{first!s:>9}  "
              f"{rep.existence.value}")
    print(f"sum of densities: {total:.6f}")
    print(f"constant terms of the race functions: {np.round([f.constant_term.real for f in br.race.fs], 6)}")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=Config.seed)
    p.add_argument("--samples", type=int, default=Config.samples)
    p.add_argument("--X", type=int, default=Config.X, help="orbit length for the empirical fractions")
    p.add_argument("--cumulative", action="store_true", help="race of places of degree <= n")
    a = p.parse_args()
    run(Config(a.seed, a.samples, a.X, a.cumulative))


if __name__ == "__main__":
    main()

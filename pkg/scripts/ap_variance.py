"""Variance and L2 increments of truncated almost periodic sums.

Part 1: frequencies log p for the first N primes with a_n = 2^-(n+1);
compares the sampled variance of S_N with 2 sum |a_n|^2.
Part 2: frequencies (1, 2/3), where the denominators d_1 = 1 and d_2 = 3
differ; compares E|S_2 - S_1|^2 from sampling with the tail formula
2 |a_2|^2 and with the exact pairing computation.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

from mpmath import mp, mpf

from kwrace.almost_periodic import APSeries, incremental_basis, l2_increment, lattice_for, sample_moments
from kwrace.angles import RelationLattice
from kwrace.sampler import SamplerConfig


@dataclass(frozen=True)
class Config:
    seed: int = 0
    samples: int = 10**6
    sizes: tuple = (4, 16, 64)


def _primes(n: int) -> list[int]:
    out, k = [], 2
    while len(out) < n:
        if all(k % p for p in out):
            out.append(k)
        k += 1
    return out


def run(cfg: Config) -> None:
    print(f"{'N':>4}{'sampled var':>14}{'2 sum|a|^2':>14}{'z':>8}")
    with mp.workprec(320):
        for N in cfg.sizes:
            a = tuple(2.0 ** -(n + 1) for n in range(N))
            s = APSeries(0.0, tuple(mp.log(p) for p in _primes(N)), a)
            lat = RelationLattice.declared(s.system(), ())
            m = sample_moments(s, incremental_basis(s, lat), SamplerConfig(seed=cfg.seed, n_samples=cfg.samples))
            z = (m.variance - s.closed_variance()) / m.variance_se
            print(f"{N:>4}{m.variance:>14.8f}{s.closed_variance():>14.8f}{z:>8.2f}")
        s = APSeries(0.0, (mpf(1), mpf(2) / 3), (1.0, 0.5))
        ib = incremental_basis(s, lattice_for(s))
        res = l2_increment(s, ib, 1, 2, SamplerConfig(seed=cfg.seed, n_samples=cfg.samples))
    print(f"\nfrequencies (1, 2/3), d = {ib.d_seq}, hypothesis checked: {res.hypothesis}")
    print(f"tail formula {res.closed_form:.4f}  exact {res.exact:.4f}  "
          f"sampled {res.mc:.4f} +- {res.mc_se:.4f}  tail formula valid: {res.closed_form_valid}")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=Config.seed)
    p.add_argument("--samples", type=int, default=Config.samples)
    p.add_argument("--sizes", type=int, nargs="+", default=list(Config.sizes))
    a = p.parse_args()
    run(Config(a.seed, a.samples, tuple(a.sizes)))


if __name__ == "__main__":
    main()

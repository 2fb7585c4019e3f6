"""Monte Carlo estimate of the expected number of resamplings.

Compares the mean over many seeds with sum_A x(A)/(1 - x(A)) on a few
small systems where the plain condition Pr[A] <= x'(A) holds.
"""
import argparse
import math
import statistics
from fractions import Fraction

from lllforge.adapters import CnfFormula, cnf_system
from lllforge.engine import run_randomized
from lllforge.model import x_prime

SYSTEMS = {
    "path5": (CnfFormula(11, ((1, 2, 3), (-3, 4, 5), (5, -6, 7), (-7, 8, 9), (9, 10, -11))), Fraction(1, 3)),
    "ring6": (CnfFormula(12, tuple((2 * i + 1, 2 * i + 2, (2 * i + 3) % 12 or 12) for i in range(6))), Fraction(1, 3)),
    "star": (CnfFormula(20, ((1, 2, 3, 4, 5), (1, 6, 7, 8), (2, 9, 10, 11), (3, 12, 13, 14), (4, 15, 16, 17),
                             (5, 18, 19, 20))), Fraction(1, 6)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10_000)
    args = ap.parse_args()
    for name, (formula, xv) in SYSTEMS.items():
        s = cnf_system(formula)
        x = [xv] * s.m
        holds = all(e.cond_prob({}) <= xp for e, xp in zip(s.events, x_prime(s, x)))
        counts = [run_randomized(s, seed).steps for seed in range(args.seeds)]
        mean = statistics.fmean(counts)
        se = statistics.stdev(counts) / math.sqrt(len(counts))
        bound = sum(float(v) / (1 - float(v)) for v in x)
        print(f"{name:6} m={s.m} condition={'ok' if holds else 'fails'} mean={mean:.4f} se={se:.4f} bound={bound:.3f}")


if __name__ == "__main__":
    main()

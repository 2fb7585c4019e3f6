"""Write clustered 8-CNF instances (d <= 5) as DIMACS files.

    python scripts/make_instances.py out_dir --count 20 --m0 100 --step 5
"""
import argparse
import random
from pathlib import Path

from lllforge.adapters import cnf_event_system, to_dimacs
from lllforge.generators import clustered_cnf


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--m0", type=int, default=100)
    ap.add_argument("--step", type=int, default=5)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1000)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        f = clustered_cnf(args.m0 + args.step * i, args.k, random.Random(args.seed + i))
        ok = cnf_event_system(f, 1).validation.ok
        path = args.out_dir / f"clustered_{i:02d}_m{f.m}.cnf"
        path.write_text(f"c clustered {args.k}-CNF, d = {f.d}, valid at eps=1: {ok}\n" + to_dimacs(f))
        print(path)


if __name__ == "__main__":
    main()

"""Enumerate every subfamily of the full dyadic tree and compare sparseness with the Carleson constant.

At depth d the tree has 2^(d+1) - 1 cubes, so plain enumeration is practical
up to d = 3; larger depths use random subfamilies.
"""

import argparse
import itertools
import random
import time
from fractions import Fraction

from sparselab.dyadic import Domain, DyadicCube
from sparselab.sparse import carleson_constant, verify_sparse


def check(dom, cubes) -> bool:
    lam = carleson_constant(dom, cubes)
    if not cubes:
        return True
    tight = verify_sparse(dom, cubes, 1 / lam)
    above = 1 / lam + Fraction(1, 1000 * (1 / lam).denominator)
    loose_ok = above > 1 or not verify_sparse(dom, cubes, above).ok
    return tight.ok and tight.family.check() and loose_ok


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--random", type=int, default=0, help="sample this many subfamilies instead")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    dom = Domain(args.depth)
    tree = [DyadicCube(0, k, i) for k in range(args.depth + 1) for i in range(2**k)]
    t0 = time.perf_counter()
    if args.random:
        rnd = random.Random(args.seed)
        fams = ([q for q in tree if rnd.random() < 0.5] for _ in range(args.random))
    else:
        fams = ([q for q, keep in zip(tree, bits) if keep] for bits in itertools.product((0, 1), repeat=len(tree)))
    n = bad = 0
    for cubes in fams:
        n += 1
        bad += not check(dom, cubes)
    print(f"depth {args.depth}: {n} families, {bad} disagreements, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

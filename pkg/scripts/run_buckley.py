"""Fitted slope of log ||M||_{L^p(w)} against log [w]_{A_p} for power weights."""

import argparse

from sparselab.verify import buckley_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--a", type=float, nargs="+", default=[0.5, 0.7, 0.8, 0.9, 0.95])
    ap.add_argument("--depths", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--x0", type=float, default=0.5)
    args = ap.parse_args()
    for L in args.depths:
        rep = buckley_experiment(args.p, args.a, depth=L, x0=args.x0)
        print(f"L={L:2d} p={args.p:g} slope={rep.slope:.3f} (expected {rep.expected:.3f}, band {rep.band})")
        for a, apc, nm, wit in zip(rep.a_grid, rep.ap, rep.norm, rep.witness):
            print(f"   a={a:<5g} [w]_Ap={apc:10.4g} ||M||>={nm:8.4f} via {wit}")


if __name__ == "__main__":
    main()

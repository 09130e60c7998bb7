"""Least reverse-Holder tau over the weight corpus, per resolution.

The frozen default must dominate every tau_min printed here.
"""

import argparse
import json
import math

from sparselab.dyadic import SHIFTS, Domain
from sparselab.verify import load_config
from sparselab.weights import TAU_DEFAULT, power_weight, reverse_holder_report, weight_generators

SAFETY = 2.0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.json")
    ap.add_argument("--depths", type=int, nargs="+", default=[6, 8, 10])
    args = ap.parse_args()
    cfg = load_config(args.config)
    corpus = list(cfg.corpus.ap_weights)
    probes = [{"kind": "power", "a": a, "x0": 0.5} for a in (-0.9, 0.9)]
    worst = 0.0
    print(f"{'weight':40s} " + " ".join(f"L={L:<8d}" for L in args.depths))
    for spec in corpus + probes:
        row = []
        for L in args.depths:
            w = weight_generators(spec, Domain(L)) if spec["kind"] != "power" else power_weight(
                Domain(L), spec["a"], spec.get("x0", 0.5))
            t = max(reverse_holder_report(w, f"dyadic{s}").tau_min for s in SHIFTS)
            if spec in corpus:
                worst = max(worst, t)
            row.append(t)
        tag = "" if spec in corpus else " (probe)"
        print(f"{json.dumps(spec, sort_keys=True)[:40]:40s} " + " ".join(f"{t:<10.4f}" for t in row) + tag)
    suggested = math.ceil(worst * SAFETY * 10) / 10
    print(f"max corpus tau_min = {worst:.4f}; suggested default (x{SAFETY:g}) = {suggested}; current = {TAU_DEFAULT}")


if __name__ == "__main__":
    main()

"""Local decay curves phi(t) for A_S, A_S^r and the commutator forms, with fitted envelopes."""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from sparselab.output import svg_plot
from sparselab.verify import SHAPES, decay_study, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.json")
    ap.add_argument("--depth", type=int, default=None)
    ap.add_argument("--out", default="decay_plots")
    args = ap.parse_args()
    spec = load_config(args.config).decay
    if args.depth is not None:
        spec = replace(spec, depth=args.depth)
    study = decay_study(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = list(spec.t_grid)
    for op, s in study.summary.items():
        res = ", ".join(f"{k}={v:.3g}" for k, v in s["mean_residual"].items())
        print(f"{op:5s} shape={s['shape']:4s} min c2={s['min_c2']:.3g} valid={s['valid']} residuals: {res}")
    for rep in study.reports:
        series = [{"x": t, "y": list(rep.phi), "label": "phi"}]
        for shape in SHAPES:
            env = rep.envelope(shape, np.array(t))
            series.append({"x": t, "y": list(env), "label": f"fit {shape}", "dashed": True})
        name = f"{rep.op}_{rep.label}".replace("/", "_").replace("^", "")
        (out / f"{name}.svg").write_text(svg_plot(series, f"{rep.op} on {rep.label}", "t", "phi(t)", xlog=False))
    print(f"wrote {len(study.reports)} plots to {out}/")


if __name__ == "__main__":
    main()

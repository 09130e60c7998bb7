"""Run artifacts: report.json, tables/*.csv, plots/*.svg, manifest.json, failure dumps.

Every file except the manifest is a pure function of config and seed, so
content hashes are reproducible.  The manifest carries a timestamp that is
excluded from its own content hash.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .suites import Inputs, Instance, Outcome
from .signal import GridFunction

RECORD_COLUMNS = ("id", "depth", "seed", "kind", "kernel", "weights", "form", "lhs", "rhs", "ratio", "ok")


def json_safe(x):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(x, dict):
        return {str(k): json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj) -> str:
    return json.dumps(json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "x"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# SVG


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def svg_plot(series, title: str, xlabel: str, ylabel: str, xlog=True, ylog=True, width=640, height=420) -> str:
    """Minimal line/marker chart; ``series`` is a list of dicts with x, y, label, style."""
    pts = []
    for s in series:
        for x, y in zip(s["x"], s["y"]):
            if (not xlog or x > 0) and (not ylog or y > 0) and math.isfinite(x) and math.isfinite(y):
                pts.append((x, y))
    tx = (lambda v: math.log10(v)) if xlog else (lambda v: v)
    ty = (lambda v: math.log10(v)) if ylog else (lambda v: v)
    if pts:
        xs = [tx(p[0]) for p in pts]
        ys = [ty(p[1]) for p in pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 70, 170, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (ty(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{ml + pw / 2:.0f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="16" y="{mt + ph / 2:.0f}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {mt + ph / 2:.0f})">{_esc(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        xl = f"1e{xv:.1f}" if xlog else f"{xv:.3g}"
        yl = f"1e{yv:.1f}" if ylog else f"{yv:.3g}"
        out.append(f'<text x="{ml + frac * pw:.0f}" y="{mt + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{xl}</text>')
        out.append(f'<text x="{ml - 6}" y="{mt + ph - frac * ph + 3:.0f}" text-anchor="end" font-family="sans-serif" font-size="10">{yl}</text>')
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")
    for k, s in enumerate(series):
        color = s.get("color", palette[k % len(palette)])
        good = [(x, y) for x, y in zip(s["x"], s["y"])
                if math.isfinite(x) and math.isfinite(y) and (not xlog or x > 0) and (not ylog or y > 0)]
        if not good:
            continue
        if s.get("style", "line") == "line":
            d = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in good)
            dash = ' stroke-dasharray="5,3"' if s.get("dashed") else ""
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{d}"/>')
        else:
            for x, y in good:
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        if s.get("label"):
            ly = mt + 14 * (k + 1)
            out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 28}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{ml + pw + 32}" y="{ly}" font-family="sans-serif" font-size="10">{_esc(s["label"])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# run outputs


def _suite_summary(rep) -> dict:
    d = rep.to_dict()
    d.pop("records")
    d["n_records"] = len(rep.records)
    return d


def render_outputs(result) -> dict:
    """Relative path -> text for every artifact except the manifest."""
    files: dict = {}
    if not (result.reports or result.decay or result.buckley or result.cp):
        return files
    report = result.to_dict()
    report["suites"] = {n: _suite_summary(r) for n, r in result.reports.items()}
    files["report.json"] = dumps(report)
    for name, rep in result.reports.items():
        rows = [[r[c] for c in RECORD_COLUMNS] for r in rep.records]
        files[f"tables/{safe_name(name)}.csv"] = _csv_text(RECORD_COLUMNS, rows)
    if result.decay is not None:
        rows = []
        for r in result.decay.reports:
            rows.extend([r.label, r.op, t, phi] for t, phi in zip(r.t_grid, r.phi))
        files["tables/decay.csv"] = _csv_text(("instance", "op", "t", "phi"), rows)
        for op in ("A", "A^r", "comm"):
            rs = [r for r in result.decay.reports if r.op == op]
            shape = rs[0].designated
            series = [{"x": r.t_grid, "y": r.phi, "label": r.label} for r in rs]
            env_t = list(np.geomspace(1.0, rs[0].t_grid[-1], 40))
            series.append({"x": env_t, "y": list(rs[0].envelope(shape, env_t)), "label": f"envelope[{rs[0].label}]",
                           "dashed": True, "color": "black"})
            files[f"plots/decay-{safe_name(op.replace('^', ''))}.svg"] = svg_plot(
                series, f"decay of phi(t), operator {op}, shape {shape}", "t", "phi(t)")
    if result.buckley is not None:
        rows = []
        for b in result.buckley:
            rows.extend([b.p, a, ap, nm, wt] for a, ap, nm, wt in zip(b.a_grid, b.ap, b.norm, b.witness))
        files["tables/buckley.csv"] = _csv_text(("p", "a", "ap", "norm", "witness"), rows)
        series = []
        for b in result.buckley:
            series.append({"x": b.ap, "y": b.norm, "label": f"p={b.p:g} slope={b.slope:.3f}", "style": "marker"})
            c = float(np.exp(np.mean(np.log(b.norm)) - b.slope * np.mean(np.log(b.ap))))
            series.append({"x": b.ap, "y": [c * a**b.slope for a in b.ap], "label": "", "dashed": True})
        files["plots/buckley.svg"] = svg_plot(series, "operator norm of M against [w]_Ap", "[w]_Ap", "||M||")
    if result.cp is not None:
        rows = []
        for c in result.cp:
            rows.extend([c.label, c.depth, c.p, d, v, c.a1, c.ainfty] for d, v in zip(c.deltas, c.curve))
        files["tables/cp_profiles.csv"] = _csv_text(("weight", "depth", "p", "delta", "cp", "a1", "ainfty"), rows)
    return files


def write_outputs(result, out_dir) -> dict:
    """Write all artifacts and the manifest; returns the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = render_outputs(result)
    for rel, text in files.items():
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    entries = [{"path": rel, "sha256": hashlib.sha256(text.encode()).hexdigest(), "bytes": len(text.encode())}
               for rel, text in sorted(files.items())]
    content = hashlib.sha256(json.dumps(entries, sort_keys=True).encode()).hexdigest()
    manifest = {
        "tool": "sparselab",
        "version": __version__,
        "config_hash": result.config.digest,
        "seed": result.config.seed,
        "passed": result.passed,
        "files": entries,
        "content_hash": content,
        "timestamps": {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")},
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return manifest


# ---------------------------------------------------------------------------
# failure dumps

DUMP_VERSION = 1


def _family_dict(fam) -> dict:
    if hasattr(fam, "to_dict"):
        return fam.to_dict()
    return {"cubes": [list(q.as_tuple()) for q in fam]}


def write_dump(dump_dir, inst: Instance, inputs: Inputs, outcomes: list, config_hash: str = "") -> Path:
    """Instance description, input functions as CSV and extracted cube families."""
    d = Path(dump_dir)
    (d / "functions").mkdir(parents=True, exist_ok=True)
    names = []
    for name, fn in sorted(inputs.functions().items()):
        fn.to_csv(d / "functions" / f"{name}.csv")
        names.append(name)
    meta = {
        "dump_version": DUMP_VERSION,
        "id": inst.id,
        "instance": inst.to_dict(),
        "config_hash": config_hash,
        "functions": names,
        "outcomes": [outcome_dict(o) for o in outcomes],
    }
    (d / "instance.json").write_text(dumps(meta))
    cubes = {"forms": {o.form: [_family_dict(f) for f in o.families] for o in outcomes}}
    (d / "cubes.json").write_text(dumps(cubes))
    return d


def outcome_dict(o: Outcome) -> dict:
    return {"form": o.form, "lhs": o.lhs, "rhs": o.rhs, "ratio": o.ratio, "ok": o.ok}


class DumpError(ValueError):
    """Missing or corrupted dump."""


def read_dump(dump_dir) -> tuple[Instance, Inputs, dict]:
    d = Path(dump_dir)
    try:
        meta = json.loads((d / "instance.json").read_text())
        inst = Instance.from_dict(meta["instance"])
        names = meta["functions"]
        if not isinstance(names, list) or not names:
            raise DumpError("instance.json lists no functions")
        fns = {}
        for name in names:
            f = GridFunction.from_csv(d / "functions" / f"{name}.csv")
            if f.domain.depth != inst.depth:
                raise DumpError(f"{name}.csv has depth {f.domain.depth}, instance has {inst.depth}")
            if not np.all(np.isfinite(f.values)):
                raise DumpError(f"{name}.csv holds non-finite values")
            fns[name] = f
        json.loads((d / "cubes.json").read_text())
        inputs = Inputs.from_functions(fns)
    except DumpError:
        raise
    except FileNotFoundError as e:
        raise DumpError(f"missing dump file: {e.filename}") from None
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise DumpError(f"corrupted dump: {type(e).__name__}: {e}") from None
    return inst, inputs, meta

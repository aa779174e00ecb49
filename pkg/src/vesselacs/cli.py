"""Batch command-line front-end.

Subcommands: extract, sample, select, segment, evaluate, report, synth,
tsp-verify. Configuration is a flat key=value file overridden by CLI flags;
every emitted file embeds (config hash, seed, tool version). File writes are
atomic (write-temp-then-rename). Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .errors import DataError, UsageError, VesselacsError
from . import acs, evaluation, imaging, sampling, selection
from .features import (FEATURE_NAMES, FeatureId, FeatureMatrix, WindowSpec,
                       feature_matrix, fov_pixels, normalize)
from .sampling import SamplePlan, SampleSet
from .selection import HEURISTICS, FeatureSubset

# Previously reported segmentation results used for the report delta column.
REFERENCE_BASELINES = {
    "relief": (75.84, 93.88, 91.55),
    "cfs": (75.41, 93.81, 91.43),
    "fisher": (73.88, 93.49, 90.94),
    "gini": (73.50, 93.36, 90.78),
    "sfs": (74.66, 93.42, 91.01),
    "sbs": (74.97, 93.40, 91.04),
}


def _read_config(path) -> dict:
    cfg = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"config file not found: {path}")
        for line in p.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def _config_hash(cfg: dict) -> str:
    canon = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _stamp(cfg: dict, seed: int) -> list[str]:
    return [f"config_hash={_config_hash(cfg)}", f"seed={seed}",
            f"version={__version__}"]


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_save_image(path, arr: np.ndarray) -> None:
    path = Path(path)
    tmp = path.with_suffix(".tmp" + path.suffix)
    Image.fromarray(arr).save(tmp, format="PNG")
    os.replace(tmp, path)


def _cfg_get(cfg, args, key, default, cast=str):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cast(cfg[key])
    return default


def _window_spec(cfg, args) -> WindowSpec:
    return WindowSpec(
        gray_window=_cfg_get(cfg, args, "gray_window", 9, int),
        hu_window=_cfg_get(cfg, args, "hu_window", 17, int))


def _acs_params(cfg, args, seed) -> acs.AcsParams:
    return acs.AcsParams(
        n_ants=_cfg_get(cfg, args, "n_ants", 64, int),
        n_iterations=_cfg_get(cfg, args, "n_iterations", 30, int),
        beta=_cfg_get(cfg, args, "beta", 2.0, float),
        q0=_cfg_get(cfg, args, "q0", 0.9, float),
        rho=_cfg_get(cfg, args, "rho", 0.1, float),
        phi=_cfg_get(cfg, args, "phi", 0.1, float),
        tau0=_cfg_get(cfg, args, "tau0", 0.1, float),
        max_steps=_cfg_get(cfg, args, "max_steps", 50, int),
        seed=seed)


def _parse_subset(text: str) -> FeatureSubset:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    members = []
    for n in names:
        if n not in FEATURE_NAMES:
            raise UsageError(f"unknown feature name: {n}")
        members.append(FeatureId(FEATURE_NAMES.index(n)))
    return FeatureSubset(members=tuple(sorted(members)), provenance="cli")


def cmd_synth(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    root = Path(args.out)
    ids = []
    for i in range(args.n_images):
        entry = imaging.synth_retina(seed + i, args.width, args.height,
                                     args.n_vessels)
        entry = imaging.DatasetEntry(
            image_id=f"{args.prefix}{i:02d}", image=entry.image,
            fov=entry.fov, truth=entry.truth)
        imaging.save_entry(entry, root)
        ids.append(entry.image_id)
    _atomic_write_text(root / "manifest.txt", "\n".join(ids) + "\n")
    print(f"wrote {len(ids)} synthetic entries under {root}")
    return 0


def cmd_extract(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    w = _window_spec(cfg, args)
    entries = imaging.load_dataset(args.root)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg, seed)
    t0 = time.perf_counter()
    for entry in entries:
        fm = feature_matrix(entry, fov_pixels(entry.fov), w)
        fm.to_csv(out / f"features_{entry.image_id}.csv", header_lines=stamp)
        fm.write_stats_json(out / f"features_{entry.image_id}.stats.json")
    elapsed = time.perf_counter() - t0
    print(f"extracted {len(entries)} images in {elapsed:.1f} s "
          f"(reference full-scale timings: 88-92 s per subset)",
          file=sys.stderr)
    return 0


def cmd_sample(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    w = _window_spec(cfg, args)
    plan = SamplePlan(
        n_vessel_per_image=_cfg_get(cfg, args, "n_vessel", 1000, int),
        n_nonvessel_per_image=_cfg_get(cfg, args, "n_nonvessel", 7000, int),
        seed=seed)
    entries = imaging.load_dataset(args.root)
    combined = sampling.combine(
        sampling.stratified_sample(e, plan, w) for e in entries)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_suffix(out.suffix + ".tmp")
    combined.to_csv(tmp, header_lines=_stamp(cfg, seed))
    os.replace(tmp, out)
    if combined.shortfalls:
        print(f"stratum shortfalls: {combined.shortfalls}", file=sys.stderr)
    print(f"wrote {len(combined)} samples to {out}")
    return 0


def cmd_select(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    samples = SampleSet.from_csv(args.samples)
    names = list(HEURISTICS) if args.heuristic == "all" else [args.heuristic]
    for n in names:
        if n not in HEURISTICS:
            raise UsageError(f"unknown heuristic: {n}")
    k = _cfg_get(cfg, args, "k", 6, int)
    n_bins = _cfg_get(cfg, args, "n_bins", 10, int)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    subsets = {}
    reports = {}
    for name in names:
        t0 = time.perf_counter()
        subset, ranking = selection.run_heuristic(
            name, samples, seed=seed, k=k, n_bins=n_bins)
        elapsed = time.perf_counter() - t0
        subsets[name] = subset
        reports[name] = {
            "heuristic": name,
            "parameters": {"seed": seed, "k": k, "n_bins": n_bins},
            "subset": subset.names(),
            "scores": (None if ranking is None else
                       [[FEATURE_NAMES[f], s] for f, s in ranking.order]),
            "wall_clock_s": round(elapsed, 3),
        }
        lines = [f"# {s}" for s in _stamp(cfg, seed)]
        lines.append("feature,score")
        if ranking is not None:
            for f, s in ranking.order:
                lines.append(f"{FEATURE_NAMES[f]},{s!r}")
        _atomic_write_text(out / f"scores_{name}.csv", "\n".join(lines) + "\n")
    doc = {"config_hash": _config_hash(cfg), "seed": seed,
           "version": __version__, "heuristics": reports}
    if len(names) > 1:
        common = selection.common_features(subsets.values())
        doc["common_features"] = [FEATURE_NAMES[f] for f in common]
        doc["common_features_note"] = (
            "computed from the actual subsets; may differ from published "
            "common-pair claims")
    _atomic_write_text(out / "selection.json", json.dumps(doc, indent=2) + "\n")
    for name in names:
        print(f"{name}: {{{', '.join(subsets[name].names())}}}")
    if "common_features" in doc:
        print(f"common: {{{', '.join(doc['common_features'])}}}")
    return 0


def _metrics_row(name, m: evaluation.Metrics) -> str:
    def fmt(v):
        return "nan" if v is None else f"{v:.4f}"
    return f"{name},{fmt(m.sn)},{fmt(m.sp)},{fmt(m.acc)}"


def cmd_segment(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    w = _window_spec(cfg, args)
    params = _acs_params(cfg, args, seed)
    theta = _cfg_get(cfg, args, "theta", 0.5, float)
    subset = _parse_subset(args.subset)

    train_entries = imaging.load_dataset(args.train_root)
    for e in train_entries:
        if e.truth is None:
            raise DataError(f"{e.image_id}: training entry lacks truth")
    plan = SamplePlan(
        n_vessel_per_image=_cfg_get(cfg, args, "n_vessel", 1000, int),
        n_nonvessel_per_image=_cfg_get(cfg, args, "n_nonvessel", 7000, int),
        seed=seed)
    samples = sampling.combine(
        sampling.stratified_sample(e, plan, w) for e in train_entries)
    model = acs.train_model(samples, subset)

    test_entries = imaging.load_dataset(args.test_root)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    pooled = evaluation.ConfusionCounts(0, 0, 0, 0)
    per_image_metrics = []
    for entry in test_entries:
        fm = feature_matrix(entry, fov_pixels(entry.fov), w)
        pred = acs.acs_segment(fm, entry.fov, model, params, theta)
        _atomic_save_image(out / f"mask_{entry.image_id}.png",
                           (pred * np.uint8(255)))
        if entry.truth is not None:
            c = evaluation.confusion(pred, entry.truth, entry.fov)
            m = evaluation.metrics(c)
            rows.append(_metrics_row(entry.image_id, m))
            pooled = evaluation.add(pooled, c)
            per_image_metrics.append(m)
    lines = [f"# {s}" for s in _stamp(cfg, seed)]
    lines.append("image_id,sn,sp,acc")
    lines.extend(rows)
    if pooled.total:
        lines.append(_metrics_row("pooled", evaluation.metrics(pooled)))
        macro = evaluation.Metrics(
            sn=float(np.mean([m.sn for m in per_image_metrics
                              if m.sn is not None] or [np.nan])),
            sp=float(np.mean([m.sp for m in per_image_metrics
                              if m.sp is not None] or [np.nan])),
            acc=float(np.mean([m.acc for m in per_image_metrics])))
        lines.append(_metrics_row("macro", macro))
    _atomic_write_text(out / "metrics.csv", "\n".join(lines) + "\n")
    print(f"segmented {len(test_entries)} images into {out}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    entries = imaging.load_dataset(args.root)
    pred_dir = Path(args.pred)
    lines = [f"# {s}" for s in _stamp(cfg, seed)]
    lines.append("image_id,sn,sp,acc")
    pooled = evaluation.ConfusionCounts(0, 0, 0, 0)
    for entry in entries:
        if entry.truth is None:
            raise DataError(f"{entry.image_id}: truth mask required")
        mask_path = pred_dir / f"mask_{entry.image_id}.png"
        if not mask_path.exists():
            raise DataError(f"missing prediction: {mask_path}")
        pred = np.asarray(Image.open(mask_path)) >= imaging.MASK_THRESHOLD
        fov = None if args.whole_image else entry.fov
        c = evaluation.confusion(pred, entry.truth, fov)
        lines.append(_metrics_row(entry.image_id, evaluation.metrics(c)))
        pooled = evaluation.add(pooled, c)
    lines.append(_metrics_row("pooled", evaluation.metrics(pooled)))
    out = Path(args.out)
    _atomic_write_text(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return 0


def _read_metrics_csv(path) -> dict:
    rows = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("image_id") or not line:
            continue
        name, sn, sp, acc = line.split(",")
        rows[name] = (float(sn), float(sp), float(acc))
    return rows


def _bar_chart_svg(groups: list[tuple[str, tuple[float, float, float]]]) -> str:
    """Grouped bar chart (SN/SP/ACC per heuristic) as a standalone SVG."""
    width_per_group = 90
    w = 80 + width_per_group * len(groups)
    h = 300
    plot_h = 230
    colors = {"sn": "#d95f02", "sp": "#1b9e77", "acc": "#7570b3"}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
             f'height="{h}" viewBox="0 0 {w} {h}">',
             '<style>text{font:11px sans-serif}</style>']
    for frac in (0, 25, 50, 75, 100):
        y = 20 + plot_h * (1 - frac / 100)
        parts.append(f'<line x1="40" y1="{y:.1f}" x2="{w - 10}" y2="{y:.1f}" '
                     'stroke="#ddd"/>')
        parts.append(f'<text x="8" y="{y + 4:.1f}">{frac}</text>')
    for gi, (name, (sn, sp, acc)) in enumerate(groups):
        x0 = 50 + gi * width_per_group
        for bi, (metric, value) in enumerate(
                zip(("sn", "sp", "acc"), (sn, sp, acc))):
            bh = plot_h * value / 100.0
            x = x0 + bi * 24
            y = 20 + plot_h - bh
            parts.append(
                f'<rect class="bar-{metric}" x="{x}" y="{y:.2f}" width="20" '
                f'height="{bh:.2f}" fill="{colors[metric]}">'
                f'<title>{name} {metric}={value:.2f}</title></rect>')
        parts.append(f'<text x="{x0}" y="{h - 28}">{name}</text>')
    parts.append(f'<text x="50" y="{h - 8}">SN / SP / ACC per heuristic '
                 '(orange / green / purple)</text>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def cmd_report(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    groups = []
    for run in args.runs:
        path = Path(run) / "metrics.csv"
        if not path.exists():
            raise DataError(f"no metrics.csv under {run}")
        rows = _read_metrics_csv(path)
        if "pooled" not in rows:
            raise DataError(f"{path}: no pooled row")
        groups.append((Path(run).name, rows["pooled"]))
    if not groups:
        raise UsageError("no runs given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"# {s}" for s in _stamp(cfg, seed)]
    lines.append("heuristic,sn,sp,acc,ref_sn,ref_sp,ref_acc,delta_acc")
    for name, (sn, sp, acc) in groups:
        ref = REFERENCE_BASELINES.get(name)
        if ref:
            lines.append(f"{name},{sn:.4f},{sp:.4f},{acc:.4f},"
                         f"{ref[0]},{ref[1]},{ref[2]},{acc - ref[2]:.4f}")
        else:
            lines.append(f"{name},{sn:.4f},{sp:.4f},{acc:.4f},,,,")
    _atomic_write_text(out / "comparison.csv", "\n".join(lines) + "\n")
    _atomic_write_text(out / "comparison.svg", _bar_chart_svg(groups))
    print(f"wrote comparison for {len(groups)} runs to {out}")
    return 0


def cmd_tsp_verify(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.instance:
        inst = acs.TspInstance.from_text(Path(args.instance).read_text())
    else:
        rng = np.random.default_rng(seed)
        inst = acs.TspInstance(coords=rng.uniform(0, 1, size=(args.n, 2)))
    params = acs.AcsParams(n_ants=10, n_iterations=_cfg_get(
        cfg, args, "n_iterations", 60, int), seed=seed)
    tour, length, history = acs.acs_tsp(inst, params)
    print(f"cities={inst.n} best_length={length:.6f} tour={tour}")
    if inst.n <= 10:
        _, opt = acs.brute_force_tsp(inst)
        status = "optimal" if abs(length - opt) < 1e-9 else "suboptimal"
        print(f"brute_force_optimum={opt:.6f} ({status})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vesselacs",
        description="Retinal vessel segmentation: features, selection "
                    "heuristics, and ACS classification.")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="global seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n-images", type=int, default=8)
    s.add_argument("--width", type=int, default=128)
    s.add_argument("--height", type=int, default=128)
    s.add_argument("--n-vessels", type=int, default=6)
    s.add_argument("--prefix", default="im")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="per-image full-FOV feature CSVs")
    s.add_argument("--root", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--gray-window", dest="gray_window", type=int)
    s.add_argument("--hu-window", dest="hu_window", type=int)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("sample", help="stratified labeled samples CSV")
    s.add_argument("--root", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--n-vessel", dest="n_vessel", type=int)
    s.add_argument("--n-nonvessel", dest="n_nonvessel", type=int)
    s.add_argument("--gray-window", dest="gray_window", type=int)
    s.add_argument("--hu-window", dest="hu_window", type=int)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("select", help="run feature-selection heuristics")
    s.add_argument("--samples", required=True)
    s.add_argument("--heuristic", default="all",
                   help="one of %s or 'all'" % (HEURISTICS,))
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--n-bins", dest="n_bins", type=int)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("segment", help="train on one split, segment another")
    s.add_argument("--train-root", required=True)
    s.add_argument("--test-root", required=True)
    s.add_argument("--subset", required=True,
                   help="comma-separated feature names, e.g. f2,f5,hu1")
    s.add_argument("--out", required=True)
    s.add_argument("--theta", type=float)
    s.add_argument("--n-vessel", dest="n_vessel", type=int)
    s.add_argument("--n-nonvessel", dest="n_nonvessel", type=int)
    s.add_argument("--n-ants", dest="n_ants", type=int)
    s.add_argument("--n-iterations", dest="n_iterations", type=int)
    s.add_argument("--gray-window", dest="gray_window", type=int)
    s.add_argument("--hu-window", dest="hu_window", type=int)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("evaluate", help="score existing masks against truth")
    s.add_argument("--root", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--whole-image", action="store_true",
                   help="count outside the FOV too")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="merge runs into a comparison + chart")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("tsp-verify", help="validate the ACS core on a TSP")
    s.add_argument("--instance", help="file of 'id x y' lines")
    s.add_argument("--n", type=int, default=8,
                   help="random instance size when no file given")
    s.add_argument("--n-iterations", dest="n_iterations", type=int)
    s.set_defaults(func=cmd_tsp_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _read_config(args.config)
        if args.seed is None and "seed" in cfg:
            args.seed = int(cfg["seed"])
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VesselacsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

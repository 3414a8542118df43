"""Command-line entry point.

Commands: ``segment``, ``evaluate``, ``phantom``, ``gft-curve``, ``info``.
Run configuration can come from a JSON file (--config) mirroring the flag
names; explicit flags win. Exit codes: 0 success, 2 argument error,
3 format error, 4 data error, 5 convergence error, 6 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gft, metrics, phantom, volume
from .errors import ArgumentError, QCutsError
from .segmentation import DEFAULT_PERCENTILES, DEFAULT_SCALES, segment_volume

THREADS_ENV = "QCUTS3D_THREADS"


@dataclass
class RunConfig:
    scales: tuple = DEFAULT_SCALES
    sigma: float = 0.1
    phi_seed: float | None = None
    phi_seed_multiplier: float = 10.0
    axis: str = "z"
    percentiles: tuple = DEFAULT_PERCENTILES
    kernel: str = "absolute"
    threads: int | None = None
    slic_iters: int = 10
    tol: float = 1e-8

    @classmethod
    def load(cls, config_path, overrides: dict) -> "RunConfig":
        values = {}
        if config_path:
            try:
                with open(config_path) as fh:
                    raw = json.load(fh)
            except OSError as exc:
                raise ArgumentError(f"cannot read config {config_path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ArgumentError(f"invalid config JSON {config_path}: {exc}") from exc
            unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**values)
        cfg.scales = tuple(int(s) for s in cfg.scales)
        cfg.percentiles = tuple(float(p) for p in cfg.percentiles)
        if cfg.kernel not in ("absolute", "squared"):
            raise ArgumentError(f"kernel must be 'absolute' or 'squared', got {cfg.kernel!r}")
        if cfg.threads is None and os.environ.get(THREADS_ENV):
            try:
                cfg.threads = int(os.environ[THREADS_ENV])
            except ValueError as exc:
                raise ArgumentError(f"bad {THREADS_ENV} value") from exc
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scales"] = list(self.scales)
        d["percentiles"] = list(self.percentiles)
        return d


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file mirroring these flags")
    p.add_argument("--scales", type=int, nargs="+", default=None,
                   help="supervoxel counts, one pipeline per scale")
    p.add_argument("--sigma", type=float, default=None, help="kernel bandwidth")
    p.add_argument("--phi-seed", dest="phi_seed", type=float, default=None,
                   help="explicit seed potential (overrides the multiplier rule)")
    p.add_argument("--phi-seed-multiplier", dest="phi_seed_multiplier", type=float,
                   default=None, help="seed potential as a multiple of the max degree")
    p.add_argument("--axis", choices=("x", "y", "z"), default=None,
                   help="longitudinal axis for pore-seed scanning")
    p.add_argument("--percentiles", type=float, nargs=2, metavar=("LOW", "HIGH"),
                   default=None, help="contrast stretch percentiles")
    p.add_argument("--kernel", choices=("absolute", "squared"), default=None,
                   help="edge-weight exponent variant")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker count (default: ${THREADS_ENV} or one per scale)")
    p.add_argument("--slic-iters", dest="slic_iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="eigensolver tolerance")


def _config_from_args(args) -> RunConfig:
    keys = [f.name for f in dataclasses.fields(RunConfig)]
    overrides = {k: getattr(args, k, None) for k in keys}
    return RunConfig.load(getattr(args, "config", None), overrides)


def cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    vol = volume.load_volume(args.input)
    t0 = time.perf_counter()
    result = segment_volume(
        vol, cfg.scales, sigma=cfg.sigma, phi_seed=cfg.phi_seed,
        phi_multiplier=cfg.phi_seed_multiplier, axis=cfg.axis,
        percentiles=cfg.percentiles, squared=(cfg.kernel == "squared"),
        slic_iters=cfg.slic_iters, tol=cfg.tol, threads=cfg.threads)
    runtime = time.perf_counter() - t0

    volume.save_mask(result.mask, args.out_mask)
    if args.out_field:
        volume.save_field(result.field.values, args.out_field)
    report = {
        "input": str(args.input),
        "config": cfg.to_dict(),
        "scales": [dataclasses.asdict(d) for d in result.per_scale],
        "fused_solid_fraction": result.mask.solid_fraction,
        "timing": {"runtime_s": runtime},
    }
    if args.out_report:
        with open(args.out_report, "w") as fh:
            json.dump(report, fh, indent=1)
    print(f"segmented {args.input} in {runtime:.2f} s "
          f"(solid fraction {result.mask.solid_fraction:.4f})")
    return 0


def _evaluate_one(pred_path, labels_path, field_path, solid_code):
    pred = volume.load_mask(pred_path)
    truth_labels = volume.load_labels(labels_path)
    truth = volume.binarize_ground_truth(truth_labels, solid_code)
    score = volume.load_field(field_path) if field_path else None
    if score is not None and score.shape != pred.solid.shape:
        raise ArgumentError("field dims do not match mask dims")
    return metrics.evaluate(pred, score, truth)


def cmd_evaluate(args) -> int:
    rows = []
    reports = []
    if args.batch:
        batch = sorted(Path(args.batch).glob("*_pred.raw"))
        if not batch:
            raise ArgumentError(f"no *_pred.raw volumes under {args.batch}")
        for pred_path in batch:
            stem = pred_path.name[: -len("_pred.raw")]
            labels_path = pred_path.with_name(f"{stem}_labels.raw")
            field_path = pred_path.with_name(f"{stem}_field.raw")
            rep = _evaluate_one(pred_path, labels_path,
                                field_path if field_path.exists() else None,
                                args.solid_code)
            reports.append(rep)
            rows.append(rep.csv_row(stem, args.scales or ()))
        mean = {
            "iou": float(np.mean([r.iou for r in reports])),
            "me": float(np.mean([r.me for r in reports])),
            "auroc": (float(np.mean([r.auroc for r in reports]))
                      if all(r.auroc is not None for r in reports) else None),
        }
        auroc_txt = "" if mean["auroc"] is None else f"{mean['auroc']:.6f}"
        rows.append(f"mean,,{mean['iou']:.6f},{auroc_txt},{mean['me']:.6f},")
        payload = {"volumes": [r.to_dict() for r in reports], "mean": mean}
    else:
        if not (args.pred and args.labels):
            raise ArgumentError("evaluate needs --pred and --labels (or --batch)")
        rep = _evaluate_one(args.pred, args.labels, args.field, args.solid_code)
        reports.append(rep)
        rows.append(rep.csv_row(args.volume_id, args.scales or (),
                                runtime_s=args.runtime))
        payload = rep.to_dict()

    text = json.dumps(payload, indent=1)
    print(text)
    if args.json:
        Path(args.json).write_text(text)
    if args.csv:
        Path(args.csv).write_text(
            "\n".join([metrics.MetricsReport.csv_header()] + rows) + "\n")
    return 0


def _parse_phases(text: str) -> dict[str, float]:
    phases = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not value:
            raise ArgumentError(f"bad phase spec {part!r}; expected name=intensity")
        phases[name.strip()] = float(value)
    return phases


def cmd_phantom(args) -> int:
    spec = phantom.PhantomSpec(
        size=args.size,
        grain_count=args.grains,
        radius_range=(args.radius_min, args.radius_max),
        phase_intensities=_parse_phases(args.phases),
        noise_sigma=args.noise,
        blur_sigma=args.blur,
        rng_seed=args.seed,
    )
    vol, labels = phantom.generate(spec)
    prefix = str(args.out)
    volume.save_volume(vol, prefix + "_volume.raw", dtype="f32")
    volume.save_labels(labels, prefix + "_labels.raw")
    print(f"wrote {prefix}_volume.raw and {prefix}_labels.raw "
          f"(solid fraction {(labels.labels == spec.solid_code).mean():.4f})")
    return 0


def cmd_gft_curve(args) -> int:
    cfg = _config_from_args(args)
    vol = volume.load_volume(args.volume)
    labels = volume.load_labels(args.labels)
    if vol.dims != labels.dims:
        raise ArgumentError("volume and labels dims differ")
    from .supervoxel import slic3d
    svmap = slic3d(vol, args.svcount, max_iter=cfg.slic_iters)
    fractions = tuple(float(f) for f in args.fractions.split(","))
    if args.phase_names == "all":
        names = list(labels.codebook.values())
    else:
        names = [n.strip() for n in args.phase_names.split(",")]
    by_name = {name: code for code, name in labels.codebook.items()}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise ArgumentError(f"phases {missing} not in codebook {labels.codebook}")
    curves = {}
    for name in names:
        curves[name] = gft.reconstruction_curve(
            labels, by_name[name], vol, svmap, fractions,
            sigma=cfg.sigma, squared=(cfg.kernel == "squared"))
    lines = ["fraction," + ",".join(f"mse_{n}" for n in names)]
    for i, f in enumerate(fractions):
        vals = ",".join(f"{curves[n][i][1]:.10e}" for n in names)
        lines.append(f"{f:g},{vals}")
    out = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(out)
    else:
        print(out, end="")
    return 0


def cmd_info(args) -> int:
    meta = volume._read_meta(args.path, None)
    print(json.dumps(meta, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcuts3d",
                                description="Binary segmentation of volumetric "
                                            "porous-media images")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("segment", help="run the multi-scale segmentation pipeline")
    ps.add_argument("input", help="raw volume (with JSON sidecar)")
    ps.add_argument("--out-mask", required=True)
    ps.add_argument("--out-field", default=None, help="f32 saliency field output")
    ps.add_argument("--out-report", default=None, help="diagnostics JSON output")
    _add_config_flags(ps)
    ps.set_defaults(func=cmd_segment)

    pe = sub.add_parser("evaluate", help="score a mask against ground-truth labels")
    pe.add_argument("--pred", help="predicted mask (u8 raw)")
    pe.add_argument("--field", default=None, help="saliency field for ROC/AUROC")
    pe.add_argument("--labels", help="ground-truth label volume")
    pe.add_argument("--solid-code", dest="solid_code", type=int, required=True)
    pe.add_argument("--batch", default=None,
                    help="directory of <id>_pred.raw / <id>_labels.raw "
                         "(+ optional <id>_field.raw) triples")
    pe.add_argument("--volume-id", dest="volume_id", default="volume")
    pe.add_argument("--scales", type=int, nargs="+", default=None)
    pe.add_argument("--runtime", type=float, default=None,
                    help="runtime seconds to report in the CSV row")
    pe.add_argument("--json", default=None)
    pe.add_argument("--csv", default=None)
    pe.set_defaults(func=cmd_evaluate)

    pp = sub.add_parser("phantom", help="generate a synthetic phantom pair")
    pp.add_argument("--out", required=True, help="output path prefix")
    pp.add_argument("--size", type=int, default=64)
    pp.add_argument("--grains", type=int, default=24)
    pp.add_argument("--radius-min", dest="radius_min", type=float, default=6.0)
    pp.add_argument("--radius-max", dest="radius_max", type=float, default=10.0)
    pp.add_argument("--phases", default="gas=0.10,water=0.35,oil=0.55,solid=0.90")
    pp.add_argument("--noise", type=float, default=0.0)
    pp.add_argument("--blur", type=float, default=0.0)
    pp.add_argument("--seed", type=int, default=0)
    pp.set_defaults(func=cmd_phantom)

    pg = sub.add_parser("gft-curve", help="low-frequency reconstruction error curve")
    pg.add_argument("--volume", required=True)
    pg.add_argument("--labels", required=True)
    pg.add_argument("--svcount", type=int, default=2000,
                    help="supervoxel count for the graph")
    pg.add_argument("--fractions", default="0.01,0.02,0.05,0.1,0.2,0.5,1.0")
    pg.add_argument("--phases", dest="phase_names", default="all")
    pg.add_argument("--out", default=None, help="CSV output (stdout if omitted)")
    _add_config_flags(pg)
    pg.set_defaults(func=cmd_gft_curve)

    pi = sub.add_parser("info", help="print a raw file's sidecar metadata")
    pi.add_argument("path")
    pi.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QCutsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())

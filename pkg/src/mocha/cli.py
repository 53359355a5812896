"""Command-line entry point.

Exit codes: 0 success, 1 selftest failure, 2 dimension or configuration
error, 3 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats, selftest
from .cost_volume import volume_to_bytes
from .core import ConfigError, DimensionError, DisparityMap, FormatError, MochaError
from .metrics import evaluate
from .motif_graph import MotifGraph, dump_graphs_json
from .pipeline import Pipeline, PipelineConfig, synthetic_pair
from .wavelet import dwt2, idwt2

EXIT_OK, EXIT_SELFTEST, EXIT_DIMENSION, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("mocha")


def _parse_toggles(items: list[str]) -> dict[str, bool]:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or val.lower() not in ("on", "off", "true", "false", "1", "0"):
            raise ConfigError(f"toggle must look like name=on|off, got {item!r}")
        out[key] = val.lower() in ("on", "true", "1")
    return out


def _load_config(args) -> PipelineConfig:
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "iters", None) is not None:
        data["iterations"] = args.iters
    if getattr(args, "threads", None) is not None:
        data["threads"] = args.threads
    toggles = _parse_toggles(getattr(args, "toggle", None) or [])
    if toggles:
        data["toggles"] = {**data.get("toggles", {}), **toggles}
    return PipelineConfig.from_dict(data)


def _load_pair(args) -> tuple[np.ndarray, np.ndarray]:
    """Both views as 3-channel images; grayscale inputs are replicated."""
    left = formats.load_pnm(args.left)
    right = formats.load_pnm(args.right)
    if left.shape[1:] != right.shape[1:]:
        raise DimensionError(f"left {left.shape[1:]} and right {right.shape[1:]} sizes differ")
    return tuple(np.repeat(im, 3, axis=0) if im.shape[0] == 1 else im for im in (left, right))


def _write_graphs(out_dir: Path, graphs: dict[str, list[MotifGraph]], with_distances: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    for view, gs in graphs.items():
        (out_dir / f"graphs_{view}.json").write_text(dump_graphs_json(gs, with_distances))
        by_key: dict[tuple[int, str], list[MotifGraph]] = {}
        for g in gs:
            by_key.setdefault((g.group, g.subband), []).append(g)
        for (group, band), members in by_key.items():
            body = "\n".join(g.to_dot(f"p{g.position}") for g in members)
            (out_dir / f"{view}_g{group}_{band}.dot").write_text(body + "\n")


def cmd_match(args) -> int:
    cfg = _load_config(args)
    left, right = _load_pair(args)
    t0 = time.perf_counter()
    result = Pipeline(cfg)(left, right, collect_graphs=bool(args.dump_motif_graphs))
    elapsed = time.perf_counter() - t0
    formats.save_pfm(args.out, result.disparity.astype(np.float32))
    if args.dump_motif_graphs:
        _write_graphs(Path(args.dump_motif_graphs), result.graphs, args.with_distances)
    if args.dump_iterations:
        d = Path(args.dump_iterations)
        d.mkdir(parents=True, exist_ok=True)
        formats.save_pfm(d / "iter_00.pfm", result.d0.astype(np.float32))
        for k, dk in enumerate(result.iterations, start=1):
            formats.save_pfm(d / f"iter_{k:02d}.pfm", dk.astype(np.float32))
    if args.dump_volume:
        Path(args.dump_volume).write_bytes(volume_to_bytes(result.combined))
    if args.viz:
        formats.save_pnm(args.viz, formats.colorize_disparity(result.disparity, cfg.max_disparity))
    print(json.dumps({"out": str(args.out), "iterations": cfg.iterations,
                      "seconds": round(elapsed, 4),
                      "timings": {k: round(v, 4) for k, v in result.timings.items()}}))
    return EXIT_OK


def cmd_eval(args) -> int:
    disp = formats.load_pfm(args.disp)
    gt = formats.load_pfm(args.gt)
    if disp.shape != gt.shape:
        raise DimensionError(f"disparity {disp.shape} and ground truth {gt.shape} differ")
    mask = gt.valid.copy()
    if args.mask_nonpositive:
        mask &= gt.values > 0
    thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
    report = evaluate(disp.values, np.where(mask, gt.values, 0.0), thresholds, mask)
    print(report.to_json())
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = selftest.run_all(args.trials, args.seed)
    ok = all(r["passed"] for r in results)
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['name']:<22} {r['seconds']:>7.3f}s  {r['detail']}", file=sys.stderr)
    print(json.dumps({"passed": ok, "suites": results}))
    return EXIT_OK if ok else EXIT_SELFTEST


def cmd_dwt(args) -> int:
    img = formats.load_pnm(args.input)
    back = np.stack([idwt2(dwt2(ch, args.levels)) for ch in img])
    err = float(np.max(np.abs(back - img)))
    if args.out:
        formats.save_pnm(args.out, back)
    print(json.dumps({"levels": args.levels, "max_abs_error": err}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load_config(args)
    left, right = _load_pair(args)
    gt = formats.load_pfm(args.gt) if args.gt else None
    rows = []
    for k in [int(v) for v in args.iters_list.split(",")]:
        cfg = replace(base, iterations=k)
        t0 = time.perf_counter()
        res = Pipeline(cfg)(left, right)
        row = {"iters": k, "seconds": round(time.perf_counter() - t0, 4)}
        if gt is not None:
            mask = gt.valid & (gt.values > 0)
            row["epe"] = evaluate(res.disparity, np.where(mask, gt.values, 0), [1.0], mask).epe
        rows.append(row)
        log.info("iters=%d %.3fs", k, row["seconds"])
    print(json.dumps({"sweep": rows}))
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    left, right, gt = synthetic_pair(args.height, args.width, args.disparity, args.seed or 0)
    formats.save_pnm(out / "left.ppm", left)
    formats.save_pnm(out / "right.ppm", right)
    formats.save_pfm(out / "gt.pfm", DisparityMap(gt.astype(np.float32)))
    print(json.dumps({"left": str(out / "left.ppm"), "right": str(out / "right.ppm"),
                      "gt": str(out / "gt.pfm")}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mocha", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_flags(sp):
        sp.add_argument("--left", required=True)
        sp.add_argument("--right", required=True)
        sp.add_argument("--config", help="JSON file with PipelineConfig fields")
        sp.add_argument("--seed", type=int, help="overrides config and MOCHA_SEED")
        sp.add_argument("--threads", type=int, help="worker threads; never changes results")
        sp.add_argument("--toggle", action="append", metavar="NAME=on|off",
                        help="mcg, wavelet or remp")

    m = sub.add_parser("match", help="match a rectified pair and write a PFM disparity map")
    pipeline_flags(m)
    m.add_argument("--out", required=True)
    m.add_argument("--iters", type=int)
    m.add_argument("--dump-motif-graphs", metavar="DIR")
    m.add_argument("--with-distances", action="store_true",
                   help="include distance matrices in graph dumps")
    m.add_argument("--dump-iterations", metavar="DIR")
    m.add_argument("--dump-volume", metavar="OUT.mcvv",
                   help="write the combined 1/4-scale cost volume")
    m.add_argument("--viz", metavar="OUT.ppm")
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("eval", help="compare a disparity map with ground truth")
    e.add_argument("--disp", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--thresholds", default="1,2,3")
    e.add_argument("--mask-nonpositive", action="store_true",
                   help="ignore pixels whose ground truth is <= 0")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("selftest", help="run the brute-force oracle suites")
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selftest)

    d = sub.add_parser("dwt", help="round-trip an image through the Haar transform")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--out")
    d.add_argument("--levels", type=int, default=2)
    d.set_defaults(func=cmd_dwt)

    w = sub.add_parser("sweep", help="time match over several iteration counts")
    pipeline_flags(w)
    w.add_argument("--iters-list", default="1,2,4,8,16,32")
    w.add_argument("--gt", help="optional ground truth PFM; adds EPE per run")
    w.set_defaults(func=cmd_sweep)

    y = sub.add_parser("synth", help="write a synthetic textured pair with known disparity")
    y.add_argument("--out-dir", required=True)
    y.add_argument("--height", type=int, default=96)
    y.add_argument("--width", type=int, default=128)
    y.add_argument("--disparity", type=int, default=8)
    y.add_argument("--seed", type=int)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FormatError, OSError, json.JSONDecodeError) as exc:
        print(f"mocha: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DimensionError, ConfigError, MochaError, TypeError) as exc:
        print(f"mocha: {exc}", file=sys.stderr)
        return EXIT_DIMENSION


if __name__ == "__main__":
    sys.exit(main())

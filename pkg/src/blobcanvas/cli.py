"""Command line entry point: ``blobcanvas <subcommand> [options]``.

Exit status is 0 on success, 1 when the pipeline fails on valid input and 2
for configuration, usage or I/O problems.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .bench import bench_retrieval, random_shape, synthetic_database
from .blobdb import BlobDatabase, DatabaseError, extract_blobs
from .canvas import make_canvas
from .config import ConfigError, PipelineConfig, load_config
from .dataset import DatasetError, SampleFiles, discover, load_sample
from .depth import aligned_sparse_depth
from .emulation import _rng, disparity_to_depth, make_training_example, stream_id
from .metrics import ConfusionMatrix

log = logging.getLogger("blobcanvas")

CONFIG_FILE = "config.txt"
MANIFEST_FILE = "manifest.txt"


class UsageError(Exception):
    pass


def _pool_map(fn, items, jobs: int):
    """``map`` with a bounded process pool; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_config(cfg: PipelineConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.to_text(), encoding="utf-8")


def _dataset_root(args, cfg: PipelineConfig) -> str:
    root = args.root or cfg.dataset_root
    if not root:
        raise UsageError("no dataset root: pass --root or set dataset_root in the config")
    return root


def _out_dir(args, fallback: str = "") -> Path:
    out = args.out or fallback
    if not out:
        raise UsageError("no output directory: pass --out")
    return Path(out)


# build-db

def _extract(job):
    files, cfg = job
    return extract_blobs(load_sample(files, cfg.classes), cfg.min_blob_area, cfg.classes.ids)


def cmd_build_db(args, cfg: PipelineConfig) -> int:
    files = discover(_dataset_root(args, cfg), cfg.patterns)
    out = _out_dir(args, cfg.db)
    db = BlobDatabase(cfg.classes, cfg.min_blob_area, cfg.dataset)
    for records in _pool_map(_extract, [(f, cfg) for f in files], args.jobs):
        db.extend(records)
    db.save(out)
    print(f"blobs {len(db)} from {len(files)} images -> {out}")
    return 0


# compose

_DB_CACHE: dict[str, BlobDatabase] = {}


def _open_db(path: str) -> BlobDatabase:
    if path not in _DB_CACHE:
        _DB_CACHE[path] = BlobDatabase.load(path)
    return _DB_CACHE[path]


def _compose_one(job):
    files, cfg, db_path, out = job
    sample = load_sample(files, cfg.classes)
    bundle = make_canvas(sample.labels, sample.instances, _open_db(db_path), cfg.classes,
                         cfg.boundary_thickness, cfg.edge_thickness)
    out.mkdir(parents=True, exist_ok=True)
    io.write_rgb(out / "rgb.png", bundle.rgb.pixels)
    io.write_labels(out / "semantic.png", bundle.semantic)
    io.write_mask(out / "holes.png", bundle.holes_boundaries)
    io.write_mask(out / "edges.png", bundle.edges)
    (out / "plan.txt").write_text(bundle.plan.to_text(), encoding="utf-8")
    if sample.disparity is not None:
        depth = disparity_to_depth(sample.disparity, cfg.baseline, cfg.focal, cfg.min_disparity)
        seed = int(np.random.SeedSequence([cfg.seed, stream_id(files.key), 3]).generate_state(1, np.uint64)[0])
        sparse = aligned_sparse_depth(bundle.semantic, sample.labels, depth, cfg.p_sample, seed)
        io.write_depth(out / "depth_sparse.png", sparse.depth, cfg.depth_scale)
        io.write_mask(out / "depth_mask.png", sparse.mask)
    skipped = sum(1 for item in bundle.plan.items if item.skipped)
    return files.key, len(bundle.plan), skipped


def cmd_compose(args, cfg: PipelineConfig) -> int:
    db_path = args.db or cfg.db
    if not db_path:
        raise UsageError("no blob database: pass --db or set db in the config")
    out = _out_dir(args, cfg.out)
    if args.labels:
        key = Path(args.labels).stem
        jobs = [(SampleFiles(key, None, Path(args.labels), args.instances and Path(args.instances),
                             args.disparity and Path(args.disparity)), cfg, db_path, out)]
    else:
        files = discover(_dataset_root(args, cfg), cfg.patterns, require=("labels",))
        jobs = [(f, cfg, db_path, out / f.key) for f in files]
    _open_db(db_path)  # fail early on a broken database
    _write_config(cfg, out)
    for key, n, skipped in _pool_map(_compose_one, jobs, args.jobs):
        print(f"composed {key} items={n} skipped={skipped}")
    return 0


# emulate

_EXAMPLE_FILES = ("masked_rgb", "holes", "semantic", "edges", "sparse_depth", "sparse_mask", "target_rgb", "target_depth")


def _emulate_one(job):
    files, cfg, out = job
    sample = load_sample(files, cfg.classes)
    stream = stream_id(files.key)
    ex = make_training_example(sample, cfg.emulation_params(), cfg.camera, stream)
    d = out / files.key
    d.mkdir(parents=True, exist_ok=True)
    io.write_rgb(d / "masked_rgb.png", ex.masked_rgb.pixels)
    io.write_mask(d / "holes.png", ex.holes)
    io.write_labels(d / "semantic.png", ex.semantic)
    io.write_mask(d / "edges.png", ex.edges)
    io.write_depth(d / "sparse_depth.png", ex.sparse.depth, cfg.depth_scale)
    io.write_mask(d / "sparse_mask.png", ex.sparse.mask)
    io.write_rgb(d / "target_rgb.png", ex.target_rgb)
    io.write_depth(d / "target_depth.png", ex.target_depth, cfg.depth_scale)
    paths = " ".join(f"{name}={files.key}/{name}.png" for name in _EXAMPLE_FILES)
    return f"{files.key} seed={cfg.seed} stream={stream} {paths}"


def cmd_emulate(args, cfg: PipelineConfig) -> int:
    files = discover(_dataset_root(args, cfg), cfg.patterns, require=("rgb", "labels", "instances"))
    out = _out_dir(args, cfg.out)
    _write_config(cfg, out)
    lines = _pool_map(_emulate_one, [(f, cfg, out) for f in files], args.jobs)
    header = f"# seed={cfg.seed} config={cfg.digest()}\n"
    (out / MANIFEST_FILE).write_text(header + "".join(line + "\n" for line in lines), encoding="utf-8")
    print(f"examples {len(lines)} -> {out}")
    return 0


# evaluation

def _paired_pngs(pred_dir: str, gt_dir: str) -> list[tuple[Path, Path]]:
    pred, gt = Path(pred_dir), Path(gt_dir)
    for d in (pred, gt):
        if not d.is_dir():
            raise DatasetError(f"{d} is not a directory")
    names = sorted(p.name for p in gt.glob("*.png"))
    if not names:
        raise DatasetError(f"no PNG files in {gt}")
    missing = [n for n in names if not (pred / n).is_file()]
    if missing:
        raise DatasetError(f"{len(missing)} predictions missing in {pred}, first {missing[0]}")
    return [(pred / n, gt / n) for n in names]


def _emit(lines: list[str], out: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    sys.stdout.write(text)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "report.txt").write_text(text, encoding="utf-8")


def cmd_eval_miou(args, cfg: PipelineConfig) -> int:
    cm = ConfusionMatrix(len(cfg.classes))
    for pred, gt in _paired_pngs(args.pred, args.gt):
        cm.accumulate(io.read_labels(pred), io.read_labels(gt))
    lines = [f"class {c} {cfg.classes[c].name.replace(' ', '_')} iou {iou!r}" for c, iou in cm.per_class_iou().items()]
    lines.append(f"miou {cm.miou()!r}")
    _emit(lines, args.out)
    return 0


def cmd_eval_depth(args, cfg: PipelineConfig) -> int:
    sq, count = 0.0, 0
    lines = []
    for pred_path, gt_path in _paired_pngs(args.pred, args.gt):
        pred = io.read_depth(pred_path, cfg.depth_scale)
        gt = io.read_depth(gt_path, cfg.depth_scale)
        valid = gt > 0
        n = int(valid.sum())
        if n == 0:
            lines.append(f"image {gt_path.name} rmse nan pixels 0")
            continue
        err = float(np.sum((pred[valid] - gt[valid]) ** 2))
        sq, count = sq + err, count + n
        lines.append(f"image {gt_path.name} rmse {np.sqrt(err / n)!r} pixels {n}")
    if count == 0:
        raise ValueError("no ground-truth depth pixels")
    lines.append(f"rmse {np.sqrt(sq / count)!r}")
    _emit(lines, args.out)
    return 0


# benchmark

def cmd_bench_retrieval(args, cfg: PipelineConfig) -> int:
    if args.db:
        db = BlobDatabase.load(args.db)
    else:
        db = synthetic_database(args.synthetic, args.mask_size, args.cls, cfg.seed, cfg.classes)
    if len(db) == 0:
        raise ValueError("benchmark needs a non-empty database")
    present = [c for c in cfg.classes.ids if db.index.size(c)] if args.db else [args.cls]
    rng = _rng(cfg.seed, 8)
    queries = [(random_shape(rng, args.mask_size), present[i % len(present)]) for i in range(args.queries)]
    report = bench_retrieval(db, queries, args.repetitions, args.scan_repetitions)
    _emit([f"blobs {len(db)}", *report.to_text().splitlines()], args.out)
    return 0


def cmd_fixtures(args, cfg: PipelineConfig) -> int:
    from .fixtures import write_fixture_dataset

    if args.height < 64 or args.width < 64:
        raise UsageError("fixture scenes need at least 64x64 pixels")
    out = _out_dir(args)
    write_fixture_dataset(out, args.count, cfg.seed, (args.height, args.width))
    print(f"fixtures {args.count} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="overrides $BLOBCANVAS_SEED and the config")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="blobcanvas", description=__doc__.splitlines()[0])
    visible = "build-db,compose,emulate,eval-miou,eval-depth,bench-retrieval"
    sub = parser.add_subparsers(dest="command", metavar="{" + visible + "}", required=True)

    p = sub.add_parser("build-db", parents=[common], help="extract blobs from an annotated dataset")
    p.add_argument("--root", help="dataset root")
    p.set_defaults(func=cmd_build_db)

    p = sub.add_parser("compose", parents=[common], help="compose canvases for guiding layouts")
    p.add_argument("--db", help="blob database directory")
    p.add_argument("--labels", help="single guide label PNG (otherwise every sample under --root)")
    p.add_argument("--instances", help="guide instance PNG")
    p.add_argument("--disparity", help="guide disparity PNG, enables sparse depth output")
    p.add_argument("--root", help="dataset root with guiding layouts")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("emulate", parents=[common], help="emulated canvases for in-painter training")
    p.add_argument("--root", help="dataset root")
    p.set_defaults(func=cmd_emulate)

    for name, func, what in (("eval-miou", cmd_eval_miou, "label"), ("eval-depth", cmd_eval_depth, "depth")):
        p = sub.add_parser(name, parents=[common], help=f"compare two directories of {what} PNGs")
        p.add_argument("--pred", required=True)
        p.add_argument("--gt", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("bench-retrieval", parents=[common], help="descriptor index versus raster-IoU scan")
    p.add_argument("--db", help="blob database (default: synthetic)")
    p.add_argument("--synthetic", type=int, default=10_000, help="synthetic database size")
    p.add_argument("--mask-size", type=int, default=128)
    p.add_argument("--cls", type=int, default=14, help="class of synthetic blobs")
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--scan-repetitions", type=int, default=1)
    p.set_defaults(func=cmd_bench_retrieval)

    p = sub.add_parser("fixtures", parents=[common])
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=256)
    p.set_defaults(func=cmd_fixtures)
    # keep the fixture generator out of --help
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "fixtures"]
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        print(f"seed {cfg.seed} config {cfg.digest()}", file=sys.stderr)
        return args.func(args, cfg)
    except (ConfigError, UsageError, DatasetError, DatabaseError, OSError) as exc:
        print(f"blobcanvas {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure on otherwise valid input
        log.debug("pipeline failure", exc_info=True)
        print(f"blobcanvas {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``resgen gen|stats|split|slice``.

Exit codes: 0 success, 1 validation/config error, 2 sampling failure,
3 I/O failure (including interrupted runs).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import CATEGORY_NAMES, ModelCategory
from .errors import OutputError, ResgenError, ValidationError
from .export import (canonical_json, export_slice, parse_ratio, read_manifest, read_npy,
                     split_manifest)
from .pipeline import GenerationConfig, default_workers, generate_batch
from .stats import anomaly_count_histogram, layer_count_histogram, resistivity_histogram

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SAMPLING = 2
EXIT_IO = 3

CATEGORY_HELP = "one of: " + ", ".join(CATEGORY_NAMES) + ", or 'all' (COUNT models of each)"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1, not argparse's 2 (which means sampling failure here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _progress(done, total):
    if done == total or done % 100 == 0:
        print(f"\r{done}/{total} models", end="\n" if done == total else "", file=sys.stderr, flush=True)


def cmd_gen(args) -> int:
    inline = [args.category is not None, args.count is not None, args.seed is not None]
    if args.config:
        if any(inline):
            raise ValidationError("--config cannot be combined with --category/--count/--seed")
        cfg = GenerationConfig.from_file(args.config)
    else:
        if not all(inline):
            raise ValidationError("give --config, or all of --category, --count and --seed")
        if args.count < 1:
            raise ValidationError("--count must be >= 1")
        if args.category.strip().lower() == "all":
            counts = {c: args.count for c in ModelCategory}
        else:
            counts = {ModelCategory.parse(args.category): args.count}
        cfg = GenerationConfig(counts=counts, global_seed=args.seed)
    workers = args.workers if args.workers is not None else default_workers()
    manifest = generate_batch(cfg, args.out, workers=workers, progress=_progress)
    path = Path(args.out) / "manifest.jsonl"
    print(path)
    for cat, n in cfg.counts.items():
        print(f"{cat.value}\t{n}")
    print(f"total\t{len(manifest)}")
    return EXIT_OK


def _load_manifest(path):
    try:
        return read_manifest(path)
    except OSError as exc:
        raise OutputError(f"cannot read manifest {path}: {exc}") from exc


def cmd_stats(args) -> int:
    manifest = _load_manifest(args.manifest)
    if not manifest.records:
        raise ValidationError("manifest is empty")
    reports = []
    if any(r.n_layers is not None for r in manifest.records):
        reports.append(layer_count_histogram(manifest))
    if any(r.category.has_anomalies for r in manifest.records):
        reports.append(anomaly_count_histogram(manifest))
    if args.grids:
        def grids():
            for r in manifest.records:
                path = manifest.grid_file(r)
                if not path.exists():
                    raise OutputError(f"missing grid file {path}")
                g = r.extra.get("grid", {})
                yield read_npy(path, g.get("cell_size", 10.0), g.get("origin", (0.0, 0.0, 0.0)))
        reports.append(resistivity_histogram(grids()))
    if args.json:
        sys.stdout.write(canonical_json({r.variable: r.to_dict() for r in reports}))
    else:
        print(f"models: {len(manifest.records)}")
        for r in reports:
            print(r.format())
    return EXIT_OK


def cmd_split(args) -> int:
    ratio = parse_ratio(args.ratio)
    manifest = _load_manifest(args.manifest)
    if not manifest.records:
        raise ValidationError("manifest is empty")
    split = split_manifest(manifest, ratio, args.seed)
    out = Path(args.out) if args.out else manifest.root / "split.json"
    doc = dict(split.to_dict(), ratio=list(ratio), seed=args.seed)
    try:
        out.write_text(canonical_json(doc))
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc}") from exc
    print(out)
    print(f"train\t{len(split.train)}\nvalidation\t{len(split.validation)}\ntest\t{len(split.test)}")
    return EXIT_OK


def cmd_slice(args) -> int:
    try:
        grid = read_npy(args.grid)
    except OSError as exc:
        raise OutputError(f"cannot read grid {args.grid}: {exc}") from exc
    try:
        export_slice(grid, args.axis, args.index, args.out)
    except OSError as exc:
        raise OutputError(f"cannot write {args.out}: {exc}") from exc
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resgen", description="Synthetic 3-D resistivity model generator. "
                "Categories: " + ", ".join(CATEGORY_NAMES) + ".")
    p.add_argument("--version", action="version", version=f"resgen {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a dataset",
                       description="Generate models into OUT. Use --config, or "
                       "--category/--count/--seed. Categories: " + ", ".join(CATEGORY_NAMES) + ".")
    g.add_argument("--config", help="key = value config file (see README)")
    g.add_argument("--category", help=CATEGORY_HELP)
    g.add_argument("--count", type=int, help="number of models (per category with 'all')")
    g.add_argument("--seed", type=int, help="global seed, 0 <= S < 2^64")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $RESGEN_WORKERS or 1); output does not depend on it")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("stats", help="layer/anomaly/resistivity histograms",
                       description="Histograms with chi-square uniformity tests over a manifest. "
                       "Categories: " + ", ".join(CATEGORY_NAMES) + ".")
    s.add_argument("--manifest", required=True, help="manifest.jsonl or its directory")
    s.add_argument("--grids", action="store_true", help="also read every grid for the resistivity histogram")
    s.add_argument("--json", action="store_true", help="emit canonical JSON instead of text tables")
    s.set_defaults(func=cmd_stats)

    sp = sub.add_parser("split", help="stratified train/validation/test split",
                        description="Split a manifest per category. Categories: "
                        + ", ".join(CATEGORY_NAMES) + ".")
    sp.add_argument("--manifest", required=True, help="manifest.jsonl or its directory")
    sp.add_argument("--ratio", default="8:1:1", help="three integer terms, e.g. 8:1:1")
    sp.add_argument("--seed", type=int, default=0, help="shuffle seed")
    sp.add_argument("--out", help="output JSON (default: split.json next to the manifest)")
    sp.set_defaults(func=cmd_split)

    sl = sub.add_parser("slice", help="write one grid slice as a PGM image",
                        description="Gray level = round(255 log10(rho) / log10(2000)). "
                        "Categories: " + ", ".join(CATEGORY_NAMES) + ".")
    sl.add_argument("--grid", required=True, help="NPY grid file")
    sl.add_argument("--axis", choices=("x", "y", "z"), default="z")
    sl.add_argument("--index", type=int, required=True)
    sl.add_argument("--out", required=True, help="output .pgm path")
    sl.set_defaults(func=cmd_slice)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResgenError as exc:
        print(f"resgen: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("resgen: interrupted; output is incomplete", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"resgen: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"resgen: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

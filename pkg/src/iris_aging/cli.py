"""``iris-aging`` command line: synth, normalize, quality, match, pairs, fit, report.

Stages talk to each other only through files in the output directory:

    synth      -> manifest.csv, images/, masks/, scores.csv, synth_config.json
    normalize  -> polar/<id>.pgm, polar/<id>_mask.pgm, polar/index.csv
    quality    -> covariates_<FAMILY>.csv
    match      -> scores_D.csv
    pairs      -> records_<FAMILY>.csv
    fit        -> report.md, report.json

Exit status: 0 ok, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .dataset import build_records, genuine_pairs, load_manifest, read_records, read_scores, write_records, write_scores
from .errors import IrisAgingError, ParseError, UnknownModel
from .imaging import (
    DEFAULT_COLS,
    DEFAULT_LOG_SIGMA,
    DEFAULT_ROWS,
    FULL_CIRCLE,
    PolarIris,
    read_image,
    read_mask,
    unwrap_to_polar,
    write_image,
    write_mask,
)
from .matcher import DEFAULT_MAX_ROTATION, EncoderConfig, encode, match
from .quality import GeometryVector, quality_for_matcher, read_covariates, write_covariates
from .regression import catalog, fit_model, fit_report, get_model
from .regression.report import Report
from .synth import SynthConfig, write_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
POLAR_INDEX_HEADER = ["image_id", "texture", "mask", "sectors"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("IRIS_AGING_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"IRIS_AGING_JOBS must be an integer, got {env!r}") from None
    return 1


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _parse_sectors(text: str | None):
    if not text:
        return FULL_CIRCLE
    out = []
    for part in text.split(","):
        try:
            a, b = part.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise UsageError(f"sector {part!r} is not START:END in degrees") from None
    return tuple(out)


def _format_sectors(sectors) -> str:
    return ",".join(f"{a!r}:{b!r}" for a, b in sectors)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> None:
    cfg = SynthConfig.from_json(Path(args.config).read_text()) if args.config else SynthConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.classes is not None:
        overrides["n_classes"] = args.classes
    if args.images_per_class is not None:
        overrides["images_per_class"] = args.images_per_class
    if overrides:
        cfg = SynthConfig(**{**cfg.__dict__, **overrides})
    entries = write_synthetic(_out_dir(args), cfg)
    print(f"wrote {len(entries)} images to {args.out}")


def cmd_normalize(args) -> None:
    out = _out_dir(args)
    polar_dir = out / "polar"
    polar_dir.mkdir(exist_ok=True)
    entries = load_manifest(args.manifest)
    sectors = _parse_sectors(args.sectors)

    def work(e):
        img = read_image(e.image_path)
        mask = read_mask(e.mask_path) if e.mask_path else None
        polar = unwrap_to_polar(img, e.seg, mask, args.rows, args.cols, sectors)
        write_image(polar_dir / f"{e.image_id}.pgm", polar.texture)
        write_mask(polar_dir / f"{e.image_id}_mask.pgm", polar.mask)
        return e.image_id

    ids = _pmap(work, entries, _jobs(args))
    with open(polar_dir / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POLAR_INDEX_HEADER)
        for image_id in sorted(ids):
            writer.writerow([image_id, f"{image_id}.pgm", f"{image_id}_mask.pgm", _format_sectors(sectors)])
    print(f"normalized {len(ids)} images into {polar_dir}")


def _load_polar_index(polar_dir: Path) -> dict[str, tuple[Path, Path, tuple]]:
    index = polar_dir / "index.csv"
    if not index.exists():
        raise ParseError(f"{index} not found; run `iris-aging normalize` first")
    out = {}
    with open(index, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != POLAR_INDEX_HEADER:
            raise ParseError("bad polar index header", line=1, path=index)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ParseError("expected 4 fields", lineno, index)
            try:
                sectors = _parse_sectors(row[3])
            except UsageError as exc:
                raise ParseError(str(exc), lineno, index) from None
            out[row[0]] = (polar_dir / row[1], polar_dir / row[2], sectors)
    return out


def _polar_loader(args):
    polar_dir = Path(args.polar) if args.polar else Path(args.out) / "polar"
    index = _load_polar_index(polar_dir)

    def load(image_id):
        if image_id not in index:
            raise ParseError(f"image {image_id!r} missing from {polar_dir / 'index.csv'}")
        tex, mask, sectors = index[image_id]
        return PolarIris(read_image(tex), read_mask(mask), sectors)

    return load


def cmd_quality(args) -> None:
    out = _out_dir(args)
    entries = load_manifest(args.manifest)
    family = args.family
    load_polar = _polar_loader(args) if family == "D" else None

    def work(e):
        polar = load_polar(e.image_id) if load_polar else None
        img = read_image(e.image_path) if family != "D" else polar.texture
        q = quality_for_matcher(img, polar, family, args.sigma)
        return (e.image_id, family, q, GeometryVector.from_circles(e.seg))

    rows = _pmap(work, sorted(entries, key=lambda e: e.image_id), _jobs(args))
    path = out / f"covariates_{family}.csv"
    write_covariates(path, rows)
    print(f"wrote {path}")


def cmd_match(args) -> None:
    out = _out_dir(args)
    entries = load_manifest(args.manifest)
    load_polar = _polar_loader(args)
    config = EncoderConfig()
    jobs = _jobs(args)
    ids = sorted(e.image_id for e in entries)
    codes = dict(zip(ids, _pmap(lambda i: encode(load_polar(i), config), ids, jobs)))
    if args.save_codes:
        code_dir = out / "codes"
        code_dir.mkdir(exist_ok=True)
        for image_id, code in codes.items():
            (code_dir / f"{image_id}.iac").write_bytes(code.to_bytes())
    pairs = genuine_pairs(entries)

    def work(pair):
        a, b = pair
        return (a.image_id, b.image_id, match(codes[a.image_id], codes[b.image_id], args.max_rotation).hd)

    path = out / "scores_D.csv"
    write_scores(path, _pmap(work, pairs, jobs))
    print(f"wrote {len(pairs)} genuine scores to {path}")


def cmd_pairs(args) -> None:
    out = _out_dir(args)
    entries = load_manifest(args.manifest)
    scores = read_scores(args.scores)
    cov = {k: (q, g) for k, (_, q, g) in read_covariates(args.covariates).items()}
    records = build_records(genuine_pairs(entries), scores, cov, args.family)
    path = out / f"records_{args.family}.csv"
    write_records(path, records)
    print(f"wrote {len(records)} records to {path}")


def _select_models(args):
    if args.catalog:
        if args.models:
            raise UsageError("use either --models or --catalog, not both")
        if not args.family:
            raise UsageError("--catalog needs --family D|B|V")
        return catalog(args.family)
    if not args.models:
        raise UsageError("name models with --models NAME,... or pass --catalog")
    specs = []
    for name in (n.strip() for n in args.models.split(",")):
        if not name:
            continue
        try:
            specs.append(get_model(name))
        except UnknownModel as exc:
            raise UsageError(str(exc)) from None
    if args.family:
        wrong = [s.name for s in specs if s.family != args.family]
        if wrong:
            raise UsageError(f"model(s) {', '.join(wrong)} are not in family {args.family}")
    return specs


def _write_report(report: Report, out: Path, fmt: str) -> None:
    if fmt in ("markdown", "both"):
        (out / "report.md").write_text(report.to_markdown())
    if fmt in ("json", "both"):
        (out / "report.json").write_text(report.to_json())


def cmd_fit(args) -> None:
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    specs = _select_models(args)
    families = {s.family for s in specs}
    family = args.family or (families.pop() if len(families) == 1 else None)
    records = read_records(args.records, family)
    report = fit_report([fit_model(records, s) for s in specs], args.alpha)
    out = _out_dir(args)
    _write_report(report, out, args.format)
    sys.stdout.write(report.to_markdown())


def cmd_report(args) -> None:
    report = Report.from_json(Path(args.input).read_text())
    if args.alpha is not None:
        if not 0 < args.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
        report = fit_report(report.results, args.alpha)
    if args.out:
        _write_report(report, _out_dir(args), args.format)
    sys.stdout.write(report.to_json() if args.format == "json" else report.to_markdown())


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iris-aging", description="Iris template aging analysis toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, manifest=True, out_required=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="manifest CSV")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--jobs", type=int, help="worker threads (default: $IRIS_AGING_JOBS or 1)")

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    common(p, manifest=False)
    p.add_argument("--config", help="SynthConfig JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--images-per-class", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("normalize", help="unwrap irises to polar textures")
    common(p)
    p.add_argument("--rows", type=int, default=DEFAULT_ROWS)
    p.add_argument("--cols", type=int, default=DEFAULT_COLS)
    p.add_argument("--sectors", help="angular sectors START:END[,START:END...] in degrees (default full circle)")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("quality", help="compute per-image covariates")
    common(p)
    p.add_argument("--family", choices=["D", "B", "V"], required=True)
    p.add_argument("--polar", help="polar directory (default OUT/polar)")
    p.add_argument("--sigma", type=float, default=DEFAULT_LOG_SIGMA, help="LoG scale in pixels")
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("match", help="score genuine pairs with the Gabor matcher")
    common(p)
    p.add_argument("--polar", help="polar directory (default OUT/polar)")
    p.add_argument("--max-rotation", type=int, default=DEFAULT_MAX_ROTATION)
    p.add_argument("--save-codes", action="store_true", help="also write OUT/codes/<id>.iac")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("pairs", help="join scores and covariates into comparison records")
    common(p)
    p.add_argument("--scores", required=True, help="score CSV (pair_id_1,pair_id_2,score)")
    p.add_argument("--covariates", required=True, help="covariate CSV from `quality`")
    p.add_argument("--family", choices=["D", "B", "V"], required=True)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("fit", help="fit regression models and write a report")
    common(p, manifest=False)
    p.add_argument("--records", required=True, help="records CSV from `pairs`")
    p.add_argument("--models", help="comma-separated model names")
    p.add_argument("--catalog", action="store_true", help="fit every catalog model of --family")
    p.add_argument("--family", choices=["D", "B", "V"])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--format", choices=["markdown", "json", "both"], default="both")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="re-render a JSON report")
    p.add_argument("--input", required=True, help="report.json from `fit`")
    p.add_argument("--out", help="write report files here instead of only printing")
    p.add_argument("--alpha", type=float)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--markdown", dest="format", action="store_const", const="markdown")
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    p.set_defaults(func=cmd_report, format="markdown", jobs=None)

    p = sub.add_parser("models", help="list catalog models")
    p.set_defaults(func=lambda args: print("\n".join(s.to_text() for s in catalog())))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"iris-aging: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IrisAgingError, OSError) as exc:
        print(f"iris-aging: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

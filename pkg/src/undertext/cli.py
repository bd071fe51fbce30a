"""Batch command line: ingest, fit, project, render, evaluate, and serve.

Every command is deterministic given identical inputs; the only random
numbers in the tool feed the ``bench`` command's synthetic page. Exit codes
are a stable scripting contract: 0 success, 1 usage, 2 bad data, 3 numeric
failure.

Config files use ``key = value`` lines under sections; a key in the section
named after the subcommand overrides one in [common], and command-line flags
override both.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import parse_annotations, serialize_annotations
from .eigen import DEFAULT_RIDGE
from .errors import DataError, NumericError, UndertextError
from .projection import ALL_METHODS, METHOD_CVA, ProjectionModel, project_stack
from .rendering import (
    MODE_FULL_RANGE,
    MODE_PERCENTILE,
    MODE_TRAINING_RANGE,
    PERCENTILE_CHOICES,
    CompositeRecipe,
    RenderSpec,
    double_threshold,
    load_image,
    pseudocolor,
    save_image,
)
from .stack import load_stack, normalize_stack
from . import pipeline
from .synthetic import make_palimpsest

_OUT_ENV = "UNDERTEXT_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the exit-code contract wants 1."""

    def error(self, message):
        raise _UsageError(message)


def _parse_rect(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise _UsageError(f"expected x0,y0,width,height, got {text!r}")
    try:
        x0, y0, w, h = (int(p) for p in parts)
    except ValueError:
        raise _UsageError(f"rectangle fields must be integers: {text!r}")
    return (x0, y0, w, h)


def _parse_mode(token: str, depth: int, one_tail: bool) -> RenderSpec:
    token = token.strip()
    if token == "full":
        return RenderSpec(MODE_FULL_RANGE, out_depth=depth)
    if token == "training":
        return RenderSpec(MODE_TRAINING_RANGE, out_depth=depth)
    if token.startswith("p"):
        try:
            p = float(token[1:])
        except ValueError:
            raise _UsageError(f"bad percentile mode {token!r}")
        if p not in PERCENTILE_CHOICES:
            raise _UsageError(
                f"percentile must be one of {PERCENTILE_CHOICES}, got {p}"
            )
        return RenderSpec(
            MODE_PERCENTILE, percentile_p=p, out_depth=depth, one_tail=one_tail
        )
    raise _UsageError(
        f"unknown mode {token!r} (use full, training, or p<percentile>)"
    )


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {text!r}")


def _parse_recipe(text: str, swap: str | None) -> CompositeRecipe:
    indices = _parse_int_list(text)
    if len(indices) != 3:
        raise _UsageError(f"recipe needs three plane indices R,G,B, got {text!r}")
    swap_pair = None
    if swap is not None:
        pair = _parse_int_list(swap)
        if len(pair) != 2:
            raise _UsageError(f"swap needs two channel indices, got {swap!r}")
        swap_pair = (pair[0], pair[1])
    return CompositeRecipe(indices[0], indices[1], indices[2], swap=swap_pair)


# Keys a config file may supply, with the conversion each needs. Booleans
# accept configparser's usual spellings.
_CONFIG_KEYS = {
    "manifest": str,
    "annotations": str,
    "eval_annotations": str,
    "model": str,
    "method": str,
    "k": int,
    "ridge": float,
    "crop": str,
    "region": str,
    "scope": str,
    "mode": str,
    "depth": int,
    "one_tail": bool,
    "planes": str,
    "recipe": str,
    "swap": str,
    "out": str,
    "run": str,
    "workers": int,
    "format": str,
    "compression": str,
    "t1": int,
    "t2": int,
    "alpha": float,
    "red_band": int,
    "uv_band": int,
    "size": str,
    "bands": int,
    "seed": int,
    "host": str,
    "port": int,
    "csv": str,
}


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset argument values from the config file, if one was given."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        raise _UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise _UsageError(f"bad config file {path}: {exc}")
    merged: dict[str, str] = {}
    for section in ("common", args.command):
        if parser.has_section(section):
            merged.update(parser.items(section))
    for key, raw in merged.items():
        if key not in _CONFIG_KEYS:
            raise _UsageError(f"unknown config key {key!r}")
        if getattr(args, key, None) is not None:
            continue  # flag wins
        convert = _CONFIG_KEYS[key]
        try:
            if convert is bool:
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                value = convert(raw)
        except ValueError:
            raise _UsageError(f"config key {key} has bad value {raw!r}")
        setattr(args, key, value)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(_OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_inputs(args):
    crop_rect = _parse_rect(args.crop) if args.crop else None
    scope = args.scope or "per-band"
    stack = pipeline.load_normalized(args.manifest, crop_rect, scope)
    meta = {
        "manifest": args.manifest,
        "manifest_sha256": pipeline.sha256_file(args.manifest),
        "crop": args.crop or "none",
        "scope": scope,
    }
    return stack, meta


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise _UsageError(f"--{name.replace('_', '-')} is required")


def cmd_ingest(args) -> int:
    _require(args, "manifest")
    stack, meta = _load_inputs(args)
    print(f"{stack.band_count} bands, {stack.width}x{stack.height}, "
          f"{stack.bit_depth}-bit (normalized)")
    print(f"{'id':>4}  {'wavelength':>10}  illumination")
    for band in stack.bands:
        print(f"{band.band_id:>4}  {band.wavelength_nm:>10.1f}  {band.illumination}")
    if args.out:
        out = _out_dir(args)
        lines = []
        for i, band in enumerate(stack.bands):
            name = f"band{band.band_id:02d}_norm.tif"
            save_image(stack.planes[i], out / name, compression="deflate")
            filt = f",{band.filter}" if band.filter else ""
            lines.append(
                f"{name},{band.wavelength_nm!r},{band.illumination}{filt}"
            )
        (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        pipeline.write_run_meta(out, meta)
        print(f"wrote {stack.band_count} normalized bands to {out}")
    return 0


def _fit_from_args(args, stack, meta):
    method = args.method or METHOD_CVA
    if method not in ALL_METHODS:
        raise _UsageError(f"method must be one of {ALL_METHODS}, got {method!r}")
    training = None
    canonical = None
    if args.annotations:
        text = Path(args.annotations).read_text(encoding="utf-8")
        training = parse_annotations(text)
        canonical = serialize_annotations(training)
    region = _parse_rect(args.region) if getattr(args, "region", None) else None
    ridge = args.ridge if args.ridge is not None else DEFAULT_RIDGE
    provenance = pipeline.model_provenance(meta, canonical, method, args.k, ridge)
    model = pipeline.fit_model(
        stack, training, method, k=args.k, ridge=ridge, region=region,
        provenance=provenance,
    )
    meta.update(provenance)
    if args.annotations:
        meta["annotations"] = args.annotations
    return model, meta


def cmd_fit(args) -> int:
    _require(args, "manifest")
    stack, meta = _load_inputs(args)
    model, meta = _fit_from_args(args, stack, meta)
    out = _out_dir(args)
    run = args.run or "run"
    model_path = out / f"{run}_model.json"
    model.save(model_path)
    pipeline.write_run_meta(out, meta)
    print(f"model written to {model_path}")
    total = float(np.sum(model.eigenvalues)) or 1.0
    print(f"{'k':>4}  {'eigenvalue':>16}  {'share':>8}")
    for i, value in enumerate(model.eigenvalues):
        print(f"{i:>4}  {value:>16.8g}  {value / total:>8.2%}")
    return 0


def cmd_project(args) -> int:
    _require(args, "manifest", "model")
    stack, meta = _load_inputs(args)
    model = ProjectionModel.load(args.model)
    components = _parse_int_list(args.planes) if args.planes else None
    workers = args.workers or 1
    planes = project_stack(stack, model, components=components, workers=workers)
    out = _out_dir(args)
    run = args.run or "run"
    if components is None:
        components = list(range(model.component_count))
    for k, plane in zip(components, planes):
        path = out / f"{run}_plane{k:02d}_scores.npy"
        np.save(path, plane.values)
        print(f"wrote {path}")
    return 0


def cmd_render(args) -> int:
    _require(args, "manifest", "model")
    stack, meta = _load_inputs(args)
    model = ProjectionModel.load(args.model)
    depth = args.depth or 8
    one_tail = bool(args.one_tail)
    tokens = (args.mode or "full").split(",")
    specs = [_parse_mode(tok, depth, one_tail) for tok in tokens]
    recipe = _parse_recipe(args.recipe, args.swap) if args.recipe else None
    components = _parse_int_list(args.planes) if args.planes else None
    out = _out_dir(args)
    run = args.run or "run"
    result = pipeline.render_planes(
        stack, model, specs, out, run_name=run, components=components,
        recipe=recipe, workers=args.workers or 1, fmt=args.format or "png",
        compression=args.compression or "none",
    )
    meta.update({
        "model": args.model, "modes": ",".join(tokens), "depth": depth,
        "planes": args.planes or "all", "recipe": args.recipe or "none",
        "swap": args.swap or "none",
    })
    pipeline.write_run_meta(out, meta)
    for path in result.plane_paths:
        print(f"wrote {path}")
    if result.composite_path:
        print(f"wrote {result.composite_path}")
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "eval_annotations")
    if not args.images:
        raise _UsageError("at least one image path is required")
    training = parse_annotations(
        Path(args.eval_annotations).read_text(encoding="utf-8")
    )
    under, parch = pipeline.eval_points(training)
    named = []
    for path in args.images:
        if Path(path).suffix == ".npy":
            img = np.load(path)  # raw score plane, pre-quantization
            if img.ndim != 2:
                raise DataError(f"{path}: score plane must be 2-D")
        else:
            img = load_image(path)
            if img.ndim == 3:
                img = img[:, :, 1]  # grayscale comparison uses the green channel
        named.append((Path(path).name, img))
    rows = pipeline.evaluate_images(named, under, parch)
    csv_text = pipeline.eval_csv(rows)
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.csv}")
    print(pipeline.eval_table(rows))
    return 0


def cmd_dt(args) -> int:
    _require(args, "t1", "t2")
    if not args.image:
        raise _UsageError("an input image path is required")
    img = load_image(args.image)
    if img.ndim != 2:
        raise DataError("double threshold expects a grayscale image")
    alpha = args.alpha if args.alpha is not None else 0.5
    result = double_threshold(img, args.t1, args.t2, alpha)
    out_path = Path(args.out) if args.out else Path(args.image).with_name(
        Path(args.image).stem + "_dt" + Path(args.image).suffix
    )
    save_image(result, out_path, compression=args.compression or "none")
    print(f"wrote {out_path}")
    return 0


def cmd_pseudocolor(args) -> int:
    _require(args, "manifest", "red_band", "uv_band")
    crop_rect = _parse_rect(args.crop) if args.crop else None
    stack = load_stack(args.manifest)
    if crop_rect is not None:
        from .stack import crop as crop_stack

        stack = crop_stack(stack, *crop_rect)
    stack = normalize_stack(stack, args.scope or "per-band")
    composite = pseudocolor(stack, args.red_band, args.uv_band)
    out = _out_dir(args)
    run = args.run or "run"
    path = out / f"{run}_pseudo_R{args.red_band}UV{args.uv_band}.png"
    save_image(composite, path)
    print(f"wrote {path}")
    return 0


def cmd_bench(args) -> int:
    size = args.size or "2000x2000"
    try:
        w_text, h_text = size.lower().split("x")
        width, height = int(w_text), int(h_text)
    except ValueError:
        raise _UsageError(f"size must look like 2000x2000, got {size!r}")
    bands = args.bands or 23
    seed = args.seed if args.seed is not None else 0
    out = _out_dir(args)
    run = args.run or f"bench{seed}"

    stages: list[tuple[str, float]] = []
    t0 = time.perf_counter()
    page = make_palimpsest(width, height, bands, seed=seed)
    stages.append(("generate", time.perf_counter() - t0))

    t0 = time.perf_counter()
    stack = normalize_stack(page.stack)
    stages.append(("normalize", time.perf_counter() - t0))

    t0 = time.perf_counter()
    from .annotations import assemble_matrix
    from .projection import fit_cva

    model = fit_cva(assemble_matrix(stack, page.training), k=args.k)
    stages.append(("fit", time.perf_counter() - t0))

    t0 = time.perf_counter()
    result = pipeline.render_planes(
        stack, model, [RenderSpec(out_depth=args.depth or 8)], out,
        run_name=run, workers=args.workers or 1, fmt=args.format or "png",
    )
    stages.append(("project+render", time.perf_counter() - t0))

    pipeline_seconds = sum(s for name, s in stages if name != "generate")
    print(f"bench {width}x{height}x{bands} seed={seed} "
          f"({len(result.plane_paths)} planes)")
    for name, seconds in stages:
        print(f"  {name:<16} {seconds:>8.2f} s")
    print(f"  {'pipeline total':<16} {pipeline_seconds:>8.2f} s")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    out = _out_dir(args)
    ui_dir = Path(args.ui) if args.ui else Path("frontend/dist")
    crop_rect = _parse_rect(args.crop) if args.crop else None
    app = create_app(
        artifact_root=out, ui_dir=ui_dir if ui_dir.is_dir() else None,
        manifest=args.manifest, crop=crop_rect,
        scope=args.scope or "per-band",
    )
    uvicorn.run(app, host=args.host or "127.0.0.1", port=args.port or 8000,
                log_level="warning")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "project": cmd_project,
    "render": cmd_render,
    "evaluate": cmd_evaluate,
    "dt": cmd_dt,
    "pseudocolor": cmd_pseudocolor,
    "bench": cmd_bench,
    "serve": cmd_serve,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="undertext",
                     description="Multispectral palimpsest text enhancement")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help=f"output directory (default ${_OUT_ENV} or .)")
        p.add_argument("--run", help="run name prefixed to artifact files")

    def stack_args(p):
        p.add_argument("--manifest", help="band manifest file")
        p.add_argument("--crop", help="x0,y0,width,height")
        p.add_argument("--scope", choices=["per-band", "global"],
                       help="normalization scope (default per-band)")

    p = sub.add_parser("ingest", help="load, validate and normalize a stack")
    common(p); stack_args(p)

    p = sub.add_parser("fit", help="fit a projection to annotated points")
    common(p); stack_args(p)
    p.add_argument("--annotations", help="training points CSV")
    p.add_argument("--method", help=f"one of {', '.join(ALL_METHODS)}")
    p.add_argument("--k", type=int, help="components to keep (default all)")
    p.add_argument("--ridge", type=float, help="scatter regularization")
    p.add_argument("--region", help="x0,y0,w,h region for unsupervised PCA")

    p = sub.add_parser("project", help="write raw score planes as .npy")
    common(p); stack_args(p)
    p.add_argument("--model", help="fitted model JSON")
    p.add_argument("--planes", help="comma-separated component indices")
    p.add_argument("--workers", type=int, help="projection threads")

    p = sub.add_parser("render", help="project and write grayscale/composite images")
    common(p); stack_args(p)
    p.add_argument("--model", help="fitted model JSON")
    p.add_argument("--mode", help="comma list: full, training, p0.01, p0.1, p1, p5")
    p.add_argument("--depth", type=int, choices=[8, 16], help="output bit depth")
    p.add_argument("--one-tail", dest="one_tail", action="store_const", const=True,
                   help="percentile clips only the bright tail")
    p.add_argument("--planes", help="comma-separated component indices")
    p.add_argument("--recipe", help="R,G,B plane indices for a composite")
    p.add_argument("--swap", help="two channel indices to exchange, e.g. 1,2")
    p.add_argument("--workers", type=int, help="projection threads")
    p.add_argument("--format", choices=["png", "tif"], help="grayscale format")
    p.add_argument("--compression", choices=["none", "deflate"],
                   help="TIFF compression")

    p = sub.add_parser("evaluate", help="score images by cluster separation")
    common(p)
    p.add_argument("images", nargs="*", help="grayscale images to score")
    p.add_argument("--eval-annotations", dest="eval_annotations",
                   help="CSV with underwriting and parchment points")
    p.add_argument("--csv", help="write the report CSV here")

    p = sub.add_parser("dt", help="double-threshold an enhanced grayscale")
    common(p)
    p.add_argument("image", nargs="?", help="input grayscale image")
    p.add_argument("--t1", type=int, help="overtext threshold (whitened)")
    p.add_argument("--t2", type=int, help="undertext threshold (darkened)")
    p.add_argument("--alpha", type=float, help="darkening factor (default 0.5)")
    p.add_argument("--compression", choices=["none", "deflate"])

    p = sub.add_parser("pseudocolor", help="red band + UV band false color")
    common(p); stack_args(p)
    p.add_argument("--red-band", dest="red_band", type=int, help="band id for R")
    p.add_argument("--uv-band", dest="uv_band", type=int, help="band id for G and B")

    p = sub.add_parser("bench", help="time the pipeline on a synthetic page")
    common(p)
    p.add_argument("--size", help="WxH (default 2000x2000)")
    p.add_argument("--bands", type=int, help="band count (default 23)")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--k", type=int, help="components to keep")
    p.add_argument("--depth", type=int, choices=[8, 16])
    p.add_argument("--workers", type=int, help="projection threads")
    p.add_argument("--format", choices=["png", "tif"])

    p = sub.add_parser("serve", help="start the annotation service")
    common(p); stack_args(p)
    p.add_argument("--host", help="bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (default 8000)")
    p.add_argument("--ui", help="UI bundle directory (default frontend/dist)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except UndertextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # missing files, directories where files belong, permission trouble
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: simulate, subsample, reconstruct, metrics, transform, run.

Every stage writes arrays with a ``.meta`` sidecar carrying the config hash;
stages refuse inputs produced under a different configuration.  Failures
print one JSON line on stderr.

Exit codes: 0 success, 1 bad input (missing file, shape, malformed data),
2 usage, 3 a solver hit its iteration cap (outputs are still written),
4 config hash mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .fileio import export_png, load_array, read_meta, save_array
from .grids import DataField, ImageField
from .metrics import MetricsReport, metrics
from .pipeline import METHODS, Experiment, ExperimentConfig
from .sensing import Measurements, load_pattern, save_pattern, subsample, zero_fill
from .wedge import out_of_range_energy

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_HASH = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, kind, detail, code=EXIT_INPUT):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.code = code


def _report(kind, detail, level="error"):
    print(json.dumps({level: kind, "detail": detail}), file=sys.stderr)


# -- context -------------------------------------------------------------------

class Context:
    def __init__(self, args):
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.rate is not None:
            cfg = replace(cfg, rate=args.rate)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        self.cfg = cfg
        self.hash = cfg.hash()
        self.out = Path(cfg.out)
        self.png = args.export_png
        self.exp = Experiment(cfg)

    def path(self, name):
        return self.out / name

    def save(self, name, values, **meta):
        save_array(self.path(name), values, config_hash=self.hash, **meta)
        if self.png:
            export_png(self.path(name).with_suffix(".png"), values)

    def load(self, path, kind=None):
        path = Path(path)
        try:
            raw_meta = read_meta(path)
            values, meta = load_array(path)
        except FileNotFoundError as exc:
            raise CliError("missing-file", str(exc)) from None
        except ValueError as exc:
            raise CliError("bad-array", str(exc)) from None
        found = raw_meta.get("config_hash")
        if found != self.hash:
            raise CliError("config-hash-mismatch",
                           f"{path} was written under config {found}, current config is {self.hash}", EXIT_HASH)
        if kind is not None and raw_meta.get("kind") != kind:
            raise CliError("wrong-kind", f"{path} holds {raw_meta.get('kind')!r}, expected {kind!r}")
        return values, meta

    def load_pattern(self, path):
        try:
            pat, extra = load_pattern(path)
        except FileNotFoundError as exc:
            raise CliError("missing-file", str(exc)) from None
        except (ValueError, KeyError) as exc:
            raise CliError("bad-pattern", f"{path}: {exc}") from None
        if extra.get("config_hash") != self.hash:
            raise CliError("config-hash-mismatch",
                           f"{path} was written under config {extra.get('config_hash')}, "
                           f"current config is {self.hash}", EXIT_HASH)
        return pat


def _data_meta(ctx, kind):
    prop = ctx.exp.acquisition
    return dict(kind=kind, dt=prop.dt, c=prop.c, cv=ctx.cfg.cv, spacing=prop.h)


def _image_meta(ctx, kind, prop=None):
    prop = prop or ctx.exp.recon
    return dict(kind=kind, spacing=prop.h, c=prop.c)


# -- stages --------------------------------------------------------------------

def cmd_simulate(ctx, args):
    p0, clean, noisy = ctx.exp.simulate()
    ctx.out.mkdir(parents=True, exist_ok=True)
    (ctx.out / "config.ini").write_text(ctx.cfg.dumps())
    ctx.save("phantom", p0.values, **_image_meta(ctx, "image", ctx.exp.acquisition))
    ctx.save("data_clean", clean.values, **_data_meta(ctx, "data"))
    ctx.save("data", noisy.values, **_data_meta(ctx, "data"), sigma=ctx.cfg.sigma)
    return EXIT_OK


def cmd_subsample(ctx, args):
    values, _ = ctx.load(args.data or ctx.path("data.f64"), "data")
    prop = ctx.exp.acquisition
    if values.shape != prop.data_shape:
        raise CliError("shape-mismatch", f"data shape {values.shape} != expected {prop.data_shape}")
    pat = ctx.exp.pattern()
    b = subsample(DataField(values, prop.dt, ctx.cfg.cv), pat)
    save_pattern(ctx.path("pattern.txt"), pat, config_hash=ctx.hash, rate=ctx.cfg.rate)
    ctx.save("b", b.values, **_data_meta(ctx, "measurements"))
    ctx.save("b0", zero_fill(b).values, **_data_meta(ctx, "data"))
    return EXIT_OK


def cmd_reconstruct(ctx, args):
    method = args.method
    name = args.name or f"rec_{method}"
    if args.input is not None:
        if method != "tr":
            raise CliError("usage", "--input is only accepted with --method tr", EXIT_USAGE)
        values, _ = ctx.load(args.input, "data")
        if values.shape != ctx.exp.acquisition.data_shape:
            raise CliError("shape-mismatch",
                           f"data shape {values.shape} != expected {ctx.exp.acquisition.data_shape}")
        rec = ctx.exp.time_reverse(values)
        ctx.save(name, rec.values, **_image_meta(ctx, "image"))
        return EXIT_OK

    pat = ctx.load_pattern(args.pattern or ctx.path("pattern.txt"))
    values, _ = ctx.load(args.measurements or ctx.path("b.f64"), "measurements")
    if values.shape[1] != pat.m:
        raise CliError("shape-mismatch", f"{values.shape[1]} traces for a pattern of {pat.m} sensors")
    prop = ctx.exp.acquisition
    b = Measurements(values, pat, prop.dt, ctx.cfg.cv)
    rec, run, extra = ctx.exp.reconstruct(method, b, pat)
    ctx.save(name, rec.values, **_image_meta(ctx, "image"))
    if "g_dr" in extra:
        ctx.save(f"{name}_data", extra["g_dr"].values, **_data_meta(ctx, "data"))
    if run is None:
        return EXIT_OK
    run.write_trace(ctx.path(f"trace_{method}.csv"))
    if not run.converged:
        _report("not-converged", f"{method} stopped at k_max={run.config.k_max} "
                f"with relative change {run.trace[-1].rel_change:.3e}", level="warning")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _write_metrics(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["method", *MetricsReport.FIELDS])
        for method in sorted(rows):
            out.writerow([method, *(rows[method][k] for k in MetricsReport.FIELDS)])


def _read_metrics(path):
    if not path.exists():
        return {}
    with open(path, newline="") as fh:
        return {row["method"]: {k: row[k] for k in MetricsReport.FIELDS} for row in csv.DictReader(fh)}


def _format(rep: MetricsReport):
    return {k: repr(float(v)) for k, v in rep.as_row().items()}


def cmd_metrics(ctx, args):
    rec_path = Path(args.rec) if args.rec else ctx.path(f"rec_{args.method}.f64")
    rec, _ = ctx.load(rec_path, "image")
    if args.ref:
        ref, _ = ctx.load(args.ref, "image")
    else:
        p0, _ = ctx.load(ctx.path("phantom.f64"), "image")
        ref = ctx.exp.reference(ImageField(p0, ctx.exp.acquisition.h)).values
    if rec.shape != ref.shape:
        raise CliError("shape-mismatch", f"reconstruction {rec.shape} vs reference {ref.shape}")
    label = args.method or rec_path.with_suffix("").name
    table = ctx.path("metrics.csv")
    rows = _read_metrics(table)
    rows[label] = _format(metrics(rec, ref))
    _write_metrics(table, rows)
    return EXIT_OK


def cmd_transform(ctx, args):
    values, meta = ctx.load(args.input)
    domain = args.domain
    if domain == "data":
        frame = ctx.exp.data_frame
        tiling, spec = frame.tiling, frame.spec
    else:
        tiling, spec = ctx.exp.image_tiling, None
    if values.shape != tiling.dims:
        raise CliError("shape-mismatch", f"{args.input} has shape {values.shape}, {domain} tiling expects {tiling.dims}")
    coeffs = tiling.analyze(values)
    norm = float(np.linalg.norm(values)) or 1.0
    stats = {
        "domain": domain,
        "n_coeffs": tiling.n_coeffs,
        "norm_ratio": float(np.linalg.norm(coeffs)) / norm,
        "roundtrip_error": float(np.linalg.norm(tiling.synthesize(coeffs) - values)) / norm,
    }
    stem = Path(args.input).with_suffix("").name
    labels = tiling.label_image(scale=tiling.n_scales - 1)
    ctx.save(f"tiling_{domain}", np.fft.fftshift(labels), kind="label")
    magnitude = np.zeros(tiling.dims)
    for w in tiling.wedges:
        xi1, xi2, vals = tiling.window_entries(w.scale, w.angle)
        block = coeffs[w.offset: w.offset + w.size]
        energy = float(np.sum(block ** 2))
        n1, n2 = tiling.dims
        np.add.at(magnitude.ravel(), np.mod(xi1, n1) * n2 + np.mod(xi2, n2), energy * vals ** 2)
    ctx.save(f"coeff_energy_{stem}", np.fft.fftshift(magnitude), kind="diagnostic")
    if spec is not None:
        total = float(np.sum(coeffs ** 2)) or 1.0
        restricted = frame.synthesize(frame.analyze(values))
        stats.update(
            in_range_angles={str(j): spec.in_range_count(j) for j in range(1, tiling.n_scales)},
            out_of_range_energy=out_of_range_energy(coeffs, spec) / total,
            range_loss=float(np.linalg.norm(restricted - values)) / norm,
        )
        mask = np.zeros(tiling.dims)
        for w, a in zip(tiling.wedges, spec.angles):
            if w.cone in ("coarse", "wavelet"):
                continue
            xi1, xi2, vals = tiling.window_entries(w.scale, w.angle)
            n1, n2 = tiling.dims
            bins = np.mod(xi1, n1) * n2 + np.mod(xi2, n2)
            mask.ravel()[bins[vals > 0.5]] = 1.0 if a.in_range else -1.0
        ctx.save("wedge_mask", np.fft.fftshift(mask), kind="label")
        ctx.save(f"{stem}_restricted", restricted, **meta_without(meta))
    ctx.path(f"transform_{stem}.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def meta_without(meta):
    return {k: v for k, v in meta.items() if k not in ("shape", "config_hash")}


def cmd_run(ctx, args):
    """All stages in sequence; exit code is the worst of the stages."""
    codes = [cmd_simulate(ctx, args), cmd_subsample(ctx, _ns(data=None))]
    for method in args.methods:
        codes.append(cmd_reconstruct(ctx, _ns(method=method, name=None, input=None, pattern=None,
                                               measurements=None)))
        codes.append(cmd_metrics(ctx, _ns(method=method, rec=None, ref=None)))
    return max(codes)


def _ns(**kw):
    return argparse.Namespace(**kw)


# -- argument parsing ------------------------------------------------------------

def _methods(text):
    items = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in items if m not in METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return items


def _rate(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("rate must lie in (0, 1]")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (INI sections of key = value)")
    common.add_argument("--seed", type=int, help="master seed for phantom, noise and sampling")
    common.add_argument("--rate", type=_rate, help="fraction of sensors kept")
    common.add_argument("--out", help="output directory")
    common.add_argument("--export-png", action="store_true", help="also write 16-bit PNG previews")

    parser = argparse.ArgumentParser(prog="patcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="phantom and full sensor data")

    p = sub.add_parser("subsample", parents=[common], help="sampling pattern, b and zero-filled b0")
    p.add_argument("--data", help="full data array (default: OUT/data.f64)")

    p = sub.add_parser("reconstruct", parents=[common], help="initial pressure by one method")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--input", help="full data to time-reverse (tr only), e.g. a recovered data array")
    p.add_argument("--pattern", help="pattern file (default: OUT/pattern.txt)")
    p.add_argument("--measurements", help="measurements array (default: OUT/b.f64)")
    p.add_argument("--name", help="output stem (default: rec_METHOD)")

    p = sub.add_parser("metrics", parents=[common], help="score a reconstruction into OUT/metrics.csv")
    p.add_argument("--method", help="row label; also selects OUT/rec_METHOD.f64 when --rec is omitted")
    p.add_argument("--rec", help="reconstruction array")
    p.add_argument("--ref", help="reference image (default: upscaled OUT/phantom.f64)")

    p = sub.add_parser("transform", parents=[common], help="curvelet and wedge diagnostics of an array")
    p.add_argument("--input", required=True)
    p.add_argument("--domain", choices=("data", "image"), default="data")

    p = sub.add_parser("run", parents=[common], help="every stage for the listed methods")
    p.add_argument("--methods", type=_methods, default=list(METHODS), help="comma-separated subset of methods")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "subsample": cmd_subsample,
    "reconstruct": cmd_reconstruct,
    "metrics": cmd_metrics,
    "transform": cmd_transform,
    "run": cmd_run,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "metrics" and not (args.method or args.rec):
        parser.error("metrics needs --method or --rec")
    try:
        ctx = Context(args)
        return COMMANDS[args.command](ctx, args)
    except CliError as exc:
        _report(exc.kind, exc.detail)
        return exc.code
    except FileNotFoundError as exc:
        _report("missing-file", str(exc))
        return EXIT_INPUT
    except ValueError as exc:
        _report("invalid-input", str(exc).replace("\n", " "))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``fringeprof <subcommand> ...``.

Exit status: 0 success, 1 unexpected failure, 2 usage error, 3 missing
input, 4 invalid configuration or violated invariant. Failures print one
machine-parsable line to stderr::

    error: code=<name> exit=<status> message=<text>
"""

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibration import load_model, save_model
from .config import METHODS, POLICIES, ConfigError, RunConfig, load_config
from .io import RasterFormatError, read_raster, write_pgm, write_ply, write_raster
from .patterns import PatternSpec, gen_pattern_stack, verify_alignment
from .pipeline import (
    CSV_SCHEMA,
    calibrate_simulated,
    frames_from_manifest,
    run_compare,
    run_stream,
    simulate_stream,
)
from .sequence import read_manifest, throughput_report, write_manifest
from .simulator import OpticalModel

logger = logging.getLogger("fringeprof")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_MISSING, EXIT_INVALID = 0, 1, 2, 3, 4
FRAMES_SCHEMA = "# fringeprof frames schema=1"
_FRAME_COLUMNS = ("group", "failed", "max_staleness", "errors", "valid_points", "error_rate", "rms_mm",
                  "invalid_pixels", "out_of_table", "unusable_lines", "extrapolated", "outside_model",
                  "uncalibrated")
_MODEL_HEADER = ("K", "L", "quadratic", "mm_per_px", "defocus_sigma", "noise_sigma", "seed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(code, status, message):
    message = " ".join(str(message).split())
    print(f"error: code={code} exit={status} message={message}", file=sys.stderr)
    return status


def _fmt(x):
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def cmd_gen_patterns(args):
    spec = PatternSpec(
        period_px=args.period,
        n_periods=args.periods,
        n_gray_bits=args.bits,
        phase_axis=args.axis,
        phi0=args.phi0,
        proj_width=args.width,
        proj_height=args.height,
    )
    if not verify_alignment(spec):
        raise ConfigError("generated stack fails the branch-cut / codeword alignment self-test")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {v}" for k, v in spec.to_manifest().items()]
    lines.append(f"dither = {str(not args.no_dither).lower()}")
    for i, (role, raster) in enumerate(gen_pattern_stack(spec, dither=not args.no_dither), 1):
        name = f"{i:02d}_{role}.pgm"
        write_pgm(raster, out / name)
        lines.append(f"pattern = {role} {name}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    print(f"patterns = {len(lines) - len(spec.to_manifest()) - 1}")
    return EXIT_OK


def _header_for(cfg):
    head = dict(cfg.spec.to_manifest())
    for key in _MODEL_HEADER:
        head[key] = repr(getattr(cfg.model, key))
    head["n_groups"] = str(cfg.n_groups)
    head["truth"] = "truth_h_{group:04d}.frf"
    return head


def cmd_simulate(args):
    cfg = load_config(args.config)
    if args.groups is not None:
        cfg = replace(cfg, n_groups=args.groups)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames, truth = simulate_stream(cfg)
    listed = []
    for f in frames:
        name = f"{f.index:04d}_{f.role}.pgm"
        write_pgm(f.data, out / name, maxval=65535, nan_value=0.0)
        listed.append(type(f)(f.index, f.role, name))
    for j, h in truth.items():
        write_raster(h, out / f"truth_h_{j:04d}.frf")
    write_manifest(out / "manifest.txt", listed, header=_header_for(cfg))
    print(f"frames = {len(frames)}")
    return EXIT_OK


def cmd_calibrate(args):
    cfg = load_config(args.config)
    model = calibrate_simulated(cfg.spec, cfg.model, cfg.calib_heights, dither=cfg.dither,
                                b_threshold=cfg.b_threshold, edge_radius=cfg.edge_radius)
    save_model(model, args.out)
    print(f"calibrated_pixels = {int(model.calibrated.sum())}")
    print(f"rank_deficient = {model.rank_deficient}")
    return EXIT_OK


def _config_from_header(header, args):
    try:
        spec = PatternSpec.from_manifest(header)
        model_kw = {}
        for key in _MODEL_HEADER:
            if key in header:
                model_kw[key] = int(header[key]) if key == "seed" else float(header[key])
        model = OpticalModel(**model_kw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"manifest header incomplete or invalid: {exc}") from None
    return RunConfig(spec=spec, model=model, method=args.method, policy=args.policy,
                     edge_radius=args.edge_radius, b_threshold=args.b_threshold)


def _write_frames_csv(path, report):
    with open(path, "w", newline="") as fh:
        fh.write(FRAMES_SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_FRAME_COLUMNS)
        for rec in report.records:
            row = dict(rec)
            if "errors" in row and row.get("valid_points"):
                row["error_rate"] = row["errors"] / row["valid_points"]
            w.writerow([_fmt(row.get(c)) for c in _FRAME_COLUMNS])


def cmd_reconstruct(args):
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest not found: {manifest}")
    listed, header = read_manifest(manifest)
    cfg = _config_from_header(header, args)
    if cfg.method in ("two_frequency", "two_wavelength"):
        raise ConfigError(f"method {cfg.method} needs extra pattern sets that a time-overlapping stream does not carry")
    missing = [str(f.data) for f in listed if not Path(f.data).exists()]
    if missing:
        raise FileNotFoundError(f"frame file not found: {missing[0]}")
    calib = load_model(args.calib)
    frames = frames_from_manifest(listed)
    truth = None
    pattern = header.get("truth")
    if pattern:
        truth = {}
        for j in range(1, max((f.group for f in frames), default=0) + 1):
            p = manifest.parent / pattern.format(group=j)
            if p.exists():
                truth[j] = read_raster(p)
    results, report = run_stream(cfg, frames, calib, truth=truth or None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for res in results:
        if res.error is None:
            write_ply(res.points, out / f"frame_{res.group_index:04d}.ply")
            written += 1
    _write_frames_csv(out / "frames.csv", report)
    n_out, fps = throughput_report(len(frames), cfg.rate_hz, n_bits=cfg.spec.n_gray_bits)
    print(f"frames_out = {written}")
    print(f"expected_frames_out = {n_out}")
    print(f"reconstruction_fps_at_{cfg.rate_hz:g}hz = {fps:g}")
    if report.totals.get("valid_points"):
        print(f"error_rate = {report.error_rate:.6g}")
    return EXIT_OK


def cmd_compare(args):
    cfg = load_config(args.config)
    calib = load_model(args.calib) if args.calib else None
    rows = run_compare(cfg, calib, out_dir=args.out)
    for r in rows:
        print(f"{r['method']}: error_rate = {r['error_rate']:.6g}")
    return EXIT_OK


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"report input not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# fringeprof"):
        raise ConfigError(f"{path}: missing schema header line")
    rows = list(csv.DictReader(lines[1:]))
    return lines[0], rows


def _num(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return None


def cmd_report(args):
    schema, rows = _read_csv(args.input)
    out = []
    if schema == CSV_SCHEMA:
        for r in rows:
            out.append(f"{r['method']}.error_rate = {r['error_rate']}")
            out.append(f"{r['method']}.rms_mm = {r['rms_mm']}")
    elif schema == FRAMES_SCHEMA:
        out.append(f"frames = {len(rows)}")
        totals = {}
        for r in rows:
            for key in ("failed", "errors", "valid_points", "invalid_pixels", "out_of_table", "unusable_lines",
                        "extrapolated", "outside_model", "uncalibrated"):
                v = _num(r.get(key))
                if v is not None:
                    totals[key] = totals.get(key, 0) + int(v)
        out.extend(f"total_{k} = {v}" for k, v in totals.items())
        if totals.get("valid_points"):
            out.append(f"error_rate = {totals.get('errors', 0) / totals['valid_points']:.6g}")
    else:
        raise ConfigError(f"unknown report schema {schema!r}")
    text = "\n".join(out) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="fringeprof", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-patterns", help="write the projected pattern stack as PGMs")
    g.add_argument("--period", type=float, default=70.0)
    g.add_argument("--periods", type=int, default=16)
    g.add_argument("--bits", type=int, default=4)
    g.add_argument("--axis", choices=("x", "y"), default="x")
    g.add_argument("--phi0", type=float, default=np.pi / 3)
    g.add_argument("--width", type=int, default=None)
    g.add_argument("--height", type=int, default=None)
    g.add_argument("--no-dither", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_patterns)

    s = sub.add_parser("simulate", help="render a time-overlapping capture stream")
    s.add_argument("--config", required=True)
    s.add_argument("--groups", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="simulate reference and calibration planes, fit the model")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("reconstruct", help="reconstruct every output frame of a stream")
    r.add_argument("--manifest", required=True)
    r.add_argument("--calib", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--method", choices=METHODS, default="tripu")
    r.add_argument("--policy", choices=POLICIES, default="causal")
    r.add_argument("--edge-radius", type=int, default=2)
    r.add_argument("--b-threshold", type=float, default=0.02)
    r.set_defaults(func=cmd_reconstruct)

    m = sub.add_parser("compare", help="run all four unwrapping methods on one simulated capture")
    m.add_argument("--config", required=True)
    m.add_argument("--calib", default=None)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_compare)

    t = sub.add_parser("report", help="summarize a frames.csv or compare.csv")
    t.add_argument("--input", required=True)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail("missing_input", EXIT_MISSING, exc)
    except (ConfigError, RasterFormatError, ValueError) as exc:
        return _fail("invalid", EXIT_INVALID, exc)
    except Exception as exc:  # noqa: BLE001 - last-resort report for the CLI
        logger.debug("unexpected failure", exc_info=True)
        return _fail("internal", EXIT_FAIL, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())

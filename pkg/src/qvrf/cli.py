"""Command-line interface: ``python -m qvrf <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import codec, metrics
from . import rate_control as rc
from .errors import QVRFError
from .transform import BLOCK, BLOCK_SIZES, read_image, write_pgm

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


def _image_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{d} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no PGM/PPM images in {d}")
    return files


def cmd_encode(args):
    img = read_image(args.input)
    if args.a is not None:
        a = args.a
    else:
        _, fit = rc.read_fit_config(args.fit)
        a = rc.lambda_to_regulator(args.lam, fit)
    bs = codec.encode_image(img, a, args.block)
    Path(args.output).write_bytes(bs.to_bytes())
    br = codec.account_bits(bs)
    print(f"{args.output}: a={bs.a:.6g} {len(bs)} bytes {br.total_bpp:.5f} bpp")


def cmd_decode(args):
    img = codec.decode_image(Path(args.input).read_bytes())
    write_pgm(args.output, img)


def cmd_psnr(args):
    x, y = read_image(args.reference), read_image(args.distorted)
    try:
        ms = f"{metrics.ms_ssim(x, y):.6f}"
    except metrics.ImageTooSmallError:
        ms = "nan"
    print(f"psnr_db={metrics.psnr(x, y)!r} ms_ssim={ms}")


def cmd_sweep(args):
    files = _image_files(args.images)
    if args.points < 1 or not 0 < args.a_min <= args.a_max:
        raise ValueError("need --points >= 1 and 0 < --a-min <= --a-max")
    if args.points == 1:
        a_values = [args.a_min]
    else:
        a_values = list(np.geomspace(args.a_min, args.a_max, args.points))
    lambda_of = None
    if args.fit:
        _, fit = rc.read_fit_config(args.fit)
        lambda_of = lambda a: rc.regulator_to_lambda(a, fit)  # noqa: E731
    points = codec.rd_sweep([read_image(f) for f in files], a_values,
                            [f.name for f in files], args.block, lambda_of)
    codec.write_rd_csv(points, args.csv)
    print(f"{args.csv}: {len(points)} rows")


def cmd_fit(args):
    files = _image_files(args.images)
    calib = rc.Calibration([read_image(f) for f in files], args.cost_mode, args.block)
    vec = rc.optimize_vector(args.lambdas, calib, strict=not args.allow_non_monotone)
    fit = rc.fit_sqrt_lambda_line(vec)
    rc.write_fit_config(args.out, vec, fit)
    for lam, a in vec:
        print(f"lambda={lam:g} a={a:.6g}")
    print(f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} r2={fit.r_squared:.6f}")


def _curve(path, quality):
    points = codec.read_rd_csv(path)
    means = [p for p in points if p.image == "mean"]
    if means:
        points = means
    elif len({p.image for p in points}) > 1:
        raise ValueError(f"{path}: several images and no 'mean' rows")
    return metrics.RDCurve.from_points(points, quality)


def cmd_bdrate(args):
    anchor = _curve(args.anchor, args.quality)
    test = _curve(args.test, args.quality)
    print(f"bd_rate={metrics.bd_rate(anchor, test):.6f}%")


def cmd_account(args):
    if args.input:
        bs = codec.Bitstream.from_bytes(Path(args.input).read_bytes())
        br = codec.account_bits(bs)
        print(f"a={bs.a:.6g} size={bs.width}x{bs.height} block={bs.block}")
        print(f"total_bpp={br.total_bpp:.6f} latent_bpp={br.latent_bpp:.6f} "
              f"side_bpp={br.side_bpp:.6f} header_bpp={br.header_bpp:.6f}")
    else:
        a_values = args.a_values or list(rc.init_regulators(rc.LAMBDAS).values)
        print(codec.bits_table(read_image(args.image), a_values, args.block))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qvrf", description="Variable-rate block-DCT image codec.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="compress a PGM/PPM image")
    e.add_argument("-i", "--input", required=True)
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--a", type=float, help="quantization regulator")
    e.add_argument("--lambda", dest="lam", type=float, help="Lagrange multiplier (needs --fit)")
    e.add_argument("--fit", help="fit config written by 'qvrf fit'")
    e.add_argument("--block", type=int, default=BLOCK, choices=BLOCK_SIZES)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decompress to PGM")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(func=cmd_decode)

    q = sub.add_parser("psnr", help="PSNR and MS-SSIM between two images")
    q.add_argument("reference")
    q.add_argument("distorted")
    q.set_defaults(func=cmd_psnr)

    s = sub.add_parser("sweep", help="RD sweep over log-spaced regulators, written as CSV")
    s.add_argument("--images", required=True)
    s.add_argument("--a-min", type=float, default=1.0)
    s.add_argument("--a-max", type=float, default=10.0)
    s.add_argument("--points", type=int, default=8)
    s.add_argument("--csv", required=True)
    s.add_argument("--fit", help="fill the lambda column from this fit config")
    s.add_argument("--block", type=int, default=BLOCK, choices=BLOCK_SIZES)
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="optimize regulators for a lambda set and fit the sqrt line")
    f.add_argument("--lambdas", type=float, nargs="+", default=list(rc.LAMBDAS))
    f.add_argument("--images", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--cost-mode", choices=rc.COST_MODES, default="actual")
    f.add_argument("--allow-non-monotone", action="store_true")
    f.add_argument("--block", type=int, default=BLOCK, choices=BLOCK_SIZES)
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bdrate", help="BD-rate of test against anchor sweep CSVs")
    b.add_argument("--anchor", required=True)
    b.add_argument("--test", required=True)
    b.add_argument("--quality", choices=("psnr_db", "ms_ssim"), default="psnr_db")
    b.set_defaults(func=cmd_bdrate)

    a = sub.add_parser("account", help="bit breakdown of a stream, or a per-a table for an image")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("-i", "--input")
    src.add_argument("--image")
    a.add_argument("--a-values", type=float, nargs="+")
    a.add_argument("--block", type=int, default=BLOCK, choices=BLOCK_SIZES)
    a.set_defaults(func=cmd_account)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "encode":
        if (args.a is None) == (args.lam is None):
            parser.error("encode needs exactly one of --a or --lambda")
        if args.lam is not None and not args.fit:
            parser.error("--lambda requires --fit")
    try:
        args.func(args)
    except (QVRFError, OSError, ValueError) as exc:
        print(f"qvrf: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

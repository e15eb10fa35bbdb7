"""Command-line entry point: ``cofib denoise | sweep-snr | sweep-res | chart``.

Exit codes: 1 bad arguments or config, 2 I/O failure, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import bench
from .imagekit import PGMError, load_pgm, psnr, save_pgm, ssim
from .pipeline import DenoiseConfig, _threads, denoise_image

EXIT_ARGS, EXIT_IO, EXIT_PIPELINE = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cofib", description="Collaborative-filtering sparse-domain image denoiser.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with DenoiseConfig fields")
        sp.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("denoise", help="denoise one PGM image")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--sigma", type=float, help="known noise standard deviation (default: estimate)")
    d.add_argument("--reference", help="clean PGM for PSNR/SSIM reporting")
    d.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    common(d)

    s = sub.add_parser("sweep-snr", help="noise a clean image over a range of SNRs and denoise each")
    s.add_argument("--input", required=True)
    s.add_argument("--csv", required=True)
    s.add_argument("--svg")
    s.add_argument("--snrs", type=_floats, default=list(bench.DEFAULT_SNRS))
    s.add_argument("--timing", action="store_true", help="record wall time (output no longer reproducible)")
    common(s)

    r = sub.add_parser("sweep-res", help="denoise downsampled copies of a clean image")
    r.add_argument("--input", required=True)
    r.add_argument("--csv", required=True)
    r.add_argument("--svg")
    r.add_argument("--sides", type=_ints, default=list(bench.DEFAULT_SIDES))
    r.add_argument("--snr", type=float, default=20.0)
    r.add_argument("--timing", action="store_true")
    common(r)

    c = sub.add_parser("chart", help="render a sweep CSV as an SVG line chart")
    c.add_argument("--csv", required=True)
    c.add_argument("--svg", required=True)
    return p


def _config(args) -> DenoiseConfig:
    try:
        cfg = DenoiseConfig.from_json(args.config) if args.config else DenoiseConfig()
        cfg = dataclasses.replace(cfg, seed=args.seed)
        if getattr(args, "sigma", None) is not None:
            cfg = dataclasses.replace(cfg, noise_sigma=args.sigma)
        _threads()
    except OSError as exc:
        raise OSError(f"cannot read config: {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _load(path):
    try:
        return load_pgm(path)
    except (OSError, PGMError) as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def cmd_denoise(args) -> int:
    cfg = _config(args)
    noisy = _load(args.input)
    reference = _load(args.reference) if args.reference else None
    try:
        report = denoise_image(noisy, cfg)
    except Exception as exc:  # noqa: BLE001 - reported as pipeline failure
        print(f"cofib: denoising failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    save_pgm(report.denoised, args.output, binary=not args.ascii)
    summary = {"input": args.input, "output": args.output, "width": noisy.width,
               "height": noisy.height, "sigma": round(report.sigma, 6),
               "cluster_sizes": report.per_cluster_sizes}
    if reference is not None:
        if reference.shape != noisy.shape:
            raise UsageError("reference and input dimensions differ")
        pn, pd = psnr(reference, noisy), psnr(reference, report.denoised)
        summary.update(psnr_noisy=pn if pn != float("inf") else "inf",
                       psnr_denoised=pd if pd != float("inf") else "inf",
                       ssim_noisy=ssim(reference, noisy), ssim_denoised=ssim(reference, report.denoised))
    print(json.dumps(summary))
    return 0


def _sweep_outputs(args, records) -> None:
    bench.emit_csv(records, args.csv, timing=args.timing)
    if args.svg:
        bench.emit_svg_chart(records, args.svg)


def cmd_sweep_snr(args) -> int:
    cfg = _config(args)
    if not args.snrs:
        raise UsageError("--snrs must list at least one value")
    clean = _load(args.input)
    name = _stem(args.input)
    try:
        records = bench.run_snr_sweep(clean, args.snrs, cfg, args.seed, name)
    except Exception as exc:  # noqa: BLE001
        print(f"cofib: sweep failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    _sweep_outputs(args, records)
    return 0


def cmd_sweep_res(args) -> int:
    cfg = _config(args)
    clean = _load(args.input)
    if not args.sides or max(args.sides) > min(clean.shape):
        raise UsageError(f"--sides must be non-empty and at most {min(clean.shape)}")
    try:
        records = bench.run_resolution_sweep(clean, args.sides, args.snr, cfg, args.seed,
                                             _stem(args.input))
    except Exception as exc:  # noqa: BLE001
        print(f"cofib: sweep failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    _sweep_outputs(args, records)
    return 0


def cmd_chart(args) -> int:
    try:
        records = bench.read_csv(args.csv)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    bench.emit_svg_chart(records, args.svg)
    return 0


def _stem(path: str) -> str:
    import os
    return os.path.splitext(os.path.basename(path))[0]


COMMANDS = {"denoise": cmd_denoise, "sweep-snr": cmd_sweep_snr, "sweep-res": cmd_sweep_res,
            "chart": cmd_chart}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cofib: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"cofib: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

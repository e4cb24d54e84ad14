"""Command-line entry point: ``hmrfcg segment`` and ``hmrfcg phantom``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .grid import DEFAULT_ORDER, LatticeShape
from .phantom import PhantomSpec, generate
from .pipeline import PRESETS, RunConfig, ValidationError, run

EXIT_IO = 1
EXIT_USAGE = 2


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _init(text: str):
    return "auto" if text.strip() == "auto" else _float_list(text)


def _shape(text: str) -> tuple:
    """``WxH`` or ``WxHxD`` -> numpy-order dims ``(H, W)`` / ``(D, H, W)``."""
    try:
        parts = [int(v) for v in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH or WxHxD, got {text!r}") from None
    if len(parts) not in (2, 3) or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"expected WxH or WxHxD with positive sizes, got {text!r}")
    return tuple(reversed(parts))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmrfcg", description="HMRF segmentation by conjugate gradient over class means.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment an image or volume")
    seg.add_argument("--input", required=True)
    seg.add_argument("--truth")
    seg.add_argument("--output", required=True)
    seg.add_argument("--report", required=True)
    seg.add_argument("--k", type=int)
    seg.add_argument("--beta", type=float)
    seg.add_argument("--temp", type=float, dest="temperature")
    seg.add_argument("--init", type=_init, help="comma-separated initial means, or 'auto' (evenly spaced)")
    seg.add_argument("--preset", choices=sorted(PRESETS))
    seg.add_argument("--neighborhood", type=int, default=DEFAULT_ORDER, dest="order")
    seg.add_argument("--fd", choices=("centered", "forward", "backward"), default="centered")
    seg.add_argument("--eps", type=float, default=0.01)
    seg.add_argument("--max-iter", type=int, default=200)
    seg.add_argument("--grad-tol", type=float, default=1e-3)
    seg.add_argument("--threads", type=int, default=1)
    seg.add_argument("--slices", action="store_true", help="segment each z-slice of a volume independently")

    ph = sub.add_parser("phantom", help="write a synthetic image and its ground truth")
    ph.add_argument("--shape", type=_shape, required=True)
    ph.add_argument("--classes", type=_float_list, required=True)
    ph.add_argument("--geometry", choices=("bands", "disks", "blobs"), default="bands")
    ph.add_argument("--noise", type=float, default=0.0)
    ph.add_argument("--inhomogeneity", type=float, default=0.0)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--out-image", required=True)
    ph.add_argument("--out-truth", required=True)
    return parser


def _segment(args) -> int:
    config = RunConfig(
        input=args.input, output=args.output, report=args.report, truth=args.truth,
        k=args.k, beta=args.beta, temperature=args.temperature, init=args.init,
        preset=args.preset, order=args.order, fd=args.fd, eps=args.eps,
        max_iter=args.max_iter, grad_tol=args.grad_tol, threads=args.threads, slices=args.slices,
    )
    report = run(config)
    print(f"final energy {report.final_energy!r} after {sum(t.iterations for t in report.traces)} iterations")
    if report.dice is not None:
        print(f"mean dice {report.dice.mean:.4f}")
    return 0


def _phantom(args) -> int:
    shape = LatticeShape(args.shape)
    spec = PhantomSpec(shape, args.classes, args.geometry, args.noise, args.inhomogeneity, args.seed)
    image, truth = generate(spec)
    io.save_image(image, args.out_image)
    io.save_labeling(truth, args.out_truth)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "segment":
            return _segment(args)
        return _phantom(args)
    except ValidationError as exc:
        print(f"hmrfcg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.FormatError as exc:
        print(f"hmrfcg: malformed input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"hmrfcg: cannot access {exc.filename!r}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hmrfcg: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: encode (PGM to .holo container), decode (subset reconstruction
back to PGM), eval (per-m statistics as JSON/CSV), curves (PSNR of prefix
reconstructions over packet orders), trace (run the optimizer and dump its
per-iteration cost CSV).

Exit codes: 0 success, 1 generic pipeline error, 2 invalid packet subset,
3 container error. The external codec is configured through the
HOLO_EXT_ENCODE / HOLO_EXT_DECODE command templates.
"""

from __future__ import annotations

import argparse
import sys

from . import codec as _codec
from . import evaluation as _ev
from . import holographic as _holo
from . import optimizer as _opt
from .errors import ContainerError, HoloError, InvalidConfig, InvalidSubset
from .imaging import load_pgm, save_pgm
from .shifts import ShiftMode, ShiftSpec, standard_shift_grid

MODES = ("duplicate", "baseline", "opt2", "optk")


def _parse_shift_list(text: str) -> list[ShiftSpec]:
    specs = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            dy, dx = (int(v) for v in part.split(","))
        except ValueError:
            raise InvalidConfig(f"bad shift {part!r}; expected 'dy,dx[;dy,dx...]'") from None
        specs.append(ShiftSpec(dy, dx, ShiftMode.REPLICATE_PAD))
    if not specs:
        raise InvalidConfig("empty shift list")
    return specs


def _parse_subset(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidSubset(f"bad subset {text!r}; expected e.g. '1,3'") from None


def _codec_params(args, theta: float) -> _codec.CodecParams:
    codec_id = _codec.CODEC_EXTERNAL if args.codec == "external" else _codec.CODEC_INTERNAL
    return _codec.CodecParams(theta=theta, codec_id=codec_id, block_size=args.block_size)


def _build_optimized(x, shifts, args, mode: str):
    h, w = x.shape
    K = len(shifts)
    m = 2 if mode == "opt2" else K
    params = _opt.default_params(mode, K=K, m=m, N=h * w, ratio=args.ratio)
    if args.mu is not None:
        params.mu = args.mu
    if args.lam is not None:
        params.lam = args.lam
    if args.beta is not None:
        params.beta = args.beta
    if args.iterations is not None:
        params.iterations = args.iterations
    base = _codec_params(args, theta=args.ratio)
    _, theta = _codec.compress_to_ratio(_apply_first_shift(x, shifts), args.ratio, base)
    params.theta = theta
    return _opt.optimize(x, shifts, base, params)


def _apply_first_shift(x, shifts):
    from .shifts import apply_shift

    return apply_shift(x, shifts[0])


def _encode_pipeline(args):
    x = load_pgm(args.input)
    shifts = _parse_shift_list(args.shifts) if args.shifts else None
    trace = None

    if args.mode == "duplicate":
        base = _codec_params(args, theta=args.ratio)
        pkt, theta = _codec.compress_to_ratio(x, args.ratio, base)
        ps = _holo.encode_duplicate(x, args.K, _codec_params(args, theta))
    elif args.mode == "baseline":
        shifts = shifts or standard_shift_grid(args.K)
        base = _codec_params(args, theta=args.ratio)
        _, theta = _codec.compress_to_ratio(_apply_first_shift(x, shifts), args.ratio, base)
        ps = _holo.encode_baseline(x, shifts, _codec_params(args, theta))
    else:
        shifts = shifts or standard_shift_grid(args.K)
        ps, trace = _build_optimized(x, shifts, args, args.mode)
    return x, ps, trace


def _print_rates(ps: _holo.PacketSet, container: bytes) -> None:
    h, w = ps.original_dims
    n = h * w
    for i, pkt in enumerate(ps.packets, start=1):
        print(f"packet {i}: {pkt.bit_cost} bits ({pkt.bit_cost / n:.4f} bpp)")
    overhead = 8 * len(container) - sum(p.bit_cost for p in ps.packets)
    print(f"container overhead: {overhead} bits")


def cmd_encode(args) -> int:
    _, ps, trace = _encode_pipeline(args)
    container = _holo.save_packet_set(ps)
    with open(args.output, "wb") as fh:
        fh.write(container)
    _print_rates(ps, container)
    if trace is not None and args.trace:
        with open(args.trace, "w") as fh:
            fh.write(trace.to_csv())
    return 0


def cmd_decode(args) -> int:
    with open(args.container, "rb") as fh:
        ps = _holo.load_packet_set(fh.read())
    subset = _parse_subset(args.use) if args.use else list(range(1, ps.K + 1))
    recon = _holo.reconstruct(ps, subset)
    save_pgm(args.output, recon)
    if args.original:
        x = load_pgm(args.original)
        value = _ev.psnr(float(((x - recon) ** 2).mean()))
        print(f"PSNR: {value:.2f} dB")
    return 0


def cmd_eval(args) -> int:
    with open(args.container, "rb") as fh:
        ps = _holo.load_packet_set(fh.read())
    x = load_pgm(args.original)
    report = _ev.evaluate(x, ps, sigma=args.sigma)
    with open(args.output, "w") as fh:
        fh.write(_ev.report_to_json(report))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(_ev.report_to_csv(report))
    for s in report.per_m:
        print(f"m={s.m}: mean PSNR {s.mean_psnr:.2f} dB, std {s.std_psnr:.2f} dB")
    return 0


def cmd_curves(args) -> int:
    with open(args.container, "rb") as fh:
        ps = _holo.load_packet_set(fh.read())
    x = load_pgm(args.original)
    rows = _ev.psnr_order_curves(x, ps, sample_orders=args.sample_orders, seed=args.seed)
    with open(args.output, "w") as fh:
        fh.write(_ev.curves_to_csv(rows))
    print(f"wrote {len(rows)} rows")
    return 0


def cmd_trace(args) -> int:
    x = load_pgm(args.input)
    shifts = _parse_shift_list(args.shifts) if args.shifts else standard_shift_grid(args.K)
    ps, trace = _build_optimized(x, shifts, args, args.mode)
    with open(args.output, "w") as fh:
        fh.write(trace.to_csv())
    if args.container:
        with open(args.container, "wb") as fh:
            fh.write(_holo.save_packet_set(ps))
    print(f"wrote {len(trace.rows)} iterations")
    return 0


def _add_codec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratio", type=float, default=50.0, help="target compression ratio")
    p.add_argument("--codec", choices=("internal", "external"), default="internal")
    p.add_argument("--block-size", type=int, default=8)


def _add_optimizer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holoshift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PGM into a .holo container")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=MODES, default="baseline")
    p.add_argument("-K", type=int, default=4)
    p.add_argument("--shifts", help="explicit pad shifts 'dy,dx;dy,dx;...'")
    p.add_argument("--trace", help="CSV path for the cost trace (opt modes)")
    _add_codec_args(p)
    _add_optimizer_args(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a PGM from a packet subset")
    p.add_argument("container")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--use", help="1-based packet indices, e.g. '1,3' (default: all)")
    p.add_argument("--original", help="reference PGM; prints PSNR")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="per-m reconstruction statistics")
    p.add_argument("container")
    p.add_argument("--original", required=True)
    p.add_argument("-o", "--output", required=True, help="JSON report path")
    p.add_argument("--csv", help="optional per-subset CSV path")
    p.add_argument("--sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curves", help="PSNR vs packet count for append orders")
    p.add_argument("container")
    p.add_argument("--original", required=True)
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.add_argument("--sample-orders", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("trace", help="run the optimizer and dump the cost CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.add_argument("--mode", choices=("opt2", "optk"), required=True)
    p.add_argument("-K", type=int, default=4)
    p.add_argument("--shifts", help="explicit pad shifts 'dy,dx;dy,dx;...'")
    p.add_argument("--container", help="also save the optimized packet set")
    _add_codec_args(p)
    _add_optimizer_args(p)
    p.set_defaults(func=cmd_trace)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidSubset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (HoloError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

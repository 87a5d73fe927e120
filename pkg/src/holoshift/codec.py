"""Block-transform image codec and external-tool adapter.

The internal codec tiles the image into square blocks (edge-replicated to a
multiple of the block size), level-shifts by -128, applies an orthonormal
2-D DCT per tile, quantizes coefficients uniformly with step ``theta``
(round to nearest, ties away from zero), zigzag-scans each block, run-length
codes zero runs and entropy-codes the resulting (run, level) symbols with a
canonical prefix-free code whose table is embedded in the packet header.

Packet layout (big-endian throughout):

    magic  "HPK1"          4 bytes
    codec_id               u8    (0 internal, 1 external)
    height, width          u16, u16
    block_size             u16
    theta                  f64
    table entry count      u16
    table entries          variable, canonical code order:
                             varint(run + 1)   0 means end-of-block symbol
                             svarint(level)    absent for end-of-block
                             code length       u8
    payload                MSB-first bitstream of canonical codes

For the external codec the table count is 0 and the payload is the raw byte
stream produced by the configured tool. Command templates for external tools
use the placeholders {in}, {out} and {ratio}; ``theta`` then carries the
compression-ratio target instead of a quantizer step.
"""

from __future__ import annotations

import heapq
import os
import shlex
import struct
import subprocess
import tempfile
from collections import Counter
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import DecodeError, ExternalCodecError, InvalidInput, RateError
from .imaging import read_pgm, require_image, write_pgm

__all__ = [
    "CODEC_INTERNAL",
    "CODEC_EXTERNAL",
    "ENV_EXT_ENCODE",
    "ENV_EXT_DECODE",
    "CodecParams",
    "Packet",
    "compress",
    "decompress",
    "compress_to_ratio",
    "external_codec_roundtrip",
]

CODEC_INTERNAL = 0
CODEC_EXTERNAL = 1

ENV_EXT_ENCODE = "HOLO_EXT_ENCODE"
ENV_EXT_DECODE = "HOLO_EXT_DECODE"

MAGIC = b"HPK1"
_HEADER = struct.Struct(">4sBHHHdH")

# End-of-block marker in the symbol alphabet; sorts before all (run, level)
# pairs, which keeps the canonical ordering deterministic.
_EOB = (-1, 0)

_THETA_MIN = 1e-9
_THETA_MAX = 1e12


@dataclass(frozen=True)
class CodecParams:
    """Codec selection and rate parameter.

    ``theta`` is the quantizer step for the internal codec and the target
    compression ratio for the external one.
    """

    theta: float
    codec_id: int = CODEC_INTERNAL
    block_size: int = 8

    def __post_init__(self):
        if not self.theta > 0:
            raise InvalidInput(f"theta must be > 0, got {self.theta}")
        if self.codec_id not in (CODEC_INTERNAL, CODEC_EXTERNAL):
            raise InvalidInput(f"unknown codec_id {self.codec_id}")
        if self.codec_id == CODEC_INTERNAL and self.block_size < 2:
            raise InvalidInput(f"block_size must be >= 2, got {self.block_size}")


@dataclass(frozen=True)
class Packet:
    """One binary compressed representation."""

    data: bytes

    @property
    def bit_cost(self) -> int:
        return 8 * len(self.data)


# ---------------------------------------------------------------------------
# Block handling

@lru_cache(maxsize=None)
def _zigzag_indices(n: int) -> np.ndarray:
    """Flat indices of an n x n block in zigzag scan order."""
    order = []
    for s in range(2 * n - 1):
        cells = [(i, s - i) for i in range(max(0, s - n + 1), min(s, n - 1) + 1)]
        if s % 2 == 0:
            cells.reverse()
        order.extend(i * n + j for i, j in cells)
    return np.array(order, dtype=np.intp)


def _blockify(img: np.ndarray, b: int) -> tuple[np.ndarray, int, int]:
    h, w = img.shape
    hb = -(-h // b)
    wb = -(-w // b)
    padded = np.pad(img, ((0, hb * b - h), (0, wb * b - w)), mode="edge")
    blocks = padded.reshape(hb, b, wb, b).swapaxes(1, 2).reshape(hb * wb, b, b)
    return blocks, hb, wb


def _unblockify(blocks: np.ndarray, hb: int, wb: int, h: int, w: int, b: int) -> np.ndarray:
    full = blocks.reshape(hb, wb, b, b).swapaxes(1, 2).reshape(hb * b, wb * b)
    return full[:h, :w].copy()


def _quantize(coeffs: np.ndarray, theta: float) -> np.ndarray:
    return (np.sign(coeffs) * np.floor(np.abs(coeffs) / theta + 0.5)).astype(np.int64)


# ---------------------------------------------------------------------------
# Symbol stream and canonical prefix code

def _rle_encode(zz: np.ndarray) -> list[tuple[int, int]]:
    """Turn zigzag-ordered block rows into a (run, level) symbol stream."""
    n2 = zz.shape[1]
    symbols: list[tuple[int, int]] = []
    for row in zz:
        idx = np.flatnonzero(row)
        if idx.size == 0:
            symbols.append(_EOB)
            continue
        runs = np.diff(idx, prepend=-1) - 1
        levels = row[idx]
        symbols.extend(zip(runs.tolist(), levels.tolist()))
        if idx[-1] != n2 - 1:
            symbols.append(_EOB)
    return symbols


def _code_lengths(freqs: dict[tuple[int, int], int]) -> dict[tuple[int, int], int]:
    """Prefix-free code lengths from symbol frequencies (deterministic)."""
    items = sorted(freqs.items())
    if len(items) == 1:
        return {items[0][0]: 1}
    # Nodes: leaves first, then merges; ties broken by creation order.
    children: list[tuple[int, int] | None] = [None] * len(items)
    heap = [(freq, node_id) for node_id, (_, freq) in enumerate(items)]
    heapq.heapify(heap)
    while len(heap) > 1:
        f1, n1 = heapq.heappop(heap)
        f2, n2 = heapq.heappop(heap)
        children.append((n1, n2))
        heapq.heappush(heap, (f1 + f2, len(children) - 1))
    depths = [0] * len(children)
    for node_id in range(len(children) - 1, len(items) - 1, -1):
        left, right = children[node_id]
        depths[left] = depths[node_id] + 1
        depths[right] = depths[node_id] + 1
    return {sym: depths[node_id] for node_id, (sym, _) in enumerate(items)}


def _canonical_codes(lengths: dict[tuple[int, int], int]) -> list[tuple[tuple[int, int], int, int]]:
    """Canonical (symbol, length, code) list sorted by (length, symbol)."""
    order = sorted(lengths, key=lambda sym: (lengths[sym], sym))
    out = []
    code = 0
    prev_len = lengths[order[0]]
    for sym in order:
        length = lengths[sym]
        code <<= length - prev_len
        out.append((sym, length, code))
        code += 1
        prev_len = length
    return out


def _write_varint(buf: bytearray, value: int) -> None:
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            buf.append(b | 0x80)
        else:
            buf.append(b)
            return


def _write_svarint(buf: bytearray, value: int) -> None:
    _write_varint(buf, (value << 1) ^ (value >> 63) if value < 0 else value << 1)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise DecodeError("truncated varint in code table")
        b = data[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7


def _read_svarint(data: bytes, pos: int) -> tuple[int, int]:
    raw, pos = _read_varint(data, pos)
    return (raw >> 1) ^ -(raw & 1), pos


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, code: int, length: int) -> None:
        self.acc = (self.acc << length) | code
        self.nbits += length
        while self.nbits >= 8:
            self.nbits -= 8
            self.out.append((self.acc >> self.nbits) & 0xFF)
        self.acc &= (1 << self.nbits) - 1

    def getvalue(self) -> bytes:
        if self.nbits:
            self.out.append((self.acc << (8 - self.nbits)) & 0xFF)
            self.acc = 0
            self.nbits = 0
        return bytes(self.out)


# ---------------------------------------------------------------------------
# Internal codec

def _compress_internal(img: np.ndarray, p: CodecParams) -> Packet:
    arr = require_image(img)
    h, w = arr.shape
    if h > 0xFFFF or w > 0xFFFF:
        raise InvalidInput(f"image dims {h}x{w} exceed the 16-bit header fields")
    b = p.block_size
    blocks, hb, wb = _blockify(arr - 128.0, b)
    coeffs = scipy.fft.dctn(blocks, axes=(1, 2), norm="ortho", type=2)
    q = _quantize(coeffs, p.theta)
    zz = q.reshape(-1, b * b)[:, _zigzag_indices(b)]
    symbols = _rle_encode(zz)

    lengths = _code_lengths(Counter(symbols))
    canonical = _canonical_codes(lengths)
    if len(canonical) > 0xFFFF:
        raise InvalidInput("code table overflow: theta too small for this image")

    table = bytearray()
    codemap: dict[tuple[int, int], tuple[int, int]] = {}
    for sym, length, code in canonical:
        if length > 0xFF:
            raise InvalidInput("prefix code length overflow")
        if sym == _EOB:
            _write_varint(table, 0)
        else:
            _write_varint(table, sym[0] + 1)
            _write_svarint(table, sym[1])
        table.append(length)
        codemap[sym] = (code, length)

    writer = _BitWriter()
    wr = writer.write
    for sym in symbols:
        wr(*codemap[sym])

    header = _HEADER.pack(MAGIC, p.codec_id, h, w, b, p.theta, len(canonical))
    return Packet(header + bytes(table) + writer.getvalue())


def _parse_header(data: bytes):
    if len(data) < _HEADER.size:
        raise DecodeError(f"packet too short: {len(data)} bytes")
    magic, codec_id, h, w, block_size, theta, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DecodeError(f"bad packet magic {magic!r}")
    if codec_id not in (CODEC_INTERNAL, CODEC_EXTERNAL):
        raise DecodeError(f"unknown codec_id {codec_id}")
    if h < 1 or w < 1:
        raise DecodeError(f"invalid dims {h}x{w}")
    return codec_id, h, w, block_size, theta, count


def _decompress_internal(data: bytes, h: int, w: int, b: int, theta: float, count: int) -> np.ndarray:
    if b < 2:
        raise DecodeError(f"invalid block size {b}")
    if not theta > 0:
        raise DecodeError(f"invalid theta {theta}")
    if count < 1:
        raise DecodeError("empty code table")
    pos = _HEADER.size
    syms: list[tuple[int, int]] = []
    lengths: list[int] = []
    for _ in range(count):
        run_tag, pos = _read_varint(data, pos)
        if run_tag == 0:
            sym = _EOB
        else:
            level, pos = _read_svarint(data, pos)
            sym = (run_tag - 1, level)
        if pos >= len(data) and count:
            raise DecodeError("truncated code table")
        length = data[pos]
        pos += 1
        syms.append(sym)
        lengths.append(length)

    # Rebuild canonical codes; stored order must be canonical.
    if any(lengths[i] > lengths[i + 1] for i in range(len(lengths) - 1)):
        raise DecodeError("code table not in canonical order")
    if lengths[0] < 1:
        raise DecodeError("invalid zero code length")
    max_len = lengths[-1]
    first_code = [0] * (max_len + 1)
    num_at = [0] * (max_len + 1)
    base_idx = [0] * (max_len + 1)
    code = 0
    prev_len = lengths[0]
    for i, length in enumerate(lengths):
        code <<= length - prev_len
        if code >= 1 << length:
            raise DecodeError("over-subscribed prefix code table")
        if num_at[length] == 0:
            first_code[length] = code
            base_idx[length] = i
        num_at[length] += 1
        code += 1
        prev_len = length

    n2 = b * b
    hb = -(-h // b)
    wb = -(-w // b)
    n_blocks = hb * wb
    zz = np.zeros((n_blocks, n2), dtype=np.int64)

    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=pos)).tolist()
    bi = 0
    nbits = len(bits)
    block = 0
    slot = 0
    cur = 0
    cur_len = 0
    row = zz[0]
    while block < n_blocks:
        if bi >= nbits:
            raise DecodeError("payload exhausted mid-stream")
        cur = (cur << 1) | bits[bi]
        bi += 1
        cur_len += 1
        if cur_len > max_len:
            raise DecodeError("invalid code in payload")
        if num_at[cur_len] and first_code[cur_len] <= cur < first_code[cur_len] + num_at[cur_len]:
            sym = syms[base_idx[cur_len] + cur - first_code[cur_len]]
            cur = 0
            cur_len = 0
            if sym == _EOB:
                block += 1
                slot = 0
                if block < n_blocks:
                    row = zz[block]
                continue
            run, level = sym
            slot += run
            if slot >= n2:
                raise DecodeError("zero run overflows block")
            row[slot] = level
            slot += 1
            if slot == n2:
                block += 1
                slot = 0
                if block < n_blocks:
                    row = zz[block]

    flat = np.zeros((n_blocks, n2), dtype=np.float64)
    flat[:, _zigzag_indices(b)] = zz
    blocks = scipy.fft.idctn(flat.reshape(n_blocks, b, b) * theta, axes=(1, 2), norm="ortho", type=2)
    return _unblockify(blocks + 128.0, hb, wb, h, w, b)


# ---------------------------------------------------------------------------
# External tool adapter

def _format_cmd(template: str, **fields) -> list[str]:
    try:
        rendered = template.format(**fields)
    except (KeyError, IndexError, ValueError) as exc:
        raise ExternalCodecError(f"bad command template {template!r}: {exc}") from None
    return shlex.split(rendered)


def _run_tool(argv: list[str]) -> None:
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise ExternalCodecError(f"failed to launch {argv[0]!r}: {exc}") from None
    if proc.returncode != 0:
        raise ExternalCodecError(
            f"{argv[0]!r} exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
        )


def _ratio_field(theta: float):
    return int(theta) if float(theta).is_integer() else theta


def _external_encode(img: np.ndarray, p: CodecParams, encode_cmd: str) -> Packet:
    arr = require_image(img)
    h, w = arr.shape
    if h > 0xFFFF or w > 0xFFFF:
        raise InvalidInput(f"image dims {h}x{w} exceed the 16-bit header fields")
    with tempfile.TemporaryDirectory(prefix="holoshift-") as tmp:
        src = os.path.join(tmp, "input.pgm")
        dst = os.path.join(tmp, "encoded.bin")
        with open(src, "wb") as fh:
            fh.write(write_pgm(arr))
        _run_tool(_format_cmd(encode_cmd, **{"in": src, "out": dst, "ratio": _ratio_field(p.theta)}))
        if not os.path.exists(dst):
            raise ExternalCodecError(f"encoder produced no output file {dst!r}")
        with open(dst, "rb") as fh:
            payload = fh.read()
    header = _HEADER.pack(MAGIC, CODEC_EXTERNAL, h, w, p.block_size, p.theta, 0)
    return Packet(header + payload)


def _external_decode(payload: bytes, h: int, w: int, decode_cmd: str) -> np.ndarray:
    with tempfile.TemporaryDirectory(prefix="holoshift-") as tmp:
        src = os.path.join(tmp, "encoded.bin")
        dst = os.path.join(tmp, "decoded.pgm")
        with open(src, "wb") as fh:
            fh.write(payload)
        _run_tool(_format_cmd(decode_cmd, **{"in": src, "out": dst}))
        if not os.path.exists(dst):
            raise ExternalCodecError(f"decoder produced no output file {dst!r}")
        with open(dst, "rb") as fh:
            img = read_pgm(fh.read())
    if img.shape != (h, w):
        raise ExternalCodecError(f"decoder returned dims {img.shape}, expected {(h, w)}")
    return img


def _env_template(name: str) -> str:
    template = os.environ.get(name)
    if not template:
        raise ExternalCodecError(f"external codec requested but {name} is not set")
    return template


# ---------------------------------------------------------------------------
# Public API

def compress(img: np.ndarray, p: CodecParams) -> Packet:
    """Compress an image into a self-contained packet. Deterministic."""
    if p.codec_id == CODEC_EXTERNAL:
        return _external_encode(img, p, _env_template(ENV_EXT_ENCODE))
    return _compress_internal(img, p)


def decompress(pkt: Packet) -> np.ndarray:
    """Decode a packet back to a real-valued image of its original dims.

    Output is not clamped: it is exactly the reconstruction the quantized
    coefficients describe, so recompressing it reproduces the same packet.
    """
    data = pkt.data
    codec_id, h, w, block_size, theta, count = _parse_header(data)
    if codec_id == CODEC_EXTERNAL:
        return _external_decode(data[_HEADER.size :], h, w, _env_template(ENV_EXT_DECODE))
    return _decompress_internal(data, h, w, block_size, theta, count)


def compress_to_ratio(img: np.ndarray, ratio: float, codec: CodecParams) -> tuple[Packet, float]:
    """Find the largest-rate packet whose bit cost fits 8*N/ratio bits.

    For the internal codec this searches the quantizer step geometrically:
    the bracket [lo, hi] with lo failing and hi meeting the budget is
    bisected until hi <= 1.05 * lo (at most 64 steps). The external codec is
    rate-parameterized already, so the ratio is passed straight through.
    """
    arr = require_image(img)
    if not ratio > 1:
        raise InvalidInput(f"ratio must be > 1, got {ratio}")
    if codec.codec_id == CODEC_EXTERNAL:
        p = replace(codec, theta=float(ratio))
        return compress(arr, p), float(ratio)

    budget = 8.0 * arr.size / ratio
    best: Packet | None = None
    best_theta = 0.0

    def attempt(theta: float) -> int:
        nonlocal best, best_theta
        pkt = compress(arr, replace(codec, theta=theta))
        if pkt.bit_cost <= budget and (best is None or pkt.bit_cost > best.bit_cost):
            best, best_theta = pkt, theta
        return pkt.bit_cost

    theta = 32.0
    bits = attempt(theta)
    if bits > budget:
        lo = theta
        while bits > budget:
            theta *= 4.0
            if theta > _THETA_MAX:
                raise RateError(f"budget {budget:.0f} bits unreachable (needs theta > {_THETA_MAX:g})")
            lo = theta / 4.0
            bits = attempt(theta)
        hi = theta
    else:
        hi = theta
        while True:
            theta /= 4.0
            if theta < _THETA_MIN:
                # Even the smallest step fits the budget; nothing to bisect.
                return best, best_theta
            bits = attempt(theta)
            if bits > budget:
                lo = theta
                break
            hi = theta

    for _ in range(64):
        if hi <= lo * 1.05:
            break
        mid = (lo * hi) ** 0.5
        if attempt(mid) <= budget:
            hi = mid
        else:
            lo = mid
    return best, best_theta


def external_codec_roundtrip(
    img: np.ndarray, p: CodecParams, encode_cmd: str, decode_cmd: str
) -> tuple[Packet, np.ndarray]:
    """Run an external encode/decode pair through temp files.

    Templates use {in}, {out} and (encode only) {ratio} placeholders.
    """
    pkt = _external_encode(img, p, encode_cmd)
    h, w = require_image(img).shape
    return pkt, _external_decode(pkt.data[_HEADER.size :], h, w, decode_cmd)

"""Packet sets: multi-packet encoding, subset reconstruction, container I/O.

A packet set bundles K compressed packets with the shift metadata needed to
reconstruct from any subset: each selected packet is decoded, inverse
shifted back onto the original support and the results are averaged.

Container layout (big-endian):

    magic "HOLO", u8 version (1)
    u16 height, u16 width
    u8 K, u8 mode_tag          0 duplicate, 1 baseline, m >= 2 optimized-for-m
    K shift records            i16 dy, i16 dx, u8 mode (0 cyclic, 1 pad)
    codec params               u8 codec_id, u16 block_size, f64 theta
    K packet blocks            u32 length prefix + bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import CodecParams, Packet, compress, decompress
from .errors import ContainerError, HoloError, InvalidConfig, InvalidSubset
from .imaging import require_image
from .shifts import ShiftMode, ShiftSpec, apply_inverse_shift, apply_shift

__all__ = [
    "MODE_DUPLICATE",
    "MODE_BASELINE",
    "PacketSet",
    "mode_label",
    "mean_images",
    "encode_duplicate",
    "encode_baseline",
    "reconstruct",
    "back_shifted_packets",
    "save_packet_set",
    "load_packet_set",
]

MODE_DUPLICATE = 0
MODE_BASELINE = 1

_CONTAINER_MAGIC = b"HOLO"
_CONTAINER_VERSION = 1
_HEAD = struct.Struct(">4sBHHBB")
_SHIFT_REC = struct.Struct(">hhB")
_CODEC_REC = struct.Struct(">BHd")


def mode_label(mode_tag: int) -> str:
    if mode_tag == MODE_DUPLICATE:
        return "duplicate"
    if mode_tag == MODE_BASELINE:
        return "baseline"
    return f"optimized-for-{mode_tag}"


@dataclass
class PacketSet:
    """K packets plus the metadata needed to reconstruct from any subset."""

    original_dims: tuple[int, int]
    shifts: list[ShiftSpec]
    codec: CodecParams
    packets: list[Packet]
    mode_tag: int

    def __post_init__(self):
        if len(self.shifts) != len(self.packets) or not self.packets:
            raise InvalidConfig(
                f"packet/shift count mismatch: {len(self.packets)} vs {len(self.shifts)}"
            )

    @property
    def K(self) -> int:
        return len(self.packets)


def mean_images(images: Sequence[np.ndarray]) -> np.ndarray:
    """Average a stack of equal-shape images with compensated arithmetic.

    Accumulation uses error-free two-sums and the division is residual
    corrected, so averaging m bit-identical arrays returns that array
    exactly for any m. Plain float summation fails this for m = 3 on
    roughly a sixth of sample values, which would break the guarantee that
    duplicate packet sets reconstruct identically for every subset size.
    """
    m = len(images)
    if m == 0:
        raise InvalidSubset("cannot average an empty image list")
    if m == 1:
        return images[0].copy()
    s = np.zeros_like(images[0])
    c = np.zeros_like(images[0])
    for a in images:
        t = s + a
        bp = t - s
        c += (s - (t - bp)) + (a - bp)
        s = t
    q = s / m
    # Exact m * q via binary decomposition, each partial kept as a two-sum.
    p = np.zeros_like(q)
    pe = np.zeros_like(q)
    k = m
    term = q.copy()
    while k:
        if k & 1:
            t = p + term
            bp = t - p
            pe += (p - (t - bp)) + (term - bp)
            p = t
        term = term * 2
        k >>= 1
    return q + (((s - p) - pe) + c) / m


def encode_duplicate(x: np.ndarray, K: int, codec: CodecParams) -> PacketSet:
    """Compress once and store K byte-identical packets with zero shifts."""
    arr = require_image(x)
    if K < 1:
        raise InvalidConfig(f"K must be >= 1, got {K}")
    pkt = compress(arr, codec)
    zero = ShiftSpec(0, 0, ShiftMode.CYCLIC)
    return PacketSet(arr.shape, [zero] * K, codec, [pkt] * K, MODE_DUPLICATE)


def encode_baseline(x: np.ndarray, shifts: Sequence[ShiftSpec], codec: CodecParams) -> PacketSet:
    """Compress a distinct shift of the input for each packet."""
    arr = require_image(x)
    shifts = list(shifts)
    if not shifts:
        raise InvalidConfig("shift list must be non-empty")
    if len(set(shifts)) != len(shifts):
        raise InvalidConfig("shift list contains duplicates")
    packets = [compress(apply_shift(arr, s), codec) for s in shifts]
    return PacketSet(arr.shape, shifts, codec, packets, MODE_BASELINE)


def _check_subset(ps: PacketSet, subset_indices: Sequence[int]) -> list[int]:
    idx = list(subset_indices)
    if not idx:
        raise InvalidSubset("subset must be non-empty")
    if len(set(idx)) != len(idx):
        raise InvalidSubset(f"repeated packet index in {idx}")
    for i in idx:
        if not 1 <= i <= ps.K:
            raise InvalidSubset(f"packet index {i} out of range 1..{ps.K}")
    return sorted(idx)


def reconstruct(ps: PacketSet, subset_indices: Sequence[int]) -> np.ndarray:
    """Average the back-shifted decodings of the selected packets.

    Indices are 1-based. The subset is processed in ascending index order,
    so the result is independent of the order the caller lists it in.
    """
    idx = _check_subset(ps, subset_indices)
    decoded = [
        apply_inverse_shift(decompress(ps.packets[i - 1]), ps.shifts[i - 1], ps.original_dims)
        for i in idx
    ]
    return mean_images(decoded)


def back_shifted_packets(ps: PacketSet) -> list[np.ndarray]:
    """Decode every packet and inverse-shift it onto the original support."""
    return [
        apply_inverse_shift(decompress(pkt), s, ps.original_dims)
        for pkt, s in zip(ps.packets, ps.shifts)
    ]


def save_packet_set(ps: PacketSet) -> bytes:
    h, w = ps.original_dims
    if not (1 <= h <= 0xFFFF and 1 <= w <= 0xFFFF):
        raise ContainerError(f"dims {h}x{w} not storable")
    if ps.K > 0xFF:
        raise ContainerError(f"K={ps.K} exceeds container limit 255")
    if not 0 <= ps.mode_tag <= 0xFF:
        raise ContainerError(f"mode_tag {ps.mode_tag} not storable")
    out = bytearray()
    out += _HEAD.pack(_CONTAINER_MAGIC, _CONTAINER_VERSION, h, w, ps.K, ps.mode_tag)
    for s in ps.shifts:
        if not (-0x8000 <= s.dy <= 0x7FFF and -0x8000 <= s.dx <= 0x7FFF):
            raise ContainerError(f"shift ({s.dy}, {s.dx}) not storable")
        out += _SHIFT_REC.pack(s.dy, s.dx, s.mode.value)
    out += _CODEC_REC.pack(ps.codec.codec_id, ps.codec.block_size, ps.codec.theta)
    for pkt in ps.packets:
        out += struct.pack(">I", len(pkt.data))
        out += pkt.data
    return bytes(out)


def load_packet_set(data: bytes) -> PacketSet:
    def take(fmt: struct.Struct, pos: int):
        if pos + fmt.size > len(data):
            raise ContainerError(f"truncated container at byte {pos}")
        return fmt.unpack_from(data, pos), pos + fmt.size

    (magic, version, h, w, k, mode_tag), pos = take(_HEAD, 0)
    if magic != _CONTAINER_MAGIC:
        raise ContainerError(f"bad container magic {magic!r}")
    if version != _CONTAINER_VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if h < 1 or w < 1 or k < 1:
        raise ContainerError(f"invalid container header (dims {h}x{w}, K={k})")
    shifts = []
    for _ in range(k):
        (dy, dx, mode_val), pos = take(_SHIFT_REC, pos)
        try:
            shifts.append(ShiftSpec(dy, dx, ShiftMode(mode_val)))
        except (ValueError, HoloError) as exc:
            raise ContainerError(f"invalid shift record: {exc}") from None
    (codec_id, block_size, theta), pos = take(_CODEC_REC, pos)
    try:
        codec = CodecParams(theta=theta, codec_id=codec_id, block_size=block_size)
    except HoloError as exc:
        raise ContainerError(f"invalid codec params: {exc}") from None
    packets = []
    for _ in range(k):
        (length,), pos = take(struct.Struct(">I"), pos)
        if pos + length > len(data):
            raise ContainerError(f"truncated packet block at byte {pos}")
        packets.append(Packet(data[pos : pos + length]))
        pos += length
    if pos != len(data):
        raise ContainerError(f"{len(data) - pos} trailing bytes after last packet")
    return PacketSet((h, w), shifts, codec, packets, mode_tag)

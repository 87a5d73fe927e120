"""Grayscale image representation and PGM file I/O.

Images are 2-D float64 numpy arrays, row-major, with samples nominally in
[0, 255]. Every pipeline stage works on real-valued arrays; quantization to
8 bits happens only when a file is written.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput, ParseError, UnsupportedFormat

__all__ = ["read_pgm", "write_pgm", "load_pgm", "save_pgm", "require_image"]


def require_image(img: np.ndarray) -> np.ndarray:
    """Validate that ``img`` is a non-empty 2-D array; return it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInput(f"expected a non-empty 2-D image, got shape {arr.shape}")
    return arr


def _tokenize_header(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Return the first `count` whitespace-separated header tokens and the
    offset one byte past the last token's trailing whitespace character.

    Comments (``#`` to end of line) are skipped, per the Netpbm convention.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if start == i:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:i])
        if len(tokens) == count:
            # The header ends with exactly one whitespace byte.
            if i >= n:
                raise ParseError("truncated PGM header")
            i += 1
    return tokens, i


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5) or ASCII (P2) PGM byte string into an image.

    Raises ParseError for malformed or truncated files and UnsupportedFormat
    when maxval exceeds 255.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise ParseError("expected a byte sequence")
    data = bytes(data)
    if len(data) < 3 or data[:1] != b"P" or data[1:2] not in (b"2", b"5"):
        raise ParseError("not a PGM file (expected magic P2 or P5)")
    if not (data[2:3].isspace() or data[2:3] == b"#"):
        raise ParseError("PGM magic must be followed by whitespace")
    magic = data[:2]
    tokens, offset = _tokenize_header(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"non-numeric PGM header field: {exc}") from None
    if width < 1 or height < 1:
        raise ParseError(f"invalid PGM dimensions {width}x{height}")
    if maxval <= 0:
        raise ParseError(f"invalid PGM maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormat(f"PGM maxval {maxval} exceeds 255")

    n = width * height
    if magic == b"P5":
        payload = data[offset : offset + n]
        if len(payload) < n:
            raise ParseError(f"truncated PGM payload: {len(payload)} of {n} bytes")
        samples = np.frombuffer(payload, dtype=np.uint8, count=n)
    else:
        fields = data[offset:].split()
        if len(fields) < n:
            raise ParseError(f"truncated PGM payload: {len(fields)} of {n} samples")
        try:
            samples = np.array([int(f.decode("ascii")) for f in fields[:n]], dtype=np.int64)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ParseError(f"non-numeric PGM sample: {exc}") from None
        if samples.min() < 0 or samples.max() > maxval:
            raise ParseError("PGM sample out of range")
    return samples.astype(np.float64).reshape(height, width)


def quantize_to_byte(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round to nearest integer, ties away from zero."""
    arr = require_image(img)
    clamped = np.clip(arr, 0.0, 255.0)
    return np.floor(clamped + 0.5).astype(np.uint8)


def write_pgm(img: np.ndarray) -> bytes:
    """Serialize an image as binary PGM (P5, maxval 255).

    Samples are clamped to [0, 255] and rounded to the nearest integer.
    """
    arr = quantize_to_byte(img)
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(img))

#!/usr/bin/env python3
"""JPEG2000 command-line adapter backed by Pillow/OpenJPEG.

Exposes a ratio-parameterized JPEG2000 encoder/decoder pair in the command
shape the external-codec hooks expect:

    export HOLO_EXT_ENCODE="python3 demos/jp2_adapter.py encode {in} {out} {ratio}"
    export HOLO_EXT_DECODE="python3 demos/jp2_adapter.py decode {in} {out}"

Encode reads a PGM, writes an irreversible .j2k codestream at the given
compression ratio; decode reads the codestream back into a PGM.
"""

import sys

from PIL import Image


def encode(src: str, dst: str, ratio: float) -> None:
    img = Image.open(src).convert("L")
    img.save(dst, format="JPEG2000", quality_mode="rates", quality_layers=[ratio],
             irreversible=True, codeblock_size=(64, 64))


def decode(src: str, dst: str) -> None:
    Image.open(src).convert("L").save(dst, format="PPM")


def main(argv: list[str]) -> int:
    if len(argv) >= 4 and argv[0] == "encode":
        encode(argv[1], argv[2], float(argv[3]))
        return 0
    if len(argv) >= 3 and argv[0] == "decode":
        decode(argv[1], argv[2])
        return 0
    print(__doc__, file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

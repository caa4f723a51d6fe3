"""Binary checkpoint format.

Layout: magic "COALA\\x01", u32 record count, then per record
[u32 name length, UTF-8 name, u32 rank, u32 extents..., f32 LE payload],
then u32 trailer length and a JSON-encoded config trailer.
All integers little-endian.
"""

import json
import struct

import numpy as np

MAGIC = b"COALA\x01"


class CheckpointError(ValueError):
    pass


def save(path, arrays, config):
    """arrays: dict name -> float array (params and BN running stats)."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            # asarray keeps rank-0 inputs rank 0 (ascontiguousarray would not)
            arr = np.asarray(arr, dtype="<f4", order="C")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())
        trailer = json.dumps(config).encode("utf-8")
        f.write(struct.pack("<I", len(trailer)))
        f.write(trailer)


def load(path):
    """Returns (dict name -> float32 array, config dict)."""
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
        (count,) = struct.unpack("<I", f.read(4))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{rank}I", f.read(4 * rank)) if rank else ()
            n = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape).copy()
        (tlen,) = struct.unpack("<I", f.read(4))
        config = json.loads(f.read(tlen).decode("utf-8"))
    return arrays, config

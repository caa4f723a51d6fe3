"""File formats: manifest TSV, binary patch store, features CSV."""

import csv
import struct

import numpy as np

from .audio import N_MELS, PATCH_FRAMES, SpectrogramPatch

PATCH_MAGIC = b"COALAPAT"


def read_manifest(path):
    """TSV lines `clip_path<TAB>tag1,tag2,...` -> list of (path, [tags])."""
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            clip_path, _, tag_field = line.partition("\t")
            tags = [t for t in tag_field.split(",") if t]
            entries.append((clip_path, tags))
    return entries


def write_manifest(path, entries):
    with open(path, "w", encoding="utf-8") as f:
        for clip_path, tags in entries:
            f.write(f"{clip_path}\t{','.join(tags)}\n")


def save_patches(path, patches):
    with open(path, "wb") as f:
        f.write(PATCH_MAGIC)
        f.write(struct.pack("<I", len(patches)))
        for p in patches:
            cid = p.source_clip_id.encode("utf-8")
            f.write(struct.pack("<I", len(cid)))
            f.write(cid)
            f.write(struct.pack("<I", p.frame_offset))
            f.write(np.ascontiguousarray(p.values, dtype="<f4").tobytes())


def load_patches(path):
    n_vals = PATCH_FRAMES * N_MELS
    with open(path, "rb") as f:
        if f.read(len(PATCH_MAGIC)) != PATCH_MAGIC:
            raise ValueError(f"{path}: bad magic, not a patch store")
        (count,) = struct.unpack("<I", f.read(4))
        patches = []
        for _ in range(count):
            (idlen,) = struct.unpack("<I", f.read(4))
            cid = f.read(idlen).decode("utf-8")
            (offset,) = struct.unpack("<I", f.read(4))
            vals = np.frombuffer(f.read(4 * n_vals), dtype="<f4")
            patches.append(SpectrogramPatch(vals.reshape(PATCH_FRAMES, N_MELS).copy(),
                                            cid, offset))
    return patches


def write_features(path, rows):
    """rows: iterable of (clip_id, label, split, vector)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        first = True
        for clip_id, label, split, vec in rows:
            if first:
                writer.writerow(["clip_id", "label", "split"]
                                + [f"v{i}" for i in range(len(vec))])
                first = False
            writer.writerow([clip_id, label, split] + [f"{v:.8g}" for v in vec])


def read_features(path):
    """Returns (clip_ids, labels, splits, matrix)."""
    ids, labels, splits, vecs = [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:3] != ["clip_id", "label", "split"]:
            raise ValueError(f"{path}: unexpected features header {header[:3]}")
        for row in reader:
            ids.append(row[0])
            labels.append(row[1])
            splits.append(row[2])
            vecs.append(np.array(row[3:], dtype=np.float32))
    return ids, labels, splits, np.array(vecs)

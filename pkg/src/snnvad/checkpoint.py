"""Binary checkpoint container.

Layout (little-endian)::

    b"SVCK1"  u32 format_version  u32 n_sections
    n_sections x { 4-byte tag, u64 payload length, payload }

Sections, always written in this order:

    HEAD  UTF-8 JSON architecture descriptor (sorted keys, compact)
    WGHT  u32 count, then per matrix: u32 rows, u32 cols, float64 data
    MASK  u32 count, then per layer: u8 present [, u32 rows, u32 cols, packed bits]
    INIT  same layout as WGHT (count 0 when absent)
    NORM  u8 present [, float64 min, float64 max]
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import Normalizer
from .errors import DataError, ValidationError
from .network import LifLayerParams, NetworkModel, validate_architecture

MAGIC = b"SVCK1"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: NetworkModel
    init_weights: list | None = None
    normalizer: Normalizer | None = None
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.init_weights is not None:
            shapes = [w.shape for w in self.model.weights()]
            if [np.shape(w) for w in self.init_weights] != shapes:
                raise ValidationError("initialization weights do not match the model's shapes")

    def descriptor(self):
        m = self.model
        return {
            "format_version": FORMAT_VERSION,
            "name": m.name,
            "sizes": m.sizes,
            "tau_mem": [l.tau_mem for l in m.layers],
            "tau_syn": [l.tau_syn for l in m.layers],
            "T_total": m.T_total,
            "readout_window": m.readout_window,
            "surrogate_lambda": m.surrogate_lambda,
            "seed": self.seed,
            "meta": self.meta,
        }


def _section(tag, payload):
    return tag + struct.pack("<Q", len(payload)) + payload


def _pack_matrices(mats):
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(mats)))
    for m in mats:
        m = np.asarray(m, dtype="<f8")
        buf.write(struct.pack("<II", *m.shape))
        buf.write(np.ascontiguousarray(m).tobytes())
    return buf.getvalue()


def _unpack_matrices(blob):
    (count,), off = struct.unpack_from("<I", blob, 0), 4
    mats = []
    for _ in range(count):
        rows, cols = struct.unpack_from("<II", blob, off)
        off += 8
        n = rows * cols * 8
        mats.append(np.frombuffer(blob[off:off + n], dtype="<f8").reshape(rows, cols).astype(np.float64))
        off += n
    return mats


def dumps(ckpt):
    desc = json.dumps(ckpt.descriptor(), sort_keys=True, separators=(",", ":")).encode()
    masks = io.BytesIO()
    masks.write(struct.pack("<I", len(ckpt.model.layers)))
    for layer in ckpt.model.layers:
        if layer.mask is None:
            masks.write(b"\x00")
        else:
            masks.write(b"\x01" + struct.pack("<II", *layer.mask.shape))
            masks.write(np.packbits(layer.mask.ravel()).tobytes())
    norm = b"\x00" if ckpt.normalizer is None else (
        b"\x01" + struct.pack("<dd", ckpt.normalizer.min_value, ckpt.normalizer.max_value))
    sections = [
        _section(b"HEAD", desc),
        _section(b"WGHT", _pack_matrices(ckpt.model.weights())),
        _section(b"MASK", masks.getvalue()),
        _section(b"INIT", _pack_matrices(ckpt.init_weights or [])),
        _section(b"NORM", norm),
    ]
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(sections)) + b"".join(sections)


def loads(blob):
    if blob[:5] != MAGIC:
        raise DataError("not a checkpoint file (bad magic)")
    version, n_sections = struct.unpack_from("<II", blob, 5)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    off, sections = 13, {}
    for _ in range(n_sections):
        tag = blob[off:off + 4]
        (length,) = struct.unpack_from("<Q", blob, off + 4)
        sections[tag] = blob[off + 12:off + 12 + length]
        off += 12 + length
        if off > len(blob):
            raise DataError("truncated checkpoint")
    missing = {b"HEAD", b"WGHT", b"MASK", b"INIT", b"NORM"} - set(sections)
    if missing:
        raise DataError(f"checkpoint lacks sections {sorted(t.decode() for t in missing)}")

    desc = json.loads(sections[b"HEAD"].decode())
    weights = _unpack_matrices(sections[b"WGHT"])
    mblob = sections[b"MASK"]
    (count,), moff = struct.unpack_from("<I", mblob, 0), 4
    masks = []
    for _ in range(count):
        present = mblob[moff]
        moff += 1
        if not present:
            masks.append(None)
            continue
        rows, cols = struct.unpack_from("<II", mblob, moff)
        moff += 8
        nbytes = (rows * cols + 7) // 8
        bits = np.unpackbits(np.frombuffer(mblob[moff:moff + nbytes], dtype=np.uint8), count=rows * cols)
        masks.append(bits.reshape(rows, cols))
        moff += nbytes
    init = _unpack_matrices(sections[b"INIT"]) or None
    nblob = sections[b"NORM"]
    normalizer = Normalizer(*struct.unpack_from("<dd", nblob, 1)) if nblob[:1] == b"\x01" else None

    n_layers = len(desc["sizes"]) - 1
    if len(weights) != n_layers or len(masks) != n_layers:
        raise DataError("checkpoint descriptor disagrees with stored matrices")
    for i, w in enumerate(weights):
        if w.shape != (desc["sizes"][i], desc["sizes"][i + 1]):
            raise DataError(f"layer {i} weights have shape {w.shape}, descriptor says "
                            f"{(desc['sizes'][i], desc['sizes'][i + 1])}")
    layers = [
        LifLayerParams(w, tm, ts, is_readout=(i == n_layers - 1), mask=mk)
        for i, (w, tm, ts, mk) in enumerate(zip(weights, desc["tau_mem"], desc["tau_syn"], masks))
    ]
    model = NetworkModel(layers, desc["T_total"], desc["readout_window"], desc["surrogate_lambda"],
                         name=desc["name"])
    validate_architecture(model)
    return Checkpoint(model, init, normalizer, desc["seed"], desc.get("meta", {}))


def save(ckpt, path):
    Path(path).write_bytes(dumps(ckpt))


def load(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(blob)

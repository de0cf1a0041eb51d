"""Versioned binary serialization of network parameters.

File layout (all integers little-endian uint32 unless noted):

    magic            8 bytes, b"SWNAVNET"
    version          1
    kind             0 = policy, 1 = value
    encoder          0 = lstm, 1 = occupancy
    dtype            byte width of array scalars: 8 (float64) or 4 (float32)
    hidden_size
    input_size
    n_layers         number of MLP layer sizes that follow
    layer_sizes      n_layers uint32
    out_dim          action dimension (policy) or 1 (value)
    has_log_std      0 or 1
    occ_radial_bins
    occ_angular_bins
    d_norm           float64
    d_clip           float64
    occ_r_max        float64
    arrays           raw little-endian IEEE-754, back to back, in the order
                     W_i, U_i, b_i, W_f, U_f, b_f, W_o, U_o, b_o, W_c, U_c,
                     b_c (lstm encoder only), then W/b per MLP layer, then
                     log_std when present.

A JSON manifest is written next to the file (same path + ".json") carrying
the dimensions, normalization constants, encoder kind and any training
metadata; it is advisory, the binary header is authoritative.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .networks import (
    ENCODER_LSTM,
    ENCODER_OCCUPANCY,
    Architecture,
    LstmParams,
    MlpParams,
    PolicyParams,
    ValueParams,
    param_arrays,
)

MAGIC = b"SWNAVNET"
FORMAT_VERSION = 1

_KINDS = {"policy": 0, "value": 1}
_ENCODERS = {ENCODER_LSTM: 0, ENCODER_OCCUPANCY: 1}


class CheckpointError(RuntimeError):
    """A network file is missing, malformed, or does not match expectations."""


def _dtype_for(width: int):
    if width == 8:
        return np.dtype("<f8")
    if width == 4:
        return np.dtype("<f4")
    raise CheckpointError(f"unsupported scalar width {width}")


def save_network(path, params, *, dtype: str = "float64", metadata: dict | None = None) -> Path:
    """Write a policy or value network plus its JSON manifest."""
    path = Path(path)
    kind = "policy" if isinstance(params, PolicyParams) else "value"
    arch = params.arch
    width = 8 if dtype == "float64" else 4
    np_dtype = _dtype_for(width)

    out_dim = arch.action_dim if kind == "policy" else 1
    parts = [
        struct.pack("<8sI", MAGIC, FORMAT_VERSION),
        struct.pack("<4I", _KINDS[kind], _ENCODERS[arch.encoder], width, arch.hidden_size),
        struct.pack("<2I", arch.input_size, len(arch.layer_sizes)),
        struct.pack(f"<{len(arch.layer_sizes)}I", *arch.layer_sizes),
        struct.pack("<2I", out_dim, 1 if kind == "policy" else 0),
        struct.pack("<2I", arch.occ_radial_bins, arch.occ_angular_bins),
        struct.pack("<3d", arch.d_norm, arch.d_clip, arch.occ_r_max),
    ]
    for arr in param_arrays(params):
        parts.append(np.ascontiguousarray(arr, dtype=np_dtype).tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(parts))

    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "encoder": arch.encoder,
        "dtype": dtype,
        "hidden_size": arch.hidden_size,
        "input_size": arch.input_size,
        "layer_sizes": list(arch.layer_sizes),
        "action_dim": arch.action_dim,
        "d_norm": arch.d_norm,
        "d_clip": arch.d_clip,
        "occ_radial_bins": arch.occ_radial_bins,
        "occ_angular_bins": arch.occ_angular_bins,
        "occ_r_max": arch.occ_r_max,
        "metadata": metadata or {},
    }
    Path(str(path) + ".json").write_text(json.dumps(manifest, indent=2))
    return path


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated header")
        values = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return values

    def array(self, shape, dtype):
        count = int(np.prod(shape, dtype=int)) if shape else 1
        size = count * dtype.itemsize
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated array data")
        arr = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return arr.reshape(shape).astype(float)


def load_network(path):
    """Read a network file back into a PolicyParams or ValueParams."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)

    magic, version = reader.take("<8sI")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    kind_code, enc_code, width, hidden = reader.take("<4I")
    input_size, n_layers = reader.take("<2I")
    layer_sizes = reader.take(f"<{n_layers}I")
    out_dim, has_log_std = reader.take("<2I")
    occ_radial, occ_angular = reader.take("<2I")
    d_norm, d_clip, occ_r_max = reader.take("<3d")

    kind = {v: k for k, v in _KINDS.items()}.get(kind_code)
    encoder = {v: k for k, v in _ENCODERS.items()}.get(enc_code)
    if kind is None or encoder is None:
        raise CheckpointError(f"{path}: unknown kind/encoder codes {kind_code}/{enc_code}")
    np_dtype = _dtype_for(width)

    arch = Architecture(
        hidden_size=hidden,
        input_size=input_size,
        layer_sizes=tuple(int(s) for s in layer_sizes),
        action_dim=out_dim if kind == "policy" else 2,
        d_norm=d_norm,
        d_clip=d_clip,
        encoder=encoder,
        occ_radial_bins=occ_radial,
        occ_angular_bins=occ_angular,
        occ_r_max=occ_r_max,
    )

    lstm = None
    if encoder == ENCODER_LSTM:
        n, m = hidden, input_size
        shapes = [(n, m), (n, n), (n,)] * 4
        arrays = [reader.array(s, np_dtype) for s in shapes]
        lstm = LstmParams(*arrays)
        first_in = hidden + 1
    else:
        first_in = occ_radial * occ_angular + 1

    sizes = (first_in, *arch.layer_sizes, out_dim)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(reader.array((fan_out, fan_in), np_dtype))
        biases.append(reader.array((fan_out,), np_dtype))
    mlp = MlpParams(weights, biases)

    if kind == "policy":
        if not has_log_std:
            raise CheckpointError(f"{path}: policy file without log_std block")
        log_std = reader.array((out_dim,), np_dtype)
        params = PolicyParams(arch, lstm, mlp, log_std)
    else:
        params = ValueParams(arch, lstm, mlp)
    if reader.offset != len(reader.blob):
        raise CheckpointError(f"{path}: {len(reader.blob) - reader.offset} trailing bytes")
    return params


def load_manifest(path) -> dict:
    manifest_path = Path(str(path) + ".json")
    if not manifest_path.exists():
        return {}
    return json.loads(manifest_path.read_text())


def export_network(checkpoint_path, out_path, metadata: dict | None = None) -> Path:
    """Re-save a trained network in single precision for onboard inference.

    Same array layout, no optimizer state; the manifest records the source.
    """
    params = load_network(checkpoint_path)
    meta = dict(load_manifest(checkpoint_path).get("metadata", {}))
    meta.update(metadata or {})
    meta["exported_from"] = str(checkpoint_path)
    return save_network(out_path, params, dtype="float32", metadata=meta)

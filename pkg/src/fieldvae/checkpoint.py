"""Model checkpoints: a single zip archive holding a JSON manifest and a
raw little-endian float64 tensor payload.

The manifest records the format version, the full model config, the
normalization statistics, and a tensor directory (name/shape/offset in
manifest order). Round trips are bit-exact, and the archive entries carry
a fixed timestamp so identical runs produce identical files.
"""

from __future__ import annotations

import json
import zipfile

import numpy as np

from .data import Normalizer
from .errors import (CheckpointCorruptError, CheckpointShapeError,
                     CheckpointVersionError)
from .model import Model, ModelConfig

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "tensors.bin"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def save_model(model: Model, path) -> None:
    tensors = model.named_tensors()
    directory = []
    chunks = []
    offset = 0
    for name, arr in tensors:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        directory.append({"name": name, "shape": list(arr.shape),
                          "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "trained": model.trained,
        "normalization": (model.normalizer.to_dict()
                          if model.normalizer is not None else None),
        "tensors": directory,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, payload in ((MANIFEST_NAME,
                               json.dumps(manifest, sort_keys=True, indent=1)
                               .encode()),
                              (PAYLOAD_NAME, b"".join(chunks))):
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            zf.writestr(info, payload)


def read_manifest(path) -> dict:
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read(MANIFEST_NAME))
    except (OSError, zipfile.BadZipFile, KeyError,
            json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"cannot read checkpoint {path}: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version!r} not supported "
            f"(expected {FORMAT_VERSION})")
    return manifest


def load_model(path) -> Model:
    manifest = read_manifest(path)
    try:
        with zipfile.ZipFile(path) as zf:
            payload = zf.read(PAYLOAD_NAME)
    except (OSError, zipfile.BadZipFile, KeyError) as e:
        raise CheckpointCorruptError(f"cannot read checkpoint payload: {e}") from e

    config = ModelConfig.from_dict(manifest["config"])
    model = Model(config)
    expected = {name: arr for name, arr in model.named_tensors()}
    stored = {entry["name"] for entry in manifest["tensors"]}
    if set(expected) != stored:
        missing = sorted(set(expected) - stored)
        extra = sorted(stored - set(expected))
        raise CheckpointShapeError(
            f"tensor directory mismatch: missing {missing}, unexpected {extra}")
    for entry in manifest["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        if expected[name].shape != shape:
            raise CheckpointShapeError(
                f"tensor {name!r}: stored shape {shape} does not match "
                f"model shape {expected[name].shape}")
        start, nbytes = entry["offset"], entry["nbytes"]
        if nbytes != int(np.prod(shape, dtype=np.int64)) * 8 \
                or start + nbytes > len(payload):
            raise CheckpointCorruptError(
                f"tensor {name!r}: payload slice [{start}, {start + nbytes}) "
                f"inconsistent with shape {shape} or payload size {len(payload)}")
        arr = np.frombuffer(payload[start:start + nbytes],
                            dtype="<f8").reshape(shape)
        expected[name][...] = arr
    model.trained = bool(manifest.get("trained", False))
    norm = manifest.get("normalization")
    model.normalizer = Normalizer.from_dict(norm) if norm is not None else None
    return model

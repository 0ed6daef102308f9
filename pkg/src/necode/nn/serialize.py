"""Versioned binary container for trained models.

Layout: magic NECM, version u32, u32-length-prefixed JSON header (spec,
seed, dataset fingerprint, parameter count), parameters as little-endian
float64, and a blake2b-64 checksum trailer over everything before it.
"""

import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np

from necode._io import atomic_write_bytes
from necode.nn.models import ModelSpec, TrainedModel

MAGIC = b"NECM"
VERSION = 1


def _checksum(payload):
    return hashlib.blake2b(payload, digest_size=8).digest()


def model_bytes(model):
    """Serialized container for a TrainedModel."""
    header = {
        "spec": {**asdict(model.spec),
                 "input_layout": list(model.spec.input_layout)},
        "seed": model.seed,
        "dataset_fingerprint": model.dataset_fingerprint,
        "name": model.name,
        "param_count": int(model.params.shape[0]),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = (MAGIC + struct.pack("<I", VERSION)
            + struct.pack("<I", len(head)) + head
            + model.params.astype("<f8").tobytes())
    return body + _checksum(body)


def save_model(path, model):
    """Atomically write a model container; returns its checksum hex."""
    payload = model_bytes(model)
    atomic_write_bytes(path, payload)
    return payload[-8:].hex()


def load_model(path):
    """Read and verify a model container."""
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) < 16 or payload[:4] != MAGIC:
        raise ValueError(f"{path}: not a model container")
    body, trailer = payload[:-8], payload[-8:]
    if _checksum(body) != trailer:
        raise ValueError(f"{path}: checksum mismatch")
    version = struct.unpack("<I", payload[4:8])[0]
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    hlen = struct.unpack("<I", payload[8:12])[0]
    header = json.loads(payload[12:12 + hlen].decode("utf-8"))
    spec_fields = dict(header["spec"])
    spec_fields["input_layout"] = tuple(spec_fields["input_layout"])
    spec = ModelSpec(**spec_fields)
    raw = payload[12 + hlen:-8]
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.shape[0] != header["param_count"]:
        raise ValueError(f"{path}: parameter count mismatch")
    return TrainedModel(spec=spec, params=params, seed=header["seed"],
                        dataset_fingerprint=header["dataset_fingerprint"],
                        name=header.get("name", "model"))

"""Named-parameter checkpoints and their binary file format.

Layout: 8-byte magic, little-endian uint64 header length, JSON header,
then flat float32 little-endian tensor payloads in header order. The
header carries the format version, encoder config, task list, seeds, and
a name -> (shape, byte offset) table whose entries exactly tile the
payload. Tensors are stored at 32-bit precision and widened to float64
on load.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .encoder import EncoderConfig
from .errors import CheckpointError

FORMAT_VERSION = 1
_MAGIC = b"MTLTCKPT"


@dataclass
class ModelCheckpoint:
    """Shared encoder parameters plus any task-head / pretraining tensors."""

    encoder_config: EncoderConfig
    tensors: dict[str, np.ndarray]
    tasks: list[dict] = field(default_factory=list)  # [{"name":…, "kind":…}]
    seeds: dict = field(default_factory=dict)

    def shared_tensors(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith("shared/")}

    def head_tensors(self, task_name: str) -> dict[str, np.ndarray]:
        prefix = f"task/{task_name}/"
        return {k: v for k, v in self.tensors.items() if k.startswith(prefix)}


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    names = sorted(ckpt.tensors)
    table = []
    offset = 0
    payloads = []
    for name in names:
        # asarray with order="C" preserves 0-d shapes; ascontiguousarray would
        # promote scalars to shape (1,)
        arr = np.asarray(ckpt.tensors[name], dtype="<f4", order="C")
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "encoder_config": asdict(ckpt.encoder_config),
        "tasks": ckpt.tasks,
        "seeds": ckpt.seeds,
        "payload_bytes": offset,
        "tensors": table,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for chunk in payloads:
            f.write(chunk)


def load_checkpoint(path) -> ModelCheckpoint:
    """Read and validate a checkpoint; errors name the specific defect."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        raise CheckpointError(f"{path}: no such checkpoint file") from None
    if raw[:8] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    if len(raw) < 16:
        raise CheckpointError(f"{path}: truncated before header length")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated inside the header")
    try:
        header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header ({e})") from None

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} not supported "
            f"(this build reads version {FORMAT_VERSION})")

    payload = raw[16 + header_len:]
    declared = header.get("payload_bytes", -1)
    if len(payload) != declared:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes but the manifest "
            f"declares {declared} (truncated or trailing garbage)")

    tensors = {}
    expected_offset = 0
    for entry in header["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if offset != expected_offset:
            raise CheckpointError(
                f"{path}: tensor {name!r} at offset {offset}, expected "
                f"{expected_offset}; manifest does not tile the payload")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: tensor {name!r} overruns the payload")
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=offset)
        tensors[name] = arr.reshape(shape).astype(np.float64)
        expected_offset = offset + nbytes
    if expected_offset != len(payload):
        raise CheckpointError(
            f"{path}: {len(payload) - expected_offset} unclaimed payload bytes")

    config = EncoderConfig(**header["encoder_config"])
    return ModelCheckpoint(encoder_config=config, tensors=tensors,
                           tasks=header.get("tasks", []),
                           seeds=header.get("seeds", {}))

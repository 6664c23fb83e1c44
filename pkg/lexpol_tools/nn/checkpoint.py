"""Checkpoint fragments: a text manifest plus one float32 blob.

``manifest.txt``::

    lexpol-checkpoint 1
    net <name> dims=3x400x400x4 act=relu,relu,identity offset=0 count=163604
    array <name> shape=1 offset=654416 count=1
    meta <key> <value...>

``params.bin`` holds the fragments back to back as little-endian float32,
weights row-major followed by the bias, layer by layer.  Offsets are bytes.
"""

import dataclasses
import hashlib
import logging
import os
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import numpy as np

from ..utils.errors import CheckpointError
from .dense import DenseNet

logger = logging.getLogger(__name__)

MAGIC = "lexpol-checkpoint 1"
MANIFEST = "manifest.txt"
BLOB = "params.bin"
DTYPE = np.dtype("<f4")


@dataclasses.dataclass
class Checkpoint:
    nets: Dict[str, DenseNet] = dataclasses.field(default_factory=dict)
    arrays: Dict[str, np.ndarray] = dataclasses.field(default_factory=dict)
    meta: Dict[str, str] = dataclasses.field(default_factory=dict)

    def net(self, name: str) -> DenseNet:
        try:
            return self.nets[name]
        except KeyError:
            raise CheckpointError(f"checkpoint has no network fragment '{name}'") from None

    def names(self, prefix: str) -> List[str]:
        return sorted(n for n in self.nets if n.startswith(prefix))


def _net_arrays(net: DenseNet) -> Iterable[np.ndarray]:
    for w, b in zip(net.weights, net.biases):
        yield w
        yield b


def write_checkpoint(
    directory: Union[str, os.PathLike],
    nets: Mapping[str, DenseNet],
    arrays: Optional[Mapping[str, np.ndarray]] = None,
    meta: Optional[Mapping[str, object]] = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines, chunks, offset = [MAGIC], [], 0
    for name, net in nets.items():
        if any(c.isspace() for c in name):
            raise CheckpointError(f"fragment name may not contain whitespace: {name!r}")
        data = b"".join(np.ascontiguousarray(a, dtype=DTYPE).tobytes() for a in _net_arrays(net))
        dims = "x".join(map(str, net.dims))
        lines.append(
            f"net {name} dims={dims} act={','.join(net.activations)} offset={offset} count={len(data) // DTYPE.itemsize}"
        )
        chunks.append(data)
        offset += len(data)
    for name, arr in (arrays or {}).items():
        arr = np.asarray(arr)
        data = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
        shape = "x".join(map(str, arr.shape)) or "scalar"
        lines.append(f"array {name} shape={shape} offset={offset} count={arr.size}")
        chunks.append(data)
        offset += len(data)
    for key, value in (meta or {}).items():
        lines.append(f"meta {key} {value}")
    try:
        (directory / BLOB).write_bytes(b"".join(chunks))
        (directory / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise CheckpointError(f"could not write checkpoint to {directory}: {e.strerror}") from e
    logger.debug("wrote checkpoint %s (%d bytes)", directory, offset)
    return directory


class _Fields(dict):
    """Manifest entry fields; a missing one is a CheckpointError."""

    def __init__(self, tokens: List[str], where: str) -> None:
        try:
            super().__init__(t.split("=", 1) for t in tokens)
        except ValueError:
            raise CheckpointError(f"{where}: malformed manifest entry") from None
        self.where = where

    def __missing__(self, key: str) -> str:
        raise CheckpointError(f"{self.where}: manifest entry lacks '{key}'")

    def int(self, key: str) -> int:
        try:
            return int(self[key])
        except ValueError:
            raise CheckpointError(f"{self.where}: '{key}' is not an integer: {self[key]!r}") from None


def read_checkpoint(directory: Union[str, os.PathLike]) -> Checkpoint:
    directory = Path(directory)
    try:
        manifest = (directory / MANIFEST).read_text(encoding="utf-8").splitlines()
        blob = (directory / BLOB).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint file missing: {e.filename}") from e
    if not manifest or manifest[0].strip() != MAGIC:
        raise CheckpointError(f"{directory / MANIFEST}: not a lexpol checkpoint manifest")
    ckpt = Checkpoint()
    for lineno, line in enumerate(manifest[1:], start=2):
        where = f"{directory / MANIFEST}:{lineno}"
        parts = line.split()
        if not parts:
            continue
        kind = parts[0]
        if kind == "meta":
            if len(parts) < 2:
                raise CheckpointError(f"{where}: meta entry without a key")
            ckpt.meta[parts[1]] = line.split(None, 2)[2] if len(parts) > 2 else ""
            continue
        if kind not in ("net", "array") or len(parts) < 3:
            raise CheckpointError(f"{where}: unknown manifest entry {kind!r}")
        name, fields = parts[1], _Fields(parts[2:], where)
        offset, count = fields.int("offset"), fields.int("count")
        end = offset + count * DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"{where}: fragment '{name}' runs past the end of {BLOB}")
        values = np.frombuffer(blob[offset:end], dtype=DTYPE).astype(np.float64)
        if kind == "array":
            shape = () if fields["shape"] == "scalar" else tuple(int(d) for d in fields["shape"].split("x"))
            ckpt.arrays[name] = values.reshape(shape)
            continue
        dims = [int(d) for d in fields["dims"].split("x")]
        acts = fields["act"].split(",")
        if len(acts) != len(dims) - 1:
            raise CheckpointError(f"{where}: {len(acts)} activations for {len(dims) - 1} layers")
        weights, biases, pos = [], [], 0
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(values[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in))
            pos += fan_in * fan_out
            biases.append(values[pos : pos + fan_out])
            pos += fan_out
        if pos != count:
            raise CheckpointError(f"{where}: dims {fields['dims']} need {pos} values, manifest says {count}")
        ckpt.nets[name] = DenseNet(weights, biases, acts)
    return ckpt


def param_hash(*items: Union[DenseNet, np.ndarray]) -> str:
    """SHA-256 over the float64 bytes of networks and arrays, in order."""
    digest = hashlib.sha256()
    for item in items:
        arrays = item.parameters() if isinstance(item, DenseNet) else [np.asarray(item)]
        for a in arrays:
            digest.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return digest.hexdigest()

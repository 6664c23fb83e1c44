"""Task metadata to context embeddings.

Two providers produce the raw vector for a task: ``table`` looks up a
precomputed language-model embedding, ``hashed`` builds a bag-of-words vector
from seeded per-token directions.  An optional trainable MLP head maps the raw
vector to the n-dimensional context the gates consume; with ``stopgrad`` the
head is a fixed projection and nothing upstream of the gate is trained.
"""

import csv
import dataclasses
import hashlib
import logging
import os
import re
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from ..nn import DenseNet, mlp
from ..utils.errors import ConfigError, ShapeError, TaskLookupError

logger = logging.getLogger(__name__)

Provider = Literal["table", "hashed"]

_TOKEN = re.compile(r"[a-z0-9]+")


@dataclasses.dataclass(frozen=True)
class TaskMetadata:
    task_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ConfigError(f"task '{self.task_id}' has empty metadata text")


@dataclasses.dataclass
class ContextEmbedding:
    vector: np.ndarray
    provider_tag: Provider
    head_applied: bool = False

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ShapeError("context embedding has non-finite entries")

    @property
    def n(self) -> int:
        return self.vector.shape[-1]


@dataclasses.dataclass
class EmbeddingTable:
    vectors: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        dims = {np.asarray(v).shape for v in self.vectors.values()}
        if len(dims) > 1:
            raise ShapeError(f"embedding table rows differ in shape: {sorted(dims)}")
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in self.vectors.items()}

    @property
    def d_raw(self) -> int:
        return next(iter(self.vectors.values())).shape[0] if self.vectors else 0

    def __contains__(self, task_id: str) -> bool:
        return task_id in self.vectors

    @classmethod
    def read_csv(cls, path: Union[str, os.PathLike]) -> "EmbeddingTable":
        vectors = {}
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "task_id":
                raise ConfigError(f"{path}: embedding table must start with a 'task_id,dim_0,...' header")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ConfigError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
                try:
                    vectors[row[0]] = np.array([float(v) for v in row[1:]])
                except ValueError as e:
                    raise ConfigError(f"{path}:{lineno}: {e}") from None
        return cls(vectors)

    def write_csv(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["task_id", *(f"dim_{i}" for i in range(self.d_raw))])
            for task_id, vec in self.vectors.items():
                # repr round-trips float64 exactly
                writer.writerow([task_id, *(repr(float(v)) for v in vec)])


def tokenize(text: str) -> List[str]:
    return _TOKEN.findall(text.lower())


def _token_direction(token: str, n: int, seed: int) -> np.ndarray:
    key = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    v = np.random.default_rng([int(seed), key]).standard_normal(n)
    return v / np.linalg.norm(v)


def embed_hashed(meta: TaskMetadata, n: int, seed: int = 0) -> ContextEmbedding:
    if n < 1:
        raise ShapeError(f"embedding dimension must be at least 1, got {n}")
    tokens = tokenize(meta.text)
    if not tokens:
        raise ConfigError(f"metadata of task '{meta.task_id}' has no tokens: {meta.text!r}")
    # sorted so the float sum does not depend on word order
    total = np.sum([_token_direction(t, n, seed) for t in sorted(tokens)], axis=0)
    norm = np.linalg.norm(total)
    return ContextEmbedding(total / norm if norm > 0 else total, "hashed")


def embed_table(meta: TaskMetadata, table: EmbeddingTable) -> ContextEmbedding:
    try:
        vec = table.vectors[meta.task_id]
    except KeyError:
        raise TaskLookupError(f"no embedding for task '{meta.task_id}' in the embedding table") from None
    return ContextEmbedding(vec.copy(), "table")


def apply_head(z_raw: np.ndarray, head: DenseNet, stopgrad: bool = True, provider: Provider = "hashed") -> ContextEmbedding:
    """Map a raw embedding through ``head``.

    The stop-gradient itself lives in ``ContextEncoder.backward``, which
    drops the gradient when ``stopgrad`` is set; this function only checks
    shapes and runs the forward pass.
    """
    z_raw = np.asarray(z_raw, dtype=np.float64)
    if z_raw.shape[-1] != head.in_dim:
        raise ShapeError(f"context head expects {head.in_dim} inputs, got {z_raw.shape[-1]}")
    return ContextEmbedding(head.forward(z_raw, cache=not stopgrad), provider, head_applied=True)


class ContextEncoder:
    """Provider + optional head, batched over per-sample task metadata."""

    def __init__(
        self,
        provider: Provider = "hashed",
        n: int = 50,
        seed: int = 0,
        table: Optional[EmbeddingTable] = None,
        head: Optional[DenseNet] = None,
        stopgrad: bool = True,
        raw_dim: Optional[int] = None,
    ) -> None:
        if provider == "table" and table is None:
            raise ConfigError("the table provider needs an embedding table")
        self.provider = provider
        self.seed = seed
        self.table = table
        self.head = head
        self.stopgrad = stopgrad
        self.raw_dim = table.d_raw if provider == "table" else (raw_dim or n)
        self.n = head.out_dim if head is not None else self.raw_dim
        if head is not None and head.in_dim != self.raw_dim:
            raise ShapeError(f"context head expects {head.in_dim} inputs, provider gives {self.raw_dim}")
        self._raw_cache: Dict[TaskMetadata, np.ndarray] = {}

    @classmethod
    def build(
        cls,
        rng: np.random.Generator,
        provider: Provider = "hashed",
        n: int = 50,
        hidden: int = 50,
        raw_dim: int = 50,
        seed: int = 0,
        table: Optional[EmbeddingTable] = None,
        use_head: bool = True,
        stopgrad: bool = True,
    ) -> "ContextEncoder":
        in_dim = table.d_raw if provider == "table" else raw_dim
        head = mlp(in_dim, [hidden], n, rng) if use_head else None
        return cls(provider, n, seed, table, head, stopgrad, raw_dim)

    @property
    def trainable(self) -> bool:
        return self.head is not None and not self.stopgrad

    def raw(self, meta: TaskMetadata) -> np.ndarray:
        if meta not in self._raw_cache:
            if self.provider == "table":
                emb = embed_table(meta, self.table)
            else:
                emb = embed_hashed(meta, self.raw_dim, self.seed)
            self._raw_cache[meta] = emb.vector
        return self._raw_cache[meta]

    def embed(self, meta: TaskMetadata) -> ContextEmbedding:
        z_raw = self.raw(meta)
        if self.head is None:
            return ContextEmbedding(z_raw.copy(), self.provider)
        return apply_head(z_raw, self.head, stopgrad=True, provider=self.provider)

    def encode(self, metas: Sequence[TaskMetadata], cache: bool = True) -> np.ndarray:
        """Context vectors for a batch of samples, shape (B, n)."""
        z_raw = np.stack([self.raw(m) for m in metas])
        if self.head is None:
            return z_raw
        return self.head.forward(z_raw, cache=cache and self.trainable)

    def backward(self, dz: np.ndarray) -> None:
        """Push dL/dz into the head; a no-op under stop-gradient."""
        if self.trainable:
            self.head.backward(dz)

    def networks(self) -> Dict[str, DenseNet]:
        return {"head": self.head} if self.head is not None else {}

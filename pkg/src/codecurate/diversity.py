"""Greedy diversity-based selection over instruction embeddings.

Candidates are enumerated in descending combined-score order and admitted
only while their nearest neighbor in the already-selected set stays below
the similarity threshold. Selection is strictly sequential: every
admission changes the acceptance predicate for later candidates.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from hashlib import blake2b, sha256
from pathlib import Path

import numpy as np
import requests

from .cache import content_key
from .corpus import Sample, instruction_text
from .decontam import tokenize
from .scoring import ProviderError, ScoreRecord


class DiversityError(Exception):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    norm: float

    @staticmethod
    def of(values) -> "EmbeddingVector":
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise DiversityError("embedding has non-finite entries")
        norm = float(np.linalg.norm(arr))
        if norm <= 0.0:
            raise DiversityError("zero embedding vector rejected")
        return EmbeddingVector(values=arr, norm=norm)


class EmbeddingProvider:
    backend = "abstract"
    dim: int

    def embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


class HashedBagOfWords(EmbeddingProvider):
    """Deterministic offline embedder: tokens hashed into count buckets.

    Exists so the sampler is fully testable without a model endpoint.
    """

    backend = "hashed-bag-of-words"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokenize(text):
            h = int.from_bytes(blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
            vec[h % self.dim] += 1.0
        return EmbeddingVector.of(vec)


class ExternalEmbedding(EmbeddingProvider):
    """HTTP endpoint: POST {"input": text} -> {"embedding": [floats]}."""

    backend = "external-model"

    def __init__(self, endpoint: str, dim: int, auth_token: str | None = None,
                 retries: int = 2, timeout: float = 30.0):
        self.endpoint = endpoint
        self.dim = dim
        self.auth_token = auth_token
        self.retries = retries
        self.timeout = timeout

    def embed(self, text: str) -> EmbeddingVector:
        last = None
        for _ in range(self.retries + 1):
            try:
                headers = {}
                if self.auth_token:
                    headers["Authorization"] = f"Bearer {self.auth_token}"
                resp = requests.post(self.endpoint, json={"input": text},
                                     headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                vec = EmbeddingVector.of(resp.json()["embedding"])
                if len(vec.values) != self.dim:
                    raise DiversityError(
                        f"endpoint returned dim {len(vec.values)}, expected {self.dim}")
                return vec
            except (requests.RequestException, KeyError, TypeError, DiversityError) as e:
                last = e
        raise ProviderError(f"embedding endpoint failed after {self.retries + 1} attempts: {last}")


# --------------------------------------------------------------------------
# Vector cache: one binary file per content hash, uint32 dim header then
# little-endian float32 values.

class VectorCache:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.vec"

    def get(self, key: str) -> EmbeddingVector | None:
        path = self._path(key)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            self.misses += 1
            return None
        (dim,) = struct.unpack("<I", blob[:4])
        arr = np.frombuffer(blob[4:], dtype="<f4", count=dim).astype(np.float64)
        self.hits += 1
        return EmbeddingVector.of(arr)

    def put(self, key: str, vec: EmbeddingVector) -> None:
        blob = struct.pack("<I", len(vec.values)) + vec.values.astype("<f4").tobytes()
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, self._path(key))


def embed_pool(samples: list[Sample], provider: EmbeddingProvider,
               cache: VectorCache | None = None) -> tuple[dict[str, EmbeddingVector], list[str]]:
    """Embed every sample's instruction text; disk-cached by content hash.

    Returns (id -> vector, failed ids). Provider failures exclude the
    sample with a diagnostic rather than aborting the pool.
    """
    vectors: dict[str, EmbeddingVector] = {}
    failed: list[str] = []
    for s in samples:
        text = instruction_text(s)
        key = content_key(provider.backend, getattr(provider, "dim", None), text)
        if cache is not None:
            hit = cache.get(key)
            if hit is not None:
                vectors[s.id] = hit
                continue
        try:
            vec = provider.embed(text)
        except (ProviderError, DiversityError):
            failed.append(s.id)
            continue
        vectors[s.id] = vec
        if cache is not None:
            cache.put(key, vec)
    return vectors, failed


# --------------------------------------------------------------------------
# Selection

@dataclass
class SelectedSet:
    ids: list[str] = field(default_factory=list)
    vectors: list[EmbeddingVector] = field(default_factory=list)

    def add(self, sample_id: str, vec: EmbeddingVector) -> None:
        if sample_id in self.ids:
            raise DiversityError(f"duplicate admission: {sample_id}")
        self.ids.append(sample_id)
        self.vectors.append(vec)

    def __len__(self):
        return len(self.ids)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    return float(np.dot(a.values, b.values)) / (a.norm * b.norm)


def nn_similarity(v: EmbeddingVector, selected: SelectedSet) -> float:
    """Max cosine similarity against the selected set; -1 when it is empty.

    The -1 sentinel sits below any real cosine, so the first candidate is
    always admissible.
    """
    if not selected.vectors:
        return -1.0
    best = -1.0
    for w in selected.vectors:
        if len(w.values) != len(v.values):
            raise DiversityError(
                f"dimension mismatch: {len(v.values)} vs {len(w.values)}")
        best = max(best, cosine(v, w))
    return best


def select(records: list[ScoreRecord], vectors: dict[str, EmbeddingVector],
           q_budget: int, tau: float, distance_mode: str = "similarity") -> SelectedSet:
    """Greedy admission in descending score order under the diversity gate.

    similarity mode (default): admit when max cosine to the selected set
    is < tau. metric mode: admit when (1 - max cosine) < tau, for
    configurations that read the threshold as a distance.
    """
    if q_budget < 1:
        raise DiversityError(f"budget must be >= 1, got {q_budget}")
    if distance_mode not in ("similarity", "metric"):
        raise DiversityError(f"unknown distance_mode {distance_mode!r}")
    for r in records:
        if r.s is None:
            raise DiversityError(f"sample {r.sample_id} is unscored; score before selecting")
        if r.sample_id not in vectors:
            raise DiversityError(f"sample {r.sample_id} has no embedding")
    ordered = sorted(records, key=lambda r: (-r.s, r.sample_id))
    chosen = SelectedSet()
    for r in ordered:
        vec = vectors[r.sample_id]
        sim = nn_similarity(vec, chosen)
        if distance_mode == "similarity":
            admit = sim < tau
        else:
            # Literal distance reading; an empty selected set always admits.
            admit = not chosen.vectors or (1.0 - sim) < tau
        if admit:
            chosen.add(r.sample_id, vec)
        if len(chosen) >= q_budget:
            break
    return chosen

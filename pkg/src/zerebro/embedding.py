"""Deterministic text embeddings via signed character n-gram hashing.

Every n-gram of the utf-8 byte stream is hashed into one of D buckets and
contributes +1 or -1 (second hash bit), then the bucket vector is
L2-normalized. The result is a unit vector that is bit-reproducible for a
given (text, config) pair, with no model files and no network. An
alternate engine ("remote-stub") honors the same interface so a real
remote embedding client could be swapped in later via configuration.

Vectors are plain float64 numpy arrays of shape (dimension,).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BadConfigError, DimensionMismatchError, EmptyTextError

DEFAULT_DIMENSION = 768

# splitmix64 constants; keep the hash family stable across releases,
# persisted snapshots depend on it.
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_POLY = np.uint64(0x100000001B3)


@dataclass(frozen=True)
class EmbeddingConfig:
    """Hash-family parameters. Same config + same text = same vector."""

    dimension: int = DEFAULT_DIMENSION
    ngram_min: int = 3
    ngram_max: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 2:
            raise BadConfigError(f"dimension must be >= 2, got {self.dimension}")
        if self.ngram_min < 1 or self.ngram_max < self.ngram_min:
            raise BadConfigError(
                f"need 1 <= ngram_min <= ngram_max, got [{self.ngram_min}, {self.ngram_max}]"
            )
        if not 0 <= self.seed < 2**64:
            raise BadConfigError("seed must fit in 64 unsigned bits")


def _mix(h: np.ndarray, salt: np.uint64) -> np.ndarray:
    """splitmix64 finalizer over a uint64 array, salted."""
    z = (h ^ salt) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _window_hashes(data: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Polynomial hash of every length-n byte window, mixed with seed and n."""
    win = np.lib.stride_tricks.sliding_window_view(data, n)
    h = np.zeros(len(win), dtype=np.uint64)
    for j in range(n):
        h = h * _POLY + win[:, j]
    salt = np.uint64((seed ^ (n * 0x9E3779B97F4A7C15)) % 2**64)
    return _mix(h, salt)


def embed(text: str, config: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    """Embed text as a unit-norm vector of config.dimension.

    Texts shorter than ngram_min hash as a single whole-text gram so any
    non-blank input still produces a valid vector. Raises EmptyTextError
    for empty or whitespace-only text.
    """
    if not text or not text.strip():
        raise EmptyTextError("cannot embed empty or whitespace-only text")

    data = np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.uint64)
    hashes = [
        _window_hashes(data, n, config.seed)
        for n in range(config.ngram_min, min(config.ngram_max, len(data)) + 1)
    ]
    if not hashes:
        hashes = [_window_hashes(data, len(data), config.seed)]
    h = np.concatenate(hashes)

    vec = np.zeros(config.dimension, dtype=np.float64)
    buckets = (h % np.uint64(config.dimension)).astype(np.intp)
    signs = np.where((h >> np.uint64(32)) & np.uint64(1), 1.0, -1.0)
    np.add.at(vec, buckets, signs)

    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # Reachable only through exact sign cancellation across every bucket.
        raise EmptyTextError(f"text hashed to the zero vector: {text!r}")
    return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    s = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, s))


class HashedEngine:
    """Default engine: the pure-function embed() behind an object interface."""

    backend = "hashed"

    def __init__(self, config: EmbeddingConfig = EmbeddingConfig()):
        self.config = config

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def embed_text(self, text: str) -> np.ndarray:
        return embed(text, self.config)


class RemoteStubEngine:
    """Stand-in for a remote embedding service.

    Produces a seeded pseudo-random unit vector per distinct text. It keeps
    the operational contract (deterministic, unit norm, fixed dimension)
    but carries no n-gram locality; it exists so the wiring for a real
    client is exercised without a network.
    """

    backend = "remote-stub"

    def __init__(self, config: EmbeddingConfig = EmbeddingConfig()):
        self.config = config

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def embed_text(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty or whitespace-only text")
        digest = hashlib.blake2b(
            text.encode("utf-8"),
            digest_size=8,
            key=self.config.seed.to_bytes(8, "little"),
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vec = rng.standard_normal(self.config.dimension)
        return vec / float(np.linalg.norm(vec))


_ENGINES = {"hashed": HashedEngine, "remote-stub": RemoteStubEngine}


def make_engine(backend: str = "hashed", config: EmbeddingConfig = EmbeddingConfig()):
    """Engine factory keyed by the `embedding.backend` configuration value."""
    try:
        cls = _ENGINES[backend]
    except KeyError:
        raise BadConfigError(
            f"unknown embedding backend {backend!r}; choose from {sorted(_ENGINES)}"
        ) from None
    return cls(config)

"""Dense text encoding: providers, vector ops, the on-disk embedding cache, and the passage index.

All vectors are unit-normalized at creation, so cosine similarity reduces to a
dot product on the scoring hot path.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import httpx
import numpy as np

logger = logging.getLogger(__name__)

DETERMINISTIC_TEST = "deterministic-test"
REMOTE_HTTP = "remote-http"


class EmbeddingError(RuntimeError):
    """Provider failure or contract violation while producing vectors."""


class FingerprintMismatch(EmbeddingError):
    """Stored vectors were produced by a different (model_name, dim) provider."""


@dataclass
class EmbeddingProviderConfig:
    provider_kind: str = DETERMINISTIC_TEST
    model_name: str = "det-hash"
    dim: int = 64
    batch_size: int = 64
    endpoint: str | None = None
    api_key_env: str = "EQR_EMBED_API_KEY"
    # Encoder input limit in characters; longer texts are truncated with a warning.
    input_limit: int | None = None
    max_retries: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @property
    def fingerprint(self) -> str:
        return f"{self.model_name}:{self.dim}"


def unit_normalize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError("vector contains non-finite entries")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    return vec / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors of equal dimension."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


class Encoder:
    """Base encoder: chunking, input truncation, normalization, and call counting."""

    def __init__(self, config: EmbeddingProviderConfig) -> None:
        self.config = config
        self.texts_encoded = 0

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Encode texts into an (n, dim) array of unit rows, order preserving."""
        if not texts:
            return np.empty((0, self.config.dim), dtype=np.float64)
        prepared = [self._truncate(t) for t in texts]
        rows = []
        step = self.config.batch_size
        for start in range(0, len(prepared), step):
            chunk = prepared[start : start + step]
            vectors = np.asarray(self._encode_chunk(chunk), dtype=np.float64)
            if vectors.shape != (len(chunk), self.config.dim):
                raise EmbeddingError(
                    f"provider returned shape {vectors.shape}, expected {(len(chunk), self.config.dim)}"
                )
            self.texts_encoded += len(chunk)
            rows.append(vectors)
        out = np.vstack(rows)
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        if not np.all(np.isfinite(out)) or np.any(norms == 0.0):
            raise EmbeddingError("provider returned non-finite or zero vectors")
        return out / norms

    def _truncate(self, text: str) -> str:
        limit = self.config.input_limit
        if limit is not None and len(text) > limit:
            logger.warning("truncating input of %d chars to provider limit %d", len(text), limit)
            return text[:limit]
        return text

    def _encode_chunk(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


class DeterministicEncoder(Encoder):
    """Offline test encoder: seeded hash of the token multiset onto a fixed-dim vector.

    Texts sharing tokens embed closer together, which gives tests a controllable
    similarity structure with no model downloads. Fully deterministic across
    processes (keyed hashing, no builtin hash()).
    """

    def __init__(self, config: EmbeddingProviderConfig) -> None:
        super().__init__(config)
        self._token_vectors: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_vectors.get(token)
        if cached is None:
            digest = hashlib.blake2b(
                f"{self.config.model_name}:{self.config.seed}:{token}".encode("utf-8"),
                digest_size=8,
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            cached = rng.standard_normal(self.config.dim)
            self._token_vectors[token] = cached
        return cached

    def _encode_chunk(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.config.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                tokens = [text or "<empty>"]
            for token in tokens:
                out[row] += self._token_vector(token)
        return out


def tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


class RemoteEncoder(Encoder):
    """HTTP embedding client: POST {"model", "input": [texts]} -> {"data": [{"embedding": ...}]}.

    Transport failures are retried with capped exponential backoff before the
    batch is failed.
    """

    def __init__(
        self,
        config: EmbeddingProviderConfig,
        client: httpx.Client | None = None,
    ) -> None:
        super().__init__(config)
        if not config.endpoint:
            raise ValueError("remote-http provider requires an endpoint")
        self._client = client or httpx.Client(timeout=60.0)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _encode_chunk(self, texts: Sequence[str]) -> np.ndarray:
        payload = {"model": self.config.model_name, "input": list(texts)}
        response = request_with_backoff(
            self._client,
            self.config.endpoint,
            payload,
            headers=self._headers(),
            max_retries=self.config.max_retries,
        )
        try:
            data = response.json()["data"]
            vectors = [entry["embedding"] for entry in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbeddingError(f"provider returned {len(vectors)} vectors for {len(texts)} inputs")
        return np.asarray(vectors, dtype=np.float64)


def request_with_backoff(
    client: httpx.Client,
    url: str,
    payload: dict,
    *,
    headers: dict[str, str] | None = None,
    max_retries: int = 3,
    base_delay: float = 0.5,
    max_delay: float = 8.0,
) -> httpx.Response:
    """POST with capped exponential backoff on transport errors and 5xx/429."""
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        try:
            response = client.post(url, json=payload, headers=headers)
            if response.status_code in (429,) or response.status_code >= 500:
                raise EmbeddingError(f"server returned {response.status_code}")
            response.raise_for_status()
            return response
        except (httpx.TransportError, EmbeddingError) as exc:
            last_error = exc
            if attempt == max_retries:
                break
            delay = min(base_delay * (2**attempt), max_delay)
            logger.warning("request to %s failed (%s); retrying in %.1fs", url, exc, delay)
            time.sleep(delay)
    raise EmbeddingError(f"request to {url} failed after {max_retries + 1} attempts: {last_error}")


def make_encoder(config: EmbeddingProviderConfig, client: httpx.Client | None = None) -> Encoder:
    if config.provider_kind == DETERMINISTIC_TEST:
        return DeterministicEncoder(config)
    if config.provider_kind == REMOTE_HTTP:
        return RemoteEncoder(config, client=client)
    raise ValueError(f"unknown provider kind: {config.provider_kind!r}")


class EmbeddingCache:
    """Content-addressed on-disk vector store.

    Key = hash(model_name, dim, exact text); any text change produces a new key.
    Writes are atomic (tmp file + rename), so concurrent readers never observe a
    partial vector. A fingerprint.json pins the cache directory to one provider.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model_name: str, dim: int, text: str) -> str:
        payload = f"{model_name}\x1f{dim}\x1f{text}".encode("utf-8")
        return hashlib.blake2b(payload, digest_size=20).hexdigest()

    def ensure_fingerprint(self, model_name: str, dim: int) -> None:
        path = self.root / "fingerprint.json"
        wanted = {"model_name": model_name, "dim": dim}
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            if existing != wanted:
                raise FingerprintMismatch(
                    f"cache at {self.root} was built with {existing}, requested {wanted}"
                )
        else:
            path.write_text(json.dumps(wanted, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.npy"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, key: str, vector: np.ndarray) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                np.save(handle, np.asarray(vector, dtype=np.float64))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


@dataclass
class PassageIndex:
    """Immutable unit-normalized vectors for every corpus passage.

    Rows are grouped by item in corpus order; `item_rows` maps each item_id to
    its contiguous row slice so per-item aggregation never rescans the matrix.
    """

    vectors: np.ndarray
    item_ids: tuple[str, ...]
    passage_ids: tuple[str, ...]
    fingerprint: str
    item_rows: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.item_ids) != self.vectors.shape[0] or len(self.passage_ids) != self.vectors.shape[0]:
            raise ValueError("index ids and vector rows disagree")
        if not self.item_rows:
            self.item_rows = _contiguous_slices(self.item_ids)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def entries(self) -> Iterator[tuple[str, str, np.ndarray]]:
        for row in range(len(self)):
            yield self.item_ids[row], self.passage_ids[row], self.vectors[row]


def _contiguous_slices(item_ids: Sequence[str]) -> dict[str, slice]:
    slices: dict[str, slice] = {}
    start = 0
    for row, item_id in enumerate(item_ids):
        if item_id != item_ids[start]:
            if item_ids[start] in slices:
                raise ValueError(f"index rows for item {item_ids[start]} are not contiguous")
            slices[item_ids[start]] = slice(start, row)
            start = row
    if item_ids:
        if item_ids[start] in slices:
            raise ValueError(f"index rows for item {item_ids[start]} are not contiguous")
        slices[item_ids[start]] = slice(start, len(item_ids))
    return slices


def build_index(
    items: Sequence,
    provider: Encoder,
    cache: EmbeddingCache | None = None,
    *,
    max_workers: int = 1,
) -> PassageIndex:
    """Embed every corpus passage once (cache hits skipped) into a PassageIndex.

    Idempotent: rebuilding over the same corpus and provider yields an equal
    index. With max_workers > 1, provider batches are issued concurrently
    (useful for remote providers); results keep corpus order either way.
    """
    if cache is not None:
        cache.ensure_fingerprint(provider.config.model_name, provider.config.dim)

    item_ids: list[str] = []
    passage_ids: list[str] = []
    texts: list[str] = []
    for item in items:
        for passage in item.passages:
            item_ids.append(item.item_id)
            passage_ids.append(passage.passage_id)
            texts.append(passage.text)

    vectors = np.zeros((len(texts), provider.config.dim), dtype=np.float64)
    missing_rows: list[int] = []
    if cache is not None:
        for row, text in enumerate(texts):
            hit = cache.get(EmbeddingCache.key(provider.config.model_name, provider.config.dim, text))
            if hit is None:
                missing_rows.append(row)
            else:
                vectors[row] = hit
    else:
        missing_rows = list(range(len(texts)))

    if missing_rows:
        missing_texts = [texts[row] for row in missing_rows]
        if max_workers > 1:
            step = provider.config.batch_size
            chunks = [missing_texts[i : i + step] for i in range(0, len(missing_texts), step)]
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                encoded = np.vstack(list(pool.map(provider.encode_batch, chunks)))
        else:
            encoded = provider.encode_batch(missing_texts)
        for out_row, row in enumerate(missing_rows):
            vectors[row] = encoded[out_row]
            if cache is not None:
                cache.put(
                    EmbeddingCache.key(provider.config.model_name, provider.config.dim, texts[row]),
                    encoded[out_row],
                )

    return PassageIndex(
        vectors=vectors,
        item_ids=tuple(item_ids),
        passage_ids=tuple(passage_ids),
        fingerprint=provider.fingerprint,
    )


def save_index(index: PassageIndex, path: str | Path) -> None:
    np.savez_compressed(
        path,
        vectors=index.vectors,
        item_ids=np.asarray(index.item_ids, dtype=object),
        passage_ids=np.asarray(index.passage_ids, dtype=object),
        fingerprint=np.asarray(index.fingerprint),
    )


def load_index(path: str | Path) -> PassageIndex:
    with np.load(path, allow_pickle=True) as data:
        return PassageIndex(
            vectors=data["vectors"],
            item_ids=tuple(str(x) for x in data["item_ids"]),
            passage_ids=tuple(str(x) for x in data["passage_ids"]),
            fingerprint=str(data["fingerprint"]),
        )

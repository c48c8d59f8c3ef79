"""Pre-trained word vector access: loading, pooling, cosine similarity.

One store serves both the pairwise similarity feature and key-sentence
selection. Lookups are case-normalized; out-of-vocabulary tokens are skipped
rather than zero-filled when averaging. The store is immutable after load.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import is_stopword


class EmbeddingError(ValueError):
    """Raised for unparsable or inconsistent vector files."""


class EmbeddingStore:
    """word -> fixed-dimension vector table with lowercase lookup."""

    def __init__(self, dim: int, table: dict[str, np.ndarray]):
        self.dim = dim
        self._table = table

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._table

    def lookup(self, word: str) -> np.ndarray | None:
        return self._table.get(word.lower())

    def items(self):
        return self._table.items()


def _parse_header(first_line: str) -> tuple[int, int] | None:
    parts = first_line.split()
    if len(parts) == 2:
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            return None
    return None


def _load_text(path: str | Path, vocab: set[str] | None) -> EmbeddingStore:
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8", errors="replace") as handle:
        first = handle.readline()
        if not first:
            return EmbeddingStore(dim=0, table={})
        lines = handle if _parse_header(first) is not None else _chain_first(first, handle)
        for line_num, line in enumerate(lines, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            word, _, rest = line.partition(" ")
            values = rest.split()
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise EmbeddingError(f"{path}: line {line_num} has {len(values)} components, expected {dim}")
            key = word.lower()
            if vocab is not None and key not in vocab:
                continue
            if key in table:
                continue  # duplicates keep first occurrence
            try:
                table[key] = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise EmbeddingError(f"{path}: line {line_num} has an unparsable component") from None
    return EmbeddingStore(dim=dim or 0, table=table)


def _chain_first(first: str, handle):
    yield first
    yield from handle


def _load_binary(path: str | Path, vocab: set[str] | None) -> EmbeddingStore:
    # word2vec .bin: ascii header "count dim\n", then per entry the word bytes
    # terminated by a space and dim raw float32s.
    with open(path, "rb") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: missing 'count dim' binary header")
        count, dim = int(header[0]), int(header[1])
        table: dict[str, np.ndarray] = {}
        vec_bytes = 4 * dim
        for _ in range(count):
            chars = bytearray()
            while True:
                ch = handle.read(1)
                if not ch:
                    raise EmbeddingError(f"{path}: truncated binary stream")
                if ch == b" ":
                    break
                if ch != b"\n":
                    chars.extend(ch)
            raw = handle.read(vec_bytes)
            if len(raw) < vec_bytes:
                raise EmbeddingError(f"{path}: truncated vector data")
            key = chars.decode("utf-8", "replace").lower()
            if vocab is not None and key not in vocab:
                continue
            if key in table:
                continue
            table[key] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return EmbeddingStore(dim=dim, table=table)


def load_embeddings(
    path: str | Path,
    fmt: str = "text",
    vocab: set[str] | None = None,
) -> EmbeddingStore:
    """Load a word2vec-format vector file.

    `fmt` is "text" ("word v1 ... vD" per line, optional count/dim header) or
    "binary". `vocab`, when given, restricts loading to those lowercase words
    so large files stay cheap to read.
    """
    if fmt == "text":
        return _load_text(path, vocab)
    if fmt == "binary":
        return _load_binary(path, vocab)
    raise EmbeddingError(f"unknown embedding format {fmt!r}")


def average_embedding(
    tokens: list[str],
    store: EmbeddingStore,
    skip_stopwords: bool = True,
) -> np.ndarray | None:
    """Mean vector over in-vocabulary (optionally non-stopword) tokens.

    Returns None when no token qualifies; never zero-fills missing words.
    """
    total = np.zeros(store.dim, dtype=np.float64)
    count = 0
    for token in tokens:
        if skip_stopwords and is_stopword(token):
            continue
        vec = store.lookup(token)
        if vec is None:
            continue
        total += vec
        count += 1
    if count == 0:
        return None
    return total / count


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u,v)/(|u||v|), 0 when either norm is 0, clamped to [-1, 1]."""
    if len(u) != len(v):
        raise ValueError(f"cosine of mismatched lengths {len(u)} and {len(v)}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    value = float(np.dot(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, value))

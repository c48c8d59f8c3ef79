"""Per-pair feature extraction: keyword, entity, embedding, and topic features.

Four families feed the relatedness classifier: min-of-counts keyword overlap
(plain and IDF-weighted, normalized by question self-overlap), the same
overlap over capitalized-run entity surfaces, cosine of average word vectors,
and cosine of rank-r latent projections of TF-IDF bags. Two log-length
features ride along as plumbing and can be disabled.

The truncated factorization is a randomized subspace iteration (Halko-style
range finder with oversampling and power iterations) so it stays cheap on the
sparse document-term matrix.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .container import BinaryReader, BinaryWriter
from .corpus import Article, Question, entity_surfaces, is_stopword
from .embeddings import EmbeddingStore, average_embedding, cosine

FEATURE_NAMES = (
    "kw_overlap_norm",
    "kw_overlap_idf_norm",
    "entity_overlap_norm",
    "entity_overlap_idf_norm",
    "w2v_cosine",
    "svd_cosine",
    "log_len_article",
    "log_len_question",
)

FEATURE_FAMILIES = {
    "kw_overlap_norm": "keyword",
    "kw_overlap_idf_norm": "keyword",
    "entity_overlap_norm": "entity",
    "entity_overlap_idf_norm": "entity",
    "w2v_cosine": "word2vec",
    "svd_cosine": "svd",
    "log_len_article": "length",
    "log_len_question": "length",
}


@dataclass(frozen=True)
class FeatureVector:
    kw_overlap_norm: float
    kw_overlap_idf_norm: float
    entity_overlap_norm: float
    entity_overlap_idf_norm: float
    w2v_cosine: float
    svd_cosine: float
    log_len_article: float
    log_len_question: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


def _content_counts(tokens: list[str]) -> Counter:
    return Counter(t for t in tokens if not is_stopword(t))


def bag_overlap(
    q_counts: Counter,
    d_counts: Counter,
    weights: dict[str, float] | None = None,
    default_weight: float = 1.0,
) -> tuple[float, float]:
    """Min-of-counts overlap between two bags, normalized by self-overlap.

    raw = sum_w min(freq(w, q), freq(w, d)) * weight(w); the normalizer is the
    question's self-overlap under the same weighting, so a question fully
    contained in the article scores 1.0. Empty question bags map to (0, 0).
    """

    def weight(word: str) -> float:
        if weights is None:
            return 1.0
        return weights.get(word, default_weight)

    raw = 0.0
    denom = 0.0
    for word, q_freq in q_counts.items():
        w = weight(word)
        raw += min(q_freq, d_counts.get(word, 0)) * w
        denom += q_freq * w
    if denom == 0.0:
        return 0.0, 0.0
    return raw, raw / denom


def keyword_overlap(
    q: Question, d: Article, idf: dict[str, float] | None = None, default_idf: float = 1.0
) -> tuple[float, float]:
    """Non-stopword keyword overlap, optionally IDF-weighted."""
    return bag_overlap(_content_counts(q.tokens), _content_counts(d.tokens), idf, default_idf)


def entity_overlap(
    q: Question, d: Article, idf: dict[str, float] | None = None, default_idf: float = 1.0
) -> tuple[float, float]:
    """Min-of-counts overlap over bag-of-entities surfaces."""
    q_entities = Counter(entity_surfaces(q.text))
    d_entities = Counter(entity_surfaces(d.text))
    return bag_overlap(q_entities, d_entities, idf, default_idf)


class TfIdfModel:
    """Non-stopword vocabulary with smoothed inverse document frequencies.

    idf(w) = ln((N + 1) / (df(w) + 1)) + 1 over the fitted corpus of N
    documents; the vocabulary keeps words seen in at least `min_df` documents.
    """

    def __init__(self, vocabulary: dict[str, int], idf: np.ndarray, doc_count: int):
        self.vocabulary = vocabulary
        self.idf = idf
        self.doc_count = doc_count

    @property
    def default_idf(self) -> float:
        """IDF assigned to words outside the vocabulary (df treated as 0)."""
        return math.log(self.doc_count + 1) + 1.0

    def idf_weights(self) -> dict[str, float]:
        return {word: float(self.idf[idx]) for word, idx in self.vocabulary.items()}

    def vectorize(self, tokens: list[str]) -> tuple[np.ndarray, np.ndarray]:
        """Sparse tf*idf representation: (column indices, values)."""
        counts = Counter(t for t in tokens if t in self.vocabulary)
        if not counts:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
        idx = np.fromiter((self.vocabulary[w] for w in counts), dtype=np.int64, count=len(counts))
        tf = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
        return idx, tf * self.idf[idx]

    def matrix(self, documents: list[list[str]]) -> sp.csr_matrix:
        """Document-by-vocabulary tf*idf matrix for a tokenized corpus."""
        data, indices, indptr = [], [], [0]
        for tokens in documents:
            idx, vals = self.vectorize(tokens)
            order = np.argsort(idx)
            indices.extend(idx[order])
            data.extend(vals[order])
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(documents), len(self.vocabulary)),
        )


def fit_tfidf(documents: list[list[str]], min_df: int = 2) -> TfIdfModel:
    """Fit vocabulary and IDF weights over tokenized documents.

    Stopwords never enter the vocabulary. Raises on an empty corpus.
    """
    if not documents:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df: Counter = Counter()
    for tokens in documents:
        df.update({t for t in tokens if not is_stopword(t)})
    words = sorted(w for w, count in df.items() if count >= min_df)
    vocabulary = {w: i for i, w in enumerate(words)}
    n = len(documents)
    idf = np.array([math.log((n + 1) / (df[w] + 1)) + 1.0 for w in words], dtype=np.float64)
    return TfIdfModel(vocabulary=vocabulary, idf=idf, doc_count=n)


class SvdModel:
    """Rank-r factorization: orthonormal component rows plus singular values."""

    def __init__(self, components: np.ndarray, singular_values: np.ndarray):
        self.components = components
        self.singular_values = singular_values

    @property
    def rank(self) -> int:
        return self.components.shape[0]


def truncated_svd(
    matrix: sp.spmatrix | np.ndarray,
    rank: int,
    oversample: int = 10,
    power_iterations: int = 4,
    seed: int = 0,
) -> SvdModel:
    """Randomized rank-r factorization via subspace iteration.

    Draws a Gaussian test matrix with `oversample` extra columns, alternates
    multiplications by the matrix and its transpose with QR re-orthonormalization
    `power_iterations` times, then takes an exact factorization of the small
    projected matrix. Component rows are orthonormal; singular values come
    back nonincreasing.
    """
    rows, cols = matrix.shape
    if rank < 1 or rank > min(rows, cols):
        raise ValueError(f"rank {rank} out of range for {rows}x{cols} matrix")
    if sp.issparse(matrix):
        if matrix.nnz == 0:
            raise ValueError("matrix has no nonzero entries")
        matrix = matrix.tocsr()
    elif not np.any(matrix):
        raise ValueError("matrix has no nonzero entries")

    rng = np.random.default_rng(seed)
    width = min(rank + oversample, min(rows, cols))
    basis = np.linalg.qr(matrix @ rng.standard_normal((cols, width)))[0]
    for _ in range(power_iterations):
        basis = np.linalg.qr(matrix.T @ basis)[0]
        basis = np.linalg.qr(matrix @ basis)[0]
    projected = (matrix.T @ basis).T  # Q^T A, small enough to factorize exactly
    _, singular_values, vt = np.linalg.svd(projected, full_matrices=False)
    components = vt[:rank]
    # Canonical sign: largest-magnitude entry of each component positive, so
    # fitted models serialize identically across runs with the same seed.
    for i in range(components.shape[0]):
        pivot = np.argmax(np.abs(components[i]))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    return SvdModel(components=np.ascontiguousarray(components), singular_values=singular_values[:rank].copy())


def svd_project(tokens: list[str], tfidf: TfIdfModel, svd: SvdModel) -> np.ndarray:
    """Dense rank-r projection of a text's tf*idf bag; OOV words contribute 0."""
    idx, vals = tfidf.vectorize(tokens)
    if idx.size == 0:
        return np.zeros(svd.rank, dtype=np.float64)
    return svd.components[:, idx] @ vals


@dataclass
class FeatureConfig:
    svd_rank: int = 50
    svd_seed: int = 0
    skip_stopwords_in_w2v: bool = True
    include_length_features: bool = True


@dataclass
class FeatureModels:
    """Everything fitted or loaded that feature extraction depends on."""

    tfidf: TfIdfModel
    svd: SvdModel
    embeddings: EmbeddingStore
    config: FeatureConfig = field(default_factory=FeatureConfig)
    entity_sidecar: dict[int, list[str]] | None = None


def fit_feature_models(
    articles: list[Article],
    questions: list[Question],
    embeddings: EmbeddingStore,
    config: FeatureConfig | None = None,
    entity_sidecar: dict[int, list[str]] | None = None,
) -> FeatureModels:
    """Fit TF-IDF and the latent projection on the training corpus."""
    config = config or FeatureConfig()
    documents = [a.tokens for a in articles] + [q.tokens for q in questions]
    tfidf = fit_tfidf(documents)
    matrix = tfidf.matrix(documents)
    rank = min(config.svd_rank, min(matrix.shape))
    svd = truncated_svd(matrix, rank=rank, seed=config.svd_seed)
    return FeatureModels(
        tfidf=tfidf,
        svd=svd,
        embeddings=embeddings,
        config=config,
        entity_sidecar=entity_sidecar,
    )


class FeatureExtractor:
    """Caches per-article and per-question intermediates across pairs.

    Articles repeat across thousands of pairs, so bags, projections, and
    pooled embeddings are memoized by article id / question text. The caches
    only grow; extraction itself is pure.
    """

    def __init__(self, models: FeatureModels):
        self.models = models
        self._article_cache: dict[int, tuple] = {}
        self._question_cache: dict[str, tuple] = {}
        self._idf = models.tfidf.idf_weights()
        self._default_idf = models.tfidf.default_idf

    def _article_state(self, d: Article) -> tuple:
        state = self._article_cache.get(d.id)
        if state is None:
            tokens = d.tokens
            if self.models.entity_sidecar is not None and d.id in self.models.entity_sidecar:
                entities = Counter(self.models.entity_sidecar[d.id])
            else:
                entities = Counter(entity_surfaces(d.text))
            state = (
                _content_counts(tokens),
                entities,
                average_embedding(tokens, self.models.embeddings, self.models.config.skip_stopwords_in_w2v),
                svd_project(tokens, self.models.tfidf, self.models.svd),
                len(tokens),
            )
            self._article_cache[d.id] = state
        return state

    def _question_state(self, q: Question) -> tuple:
        state = self._question_cache.get(q.text)
        if state is None:
            tokens = q.tokens
            state = (
                _content_counts(tokens),
                Counter(entity_surfaces(q.text)),
                average_embedding(tokens, self.models.embeddings, self.models.config.skip_stopwords_in_w2v),
                svd_project(tokens, self.models.tfidf, self.models.svd),
                len(tokens),
            )
            self._question_cache[q.text] = state
        return state

    def extract(self, q: Question, d: Article) -> FeatureVector:
        """Assemble the full feature vector for one (question, article) pair."""
        q_counts, q_entities, q_vec, q_proj, q_len = self._question_state(q)
        d_counts, d_entities, d_vec, d_proj, d_len = self._article_state(d)

        _, kw_norm = bag_overlap(q_counts, d_counts)
        _, kw_idf_norm = bag_overlap(q_counts, d_counts, self._idf, self._default_idf)
        _, ent_norm = bag_overlap(q_entities, d_entities)
        ent_idf = self._entity_idf(q_entities)
        _, ent_idf_norm = bag_overlap(q_entities, d_entities, ent_idf, self._default_idf)

        w2v = cosine(q_vec, d_vec) if q_vec is not None and d_vec is not None else 0.0
        svd_sim = cosine(q_proj, d_proj)

        include_len = self.models.config.include_length_features
        return FeatureVector(
            kw_overlap_norm=kw_norm,
            kw_overlap_idf_norm=kw_idf_norm,
            entity_overlap_norm=ent_norm,
            entity_overlap_idf_norm=ent_idf_norm,
            w2v_cosine=w2v,
            svd_cosine=svd_sim,
            log_len_article=math.log1p(d_len) if include_len else 0.0,
            log_len_question=math.log1p(q_len) if include_len else 0.0,
        )

    def _entity_idf(self, entities: Counter) -> dict[str, float]:
        # Multi-word surfaces take the max IDF of their component words: rarer
        # components dominate how informative the mention is.
        out = {}
        for surface in entities:
            words = surface.split()
            out[surface] = max(
                (self._idf.get(w, self._default_idf) for w in words),
                default=self._default_idf,
            )
        return out

    def matrix(self, pairs: list[tuple[Question, Article]]) -> np.ndarray:
        return np.stack([self.extract(q, d).to_array() for q, d in pairs])


def serialize_feature_models(models: FeatureModels) -> list[tuple[str, bytes]]:
    """TFIDF and SVD container sections (embeddings stay in their own file)."""
    tw = BinaryWriter()
    tw.u32(models.tfidf.doc_count)
    tw.u32(len(models.tfidf.vocabulary))
    for word, idx in sorted(models.tfidf.vocabulary.items(), key=lambda kv: kv[1]):
        tw.text(word)
        tw.u32(idx)
    tw.f64_array(models.tfidf.idf)

    sw = BinaryWriter()
    sw.u32(models.svd.rank)
    sw.u32(models.svd.components.shape[1])
    sw.f64_array(models.svd.singular_values)
    sw.f64_array(models.svd.components.reshape(-1))
    return [("TFIDF", tw.getvalue()), ("SVD", sw.getvalue())]


def deserialize_feature_models(
    sections: dict[str, bytes],
    embeddings: EmbeddingStore,
    config: FeatureConfig | None = None,
    entity_sidecar: dict[int, list[str]] | None = None,
) -> FeatureModels:
    tr = BinaryReader(sections["TFIDF"])
    doc_count = tr.u32()
    vocab_size = tr.u32()
    vocabulary = {}
    for _ in range(vocab_size):
        word = tr.text()
        vocabulary[word] = tr.u32()
    idf = tr.f64_array()
    tr.expect_end()

    sr = BinaryReader(sections["SVD"])
    rank = sr.u32()
    cols = sr.u32()
    singular_values = sr.f64_array()
    components = sr.f64_array().reshape(rank, cols)
    sr.expect_end()

    return FeatureModels(
        tfidf=TfIdfModel(vocabulary=vocabulary, idf=idf, doc_count=doc_count),
        svd=SvdModel(components=components, singular_values=singular_values),
        embeddings=embeddings,
        config=config or FeatureConfig(),
        entity_sidecar=entity_sidecar,
    )

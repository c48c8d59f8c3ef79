"""Online scoring pipeline: gate by relatedness, score agreement, rank.

For each candidate article the tree model produces rel(q, d); articles below
the 0.5 gate are Unrelated and never ranked. Above the gate the agreement
model produces beta(q, d), and the class probabilities are

    P(agree)    = beta        (when beta > 0)
    P(disagree) = -beta       (when beta < 0)
    P(discuss)  = rel

with the predicted class the argmax of the applicable entries. Agree and
disagree lists rank by |beta| descending, the discuss list by rel descending,
ties broken by ascending article id so results are independent of pool input
order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Article, ArticleStore, Question, StanceLabel, is_stopword
from .embeddings import EmbeddingStore
from .features import FeatureExtractor
from .gbdt import GbdtModel, predict_rel
from .stancenet import KeySentenceSelection, MatchLstmModel, infer_pair

REL_GATE = 0.5
DEFAULT_LIST_SIZES = (3, 3, 5)  # (agree, disagree, discuss)


@dataclass(frozen=True)
class PairVerdict:
    article_id: int
    rel: float
    beta: float | None  # present iff rel >= REL_GATE
    y_hat: StanceLabel
    p_yhat: float
    key_sentences: KeySentenceSelection | None = None


@dataclass(frozen=True)
class RankedItem:
    article_id: int
    p: float
    rel: float
    beta: float | None
    key_sentences: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class QueryResult:
    agree: tuple[RankedItem, ...]
    disagree: tuple[RankedItem, ...]
    discuss: tuple[RankedItem, ...]


@dataclass
class CandidateSet:
    question: Question
    article_ids: list[int]


@dataclass
class StanceSearchPipeline:
    """Immutable model bundle; every method is safe for concurrent calls."""

    extractor: FeatureExtractor
    relatedness: GbdtModel
    agreement: MatchLstmModel
    embeddings: EmbeddingStore
    list_sizes: tuple[int, int, int] = DEFAULT_LIST_SIZES

    def classify_pair(self, q: Question, d: Article) -> PairVerdict:
        """Full verdict for one pair: gate, agreement score, argmax class."""
        rel = predict_rel(self.relatedness, self.extractor.extract(q, d).to_array())
        if rel < REL_GATE:
            return verdict_from_scores(d.id, rel, beta=None)
        scores, selection = infer_pair(self.agreement, q, d, self.embeddings)
        return verdict_from_scores(d.id, rel, scores.beta, selection)

    def rank_candidates(self, q: Question, pool: CandidateSet, store: ArticleStore) -> QueryResult:
        """Three ranked lists over the pool; an article joins at most one."""
        verdicts = [self.classify_pair(q, store[article_id]) for article_id in pool.article_ids]
        return assemble_result(verdicts, self.list_sizes)

    def query(self, q: Question, store: ArticleStore, retriever: "Bm25Index", pool_size: int = 100) -> QueryResult:
        pool = retriever.retrieve(q, pool_size)
        return self.rank_candidates(q, pool, store)


def verdict_from_scores(
    article_id: int,
    rel: float,
    beta: float | None,
    key_sentences: KeySentenceSelection | None = None,
) -> PairVerdict:
    """Gate and argmax rule applied to already-computed scores.

    Below the gate the verdict is Unrelated with p = 1 - rel. Above it,
    exactly two class probabilities apply: discuss (= rel) and the one whose
    sign matches beta; the argmax wins, with discuss taking exact ties since
    it is the weaker claim.
    """
    if rel < REL_GATE:
        return PairVerdict(
            article_id=article_id,
            rel=rel,
            beta=None,
            y_hat=StanceLabel.UNRELATED,
            p_yhat=1.0 - rel,
        )
    if beta is None:
        raise ValueError("beta is required at or above the relatedness gate")
    signed_label = StanceLabel.AGREE if beta > 0 else StanceLabel.DISAGREE
    if abs(beta) > rel:
        y_hat, p_yhat = signed_label, abs(beta)
    else:
        y_hat, p_yhat = StanceLabel.DISCUSS, rel
    return PairVerdict(
        article_id=article_id,
        rel=rel,
        beta=beta,
        y_hat=y_hat,
        p_yhat=p_yhat,
        key_sentences=key_sentences,
    )


def _item(verdict: PairVerdict) -> RankedItem:
    sentences = verdict.key_sentences.sentences if verdict.key_sentences else ()
    return RankedItem(
        article_id=verdict.article_id,
        p=verdict.p_yhat,
        rel=verdict.rel,
        beta=verdict.beta,
        key_sentences=sentences,
    )


def assemble_result(verdicts: list[PairVerdict], sizes: tuple[int, int, int]) -> QueryResult:
    k_agree, k_disagree, k_discuss = sizes
    agree = [v for v in verdicts if v.y_hat is StanceLabel.AGREE]
    disagree = [v for v in verdicts if v.y_hat is StanceLabel.DISAGREE]
    discuss = [v for v in verdicts if v.y_hat is StanceLabel.DISCUSS]
    agree.sort(key=lambda v: (-abs(v.beta), v.article_id))
    disagree.sort(key=lambda v: (-abs(v.beta), v.article_id))
    discuss.sort(key=lambda v: (-v.rel, v.article_id))
    return QueryResult(
        agree=tuple(_item(v) for v in agree[:k_agree]),
        disagree=tuple(_item(v) for v in disagree[:k_disagree]),
        discuss=tuple(_item(v) for v in discuss[:k_discuss]),
    )


class Bm25Index:
    """Okapi BM25 over non-stopword tokens, for candidate pool plumbing.

    score(q, d) = sum_w idf(w) * f(w,d) * (k1 + 1) / (f(w,d) + k1 * (1 - b + b * |d|/avgdl))
    with idf(w) = ln(1 + (N - df + 0.5) / (df + 0.5)). Ties break by
    ascending article id.
    """

    def __init__(self, store: ArticleStore, k1: float = 1.2, b: float = 0.75):
        if len(store) == 0:
            raise ValueError("cannot index an empty article store")
        self.store = store
        self.k1 = k1
        self.b = b
        self._counts: dict[int, Counter] = {}
        self._lengths: dict[int, int] = {}
        df: Counter = Counter()
        for article_id in sorted(store):
            tokens = [t for t in store[article_id].tokens if not is_stopword(t)]
            counts = Counter(tokens)
            self._counts[article_id] = counts
            self._lengths[article_id] = len(tokens)
            df.update(counts.keys())
        self._df = df
        self._avgdl = sum(self._lengths.values()) / len(store)

    def score(self, q_tokens: list[str], article_id: int) -> float:
        counts = self._counts[article_id]
        length = self._lengths[article_id]
        n = len(self.store)
        total = 0.0
        for word in dict.fromkeys(t for t in q_tokens if not is_stopword(t)):
            freq = counts.get(word, 0)
            if freq == 0:
                continue
            df = self._df[word]
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            denom = freq + self.k1 * (1.0 - self.b + self.b * length / self._avgdl)
            total += idf * freq * (self.k1 + 1.0) / denom
        return total

    def retrieve(self, q: Question, top_n: int) -> CandidateSet:
        """Top-N articles by BM25 score, deterministic tie-break by id."""
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        scored = [(self.score(q.tokens, article_id), article_id) for article_id in self._counts]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return CandidateSet(question=q, article_ids=[aid for _, aid in scored[:top_n]])


def retrieve_candidates(q: Question, store: ArticleStore, top_n: int) -> CandidateSet:
    """One-shot retrieval; build a Bm25Index directly for repeated queries."""
    return Bm25Index(store).retrieve(q, top_n)

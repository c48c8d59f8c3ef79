"""Corpus ingestion and deterministic text processing.

Loads the two delimited files of an FNC-style dataset (bodies and labeled
stance pairs) and provides the tokenizer, sentence splitter, stopword list,
and capitalization-based entity extractor that every downstream stage builds
on. All derived structures are immutable after load and safe for concurrent
reads.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping


class CorpusError(ValueError):
    """Raised for malformed dataset files."""


class StanceLabel(Enum):
    AGREE = "agree"
    DISAGREE = "disagree"
    DISCUSS = "discuss"
    UNRELATED = "unrelated"

    @classmethod
    def parse(cls, raw: str) -> "StanceLabel":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise CorpusError(f"unknown stance string {raw!r}") from None

    @property
    def is_related(self) -> bool:
        return self is not StanceLabel.UNRELATED


RELATED_LABELS = frozenset(
    {StanceLabel.AGREE, StanceLabel.DISAGREE, StanceLabel.DISCUSS}
)


def _load_stopwords() -> frozenset[str]:
    text = resources.files("agreesearch.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOPWORDS: frozenset[str] = _load_stopwords()


def is_stopword(token: str) -> bool:
    """Membership in the bundled, version-pinned stopword list (lowercase in)."""
    return token in STOPWORDS


# Curly quotes and unicode dashes are normalized before tokenization so that
# possessives ("Zeppelin's") survive as single tokens regardless of source
# typography. The mapping is 1:1 per char, so text offsets are preserved.
_CHAR_NORMALIZE = str.maketrans(
    {
        "‘": "'",
        "’": "'",
        "‚": "'",
        "‛": "'",
        "`": "'",
        "´": "'",
        "‐": "-",
        "‑": "-",
        "‒": "-",
        "–": "-",
        "—": "-",
        "―": "-",
    }
)

# A token is a run of unicode alphanumerics; apostrophes and hyphens survive
# only between alphanumerics. Underscore is excluded from \w via [^\W_].
_TOKEN_RE = re.compile(r"[^\W_]+(?:['\-][^\W_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics, keeping internal ' and -."""
    normalized = text.translate(_CHAR_NORMALIZE).lower()
    return _TOKEN_RE.findall(normalized)


def _token_spans(text: str) -> list[tuple[str, int, int]]:
    """(token, start, end) triples; offsets index the original string."""
    normalized = text.translate(_CHAR_NORMALIZE).lower()
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(normalized)]


# Words whose trailing period never ends a sentence.
_ABBREVIATIONS = frozenset({"Mr.", "Mrs.", "Dr.", "U.S.", "St.", "No."})

_BOUNDARY_RE = re.compile(r"[.!?](?=\s+[\"'“‘A-Z0-9À-Þ])")


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    """Half-open char spans of trimmed sentences."""
    spans: list[tuple[int, int]] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        end = match.end()
        # The word carrying the period (e.g. "Mr.") suppresses the split.
        prefix = text[start:end]
        tail = prefix.rsplit(None, 1)[-1] if prefix.strip() else ""
        if text[end - 1] == "." and tail in _ABBREVIATIONS:
            continue
        spans.append((start, end))
        start = end
    if start < len(text):
        spans.append((start, len(text)))

    trimmed = []
    for lo, hi in spans:
        piece = text[lo:hi]
        left = len(piece) - len(piece.lstrip())
        right = len(piece) - len(piece.rstrip())
        if lo + left < hi - right:
            trimmed.append((lo + left, hi - right))
    return trimmed


def split_sentences(text: str) -> list[str]:
    """Split on ./!/? followed by whitespace and an uppercase/quote/digit.

    Abbreviations from a fixed list (Mr., Mrs., Dr., U.S., St., No.) never
    split. Sentences come back trimmed and non-empty, in document order.
    """
    return [text[lo:hi] for lo, hi in _sentence_spans(text)]


@dataclass(frozen=True)
class EntityMention:
    """A capitalized-run entity surface, lowercased, with its token span."""

    surface: str
    span: tuple[int, int]


def extract_entities(tokens: list[str], original_text: str) -> list[EntityMention]:
    """Maximal runs of capitalized words, as lowercase surfaces (bag semantics).

    A run of length one sitting at a sentence start whose word is a stopword
    ("The", "He", ...) is discarded; anything longer, or any capitalized word
    mid-sentence, counts. `tokens` must be `tokenize(original_text)`; spans
    index into it.
    """
    spans = _token_spans(original_text)
    if len(spans) != len(tokens):
        raise ValueError("tokens were not derived from original_text")

    sentence_starts = set()
    cursor = 0
    for sent_lo, _ in _sentence_spans(original_text):
        while cursor < len(spans) and spans[cursor][1] < sent_lo:
            cursor += 1
        if cursor < len(spans):
            sentence_starts.add(cursor)

    capitalized = [original_text[lo].isupper() for _, lo, _ in spans]

    def adjacent(prev: int, cur: int) -> bool:
        # A run only continues across pure whitespace; punctuation (including
        # a sentence period) always terminates it.
        gap = original_text[spans[prev][2] : spans[cur][1]]
        return gap.strip() == ""

    mentions: list[EntityMention] = []
    i = 0
    while i < len(spans):
        if not capitalized[i]:
            i += 1
            continue
        j = i
        while j < len(spans) and capitalized[j] and (j == i or adjacent(j - 1, j)):
            j += 1
        run = tokens[i:j]
        if not (j - i == 1 and i in sentence_starts and is_stopword(run[0])):
            mentions.append(EntityMention(surface=" ".join(run), span=(i, j)))
        i = j
    return mentions


@dataclass
class Article:
    """One candidate article; text is immutable, derived views are cached."""

    id: int
    text: str
    _tokens: list[str] | None = field(default=None, repr=False)
    _sentences: list[str] | None = field(default=None, repr=False)

    @property
    def tokens(self) -> list[str]:
        if self._tokens is None:
            self._tokens = tokenize(self.text)
        return self._tokens

    @property
    def sentences(self) -> list[str]:
        if self._sentences is None:
            self._sentences = split_sentences(self.text)
        return self._sentences


@dataclass
class Question:
    text: str
    _tokens: list[str] | None = field(default=None, repr=False)

    @property
    def tokens(self) -> list[str]:
        if self._tokens is None:
            self._tokens = tokenize(self.text)
        return self._tokens


@dataclass(frozen=True)
class StancePair:
    question: Question
    article_id: int
    label: StanceLabel


class ArticleStore(Mapping[int, Article]):
    """Immutable id-keyed article collection."""

    def __init__(self, articles: Iterable[Article]):
        self._by_id: dict[int, Article] = {}
        for article in articles:
            if article.id in self._by_id:
                raise CorpusError(f"duplicate body id {article.id}")
            self._by_id[article.id] = article

    def __getitem__(self, article_id: int) -> Article:
        return self._by_id[article_id]

    def __iter__(self) -> Iterator[int]:
        return iter(self._by_id)

    def __len__(self) -> int:
        return len(self._by_id)


@dataclass
class DatasetSplit:
    pairs: list[StancePair]
    articles: ArticleStore
    split_name: str

    def label_distribution(self) -> dict[StanceLabel, float]:
        counts = {label: 0 for label in StanceLabel}
        for pair in self.pairs:
            counts[pair.label] += 1
        total = len(self.pairs)
        return {label: n / total for label, n in counts.items()} if total else {}


def load_bodies(path: str | Path) -> ArticleStore:
    """Read a two-column (Body ID, articleBody) file into an ArticleStore.

    RFC-4180-style quoting: bodies may contain embedded newlines inside
    quoted fields. Malformed rows and duplicate ids are hard errors.
    """
    articles = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return ArticleStore([])
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise CorpusError(f"{path}: row {row_num} has {len(row)} columns, expected 2")
            raw_id, body = row
            try:
                body_id = int(raw_id)
            except ValueError:
                raise CorpusError(f"{path}: row {row_num} has non-integer body id {raw_id!r}") from None
            articles.append(Article(id=body_id, text=body))
    return ArticleStore(articles)


def load_stances(path: str | Path, store: ArticleStore) -> list[StancePair]:
    """Read a (Headline, Body ID, Stance) file, preserving file order.

    Unknown stance strings and body ids missing from `store` are hard errors.
    Question objects are shared across rows with identical headline text so
    tokenization is done once per distinct question.
    """
    pairs: list[StancePair] = []
    questions: dict[str, Question] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        next(reader, None)
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CorpusError(f"{path}: row {row_num} has {len(row)} columns, expected 3")
            headline, raw_id, stance = row
            try:
                body_id = int(raw_id)
            except ValueError:
                raise CorpusError(f"{path}: row {row_num} has non-integer body id {raw_id!r}") from None
            if body_id not in store:
                raise CorpusError(f"{path}: row {row_num} references unknown body id {body_id}")
            question = questions.setdefault(headline, Question(text=headline))
            pairs.append(StancePair(question=question, article_id=body_id, label=StanceLabel.parse(stance)))
    return pairs


def load_split(bodies_path: str | Path, stances_path: str | Path, split_name: str) -> DatasetSplit:
    store = load_bodies(bodies_path)
    pairs = load_stances(stances_path, store)
    return DatasetSplit(pairs=pairs, articles=store, split_name=split_name)


def entity_surfaces(text: str) -> list[str]:
    """Lowercase entity surfaces of a text, bag semantics, heuristic order."""
    return [m.surface for m in extract_entities(tokenize(text), text)]


def load_entity_sidecar(path: str | Path) -> dict[int, list[str]]:
    """Optional precomputed entity annotations: "article_id<TAB>e1|e2|..." per line.

    When present, these override the capitalization heuristic for articles.
    """
    table: dict[int, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_num, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                raw_id, raw_entities = line.split("\t", 1)
                article_id = int(raw_id)
            except ValueError:
                raise CorpusError(f"{path}: line {line_num} is not 'id<TAB>e1|e2|...'") from None
            table[article_id] = [e.strip().lower() for e in raw_entities.split("|") if e.strip()]
    return table

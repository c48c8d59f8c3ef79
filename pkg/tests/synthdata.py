"""Deterministic synthetic corpus for end-to-end tests.

Builds a small world of topics, each with an entity, an action, and an
object phrase. Questions are statements about a topic; articles either back
the statement (agree), negate it (disagree), report it without position
(discuss), or talk about a different topic entirely (unrelated). Word
vectors mix a per-topic base direction with per-word noise so same-topic
text is close in embedding space.

Half of the disagree/discuss articles "bury" their cue sentence: the cue
shares few content words with the question, while a neutral paraphrase
sentence has full overlap. With one key sentence the model only sees the
paraphrase; with three it sees the cue, so more key sentences genuinely
help on these articles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from agreesearch.corpus import Article, ArticleStore, DatasetSplit, Question, StanceLabel, StancePair
from agreesearch.embeddings import EmbeddingStore

FIRST_NAMES = [
    "Alder", "Briony", "Calder", "Dorane", "Elsworth", "Farren", "Galton",
    "Harlow", "Ivexa", "Jorund", "Kelwin", "Lorvik", "Marden", "Nerissa",
    "Orvand", "Pellam", "Quintar", "Rosmund", "Selwyn", "Tamsin",
    "Ulfred", "Varena", "Wendell", "Xanthe", "Yorath", "Zelmira",
    "Ashford", "Berwick", "Corwin", "Daventry",
]
LAST_NAMES = [
    "Vexley", "Tarrow", "Quillon", "Marbeck", "Fenwood", "Oastler", "Grimsby",
    "Haldane", "Iverson", "Jessop", "Kirkwall", "Lindqvist", "Morrow",
    "Norcliffe", "Okafor", "Penhall", "Quenby", "Ravenscroft", "Strood",
    "Thackeray", "Umberto", "Vansittart", "Wheatley", "Xenides", "Yarrow",
    "Zeltner", "Ashdown", "Birtwistle", "Considine", "Draycott",
]
VERBS = [
    "cancelled", "signed", "rejected", "approved", "abandoned", "endorsed",
    "halted", "launched", "shelved", "secured", "blocked", "unveiled",
    "suspended", "ratified", "scrapped",
]
OBJECTS = [
    ("stadium", "contract"), ("reunion", "tour"), ("merger", "deal"),
    ("vaccine", "trial"), ("pipeline", "project"), ("satellite", "program"),
    ("festival", "budget"), ("railway", "expansion"), ("museum", "wing"),
    ("harbor", "lease"), ("casino", "permit"), ("orchard", "subsidy"),
    ("tunnel", "bid"), ("airline", "route"), ("refinery", "upgrade"),
]
CONTEXT_WORDS = [
    "negotiations", "statement", "documents", "assembly", "officials",
    "sources", "spokesperson", "committee", "investors", "residents",
    "analysts", "meeting", "decision", "announcement", "proposal",
]
AGREE_CUES = ["confirmed", "indeed", "officially", "verified"]
DISAGREE_CUES = ["never", "denied", "false", "hoax"]
DISCUSS_CUES = ["reportedly", "allegedly", "rumored", "unverified"]
FILLERS = [
    "coverage", "weekend", "press", "briefing", "reporters", "afternoon",
    "downtown", "headline", "broadcast", "column",
]


@dataclass
class Topic:
    index: int
    first: str
    last: str
    verb: str
    obj: tuple[str, str]
    context: list[str]

    @property
    def entity(self) -> str:
        return f"{self.first} {self.last}"

    def question_text(self) -> str:
        return f"{self.entity} {self.verb} the {self.obj[0]} {self.obj[1]}"

    def variant_question_text(self) -> str:
        return f"{self.entity} really {self.verb} the {self.obj[0]} {self.obj[1]}"


@dataclass
class SynthWorld:
    train: DatasetSplit
    test: DatasetSplit
    embeddings: EmbeddingStore
    topics: list[Topic]


def _topic(index: int, rng: np.random.Generator) -> Topic:
    return Topic(
        index=index,
        first=FIRST_NAMES[index % len(FIRST_NAMES)],
        last=LAST_NAMES[(index * 7 + 3) % len(LAST_NAMES)],
        verb=VERBS[index % len(VERBS)],
        obj=OBJECTS[(index * 3 + 1) % len(OBJECTS)],
        context=list(rng.choice(CONTEXT_WORDS, size=4, replace=False)),
    )


def _article_text(topic: Topic, stance: StanceLabel, buried: bool, rng: np.random.Generator) -> str:
    entity = topic.entity
    verb = topic.verb
    obj = f"the {topic.obj[0]} {topic.obj[1]}"
    context = f"The {topic.context[0]} about {entity} drew {topic.context[1]} this week."
    filler = f"A {rng.choice(FILLERS)} followed the {rng.choice(FILLERS)} downtown."
    paraphrase = f"{entity} {verb} {obj} according to the {topic.context[2]}."

    cues = {
        StanceLabel.AGREE: AGREE_CUES,
        StanceLabel.DISAGREE: DISAGREE_CUES,
        StanceLabel.DISCUSS: DISCUSS_CUES,
    }[stance]
    cue = rng.choice(cues)
    if buried:
        # The cue sentence shares no question content words, so it ranks
        # last by similarity: invisible at k=1, visible at k=3.
        key = f"That was {cue} we heard."
        sentences = [paraphrase, context, key]
    else:
        # Full-overlap cue sentence outranks context and filler at k=1.
        key = f"{entity} {cue} {verb} {obj}."
        sentences = [context, key, filler]
    return " ".join(sentences)


def _build_embeddings(texts: list[str], topic_of_word: dict[str, int], dim: int, rng: np.random.Generator) -> EmbeddingStore:
    from agreesearch.corpus import tokenize

    vocab = sorted({token for text in texts for token in tokenize(text)})
    n_topics = max(topic_of_word.values(), default=0) + 1
    bases = rng.standard_normal((n_topics, dim))
    table = {}
    for word in vocab:
        noise = rng.standard_normal(dim)
        topic = topic_of_word.get(word)
        vec = noise if topic is None else 0.9 * bases[topic] + 0.8 * noise
        table[word] = vec / np.linalg.norm(vec)
    return EmbeddingStore(dim=dim, table=table)


def make_world(
    seed: int = 0,
    train_topics: int = 20,
    test_topics: int = 8,
    dim: int = 16,
    articles_per_stance: int = 2,
    unrelated_per_question: int = 5,
) -> SynthWorld:
    rng = np.random.default_rng(seed)
    total = train_topics + test_topics
    topics = [_topic(i, rng) for i in range(total)]

    article_texts: dict[int, str] = {}
    article_meta: list[tuple[int, int, StanceLabel]] = []  # (article_id, topic, stance)
    next_id = 100
    for topic in topics:
        # Interleave stances in the id sequence so id tie-breaks never favor
        # one class systematically.
        for copy in range(articles_per_stance):
            buried = copy % 2 == 1  # every second article hides its cue
            for stance in (StanceLabel.AGREE, StanceLabel.DISAGREE, StanceLabel.DISCUSS):
                article_texts[next_id] = _article_text(topic, stance, buried, rng)
                article_meta.append((next_id, topic.index, stance))
                next_id += 1

    topic_of_word: dict[str, int] = {}
    for topic in topics:
        for word in (topic.first.lower(), topic.last.lower(), topic.verb,
                     topic.obj[0], topic.obj[1], *topic.context):
            topic_of_word[word] = topic.index

    def split_for(topic_slice: list[Topic], name: str) -> DatasetSplit:
        ids = {aid for aid, topic_idx, _ in article_meta if any(t.index == topic_idx for t in topic_slice)}
        store = ArticleStore(Article(id=aid, text=article_texts[aid]) for aid in sorted(ids))
        pairs: list[StancePair] = []
        by_topic: dict[int, list[tuple[int, StanceLabel]]] = {}
        for aid, topic_idx, stance in article_meta:
            if aid in ids:
                by_topic.setdefault(topic_idx, []).append((aid, stance))
        slice_indices = [t.index for t in topic_slice]
        for topic in topic_slice:
            questions = [Question(topic.question_text()), Question(topic.variant_question_text())]
            own = by_topic[topic.index]
            for question in questions:
                for aid, stance in own:
                    pairs.append(StancePair(question=question, article_id=aid, label=stance))
                # Unrelated pool: articles from other topics of the same split
                # (a single-topic split simply has no unrelated pairs).
                others = [i for i in slice_indices if i != topic.index]
                for j in range(unrelated_per_question if others else 0):
                    other = by_topic[others[(topic.index + j) % len(others)]]
                    aid, _ = other[j % len(other)]
                    pairs.append(StancePair(question=question, article_id=aid, label=StanceLabel.UNRELATED))
        return DatasetSplit(pairs=pairs, articles=store, split_name=name)

    train = split_for(topics[:train_topics], "train")
    test = split_for(topics[train_topics:], "test")

    all_texts = list(article_texts.values())
    all_texts += [p.question.text for p in train.pairs + test.pairs]
    embeddings = _build_embeddings(all_texts, topic_of_word, dim, rng)
    return SynthWorld(train=train, test=test, embeddings=embeddings, topics=topics)


def write_world_files(world: SynthWorld, directory: Path) -> dict[str, Path]:
    """Write the world as FNC-style CSVs plus a text embedding file."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "bodies": directory / "bodies.csv",
        "stances_train": directory / "stances_train.csv",
        "stances_test": directory / "stances_test.csv",
        "embeddings": directory / "vectors.txt",
    }
    seen: set[int] = set()
    with open(paths["bodies"], "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["Body ID", "articleBody"])
        for split in (world.train, world.test):
            for aid in sorted(split.articles):
                if aid not in seen:
                    seen.add(aid)
                    writer.writerow([aid, split.articles[aid].text])
    for key, split in (("stances_train", world.train), ("stances_test", world.test)):
        with open(paths[key], "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["Headline", "Body ID", "Stance"])
            for pair in split.pairs:
                writer.writerow([pair.question.text, pair.article_id, pair.label.value])
    write_embeddings_file(world.embeddings, paths["embeddings"])
    return paths


def write_embeddings_file(store: EmbeddingStore, path: Path) -> None:
    table = dict(store.items())
    with open(path, "w", encoding="utf-8") as handle:
        for word in sorted(table):
            handle.write(word + " " + " ".join(f"{v:.8f}" for v in table[word]) + "\n")

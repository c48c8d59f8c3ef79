"""Agreement-aware evidence search.

Given an investigative question and a pool of candidate articles, classify
each article as unrelated / discuss / agree / disagree and return three
ranked evidence lists. Two models do the work: gradient-boosted trees over
keyword/entity/embedding/topic overlap features decide relatedness, and a
key-sentence match-LSTM with attention scores agreement.
"""

from .corpus import (
    Article,
    ArticleStore,
    DatasetSplit,
    Question,
    StanceLabel,
    StancePair,
    load_bodies,
    load_split,
    load_stances,
)
from .pipeline import QueryResult, StanceSearchPipeline

__all__ = [
    "Article",
    "ArticleStore",
    "DatasetSplit",
    "Question",
    "QueryResult",
    "StanceLabel",
    "StancePair",
    "StanceSearchPipeline",
    "load_bodies",
    "load_split",
    "load_stances",
]

__version__ = "0.1.0"

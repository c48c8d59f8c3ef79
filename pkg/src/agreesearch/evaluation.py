"""Evaluation metrics and the experiment harness.

The ranking metric is NDCG with the discount sequence 1, 1/log2(2),
1/log2(3), ...: the first position is undiscounted and position i >= 2 is
divided by log2(i). A ranked list whose class has no relevant article in the
pool (ideal DCG 0) is skipped rather than scored. The overall number is the
mean over questions of each question's mean over its non-skipped lists.

Weighted accuracy follows the two-level scheme: 0.25 credit for getting
related-vs-unrelated right, 0.75 more for the exact class among gold-related
pairs, normalized by the maximum attainable score.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

from .corpus import DatasetSplit, StanceLabel, StancePair
from .pipeline import PairVerdict, QueryResult, StanceSearchPipeline, assemble_result

CLASS_CUTOFFS = {StanceLabel.AGREE: 3, StanceLabel.DISAGREE: 3, StanceLabel.DISCUSS: 5}


def dcg_at_k(gains: list[int], k: int) -> float:
    """gain_1 + sum_{i=2..K} gain_i / log2(i) over the first K positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    for position, gain in enumerate(gains[:k], start=1):
        total += gain if position == 1 else gain / math.log2(position)
    return total


def ndcg_at_k(gains: list[int], ideal_gain_count: int, k: int) -> float | None:
    """DCG normalized by the best reachable DCG; None marks a skipped list."""
    ideal = dcg_at_k([1] * min(ideal_gain_count, k), k) if ideal_gain_count > 0 else 0.0
    if ideal == 0.0:
        return None
    return dcg_at_k(gains, k) / ideal


def avg_ndcg(per_question: list[list[float | None]]) -> float:
    """Mean over questions of the mean over each question's non-skipped lists."""
    question_means = []
    for lists in per_question:
        usable = [v for v in lists if v is not None]
        if usable:
            question_means.append(sum(usable) / len(usable))
    if not question_means:
        raise ValueError("every ranked list was skipped")
    return sum(question_means) / len(question_means)


def relatedness_error(predictions: list[StanceLabel], gold: list[StanceLabel]) -> float:
    """Fraction of pairs misclassified after collapsing to related/unrelated."""
    if len(predictions) != len(gold):
        raise ValueError("prediction/gold length mismatch")
    wrong = sum(1 for p, g in zip(predictions, gold) if p.is_related != g.is_related)
    return wrong / len(predictions) if predictions else 0.0


def weighted_accuracy(predictions: list[StanceLabel], gold: list[StanceLabel]) -> float:
    """FNC credit scheme normalized by the maximum attainable score."""
    if len(predictions) != len(gold):
        raise ValueError("prediction/gold length mismatch")
    score = 0.0
    best = 0.0
    for pred, actual in zip(predictions, gold):
        best += 0.25 + (0.75 if actual.is_related else 0.0)
        if pred.is_related == actual.is_related:
            score += 0.25
        if actual.is_related and pred == actual:
            score += 0.75
    return score / best if best else 0.0


def group_pairs_by_question(pairs: list[StancePair]) -> dict[str, list[StancePair]]:
    """Pools keyed by exact headline text (the dataset has no question ids)."""
    pools: dict[str, list[StancePair]] = {}
    for pair in pairs:
        pools.setdefault(pair.question.text, []).append(pair)
    return pools


def find_controversial(pairs: list[StancePair]) -> set[str]:
    """Questions with at least one gold agree and one gold disagree article."""
    controversial = set()
    for text, pool in group_pairs_by_question(pairs).items():
        labels = {p.label for p in pool}
        if StanceLabel.AGREE in labels and StanceLabel.DISAGREE in labels:
            controversial.add(text)
    return controversial


@dataclass
class EvalReport:
    name: str
    relatedness_error: float
    weighted_accuracy: float
    ndcg_agree: float | None
    ndcg_disagree: float | None
    ndcg_discuss: float | None
    avg_ndcg: float
    controversial_relatedness_error: float
    controversial_weighted_accuracy: float
    controversial_ndcg_agree: float | None
    controversial_ndcg_disagree: float | None
    controversial_ndcg_discuss: float | None
    controversial_avg_ndcg: float
    question_count: int
    controversial_count: int
    confusion: dict[str, dict[str, int]]
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        return json.dumps(payload, sort_keys=True)

    def render(self) -> str:
        def pct(value: float | None) -> str:
            return "--" if value is None else f"{100 * value:6.2f}%"

        lines = [
            f"report: {self.name}",
            f"  questions: {self.question_count} (controversial: {self.controversial_count})",
            "  scope           rel-err  w-acc    agree@3  disag@3  disc@5   avg-ndcg",
            "  all questions   "
            + "  ".join(
                pct(v)
                for v in (
                    self.relatedness_error,
                    self.weighted_accuracy,
                    self.ndcg_agree,
                    self.ndcg_disagree,
                    self.ndcg_discuss,
                    self.avg_ndcg,
                )
            ),
            "  controversial   "
            + "  ".join(
                pct(v)
                for v in (
                    self.controversial_relatedness_error,
                    self.controversial_weighted_accuracy,
                    self.controversial_ndcg_agree,
                    self.controversial_ndcg_disagree,
                    self.controversial_ndcg_discuss,
                    self.controversial_avg_ndcg,
                )
            ),
        ]
        return "\n".join(lines)


def _list_gains(result_ids: list[int], gold_by_id: dict[int, StanceLabel], target: StanceLabel) -> list[int]:
    return [1 if gold_by_id.get(article_id) == target else 0 for article_id in result_ids]


def _mean(values: list[float | None]) -> float | None:
    usable = [v for v in values if v is not None]
    return sum(usable) / len(usable) if usable else None


def evaluate_rankings(
    per_question_results: dict[str, QueryResult],
    pools: dict[str, list[StancePair]],
) -> tuple[dict[str, dict[StanceLabel, float | None]], float]:
    """Per-question per-class NDCG values plus the overall average."""
    ndcgs: dict[str, dict[StanceLabel, float | None]] = {}
    for text, result in per_question_results.items():
        pool = pools[text]
        gold_by_id = {p.article_id: p.label for p in pool}
        gold_counts = {
            label: sum(1 for p in pool if p.label == label) for label in CLASS_CUTOFFS
        }
        lists = {
            StanceLabel.AGREE: [item.article_id for item in result.agree],
            StanceLabel.DISAGREE: [item.article_id for item in result.disagree],
            StanceLabel.DISCUSS: [item.article_id for item in result.discuss],
        }
        ndcgs[text] = {
            label: ndcg_at_k(
                _list_gains(lists[label], gold_by_id, label),
                gold_counts[label],
                CLASS_CUTOFFS[label],
            )
            for label in CLASS_CUTOFFS
        }
    overall = avg_ndcg([list(per_class.values()) for per_class in ndcgs.values()])
    return ndcgs, overall


def evaluate_split(
    pipeline: StanceSearchPipeline,
    split: DatasetSplit,
    name: str = "eval",
) -> EvalReport:
    """Classify and rank every question pool of a split, then score it all."""
    pools = group_pairs_by_question(split.pairs)
    controversial = find_controversial(split.pairs)

    verdicts: dict[str, list[PairVerdict]] = {}
    results: dict[str, QueryResult] = {}
    for text, pool in pools.items():
        question = pool[0].question
        pool_verdicts = [
            pipeline.classify_pair(question, split.articles[p.article_id]) for p in pool
        ]
        verdicts[text] = pool_verdicts
        results[text] = assemble_result(pool_verdicts, pipeline.list_sizes)

    def scope_metrics(texts: list[str]) -> dict:
        predictions: list[StanceLabel] = []
        gold: list[StanceLabel] = []
        confusion: dict[str, dict[str, int]] = {
            g.value: {p.value: 0 for p in StanceLabel} for g in StanceLabel
        }
        for text in texts:
            for pair, verdict in zip(pools[text], verdicts[text]):
                predictions.append(verdict.y_hat)
                gold.append(pair.label)
                confusion[pair.label.value][verdict.y_hat.value] += 1
        ndcgs, overall = evaluate_rankings(
            {t: results[t] for t in texts}, {t: pools[t] for t in texts}
        )
        per_class = {
            label: _mean([ndcgs[t][label] for t in texts]) for label in CLASS_CUTOFFS
        }
        return {
            "relatedness_error": relatedness_error(predictions, gold),
            "weighted_accuracy": weighted_accuracy(predictions, gold),
            "per_class": per_class,
            "avg_ndcg": overall,
            "confusion": confusion,
        }

    all_texts = list(pools)
    contro_texts = [t for t in all_texts if t in controversial]
    overall = scope_metrics(all_texts)
    contro = scope_metrics(contro_texts) if contro_texts else None

    return EvalReport(
        name=name,
        relatedness_error=overall["relatedness_error"],
        weighted_accuracy=overall["weighted_accuracy"],
        ndcg_agree=overall["per_class"][StanceLabel.AGREE],
        ndcg_disagree=overall["per_class"][StanceLabel.DISAGREE],
        ndcg_discuss=overall["per_class"][StanceLabel.DISCUSS],
        avg_ndcg=overall["avg_ndcg"],
        controversial_relatedness_error=contro["relatedness_error"] if contro else 0.0,
        controversial_weighted_accuracy=contro["weighted_accuracy"] if contro else 0.0,
        controversial_ndcg_agree=contro["per_class"][StanceLabel.AGREE] if contro else None,
        controversial_ndcg_disagree=contro["per_class"][StanceLabel.DISAGREE] if contro else None,
        controversial_ndcg_discuss=contro["per_class"][StanceLabel.DISCUSS] if contro else None,
        controversial_avg_ndcg=contro["avg_ndcg"] if contro else 0.0,
        question_count=len(all_texts),
        controversial_count=len(contro_texts),
        confusion=overall["confusion"],
    )


@dataclass
class SweepConfig:
    """One experiment grid: key-sentence counts x epochs x seeds."""

    k_values: tuple[int, ...] = (3,)
    epoch_values: tuple[int, ...] = (10,)
    seeds: tuple[int, ...] = (13,)


def run_experiment(
    train_fn,
    eval_fn,
    sweep: SweepConfig,
) -> list[EvalReport]:
    """Train/evaluate across the grid; per-seed values are averaged per cell.

    `train_fn(k, epochs, seed)` returns an agreement model; `eval_fn(model)`
    returns an EvalReport. One report per (k, epochs) cell comes back with
    per-seed numbers preserved under `extra["per_seed"]`.
    """
    reports = []
    for k in sweep.k_values:
        for epochs in sweep.epoch_values:
            seed_reports = []
            for seed in sweep.seeds:
                started = time.perf_counter()
                model = train_fn(k, epochs, seed)
                report = eval_fn(model)
                report.extra["train_seconds"] = time.perf_counter() - started
                report.extra["seed"] = seed
                seed_reports.append(report)
            merged = _average_reports(seed_reports, name=f"k={k},epochs={epochs}")
            merged.extra["k"] = k
            merged.extra["epochs"] = epochs
            merged.extra["per_seed"] = [json.loads(r.to_json()) for r in seed_reports]
            reports.append(merged)
    return reports


_NUMERIC_FIELDS = (
    "relatedness_error",
    "weighted_accuracy",
    "ndcg_agree",
    "ndcg_disagree",
    "ndcg_discuss",
    "avg_ndcg",
    "controversial_relatedness_error",
    "controversial_weighted_accuracy",
    "controversial_ndcg_agree",
    "controversial_ndcg_disagree",
    "controversial_ndcg_discuss",
    "controversial_avg_ndcg",
)


def _average_reports(reports: list[EvalReport], name: str) -> EvalReport:
    merged = replace(reports[0], name=name, extra={})
    for field_name in _NUMERIC_FIELDS:
        values = [getattr(r, field_name) for r in reports]
        present = [v for v in values if v is not None]
        setattr(merged, field_name, sum(present) / len(present) if present else None)
    return merged


def write_reports(reports: list[EvalReport], path) -> None:
    """Line-delimited JSON, one report per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for report in reports:
            handle.write(report.to_json() + "\n")

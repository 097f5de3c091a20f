"""Span-level extraction F1 and per-aspect polarity metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence, Set

from .corpus import AtepcSentence, Polarity
from .model import decode_bio

Span = tuple[int, int]


class SpanPredictor(Protocol):
    def predict_spans(self, tokens: Sequence[str]) -> list[Span]: ...

    def predict_polarity(self, tokens: Sequence[str], span: Span) -> Polarity: ...


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ApcScores:
    accuracy: float
    macro_f1: float
    per_class: dict[Polarity, ClassScore]


@dataclass
class MetricReport:
    ate_precision: float
    ate_recall: float
    ate_f1: float
    apc_accuracy: float
    apc_f1_macro: float
    apc_per_class: dict[Polarity, ClassScore] = field(default_factory=dict)
    # Same polarity metrics restricted to aspects the tagger actually found.
    apc_pred_span_accuracy: float | None = None
    apc_pred_span_f1_macro: float | None = None

    def to_dict(self) -> dict:
        return {
            "ate_precision": self.ate_precision,
            "ate_recall": self.ate_recall,
            "ate_f1": self.ate_f1,
            "apc_accuracy": self.apc_accuracy,
            "apc_f1_macro": self.apc_f1_macro,
            "apc_per_class": {
                polarity.value: {
                    "precision": score.precision,
                    "recall": score.recall,
                    "f1": score.f1,
                    "support": score.support,
                }
                for polarity, score in self.apc_per_class.items()
            },
            "apc_pred_span_accuracy": self.apc_pred_span_accuracy,
            "apc_pred_span_f1_macro": self.apc_pred_span_f1_macro,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def span_f1(
    pred: Mapping[object, Set[Span]], gold: Mapping[object, Set[Span]]
) -> tuple[float, float, float]:
    """Exact-match span precision/recall/F1 summed over sentences.

    An empty prediction (or gold) side contributes no denominator; by
    convention an empty denominator scores 1.0, so empty-vs-empty is
    (1, 1, 1) and empty-vs-nonempty is (1, 0, 0).
    """
    if set(pred) != set(gold):
        raise ValueError("prediction and gold sentence ids differ")
    tp = sum(len(pred[sid] & gold[sid]) for sid in gold)
    n_pred = sum(len(spans) for spans in pred.values())
    n_gold = sum(len(spans) for spans in gold.values())
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gold if n_gold else 1.0
    return precision, recall, _f1(precision, recall)


def apc_metrics(pred: Sequence[Polarity], gold: Sequence[Polarity]) -> ApcScores:
    """Multiclass accuracy and macro F1 over the polarity labels.

    Classes absent from both gold and predictions are excluded from the
    macro mean.
    """
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold labels")
    correct = sum(1 for p, g in zip(pred, gold) if p == g)
    accuracy = correct / len(gold) if gold else 0.0
    per_class: dict[Polarity, ClassScore] = {}
    for polarity in Polarity:
        tp = sum(1 for p, g in zip(pred, gold) if p == g == polarity)
        n_pred = sum(1 for p in pred if p == polarity)
        n_gold = sum(1 for g in gold if g == polarity)
        if n_pred == 0 and n_gold == 0:
            continue
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        per_class[polarity] = ClassScore(precision, recall, _f1(precision, recall), n_gold)
    macro_f1 = (
        sum(score.f1 for score in per_class.values()) / len(per_class) if per_class else 0.0
    )
    return ApcScores(accuracy, macro_f1, per_class)


def evaluate(model: SpanPredictor, test: Sequence[AtepcSentence]) -> MetricReport:
    """Score a model on held-out sentences.

    Per-aspect copies of the same sentence are collapsed before extraction
    scoring (they share one tag sequence); polarity is scored on gold
    spans, one pair per copy, with a secondary score restricted to spans
    the extractor found.
    """
    if not test:
        raise ValueError("empty test set")

    unique: dict[tuple[str, ...], list[AtepcSentence]] = {}
    for sentence in test:
        unique.setdefault(sentence.tokens, []).append(sentence)

    pred_spans: dict[int, set[Span]] = {}
    gold_spans: dict[int, set[Span]] = {}
    pol_pred: list[Polarity] = []
    pol_gold: list[Polarity] = []
    pol_pred_found: list[Polarity] = []
    pol_gold_found: list[Polarity] = []
    for sid, (tokens, copies) in enumerate(unique.items()):
        found = set(model.predict_spans(tokens))
        pred_spans[sid] = found
        gold_spans[sid] = set(copies[0].aspect_spans())
        for copy in copies:
            span = copy.focused_span()
            if span is None:
                continue
            gold = copy.focused_polarity()
            predicted = model.predict_polarity(tokens, span)
            pol_pred.append(predicted)
            pol_gold.append(gold)
            if span in found:
                pol_pred_found.append(predicted)
                pol_gold_found.append(gold)

    precision, recall, f1 = span_f1(pred_spans, gold_spans)
    apc = apc_metrics(pol_pred, pol_gold)
    report = MetricReport(
        ate_precision=precision,
        ate_recall=recall,
        ate_f1=f1,
        apc_accuracy=apc.accuracy,
        apc_f1_macro=apc.macro_f1,
        apc_per_class=apc.per_class,
    )
    if pol_gold_found:
        apc_found = apc_metrics(pol_pred_found, pol_gold_found)
        report.apc_pred_span_accuracy = apc_found.accuracy
        report.apc_pred_span_f1_macro = apc_found.macro_f1
    return report


def gold_spans_from_tags(sentence: AtepcSentence) -> set[Span]:
    spans, _ = decode_bio(sentence.tags)
    return set(spans)


def render_table(reports: Mapping[str, MetricReport]) -> str:
    """Aligned two-column F1 table, one row per model."""
    name_width = max([len(name) for name in reports] + [len("model")])
    lines = [f"{'model'.ljust(name_width)}  {'ATE':>8}  {'APC':>8}"]
    for name, report in reports.items():
        lines.append(
            f"{name.ljust(name_width)}  {report.ate_f1:8.4f}  {report.apc_f1_macro:8.4f}"
        )
    return "\n".join(lines) + "\n"

"""Desk-scale benchmark: locality-focused model vs uniform-weight baseline.

Trains two identically seeded models on the same synthetic corpus and
split, differing only in the distance threshold: the focused model uses
the default window, the baseline an infinite one (uniform weights, which
makes the polarity head blind to which aspect is in focus).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import metrics
from .model import LcfModel, ModelConfig, Vocab
from .synth import generate_corpus
from .train import TrainConfig, TrainHistory, split, train


@dataclass(frozen=True)
class BenchmarkResult:
    seed: int
    focused: LcfModel
    focused_report: metrics.MetricReport
    focused_history: TrainHistory
    baseline: LcfModel
    baseline_report: metrics.MetricReport

    @property
    def apc_gap(self) -> float:
        return self.focused_report.apc_f1_macro - self.baseline_report.apc_f1_macro

    def passes(self, ate_min=0.90, apc_min=0.85, gap_min=0.01) -> bool:
        return (
            self.focused_report.ate_f1 >= ate_min
            and self.focused_report.apc_f1_macro >= apc_min
            and self.apc_gap >= gap_min
        )


def run_benchmark(seed: int, n_copies: int = 2500, log=None) -> BenchmarkResult:
    corpus = generate_corpus(n_copies, seed=seed)
    train_cfg = TrainConfig(seed=seed)
    train_split, test_split = split(corpus, train_cfg)
    vocab = Vocab.build(train_split)

    def fit(config: ModelConfig) -> tuple[LcfModel, TrainHistory, metrics.MetricReport]:
        model = LcfModel(config, vocab)
        model, history = train(model, corpus, train_cfg, log=log)
        return model, history, metrics.evaluate(model, test_split)

    focused, history, focused_report = fit(ModelConfig(vocab_size=len(vocab), seed=seed))
    baseline, _, baseline_report = fit(
        ModelConfig(vocab_size=len(vocab), srd_threshold=math.inf, seed=seed)
    )
    return BenchmarkResult(
        seed=seed,
        focused=focused,
        focused_report=focused_report,
        focused_history=history,
        baseline=baseline,
        baseline_report=baseline_report,
    )

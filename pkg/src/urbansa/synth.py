"""Synthetic benchmark corpus of templated urban park reviews.

Sentences are built from a 30-term aspect lexicon and polarity cue words.
About half the copies come from two-aspect sentences whose aspects carry
independently drawn polarities with each cue placed near its own aspect;
resolving those requires attending to the local context of the focused
aspect, which is exactly what the distance-weighted polarity head is for.
"""

from __future__ import annotations

import numpy as np

from .corpus import ApcRecord, AtepcSentence, Polarity, apc_to_atepc

ASPECT_LEXICON = (
    "trail",
    "playground",
    "trash",
    "parking",
    "bench",
    "fountain",
    "pond",
    "garden",
    "lawn",
    "restroom",
    "lighting",
    "view",
    "shade",
    "grass",
    "flowers",
    "pavilion",
    "court",
    "field",
    "gazebo",
    "slide",
    "swing",
    "signage",
    "fence",
    "bridge",
    "stream",
    "maintenance",
    "dog park",
    "picnic area",
    "bike rack",
    "splash pad",
)

CUE_WORDS = {
    Polarity.POSITIVE: ("beautiful", "clean", "lovely", "wonderful", "excellent", "safe"),
    Polarity.NEGATIVE: ("awful", "dirty", "broken", "terrible", "muddy", "unsafe"),
    Polarity.NEUTRAL: ("average", "ordinary", "acceptable", "unremarkable", "adequate", "plain"),
}

# {} slots: A = aspect term, C/D = first and second cue word; numbered per aspect.
SINGLE_TEMPLATES = (
    "the {A0} is {C0}",
    "the {A0} was {C0} and {D0} overall",
    "we found the {A0} rather {C0} today",
    "{C0} {A0} near the entrance",
    "the {A0} here is {C0} and {D0} honestly",
)

DUAL_TEMPLATES = (
    "the {A0} is {C0} and {D0} , though over in the far corner the {A1} is {C1} and {D1}",
    "the {A0} was {C0} and {D0} when we visited last weekend , while the {A1} seemed {C1} and {D1}",
    "{C0} and {D0} {A0} by the gate as you come in , yet further along the {A1} stays {C1} and {D1}",
    "the {A0} looked {C0} and {D0} on our morning walk , and near the exit the {A1} felt {C1} and {D1}",
)

POLARITIES = tuple(Polarity)


def _fill(
    template: str, aspects: list[str], cues: list[tuple[str, str]]
) -> tuple[tuple[str, ...], list[tuple[int, int]]]:
    """Expand a template into tokens plus the aspect spans it contains."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for word in template.split():
        if word.startswith("{A"):
            aspect_tokens = aspects[int(word[2])].split()
            spans.append((len(tokens), len(tokens) + len(aspect_tokens) - 1))
            tokens.extend(aspect_tokens)
        elif word.startswith("{C"):
            tokens.append(cues[int(word[2])][0])
        elif word.startswith("{D"):
            tokens.append(cues[int(word[2])][1])
        else:
            tokens.append(word)
    return tuple(tokens), spans


def generate_records(n_copies: int, seed: int, dual_fraction: float = 0.35) -> list[ApcRecord]:
    """Aspect records totalling exactly n_copies sentence copies.

    dual_fraction is the target share of copies contributed by two-aspect
    sentences (each of which yields two copies).
    """
    if n_copies < 1:
        raise ValueError("n_copies must be positive")
    rng = np.random.default_rng(seed)
    n_dual_sentences = int(round(dual_fraction * n_copies / 2))
    n_dual_sentences = min(n_dual_sentences, n_copies // 2)
    n_single_sentences = n_copies - 2 * n_dual_sentences

    plan = [2] * n_dual_sentences + [1] * n_single_sentences
    rng.shuffle(plan)

    records: list[ApcRecord] = []
    for n_aspects in plan:
        if n_aspects == 2:
            template = DUAL_TEMPLATES[rng.integers(len(DUAL_TEMPLATES))]
            idx = rng.choice(len(ASPECT_LEXICON), size=2, replace=False)
            aspects = [ASPECT_LEXICON[i] for i in idx]
        else:
            template = SINGLE_TEMPLATES[rng.integers(len(SINGLE_TEMPLATES))]
            aspects = [ASPECT_LEXICON[rng.integers(len(ASPECT_LEXICON))]]
        polarities = [POLARITIES[rng.integers(3)] for _ in range(n_aspects)]
        cues = []
        for polarity in polarities:
            pool = CUE_WORDS[polarity]
            first, second = rng.choice(len(pool), size=2, replace=False)
            cues.append((pool[first], pool[second]))
        tokens, spans = _fill(template, aspects, cues)
        for span, polarity in zip(spans, polarities):
            records.append(ApcRecord(tokens=tokens, aspect_span=span, polarity=polarity))
    return records


def generate_corpus(n_copies: int, seed: int, dual_fraction: float = 0.35) -> list[AtepcSentence]:
    return apc_to_atepc(generate_records(n_copies, seed, dual_fraction))

"""Desk-scale transformer encoder with local-context-focus polarity head.

One forward pass drives two heads off the same encoder states: a per-token
BIO tag head for aspect extraction and, when an aspect span is in focus, a
polarity head computed from distance-weighted (local-context-focus) states
pooled over the sequence.

Everything is plain numpy with hand-written backpropagation; float64
internally, checkpoints stored as little-endian float32.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import TAG_BEGIN, TAG_INSIDE, TAG_OUTSIDE, TAGS, AtepcSentence, Polarity, tokenize

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

# Logit column order of the two heads.
POLARITY_ORDER = (Polarity.POSITIVE, Polarity.NEGATIVE, Polarity.NEUTRAL)
POLARITY_INDEX = {p: i for i, p in enumerate(POLARITY_ORDER)}
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}

CHECKPOINT_MAGIC = b"LCFM"
CHECKPOINT_VERSION = 1

_KEY_MASK_BIAS = -1e30
_LN_EPS = 1e-5


class LcfMode(Enum):
    CDM = "CDM"
    CDW = "CDW"
    FUSION = "FUSION"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    max_len: int = 128
    srd_threshold: float = 3
    lcf_mode: LcfMode = LcfMode.CDW
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise ValueError("vocab_size must cover PAD and UNK")
        if self.d_model <= 0 or self.n_layers <= 0 or self.max_len <= 0:
            raise ValueError("d_model, n_layers, max_len must be positive")
        if self.n_heads <= 0 or self.d_model % self.n_heads != 0:
            raise ValueError("n_heads must be positive and divide d_model")
        if self.srd_threshold < 0:
            raise ValueError("srd_threshold must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def ffn_dim(self) -> int:
        return 4 * self.d_model

    def to_dict(self) -> dict:
        data = {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "max_len": self.max_len,
            "srd_threshold": self.srd_threshold,
            "lcf_mode": self.lcf_mode.value,
            "dropout": self.dropout,
            "seed": self.seed,
        }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        kwargs = dict(data)
        kwargs["lcf_mode"] = LcfMode(kwargs["lcf_mode"])
        return cls(**kwargs)


class Vocab:
    """Token/id table; ids 0 and 1 are reserved for PAD and UNK."""

    def __init__(self, tokens: Sequence[str]):
        if len(tokens) < 2 or tokens[0] != PAD_TOKEN or tokens[1] != UNK_TOKEN:
            raise ValueError("vocab must start with the PAD and UNK tokens")
        self.tokens = list(tokens)
        self.index = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocab contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(token, UNK_ID) for token in tokens]

    @classmethod
    def build(cls, sentences: Iterable[AtepcSentence]) -> "Vocab":
        """Vocabulary from training sentences, most frequent first."""
        counts: dict[str, int] = {}
        for sentence in sentences:
            for token in sentence.tokens:
                counts[token] = counts.get(token, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls([PAD_TOKEN, UNK_TOKEN] + ordered)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)


def srd(i: int, span: tuple[int, int]) -> int:
    """Token distance from the span, zero for every in-span position."""
    start, end = span
    if start > end or start < 0:
        raise ValueError(f"invalid span {span}")
    center = (start + end) // 2
    width = end - start + 1
    return max(0, abs(i - center) - width // 2)


def cdm_mask(n: int, span: tuple[int, int], alpha: float) -> np.ndarray:
    """Binary keep-mask: 1 where srd <= alpha, else 0."""
    distances = np.array([srd(i, span) for i in range(n)], dtype=np.float64)
    return (distances <= alpha).astype(np.float64)


def cdw_weights(n: int, span: tuple[int, int], alpha: float) -> np.ndarray:
    """Distance-decayed weights: 1 inside the window, 1-(srd-alpha)/n beyond."""
    distances = np.array([srd(i, span) for i in range(n)], dtype=np.float64)
    weights = np.ones(n, dtype=np.float64)
    far = distances > alpha
    weights[far] = 1.0 - (distances[far] - alpha) / n
    return weights


def lcf_weights(n: int, span: tuple[int, int], alpha: float, mode: LcfMode) -> np.ndarray:
    if mode is LcfMode.CDM:
        return cdm_mask(n, span, alpha)
    if mode is LcfMode.CDW:
        return cdw_weights(n, span, alpha)
    return 0.5 * (cdm_mask(n, span, alpha) + cdw_weights(n, span, alpha))


def decode_bio(tags: Sequence[str]) -> tuple[list[tuple[int, int]], int]:
    """Maximal spans from a BIO tag sequence, with tolerant repair.

    An I-ASP at the start or straight after O opens a new span instead of
    failing; the number of such repairs is returned alongside the spans.
    """
    spans: list[tuple[int, int]] = []
    repairs = 0
    start = None
    for i, tag in enumerate(tags):
        if tag not in TAGS:
            raise ValueError(f"unknown tag {tag!r} at position {i}")
        if tag == TAG_BEGIN:
            if start is not None:
                spans.append((start, i - 1))
            start = i
        elif tag == TAG_INSIDE:
            if start is None:
                repairs += 1
                start = i
        else:
            if start is not None:
                spans.append((start, i - 1))
                start = None
    if start is not None:
        spans.append((start, len(tags) - 1))
    return spans, repairs


@dataclass(frozen=True)
class AspectPrediction:
    term: str
    span: tuple[int, int]
    polarity: Polarity
    confidence: float

    def to_dict(self) -> dict:
        return {
            "term": self.term,
            "span": list(self.span),
            "polarity": self.polarity.value,
            "confidence": self.confidence,
        }


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _gelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = math.sqrt(2.0 / math.pi)
    inner = c * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), t


def _gelu_grad(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * c * (1.0 + 3 * 0.044715 * x**2)


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mean) * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def _layer_norm_backward(dy: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv, gamma = cache
    dxhat = dy * gamma
    dgamma = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    dbeta = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgamma, dbeta


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def _linear_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    din = x.shape[-1]
    dout = dy.shape[-1]
    x2 = x.reshape(-1, din)
    dy2 = dy.reshape(-1, dout)
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


class LcfModel:
    """Encoder plus tag and polarity heads; parameters live in a flat dict.

    The parameter dict's insertion order is the declared checkpoint order.
    """

    def __init__(self, config: ModelConfig, vocab: Vocab):
        if len(vocab) != config.vocab_size:
            raise ValueError(
                f"vocab size {len(vocab)} does not match config vocab_size {config.vocab_size}"
            )
        self.config = config
        self.vocab = vocab
        self.params = self._init_params()
        self._dropout_rng = np.random.default_rng((config.seed, 0xD0))
        self.encode_calls = 0

    def _init_params(self) -> dict[str, np.ndarray]:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        d, f = cfg.d_model, cfg.ffn_dim

        def xavier(fan_in: int, fan_out: int) -> np.ndarray:
            std = math.sqrt(2.0 / (fan_in + fan_out))
            return rng.normal(0.0, std, (fan_in, fan_out))

        params: dict[str, np.ndarray] = {}
        params["emb_tok"] = rng.normal(0.0, 0.02, (cfg.vocab_size, d))
        params["emb_pos"] = rng.normal(0.0, 0.02, (cfg.max_len, d))
        for i in range(cfg.n_layers):
            p = f"layer{i}"
            params[f"{p}_ln1_gamma"] = np.ones(d)
            params[f"{p}_ln1_beta"] = np.zeros(d)
            for name in ("wq", "wk", "wv", "wo"):
                params[f"{p}_attn_{name}"] = xavier(d, d)
                params[f"{p}_attn_b{name[1]}"] = np.zeros(d)
            params[f"{p}_ln2_gamma"] = np.ones(d)
            params[f"{p}_ln2_beta"] = np.zeros(d)
            params[f"{p}_ffn_w1"] = xavier(d, f)
            params[f"{p}_ffn_b1"] = np.zeros(f)
            params[f"{p}_ffn_w2"] = xavier(f, d)
            params[f"{p}_ffn_b2"] = np.zeros(d)
        params["final_ln_gamma"] = np.ones(d)
        params["final_ln_beta"] = np.zeros(d)
        params["tag_w"] = xavier(d, len(TAGS))
        params["tag_b"] = np.zeros(len(TAGS))
        params["pol_w"] = xavier(d, len(POLARITY_ORDER))
        params["pol_b"] = np.zeros(len(POLARITY_ORDER))
        return params

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(value) for name, value in self.params.items()}

    def _dropout_mask(self, shape: tuple[int, ...], train: bool) -> np.ndarray | None:
        p = self.config.dropout
        if not train or p == 0.0:
            return None
        keep = self._dropout_rng.random(shape) >= p
        return keep.astype(np.float64) / (1.0 - p)

    def _encode(self, ids: np.ndarray, lengths: np.ndarray, train: bool):
        """Single encoder pass shared by both heads."""
        self.encode_calls += 1
        cfg = self.config
        params = self.params
        B, T = ids.shape
        dk = cfg.d_model // cfg.n_heads

        key_mask = np.arange(T)[None, :] < lengths[:, None]
        key_bias = np.where(key_mask, 0.0, _KEY_MASK_BIAS)[:, None, None, :]

        x = params["emb_tok"][ids] + params["emb_pos"][:T][None, :, :]
        input_drop = self._dropout_mask(x.shape, train)
        if input_drop is not None:
            x = x * input_drop

        layer_caches = []
        for i in range(cfg.n_layers):
            p = f"layer{i}"
            x_in = x
            a_in, ln1_cache = _layer_norm(x_in, params[f"{p}_ln1_gamma"], params[f"{p}_ln1_beta"])
            q = _linear(a_in, params[f"{p}_attn_wq"], params[f"{p}_attn_bq"])
            k = _linear(a_in, params[f"{p}_attn_wk"], params[f"{p}_attn_bk"])
            v = _linear(a_in, params[f"{p}_attn_wv"], params[f"{p}_attn_bv"])
            qh = q.reshape(B, T, cfg.n_heads, dk).transpose(0, 2, 1, 3)
            kh = k.reshape(B, T, cfg.n_heads, dk).transpose(0, 2, 1, 3)
            vh = v.reshape(B, T, cfg.n_heads, dk).transpose(0, 2, 1, 3)
            scores = qh @ kh.swapaxes(-1, -2) / math.sqrt(dk) + key_bias
            attn = _softmax(scores)
            ctx = (attn @ vh).transpose(0, 2, 1, 3).reshape(B, T, cfg.d_model)
            attn_out = _linear(ctx, params[f"{p}_attn_wo"], params[f"{p}_attn_bo"])
            attn_drop = self._dropout_mask(attn_out.shape, train)
            if attn_drop is not None:
                attn_out = attn_out * attn_drop
            x_mid = x_in + attn_out

            f_in, ln2_cache = _layer_norm(x_mid, params[f"{p}_ln2_gamma"], params[f"{p}_ln2_beta"])
            h_pre = _linear(f_in, params[f"{p}_ffn_w1"], params[f"{p}_ffn_b1"])
            h, gelu_t = _gelu(h_pre)
            ff_out = _linear(h, params[f"{p}_ffn_w2"], params[f"{p}_ffn_b2"])
            ff_drop = self._dropout_mask(ff_out.shape, train)
            if ff_drop is not None:
                ff_out = ff_out * ff_drop
            x = x_mid + ff_out

            layer_caches.append(
                {
                    "a_in": a_in,
                    "ln1": ln1_cache,
                    "qh": qh,
                    "kh": kh,
                    "vh": vh,
                    "attn": attn,
                    "ctx": ctx,
                    "attn_drop": attn_drop,
                    "f_in": f_in,
                    "ln2": ln2_cache,
                    "h_pre": h_pre,
                    "h": h,
                    "gelu_t": gelu_t,
                    "ff_drop": ff_drop,
                }
            )

        states, final_cache = _layer_norm(x, params["final_ln_gamma"], params["final_ln_beta"])
        cache = {
            "ids": ids,
            "lengths": lengths,
            "input_drop": input_drop,
            "layers": layer_caches,
            "final_ln": final_cache,
            "states": states,
        }
        return states, cache

    def forward_batch(
        self,
        ids: np.ndarray,
        lengths: np.ndarray,
        spans: np.ndarray | None,
        train: bool = False,
    ):
        """Tag logits for every position plus polarity logits per focused row.

        ``spans`` is an int array (B, 2) of inclusive spans, with (-1, -1)
        for rows that have no focused aspect; pass None to skip the
        polarity head entirely. Returns (tag_logits, pol_logits, pol_rows,
        cache) where pol_rows maps polarity rows back to batch rows.
        """
        cfg = self.config
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        B, T = ids.shape
        if T > cfg.max_len:
            raise ValueError(f"sequence length {T} exceeds max_len {cfg.max_len}")
        if np.any(ids < 0) or np.any(ids >= cfg.vocab_size):
            raise ValueError("token id out of vocabulary range")

        states, cache = self._encode(ids, lengths, train)
        tag_logits = _linear(states, self.params["tag_w"], self.params["tag_b"])

        pol_logits = None
        pol_rows = None
        if spans is not None:
            spans = np.asarray(spans, dtype=np.int64)
            pol_rows = np.flatnonzero(spans[:, 0] >= 0)
            weights = np.zeros((B, T), dtype=np.float64)
            for b in pol_rows:
                start, end = int(spans[b, 0]), int(spans[b, 1])
                n = int(lengths[b])
                if not 0 <= start <= end < n:
                    raise ValueError(f"span {(start, end)} out of range for length {n}")
                weights[b, :n] = lcf_weights(n, (start, end), cfg.srd_threshold, cfg.lcf_mode)
            pooled = (weights[:, :, None] * states).sum(axis=1) / lengths[:, None]
            pooled = pooled[pol_rows]
            pol_logits = _linear(pooled, self.params["pol_w"], self.params["pol_b"])
            cache["lcf_weights"] = weights
            cache["pooled"] = pooled
            cache["pol_rows"] = pol_rows
        return tag_logits, pol_logits, pol_rows, cache

    def forward(
        self, token_ids: Sequence[int], focused_span: tuple[int, int] | None = None
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """Single-sequence forward: (n, 3) tag logits and optional polarity logits."""
        n = len(token_ids)
        if n == 0:
            raise ValueError("empty token sequence")
        ids = np.asarray(token_ids, dtype=np.int64)[None, :]
        lengths = np.array([n], dtype=np.int64)
        if focused_span is None:
            spans = None
        else:
            spans = np.array([focused_span], dtype=np.int64)
        tag_logits, pol_logits, _, _ = self.forward_batch(ids, lengths, spans, train=False)
        return tag_logits[0], None if pol_logits is None else pol_logits[0]

    def backward(
        self,
        cache: dict,
        dtag_logits: np.ndarray,
        dpol_logits: np.ndarray | None,
    ) -> dict[str, np.ndarray]:
        """Parameter gradients given upstream gradients on the head logits."""
        cfg = self.config
        params = self.params
        grads = self.zero_grads()
        states = cache["states"]
        ids = cache["ids"]
        lengths = cache["lengths"]
        B, T = ids.shape
        dk = cfg.d_model // cfg.n_heads

        dstates, dw, db = _linear_backward(dtag_logits, states, params["tag_w"])
        grads["tag_w"] += dw
        grads["tag_b"] += db

        if dpol_logits is not None:
            pooled = cache["pooled"]
            weights = cache["lcf_weights"]
            pol_rows = cache["pol_rows"]
            dpooled, dw, db = _linear_backward(dpol_logits, pooled, params["pol_w"])
            grads["pol_w"] += dw
            grads["pol_b"] += db
            dpooled_full = np.zeros((B, cfg.d_model))
            dpooled_full[pol_rows] = dpooled
            dstates = dstates + weights[:, :, None] * (
                dpooled_full[:, None, :] / lengths[:, None, None]
            )

        dx, dgamma, dbeta = _layer_norm_backward(dstates, cache["final_ln"])
        grads["final_ln_gamma"] += dgamma
        grads["final_ln_beta"] += dbeta

        for i in reversed(range(cfg.n_layers)):
            p = f"layer{i}"
            layer = cache["layers"][i]

            dff_out = dx if layer["ff_drop"] is None else dx * layer["ff_drop"]
            dh, dw2, db2 = _linear_backward(dff_out, layer["h"], params[f"{p}_ffn_w2"])
            grads[f"{p}_ffn_w2"] += dw2
            grads[f"{p}_ffn_b2"] += db2
            dh_pre = dh * _gelu_grad(layer["h_pre"], layer["gelu_t"])
            df_in, dw1, db1 = _linear_backward(dh_pre, layer["f_in"], params[f"{p}_ffn_w1"])
            grads[f"{p}_ffn_w1"] += dw1
            grads[f"{p}_ffn_b1"] += db1
            dx_mid_ln, dgamma, dbeta = _layer_norm_backward(df_in, layer["ln2"])
            grads[f"{p}_ln2_gamma"] += dgamma
            grads[f"{p}_ln2_beta"] += dbeta
            dx_mid = dx + dx_mid_ln

            dattn_out = dx_mid if layer["attn_drop"] is None else dx_mid * layer["attn_drop"]
            dctx, dwo, dbo = _linear_backward(dattn_out, layer["ctx"], params[f"{p}_attn_wo"])
            grads[f"{p}_attn_wo"] += dwo
            grads[f"{p}_attn_bo"] += dbo

            dctx_h = dctx.reshape(B, T, cfg.n_heads, dk).transpose(0, 2, 1, 3)
            attn = layer["attn"]
            dattn = dctx_h @ layer["vh"].swapaxes(-1, -2)
            dvh = attn.swapaxes(-1, -2) @ dctx_h
            dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
            dscores /= math.sqrt(dk)
            dqh = dscores @ layer["kh"]
            dkh = dscores.swapaxes(-1, -2) @ layer["qh"]

            def merge(heads: np.ndarray) -> np.ndarray:
                return heads.transpose(0, 2, 1, 3).reshape(B, T, cfg.d_model)

            da_in = np.zeros_like(layer["a_in"])
            for dmat, name in ((dqh, "wq"), (dkh, "wk"), (dvh, "wv")):
                dmerged = merge(dmat)
                dpart, dwm, dbm = _linear_backward(
                    dmerged, layer["a_in"], params[f"{p}_attn_{name}"]
                )
                grads[f"{p}_attn_{name}"] += dwm
                grads[f"{p}_attn_b{name[1]}"] += dbm
                da_in += dpart

            dx_in_ln, dgamma, dbeta = _layer_norm_backward(da_in, layer["ln1"])
            grads[f"{p}_ln1_gamma"] += dgamma
            grads[f"{p}_ln1_beta"] += dbeta
            dx = dx_mid + dx_in_ln

        if cache["input_drop"] is not None:
            dx = dx * cache["input_drop"]
        np.add.at(grads["emb_tok"], ids, dx)
        grads["emb_pos"][:T] += dx.sum(axis=0)
        return grads

    # Prediction interface (also implemented by evaluation test doubles).

    def predict_tags(self, tokens: Sequence[str]) -> list[str]:
        ids = self.vocab.encode(tokens)
        tag_logits, _ = self.forward(ids)
        return [TAGS[i] for i in tag_logits.argmax(axis=-1)]

    def predict_spans(self, tokens: Sequence[str]) -> list[tuple[int, int]]:
        spans, _ = decode_bio(self.predict_tags(tokens))
        return spans

    def predict_polarity_scored(
        self, tokens: Sequence[str], span: tuple[int, int]
    ) -> tuple[Polarity, float]:
        ids = self.vocab.encode(tokens)
        _, pol_logits = self.forward(ids, focused_span=span)
        probs = _softmax(pol_logits)
        best = int(probs.argmax())
        return POLARITY_ORDER[best], float(probs[best])

    def predict_polarity(self, tokens: Sequence[str], span: tuple[int, int]) -> Polarity:
        return self.predict_polarity_scored(tokens, span)[0]

    def predict(self, text: str) -> list[AspectPrediction]:
        """Extract aspect spans then classify each, ordered by span start."""
        tokens = tokenize(text)
        if not tokens:
            return []
        predictions = []
        for span in self.predict_spans(tokens):
            polarity, confidence = self.predict_polarity_scored(tokens, span)
            start, end = span
            predictions.append(
                AspectPrediction(
                    term=" ".join(tokens[start : end + 1]),
                    span=span,
                    polarity=polarity,
                    confidence=confidence,
                )
            )
        return predictions

    def check_finite(self) -> None:
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise FloatingPointError(f"non-finite values in parameter {name}")

    # Checkpoint format: magic, version, length-prefixed config JSON, then
    # raw float32 little-endian tensor data in parameter-dict order.

    def to_bytes(self) -> bytes:
        blob = bytearray()
        blob += CHECKPOINT_MAGIC
        blob += struct.pack("<I", CHECKPOINT_VERSION)
        config_bytes = json.dumps(self.config.to_dict(), sort_keys=True).encode("utf-8")
        blob += struct.pack("<I", len(config_bytes))
        blob += config_bytes
        for value in self.params.values():
            blob += value.astype("<f4").tobytes()
        return bytes(blob)

    def manifest_json(self) -> str:
        manifest = {
            "format_version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "vocab": self.vocab.tokens,
        }
        return json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        Path(str(path) + ".json").write_text(self.manifest_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LcfModel":
        path = Path(path)
        blob = path.read_bytes()
        if blob[:4] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        (version,) = struct.unpack("<I", blob[4:8])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (config_len,) = struct.unpack("<I", blob[8:12])
        config = ModelConfig.from_dict(json.loads(blob[12 : 12 + config_len].decode("utf-8")))
        manifest_path = Path(str(path) + ".json")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        vocab = Vocab(manifest["vocab"])
        model = cls(config, vocab)
        offset = 12 + config_len
        for name, value in model.params.items():
            count = value.size
            raw = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            model.params[name] = raw.astype(np.float64).reshape(value.shape)
            offset += count * 4
        if offset != len(blob):
            raise ValueError(f"{path}: trailing bytes in checkpoint")
        return model

    def with_config(self, **overrides) -> "LcfModel":
        """Copy of this model with config fields replaced, sharing no arrays."""
        clone = LcfModel(replace(self.config, **overrides), self.vocab)
        for name in clone.params:
            clone.params[name] = self.params[name].copy()
        return clone

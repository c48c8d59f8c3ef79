"""Key-sentence agreement model: three LSTMs with word-by-word attention.

An article is reduced to its k sentences most cosine-similar to the question
(average word embeddings, stopwords skipped), concatenated in similarity
order with a zero-embedding boundary token. A question LSTM and an article
LSTM encode the two token sequences; a third matching LSTM consumes, at each
article position k, the concatenation of the article hidden state h^d_k and
an attention-weighted summary a_k of the question states, where

    e_kj   = we . tanh(Wq h^q_j + Wd h^d_k + Wm h^m_{k-1})
    alpha_k = softmax_j(e_kj)
    a_k    = sum_j alpha_kj h^q_j

Two independent sigmoid heads on the final matching state produce
score_agree and score_disagree; the signed agreement score is score_agree
when it strictly exceeds score_disagree and -score_disagree otherwise (ties
included), so it always lands in (-1, 1) with sign matching the winning head.

Everything here is plain numpy with hand-written backpropagation; a central
finite-difference gradient check validates every parameter block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import BinaryReader, BinaryWriter
from .corpus import Article, Question, StanceLabel, tokenize
from .embeddings import EmbeddingStore, average_embedding, cosine

# Separates concatenated key sentences in the article-side sequence; it is
# always "in vocabulary" with an all-zero embedding.
BOUNDARY_TOKEN = "<sb>"

_GATES = 4  # i, f, o, c blocks stacked row-wise in each weight matrix


class StanceNetError(ValueError):
    """Raised for invalid configuration or training input."""


@dataclass
class StanceNetConfig:
    embed_dim: int = 300
    hidden_dim: int = 100
    key_sentences: int = 3
    max_question_tokens: int = 30
    max_article_tokens: int = 120
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    grad_clip: float = 5.0
    init_scale: float = 0.08
    seed: int = 13
    # Optional loss weights per class, e.g. {"disagree": 4.0}; off by default.
    class_weights: dict[str, float] | None = None


@dataclass
class LstmParams:
    """Per-gate views over one LSTM's stacked parameter arrays."""

    Wi: np.ndarray
    Wf: np.ndarray
    Wo: np.ndarray
    Wc: np.ndarray
    Vi: np.ndarray
    Vf: np.ndarray
    Vo: np.ndarray
    Vc: np.ndarray
    bi: np.ndarray
    bf: np.ndarray
    bo: np.ndarray
    bc: np.ndarray


@dataclass
class AttentionParams:
    we: np.ndarray
    Wq: np.ndarray
    Wd: np.ndarray
    Wm: np.ndarray


@dataclass(frozen=True)
class AgreementScores:
    score_agree: float
    score_disagree: float

    @property
    def beta(self) -> float:
        if self.score_agree > self.score_disagree:
            return self.score_agree
        return -self.score_disagree


@dataclass(frozen=True)
class KeySentenceSelection:
    """Top-k sentences with their similarities, nonincreasing order."""

    sentences: tuple[tuple[str, float], ...]
    k: int

    def texts(self) -> list[str]:
        return [text for text, _ in self.sentences]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Clipping keeps exp() in range; beyond +-500 the result saturates anyway.
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _softmax(e: np.ndarray) -> np.ndarray:
    shifted = np.exp(e - e.max())
    return shifted / shifted.sum()


def _param_layout(config: StanceNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, l = config.hidden_dim, config.embed_dim
    layout: list[tuple[str, tuple[int, ...]]] = []
    for name, input_dim in (("q", l), ("d", l), ("m", 2 * d)):
        layout.append((f"{name}.W", (_GATES * d, input_dim)))
        layout.append((f"{name}.V", (_GATES * d, d)))
        layout.append((f"{name}.b", (_GATES * d,)))
    layout.append(("attn.we", (d,)))
    layout.append(("attn.Wq", (d, d)))
    layout.append(("attn.Wd", (d, d)))
    layout.append(("attn.Wm", (d, d)))
    layout.append(("agree.w", (d,)))
    layout.append(("agree.b", (1,)))
    layout.append(("disagree.w", (d,)))
    layout.append(("disagree.b", (1,)))
    return layout


class MatchLstmModel:
    """Parameter container plus forward/backward passes."""

    def __init__(self, config: StanceNetConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: StanceNetConfig, rng: np.random.Generator | None = None) -> "MatchLstmModel":
        rng = rng or np.random.default_rng(config.seed)
        params = {
            name: rng.uniform(-config.init_scale, config.init_scale, size=shape)
            for name, shape in _param_layout(config)
        }
        return cls(config, params)

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(name, self.params[name]) for name, _ in _param_layout(self.config)]

    def _lstm_view(self, prefix: str) -> LstmParams:
        d = self.config.hidden_dim
        W, V, b = (self.params[f"{prefix}.{part}"] for part in ("W", "V", "b"))
        rows = [slice(g * d, (g + 1) * d) for g in range(_GATES)]
        return LstmParams(
            Wi=W[rows[0]], Wf=W[rows[1]], Wo=W[rows[2]], Wc=W[rows[3]],
            Vi=V[rows[0]], Vf=V[rows[1]], Vo=V[rows[2]], Vc=V[rows[3]],
            bi=b[rows[0]], bf=b[rows[1]], bo=b[rows[2]], bc=b[rows[3]],
        )

    @property
    def qlstm(self) -> LstmParams:
        return self._lstm_view("q")

    @property
    def dlstm(self) -> LstmParams:
        return self._lstm_view("d")

    @property
    def mlstm(self) -> LstmParams:
        return self._lstm_view("m")

    @property
    def attention(self) -> AttentionParams:
        return AttentionParams(
            we=self.params["attn.we"],
            Wq=self.params["attn.Wq"],
            Wd=self.params["attn.Wd"],
            Wm=self.params["attn.Wm"],
        )


def lstm_step(
    p: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update; returns (h_k, c_k)."""
    i = _sigmoid(p.Wi @ x + p.Vi @ h_prev + p.bi)
    f = _sigmoid(p.Wf @ x + p.Vf @ h_prev + p.bf)
    o = _sigmoid(p.Wo @ x + p.Vo @ h_prev + p.bo)
    g = np.tanh(p.Wc @ x + p.Vc @ h_prev + p.bc)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def attention_step(
    hq_all: np.ndarray, hd_k: np.ndarray, hm_prev: np.ndarray, attn: AttentionParams
) -> tuple[np.ndarray, np.ndarray]:
    """Attention summary a_k over question states and its weights alpha_k."""
    if hq_all.ndim != 2 or hq_all.shape[0] < 1:
        raise StanceNetError("attention requires at least one question state")
    pre = np.tanh(hq_all @ attn.Wq.T + attn.Wd @ hd_k + attn.Wm @ hm_prev)
    energies = pre @ attn.we
    alpha = _softmax(energies)
    return alpha @ hq_all, alpha


# ---------------------------------------------------------------------------
# Forward/backward internals. Caches hold every intermediate the reverse pass
# needs; everything is float64 so the finite-difference check is meaningful.
# ---------------------------------------------------------------------------


class _LstmStepCache:
    __slots__ = ("x", "h_prev", "c_prev", "i", "f", "o", "g", "c", "tanh_c")

    def __init__(self, x, h_prev, c_prev, i, f, o, g, c, tanh_c):
        self.x = x
        self.h_prev = h_prev
        self.c_prev = c_prev
        self.i = i
        self.f = f
        self.o = o
        self.g = g
        self.c = c
        self.tanh_c = tanh_c


def _stacked(params: dict[str, np.ndarray], prefix: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return params[f"{prefix}.W"], params[f"{prefix}.V"], params[f"{prefix}.b"]


def _lstm_cell(z, x, h_prev, c_prev, d) -> tuple[np.ndarray, np.ndarray, _LstmStepCache]:
    """Gate math given the stacked pre-activation z = Wx + Vh_prev + b."""
    gates = _sigmoid(z[: 3 * d])
    i = gates[:d]
    f = gates[d : 2 * d]
    o = gates[2 * d :]
    g = np.tanh(z[3 * d :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, _LstmStepCache(x, h_prev, c_prev, i, f, o, g, c, tanh_c)


def _lstm_step_stacked(W, V, b, d, x, h_prev, c_prev) -> tuple[np.ndarray, np.ndarray, _LstmStepCache]:
    return _lstm_cell(W @ x + V @ h_prev + b, x, h_prev, c_prev, d)


def _lstm_step_backward(
    W, V, d, cache: _LstmStepCache, dh: np.ndarray, dc_next: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dz, dx, dh_prev, dc_prev, gW_update inputs) pieces.

    dz is the gradient at the stacked pre-activations, from which the caller
    accumulates gW += outer(dz, x), gV += outer(dz, h_prev), gb += dz.
    """
    do = dh * cache.tanh_c
    dc = dc_next + dh * cache.o * (1.0 - cache.tanh_c**2)
    di = dc * cache.g
    df = dc * cache.c_prev
    dg = dc * cache.i
    dc_prev = dc * cache.f
    dz = np.concatenate(
        [
            di * cache.i * (1.0 - cache.i),
            df * cache.f * (1.0 - cache.f),
            do * cache.o * (1.0 - cache.o),
            dg * (1.0 - cache.g**2),
        ]
    )
    dx = W.T @ dz
    dh_prev = V.T @ dz
    return dz, dx, dh_prev, dc_prev


def _run_lstm(W, V, b, d, xs: np.ndarray) -> tuple[np.ndarray, list[_LstmStepCache]]:
    steps = len(xs)
    hs = np.empty((steps, d), dtype=np.float64)
    caches: list[_LstmStepCache] = []
    h = np.zeros(d, dtype=np.float64)
    c = np.zeros(d, dtype=np.float64)
    # One matmul for every step's input projection; the recurrent V @ h term
    # is the only per-step matvec left.
    wx = xs @ W.T + b
    for t in range(steps):
        h, c, cache = _lstm_cell(wx[t] + V @ h, xs[t], h, c, d)
        hs[t] = h
        caches.append(cache)
    return hs, caches


def _lstm_backward(
    W, V, d, caches: list[_LstmStepCache], dh_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backprop a whole sequence given per-step output gradients."""
    gW = np.zeros_like(W)
    gV = np.zeros_like(V)
    gb = np.zeros(W.shape[0], dtype=np.float64)
    dh_next = np.zeros(d, dtype=np.float64)
    dc_next = np.zeros(d, dtype=np.float64)
    for t in range(len(caches) - 1, -1, -1):
        cache = caches[t]
        dz, _, dh_prev, dc_prev = _lstm_step_backward(W, V, d, cache, dh_out[t] + dh_next, dc_next)
        gW += np.outer(dz, cache.x)
        gV += np.outer(dz, cache.h_prev)
        gb += dz
        dh_next = dh_prev
        dc_next = dc_prev
    return gW, gV, gb


class _MatchTape:
    """Every intermediate of one full forward pass."""

    __slots__ = (
        "xq", "xd", "hq", "hd", "hm", "q_caches", "d_caches", "m_caches",
        "attn_tanh", "alphas", "hm_prevs", "m_inputs", "s_agree", "s_disagree",
        "logit_agree", "logit_disagree",
    )


def _forward_tape(model: MatchLstmModel, xq: np.ndarray, xd: np.ndarray) -> _MatchTape:
    d = model.config.hidden_dim
    p = model.params
    tape = _MatchTape()
    tape.xq, tape.xd = xq, xd
    tape.hq, tape.q_caches = _run_lstm(*_stacked(p, "q"), d, xq)
    tape.hd, tape.d_caches = _run_lstm(*_stacked(p, "d"), d, xd)

    Wq, Wd, Wm, we = p["attn.Wq"], p["attn.Wd"], p["attn.Wm"], p["attn.we"]
    pq = tape.hq @ Wq.T  # (m, d), shared across article positions
    wd_hd = tape.hd @ Wd.T  # (n, d), one matmul instead of n matvecs
    mW, mV, mb = _stacked(p, "m")
    mW_hd = tape.hd @ mW[:, :d].T + mb  # article half of the mLSTM input

    n = len(xd)
    tape.hm = np.empty((n, d), dtype=np.float64)
    tape.m_caches = []
    tape.attn_tanh = []
    tape.alphas = []
    tape.hm_prevs = []
    tape.m_inputs = []
    hm = np.zeros(d, dtype=np.float64)
    cm = np.zeros(d, dtype=np.float64)
    for k in range(n):
        pre = np.tanh(pq + wd_hd[k] + Wm @ hm)
        alpha = _softmax(pre @ we)
        a_k = alpha @ tape.hq
        m_k = np.concatenate([tape.hd[k], a_k])
        tape.attn_tanh.append(pre)
        tape.alphas.append(alpha)
        tape.hm_prevs.append(hm)
        tape.m_inputs.append(m_k)
        z = mW_hd[k] + mW[:, d:] @ a_k + mV @ hm
        hm, cm, cache = _lstm_cell(z, m_k, hm, cm, d)
        tape.m_caches.append(cache)
        tape.hm[k] = hm

    tape.logit_agree = float(p["agree.w"] @ hm + p["agree.b"][0])
    tape.logit_disagree = float(p["disagree.w"] @ hm + p["disagree.b"][0])
    tape.s_agree = float(_sigmoid(np.array([tape.logit_agree]))[0])
    tape.s_disagree = float(_sigmoid(np.array([tape.logit_disagree]))[0])
    return tape


def _bce(score: float, target: float) -> float:
    s = min(max(score, 1e-12), 1.0 - 1e-12)
    return -(target * math.log(s) + (1.0 - target) * math.log(1.0 - s))


def _loss_from_tape(tape: _MatchTape, target_agree: float, target_disagree: float, weight: float) -> float:
    return weight * (_bce(tape.s_agree, target_agree) + _bce(tape.s_disagree, target_disagree))


def _backward_tape(
    model: MatchLstmModel,
    tape: _MatchTape,
    target_agree: float,
    target_disagree: float,
    weight: float,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate dLoss/dparam into `grads` for one example."""
    d = model.config.hidden_dim
    p = model.params
    Wq, Wd, Wm, we = p["attn.Wq"], p["attn.Wd"], p["attn.Wm"], p["attn.we"]
    mW, mV, _ = _stacked(p, "m")

    dlogit_a = weight * (tape.s_agree - target_agree)
    dlogit_d = weight * (tape.s_disagree - target_disagree)
    hm_last = tape.hm[-1]
    grads["agree.w"] += dlogit_a * hm_last
    grads["agree.b"][0] += dlogit_a
    grads["disagree.w"] += dlogit_d * hm_last
    grads["disagree.b"][0] += dlogit_d

    dhq_acc = np.zeros_like(tape.hq)
    dhd_acc = np.zeros_like(tape.hd)
    dpq_acc = np.zeros_like(tape.hq)

    dh_chain = dlogit_a * p["agree.w"] + dlogit_d * p["disagree.w"]
    dc_chain = np.zeros(d, dtype=np.float64)
    for k in range(len(tape.xd) - 1, -1, -1):
        cache = tape.m_caches[k]
        dz, dm_k, dh_prev_lstm, dc_chain = _lstm_step_backward(mW, mV, d, cache, dh_chain, dc_chain)
        grads["m.W"] += np.outer(dz, cache.x)
        grads["m.V"] += np.outer(dz, cache.h_prev)
        grads["m.b"] += dz

        dhd_acc[k] += dm_k[:d]
        da = dm_k[d:]

        alpha = tape.alphas[k]
        pre = tape.attn_tanh[k]
        dalpha = tape.hq @ da
        dhq_acc += np.outer(alpha, da)
        de = alpha * (dalpha - float(alpha @ dalpha))
        grads["attn.we"] += pre.T @ de
        dpre = np.outer(de, we) * (1.0 - pre**2)
        dpq_acc += dpre
        dsum = dpre.sum(axis=0)
        grads["attn.Wd"] += np.outer(dsum, tape.hd[k])
        dhd_acc[k] += Wd.T @ dsum
        grads["attn.Wm"] += np.outer(dsum, tape.hm_prevs[k])
        dh_chain = dh_prev_lstm + Wm.T @ dsum

    grads["attn.Wq"] += dpq_acc.T @ tape.hq
    dhq_acc += dpq_acc @ Wq

    for prefix, caches, dh_out in (("d", tape.d_caches, dhd_acc), ("q", tape.q_caches, dhq_acc)):
        W, V, _ = _stacked(p, prefix)
        gW, gV, gb = _lstm_backward(W, V, d, caches, dh_out)
        grads[f"{prefix}.W"] += gW
        grads[f"{prefix}.V"] += gV
        grads[f"{prefix}.b"] += gb


# ---------------------------------------------------------------------------
# Public inference API
# ---------------------------------------------------------------------------


def sequence_vectors(tokens: list[str], store: EmbeddingStore, max_len: int) -> np.ndarray:
    """Embedding rows for a token sequence; OOV skipped, boundary = zeros."""
    rows = []
    for token in tokens:
        if token == BOUNDARY_TOKEN:
            rows.append(np.zeros(store.dim, dtype=np.float64))
            continue
        vec = store.lookup(token)
        if vec is not None:
            rows.append(vec)
        if len(rows) >= max_len:
            break
    if not rows:
        return np.empty((0, store.dim), dtype=np.float64)
    return np.stack(rows[:max_len])


def select_key_sentences(
    q: Question, d: Article, k: int, store: EmbeddingStore
) -> KeySentenceSelection:
    """The k article sentences most similar to the question, similarity order.

    Similarity is the cosine between average embeddings (stopwords skipped).
    Sentences with no embeddable content, or any sentence when the question
    itself has none, score -2 and sort last; ties keep document order.
    """
    if k < 1:
        raise StanceNetError("k must be >= 1")
    q_vec = average_embedding(q.tokens, store, skip_stopwords=True)
    scored: list[tuple[float, int, str]] = []
    for idx, sentence in enumerate(d.sentences):
        s_vec = average_embedding(tokenize(sentence), store, skip_stopwords=True)
        if q_vec is None or s_vec is None:
            sim = -2.0
        else:
            sim = cosine(q_vec, s_vec)
        scored.append((sim, idx, sentence))
    scored.sort(key=lambda item: (-item[0], item[1]))
    top = scored[:k]
    return KeySentenceSelection(
        sentences=tuple((text, sim) for sim, _, text in top),
        k=k,
    )


def key_sentence_tokens(selection: KeySentenceSelection) -> list[str]:
    """Concatenate selected sentences with boundary tokens, similarity order."""
    tokens: list[str] = []
    for idx, (text, _) in enumerate(selection.sentences):
        if idx:
            tokens.append(BOUNDARY_TOKEN)
        tokens.extend(tokenize(text))
    return tokens


def match_forward(
    model: MatchLstmModel,
    q_tokens: list[str],
    keysent_tokens: list[str],
    store: EmbeddingStore,
) -> AgreementScores:
    """Score one (question tokens, key-sentence tokens) pair.

    When either side has no in-vocabulary content the model cannot run; the
    defined fallback is score_agree = score_disagree = 0.5, which the tie
    rule maps to beta = -0.5.
    """
    xq = sequence_vectors(q_tokens, store, model.config.max_question_tokens)
    xd = sequence_vectors(keysent_tokens, store, model.config.max_article_tokens)
    return forward_vectors(model, xq, xd)


def forward_vectors(model: MatchLstmModel, xq: np.ndarray, xd: np.ndarray) -> AgreementScores:
    if len(xq) == 0 or len(xd) == 0:
        return AgreementScores(score_agree=0.5, score_disagree=0.5)
    tape = _forward_tape(model, xq, xd)
    # Keep head outputs strictly inside (0, 1) even under float saturation so
    # |beta| < 1 holds by construction.
    tiny = 1e-12
    return AgreementScores(
        score_agree=min(max(tape.s_agree, tiny), 1.0 - tiny),
        score_disagree=min(max(tape.s_disagree, tiny), 1.0 - tiny),
    )


def infer_pair(
    model: MatchLstmModel,
    q: Question,
    d: Article,
    store: EmbeddingStore,
) -> tuple[AgreementScores, KeySentenceSelection]:
    selection = select_key_sentences(q, d, model.config.key_sentences, store)
    scores = match_forward(model, q.tokens, key_sentence_tokens(selection), store)
    return scores, selection


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


_TARGETS = {
    StanceLabel.AGREE: (1.0, 0.0),
    StanceLabel.DISAGREE: (0.0, 1.0),
    StanceLabel.DISCUSS: (0.0, 0.0),
}


@dataclass(frozen=True)
class TrainingExample:
    """One gold-related pair, already reduced to token sequences."""

    q_tokens: tuple[str, ...]
    d_tokens: tuple[str, ...]
    label: StanceLabel


def build_training_examples(
    pairs,
    store,
    embeddings: EmbeddingStore,
    k: int,
) -> list[TrainingExample]:
    """Reduce gold-related stance pairs to key-sentence training examples."""
    examples = []
    for pair in pairs:
        if pair.label not in _TARGETS:
            continue
        article = store[pair.article_id]
        selection = select_key_sentences(pair.question, article, k, embeddings)
        examples.append(
            TrainingExample(
                q_tokens=tuple(pair.question.tokens),
                d_tokens=tuple(key_sentence_tokens(selection)),
                label=pair.label,
            )
        )
    return examples


class _Adam:
    """Adaptive-moment optimizer over the named parameter dict."""

    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, arr in params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            arr -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def _example_weight(label: StanceLabel, config: StanceNetConfig) -> float:
    if not config.class_weights:
        return 1.0
    return float(config.class_weights.get(label.value, 1.0))


def train_stance(
    examples: list[TrainingExample],
    embeddings: EmbeddingStore,
    config: StanceNetConfig | None = None,
) -> tuple[MatchLstmModel, list[float]]:
    """Train the agreement model; returns (model, per-epoch mean losses).

    Deterministic given the config seed: initialization, epoch shuffling, and
    batch reduction order are all driven by one seeded generator, so two runs
    produce byte-identical serialized models.
    """
    config = config or StanceNetConfig()
    if not examples:
        raise StanceNetError("empty training set")
    rng = np.random.default_rng(config.seed)
    model = MatchLstmModel.initialize(config, rng)

    prepared = []
    for ex in examples:
        xq = sequence_vectors(list(ex.q_tokens), embeddings, config.max_question_tokens)
        xd = sequence_vectors(list(ex.d_tokens), embeddings, config.max_article_tokens)
        if len(xq) == 0 or len(xd) == 0:
            continue  # the fallback path carries no gradient
        t_agree, t_disagree = _TARGETS[ex.label]
        prepared.append((xq, xd, t_agree, t_disagree, _example_weight(ex.label, config)))
    if not prepared:
        raise StanceNetError("no training example has embeddable content on both sides")

    optimizer = _Adam(model.params, config.learning_rate)
    history: list[float] = []
    indices = np.arange(len(prepared))
    for _ in range(config.epochs):
        rng.shuffle(indices)
        epoch_loss = 0.0
        for start in range(0, len(indices), config.batch_size):
            batch = indices[start : start + config.batch_size]
            grads = {name: np.zeros_like(arr) for name, arr in model.params.items()}
            batch_loss = 0.0
            for idx in batch:
                xq, xd, t_agree, t_disagree, weight = prepared[idx]
                tape = _forward_tape(model, xq, xd)
                batch_loss += _loss_from_tape(tape, t_agree, t_disagree, weight)
                _backward_tape(model, tape, t_agree, t_disagree, weight, grads)
            inv = 1.0 / len(batch)
            for g in grads.values():
                g *= inv
            _clip_global_norm(grads, config.grad_clip)
            optimizer.step(model.params, grads)
            epoch_loss += batch_loss
        history.append(epoch_loss / len(prepared))
    return model, history


def pair_loss(
    model: MatchLstmModel,
    xq: np.ndarray,
    xd: np.ndarray,
    target_agree: float,
    target_disagree: float,
) -> float:
    tape = _forward_tape(model, xq, xd)
    return _loss_from_tape(tape, target_agree, target_disagree, 1.0)


def gradient_check(
    model: MatchLstmModel,
    xq: np.ndarray,
    xd: np.ndarray,
    target_agree: float = 1.0,
    target_disagree: float = 0.0,
    step: float = 1e-4,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Perturbs every entry of every parameter array, so all LSTM gate blocks,
    the four attention parameters, and both heads are covered. Intended for
    tiny configurations only.
    """
    tape = _forward_tape(model, xq, xd)
    grads = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    _backward_tape(model, tape, target_agree, target_disagree, 1.0, grads)

    worst = 0.0
    for name, arr in model.named_parameters():
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            plus = pair_loss(model, xq, xd, target_agree, target_disagree)
            flat[idx] = original - step
            minus = pair_loss(model, xq, xd, target_agree, target_disagree)
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            analytic = gflat[idx]
            denom = max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# Serialization ("MLSTM" container section)
# ---------------------------------------------------------------------------


def serialize_stancenet(model: MatchLstmModel) -> bytes:
    w = BinaryWriter()
    cfg = model.config
    w.u32(cfg.embed_dim)
    w.u32(cfg.hidden_dim)
    w.u32(cfg.key_sentences)
    w.u32(cfg.max_question_tokens)
    w.u32(cfg.max_article_tokens)
    layout = _param_layout(cfg)
    w.u32(len(layout))
    for name, shape in layout:
        w.text(name)
        w.u32(len(shape))
        for dim in shape:
            w.u32(dim)
        w.f64_array(model.params[name].reshape(-1))
    return w.getvalue()


def deserialize_stancenet(payload: bytes) -> MatchLstmModel:
    r = BinaryReader(payload)
    config = StanceNetConfig(
        embed_dim=r.u32(),
        hidden_dim=r.u32(),
        key_sentences=r.u32(),
        max_question_tokens=r.u32(),
        max_article_tokens=r.u32(),
    )
    count = r.u32()
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.text()
        ndim = r.u32()
        shape = tuple(r.u32() for _ in range(ndim))
        params[name] = r.f64_array().reshape(shape)
    r.expect_end()
    expected = dict(_param_layout(config))
    if set(params) != set(expected) or any(params[k].shape != expected[k] for k in expected):
        raise StanceNetError("serialized parameter layout mismatch")
    return MatchLstmModel(config, params)

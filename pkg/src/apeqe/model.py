"""A small factored encoder-decoder with additive attention.

Forward and backward passes are written out by hand on plain numpy
arrays, which keeps training fully deterministic for a fixed seed and
lets the analytic gradients be checked directly against central finite
differences.  Input factor embeddings are concatenated per token; the
encoder is a single-layer bidirectional GRU and the decoder a GRU whose
input is the previous target embedding concatenated with the attention
context.

Training precision is 32-bit by default; the 64-bit mode exists for
gradient checks and bit-stability tests.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID, Vocabulary
from .errors import NumericError, ShapeError
from .inputs import FactoredSentence, FactoredToken
from .search import SearchHypothesis, beam_search as _generic_beam_search

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"APEQE-CKPT-v1\n"


# ---------------------------------------------------------------------------
# Configuration and parameters


@dataclass(frozen=True)
class ModelConfig:
    """Shapes of one model; factor 0 is the surface form."""

    factor_vocab_sizes: tuple[int, ...]
    factor_dims: tuple[int, ...]
    tgt_vocab_size: int
    tgt_embed_dim: int = 64
    hidden_dim: int = 64
    attn_dim: int = 64
    readout_dim: int = 64

    def __post_init__(self):
        if len(self.factor_vocab_sizes) != len(self.factor_dims):
            raise ShapeError("factor vocab list and dim list differ in length")
        if not self.factor_vocab_sizes:
            raise ShapeError("at least the surface factor is required")

    @property
    def input_dim(self) -> int:
        return sum(self.factor_dims)

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def as_dict(self) -> dict:
        return {
            "factor_vocab_sizes": list(self.factor_vocab_sizes),
            "factor_dims": list(self.factor_dims),
            "tgt_vocab_size": self.tgt_vocab_size,
            "tgt_embed_dim": self.tgt_embed_dim,
            "hidden_dim": self.hidden_dim,
            "attn_dim": self.attn_dim,
            "readout_dim": self.readout_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            factor_vocab_sizes=tuple(d["factor_vocab_sizes"]),
            factor_dims=tuple(d["factor_dims"]),
            tgt_vocab_size=d["tgt_vocab_size"],
            tgt_embed_dim=d["tgt_embed_dim"],
            hidden_dim=d["hidden_dim"],
            attn_dim=d["attn_dim"],
            readout_dim=d["readout_dim"],
        )


def default_factor_dims(n_factors: int, surface_dim: int = 64, factor_dim: int = 8):
    """Surface embedding plus a small slice per additional factor."""
    return (surface_dim,) + (factor_dim,) * (n_factors - 1)


def _gate_shapes(prefix: str, in_dim: int, h: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for gate in ("z", "r", "n"):
        shapes[f"{prefix}_W{gate}"] = (h, in_dim)
        shapes[f"{prefix}_U{gate}"] = (h, h)
        shapes[f"{prefix}_b{gate}"] = (h,)
    return shapes


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    h, d_in = config.hidden_dim, config.input_dim
    a, o = config.attn_dim, config.readout_dim
    d_tgt, v = config.tgt_embed_dim, config.tgt_vocab_size
    shapes: dict[str, tuple[int, ...]] = {}
    for k, (vk, dk) in enumerate(zip(config.factor_vocab_sizes, config.factor_dims)):
        shapes[f"src_embed_{k}"] = (vk, dk)
    shapes.update(_gate_shapes("enc_fwd", d_in, h))
    shapes.update(_gate_shapes("enc_bwd", d_in, h))
    shapes.update(_gate_shapes("dec", d_tgt + 2 * h, h))
    shapes["tgt_embed"] = (v, d_tgt)
    shapes["init_W"] = (h, 2 * h)
    shapes["init_b"] = (h,)
    shapes["att_Wq"] = (a, h)
    shapes["att_Wk"] = (a, 2 * h)
    shapes["att_b"] = (a,)
    shapes["att_v"] = (a,)
    shapes["ro_Ws"] = (o, h)
    shapes["ro_Wc"] = (o, 2 * h)
    shapes["ro_Wy"] = (o, d_tgt)
    shapes["ro_b"] = (o,)
    shapes["out_W"] = (v, o)
    shapes["out_b"] = (v,)
    return shapes


@dataclass
class Seq2SeqParams:
    """All learnable tensors plus the vocabulary fingerprints they assume."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator,
             dtype=np.float32, meta: dict | None = None) -> "Seq2SeqParams":
        tensors = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith(("_b", "_bz", "_br", "_bn")):
                tensors[name] = np.zeros(shape, dtype=dtype)
            elif len(shape) == 2:
                scale = math.sqrt(6.0 / (shape[0] + shape[1]))
                tensors[name] = rng.uniform(-scale, scale, size=shape).astype(dtype)
            else:
                tensors[name] = rng.uniform(-0.1, 0.1, size=shape).astype(dtype)
        return cls(config, tensors, meta=dict(meta or {}))

    @property
    def dtype(self):
        return self.tensors["out_W"].dtype

    def astype(self, dtype) -> "Seq2SeqParams":
        return Seq2SeqParams(self.config,
                             {k: v.astype(dtype) for k, v in self.tensors.items()},
                             meta=dict(self.meta))

    def copy(self) -> "Seq2SeqParams":
        return Seq2SeqParams(self.config,
                             {k: v.copy() for k, v in self.tensors.items()},
                             meta=dict(self.meta))

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def check_finite(self):
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise NumericError(f"non-finite values in tensor {name}")


# ---------------------------------------------------------------------------
# Forward primitives (with caches for the backward pass)


def embed_factored(factor_ids: Sequence[int], params: Seq2SeqParams) -> np.ndarray:
    """Concatenate per-factor embedding rows for one token."""
    if len(factor_ids) != params.config.n_factors:
        raise ShapeError(f"token has {len(factor_ids)} factor ids, "
                         f"model expects {params.config.n_factors}")
    parts = []
    for k, idx in enumerate(factor_ids):
        table = params.tensors[f"src_embed_{k}"]
        if not 0 <= idx < table.shape[0]:
            raise ShapeError(f"factor {k} id {idx} outside table of {table.shape[0]} rows")
        parts.append(table[idx])
    return np.concatenate(parts)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gru_forward(t, x, h_prev, prefix):
    z = _sigmoid(t[f"{prefix}_Wz"] @ x + t[f"{prefix}_Uz"] @ h_prev + t[f"{prefix}_bz"])
    r = _sigmoid(t[f"{prefix}_Wr"] @ x + t[f"{prefix}_Ur"] @ h_prev + t[f"{prefix}_br"])
    un = t[f"{prefix}_Un"] @ h_prev
    n = np.tanh(t[f"{prefix}_Wn"] @ x + r * un + t[f"{prefix}_bn"])
    h = (1.0 - z) * n + z * h_prev
    return h, (x, h_prev, z, r, un, n)


def _gru_backward(t, grads, dh, cache, prefix):
    x, h_prev, z, r, un, n = cache
    dz = dh * (h_prev - n)
    dn = dh * (1.0 - z)
    dh_prev = dh * z
    dan = dn * (1.0 - n * n)
    grads[f"{prefix}_Wn"] += np.outer(dan, x)
    dx = t[f"{prefix}_Wn"].T @ dan
    dr = dan * un
    dun = dan * r
    grads[f"{prefix}_Un"] += np.outer(dun, h_prev)
    dh_prev += t[f"{prefix}_Un"].T @ dun
    grads[f"{prefix}_bn"] += dan
    daz = dz * z * (1.0 - z)
    grads[f"{prefix}_Wz"] += np.outer(daz, x)
    dx += t[f"{prefix}_Wz"].T @ daz
    grads[f"{prefix}_Uz"] += np.outer(daz, h_prev)
    dh_prev += t[f"{prefix}_Uz"].T @ daz
    grads[f"{prefix}_bz"] += daz
    dar = dr * r * (1.0 - r)
    grads[f"{prefix}_Wr"] += np.outer(dar, x)
    dx += t[f"{prefix}_Wr"].T @ dar
    grads[f"{prefix}_Ur"] += np.outer(dar, h_prev)
    dh_prev += t[f"{prefix}_Ur"].T @ dar
    grads[f"{prefix}_br"] += dar
    return dx, dh_prev


@dataclass
class EncoderStates:
    """Bidirectional encoder outputs for one input sentence."""

    ids: np.ndarray          # (J, F) factor ids
    inputs: np.ndarray       # (J, D) concatenated embeddings
    states: np.ndarray       # (J, 2h) [fwd; bwd]
    att_keys: np.ndarray     # (J, a) precomputed attention keys
    fwd_caches: list
    bwd_caches: list
    s0: np.ndarray           # (h,) decoder start state
    s0_cache: tuple

    def __len__(self):
        return self.states.shape[0]


def encode(params: Seq2SeqParams, factor_ids: np.ndarray) -> EncoderStates:
    """Run the bidirectional encoder over one factored id matrix (J x F)."""
    t = params.tensors
    ids = np.asarray(factor_ids, dtype=np.int64)
    if ids.ndim != 2 or ids.shape[1] != params.config.n_factors:
        raise ShapeError(f"input ids shape {ids.shape}, expected (J, {params.config.n_factors})")
    if ids.shape[0] == 0:
        raise ShapeError("cannot encode an empty sentence")
    dtype = params.dtype
    inputs = np.stack([embed_factored(row, params) for row in ids]).astype(dtype)
    J, h = ids.shape[0], params.config.hidden_dim

    fwd = np.zeros((J, h), dtype=dtype)
    fwd_caches = []
    s = np.zeros(h, dtype=dtype)
    for j in range(J):
        s, cache = _gru_forward(t, inputs[j], s, "enc_fwd")
        fwd[j] = s
        fwd_caches.append(cache)
    bwd = np.zeros((J, h), dtype=dtype)
    bwd_caches = [None] * J
    s = np.zeros(h, dtype=dtype)
    for j in reversed(range(J)):
        s, cache = _gru_forward(t, inputs[j], s, "enc_bwd")
        bwd[j] = s
        bwd_caches[j] = cache
    states = np.concatenate([fwd, bwd], axis=1)

    mean_state = states.mean(axis=0)
    pre = t["init_W"] @ mean_state + t["init_b"]
    s0 = np.tanh(pre)
    att_keys = states @ t["att_Wk"].T
    return EncoderStates(ids, inputs, states, att_keys, fwd_caches, bwd_caches,
                         s0, (mean_state, s0))


def _attention_forward(t, s_prev, enc: EncoderStates):
    q = t["att_Wq"] @ s_prev
    pre = np.tanh(enc.att_keys + q + t["att_b"])
    scores = pre @ t["att_v"]
    scores = scores - scores.max()
    e = np.exp(scores)
    alpha = e / e.sum()
    context = alpha @ enc.states
    return context, alpha, (s_prev, pre, alpha)


def _attention_backward(t, grads, dcontext, dalpha_extra, cache, enc, d_states):
    s_prev, pre, alpha = cache
    dalpha = enc.states @ dcontext
    if dalpha_extra is not None:
        dalpha = dalpha + dalpha_extra
    d_states += np.outer(alpha, dcontext)
    dscores = alpha * (dalpha - float(dalpha @ alpha))
    grads["att_v"] += pre.T @ dscores
    dpre = np.outer(dscores, t["att_v"]) * (1.0 - pre * pre)
    grads["att_b"] += dpre.sum(axis=0)
    dq = dpre.sum(axis=0)
    grads["att_Wq"] += np.outer(dq, s_prev)
    ds_prev = t["att_Wq"].T @ dq
    grads["att_Wk"] += dpre.T @ enc.states
    d_states += dpre @ t["att_Wk"]
    return ds_prev


def forward_step(params: Seq2SeqParams, enc: EncoderStates, state: np.ndarray,
                 prev_id: int, _cache: list | None = None):
    """One decoder step: (log distribution, attention row, new state).

    The log distribution is exactly normalized (logsumexp 0); raises
    NumericError on non-finite activations.
    """
    t = params.tensors
    y_emb = t["tgt_embed"][prev_id]
    context, alpha, att_cache = _attention_forward(t, state, enc)
    x_dec = np.concatenate([y_emb, context])
    s_new, gru_cache = _gru_forward(t, x_dec, state, "dec")
    pre = t["ro_Ws"] @ s_new + t["ro_Wc"] @ context + t["ro_Wy"] @ y_emb + t["ro_b"]
    readout = np.tanh(pre)
    logits = t["out_W"] @ readout + t["out_b"]
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite decoder activations")
    m = logits.max()
    logz = m + np.log(np.exp(logits - m).sum())
    logp = logits - logz
    if _cache is not None:
        probs = np.exp(logp)
        _cache.append((prev_id, state, att_cache, context, gru_cache, s_new,
                       readout, probs, alpha))
    return logp, alpha, s_new


def _step_backward(params: Seq2SeqParams, grads, cache_entry, dlogits, ds_carry,
                   enc: EncoderStates, d_states):
    """Backprop one decoder step; returns the gradient w.r.t. the previous state."""
    t = params.tensors
    prev_id, s_prev, att_cache, context, gru_cache, s_new, readout, _, _ = cache_entry
    grads["out_W"] += np.outer(dlogits, readout)
    grads["out_b"] += dlogits
    dreadout = t["out_W"].T @ dlogits
    dpre = dreadout * (1.0 - readout * readout)
    grads["ro_Ws"] += np.outer(dpre, s_new)
    grads["ro_Wc"] += np.outer(dpre, context)
    y_emb = t["tgt_embed"][prev_id]
    grads["ro_Wy"] += np.outer(dpre, y_emb)
    grads["ro_b"] += dpre
    ds_new = t["ro_Ws"].T @ dpre + ds_carry
    dcontext = t["ro_Wc"].T @ dpre
    dy_emb = t["ro_Wy"].T @ dpre

    dx_dec, ds_prev = _gru_backward(t, grads, ds_new, gru_cache, "dec")
    d_tgt = params.config.tgt_embed_dim
    dy_emb += dx_dec[:d_tgt]
    dcontext += dx_dec[d_tgt:]
    ds_prev += _attention_backward(t, grads, dcontext, None, att_cache, enc, d_states)
    grads["tgt_embed"][prev_id] += dy_emb
    return ds_prev


def _encoder_backward(params: Seq2SeqParams, grads, enc: EncoderStates,
                      d_states: np.ndarray, ds0: np.ndarray):
    t = params.tensors
    J = len(enc)
    h = params.config.hidden_dim
    mean_state, s0 = enc.s0_cache
    dpre = ds0 * (1.0 - s0 * s0)
    grads["init_W"] += np.outer(dpre, mean_state)
    grads["init_b"] += dpre
    d_states = d_states + (t["init_W"].T @ dpre) / J

    d_fwd = d_states[:, :h].copy()
    d_bwd = d_states[:, h:].copy()
    d_inputs = np.zeros_like(enc.inputs)

    carry = np.zeros(h, dtype=enc.inputs.dtype)
    for j in reversed(range(J)):
        dx, carry = _gru_backward(t, grads, d_fwd[j] + carry, enc.fwd_caches[j], "enc_fwd")
        d_inputs[j] += dx
    carry = np.zeros(h, dtype=enc.inputs.dtype)
    for j in range(J):
        dx, carry = _gru_backward(t, grads, d_bwd[j] + carry, enc.bwd_caches[j], "enc_bwd")
        d_inputs[j] += dx

    offsets = np.cumsum((0,) + params.config.factor_dims)
    for j in range(J):
        for k in range(params.config.n_factors):
            grads[f"src_embed_{k}"][enc.ids[j, k]] += d_inputs[j, offsets[k]:offsets[k + 1]]


# ---------------------------------------------------------------------------
# Losses


def xent_loss_and_grads(params: Seq2SeqParams, factor_ids: np.ndarray,
                        target_ids: Sequence[int], grads: dict[str, np.ndarray],
                        scale: float = 1.0) -> tuple[float, int]:
    """Teacher-forced cross-entropy over target_ids + EOS.

    Accumulates `scale` times the gradient of the summed token loss into
    `grads`; returns (loss sum, token count).
    """
    enc = encode(params, factor_ids)
    targets = list(target_ids) + [EOS_ID]
    cache: list = []
    state = enc.s0
    loss = 0.0
    prev = BOS_ID
    for y in targets:
        logp, _, state = forward_step(params, enc, state, prev, _cache=cache)
        loss -= float(logp[y])
        prev = y
    if not math.isfinite(loss):
        raise NumericError("non-finite loss")

    d_states = np.zeros_like(enc.states)
    ds_carry = np.zeros_like(enc.s0)
    for t_idx in reversed(range(len(targets))):
        entry = cache[t_idx]
        probs = entry[7]
        dlogits = probs.copy() * scale
        dlogits[targets[t_idx]] -= scale
        ds_carry = _step_backward(params, grads, entry, dlogits, ds_carry, enc, d_states)
    _encoder_backward(params, grads, enc, d_states, ds_carry)
    return loss, len(targets)


def sequence_logprob(params: Seq2SeqParams, factor_ids: np.ndarray,
                     target_ids: Sequence[int], include_eos: bool = True,
                     _grad_ctx: list | None = None):
    """Force-decode a target sequence; returns (logprob, attention rows).

    With `_grad_ctx` supplied, the decode caches are retained so a
    caller can later backprop d(logprob) with an arbitrary scalar weight
    (used by the min-risk objective).
    """
    enc = encode(params, factor_ids)
    targets = list(target_ids) + ([EOS_ID] if include_eos else [])
    cache: list = []
    state = enc.s0
    total = 0.0
    rows = []
    prev = BOS_ID
    for y in targets:
        logp, alpha, state = forward_step(params, enc, state, prev, _cache=cache)
        total += float(logp[y])
        rows.append(alpha)
        prev = y
    record = np.array(rows) if rows else np.zeros((0, len(enc)))
    if _grad_ctx is not None:
        _grad_ctx.append((enc, cache, targets))
    return total, record


def backprop_sequence_logprob(params: Seq2SeqParams, grad_ctx_entry,
                              grads: dict[str, np.ndarray], weight: float):
    """Accumulate `weight` * d(sequence logprob)/d(params) into grads."""
    enc, cache, targets = grad_ctx_entry
    d_states = np.zeros_like(enc.states)
    ds_carry = np.zeros_like(enc.s0)
    for t_idx in reversed(range(len(targets))):
        entry = cache[t_idx]
        probs = entry[7]
        # d logp[y] / d logits = onehot(y) - p
        dlogits = -probs * weight
        dlogits[targets[t_idx]] += weight
        ds_carry = _step_backward(params, grads, entry, dlogits, ds_carry, enc, d_states)
    _encoder_backward(params, grads, enc, d_states, ds_carry)


# ---------------------------------------------------------------------------
# Optimizer and training


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 0.005
    lr_decay: float = 1.0         # multiplicative per-epoch decay
    batch_size: int = 8
    clip_norm: float = 1.0
    checkpoint_every: int = 0     # updates between checkpoints; 0 = once per epoch
    seed: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


class AdamState:
    def __init__(self, params: Seq2SeqParams):
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def update(self, params: Seq2SeqParams, grads: dict[str, np.ndarray],
               cfg: TrainConfig, lr: float | None = None):
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        correction = math.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        lr = (cfg.lr if lr is None else lr) * correction
        for name, g in grads.items():
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * (g * g)
            params.tensors[name] -= lr * self.m[name] / (np.sqrt(self.v[name]) + cfg.adam_eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


@dataclass
class Checkpoint:
    """A parameter snapshot with its step counter and dev metric."""

    params: Seq2SeqParams
    step: int
    dev_metric: float | None = None


EncodedPair = tuple[np.ndarray, tuple[int, ...]]   # (factor ids J x F, target ids)


def greedy_decode_ids(params: Seq2SeqParams, factor_ids: np.ndarray,
                      max_len: int = 40) -> tuple[int, ...]:
    hyp = beam_search(params, factor_ids, beam_width=1, n_best=1, max_len=max_len)[0]
    return hyp.tokens


def _dev_bleu(params: Seq2SeqParams, dev_pairs: Sequence[EncodedPair],
              max_len: int = 40) -> float:
    from .metrics import bleu

    hyps, refs = [], []
    for ids, target in dev_pairs:
        hyps.append([str(t) for t in greedy_decode_ids(params, ids, max_len=max_len)])
        refs.append([str(t) for t in target])
    score, _ = bleu(hyps, refs)
    return score


def train_xent(params: Seq2SeqParams, pairs: Sequence[EncodedPair], cfg: TrainConfig,
               dev_pairs: Sequence[EncodedPair] | None = None,
               log_every: int = 0) -> list[Checkpoint]:
    """Minimize token-level cross-entropy with teacher forcing.

    Mutates `params` in place and returns the checkpoints taken along
    the way (one per `checkpoint_every` updates, plus one at the end).
    On divergence (non-finite loss) training aborts and the checkpoints
    taken so far are returned.
    """
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(params)
    checkpoints: list[Checkpoint] = []
    step = 0

    def take_checkpoint():
        metric = _dev_bleu(params, dev_pairs) if dev_pairs else None
        checkpoints.append(Checkpoint(params.copy(), step, metric))

    if cfg.epochs == 0:
        return checkpoints
    order = np.arange(len(pairs))
    try:
        for epoch in range(cfg.epochs):
            rng.shuffle(order)
            epoch_lr = cfg.lr * (cfg.lr_decay ** epoch)
            epoch_loss, epoch_tokens = 0.0, 0
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                grads = params.zeros_like()
                n_tokens = sum(len(pairs[i][1]) + 1 for i in batch)
                loss = 0.0
                for i in batch:
                    ids, target = pairs[i]
                    l, _ = xent_loss_and_grads(params, ids, target, grads,
                                               scale=1.0 / n_tokens)
                    loss += l
                clip_gradients(grads, cfg.clip_norm)
                adam.update(params, grads, cfg, lr=epoch_lr)
                step += 1
                epoch_loss += loss
                epoch_tokens += n_tokens
                if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    take_checkpoint()
            if log_every and (epoch + 1) % log_every == 0:
                logger.info("epoch %d: train xent/token %.4f", epoch + 1,
                            epoch_loss / max(epoch_tokens, 1))
            if not cfg.checkpoint_every:
                take_checkpoint()
    except NumericError as exc:
        logger.warning("training diverged at step %d (%s); keeping last checkpoint",
                       step, exc)
        return checkpoints
    if not checkpoints or checkpoints[-1].step != step:
        take_checkpoint()
    return checkpoints


@dataclass
class MinRiskConfig:
    iterations: int = 1          # passes over the corpus
    n_samples: int = 5
    alpha: float = 1.0           # sharpness of the renormalized distribution
    lr: float = 0.001
    clip_norm: float = 1.0
    seed: int = 1
    max_len: int = 40
    probe_size: int = 8


def sample_sequence(params: Seq2SeqParams, enc: EncoderStates,
                    rng: np.random.Generator, max_len: int) -> tuple[int, ...]:
    state = enc.s0
    prev = BOS_ID
    tokens: list[int] = []
    for _ in range(max_len):
        logp, _, state = forward_step(params, enc, state, prev)
        probs = np.exp(logp.astype(np.float64))
        probs /= probs.sum()
        tok = int(rng.choice(logp.shape[0], p=probs))
        if tok == EOS_ID:
            break
        tokens.append(tok)
        prev = tok
    return tuple(tokens)


def expected_risk(params: Seq2SeqParams, factor_ids: np.ndarray,
                  candidates: Sequence[Sequence[int]], risks: Sequence[float],
                  alpha: float = 1.0,
                  grads: dict[str, np.ndarray] | None = None) -> float:
    """E_q[risk] over a fixed candidate set, q prop. to exp(alpha * logprob).

    With `grads` given, accumulates the exact analytic gradient (the
    candidate set and risks are treated as constants).
    """
    ctxs: list = []
    scores = np.empty(len(candidates), dtype=np.float64)
    for i, cand in enumerate(candidates):
        s, _ = sequence_logprob(params, factor_ids, cand,
                                _grad_ctx=ctxs if grads is not None else None)
        scores[i] = s
    r = np.asarray(risks, dtype=np.float64)
    logq = alpha * scores
    logq -= logq.max()
    q = np.exp(logq)
    q /= q.sum()
    value = float(q @ r)
    if grads is not None:
        dscore = alpha * q * (r - value)
        for ctx, w in zip(ctxs, dscore):
            backprop_sequence_logprob(params, ctx, grads, float(w))
    return value


def train_min_risk(params: Seq2SeqParams, pairs: Sequence[EncodedPair],
                   cfg: MinRiskConfig,
                   probe_history: list[float] | None = None) -> Seq2SeqParams:
    """Sampled minimum-risk fine-tuning; risk = 1 - smoothed sentence BLEU.

    Draws `n_samples` candidates per sentence, renormalizes their model
    scores into a distribution and minimizes the expected risk.  The
    expected risk on a fixed probe batch is reported per iteration (and
    collected into `probe_history` when given).
    """
    from .metrics import sentence_bleu

    if cfg.iterations == 0:
        return params
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(params)
    train_cfg = TrainConfig(lr=cfg.lr, clip_norm=cfg.clip_norm)
    probe = list(pairs[: cfg.probe_size])

    def candidate_risk(cand, target):
        hyp = [str(t) for t in cand]
        ref = [str(t) for t in target]
        return 1.0 - sentence_bleu(hyp, ref)

    # probe candidates are sampled once and frozen, so the reported
    # series tracks the same expected-risk surface across iterations
    probe_rng = np.random.default_rng(cfg.seed + 7919)
    probe_sets = []
    for ids, target in probe:
        enc = encode(params, ids)
        cands = _unique_samples(params, enc, probe_rng, cfg)
        if target not in cands:
            cands.append(tuple(target))
        probe_sets.append((ids, cands, [candidate_risk(c, target) for c in cands]))

    def probe_risk() -> float:
        total = 0.0
        for ids, cands, risks in probe_sets:
            total += expected_risk(params, ids, cands, risks, alpha=cfg.alpha)
        return total / max(len(probe_sets), 1)

    if probe_history is not None:
        probe_history.append(probe_risk())
    for it in range(cfg.iterations):
        for ids, target in pairs:
            enc = encode(params, ids)
            cands = _unique_samples(params, enc, rng, cfg)
            if len(cands) < 2:
                logger.warning("zero-variance sample batch skipped")
                continue
            risks = [candidate_risk(c, target) for c in cands]
            if max(risks) == min(risks):
                continue
            grads = params.zeros_like()
            expected_risk(params, ids, cands, risks, alpha=cfg.alpha, grads=grads)
            clip_gradients(grads, cfg.clip_norm)
            adam.update(params, grads, train_cfg)
        risk = probe_risk()
        logger.info("min-risk iteration %d: probe expected risk %.4f", it + 1, risk)
        if probe_history is not None:
            probe_history.append(risk)
    return params


def _unique_samples(params, enc, rng, cfg: MinRiskConfig) -> list[tuple[int, ...]]:
    seen = []
    for _ in range(cfg.n_samples):
        cand = sample_sequence(params, enc, rng, cfg.max_len)
        if cand and cand not in seen:
            seen.append(cand)
    return seen


# ---------------------------------------------------------------------------
# Checkpoint averaging and persistence


def average_checkpoints(checkpoints: Sequence[Checkpoint]) -> Seq2SeqParams:
    """Elementwise arithmetic mean of every tensor across checkpoints.

    Addends are summed in a canonical (content-sorted) order so the
    result is bitwise independent of the checkpoint list order.
    """
    if not checkpoints:
        raise ValueError("no checkpoints to average")
    base = checkpoints[0].params
    out = {}
    for name, tensor in base.tensors.items():
        addends = []
        for ckpt in checkpoints:
            other = ckpt.params.tensors.get(name)
            if other is None or other.shape != tensor.shape:
                raise ShapeError(
                    f"tensor {name}: shape {None if other is None else other.shape} "
                    f"does not match {tensor.shape}")
            addends.append(np.asarray(other, dtype=np.float64))
        addends.sort(key=lambda a: a.tobytes())
        acc = np.zeros_like(tensor, dtype=np.float64)
        for a in addends:
            acc += a
        out[name] = (acc / len(checkpoints)).astype(tensor.dtype)
    return Seq2SeqParams(base.config, out, meta=dict(base.meta))


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    """Bit-stable self-describing tensor container."""
    params = checkpoint.params
    names = sorted(params.tensors)
    header = {
        "format_version": 1,
        "config": params.config.as_dict(),
        "meta": params.meta,
        "step": checkpoint.step,
        "dev_metric": checkpoint.dev_metric,
        "tensors": [{"name": n,
                     "dtype": str(params.tensors[n].dtype),
                     "shape": list(params.tensors[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(f"{len(blob):016d}\n".encode("ascii"))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params.tensors[n]).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ShapeError(f"{path}: not a checkpoint file")
        length = int(fh.read(17).decode("ascii").strip())
        header = json.loads(fh.read(length).decode("utf-8"))
        if header["format_version"] != 1:
            raise ShapeError(f"{path}: unsupported checkpoint version")
        tensors = {}
        for spec in header["tensors"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            tensors[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    config = ModelConfig.from_dict(header["config"])
    params = Seq2SeqParams(config, tensors, meta=header.get("meta", {}))
    return Checkpoint(params, header["step"], header.get("dev_metric"))


# ---------------------------------------------------------------------------
# Decoding


class _ParamScorer:
    """StepScorer over fixed params and one encoded input."""

    def __init__(self, params: Seq2SeqParams, enc: EncoderStates):
        self.params = params
        self.enc = enc

    def start(self):
        return self.enc.s0

    def step(self, state, prev_id):
        return forward_step(self.params, self.enc, state, prev_id)


def beam_search(params: Seq2SeqParams, factor_ids: np.ndarray, *, beam_width: int = 5,
                n_best: int = 1, max_len: int = 40) -> list[SearchHypothesis]:
    """Single-model beam search (the one-member ensemble special case)."""
    enc = encode(params, factor_ids)
    return _generic_beam_search([_ParamScorer(params, enc)], [1.0],
                                bos_id=BOS_ID, eos_id=EOS_ID, beam_width=beam_width,
                                n_best=n_best, max_len=max_len)


def extract_alignments(params: Seq2SeqParams, src_ids: np.ndarray,
                       mt_ids: Sequence[int]) -> tuple[list[int], np.ndarray]:
    """Force-decode MT under a SRC->PE model and take per-row attention argmax.

    Returns one source *subword position* per MT token (ties resolve to
    the lowest index) plus the full attention record, one row per MT
    token (no EOS step).
    """
    if len(mt_ids) == 0:
        return [], np.zeros((0, np.asarray(src_ids).shape[0]))
    _, record = sequence_logprob(params, src_ids, mt_ids, include_eos=False)
    return [int(np.argmax(row)) for row in record], record


# ---------------------------------------------------------------------------
# Vocabulary-bound model


class Seq2SeqModel:
    """Parameters plus the vocabularies that give ids their meaning."""

    def __init__(self, params: Seq2SeqParams, factor_vocabs: Sequence[Vocabulary],
                 tgt_vocab: Vocabulary):
        cfg = params.config
        if len(factor_vocabs) != cfg.n_factors:
            raise ShapeError(f"{len(factor_vocabs)} factor vocabularies for "
                             f"{cfg.n_factors} model factors")
        for k, vocab in enumerate(factor_vocabs):
            if len(vocab) != cfg.factor_vocab_sizes[k]:
                raise ShapeError(f"factor {k} vocabulary size {len(vocab)} does not "
                                 f"match table of {cfg.factor_vocab_sizes[k]} rows")
        if len(tgt_vocab) != cfg.tgt_vocab_size:
            raise ShapeError(f"target vocabulary size {len(tgt_vocab)} does not match "
                             f"output layer of {cfg.tgt_vocab_size}")
        expected_meta = {
            "factor_vocab_hashes": [v.content_hash() for v in factor_vocabs],
            "tgt_vocab_hash": tgt_vocab.content_hash(),
        }
        for key, value in expected_meta.items():
            stored = params.meta.get(key)
            if stored is not None and stored != value:
                raise ShapeError(f"checkpoint {key} does not match supplied vocabulary")
        params.meta.update(expected_meta)
        self.params = params
        self.factor_vocabs = list(factor_vocabs)
        self.tgt_vocab = tgt_vocab

    @classmethod
    def create(cls, factor_vocabs: Sequence[Vocabulary], tgt_vocab: Vocabulary,
               seed: int, surface_dim: int = 64, factor_dim: int = 8,
               hidden_dim: int = 64, dtype=np.float32) -> "Seq2SeqModel":
        config = ModelConfig(
            factor_vocab_sizes=tuple(len(v) for v in factor_vocabs),
            factor_dims=default_factor_dims(len(factor_vocabs), surface_dim, factor_dim),
            tgt_vocab_size=len(tgt_vocab),
            tgt_embed_dim=surface_dim,
            hidden_dim=hidden_dim,
            attn_dim=hidden_dim,
            readout_dim=hidden_dim,
        )
        params = Seq2SeqParams.init(config, np.random.default_rng(seed), dtype=dtype)
        return cls(params, factor_vocabs, tgt_vocab)

    @property
    def output_vocab_hash(self) -> str:
        return self.params.meta["tgt_vocab_hash"]

    def encode_input(self, sentence: FactoredSentence | Sequence[str]) -> np.ndarray:
        if not isinstance(sentence, FactoredSentence):
            sentence = FactoredSentence(tuple(FactoredToken(t) for t in sentence))
        n = self.params.config.n_factors
        if sentence.tokens and sentence.arity != n:
            raise ShapeError(f"sentence arity {sentence.arity}, model expects {n}")
        rows = []
        for tok in sentence.tokens:
            fields = (tok.surface,) + tok.factors
            rows.append([self.factor_vocabs[k].id(fields[k]) for k in range(n)])
        return np.asarray(rows, dtype=np.int64).reshape(len(rows), n)

    def encode_target(self, tokens: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.tgt_vocab.encode(tokens))

    def ids_to_tokens(self, ids: Sequence[int]) -> list[str]:
        return self.tgt_vocab.decode(ids)

    def decode(self, sentence, beam_width: int = 5, n_best: int = 1,
               max_len: int = 40) -> list[SearchHypothesis]:
        return beam_search(self.params, self.encode_input(sentence),
                           beam_width=beam_width, n_best=n_best, max_len=max_len)

    def translate(self, tokens: Sequence[str], beam_width: int = 1,
                  max_len: int = 40) -> list[str]:
        """Token-in token-out decoding (the Translator protocol)."""
        hyp = self.decode(list(tokens), beam_width=beam_width, max_len=max_len)[0]
        return self.ids_to_tokens(hyp.tokens)

    def save(self, model_dir: str | Path, step: int = 0,
             dev_metric: float | None = None) -> None:
        model_dir = Path(model_dir)
        model_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model_dir / "params.ckpt", Checkpoint(self.params, step, dev_metric))
        for k, vocab in enumerate(self.factor_vocabs):
            vocab.save(model_dir / f"factor_vocab_{k}.txt")
        self.tgt_vocab.save(model_dir / "tgt_vocab.txt")

    @classmethod
    def load(cls, model_dir: str | Path) -> "Seq2SeqModel":
        model_dir = Path(model_dir)
        ckpt = load_checkpoint(model_dir / "params.ckpt")
        factor_vocabs = []
        for k in range(ckpt.params.config.n_factors):
            factor_vocabs.append(Vocabulary.load(model_dir / f"factor_vocab_{k}.txt"))
        tgt_vocab = Vocabulary.load(model_dir / "tgt_vocab.txt")
        return cls(ckpt.params, factor_vocabs, tgt_vocab)

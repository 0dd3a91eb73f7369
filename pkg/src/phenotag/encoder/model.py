"""Transformer encoder core: parameter initialization, forward pass, and
hand-written backpropagation in float64.

The architecture is a standard post-layer-norm encoder: token plus learned
position embeddings with a layer norm, then per layer multi-head self
attention and a GELU feed-forward block, each wrapped in residual + layer
norm. The masked-LM decoder is weight-tied to the token embedding matrix
(same array; gradients from the input and output paths accumulate into it),
plus a per-token output bias. A linear head over hidden states produces tag
logits for token classification.

All parameters live in a flat ``dict[str, np.ndarray]``; every function here
is pure in the sense that it never mutates its inputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from ..errors import ConfigurationError
from .config import ModelConfig

LN_EPS = 1e-12
_NEG_BIG = 1e9
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def param_names(config: ModelConfig) -> list[str]:
    names = ["tok_emb", "pos_emb", "emb_ln_g", "emb_ln_b"]
    for i in range(config.n_layers):
        p = f"l{i}."
        names += [
            p + "attn_wq", p + "attn_bq", p + "attn_wk", p + "attn_bk",
            p + "attn_wv", p + "attn_bv", p + "attn_wo", p + "attn_bo",
            p + "attn_ln_g", p + "attn_ln_b",
            p + "ffn_w1", p + "ffn_b1", p + "ffn_w2", p + "ffn_b2",
            p + "ffn_ln_g", p + "ffn_ln_b",
        ]
    names += ["mlm_bias", "ner_w", "ner_b"]
    return names


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    """Seeded initialization: weights ~ N(0, 0.02), layer norms at identity."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    d, dff = config.d_model, config.d_ff
    std = 0.02

    def normal(*shape: int) -> np.ndarray:
        return rng.normal(0.0, std, shape)

    p: dict[str, np.ndarray] = {
        "tok_emb": normal(config.vocab_size, d),
        "pos_emb": normal(config.max_positions, d),
        "emb_ln_g": np.ones(d),
        "emb_ln_b": np.zeros(d),
    }
    for i in range(config.n_layers):
        pre = f"l{i}."
        p[pre + "attn_wq"] = normal(d, d)
        p[pre + "attn_bq"] = np.zeros(d)
        p[pre + "attn_wk"] = normal(d, d)
        p[pre + "attn_bk"] = np.zeros(d)
        p[pre + "attn_wv"] = normal(d, d)
        p[pre + "attn_bv"] = np.zeros(d)
        p[pre + "attn_wo"] = normal(d, d)
        p[pre + "attn_bo"] = np.zeros(d)
        p[pre + "attn_ln_g"] = np.ones(d)
        p[pre + "attn_ln_b"] = np.zeros(d)
        p[pre + "ffn_w1"] = normal(d, dff)
        p[pre + "ffn_b1"] = np.zeros(dff)
        p[pre + "ffn_w2"] = normal(dff, d)
        p[pre + "ffn_b2"] = np.zeros(d)
        p[pre + "ffn_ln_g"] = np.ones(d)
        p[pre + "ffn_ln_b"] = np.zeros(d)
    p["mlm_bias"] = np.zeros(config.vocab_size)
    p["ner_w"] = normal(d, config.n_tags)
    p["ner_b"] = np.zeros(config.n_tags)
    return p


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# primitive blocks


def _layernorm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_backward(dy, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dx = inv * (
        dxhat
        - dxhat.mean(-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(-1, keepdims=True)
    )
    return dx, dg, db


def _gelu(x):
    return x * ndtr(x)


def _gelu_backward(dy, x):
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return dy * (ndtr(x) + x * phi)


def _softmax_last(x):
    m = x.max(-1, keepdims=True)
    ex = np.exp(x - m)
    return ex / ex.sum(-1, keepdims=True)


def _softmax_backward(dp, p):
    return p * (dp - (dp * p).sum(-1, keepdims=True))


def _split_heads(x, n_heads):
    b, s, d = x.shape
    return x.reshape(b, s, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, s, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * dk)


def _linear_backward(dy, x, w):
    """Grads for y = x @ w + b with x of shape [..., din]."""
    din, dout = w.shape
    x2 = x.reshape(-1, din)
    dy2 = dy.reshape(-1, dout)
    dw = x2.T @ dy2
    db = dy2.sum(0)
    dx = (dy2 @ w.T).reshape(x.shape)
    return dx, dw, db


def _make_dropout(shape, rate, rng):
    keep = (rng.random(shape) >= rate).astype(np.float64)
    return keep / (1.0 - rate)


# ---------------------------------------------------------------------------
# backbone forward / backward


def forward_hidden(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    ids: np.ndarray,
    mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the encoder; returns hidden states [B, S, d] and a backward cache.

    Dropout is applied only when ``dropout_rng`` is given and the configured
    rate is positive; inference is fully deterministic.
    """
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.float64)
    b, s = ids.shape
    if s > config.max_positions:
        raise ConfigurationError(
            f"sequence length {s} exceeds max_positions {config.max_positions}"
        )
    rate = config.dropout_rate if dropout_rng is not None else 0.0
    drop = (
        (lambda shape: _make_dropout(shape, rate, dropout_rng))
        if rate > 0.0
        else (lambda shape: None)
    )

    def apply_drop(x, m):
        return x if m is None else x * m

    cache: dict = {"ids": ids, "mask": mask, "config": config, "layers": []}

    e = params["tok_emb"][ids] + params["pos_emb"][:s]
    h, emb_ln = _layernorm(e, params["emb_ln_g"], params["emb_ln_b"])
    emb_drop = drop(h.shape)
    h = apply_drop(h, emb_drop)
    cache["emb_ln"] = emb_ln
    cache["emb_drop"] = emb_drop

    key_bias = (mask[:, None, None, :] - 1.0) * _NEG_BIG
    scale = 1.0 / math.sqrt(config.d_model // config.n_heads)
    for i in range(config.n_layers):
        pre = f"l{i}."
        x = h
        q = x @ params[pre + "attn_wq"] + params[pre + "attn_bq"]
        k = x @ params[pre + "attn_wk"] + params[pre + "attn_bk"]
        v = x @ params[pre + "attn_wv"] + params[pre + "attn_bv"]
        qh = _split_heads(q, config.n_heads)
        kh = _split_heads(k, config.n_heads)
        vh = _split_heads(v, config.n_heads)
        scores = qh @ kh.transpose(0, 1, 3, 2) * scale + key_bias
        probs = _softmax_last(scores)
        probs_drop = drop(probs.shape)
        probs_used = apply_drop(probs, probs_drop)
        ctx = _merge_heads(probs_used @ vh)
        attn = ctx @ params[pre + "attn_wo"] + params[pre + "attn_bo"]
        attn_drop = drop(attn.shape)
        attn = apply_drop(attn, attn_drop)
        r1 = x + attn
        n1, ln1 = _layernorm(r1, params[pre + "attn_ln_g"], params[pre + "attn_ln_b"])
        hmid = n1 @ params[pre + "ffn_w1"] + params[pre + "ffn_b1"]
        act = _gelu(hmid)
        f = act @ params[pre + "ffn_w2"] + params[pre + "ffn_b2"]
        ffn_drop = drop(f.shape)
        f = apply_drop(f, ffn_drop)
        r2 = n1 + f
        h, ln2 = _layernorm(r2, params[pre + "ffn_ln_g"], params[pre + "ffn_ln_b"])
        cache["layers"].append(
            {
                "x": x, "qh": qh, "kh": kh, "vh": vh, "probs": probs,
                "probs_drop": probs_drop, "probs_used": probs_used,
                "ctx": ctx, "attn_drop": attn_drop, "ln1": ln1, "n1": n1,
                "hmid": hmid, "act": act, "ffn_drop": ffn_drop, "ln2": ln2,
            }
        )
    return h, cache


def backward_hidden(
    dh: np.ndarray,
    cache: dict,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> None:
    """Backpropagate a gradient on hidden states into ``grads`` (accumulating)."""
    config: ModelConfig = cache["config"]
    ids = cache["ids"]
    scale = 1.0 / math.sqrt(config.d_model // config.n_heads)

    for i in reversed(range(config.n_layers)):
        pre = f"l{i}."
        lc = cache["layers"][i]
        dr2, dg2, db2 = _layernorm_backward(dh, lc["ln2"])
        grads[pre + "ffn_ln_g"] += dg2
        grads[pre + "ffn_ln_b"] += db2
        df = dr2 if lc["ffn_drop"] is None else dr2 * lc["ffn_drop"]
        dact, dw2, db2f = _linear_backward(df, lc["act"], params[pre + "ffn_w2"])
        grads[pre + "ffn_w2"] += dw2
        grads[pre + "ffn_b2"] += db2f
        dhmid = _gelu_backward(dact, lc["hmid"])
        dn1, dw1, db1f = _linear_backward(dhmid, lc["n1"], params[pre + "ffn_w1"])
        grads[pre + "ffn_w1"] += dw1
        grads[pre + "ffn_b1"] += db1f
        dn1 = dn1 + dr2  # residual around the feed-forward block
        dr1, dg1, db1 = _layernorm_backward(dn1, lc["ln1"])
        grads[pre + "attn_ln_g"] += dg1
        grads[pre + "attn_ln_b"] += db1
        dattn = dr1 if lc["attn_drop"] is None else dr1 * lc["attn_drop"]
        dctx, dwo, dbo = _linear_backward(dattn, lc["ctx"], params[pre + "attn_wo"])
        grads[pre + "attn_wo"] += dwo
        grads[pre + "attn_bo"] += dbo
        dctx_h = _split_heads(dctx, config.n_heads)
        dprobs_used = dctx_h @ lc["vh"].transpose(0, 1, 3, 2)
        dvh = lc["probs_used"].transpose(0, 1, 3, 2) @ dctx_h
        dprobs = (
            dprobs_used
            if lc["probs_drop"] is None
            else dprobs_used * lc["probs_drop"]
        )
        dscores = _softmax_backward(dprobs, lc["probs"])
        dqh = dscores @ lc["kh"] * scale
        dkh = dscores.transpose(0, 1, 3, 2) @ lc["qh"] * scale
        dq = _merge_heads(dqh)
        dk = _merge_heads(dkh)
        dv = _merge_heads(dvh)
        dx = dr1  # residual around attention
        for name, dout in (("attn_wq", dq), ("attn_wk", dk), ("attn_wv", dv)):
            dxi, dw, db = _linear_backward(dout, lc["x"], params[pre + name])
            grads[pre + name] += dw
            grads[pre + name.replace("w", "b")] += db
            dx = dx + dxi
        dh = dx

    if cache["emb_drop"] is not None:
        dh = dh * cache["emb_drop"]
    de, dg, db = _layernorm_backward(dh, cache["emb_ln"])
    grads["emb_ln_g"] += dg
    grads["emb_ln_b"] += db
    np.add.at(grads["tok_emb"], ids, de)
    grads["pos_emb"][: de.shape[1]] += de.sum(0)


# ---------------------------------------------------------------------------
# losses


def _softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy over rows; returns (loss, accuracy, dlogits)."""
    m = logits.max(-1, keepdims=True)
    ex = np.exp(logits - m)
    z = ex.sum(-1, keepdims=True)
    probs = ex / z
    n = logits.shape[0]
    idx = np.arange(n)
    logp = logits[idx, labels] - (m[:, 0] + np.log(z[:, 0]))
    loss = -logp.mean()
    acc = float((logits.argmax(-1) == labels).mean())
    dlogits = probs
    dlogits[idx, labels] -= 1.0
    dlogits /= n
    return float(loss), acc, dlogits


def mlm_loss_and_grads(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    ids: np.ndarray,
    mask: np.ndarray,
    pos_b: np.ndarray,
    pos_s: np.ndarray,
    labels: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, float, dict[str, np.ndarray]]:
    """Masked-token cross entropy at the given positions, with full gradients.

    Logits are hidden states against the (tied) token embedding matrix plus
    the output bias; loss and accuracy are computed only at masked positions.
    """
    if len(labels) == 0:
        raise ConfigurationError("no masked positions: nothing to supervise")
    h, cache = forward_hidden(params, config, ids, mask, dropout_rng)
    hm = h[pos_b, pos_s]
    logits = hm @ params["tok_emb"].T + params["mlm_bias"]
    loss, acc, dlogits = _softmax_xent(logits, labels)
    grads = zero_grads(params)
    grads["mlm_bias"] += dlogits.sum(0)
    grads["tok_emb"] += dlogits.T @ hm  # decoder side of the tied embedding
    dh = np.zeros_like(h)
    np.add.at(dh, (pos_b, pos_s), dlogits @ params["tok_emb"])
    backward_hidden(dh, cache, params, grads)
    return loss, acc, grads


def ner_loss_and_grads(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    ids: np.ndarray,
    mask: np.ndarray,
    tag_ids: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, float, dict[str, np.ndarray]]:
    """Per-token tag cross entropy; positions tagged -1 are excluded."""
    tag_ids = np.asarray(tag_ids, dtype=np.int64)
    sel = tag_ids >= 0
    if not sel.any():
        raise ConfigurationError("no supervised token positions in batch")
    h, cache = forward_hidden(params, config, ids, mask, dropout_rng)
    hs = h[sel]
    logits = hs @ params["ner_w"] + params["ner_b"]
    loss, acc, dlogits = _softmax_xent(logits, tag_ids[sel])
    grads = zero_grads(params)
    grads["ner_w"] += hs.T @ dlogits
    grads["ner_b"] += dlogits.sum(0)
    dh = np.zeros_like(h)
    dh[sel] = dlogits @ params["ner_w"].T
    backward_hidden(dh, cache, params, grads)
    return loss, acc, grads


def tag_logits(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    ids: np.ndarray,
    mask: np.ndarray,
) -> np.ndarray:
    """Inference-mode tag logits [B, S, n_tags]."""
    h, _ = forward_hidden(params, config, ids, mask)
    return h @ params["ner_w"] + params["ner_b"]

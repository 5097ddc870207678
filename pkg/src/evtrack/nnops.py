"""Dense numeric kernels: forward evaluation only, float64 throughout.

Every kernel validates operand shapes and finiteness; a NaN/Inf anywhere is
a contract violation, not a value to propagate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

DTYPE = np.float64

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class ShapeMismatch(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator: identical seed gives the identical sequence
    on every platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: non-finite input")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    _check_finite("matmul", a, b)
    return a @ b


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x @ w + b with w laid out (in_features, out_features)."""
    if x.shape[-1] != w.shape[0] or w.shape[1] != b.shape[-1]:
        raise ShapeMismatch(f"linear: x{x.shape}, w{w.shape}, b{b.shape}")
    _check_finite("linear", x, w, b)
    return x @ w + b


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = 1e-5) -> np.ndarray:
    """Normalize the last axis to mean 0 / variance 1, then affine."""
    if eps <= 0:
        raise ValueError(f"layer_norm: eps must be positive, got {eps}")
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeMismatch(f"layer_norm: x{x.shape}, gamma{gamma.shape}, beta{beta.shape}")
    _check_finite("layer_norm", x, gamma, beta)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf formulation (the tanh approximation would pollute
    equivalence tests)."""
    _check_finite("gelu", x)
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def sigmoid(x: np.ndarray) -> np.ndarray:
    _check_finite("sigmoid", x)
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=DTYPE))
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.reshape(shape)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    _check_finite("softmax", x)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def global_avg_pool(tokens: np.ndarray) -> np.ndarray:
    """(N, D) token matrix -> (D,) mean over the token axis."""
    if tokens.ndim != 2 or tokens.shape[0] == 0:
        raise ShapeMismatch(f"global_avg_pool: expected non-empty (N, D), got {tokens.shape}")
    _check_finite("global_avg_pool", tokens)
    return tokens.mean(axis=0)


@dataclass(frozen=True)
class AttentionWeights:
    qkv_w: np.ndarray  # (D, 3D)
    qkv_b: np.ndarray  # (3D,)
    out_w: np.ndarray  # (D, D)
    out_b: np.ndarray  # (D,)


def multi_head_attention(q_tokens: np.ndarray, kv_tokens: np.ndarray,
                         weights: AttentionWeights, n_heads: int) -> np.ndarray:
    """Full bidirectional attention of q_tokens over kv_tokens."""
    d = q_tokens.shape[-1]
    if d % n_heads != 0:
        raise ShapeMismatch(f"attention: n_heads {n_heads} does not divide dim {d}")
    if kv_tokens.shape[-1] != d or weights.qkv_w.shape != (d, 3 * d):
        raise ShapeMismatch(
            f"attention: q{q_tokens.shape}, kv{kv_tokens.shape}, qkv{weights.qkv_w.shape}"
        )
    _check_finite("attention", q_tokens, kv_tokens)
    head_dim = d // n_heads
    q = linear(q_tokens, weights.qkv_w[:, :d], weights.qkv_b[:d])
    k = linear(kv_tokens, weights.qkv_w[:, d:2 * d], weights.qkv_b[d:2 * d])
    v = linear(kv_tokens, weights.qkv_w[:, 2 * d:], weights.qkv_b[2 * d:])

    def split(t):
        return t.reshape(t.shape[0], n_heads, head_dim).transpose(1, 0, 2)

    qh, kh, vh = split(q), split(k), split(v)
    scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(head_dim)
    attn = softmax(scores, axis=-1)
    ctx = attn @ vh
    merged = ctx.transpose(1, 0, 2).reshape(q_tokens.shape[0], d)
    return linear(merged, weights.out_w, weights.out_b)


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray | None = None,
           stride: int = 1, pad: int = 0) -> np.ndarray:
    """(C, H, W) input with an (O, C, kh, kw) kernel -> (O, H', W')."""
    if x.ndim != 3 or kernel.ndim != 4 or kernel.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"conv2d: x{x.shape}, kernel{kernel.shape}")
    _check_finite("conv2d", x, kernel)
    c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        h, w = h + 2 * pad, w + 2 * pad
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    # im2col: gather (C*kh*kw, oh*ow) columns, single matmul against the kernel
    cols = np.empty((c * kh * kw, oh * ow), dtype=DTYPE)
    idx = 0
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                patch = x[ci, i:i + stride * oh:stride, j:j + stride * ow:stride]
                cols[idx] = patch.reshape(-1)
                idx += 1
    out = (kernel.reshape(o, -1) @ cols).reshape(o, oh, ow)
    if bias is not None:
        out += bias[:, None, None]
    return out


def gumbel_softmax(logits: np.ndarray, tau: float,
                   rng: np.random.Generator | None = None,
                   hard: bool = False) -> np.ndarray:
    """Gumbel-softmax over a rank-1 logit vector.

    With an rng, returns softmax((logits + g) / tau) for i.i.d. standard
    Gumbel noise g; hard mode one-hots the argmax of that sample. Without an
    rng (zero-noise deterministic mode) the noise term is omitted.
    """
    if tau <= 0:
        raise ValueError(f"gumbel_softmax: tau must be positive, got {tau}")
    if logits.ndim != 1:
        raise ShapeMismatch(f"gumbel_softmax: expected rank-1 logits, got {logits.shape}")
    _check_finite("gumbel_softmax", logits)
    z = np.asarray(logits, dtype=DTYPE)
    if rng is not None:
        u = np.maximum(rng.random(z.shape), np.finfo(DTYPE).tiny)
        z = z + -np.log(-np.log(u))
    soft = softmax(z / tau)
    if hard:
        one_hot = np.zeros_like(soft)
        one_hot[int(np.argmax(soft))] = 1.0
        return one_hot
    return soft

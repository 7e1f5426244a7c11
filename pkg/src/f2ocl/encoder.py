"""Frozen token-mixing encoder with prompt-token gradients.

Two variants share one interface:

* ``affine-reference``: ``z = W @ mean(tokens)``. Linear, so pooling and
  gradients can be checked by hand.
* ``tiny-transformer``: pre-norm multi-head self-attention + GELU MLP
  blocks, then mean pooling over every token position.

Raw features are tokenized by splitting ``x`` into ``T`` equal chunks and
mapping each chunk to ``R^d`` with its own seeded projection. Prompt
tokens are prepended to the content tokens. Only the gradient with respect
to input tokens is ever computed; encoder weights are read-only arrays.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .errors import ConfigurationError, InputError

VARIANTS = ("affine-reference", "tiny-transformer")
INIT_STD = 0.02
LN_EPS = 1e-6
_GELU_C = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int = 32
    token_dim: int = 48
    num_content_tokens: int = 4
    num_blocks: int = 2
    num_heads: int = 2
    mlp_ratio: float = 2.0
    variant: str = "tiny-transformer"
    seed: int = 0

    def validate(self) -> None:
        for name in ("input_dim", "token_dim", "num_content_tokens", "num_heads"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.num_blocks < 0:
            raise ConfigurationError("num_blocks must be non-negative")
        if self.mlp_ratio <= 0:
            raise ConfigurationError("mlp_ratio must be positive")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown encoder variant {self.variant!r}")
        if self.input_dim % self.num_content_tokens:
            raise ConfigurationError(
                f"input_dim={self.input_dim} is not divisible into "
                f"{self.num_content_tokens} content tokens"
            )
        if self.variant == "tiny-transformer" and self.token_dim % self.num_heads:
            raise ConfigurationError("token_dim must be divisible by num_heads")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def hidden_dim(self) -> int:
        return max(1, int(round(self.token_dim * self.mlp_ratio)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Block:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass(frozen=True)
class EncoderState:
    """Frozen encoder parameters; all arrays are read-only."""

    config: EncoderConfig
    tokenizer: np.ndarray  # (T, chunk, d)
    affine: np.ndarray | None = None  # (d, d), affine-reference only
    blocks: tuple[Block, ...] = field(default=())

    def __post_init__(self):
        for arr in self._arrays():
            arr.flags.writeable = False

    def _arrays(self):
        yield self.tokenizer
        if self.affine is not None:
            yield self.affine
        for b in self.blocks:
            yield from (b.wq, b.wk, b.wv, b.wo, b.w1, b.w2)

    def digest(self) -> str:
        h = hashlib.sha256(repr(sorted(self.config.to_dict().items())).encode())
        for arr in self._arrays():
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def build_encoder(config: EncoderConfig) -> EncoderState:
    config.validate()
    d, T = config.token_dim, config.num_content_tokens
    chunk = config.input_dim // T
    gen = rng.generator(config.seed, rng.ENCODER)

    def draw(*shape):
        return gen.normal(0.0, INIT_STD, size=shape)

    tokenizer = draw(T, chunk, d)
    if config.variant == "affine-reference":
        return EncoderState(config, tokenizer, affine=draw(d, d))
    h = config.hidden_dim
    blocks = tuple(
        Block(wq=draw(d, d), wk=draw(d, d), wv=draw(d, d), wo=draw(d, d), w1=draw(d, h), w2=draw(h, d))
        for _ in range(config.num_blocks)
    )
    return EncoderState(config, tokenizer, blocks=blocks)


# ---------------------------------------------------------------------------
# tokenization


def _check_x(enc: EncoderState, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != enc.config.input_dim:
        raise InputError(f"expected feature vectors of length {enc.config.input_dim}, got shape {x.shape}")
    return x


def _check_prompt(enc: EncoderState, p, batch: int | None) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    d = enc.config.token_dim
    if p.ndim == 2 and batch is not None:
        p = np.broadcast_to(p, (batch, *p.shape))
    want = 2 if batch is None else 3
    if p.ndim != want or p.shape[-1] != d or (batch is not None and p.shape[0] != batch):
        raise InputError(f"prompt has shape {p.shape}; expected (..., L_p, {d}) matching the batch")
    return p


def tokenize(enc: EncoderState, x: np.ndarray) -> np.ndarray:
    """(B, D_in) -> (B, T, d)."""
    T, chunk, _ = enc.tokenizer.shape
    return np.einsum("btc,tcd->btd", x.reshape(x.shape[0], T, chunk), enc.tokenizer)


# ---------------------------------------------------------------------------
# transformer pieces; every forward returns a cache consumed by its backward


def _layernorm(x):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + LN_EPS)
    y = xc * inv
    return y, (y, inv)


def _layernorm_back(dy, cache):
    y, inv = cache
    return inv * (dy - dy.mean(-1, keepdims=True) - y * (dy * y).mean(-1, keepdims=True))


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u * u * u))
    return 0.5 * u * (1.0 + t), t


def _gelu_back(dg, u, t):
    dt = _GELU_C * (1.0 + 3 * 0.044715 * u * u)
    return dg * (0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * dt)


def _split(a, heads):
    B, S, d = a.shape
    return a.reshape(B, S, heads, d // heads).transpose(0, 2, 1, 3)


def _merge(a):
    B, H, S, dh = a.shape
    return a.transpose(0, 2, 1, 3).reshape(B, S, H * dh)


def _attention(a, blk: Block, heads):
    q, k, v = (_split(a @ w, heads) for w in (blk.wq, blk.wk, blk.wv))
    scale = 1.0 / np.sqrt(q.shape[-1])
    s = (q @ k.transpose(0, 1, 3, 2)) * scale
    s -= s.max(-1, keepdims=True)
    att = np.exp(s)
    att /= att.sum(-1, keepdims=True)
    o = _merge(att @ v)
    return o @ blk.wo, (a, q, k, v, att, o, scale)


def _attention_back(dout, cache, blk: Block, heads):
    a, q, k, v, att, o, scale = cache
    do = _split(dout @ blk.wo.T, heads)
    datt = do @ v.transpose(0, 1, 3, 2)
    dv = att.transpose(0, 1, 3, 2) @ do
    ds = att * (datt - (datt * att).sum(-1, keepdims=True)) * scale
    dq = ds @ k
    dk = ds.transpose(0, 1, 3, 2) @ q
    return _merge(dq) @ blk.wq.T + _merge(dk) @ blk.wk.T + _merge(dv) @ blk.wv.T


def _forward(enc: EncoderState, h: np.ndarray):
    """Run the token stack (B, S, d) and mean-pool. Returns (z, cache)."""
    if enc.config.variant == "affine-reference":
        return h.mean(1) @ enc.affine.T, None
    heads = enc.config.num_heads
    caches = []
    for blk in enc.blocks:
        a, ln1 = _layernorm(h)
        att_out, att_cache = _attention(a, blk, heads)
        h = h + att_out
        b, ln2 = _layernorm(h)
        u = b @ blk.w1
        g, t = _gelu(u)
        h = h + g @ blk.w2
        caches.append((ln1, att_cache, ln2, b, u, t))
    return h.mean(1), caches


def _backward(enc: EncoderState, caches, dz: np.ndarray, seq_len: int) -> np.ndarray:
    """Gradient with respect to the input token stack."""
    if enc.config.variant == "affine-reference":
        return np.repeat((dz @ enc.affine)[:, None, :] / seq_len, seq_len, axis=1)
    dh = np.repeat(dz[:, None, :] / seq_len, seq_len, axis=1)
    heads = enc.config.num_heads
    for blk, (ln1, att_cache, ln2, b, u, t) in zip(reversed(enc.blocks), reversed(caches)):
        du = _gelu_back(dh @ blk.w2.T, u, t)
        dh = dh + _layernorm_back(du @ blk.w1.T, ln2)
        da = _attention_back(dh, att_cache, blk, heads)
        dh = dh + _layernorm_back(da, ln1)
    return dh


# ---------------------------------------------------------------------------
# public operations


def encode_query(enc: EncoderState, x) -> np.ndarray:
    """Prompt-free embedding ``q = f(x)``; accepts one vector or a (B, D_in) batch."""
    x = _check_x(enc, x)
    single = x.ndim == 1
    z, _ = _forward(enc, tokenize(enc, np.atleast_2d(x)))
    return z[0] if single else z


def encode_with_prompt_vjp(enc: EncoderState, x, p) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """Batched ``z = f(x, p)`` plus a closure mapping ``dL/dz`` to ``dL/dp``.

    Args:
        x: (B, D_in) features.
        p: (B, L_p, d) per-sample prompts, or one (L_p, d) prompt shared by the batch.

    Returns:
        z of shape (B, d) and ``vjp(dz) -> (B, L_p, d)``.
    """
    x = _check_x(enc, x)
    if x.ndim == 1:
        raise InputError("encode_with_prompt_vjp expects a batch of feature vectors")
    p = _check_prompt(enc, p, x.shape[0])
    lp = p.shape[1]
    h = np.concatenate([p, tokenize(enc, x)], axis=1)
    z, caches = _forward(enc, h)

    def vjp(dz):
        dz = np.asarray(dz, dtype=np.float64)
        if dz.shape != z.shape:
            raise InputError(f"upstream gradient has shape {dz.shape}, expected {z.shape}")
        return _backward(enc, caches, dz, h.shape[1])[:, :lp]

    return z, vjp


def encode_with_prompt(enc: EncoderState, x, p) -> np.ndarray:
    """Augmented embedding ``z = f(x, p)`` with the prompt prepended to the content tokens."""
    x = _check_x(enc, x)
    if x.ndim == 1:
        return encode_with_prompt_vjp(enc, x[None], _check_prompt(enc, p, None)[None])[0][0]
    return encode_with_prompt_vjp(enc, x, p)[0]


def grad_wrt_prompt(enc: EncoderState, x, p, upstream) -> np.ndarray:
    """Exact ``dL/dp`` given ``upstream = dL/dz``. Shapes follow ``encode_with_prompt``."""
    x = _check_x(enc, x)
    if x.ndim == 1:
        p = _check_prompt(enc, p, None)
        _, vjp = encode_with_prompt_vjp(enc, x[None], p[None])
        return vjp(np.asarray(upstream, dtype=np.float64)[None])[0]
    _, vjp = encode_with_prompt_vjp(enc, x, p)
    return vjp(upstream)

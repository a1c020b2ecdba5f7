"""Shared transformer layers mapping packed inputs to per-token hidden vectors.

Post-layer-norm blocks in the original BERT ordering; learned token,
position, and segment embeddings summed, normalized, and dropped out
before the first block. h_0 is the output at the [CLS] position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import CheckpointError, ConfigError, ContractError
from .seeding import rng_from, trunc_normal
from .tokenizer import EncodedInput

SHARED_PREFIX = "shared/"
_ATTN_MASK_BIAS = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    max_positions: int = 128
    hidden_size: int = 128
    num_layers: int = 2
    num_heads: int = 2
    ff_size: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_size % self.num_heads != 0:
            raise ConfigError(
                f"hidden_size {self.hidden_size} not divisible by "
                f"num_heads {self.num_heads}")
        if self.vocab_size < 1 or self.max_positions < 1:
            raise ConfigError("vocab_size and max_positions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @property
    def head_size(self) -> int:
        return self.hidden_size // self.num_heads


def param_shapes(config: EncoderConfig) -> dict[str, tuple]:
    """Ordered name -> shape table for every shared parameter."""
    h, f = config.hidden_size, config.ff_size
    shapes = {
        "shared/emb/token": (config.vocab_size, h),
        "shared/emb/pos": (config.max_positions, h),
        "shared/emb/seg": (2, h),
        "shared/emb/gamma": (h,),
        "shared/emb/beta": (h,),
    }
    for i in range(config.num_layers):
        p = f"shared/layer{i}"
        shapes.update({
            f"{p}/attn/wq": (h, h), f"{p}/attn/bq": (h,),
            f"{p}/attn/wk": (h, h), f"{p}/attn/bk": (h,),
            f"{p}/attn/wv": (h, h), f"{p}/attn/bv": (h,),
            f"{p}/attn/wo": (h, h), f"{p}/attn/bo": (h,),
            f"{p}/attn/gamma": (h,), f"{p}/attn/beta": (h,),
            f"{p}/ff/w1": (h, f), f"{p}/ff/b1": (f,),
            f"{p}/ff/w2": (f, h), f"{p}/ff/b2": (h,),
            f"{p}/ff/gamma": (h,), f"{p}/ff/beta": (h,),
        })
    return shapes


def init_params(config: EncoderConfig, seed=None, checkpoint_tensors=None):
    """Encoder parameters, either freshly drawn or taken from a checkpoint.

    Random mode draws weights from a truncated normal (std 0.02), zeros
    biases, and unit gains. Checkpoint mode copies named tensors, checking
    that every expected name exists with the expected shape and reporting
    all offenders at once.
    """
    shapes = param_shapes(config)
    if (seed is None) == (checkpoint_tensors is None):
        raise ConfigError("init_params needs exactly one of seed or checkpoint_tensors")

    if checkpoint_tensors is not None:
        missing = [n for n in shapes if n not in checkpoint_tensors]
        if missing:
            raise CheckpointError(f"checkpoint missing tensors: {missing}")
        bad = [n for n, s in shapes.items()
               if tuple(checkpoint_tensors[n].shape) != s]
        if bad:
            detail = ", ".join(
                f"{n} has {tuple(checkpoint_tensors[n].shape)}, expected {shapes[n]}"
                for n in bad)
            raise CheckpointError(f"checkpoint shape mismatch: {detail}")
        return {n: np.array(checkpoint_tensors[n], dtype=np.float64) for n in shapes}

    rng = rng_from("encoder-init", seed)
    params = {}
    for name, shape in shapes.items():
        leaf = name.rsplit("/", 1)[1]
        if leaf == "gamma":
            params[name] = np.ones(shape)
        elif leaf.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = trunc_normal(rng, shape)
    return params


def batch_arrays(inputs: list[EncodedInput]):
    """Stack a same-length batch into (ids, segments, mask) int arrays."""
    lengths = {len(i) for i in inputs}
    if len(lengths) != 1:
        raise ContractError(f"batch has mixed input lengths: {sorted(lengths)}")
    ids = np.array([i.token_ids for i in inputs], dtype=np.intp)
    segs = np.array([i.segment_ids for i in inputs], dtype=np.intp)
    mask = np.array([i.attention_mask for i in inputs], dtype=np.float64)
    return ids, segs, mask


def _get(params, name) -> T.Tensor:
    value = params[name]
    return value if isinstance(value, T.Tensor) else T.Tensor(value)


def encode(params, config: EncoderConfig, inputs, mode: str = "eval",
           dropout_rng: np.random.Generator | None = None,
           collect_attention: list | None = None) -> T.Tensor:
    """Hidden vector sequence for a batch (B, T, H) or one input (T, H).

    ``params`` maps names to arrays or to tape-attached Tensors (training).
    ``mode`` "train" applies dropout and requires ``dropout_rng``. Passing a
    list as ``collect_attention`` appends each layer's attention rows
    (B*heads, T, T) to it.
    """
    single = isinstance(inputs, EncodedInput)
    batch = [inputs] if single else list(inputs)
    if not batch:
        raise ContractError("encode needs at least one input")
    if mode not in ("train", "eval"):
        raise ContractError(f"mode must be 'train' or 'eval', got {mode!r}")
    train = mode == "train"
    if train and config.dropout > 0 and dropout_rng is None:
        raise ContractError("train mode needs a dropout_rng")

    ids, segs, mask = batch_arrays(batch)
    n, t = ids.shape
    if t > config.max_positions:
        raise ContractError(
            f"input length {t} exceeds max_positions {config.max_positions}")

    def drop(x):
        if train and config.dropout > 0:
            return T.dropout(x, config.dropout, dropout_rng)
        return x

    x = T.gather(_get(params, "shared/emb/token"), ids)
    x = x + T.gather(_get(params, "shared/emb/pos"), np.arange(t))
    x = x + T.gather(_get(params, "shared/emb/seg"), segs)
    x = T.layer_norm(x, _get(params, "shared/emb/gamma"),
                     _get(params, "shared/emb/beta"))
    x = drop(x)

    nh, dh = config.num_heads, config.head_size
    scale = 1.0 / math.sqrt(dh)
    # additive attention bias, -1e9 on padded key positions
    key_bias = np.repeat((1.0 - mask)[:, None, :] * _ATTN_MASK_BIAS, nh, axis=0)

    def split_heads(y):
        y = T.reshape(y, (n, t, nh, dh))
        y = T.transpose(y, (0, 2, 1, 3))
        return T.reshape(y, (n * nh, t, dh))

    for i in range(config.num_layers):
        p = f"shared/layer{i}"
        q = split_heads(x @ _get(params, f"{p}/attn/wq") + _get(params, f"{p}/attn/bq"))
        k = split_heads(x @ _get(params, f"{p}/attn/wk") + _get(params, f"{p}/attn/bk"))
        v = split_heads(x @ _get(params, f"{p}/attn/wv") + _get(params, f"{p}/attn/bv"))

        scores = (q @ T.transpose(k, (0, 2, 1))) * scale + T.Tensor(key_bias)
        probs = T.softmax(scores, axis=-1)
        if collect_attention is not None:
            collect_attention.append(probs.data)
        ctx = T.reshape(probs @ v, (n, nh, t, dh))
        ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (n, t, nh * dh))

        attn_out = drop(ctx @ _get(params, f"{p}/attn/wo") + _get(params, f"{p}/attn/bo"))
        x = T.layer_norm(x + attn_out, _get(params, f"{p}/attn/gamma"),
                         _get(params, f"{p}/attn/beta"))

        ff = T.gelu(x @ _get(params, f"{p}/ff/w1") + _get(params, f"{p}/ff/b1"))
        ff = drop(ff @ _get(params, f"{p}/ff/w2") + _get(params, f"{p}/ff/b2"))
        x = T.layer_norm(x + ff, _get(params, f"{p}/ff/gamma"),
                         _get(params, f"{p}/ff/beta"))

    return T.reshape(x, (t, config.hidden_size)) if single else x

"""Parameter store and the layers used by the confidence model."""

from __future__ import annotations

import hashlib
from typing import Iterator, Sequence

import numpy as np

from .tensor import Tensor, gelu, layer_norm, matmul, softmax, transpose


def _name_seed(seed: int, name: str) -> np.random.SeedSequence:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return np.random.SeedSequence([seed, int.from_bytes(digest[:8], "little")])


class Parameters:
    """Named learnable tensors, iterated in sorted-path order.

    Each tensor is initialized from its own stream derived from ``(seed, path)``,
    so initialization does not depend on the order parameters are declared.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._tensors: dict[str, Tensor] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._tensors[name]

    def num_values(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def set(self, name: str, values: np.ndarray) -> Tensor:
        t = Tensor(np.array(values, dtype=np.float64), requires_grad=True)
        self._tensors[name] = t
        return t

    def weight(self, name: str, fan_in: int, fan_out: int, shape: Sequence[int] | None = None) -> Tensor:
        """Glorot-uniform weight."""
        shape = tuple(shape) if shape is not None else (fan_in, fan_out)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        rng = np.random.default_rng(_name_seed(self.seed, name))
        return self.set(name, rng.uniform(-limit, limit, size=shape))

    def uniform(self, name: str, limit: float, shape: Sequence[int]) -> Tensor:
        rng = np.random.default_rng(_name_seed(self.seed, name))
        return self.set(name, rng.uniform(-limit, limit, size=tuple(shape)))

    def zeros(self, name: str, shape: Sequence[int]) -> Tensor:
        return self.set(name, np.zeros(tuple(shape)))

    def ones(self, name: str, shape: Sequence[int]) -> Tensor:
        return self.set(name, np.ones(tuple(shape)))

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, values in state.items():
            self.set(name, values)


# -- building blocks ---------------------------------------------------------------


def add_linear(params: Parameters, prefix: str, d_in: int, d_out: int) -> None:
    params.weight(f"{prefix}.w", d_in, d_out)
    params.zeros(f"{prefix}.b", (d_out,))


def linear(params: Parameters, prefix: str, x: Tensor) -> Tensor:
    return matmul(x, params[f"{prefix}.w"]) + params[f"{prefix}.b"]


def add_mlp(params: Parameters, prefix: str, sizes: Sequence[int]) -> None:
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        add_linear(params, f"{prefix}.{i}", a, b)


def mlp(params: Parameters, prefix: str, x: Tensor, n_layers: int) -> Tensor:
    """GELU between layers, identity after the last one."""
    for i in range(n_layers):
        x = linear(params, f"{prefix}.{i}", x)
        if i < n_layers - 1:
            x = gelu(x)
    return x


def add_layer_norm(params: Parameters, prefix: str, d: int) -> None:
    params.ones(f"{prefix}.gamma", (d,))
    params.zeros(f"{prefix}.beta", (d,))


def norm(params: Parameters, prefix: str, x: Tensor) -> Tensor:
    return layer_norm(x, params[f"{prefix}.gamma"], params[f"{prefix}.beta"])


def attention(queries: Tensor, keys: Tensor, values: Tensor,
              mask: np.ndarray | None = None, return_weights: bool = False):
    """Scaled dot-product attention, softmax(Q K^T / sqrt(d)) V.

    ``mask`` is a boolean array broadcastable to ``(..., n_queries, n_keys)``;
    True marks keys a query may attend to. A query with no allowed key raises.
    """
    if keys.shape[-2] != values.shape[-2]:
        raise ValueError(f"keys/values length mismatch: {keys.shape} vs {values.shape}")
    if queries.shape[-1] != keys.shape[-1]:
        raise ValueError(f"query/key dim mismatch: {queries.shape} vs {keys.shape}")
    d = queries.shape[-1]
    axes = tuple(range(keys.ndim - 2)) + (keys.ndim - 1, keys.ndim - 2)
    scores = matmul(queries, transpose(keys, axes)) * (1.0 / np.sqrt(d))
    weights = softmax(scores, axis=-1, mask=mask)
    out = matmul(weights, values)
    return (out, weights) if return_weights else out


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def add_multi_head_attention(params: Parameters, prefix: str, d: int, d_kv: int) -> None:
    params.weight(f"{prefix}.wq", d, d)
    params.weight(f"{prefix}.wk", d_kv, d)
    params.weight(f"{prefix}.wv", d_kv, d)
    add_linear(params, f"{prefix}.out", d, d)


def multi_head_attention(params: Parameters, prefix: str, x: Tensor, memory: Tensor,
                         n_heads: int, key_mask: np.ndarray | None) -> Tensor:
    """x: (B, M, d) queries; memory: (B, T, d_kv); key_mask: (B, T) bool."""
    B, M, d = x.shape
    T = memory.shape[1]
    if d % n_heads:
        raise ValueError(f"d={d} not divisible by n_heads={n_heads}")
    dh = d // n_heads

    def split(t: Tensor, n: int) -> Tensor:
        return transpose(t.reshape(B, n, n_heads, dh), (0, 2, 1, 3))

    q = split(matmul(x, params[f"{prefix}.wq"]), M)
    k = split(matmul(memory, params[f"{prefix}.wk"]), T)
    v = split(matmul(memory, params[f"{prefix}.wv"]), T)
    mask = None if key_mask is None else key_mask[:, None, None, :]
    heads = attention(q, k, v, mask)
    merged = transpose(heads, (0, 2, 1, 3)).reshape(B, M, d)
    return linear(params, f"{prefix}.out", merged)


def add_transformer_block(params: Parameters, prefix: str, d: int, d_a: int, d_ff: int) -> None:
    add_layer_norm(params, f"{prefix}.ln_self", d)
    add_multi_head_attention(params, f"{prefix}.self_attn", d, d)
    add_layer_norm(params, f"{prefix}.ln_cross", d)
    add_multi_head_attention(params, f"{prefix}.cross_attn", d, d_a)
    add_layer_norm(params, f"{prefix}.ln_ff", d)
    add_mlp(params, f"{prefix}.ff", (d, d_ff, d))


def transformer_block(params: Parameters, prefix: str, x: Tensor, acoustic: Tensor, n_heads: int,
                      x_mask: np.ndarray | None = None, a_mask: np.ndarray | None = None) -> Tensor:
    """Pre-norm decoder block: self-attn -> cross-attn -> feed-forward.

    x: (B, M, d) word-piece states, acoustic: (B, T, d_a). Self-attention is
    unmasked apart from padding; cross-attention sees every valid frame.
    2-D inputs are treated as a batch of one.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape(1, *x.shape)
        acoustic = acoustic.reshape(1, *acoustic.shape)
    if x.shape[1] == 0 or acoustic.shape[1] == 0:
        raise ValueError("transformer_block needs at least one token and one frame")
    h = norm(params, f"{prefix}.ln_self", x)
    x = x + multi_head_attention(params, f"{prefix}.self_attn", h, h, n_heads, x_mask)
    h = norm(params, f"{prefix}.ln_cross", x)
    x = x + multi_head_attention(params, f"{prefix}.cross_attn", h, acoustic, n_heads, a_mask)
    h = norm(params, f"{prefix}.ln_ff", x)
    x = x + mlp(params, f"{prefix}.ff", h, 2)
    if squeeze:
        x = x.reshape(*x.shape[1:])
    return x

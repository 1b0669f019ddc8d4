"""Self-attention kernels over an (instances x points) query grid.

Three variants share one scaled dot-product core:

* vanilla: all ``N * N_v`` tokens attend to each other;
* decoupled: attention along each instance's points ("horizontal"), then
  across instances at a fixed point index ("vertical");
* criss-cross: each token attends jointly over its row and column, applied
  twice so information reaches the whole grid.

Every kernel charges its matrix-product multiply-accumulates to a
:class:`MacCounter`, split into the token-interaction term and the
projection term.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

KERNELS = ("vanilla", "decoupled", "criss_cross")

# Query rows per block in vanilla attention; bounds the score buffer.
_CHUNK = 1024


@dataclass
class MacCounter:
    interaction: int = 0
    projection: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def total(self) -> int:
        return self.interaction + self.projection

    def add(self, interaction: int = 0, projection: int = 0) -> None:
        with self._lock:
            self.interaction += int(interaction)
            self.projection += int(projection)


@dataclass(frozen=True, eq=False)
class AttentionParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    heads: int = 1

    def __post_init__(self):
        mats = [np.array(m, dtype=np.float64) for m in (self.w_q, self.w_k, self.w_v)]
        d = mats[0].shape[0]
        for m in mats:
            if m.shape != (d, d):
                raise DomainError(f"projection matrices must be square {d}x{d}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise DomainError("projection matrices must be finite")
        if self.heads < 1 or d % self.heads:
            raise DomainError(f"heads={self.heads} must divide the width {d}")
        for name, m in zip(("w_q", "w_k", "w_v"), mats):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def dim(self) -> int:
        return self.w_q.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 / np.sqrt(self.dim // self.heads)

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, heads: int = 1) -> "AttentionParams":
        s = 1.0 / np.sqrt(dim)
        return cls(*(rng.normal(scale=s, size=(dim, dim)) for _ in range(3)), heads=heads)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 3 or min(g.shape) < 1:
        raise DomainError(f"query grid must have shape (N, N_v, d) with all sizes >= 1, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DomainError("query grid must be finite")
    return g


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    m = np.asarray(m, dtype=np.float64)
    e = np.exp(m - m.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    # (..., L, d) -> (..., heads, L, d/heads)
    *lead, length, d = x.shape
    return np.moveaxis(x.reshape(*lead, length, heads, d // heads), -2, -3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    *lead, heads, length, dh = x.shape
    return np.moveaxis(x, -3, -2).reshape(*lead, length, heads * dh)


def attention_block(q, k, v, scale: float | None = None, counter: MacCounter | None = None,
                    heads: int = 1) -> np.ndarray:
    """``softmax(q @ k.T * scale) @ v`` over the last two axes.

    Leading axes are batch axes. Charges ``2 * L**2 * d`` interaction MACs
    per batch entry.
    """
    q, k, v = (np.asarray(x, dtype=np.float64) for x in (q, k, v))
    if q.shape != k.shape or q.shape != v.shape or q.ndim < 2:
        raise DomainError(f"q, k, v shapes must match, got {q.shape}, {k.shape}, {v.shape}")
    length, d = q.shape[-2:]
    if d % heads:
        raise DomainError(f"heads={heads} must divide the width {d}")
    if scale is None:
        scale = 1.0 / np.sqrt(d // heads)
    batch = int(np.prod(q.shape[:-2], dtype=np.int64))
    if counter is not None:
        counter.add(interaction=2 * batch * length * length * d)
    if heads > 1:
        qh, kh, vh = (_split_heads(x, heads) for x in (q, k, v))
        return _merge_heads(attention_block(qh, kh, vh, scale))
    if length <= _CHUNK:
        return softmax_rows(q @ np.swapaxes(k, -1, -2) * scale) @ v
    out = np.empty_like(q)
    kt = np.swapaxes(k, -1, -2)
    for start in range(0, length, _CHUNK):
        stop = start + _CHUNK
        out[..., start:stop, :] = softmax_rows(q[..., start:stop, :] @ kt * scale) @ v
    return out


def _project(x: np.ndarray, params: AttentionParams, counter: MacCounter | None):
    tokens = int(np.prod(x.shape[:-1], dtype=np.int64))
    if counter is not None:
        counter.add(projection=3 * tokens * params.dim * params.dim)
    return x @ params.w_q, x @ params.w_k, x @ params.w_v


def vanilla_self_attention(grid, params: AttentionParams, counter: MacCounter | None = None) -> np.ndarray:
    g = _check_grid(grid)
    n, nv, d = g.shape
    tokens = g.reshape(n * nv, d)
    q, k, v = _project(tokens, params, counter)
    out = attention_block(q, k, v, params.scale, counter, params.heads)
    return out.reshape(n, nv, d)


def _row_pass(x, params, counter):
    # Attention within each instance, over its N_v point tokens.
    q, k, v = _project(x, params, counter)
    return attention_block(q, k, v, params.scale, counter, params.heads)


def decoupled_self_attention(grid, params: AttentionParams, counter: MacCounter | None = None) -> np.ndarray:
    """Row attention within each instance, then column attention across instances.

    Both passes use the same projections.
    """
    g = _check_grid(grid)
    rows = _row_pass(g, params, counter)
    cols = _row_pass(np.swapaxes(rows, 0, 1), params, counter)
    return np.ascontiguousarray(np.swapaxes(cols, 0, 1))


def _criss_cross_once(x, params, counter):
    n, nv, d = x.shape
    q, k, v = _project(x, params, counter)
    if counter is not None:
        counter.add(interaction=2 * n * nv * (n + nv - 1) * d)
    heads = params.heads
    # (heads, N, N_v, dh)
    qh, kh, vh = (np.moveaxis(t.reshape(n, nv, heads, d // heads), 2, 0) for t in (q, k, v))
    row_e = np.einsum("hnvc,hnwc->hnvw", qh, kh) * params.scale
    col_e = np.einsum("hnvc,hmvc->hnvm", qh, kh) * params.scale
    # The token itself is already in its row; mask it out of the column set.
    col_e[:, np.arange(n), :, np.arange(n)] = -np.inf
    attn = softmax_rows(np.concatenate([row_e, col_e], axis=-1))
    row_a, col_a = attn[..., :nv], attn[..., nv:]
    out = np.einsum("hnvw,hnwc->hnvc", row_a, vh) + np.einsum("hnvm,hmvc->hnvc", col_a, vh)
    return np.moveaxis(out, 0, 2).reshape(n, nv, d)


def criss_cross_attention(grid, params: AttentionParams, counter: MacCounter | None = None,
                          recurrence: int = 2) -> np.ndarray:
    """Each token attends over its row and column; repeated ``recurrence`` times."""
    x = _check_grid(grid)
    for _ in range(recurrence):
        x = _criss_cross_once(x, params, counter)
    return x


_KERNEL_FUNCS = {
    "vanilla": vanilla_self_attention,
    "decoupled": decoupled_self_attention,
    "criss_cross": criss_cross_attention,
}


def get_kernel(name: str):
    try:
        return _KERNEL_FUNCS[name.replace("-", "_")]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; choose from {', '.join(KERNELS)}") from None


def count_macs(kernel: str, n: int, n_points: int, dim: int, seed: int = 0) -> MacCounter:
    """Run ``kernel`` on a random grid and return its MAC counter."""
    rng = np.random.default_rng(seed)
    counter = MacCounter()
    get_kernel(kernel)(rng.normal(size=(n, n_points, dim)), AttentionParams.random(dim, rng), counter)
    return counter


def fit_exponent(lengths, counts) -> float:
    """Least-squares slope of ``log(counts)`` against ``log(lengths)``."""
    x = np.log(np.asarray(lengths, dtype=np.float64))
    y = np.log(np.asarray(counts, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def measure_scaling(kernel: str, sizes, dim: int, seed: int = 0):
    """Fit the interaction-MAC exponent of ``kernel`` against token count.

    ``sizes`` are square ``(N, N_v)`` grids spanning at least a decade of
    ``L = N * N_v``. Returns ``(slope, rows)`` where each row is
    ``(n, n_points, L, interaction_macs, projection_macs)``.
    """
    sizes = [(int(a), int(b)) for a, b in sizes]
    if len(sizes) < 3:
        raise DomainError(f"need at least 3 sizes to fit an exponent, got {len(sizes)}")
    if any(a != b for a, b in sizes):
        raise DomainError("scaling fit needs square grids (N == N_v)")
    lengths = [a * b for a, b in sizes]
    if max(lengths) < 10 * min(lengths):
        raise DomainError("sizes must span at least one decade of N * N_v")
    rows = []
    for n, nv in sizes:
        c = count_macs(kernel, n, nv, dim, seed)
        rows.append((n, nv, n * nv, c.interaction, c.projection))
    return fit_exponent([r[2] for r in rows], [r[3] for r in rows]), rows


def _attention_block_backward(q, k, v, scale, grad_out):
    p = softmax_rows(q @ np.swapaxes(k, -1, -2) * scale)
    grad_v = np.swapaxes(p, -1, -2) @ grad_out
    grad_p = grad_out @ np.swapaxes(v, -1, -2)
    grad_s = p * (grad_p - np.sum(grad_p * p, axis=-1, keepdims=True))
    grad_q = grad_s @ k * scale
    grad_k = np.swapaxes(grad_s, -1, -2) @ q * scale
    return grad_q, grad_k, grad_v


def _row_pass_backward(x, params, grad_out):
    q, k, v = x @ params.w_q, x @ params.w_k, x @ params.w_v
    h = params.heads
    if h > 1:
        gq, gk, gv = _attention_block_backward(
            _split_heads(q, h), _split_heads(k, h), _split_heads(v, h),
            params.scale, _split_heads(grad_out, h),
        )
        gq, gk, gv = _merge_heads(gq), _merge_heads(gk), _merge_heads(gv)
    else:
        gq, gk, gv = _attention_block_backward(q, k, v, params.scale, grad_out)
    d = x.shape[-1]
    flat_x = x.reshape(-1, d)
    grads_w = tuple(flat_x.T @ g.reshape(-1, d) for g in (gq, gk, gv))
    grad_x = gq @ params.w_q.T + gk @ params.w_k.T + gv @ params.w_v.T
    return grad_x, grads_w


def decoupled_self_attention_backward(grid, params: AttentionParams, grad_out):
    """Vector-Jacobian product of :func:`decoupled_self_attention`.

    Returns ``(grad_grid, (grad_w_q, grad_w_k, grad_w_v))``.
    """
    g = _check_grid(grid)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != g.shape:
        raise DomainError(f"grad_out shape {grad_out.shape} does not match grid {g.shape}")
    rows = _row_pass(g, params, None)
    cols_in = np.swapaxes(rows, 0, 1)
    grad_cols_in, w2 = _row_pass_backward(cols_in, params, np.swapaxes(grad_out, 0, 1))
    grad_rows = np.swapaxes(grad_cols_in, 0, 1)
    grad_grid, w1 = _row_pass_backward(g, params, grad_rows)
    return grad_grid, tuple(a + b for a, b in zip(w1, w2))

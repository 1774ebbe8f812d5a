"""Context spatial extraction: signed graphs over local spatio-temporal windows.

Adjacent patch pairs of all variables form local windows of 2C nodes. A
learnable bilinear distance scores every node pair per head; scores become
signed edge weights (softmax- or tanh-normalized, sign preserved, unlike a
plain softmax which erases negative correlation), get KNN-sparsified by
magnitude, drive a one-layer graph convolution, and the two views of each
patch are pooled back onto the patch grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import merge_heads, split_heads
from .errors import ConfigError, ShapeError

VARIANT_SOFTMAX_SIGNED = "softmax-signed"
VARIANT_TANH_SIGNED = "tanh-signed"
VARIANT_SOFTMAX_PLAIN = "softmax-plain"


@dataclass
class SignedGraph:
    """Per-head signed adjacency (..., H, n, n); masked entries are exactly zero."""

    weights: T.Tensor
    variant: str
    mask: np.ndarray | None = None  # bool retention mask once KNN-sparsified


@dataclass
class DistanceParams:
    """Learnable bilinear form over head-split features, shared across heads."""

    q: T.Tensor  # (d_h, d_h), or (H, d_h, d_h) when per-head

    def params(self) -> list[T.Tensor]:
        return [self.q]


def default_knn_k(n: int) -> int:
    return max(2, -(-n // 2))


def make_windows(tokens: T.Tensor) -> T.Tensor:
    """(..., C, N, D) -> (..., N-1, 2C, D): stride-1 windows of 2 adjacent patches.

    Node order inside window k is [var0@k, var0@k+1, var1@k, var1@k+1, ...].
    """
    c, n, d = tokens.shape[-3], tokens.shape[-2], tokens.shape[-1]
    if n < 2:
        raise ConfigError(f"need at least 2 patches for local windows, got {n}")
    prev = tokens[..., :, : n - 1, :]
    nxt = tokens[..., :, 1:, :]
    paired = T.stack([prev, nxt], axis=-2)  # (..., C, K, 2, D)
    nd = paired.ndim
    axes = tuple(range(nd - 4)) + (nd - 3, nd - 4, nd - 2, nd - 1)
    paired = T.transpose(paired, axes)  # (..., K, C, 2, D)
    return paired.reshape(paired.shape[:-3] + (2 * c, d))


def signed_distance(window: T.Tensor, params: DistanceParams, heads: int) -> T.Tensor:
    """Bilinear scores s_ij = x_i Q x_j^T per head: (..., n, D) -> (..., H, n, n).

    Q is unconstrained, so the scores (and the graph) are generally
    asymmetric. Head width is floor(D/heads); spare features are ignored.
    """
    d = window.shape[-1]
    if heads > d:
        raise ConfigError(f"gcn heads ({heads}) exceed feature width ({d})")
    d_h = d // heads
    if params.q.shape[-1] != d_h or params.q.shape[-2] != d_h:
        raise ShapeError(
            f"distance form is {params.q.shape}, expected trailing ({d_h}, {d_h})"
        )
    xh = split_heads(window[..., : heads * d_h], heads)  # (..., H, n, d_h)
    xht = T.transpose(xh, tuple(range(xh.ndim - 2)) + (xh.ndim - 1, xh.ndim - 2))
    return T.matmul(T.matmul(xh, params.q), xht)


def sign_softmax_graph(scores: T.Tensor) -> SignedGraph:
    """Row softmax over |s|, re-signed by sign(s); sign(0) counts as +."""
    sign = np.where(scores.data >= 0.0, 1.0, -1.0)
    mag = scores * T.Tensor(sign)
    weights = T.softmax(mag, axis=-1) * T.Tensor(sign)
    return SignedGraph(weights, VARIANT_SOFTMAX_SIGNED)


def tanh_l1_graph(scores: T.Tensor) -> SignedGraph:
    """tanh(s) normalized by the row L1 norm; all-zero rows stay all-zero."""
    th = T.tanh(scores)
    denom = T.absolute(th).sum(axis=-1, keepdims=True)
    guard = (denom.data == 0.0).astype(np.float64)
    weights = th / (denom + T.Tensor(guard))
    return SignedGraph(weights, VARIANT_TANH_SIGNED)


def plain_softmax_graph(scores: T.Tensor) -> SignedGraph:
    """Ordinary softmax on raw scores: nonnegative weights, signs erased."""
    return SignedGraph(T.softmax(scores, axis=-1), VARIANT_SOFTMAX_PLAIN)


GRAPH_BUILDERS = {
    "tanh": tanh_l1_graph,
    "softmax": sign_softmax_graph,
    "plain": plain_softmax_graph,
}


def knn_sparsify(graph: SignedGraph, k: int) -> SignedGraph:
    """Keep the k largest-|weight| entries per row (self always kept, counted).

    Ties break toward the lower column index. The mask is a constant of the
    forward pass: gradients flow only through retained entries.
    """
    n = graph.weights.shape[-1]
    if not 1 <= k <= n:
        raise ConfigError(f"knn k must be in [1, {n}], got {k}")
    absw = np.abs(graph.weights.data).copy()
    idx = np.arange(n)
    absw[..., idx, idx] = np.inf  # self-edge ranks first
    order = np.argsort(-absw, axis=-1, kind="stable")
    mask = np.zeros(graph.weights.shape, dtype=bool)
    np.put_along_axis(mask, order[..., :k], True, axis=-1)
    weights = graph.weights * T.Tensor(mask.astype(np.float64))
    return SignedGraph(weights, graph.variant, mask)


@dataclass
class GcnParams:
    weight: T.Tensor  # (H, d_h, d_h) per-head transforms
    activation: str = "silu"

    def params(self) -> list[T.Tensor]:
        return [self.weight]


_ACTIVATIONS = {
    "silu": T.silu,
    "relu": T.relu,
    "tanh": T.tanh,
    "identity": lambda x: x,
}


def gcn(window: T.Tensor, graph: SignedGraph, params: GcnParams) -> T.Tensor:
    """One signed graph convolution with residual: x + act(G @ x_h @ W_h) per head."""
    d = window.shape[-1]
    heads = graph.weights.shape[-3]
    if d % heads != 0:
        raise ConfigError(f"gcn heads ({heads}) must divide feature width ({d})")
    act = _ACTIVATIONS[params.activation]
    xh = split_heads(window, heads)  # (..., H, n, d_h)
    agg = T.matmul(graph.weights, xh)
    out = merge_heads(act(T.matmul(agg, params.weight)))
    return window + out


def overlap_pool(
    e_prev: T.Tensor | None, e_curr: T.Tensor | None, mode: str = "mean"
) -> T.Tensor:
    """Pool the two views of one patch: slot 1 of window k-1 and slot 0 of window k.

    Boundary patches pass ``None`` for the missing side and keep their single view.
    Inputs are (..., 2C, D); output is (..., C, D).
    """
    if e_prev is None and e_curr is None:
        raise ShapeError("overlap_pool needs at least one window")

    def _slot(e: T.Tensor, j: int) -> T.Tensor:
        n, d = e.shape[-2], e.shape[-1]
        return e.reshape(e.shape[:-2] + (n // 2, 2, d))[..., :, j, :]

    if e_prev is None:
        return _slot(e_curr, 0)
    if e_curr is None:
        return _slot(e_prev, 1)
    a, b = _slot(e_prev, 1), _slot(e_curr, 0)
    if mode == "mean":
        return (a + b) * 0.5
    if mode == "max":
        return T.maximum(a, b)
    raise ConfigError(f"unknown pool mode {mode!r}")


def pool_windows(gcn_out: T.Tensor, mode: str = "mean") -> T.Tensor:
    """All patches at once: (..., K, 2C, D) window outputs -> (..., C, N, D)."""
    k2, n2, d = gcn_out.shape[-3], gcn_out.shape[-2], gcn_out.shape[-1]
    c = n2 // 2
    e = gcn_out.reshape(gcn_out.shape[:-2] + (c, 2, d))  # (..., K, C, 2, D)
    slot0 = e[..., :, :, 0, :]  # (..., K, C, D): view of patches 0..N-2
    slot1 = e[..., :, :, 1, :]  # view of patches 1..N-1
    first = slot0[..., :1, :, :]
    last = slot1[..., k2 - 1 : k2, :, :]
    if k2 > 1:
        a = slot1[..., : k2 - 1, :, :]
        b = slot0[..., 1:, :, :]
        mid = (a + b) * 0.5 if mode == "mean" else T.maximum(a, b)
        stacked = T.concat([first, mid, last], axis=-3)  # (..., N, C, D)
    else:
        stacked = T.concat([first, last], axis=-3)
    nd = stacked.ndim
    axes = tuple(range(nd - 3)) + (nd - 2, nd - 3, nd - 1)
    return T.transpose(stacked, axes)  # (..., C, N, D)


@dataclass
class SpatialParams:
    """Everything the context extractor needs besides the tokens."""

    distance: DistanceParams
    gcn: GcnParams
    heads: int
    graph_variant: str = "tanh"
    knn_k: int | None = None
    pool: str = "mean"
    mode: str = "local"  # local | same_step | global

    def params(self) -> list[T.Tensor]:
        return self.distance.params() + self.gcn.params()


def _graph_for(scores: T.Tensor, p: SpatialParams, force_full: bool = False) -> SignedGraph:
    g = GRAPH_BUILDERS[p.graph_variant](scores)
    n = scores.shape[-1]
    k = n if force_full else (p.knn_k if p.knn_k is not None else default_knn_k(n))
    return knn_sparsify(g, k)


def context_spatial_extract(tokens: T.Tensor, p: SpatialParams) -> T.Tensor:
    """Full spatial pathway: windows -> signed graph -> KNN -> GCN -> pooling.

    mode "local" uses 2-patch windows with overlap pooling; "same_step"
    restricts each window to one patch (no temporal context); "global"
    connects all C*N patches in a single fully-retained window.
    """
    c, n, d = tokens.shape[-3], tokens.shape[-2], tokens.shape[-1]
    if p.mode == "local":
        windows = make_windows(tokens)  # (..., K, 2C, D)
        scores = signed_distance(windows, p.distance, p.heads)
        graph = _graph_for(scores, p)
        return pool_windows(gcn(windows, graph, p.gcn), p.pool)
    if p.mode == "same_step":
        nd = tokens.ndim
        axes = tuple(range(nd - 3)) + (nd - 2, nd - 3, nd - 1)
        nodes = T.transpose(tokens, axes)  # (..., N, C, D)
        scores = signed_distance(nodes, p.distance, p.heads)
        graph = _graph_for(scores, p)
        out = gcn(nodes, graph, p.gcn)
        return T.transpose(out, axes)
    if p.mode == "global":
        nodes = tokens.reshape(tokens.shape[:-3] + (c * n, d))
        scores = signed_distance(nodes, p.distance, p.heads)
        graph = _graph_for(scores, p, force_full=True)
        out = gcn(nodes, graph, p.gcn)
        return out.reshape(tokens.shape)
    raise ConfigError(f"unknown spatial mode {p.mode!r}")

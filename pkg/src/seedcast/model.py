"""Full forecaster assembly: dual pathways, fusion, residual blocks, projection.

One encoder layer runs the per-variable temporal attention and the signed-
graph spatial extractor side by side, blends them with entropy/similarity
weights, then applies the usual residual + layer-norm + feed-forward block.
Every ablation variant is a wiring change over the same parameter set, so a
shared seed yields comparable runs.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import AttentionParams, temporal_attention
from .embedding import (
    EmbedParams,
    HeadParams,
    instance_normalize,
    patch_and_embed,
    positional_encoding,
    project_output,
)
from .errors import ConfigError
from .fuser import blend, fusion_weights, patch_similarity
from .graph import DistanceParams, GcnParams, SpatialParams, context_spatial_extract
from .rng import RngState
from .spectral import ShapingFilter, entropy_tensor

VARIANTS = (
    "full",
    "wo_tattn",
    "wo_cse",
    "re_s1",
    "re_s2",
    "re_f1",
    "re_f2",
    "re_f3",
    "re_c1",
    "re_c2",
)

_CKPT_MAGIC = b"SEEDCKPT"
_CKPT_VERSION = 1


@dataclass
class ModelConfig:
    lookback: int = 96
    horizon: int = 96
    patch_len: int = 16
    d_model: int = 64
    attn_heads: int = 4
    gcn_heads: int = 4
    knn_k: int | None = None
    graph_variant: str = "tanh"  # tanh | softmax
    pool: str = "mean"  # mean | max
    lam: float = 0.1  # weight of the entropy-matching loss term
    n_layers: int = 2
    revin: bool = True
    detach_entropy: bool = True
    variant: str = "full"
    seed: int = 0
    n_vars: int | None = None  # needed for shape validation and re_f1 sizing
    gcn_activation: str = "silu"
    per_head_q: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("lookback", "horizon", "patch_len", "d_model", "attn_heads",
                     "gcn_heads", "n_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.patch_len > self.lookback:
            raise ConfigError(
                f"patch_len ({self.patch_len}) exceeds lookback ({self.lookback})"
            )
        if self.d_model % self.attn_heads != 0:
            raise ConfigError(
                f"attn_heads ({self.attn_heads}) must divide d_model ({self.d_model})"
            )
        if self.d_model % self.gcn_heads != 0:
            raise ConfigError(
                f"gcn_heads ({self.gcn_heads}) must divide d_model ({self.d_model})"
            )
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.graph_variant not in ("tanh", "softmax"):
            raise ConfigError(f"graph_variant must be tanh or softmax, got {self.graph_variant!r}")
        if self.pool not in ("mean", "max"):
            raise ConfigError(f"pool must be mean or max, got {self.pool!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "re_f1" and self.n_vars is None:
            raise ConfigError("variant re_f1 needs n_vars (per-variable fusion scalar)")

    @property
    def n_patches(self) -> int:
        return -(-self.lookback // self.patch_len)

    def to_dict(self) -> dict:
        d = {
            "lookback": self.lookback, "horizon": self.horizon,
            "patch_len": self.patch_len, "d_model": self.d_model,
            "attn_heads": self.attn_heads, "gcn_heads": self.gcn_heads,
            "knn_k": self.knn_k, "graph_variant": self.graph_variant,
            "pool": self.pool, "lambda": self.lam, "n_layers": self.n_layers,
            "revin": self.revin, "detach_entropy": self.detach_entropy,
            "variant": self.variant, "seed": self.seed, "n_vars": self.n_vars,
            "gcn_activation": self.gcn_activation, "per_head_q": self.per_head_q,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


def apply_variant(config: ModelConfig) -> dict:
    """Resolve a variant name into the wiring the forward pass follows."""
    v = config.variant
    if v not in VARIANTS:
        raise ConfigError(f"unknown variant {v!r}")
    wiring = {
        "temporal": v != "wo_tattn",
        "spatial": v != "wo_cse",
        "graph": {"re_s1": "plain", "re_s2": "softmax"}.get(v, config.graph_variant),
        "spatial_mode": {"re_c1": "same_step", "re_c2": "global"}.get(v, "local"),
        "fusion": {
            "wo_tattn": "spatial_only",
            "wo_cse": "temporal_only",
            "re_f1": "learned_scalar",
            "re_f2": "swapped",
            "re_f3": "learned_map",
        }.get(v, "entropy_sim"),
    }
    return wiring


@dataclass
class LayerParams:
    attn: AttentionParams
    spatial: SpatialParams
    ff_w1: T.Tensor
    ff_b1: T.Tensor
    ff_w2: T.Tensor
    ff_b2: T.Tensor
    ln1_g: T.Tensor
    ln1_b: T.Tensor
    ln2_g: T.Tensor
    ln2_b: T.Tensor
    fuse_theta: T.Tensor | None = None  # re_f1: per-variable scalar before sigmoid
    fuse_w: T.Tensor | None = None  # re_f3: (2D, 1)
    fuse_b: T.Tensor | None = None  # re_f3: (1,)


def layer_norm(x: T.Tensor, gamma: T.Tensor, beta: T.Tensor, eps: float = 1e-5) -> T.Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / T.sqrt(var + eps) * gamma + beta


class SeedModel:
    """Entropy-guided dual-path forecaster over patch tokens."""

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        self.wiring = apply_variant(config)
        rng = RngState(config.seed)
        L, P, D = config.lookback, config.patch_len, config.d_model
        N, H = config.n_patches, config.gcn_heads
        d_h = D // H

        def w(shape, scale):
            return T.Tensor(rng.normal(shape, scale), requires_grad=True)

        def zeros(shape):
            return T.Tensor(np.zeros(shape), requires_grad=True)

        self.filter = ShapingFilter(L)
        self.embed = EmbedParams(w((P, D), P**-0.5), zeros(D), positional_encoding(N, D))
        self.layers: list[LayerParams] = []
        for _ in range(config.n_layers):
            attn = AttentionParams(
                wq=w((D, D), D**-0.5), wk=w((D, D), D**-0.5), wv=w((D, D), D**-0.5),
                wo=w((D, D), D**-0.5), bq=zeros(D), bk=zeros(D), bv=zeros(D),
                bo=zeros(D), heads=config.attn_heads,
            )
            q_shape = (H, d_h, d_h) if config.per_head_q else (d_h, d_h)
            spatial = SpatialParams(
                distance=DistanceParams(w(q_shape, 1.0 / d_h)),
                gcn=GcnParams(w((H, d_h, d_h), d_h**-0.5), config.gcn_activation),
                heads=H,
                graph_variant=self.wiring["graph"],
                knn_k=config.knn_k,
                pool=config.pool,
                mode=self.wiring["spatial_mode"],
            )
            n_vars = config.n_vars if config.n_vars is not None else 1
            self.layers.append(LayerParams(
                attn=attn, spatial=spatial,
                ff_w1=w((D, 2 * D), D**-0.5), ff_b1=zeros(2 * D),
                ff_w2=w((2 * D, D), (2 * D) ** -0.5), ff_b2=zeros(D),
                ln1_g=T.Tensor(np.ones(D), requires_grad=True), ln1_b=zeros(D),
                ln2_g=T.Tensor(np.ones(D), requires_grad=True), ln2_b=zeros(D),
                fuse_theta=zeros(n_vars),
                fuse_w=w((2 * D, 1), (2 * D) ** -0.5), fuse_b=zeros(1),
            ))
        self.head = HeadParams(w((N * D, config.horizon), (N * D) ** -0.5),
                               zeros(config.horizon))

    # -- parameter registry ---------------------------------------------------

    def named_params(self) -> dict[str, T.Tensor]:
        reg: dict[str, T.Tensor] = {
            "filter.re": self.filter.w_re,
            "filter.im": self.filter.w_im,
            "embed.weight": self.embed.weight,
            "embed.bias": self.embed.bias,
        }
        for i, lp in enumerate(self.layers):
            pre = f"layer{i}."
            a = lp.attn
            reg.update({
                pre + "attn.wq": a.wq, pre + "attn.wk": a.wk, pre + "attn.wv": a.wv,
                pre + "attn.wo": a.wo, pre + "attn.bq": a.bq, pre + "attn.bk": a.bk,
                pre + "attn.bv": a.bv, pre + "attn.bo": a.bo,
                pre + "dist.q": lp.spatial.distance.q,
                pre + "gcn.weight": lp.spatial.gcn.weight,
                pre + "ff.w1": lp.ff_w1, pre + "ff.b1": lp.ff_b1,
                pre + "ff.w2": lp.ff_w2, pre + "ff.b2": lp.ff_b2,
                pre + "ln1.g": lp.ln1_g, pre + "ln1.b": lp.ln1_b,
                pre + "ln2.g": lp.ln2_g, pre + "ln2.b": lp.ln2_b,
                pre + "fuse.theta": lp.fuse_theta,
                pre + "fuse.w": lp.fuse_w, pre + "fuse.b": lp.fuse_b,
            })
        reg["head.weight"] = self.head.weight
        reg["head.bias"] = self.head.bias
        return reg

    def params(self) -> list[T.Tensor]:
        return list(self.named_params().values())

    def count_params(self) -> int:
        return sum(p.size for p in self.params())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_params().items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]):
        reg = self.named_params()
        for k, v in state.items():
            if k not in reg:
                raise ConfigError(f"unknown parameter {k!r} in state")
            if reg[k].shape != v.shape:
                raise ConfigError(
                    f"parameter {k!r} shape mismatch: model {reg[k].shape}, state {v.shape}"
                )
            reg[k].data = v.astype(np.float64).copy()
            reg[k].grad = None

    # -- forward ----------------------------------------------------------------

    def forward(self, window, force_fusion_weight: float | None = None) -> T.Tensor:
        """Forecast (C, T) from a (C, L) window; batched (B, C, L) works too."""
        x = np.asarray(window, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.ndim != 3:
            raise ConfigError(f"window must be (C, L) or (B, C, L), got shape {x.shape}")
        cfg = self.config
        if x.shape[-1] != cfg.lookback:
            raise ConfigError(f"window length {x.shape[-1]} != lookback {cfg.lookback}")
        if cfg.n_vars is not None and x.shape[-2] != cfg.n_vars:
            raise ConfigError(f"window has {x.shape[-2]} variables, config says {cfg.n_vars}")

        if cfg.revin:
            xn, stats = instance_normalize(x)
        else:
            xn, stats = x, None
        ent = entropy_tensor(T.Tensor(xn), self.filter, degenerate="zero")  # (B, C)
        if cfg.detach_entropy:
            ent = ent.detach()
        tokens = patch_and_embed(xn, self.embed).values  # (B, C, N, D)
        for lp in self.layers:
            tokens = self._encoder_layer(tokens, ent, lp, force_fusion_weight)
        out = project_output(tokens, self.head, stats)  # (B, C, T)
        return out[0] if single else out

    def entropy_of(self, window) -> np.ndarray:
        """Per-variable entropy exactly as the forward pass sees it."""
        x = np.asarray(window, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        xn = instance_normalize(x)[0] if self.config.revin else x
        with T.no_grad():
            return entropy_tensor(T.Tensor(xn), self.filter, degenerate="zero").data[0]

    def _encoder_layer(self, x, ent, lp: LayerParams, force_w):
        wiring = self.wiring
        t_feat = temporal_attention(x, lp.attn) if wiring["temporal"] else None
        e_feat = context_spatial_extract(x, lp.spatial) if wiring["spatial"] else None

        mode = wiring["fusion"]
        if force_w is not None:
            f = blend(t_feat, e_feat, T.Tensor(np.full(x.shape[:-1], force_w)))
        elif mode == "temporal_only":
            f = t_feat
        elif mode == "spatial_only":
            f = e_feat
        elif mode == "entropy_sim":
            f = blend(t_feat, e_feat, fusion_weights(ent, patch_similarity(t_feat, e_feat)))
        elif mode == "swapped":
            f = blend(e_feat, t_feat, fusion_weights(ent, patch_similarity(t_feat, e_feat)))
        elif mode == "learned_scalar":
            w = T.sigmoid(lp.fuse_theta).reshape((lp.fuse_theta.size, 1))  # (C, 1) -> over patches
            f = blend(t_feat, e_feat, w)
        elif mode == "learned_map":
            feats = T.concat([t_feat, e_feat], axis=-1)  # (..., C, N, 2D)
            w = T.sigmoid(T.matmul(feats, lp.fuse_w) + lp.fuse_b)
            f = blend(t_feat, e_feat, w.reshape(w.shape[:-1]))
        else:
            raise ConfigError(f"unhandled fusion mode {mode!r}")

        h = layer_norm(x + f, lp.ln1_g, lp.ln1_b)
        ff = T.matmul(T.silu(T.matmul(h, lp.ff_w1) + lp.ff_b1), lp.ff_w2) + lp.ff_b2
        return layer_norm(h + ff, lp.ln2_g, lp.ln2_b)

    # -- checkpointing --------------------------------------------------------------

    def save(self, path: str):
        """Self-describing flat file: magic, version, config JSON, named f64 blobs."""
        buf = io.BytesIO()
        buf.write(_CKPT_MAGIC)
        buf.write(struct.pack("<I", _CKPT_VERSION))
        cfg = json.dumps(self.config.to_dict(), sort_keys=True).encode()
        buf.write(struct.pack("<I", len(cfg)))
        buf.write(cfg)
        state = self.state_arrays()
        buf.write(struct.pack("<I", len(state)))
        for name, arr in state.items():
            nb = name.encode()
            buf.write(struct.pack("<H", len(nb)))
            buf.write(nb)
            buf.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                buf.write(struct.pack("<I", dim))
            buf.write(arr.astype("<f8").tobytes())
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path: str) -> "SeedModel":
        with open(path, "rb") as fh:
            raw = fh.read()
        off = 0
        if raw[:8] != _CKPT_MAGIC:
            raise ConfigError(f"{path}: not a model checkpoint (bad magic)")
        off = 8
        (version,) = struct.unpack_from("<I", raw, off)
        off += 4
        if version != _CKPT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {version}")
        (clen,) = struct.unpack_from("<I", raw, off)
        off += 4
        config = ModelConfig.from_dict(json.loads(raw[off : off + clen].decode()))
        off += clen
        (n_params,) = struct.unpack_from("<I", raw, off)
        off += 4
        state: dict[str, np.ndarray] = {}
        for _ in range(n_params):
            (nlen,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off : off + nlen].decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, off) if ndim else ()
            off += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
            off += 8 * count
            state[name] = arr.copy()
        model = cls(config)
        model.load_state_arrays(state)
        return model


def count_params(model: SeedModel) -> int:
    return model.count_params()

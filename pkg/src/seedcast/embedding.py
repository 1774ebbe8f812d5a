"""Patching, value embedding with positional encoding, and the output head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError

STD_FLOOR = 1e-5


@dataclass
class NormStats:
    """Per-variable mean/std over the lookback, kept for inverting the z-score."""

    mean: np.ndarray  # (..., C, 1)
    std: np.ndarray   # (..., C, 1), floored at STD_FLOOR


@dataclass
class PatchTokens:
    """Embedded patch representations: values is a (..., C, N, D) tensor."""

    values: T.Tensor
    patch_len: int
    n_patches: int


def instance_normalize(window: np.ndarray) -> tuple[np.ndarray, NormStats]:
    """Z-score each variable over its lookback; stats returned for inversion.

    Rows with sub-floor variance count as constant and map to exact zeros
    (mean-subtraction roundoff would otherwise leak through the floored
    divisor).
    """
    window = np.asarray(window, dtype=np.float64)
    mean = window.mean(axis=-1, keepdims=True)
    raw_std = window.std(axis=-1, keepdims=True)
    degenerate = raw_std < STD_FLOOR
    std = np.where(degenerate, STD_FLOOR, raw_std)
    out = np.where(degenerate, 0.0, (window - mean) / std)
    return out, NormStats(mean, std)


def positional_encoding(n_positions: int, d_model: int) -> np.ndarray:
    """Fixed sinusoidal encoding over the patch index."""
    pos = np.arange(n_positions)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (i - i % 2) / d_model)
    pe = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return pe


def split_patches(window: np.ndarray, patch_len: int) -> np.ndarray:
    """Non-overlapping length-P patches; the ragged tail is zero-padded."""
    window = np.asarray(window, dtype=np.float64)
    L = window.shape[-1]
    if not 1 <= patch_len <= L:
        raise ConfigError(f"patch_len must be in [1, {L}], got {patch_len}")
    n = -(-L // patch_len)  # ceil
    padded = n * patch_len
    if padded != L:
        pad = np.zeros(window.shape[:-1] + (padded - L,))
        window = np.concatenate([window, pad], axis=-1)
    return window.reshape(window.shape[:-1] + (n, patch_len))


@dataclass
class EmbedParams:
    weight: T.Tensor  # (P, D)
    bias: T.Tensor    # (D,)
    pe: np.ndarray    # (N, D), fixed


def patch_and_embed(window: np.ndarray, params: EmbedParams) -> PatchTokens:
    """Patch the window, map each patch to D dims, add positional encoding."""
    patch_len = params.weight.shape[0]
    patches = split_patches(window, patch_len)
    n = patches.shape[-2]
    if params.pe.shape[0] != n:
        raise ShapeError(
            f"positional encoding covers {params.pe.shape[0]} patches, window yields {n}"
        )
    tokens = T.matmul(T.Tensor(patches), params.weight) + params.bias + T.Tensor(params.pe)
    return PatchTokens(tokens, patch_len, n)


@dataclass
class HeadParams:
    weight: T.Tensor  # (N*D, T)
    bias: T.Tensor    # (T,)


def project_output(
    tokens: T.Tensor, params: HeadParams, stats: NormStats | None = None
) -> T.Tensor:
    """Flatten each variable's patch tokens, map to the horizon, undo the z-score."""
    n, d = tokens.shape[-2], tokens.shape[-1]
    if n * d != params.weight.shape[0]:
        raise ShapeError(
            f"head expects flattened width {params.weight.shape[0]}, tokens give {n * d}"
        )
    flat = tokens.reshape(tokens.shape[:-2] + (n * d,))
    out = T.matmul(flat, params.weight) + params.bias
    if stats is not None:
        out = out * T.Tensor(stats.std) + T.Tensor(stats.mean)
    return out

"""Frequency-domain dependency evaluation.

Per-variable normalized spectral entropy of the (optionally filtered) power
spectrum: 0 means all energy in one bin (strong regularity, the variable
predicts itself), 1 means a flat spectrum (noise-like, the variable needs
outside context). Also houses the autocorrelation estimator and the
synthetic noise-mixture generator used to study the ACF/entropy relation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fft as _fft
from . import tensor as T
from .errors import DegenerateInputError, InputError, ShapeError
from .rng import RngState

_ZERO_POWER = 1e-290


class ShapingFilter:
    """Learnable per-frequency complex multiplier, applied before the PSD.

    Initialized to 1+0i (a no-op) so training starts from the unfiltered
    spectrum and shapes the response from there.
    """

    def __init__(self, length: int):
        if length < 2:
            raise InputError(f"filter length must be >= 2, got {length}")
        self.w_re = T.Tensor(np.ones(length), requires_grad=True)
        self.w_im = T.Tensor(np.zeros(length), requires_grad=True)

    def __len__(self) -> int:
        return self.w_re.size

    def params(self) -> list[T.Tensor]:
        return [self.w_re, self.w_im]


@dataclass
class EntropyVector:
    """Per-variable normalized spectral entropy, each entry in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError(f"entropy vector must be 1-D, got shape {self.values.shape}")
        if np.any(self.values < -1e-12) or np.any(self.values > 1.0 + 1e-12):
            raise InputError("entropy values outside [0, 1]")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SyntheticSpec:
    """Noise-mixture signal: (1-alpha)*sin(2*pi*t/period) + alpha*N(0,1)."""

    alpha: float
    period: int
    length: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must be in [0,1], got {self.alpha}")
        if self.period < 2:
            raise InputError(f"period must be >= 2, got {self.period}")
        if self.length < 2 * self.period:
            raise InputError(
                f"length must be >= 2*period ({2 * self.period}), got {self.length}"
            )


# -- filtering ---------------------------------------------------------------


def complex_filter_mul(zr, zi, filt: ShapingFilter):
    """Per-bin complex product of a spectrum (tensor pair) with the filter."""
    hr, hi = filt.w_re, filt.w_im
    sr = zr * hr - zi * hi
    si = zr * hi + zi * hr
    return sr, si


def apply_filter(spectrum: _fft.ComplexSpectrum, filt: ShapingFilter) -> _fft.ComplexSpectrum:
    if len(spectrum) != len(filt):
        raise ShapeError(
            f"spectrum length {len(spectrum)} != filter length {len(filt)}"
        )
    hr, hi = filt.w_re.data, filt.w_im.data
    return _fft.ComplexSpectrum(
        spectrum.re * hr - spectrum.im * hi,
        spectrum.re * hi + spectrum.im * hr,
    )


# -- spectral entropy ----------------------------------------------------------


def entropy_tensor(
    x: T.Tensor,
    filt: ShapingFilter | None = None,
    remove_mean: bool = True,
    degenerate: str = "error",
) -> T.Tensor:
    """Differentiable normalized spectral entropy along the last axis.

    degenerate: "error" raises on zero-power rows, "zero" maps them to
    entropy 0 (a constant is maximally self-predictable).
    """
    L = x.shape[-1]
    if L < 2:
        raise InputError(f"series length must be >= 2, got {L}")
    if filt is not None and len(filt) != L:
        raise ShapeError(f"filter length {len(filt)} != series length {L}")
    if remove_mean:
        x = x - x.mean(axis=-1, keepdims=True)
    re, im = T.dft_real(x)
    if filt is not None:
        re, im = complex_filter_mul(re, im, filt)
    power = re * re + im * im
    total = power.sum(axis=-1, keepdims=True)
    dead = total.data < _ZERO_POWER
    if dead.any():
        if degenerate == "error":
            raise DegenerateInputError(
                f"zero spectral power in {int(dead.sum())} of {dead.size} series"
            )
        total = total + T.Tensor(dead.astype(np.float64))  # avoid 0/0; masked below
    p = power / total
    ent = -T.xlogx(p).sum(axis=-1) / np.log(L)
    if dead.any():
        ent = ent * T.Tensor(1.0 - dead.astype(np.float64).reshape(ent.shape))
    return ent


def spectral_entropy(
    x, filt: ShapingFilter | None = None, remove_mean: bool = True
) -> float:
    """Normalized spectral entropy of one series, in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D series, got shape {x.shape}")
    with T.no_grad():
        return float(entropy_tensor(T.Tensor(x), filt, remove_mean).data)


def evaluate_dependencies(window, filt: ShapingFilter | None = None) -> EntropyVector:
    """Per-variable spectral entropy of a C x L window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeError(f"expected a C x L window, got shape {window.shape}")
    with T.no_grad():
        vals = entropy_tensor(T.Tensor(window), filt).data
    return EntropyVector(vals)


# -- autocorrelation -------------------------------------------------------------


def autocovariance_biased(x, max_lag: int, remove_mean: bool = True) -> np.ndarray:
    """Biased autocovariance r(tau) = (1/L) * sum_t x_t x_{t+tau}, tau = 0..max_lag."""
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[-1]
    if not 0 <= max_lag < L:
        raise InputError(f"max_lag must be in [0, {L - 1}], got {max_lag}")
    if remove_mean:
        x = x - x.mean(axis=-1, keepdims=True)
    # Zero-pad to 2L so the circular correlation equals the linear one.
    pad = np.concatenate([x, np.zeros_like(x)], axis=-1)
    re, im = _fft.fft_complex(pad, np.zeros_like(pad))
    cr, _ = _fft.ifft_complex(re * re + im * im, np.zeros_like(re))
    return cr[..., : max_lag + 1] / L


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Normalized ACF (R(0)=1) of a mean-removed series, lags 1..max_lag."""
    if max_lag < 1:
        raise InputError(f"max_lag must be >= 1, got {max_lag}")
    cov = autocovariance_biased(x, max_lag, remove_mean=True)
    r0 = cov[..., 0]
    if np.any(r0 < _ZERO_POWER):
        raise DegenerateInputError("zero-variance series has no autocorrelation")
    return cov[..., 1:] / r0[..., None] if cov.ndim > 1 else cov[1:] / r0


def wiener_khinchin_pair(x) -> tuple[np.ndarray, np.ndarray]:
    """DFT of the biased autocovariance vs. the periodogram, on a 2L grid.

    Both sides of the identity PSD = DFT(ACF): the autocovariance for lags
    0..L-1 laid out circularly over 2L bins, transformed; and
    |DFT(zero-padded series)|^2 / L. Equal up to roundoff.
    """
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[-1]
    xc = x - x.mean()
    cov = autocovariance_biased(xc, L - 1, remove_mean=False)
    m = 2 * L
    circ = np.zeros(m)
    circ[:L] = cov
    circ[m - L + 1:] = cov[1:][::-1]
    lhs, _ = _fft.fft_complex(circ, np.zeros(m))
    pad = np.concatenate([xc, np.zeros(L)])
    re, im = _fft.fft_complex(pad, np.zeros(m))
    rhs = (re * re + im * im) / L
    return lhs, rhs


# -- synthetic signals -------------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec) -> np.ndarray:
    """Noise mixture, deterministic in the seed: signal and noise scale with alpha."""
    t = np.arange(spec.length)
    signal = np.sin(2.0 * np.pi * t / spec.period)
    noise = RngState(spec.seed).normal(spec.length)
    return (1.0 - spec.alpha) * signal + spec.alpha * noise


def acf_entropy_study(
    alphas, spec: SyntheticSpec, n_seeds: int = 1
) -> list[tuple[float, float, float]]:
    """Rows of (alpha, acf_peak, spectral_entropy) across the noise grid.

    acf_peak is the max ACF value over lags 1..length//2; entropy is
    computed without a shaping filter. One row per (alpha, seed replicate).
    """
    alphas = list(alphas)
    if not alphas:
        raise InputError("alpha grid is empty")
    max_lag = spec.length // 2
    rows = []
    for alpha in alphas:
        for s in range(n_seeds):
            sub = SyntheticSpec(alpha=alpha, period=spec.period,
                                length=spec.length, seed=spec.seed + 7919 * s)
            x = generate_synthetic(sub)
            peak = float(np.max(autocorrelation(x, max_lag)))
            rows.append((float(alpha), peak, spectral_entropy(x)))
    return rows

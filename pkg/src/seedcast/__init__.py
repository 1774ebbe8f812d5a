"""seedcast: entropy-guided dual-path multivariate forecasting, desk scale."""

import os as _os

# Honor the thread cap before numpy is first imported anywhere below.
_threads = _os.environ.get("SEED_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    DegenerateInputError,
    DivergenceError,
    InputError,
    NumericError,
    ShapeError,
)
from .fft import ComplexSpectrum, fft_real, ifft_real  # noqa: E402
from .tensor import Tensor, grad_check, no_grad  # noqa: E402
from .rng import RngState  # noqa: E402
from .spectral import (  # noqa: E402
    EntropyVector,
    ShapingFilter,
    SyntheticSpec,
    acf_entropy_study,
    apply_filter,
    autocorrelation,
    evaluate_dependencies,
    generate_synthetic,
    spectral_entropy,
)
from .model import ModelConfig, SeedModel, apply_variant, count_params  # noqa: E402
from .training import (  # noqa: E402
    Adam,
    MetricsReport,
    TrainConfig,
    evaluate,
    loss_pred,
    loss_spen,
    total_loss,
    train,
)
from .data import Dataset, WindowSample, load_csv, make_splits, split, windows  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Adam", "ComplexSpectrum", "ConfigError", "DataError", "Dataset",
    "DegenerateInputError", "DivergenceError", "EntropyVector", "InputError",
    "MetricsReport", "ModelConfig", "NumericError", "RngState", "SeedModel",
    "ShapeError", "ShapingFilter", "SyntheticSpec", "Tensor", "TrainConfig",
    "WindowSample", "acf_entropy_study", "apply_filter", "apply_variant",
    "autocorrelation", "count_params", "evaluate", "evaluate_dependencies",
    "fft_real", "generate_synthetic", "grad_check", "ifft_real", "load_csv",
    "loss_pred", "loss_spen", "make_splits", "no_grad", "spectral_entropy",
    "split", "total_loss", "train", "windows",
]

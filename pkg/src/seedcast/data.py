"""CSV ingestion, dataset registry with split rules, and window sampling."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InputError
from .rng import RngState
from .training import DatasetSplits, SplitWindows

# Benchmark split conventions: ETT family 6:2:2, the larger long-horizon
# sets 7:1:2, the traffic-sensor sets 3:1:1. All carry a leading date column.
REGISTRY: dict[str, dict] = {
    "ETTh1": {"split": (6, 2, 2), "dim": 7, "freq": "1 hour", "date_col": True},
    "ETTh2": {"split": (6, 2, 2), "dim": 7, "freq": "1 hour", "date_col": True},
    "ETTm1": {"split": (6, 2, 2), "dim": 7, "freq": "15 min", "date_col": True},
    "ETTm2": {"split": (6, 2, 2), "dim": 7, "freq": "15 min", "date_col": True},
    "Weather": {"split": (7, 1, 2), "dim": 21, "freq": "10 min", "date_col": True},
    "ECL": {"split": (7, 1, 2), "dim": 321, "freq": "1 hour", "date_col": True},
    "Traffic": {"split": (7, 1, 2), "dim": 862, "freq": "1 hour", "date_col": True},
    "Solar": {"split": (7, 1, 2), "dim": 137, "freq": "10 min", "date_col": True},
    "PEMS03": {"split": (3, 1, 1), "dim": 358, "freq": "5 min", "date_col": True},
    "PEMS04": {"split": (3, 1, 1), "dim": 307, "freq": "5 min", "date_col": True},
    "PEMS07": {"split": (3, 1, 1), "dim": 883, "freq": "5 min", "date_col": True},
    "PEMS08": {"split": (3, 1, 1), "dim": 170, "freq": "5 min", "date_col": True},
}


def parse_ratio(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"split ratio must look like 6:2:2, got {text!r}")
    try:
        ratio = tuple(float(p) for p in parts)
    except ValueError:
        raise InputError(f"split ratio must be numeric, got {text!r}") from None
    if any(r < 0 for r in ratio) or sum(ratio) <= 0:
        raise InputError(f"split ratio must be nonnegative and nonzero, got {text!r}")
    return ratio


def load_registry_file(path: str) -> dict[str, dict]:
    """Extra dataset entries from a JSON (or TOML, on 3.11+) config file."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            raise DataError("TOML registry files need Python 3.11+; use JSON") from None
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path) as fh:
            raw = json.load(fh)
    out = {}
    for name, entry in raw.items():
        split = entry.get("split")
        out[name] = {
            "split": parse_ratio(split) if isinstance(split, str) else tuple(split),
            "date_col": bool(entry.get("date_col", False)),
            "dim": entry.get("dim"),
            "freq": entry.get("freq", ""),
        }
    return out


@dataclass
class Dataset:
    name: str
    values: np.ndarray  # (time, C)
    split_ratio: tuple[float, float, float] | None = None
    frequency: str = ""
    columns: list[str] = field(default_factory=list)
    rejected_rows: int = 0

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class WindowSample:
    lookback: np.ndarray  # (C, L)
    target: np.ndarray    # (C, T)
    start: int


def load_csv(path: str, date_col: bool = False, name: str | None = None) -> Dataset:
    """Parse a headered CSV into a time x C float matrix.

    Rows containing any non-finite value are dropped and counted; a parse
    failure reports the exact row/column.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        start_col = 1 if date_col else 0
        columns = header[start_col:]
        rows = []
        rejected = 0
        for i, row in enumerate(reader, start=2):  # header is line 1
            if not row:
                continue
            vals = []
            for j, cell in enumerate(row[start_col:], start=start_col + 1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {i}, column {j}: cannot parse {cell!r}"
                    ) from None
            if len(vals) != len(columns):
                raise DataError(
                    f"{path}: row {i} has {len(vals)} values, header has {len(columns)}"
                )
            if not all(np.isfinite(v) for v in vals):
                rejected += 1
                continue
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    entry = REGISTRY.get(name, {})
    return Dataset(
        name=name,
        values=np.asarray(rows, dtype=np.float64),
        split_ratio=entry.get("split"),
        frequency=entry.get("freq", ""),
        columns=columns,
        rejected_rows=rejected,
    )


def write_csv(path: str, values: np.ndarray, columns: list[str] | None = None):
    values = np.asarray(values)
    if columns is None:
        columns = [f"var{i}" for i in range(values.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])  # shortest exact round-trip


def split_bounds(n: int, ratio) -> tuple[int, int]:
    """Boundary indices (train_end, val_end); rounding favors the train segment."""
    a, b, c = ratio
    total = a + b + c
    n_val = int(n * b / total)
    n_test = int(n * c / total)
    return n - n_val - n_test, n - n_test


def split(dataset: Dataset, ratio=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chronological, non-overlapping train/val/test segments."""
    ratio = ratio if ratio is not None else dataset.split_ratio
    if ratio is None:
        raise DataError(
            f"dataset {dataset.name!r} is not in the registry; pass an explicit split"
        )
    a, b = split_bounds(len(dataset), ratio)
    v = dataset.values
    return v[:a], v[a:b], v[b:]


def windows(segment: np.ndarray, lookback: int, horizon: int, stride: int = 1
            ) -> list[WindowSample]:
    """All (lookback, target) samples of a segment, chronological order."""
    segment = np.asarray(segment, dtype=np.float64)
    n = segment.shape[0]
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    if n < lookback + horizon:
        raise DataError(
            f"segment length {n} < lookback + horizon ({lookback + horizon})"
        )
    out = []
    for s in range(0, n - lookback - horizon + 1, stride):
        out.append(WindowSample(
            lookback=segment[s : s + lookback].T.copy(),
            target=segment[s + lookback : s + lookback + horizon].T.copy(),
            start=s,
        ))
    return out


def window_arrays(segment: np.ndarray, lookback: int, horizon: int, stride: int = 1
                  ) -> SplitWindows:
    """Vectorized form of ``windows``: x (M,C,L) and y (M,C,T) arrays."""
    segment = np.asarray(segment, dtype=np.float64)
    n = segment.shape[0]
    if n < lookback + horizon:
        raise DataError(
            f"segment length {n} < lookback + horizon ({lookback + horizon})"
        )
    view = np.lib.stride_tricks.sliding_window_view(segment, lookback + horizon, axis=0)
    view = view[::stride]  # (M, C, L+T)
    return SplitWindows(
        x=np.ascontiguousarray(view[..., :lookback]),
        y=np.ascontiguousarray(view[..., lookback:]),
    )


def standardize_by_train(values: np.ndarray, train_end: int
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Global z-score using train-segment statistics only (no leakage)."""
    mean = values[:train_end].mean(axis=0)
    std = values[:train_end].std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (values - mean) / std, mean, std


def make_splits(dataset: Dataset, lookback: int, horizon: int, ratio=None,
                stride: int = 1, standardize: bool = True) -> DatasetSplits:
    """Windowed train/val/test splits ready for the training loop.

    Val/test lookbacks reach back into the preceding segment by exactly L
    steps (the usual protocol), so target timesteps stay disjoint across
    splits.
    """
    ratio = ratio if ratio is not None else dataset.split_ratio
    if ratio is None:
        raise DataError(
            f"dataset {dataset.name!r} is not in the registry; pass an explicit split"
        )
    values = dataset.values
    a, b = split_bounds(len(dataset), ratio)
    if a < lookback + horizon:
        raise DataError(f"train segment ({a} steps) shorter than lookback + horizon")
    if standardize:
        values = standardize_by_train(values, a)[0]
    return DatasetSplits(
        train=window_arrays(values[:a], lookback, horizon, stride),
        val=window_arrays(values[max(0, a - lookback):b], lookback, horizon, stride),
        test=window_arrays(values[max(0, b - lookback):], lookback, horizon, stride),
    )


def synthetic_mixture(n_sine: int = 4, n_noise: int = 4, length: int = 4000,
                      periods=(24, 36, 48, 96), seed: int = 0) -> Dataset:
    """Half clean sinusoids at distinct periods, half standard normal noise."""
    if n_sine > 0 and len(periods) < n_sine:
        raise InputError(f"need {n_sine} periods, got {len(periods)}")
    rng = RngState(seed)
    t = np.arange(length)
    cols = [np.sin(2 * np.pi * t / periods[i]) for i in range(n_sine)]
    cols += [rng.normal(length) for _ in range(n_noise)]
    names = [f"sine_p{periods[i]}" for i in range(n_sine)]
    names += [f"noise{i}" for i in range(n_noise)]
    return Dataset(
        name="synthetic_mixture",
        values=np.stack(cols, axis=1),
        split_ratio=(7, 1, 2),
        frequency="synthetic",
        columns=names,
    )

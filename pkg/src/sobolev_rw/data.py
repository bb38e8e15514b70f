"""Datasets of (input, response, sensitivity) triples.

A dataset holds three aligned arrays:

    x   (n, n_in)          design parameters
    y   (n, n_out)         responses
    dy  (n, n_out, n_in)   sensitivities dy_i/dx_j

Standardization follows the usual z-score convention with population standard
deviations; sensitivities are rescaled by sigma_x / sigma_y so they remain the
derivatives of the standardized response w.r.t. the standardized input.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SPLIT_PATTERNS = ("stride2", "seeded")


class DegenerateScaleError(ValueError):
    pass


class SplitSizeError(ValueError):
    pass


class CsvParseError(ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class SamplePoint:
    x: np.ndarray
    y: np.ndarray
    dy_dx: np.ndarray


@dataclass(frozen=True)
class StandardizationStats:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def __post_init__(self):
        for name in ("x_std", "y_std"):
            s = getattr(self, name)
            if np.any(~(s > 0)):
                raise DegenerateScaleError(f"{name} must be strictly positive, got {s}")

    @classmethod
    def identity(cls, n_in, n_out):
        return cls(np.zeros(n_in), np.ones(n_in), np.zeros(n_out), np.ones(n_out))

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("x_mean", "x_std", "y_mean", "y_std")}


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    stats: StandardizationStats | None = None
    standardized: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        dy = np.asarray(self.dy, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2 or dy.ndim != 3:
            raise ValueError("dataset arrays must have shapes (n, n_in), (n, n_out), (n, n_out, n_in)")
        n, n_in = x.shape
        if y.shape[0] != n or dy.shape != (n, y.shape[1], n_in):
            raise ValueError(f"inconsistent shapes x{x.shape} y{y.shape} dy{dy.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(dy))):
            raise ValueError("dataset contains non-finite entries")
        for arr in (x, y, dy):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dy", dy)

    def __len__(self):
        return self.x.shape[0]

    @property
    def n_in(self):
        return self.x.shape[1]

    @property
    def n_out(self):
        return self.y.shape[1]

    def sample(self, i) -> SamplePoint:
        return SamplePoint(self.x[i], self.y[i], self.dy[i])

    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return replace(self, x=self.x[idx], y=self.y[idx], dy=self.dy[idx])

    def with_sensitivities(self, dy) -> "Dataset":
        return replace(self, dy=dy)

    @classmethod
    def from_samples(cls, samples, **kw) -> "Dataset":
        x = np.array([s.x for s in samples], dtype=np.float64)
        y = np.array([s.y for s in samples], dtype=np.float64)
        dy = np.array([s.dy_dx for s in samples], dtype=np.float64)
        return cls(x, y, dy, **kw)


def _population_stats(a, names):
    mean = a.mean(axis=0)
    std = np.sqrt(((a - mean) ** 2).mean(axis=0))
    for j, s in enumerate(std):
        # relative guard: a column whose spread is rounding noise is constant
        if not s > 1e-12 * max(1.0, abs(mean[j])):
            raise DegenerateScaleError(f"column {names[j]!r} is constant; cannot standardize")
    return mean, std


def fit_standardize(train: Dataset):
    """Standardize a raw dataset with its own statistics; returns (dataset, stats)."""
    if train.standardized:
        raise ValueError("dataset is already standardized")
    if len(train) < 2:
        raise DegenerateScaleError("need at least 2 samples to standardize")
    x_mean, x_std = _population_stats(train.x, x_names(train.n_in))
    y_mean, y_std = _population_stats(train.y, y_names(train.n_out))
    stats = StandardizationStats(x_mean, x_std, y_mean, y_std)
    return apply_standardize(train, stats), stats


def scale_sensitivities(s: SamplePoint, stats: StandardizationStats) -> SamplePoint:
    return replace(s, dy_dx=np.asarray(s.dy_dx) * stats.x_std[None, :] / stats.y_std[:, None])


def apply_standardize(d: Dataset, stats: StandardizationStats) -> Dataset:
    if d.standardized:
        raise ValueError("dataset is already standardized")
    x = (d.x - stats.x_mean) / stats.x_std
    y = (d.y - stats.y_mean) / stats.y_std
    dy = d.dy * stats.x_std[None, None, :] / stats.y_std[None, :, None]
    return Dataset(x, y, dy, stats=stats, standardized=True)


def unstandardize(d: Dataset) -> Dataset:
    if not d.standardized:
        raise ValueError("dataset is not standardized")
    st = d.stats
    x = d.x * st.x_std + st.x_mean
    y = d.y * st.y_std + st.y_mean
    dy = d.dy * st.y_std[None, :, None] / st.x_std[None, None, :]
    return Dataset(x, y, dy)


def unstandardize_y(y_s, stats: StandardizationStats):
    return np.asarray(y_s) * stats.y_std + stats.y_mean


def grid_split(d: Dataset, n_train, n_val, pattern="stride2", seed=0):
    """Split a dataset into disjoint (train, validation) parts.

    ``stride2`` puts even flattened indices in train and odd ones in validation,
    keeping the first ``n_train`` / ``n_val`` of each. ``seeded`` draws a fixed
    permutation from ``seed``. Index order inside each part is ascending.
    """
    n = len(d)
    if n_train < 0 or n_val < 0 or n_train + n_val > n:
        raise SplitSizeError(f"requested {n_train}+{n_val} points from a dataset of {n}")
    if pattern == "stride2":
        if n_val == 0:
            train_idx = np.arange(n)[:n_train]
            val_idx = np.arange(0)
        else:
            even = np.arange(0, n, 2)
            odd = np.arange(1, n, 2)
            if n_train > even.size or n_val > odd.size:
                raise SplitSizeError(
                    f"stride2 offers {even.size} train / {odd.size} validation points, "
                    f"requested {n_train}/{n_val}; use pattern='seeded'"
                )
            train_idx = even[:n_train]
            val_idx = odd[:n_val]
    elif pattern == "seeded":
        perm = np.random.default_rng(seed).permutation(n)
        train_idx = np.sort(perm[:n_train])
        val_idx = np.sort(perm[n_train:n_train + n_val])
    else:
        raise ValueError(f"unknown split pattern {pattern!r}; expected one of {SPLIT_PATTERNS}")
    return d.subset(train_idx), d.subset(val_idx)


@dataclass
class MinibatchPlan:
    batch_size: int = 64
    rng_seed: int = 0
    epoch_permutation: np.ndarray | None = field(default=None, repr=False)


def epoch_permutation(n, plan: MinibatchPlan, epoch):
    rng = np.random.default_rng([plan.rng_seed, epoch])
    return rng.permutation(n)


def minibatches(train, plan: MinibatchPlan, epoch):
    """Index slices for one epoch; reshuffled per epoch, short last batch kept."""
    if plan.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = train if isinstance(train, (int, np.integer)) else len(train)
    perm = epoch_permutation(n, plan, epoch)
    plan.epoch_permutation = perm
    return [perm[i:i + plan.batch_size] for i in range(0, n, plan.batch_size)]


def x_names(n_in):
    return [f"x{j + 1}" for j in range(n_in)]


def y_names(n_out):
    return [f"y{i + 1}" for i in range(n_out)]


def dy_names(n_out, n_in):
    return [f"dy{i + 1}_dx{j + 1}" for i in range(n_out) for j in range(n_in)]


def csv_header(n_in, n_out):
    return x_names(n_in) + y_names(n_out) + dy_names(n_out, n_in)


def write_csv(d: Dataset, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(d.n_in, d.n_out))
        for i in range(len(d)):
            row = list(d.x[i]) + list(d.y[i]) + list(d.dy[i].ravel())
            w.writerow([repr(float(v)) for v in row])
    return path


def read_csv(path) -> Dataset:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvParseError(path, 1, "empty file")
    header = [h.strip() for h in rows[0]]
    n_in = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    n_out = sum(1 for h in header if h.startswith("y") and h[1:].isdigit())
    if n_in == 0:
        raise CsvParseError(path, 1, "missing column 'x1'")
    if n_out == 0:
        raise CsvParseError(path, 1, "missing column 'y1'")
    expected = csv_header(n_in, n_out)
    for name in expected:
        if name not in header:
            raise CsvParseError(path, 1, f"missing column {name!r}")
    if header != expected:
        raise CsvParseError(path, 1, f"header must be exactly {','.join(expected)}")
    width = len(expected)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise CsvParseError(path, lineno, f"expected {width} fields, found {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise CsvParseError(path, lineno, f"non-numeric cell ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise CsvParseError(path, lineno, "non-finite value")
        values.append(vals)
    if not values:
        return Dataset(np.zeros((0, n_in)), np.zeros((0, n_out)), np.zeros((0, n_out, n_in)))
    a = np.array(values)
    x = a[:, :n_in]
    y = a[:, n_in:n_in + n_out]
    dy = a[:, n_in + n_out:].reshape(-1, n_out, n_in)
    return Dataset(x, y, dy)

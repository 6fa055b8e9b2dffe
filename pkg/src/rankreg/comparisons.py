"""Comparison-label models and synthetic comparison datasets.

A link function maps the score difference of two samples to the probability
that the first wins the comparison.  The logistic link gives Bradley-Terry
label noise, the probit link gives Thurstone noise, and the deterministic
link is the zero-noise limit where labels follow the sign of the score
difference and exact ties are fair coin flips.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import erf, expit

from .randomness import RngStream, SpdMatrix, sample_gaussian


@dataclass(frozen=True)
class LogisticLink:
    """P(win) = 1 / (1 + exp(-slope * x))."""

    slope: float = 1.0

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError(f"slope must be > 0, got {self.slope}")

    def prob(self, x):
        return expit(self.slope * np.asarray(x, dtype=float))

    def derivative(self, x):
        # slope * f * (1 - f) in closed form; no cancellation at large |x|.
        p = self.prob(x)
        return self.slope * p * (1.0 - p)


@dataclass(frozen=True)
class ProbitLink:
    """P(win) = (1 + erf(scale * x)) / 2."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")

    def prob(self, x):
        return 0.5 * (1.0 + erf(self.scale * np.asarray(x, dtype=float)))

    def derivative(self, x):
        t = self.scale * np.asarray(x, dtype=float)
        return self.scale * np.exp(-t * t) / np.sqrt(np.pi)


@dataclass(frozen=True)
class DeterministicLink:
    """Noiseless limit: P(win) is 1, 0, or 1/2 by the sign of the score difference."""

    def prob(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))


LinkFunction = Union[LogisticLink, ProbitLink, DeterministicLink]


def is_differentiable(link: LinkFunction) -> bool:
    return not isinstance(link, DeterministicLink)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Ground-truth generative model for features and comparison labels."""

    d: int
    beta: np.ndarray
    mu: np.ndarray
    sigma: SpdMatrix
    link: LinkFunction

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        for name in ("beta", "mu"):
            v = getattr(self, name)
            if v.shape != (self.d,):
                raise ValueError(f"{name} has shape {v.shape}, expected ({self.d},)")
        if self.sigma.dim != self.d:
            raise ValueError(f"sigma has dim {self.sigma.dim}, expected {self.d}")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """2N feature rows: rows 0..N-1 feed comparisons, rows N..2N-1 feed covariance."""

    n: int
    features: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "features", f)
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if f.ndim != 2 or f.shape[0] != 2 * self.n:
            raise ValueError(f"features must have exactly {2 * self.n} rows, got shape {f.shape}")

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def comparison_half(self) -> np.ndarray:
        return self.features[: self.n]

    @property
    def covariance_half(self) -> np.ndarray:
        return self.features[self.n :]


@dataclass(frozen=True, eq=False)
class ComparisonDataset:
    """M comparison triples (i, j, y) with 0-based indices into the comparison half."""

    n: int
    i: np.ndarray
    j: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64)
        j = np.asarray(self.j, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "y", y)
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (i.ndim == j.ndim == y.ndim == 1 and len(i) == len(j) == len(y) >= 1):
            raise ValueError("i, j, y must be 1-d arrays of equal positive length")
        for name, idx in (("i", i), ("j", j)):
            if idx.min() < 0 or idx.max() >= self.n:
                raise ValueError(f"{name} contains indices outside [0, {self.n})")
        if not np.isin(y, (-1, 1)).all():
            raise ValueError("labels must be -1 or +1")

    @property
    def m(self) -> int:
        return len(self.y)


def generate_samples(rng: RngStream, spec: ModelSpec, n: int) -> SampleSet:
    """Draw 2n i.i.d. feature rows from the model's Gaussian."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return SampleSet(n, sample_gaussian(rng, spec.mu, spec.sigma, 2 * n))


def generate_comparisons(
    rng: RngStream, spec: ModelSpec, samples: SampleSet, m: int
) -> ComparisonDataset:
    """Draw m comparisons: pairs uniform over the comparison half, labels from the link.

    Both pair indices are drawn independently, so self-pairs occur; their win
    probability is exactly 1/2 under every link.  Draw order (i, then j, then
    the label uniforms) is fixed so results are reproducible per stream.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    g = rng.generator()
    i = g.integers(0, samples.n, size=m)
    j = g.integers(0, samples.n, size=m)
    u = g.random(size=m)
    scores = samples.comparison_half @ spec.beta
    p_win = spec.link.prob(scores[i] - scores[j])
    y = np.where(u < p_win, 1, -1)
    return ComparisonDataset(samples.n, i, j, y)


def flip_fraction(dataset: ComparisonDataset, spec: ModelSpec, samples: SampleSet) -> float:
    """Fraction of labels disagreeing with the sign of the true score difference.

    Exact score ties (self-pairs included) have no true winner and count as
    half a flip each.
    """
    scores = samples.comparison_half @ spec.beta
    s = scores[dataset.i] - scores[dataset.j]
    flipped = np.where(
        s == 0, 0.5, ((s > 0) & (dataset.y == -1)) | ((s < 0) & (dataset.y == 1))
    )
    return float(flipped.mean())


# ---------------------------------------------------------------------------
# CSV serialization


class CsvFormatError(ValueError):
    """A CSV file does not match its expected schema; message carries file and line."""


def write_samples_csv(samples: SampleSet, path) -> None:
    """Write all 2N rows with header x_1,...,x_d, comparison half first."""
    with open(path, "w", newline="") as f:
        f.write(",".join(f"x_{k + 1}" for k in range(samples.d)) + "\n")
        for row in samples.features:
            # repr of a Python float is its shortest exact round-trip form
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_samples_csv(path) -> SampleSet:
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header != [f"x_{k + 1}" for k in range(len(header))]:
            raise CsvFormatError(f"{path}:1: expected header x_1,...,x_d, got {header}")
        d = len(header)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != d:
                raise CsvFormatError(f"{path}:{lineno}: expected {d} fields, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows or len(rows) % 2 != 0:
        raise CsvFormatError(f"{path}: expected an even, positive number of sample rows, got {len(rows)}")
    return SampleSet(len(rows) // 2, np.array(rows))


def write_comparisons_csv(dataset: ComparisonDataset, path) -> None:
    """Write triples with header i,j,y; indices are 1-based on disk."""
    with open(path, "w", newline="") as f:
        f.write("i,j,y\n")
        for i, j, y in zip(dataset.i, dataset.j, dataset.y):
            f.write(f"{i + 1},{j + 1},{y}\n")


def read_comparisons_csv(path, n: int) -> ComparisonDataset:
    """Read triples written by :func:`write_comparisons_csv` for a size-n comparison half."""
    i, j, y = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["i", "j", "y"]:
            raise CsvFormatError(f"{path}:1: expected header i,j,y, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3:
                raise CsvFormatError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            try:
                i.append(int(rec[0]))
                j.append(int(rec[1]))
                y.append(int(rec[2]))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
            if not (1 <= i[-1] <= n and 1 <= j[-1] <= n):
                raise CsvFormatError(f"{path}:{lineno}: index outside [1, {n}]")
            if y[-1] not in (-1, 1):
                raise CsvFormatError(f"{path}:{lineno}: label must be -1 or 1, got {y[-1]}")
    if not y:
        raise CsvFormatError(f"{path}: no comparison rows")
    return ComparisonDataset(n, np.array(i) - 1, np.array(j) - 1, np.array(y))

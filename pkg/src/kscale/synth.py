"""Synthetic ground truth, dataset sampling, Monte-Carlo excess risk.

Targets are finite kernel expansions ``f(x) = sum_j w_j k(c_j, x)``.
Inputs are drawn uniformly on [-1, 1]^d and labels carry additive
Gaussian noise.  All randomness flows through numpy's PCG64 generator
(ziggurat normals), so regeneration under the same seed is bit-identical
within one build.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import KernelSpec, gram_cross
from .solver import FitModel, predict


@dataclass(frozen=True)
class TargetFunction:
    """Ground-truth function: a weighted sum of kernel bumps."""

    spec: KernelSpec
    centers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if centers.shape[1] != self.spec.dim:
            centers = centers.reshape(-1, self.spec.dim)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if centers.shape[0] != weights.shape[0] or weights.shape[0] < 1:
            raise ValueError(
                f"need equally many centers and weights (>= 1), got "
                f"{centers.shape[0]} and {weights.shape[0]}"
            )
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Dataset:
    """A reproducible sample: inputs, labels, and the seed that made them."""

    xs: np.ndarray
    ys: np.ndarray
    seed: int
    noise_var: float


def eval_target(target: TargetFunction, x):
    """Evaluate the target at one point (float) or a batch (array)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == target.spec.dim)
    kx = gram_cross(target.spec, x, target.centers)
    values = kx @ target.weights
    return float(values[0]) if single else values


def sample_dataset(
    target: TargetFunction, n: int, noise_var: float, seed: int
) -> Dataset:
    """Draw n points uniformly on [-1, 1]^d with noisy target labels."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if noise_var < 0:
        raise ValueError(f"noise_var must be nonnegative, got {noise_var}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 1.0, size=(n, target.spec.dim))
    ys = eval_target(target, xs)
    ys = np.atleast_1d(ys)
    if noise_var > 0:
        ys = ys + np.sqrt(noise_var) * rng.standard_normal(n)
    return Dataset(xs=xs, ys=ys, seed=int(seed), noise_var=float(noise_var))


def excess_risk(
    model: FitModel, target: TargetFunction, m_test: int, seed: int
) -> float:
    """Monte-Carlo excess risk over fresh uniform test points.

    Estimates the squared L2(rho) distance between the fitted function
    and the target as the mean squared gap over ``m_test`` uniform draws.
    """
    if m_test < 1:
        raise ValueError(f"m_test must be at least 1, got {m_test}")
    if model.spec.dim != target.spec.dim:
        raise ValueError(
            f"model dimension {model.spec.dim} does not match target "
            f"dimension {target.spec.dim}"
        )
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 1.0, size=(m_test, target.spec.dim))
    gap = predict(model, xs) - eval_target(target, xs)
    return float(np.mean(np.square(gap)))


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Serialize a dataset to CSV with header x_0..x_{d-1},y."""
    xs = np.atleast_2d(dataset.xs)
    d = xs.shape[1]
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x_{i}" for i in range(d)] + ["y"])
        for row, label in zip(xs, dataset.ys):
            writer.writerow([repr(v) for v in row] + [repr(float(label))])


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (xs, ys) from a dataset CSV."""
    with Path(path).open("r", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if not header or header[-1] != "y":
            raise ValueError(f"unexpected dataset header {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise ValueError("dataset file has no rows")
    return data[:, :-1], data[:, -1]

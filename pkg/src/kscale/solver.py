"""Tail-averaged learning recursions in coefficient form.

Every iterate of the mini-batch recursion lives in the span of the
(scale-shifted) kernel sections over the training points, so the state
is a coefficient vector ``alpha`` of length n paired with the effective
kernel: the current function is ``f(x) = sum_j alpha_j * k_eff(x_j, x)``.

Three routes produce the same estimator and check each other:

* :func:`sgd_fit`      -- mini-batch stochastic recursion (the algorithm),
* :func:`gd_fit`       -- full-gradient recursion,
* :func:`spectral_fit` -- closed form via the tail-averaged filter
  function applied to the spectrum of G/n.

Tail averaging keeps a running sum over iterations floor(T/2)+1 .. T and
scales it by 2/T, matching the filter normalization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DivergenceError
from .kernels import KernelSpec, gram, gram_cross, kappa_sq, scale_shift
from .linalg import apply_filter, eig_sym

SAMPLING_MODES = ("iid-uniform", "full-batch-deterministic")

# strict stability region for the constant step-size
STEPSIZE_BOUND = 0.25


@dataclass(frozen=True)
class SgdConfig:
    """Complete control state of the stochastic recursion.

    ``gamma`` is the constant step-size (zero is allowed and yields the
    zero function), ``batch`` the mini-batch size b, ``iterations`` the
    horizon T.  ``sampling`` is either ``iid-uniform`` (b indices drawn
    uniformly with replacement per step) or ``full-batch-deterministic``
    (every index exactly once per step; requires batch == n at fit time).
    """

    gamma: float
    batch: int
    iterations: int
    sampling: str = "iid-uniform"
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.batch < 1:
            raise ValueError(f"batch must be at least 1, got {self.batch}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(
                f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")


@dataclass(frozen=True)
class Checkpoint:
    """Coefficient snapshot at one iteration.

    Snapshots past the tail boundary hold the mean of the iterates seen
    so far in the tail; earlier ones hold the plain iterate and are
    flagged ``pre_tail``.
    """

    iteration: int
    alpha: np.ndarray
    pre_tail: bool


@dataclass(frozen=True)
class FitModel:
    """A learned function: training inputs, effective kernel, coefficients."""

    spec: KernelSpec
    xs: np.ndarray
    alpha: np.ndarray
    checkpoints: tuple[Checkpoint, ...] | None = None


def stepsize_check(gamma: float, kappa_sq_value: float) -> str | None:
    """Return None when gamma * kappa^2 < 1/4, else a warning message.

    Violating the bound is allowed (some sweeps do it deliberately), so
    this never raises.
    """
    if gamma <= 0 or kappa_sq_value <= 0:
        raise ValueError("stepsize_check expects positive gamma and kappa_sq")
    product = gamma * kappa_sq_value
    if product < STEPSIZE_BOUND:
        return None
    return (
        f"step-size gamma={gamma:g} with kappa^2={kappa_sq_value:g} gives "
        f"gamma*kappa^2={product:g} >= {STEPSIZE_BOUND}; the recursion may diverge"
    )


def _prepare_checkpoints(requested: Iterable[int] | None, iterations: int):
    if requested is None:
        return None
    wanted = sorted({int(t) for t in requested})
    if wanted and (wanted[0] < 0 or wanted[-1] > iterations):
        raise ValueError(
            f"checkpoint iterations must lie in [0, {iterations}], got {wanted}"
        )
    return set(wanted)


def _snapshot(records, t, alpha, tail_sum, tail_start):
    if t <= tail_start:
        records.append(Checkpoint(iteration=t, alpha=alpha.copy(), pre_tail=True))
    else:
        seen = t - tail_start
        records.append(Checkpoint(iteration=t, alpha=tail_sum / seen, pre_tail=False))


def sgd_fit(
    xs,
    ys,
    spec_base: KernelSpec,
    s: float,
    config: SgdConfig,
    checkpoints: Iterable[int] | None = None,
) -> FitModel:
    """Tail-averaged mini-batch SGD run in the space shifted by ``s``.

    The update direction of the function recursion is the kernel section
    of the shifted space, so in coefficient form each step computes the
    residuals ``r_i = (G alpha)_{j_i} - y_{j_i}`` at the sampled indices
    (with the step-start alpha for the whole batch) and applies
    ``alpha[j_i] -= (gamma / b) * r_i``, accumulating duplicates.

    Deterministic given ``config.seed``; raises :class:`DivergenceError`
    carrying the first iteration at which a coefficient turns non-finite.
    """
    pts = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float).ravel()
    n = y.shape[0]
    if n == 0:
        raise ValueError("sgd_fit requires a nonempty sample")
    if config.batch > n:
        raise ValueError(f"batch {config.batch} exceeds sample size {n}")
    if config.sampling == "full-batch-deterministic" and config.batch != n:
        raise ValueError(
            f"full-batch-deterministic requires batch == n ({n}), got {config.batch}"
        )
    effective = scale_shift(spec_base, s)
    g = gram(effective, pts)
    if config.gamma > 0:
        message = stepsize_check(config.gamma, kappa_sq(effective))
        if message is not None:
            warnings.warn(message, stacklevel=2)

    t_total = config.iterations
    tail_start = t_total // 2
    step = config.gamma / config.batch
    rng = np.random.default_rng(config.seed)
    deterministic = config.sampling == "full-batch-deterministic"
    full_batch = np.arange(n)

    alpha = np.zeros(n)
    tail_sum = np.zeros(n)
    wanted = _prepare_checkpoints(checkpoints, t_total)
    records: list[Checkpoint] = []
    if wanted and 0 in wanted:
        records.append(Checkpoint(iteration=0, alpha=alpha.copy(), pre_tail=True))

    for t in range(1, t_total + 1):
        idx = full_batch if deterministic else rng.integers(0, n, size=config.batch)
        residual = g[idx] @ alpha - y[idx]
        np.subtract.at(alpha, idx, step * residual)
        if not np.all(np.isfinite(alpha)):
            raise DivergenceError(t)
        if t > tail_start:
            tail_sum += alpha
        if wanted and t in wanted:
            _snapshot(records, t, alpha, tail_sum, tail_start)

    alpha_bar = (2.0 / t_total) * tail_sum
    return FitModel(
        spec=effective,
        xs=pts,
        alpha=alpha_bar,
        checkpoints=tuple(records) if wanted is not None else None,
    )


def gd_fit(
    xs,
    ys,
    spec_effective: KernelSpec,
    gamma: float,
    iterations: int,
    checkpoints: Iterable[int] | None = None,
) -> FitModel:
    """Tail-averaged batch gradient descent with the given effective kernel.

    Coefficient recursion ``alpha <- alpha - (gamma / n) (G alpha - y)``
    from alpha = 0; deterministic.
    """
    pts = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float).ravel()
    n = y.shape[0]
    if n == 0:
        raise ValueError("gd_fit requires a nonempty sample")
    if iterations < 1:
        raise ValueError(f"iterations must be at least 1, got {iterations}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    g = gram(spec_effective, pts)

    tail_start = iterations // 2
    step = gamma / n
    alpha = np.zeros(n)
    tail_sum = np.zeros(n)
    wanted = _prepare_checkpoints(checkpoints, iterations)
    records: list[Checkpoint] = []
    if wanted and 0 in wanted:
        records.append(Checkpoint(iteration=0, alpha=alpha.copy(), pre_tail=True))

    for t in range(1, iterations + 1):
        alpha = alpha - step * (g @ alpha - y)
        if not np.all(np.isfinite(alpha)):
            raise DivergenceError(t)
        if t > tail_start:
            tail_sum += alpha
        if wanted and t in wanted:
            _snapshot(records, t, alpha, tail_sum, tail_start)

    alpha_bar = (2.0 / iterations) * tail_sum
    return FitModel(
        spec=spec_effective,
        xs=pts,
        alpha=alpha_bar,
        checkpoints=tuple(records) if wanted is not None else None,
    )


# Below this ratio of u = gamma*sigma to 1/T the geometric closed form
# cancels catastrophically and the binomial series is used instead.
_SERIES_THRESHOLD = 0.5
_SERIES_MAX_TERMS = 80


def _gbar(sigma, gamma: float, iterations: int) -> np.ndarray:
    """Tail-averaged GD filter, vectorized over nonnegative sigma.

    G_t(sigma) = gamma * sum_{k<t} (1 - gamma*sigma)^k, averaged with
    weight 2/T over the tail iterations low..T (low = floor(T/2) + 1).
    Writing u = gamma*sigma, the average equals (2*gamma/T) * A(u) with

        A(u) = sum_{t=low}^{T} (1 - (1-u)^t) / u.

    For u*T above a threshold the geometric closed form is accurate; for
    small u*T it cancels badly and the alternating binomial series
    A(u) = sum_k (-u)^k [C(T+1, k+2) - C(low, k+2)] is used instead.
    """
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig < 0):
        raise ValueError("filter argument sigma must be nonnegative")
    t_total = int(iterations)
    if t_total < 1:
        raise ValueError(f"iterations must be at least 1, got {iterations}")
    low = t_total // 2 + 1
    m = t_total - low + 1

    out = np.empty(sig.shape, dtype=float)
    if gamma == 0.0:
        out.fill(0.0)
        return out

    u = gamma * sig
    small = u * t_total < _SERIES_THRESHOLD
    if np.any(small):
        us = u[small]
        acc = np.zeros(us.shape)
        power = np.ones(us.shape)
        # c_top = C(T+1, k+2), c_low = C(low, k+2), updated iteratively
        c_top = (t_total + 1) * t_total / 2.0
        c_low = low * (low - 1) / 2.0
        for k in range(_SERIES_MAX_TERMS):
            term = (c_top - c_low) * power
            acc += term
            if np.all(np.abs(term) <= 1e-18 * np.abs(acc)):
                break
            power *= -us
            c_top *= (t_total - k - 1) / (k + 3.0)
            c_low *= (low - k - 2) / (k + 3.0)
        out[small] = (2.0 * gamma / t_total) * acc

    big = ~small
    if np.any(big):
        q = 1.0 - u[big]
        geom = np.empty(q.shape)
        pos = q > 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            logq = np.log(q[pos])
            geom[pos] = np.exp(low * logq) * -np.expm1(m * logq) / (1.0 - q[pos])
            qn = q[~pos]
            geom[~pos] = qn**low * (1.0 - qn**m) / (1.0 - qn)
        out[big] = (2.0 / t_total) * (m - geom) / sig[big]
    return out


def filter_gd(sigma: float, gamma: float, iterations: int) -> tuple[float, float]:
    """Tail-averaged filter value and residual at one spectral point.

    Returns ``(gbar, rbar)`` with ``rbar = 1 - sigma * gbar`` exactly.
    """
    gbar = float(_gbar(np.asarray([float(sigma)]), gamma, iterations)[0])
    return gbar, 1.0 - float(sigma) * gbar


def spectral_fit(
    xs, ys, spec_effective: KernelSpec, gamma: float, iterations: int
) -> FitModel:
    """Closed-form tail-averaged GD via the spectral filter.

    Computes ``alpha_bar = Gbar_T(G/n) y / n`` in the eigenbasis of G/n;
    agrees with :func:`gd_fit` on the same instance up to round-off.
    """
    pts = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float).ravel()
    n = y.shape[0]
    if n == 0:
        raise ValueError("spectral_fit requires a nonempty sample")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    g = gram(spec_effective, pts)
    spectrum = eig_sym(g / n)
    alpha_bar = apply_filter(spectrum, y, lambda sig: _gbar(sig, gamma, iterations)) / n
    if not np.all(np.isfinite(alpha_bar)):
        raise DivergenceError(int(iterations))
    return FitModel(spec=spec_effective, xs=pts, alpha=alpha_bar, checkpoints=None)


def predict(model: FitModel, x):
    """Evaluate the fitted function at one point (float) or a batch (array)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == model.spec.dim)
    kx = gram_cross(model.spec, x, model.xs)
    values = kx @ model.alpha
    return float(values[0]) if single else values

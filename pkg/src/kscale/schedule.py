"""Theory-side calculators: smoothness exponents and parameter schedules.

The smoothness exponent ``beta`` compresses how the target's regularity
relates to the space the recursion runs in; together with the capacity
exponent ``nu`` it fixes batch size, step-size and stopping time up to
constants.  All proportionality constants are set to 1 and the constant
step-size is capped at 0.2 / kappa^2, safely below the 1/4 stability
bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

STRATEGIES = ("one-pass", "early-stop", "batch-gd")
MODES = ("promoting", "preconditioning")

GAMMA_CAP_FACTOR = 0.2


@dataclass(frozen=True)
class SmoothnessSpec:
    """Regularity inputs driving schedules and rate predictions.

    ``a`` is the benchmark smoothness, ``s`` the scale index the
    recursion runs at, ``r`` the source index used when preconditioning,
    ``R`` the source norm bound, ``M`` the label bound and ``nu`` the
    effective-dimension exponent.
    """

    a: float
    s: float
    r: float = 0.0
    R: float = 1.0
    M: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"benchmark smoothness a must be positive, got {self.a}")
        if not 0 < self.nu <= 1:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if self.R <= 0 or self.M <= 0:
            raise ValueError("norm bounds R and M must be positive")
        if self.r <= -self.a:
            raise ValueError(f"source index r must exceed -a = {-self.a}, got {self.r}")


def beta(spec: SmoothnessSpec, mode: str) -> float:
    """Smoothness exponent for the given regime.

    promoting:       (a - s) / (2 (a + s)) with 0 <= s <= a
    preconditioning: (r - s) / (2 (a + s)) with -a/2 <= s <= 0 and r >= s
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "promoting":
        if not 0 <= spec.s <= spec.a:
            raise ValueError(
                f"promoting mode needs 0 <= s <= a, got s={spec.s}, a={spec.a}"
            )
        return (spec.a - spec.s) / (2.0 * (spec.a + spec.s))
    if not -spec.a / 2.0 <= spec.s <= 0:
        raise ValueError(
            f"preconditioning mode needs -a/2 <= s <= 0, got s={spec.s}, a={spec.a}"
        )
    if spec.r < spec.s:
        raise ValueError(
            f"preconditioning mode needs r >= s, got r={spec.r}, s={spec.s}"
        )
    value = (spec.r - spec.s) / (2.0 * (spec.a + spec.s))
    if spec.nu + 2.0 * value <= 0:
        warnings.warn(
            f"nu + 2*beta = {spec.nu + 2 * value:g} is not positive; "
            "the schedule corollary does not apply",
            stacklevel=2,
        )
    return value


def _ceil_tol(x: float) -> int:
    # ceil that forgives float dust just above an integer (n**e rounding)
    return max(1, math.ceil(x - 1e-9 * max(1.0, abs(x))))


def choose_params(
    n: int,
    beta_value: float,
    nu: float,
    R: float,
    M: float,
    strategy: str,
    kappa_sq_value: float = 1.0,
) -> tuple[int, float, int]:
    """Batch size, step-size and horizon for one of the three schedules.

    one-pass:   b = 1, T = n, gamma decays with n;
    early-stop: b = n^((nu+2*beta)/(1+2*beta+nu)), constant gamma,
                T = ((R^2/M^2) n)^(1/(1+2*beta+nu));
    batch-gd:   b = n, same gamma and T as early-stop.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if nu + 2.0 * beta_value <= 0:
        raise ValueError(
            f"need nu + 2*beta > 0, got nu={nu}, beta={beta_value}"
        )
    if kappa_sq_value <= 0:
        raise ValueError(f"kappa_sq must be positive, got {kappa_sq_value}")
    denom = 1.0 + 2.0 * beta_value + nu
    gamma_const = GAMMA_CAP_FACTOR / kappa_sq_value
    ratio = R * R / (M * M)

    if strategy == "one-pass":
        gamma = ratio * (1.0 / (ratio * n)) ** ((nu + 2.0 * beta_value) / denom)
        return 1, min(gamma, gamma_const), n
    horizon = _ceil_tol((ratio * n) ** (1.0 / denom))
    if strategy == "early-stop":
        b = min(_ceil_tol(n ** ((nu + 2.0 * beta_value) / denom)), n)
        return b, gamma_const, horizon
    return n, gamma_const, horizon


def critical_batchsize(n: int, beta_value: float, nu: float) -> int:
    """Mini-batch size beyond which larger batches stop helping."""
    if nu + 2.0 * beta_value <= 0:
        raise ValueError(
            f"need nu + 2*beta > 0, got nu={nu}, beta={beta_value}"
        )
    exponent = (nu + 2.0 * beta_value) / (1.0 + 2.0 * beta_value + nu)
    return min(max(_ceil_tol(n**exponent), 1), n)


def theoretical_rate(beta_value: float, nu: float, regular: bool) -> float:
    """Predicted excess-risk decay exponent in n.

    ``regular`` selects the benchmark-met rate (1+2*beta)/(1+2*beta+nu);
    otherwise the violated-benchmark rate 1/(1+nu).
    """
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    if regular:
        return (1.0 + 2.0 * beta_value) / (1.0 + 2.0 * beta_value + nu)
    return 1.0 / (1.0 + nu)


def sample_size_check(
    n: int, gamma: float, iterations: int, effdim_at_inv_gt: float
) -> str | None:
    """None when n >= gamma*T*max(1, N(1/(gamma*T))), else a warning message."""
    if n <= 0 or gamma <= 0 or iterations <= 0 or effdim_at_inv_gt < 0:
        raise ValueError("sample_size_check expects positive arguments")
    bound = gamma * iterations * max(1.0, effdim_at_inv_gt)
    if n >= bound:
        return None
    return (
        f"sample size n={n} is below gamma*T*max(1, N) = {bound:g}; "
        "the risk bound's sample-size condition fails"
    )

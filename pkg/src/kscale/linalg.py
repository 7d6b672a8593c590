"""Dense symmetric eigendecomposition, spectral filters, effective dimension."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenvalues in descending order with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eig_sym(matrix) -> SymmetricSpectrum:
    """Full eigendecomposition of a symmetric matrix (descending eigenvalues).

    Raises ValueError if the input deviates from symmetry by more than
    1e-10 relative to its largest entry.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric within 1e-10 relative tolerance")
    vals, vecs = np.linalg.eigh(a)
    return SymmetricSpectrum(eigenvalues=vals[::-1].copy(), eigenvectors=vecs[:, ::-1].copy())


def apply_filter(spectrum: SymmetricSpectrum, v, phi: Callable) -> np.ndarray:
    """Apply a scalar spectral function: sum_i phi(lam_i) <v_i, v> v_i.

    Negative numerical eigenvalues are clamped to zero before phi is
    evaluated, since they can only arise as round-off on PSD input.
    phi may be vectorized over an eigenvalue array or plain scalar.
    """
    vec = np.asarray(v, dtype=float)
    lams = np.maximum(spectrum.eigenvalues, 0.0)
    if vec.shape != (lams.shape[0],):
        raise ValueError(
            f"vector has shape {vec.shape}, expected ({lams.shape[0]},)"
        )
    weights = np.asarray(phi(lams), dtype=float)
    if weights.shape != lams.shape:
        weights = np.asarray([phi(l) for l in lams], dtype=float)
    coeffs = spectrum.eigenvectors.T @ vec
    return spectrum.eigenvectors @ (weights * coeffs)


def effective_dimension(eigenvalues, lam: float) -> float:
    """trace(T (T + lam)^-1) computed from the spectrum of T."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    sig = np.asarray(eigenvalues, dtype=float)
    if np.any(sig < 0):
        warnings.warn(
            "negative eigenvalues clamped to zero in effective_dimension",
            stacklevel=2,
        )
        sig = np.maximum(sig, 0.0)
    return float(np.sum(sig / (sig + lam)))


def estimate_nu(eigenvalues, lam_grid) -> float:
    """Capacity exponent: least-squares slope of log N(lam) vs log(1/lam).

    The grid must contribute at least three points strictly inside
    (lam_min_eig / 100, lam_max_eig), where lam_min_eig is the smallest
    positive eigenvalue.  The slope is clamped to [0, 1].
    """
    sig = np.maximum(np.asarray(eigenvalues, dtype=float), 0.0)
    grid = np.asarray(lam_grid, dtype=float)
    positive = sig[sig > 0]
    if positive.size == 0:
        raise ValueError("spectrum has no positive eigenvalues")
    lo, hi = positive.min() / 100.0, positive.max()
    inside = grid[(grid > lo) & (grid < hi)]
    if inside.size < 3:
        raise ValueError(
            f"degenerate grid: need at least 3 points inside ({lo:.3g}, {hi:.3g}), "
            f"got {inside.size}"
        )
    log_n = np.log([effective_dimension(sig, lam) for lam in inside])
    log_inv = -np.log(inside)
    slope = np.polyfit(log_inv, log_n, 1)[0]
    return float(min(max(slope, 0.0), 1.0))

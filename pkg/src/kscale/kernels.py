"""Closed-form kernel families organized as Hilbert scales.

Two translation-invariant families are supported:

* ``gaussian`` -- the normalized heat kernel on R^d,
  ``k(x, y) = (4*pi*w)^(-d/2) * exp(-||x - y||^2 / (4*w))``,
  where the width ``w`` doubles as the smoothness index of the scale.
  Moving along the scale is exact: shifting by ``s`` adds ``s`` to the
  width (heat-semigroup composition), so nested spaces correspond to
  nested widths.

* ``matern`` -- unit-variance half-integer Matern kernels of order
  ``nu`` in {1/2, 3/2, 5/2, 7/2}; the order indexes a Sobolev-type
  scale and shifts by integer steps.

All operations are pure functions of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MATERN_ORDERS = (0.5, 1.5, 2.5, 3.5)


@dataclass(frozen=True)
class KernelSpec:
    """A point in a Hilbert scale: kernel family plus scale parameter.

    Exactly one of the two parameter groups is meaningful: ``width`` for
    the gaussian family, ``(order, lengthscale)`` for the matern family.
    """

    family: str
    dim: int = 1
    width: float | None = None
    order: float | None = None
    lengthscale: float | None = None

    def __post_init__(self):
        if self.family not in ("gaussian", "matern"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.dim < 1 or self.dim != int(self.dim):
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.family == "gaussian":
            if self.width is None or self.width <= 0:
                raise ValueError(f"gaussian width must be positive, got {self.width}")
            if self.order is not None or self.lengthscale is not None:
                raise ValueError("order/lengthscale are matern-only parameters")
        else:
            if self.order not in MATERN_ORDERS:
                raise ValueError(
                    f"matern order must be one of {MATERN_ORDERS}, got {self.order}"
                )
            if self.lengthscale is None or self.lengthscale <= 0:
                raise ValueError(
                    f"matern lengthscale must be positive, got {self.lengthscale}"
                )
            if self.width is not None:
                raise ValueError("width is a gaussian-only parameter")


def gaussian(width: float, dim: int = 1) -> KernelSpec:
    return KernelSpec(family="gaussian", dim=dim, width=float(width))


def matern(order: float, lengthscale: float = 1.0, dim: int = 1) -> KernelSpec:
    return KernelSpec(
        family="matern", dim=dim, order=float(order), lengthscale=float(lengthscale)
    )


def _as_points(x, dim: int) -> np.ndarray:
    """Coerce scalars / 1-d / 2-d input into an (m, dim) float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        # A 1-d array is a single point when it matches dim, otherwise a
        # batch of scalar points in dimension 1.
        if a.shape[0] == dim:
            a = a.reshape(1, dim)
        elif dim == 1:
            a = a.reshape(-1, 1)
        else:
            raise ValueError(f"point has dimension {a.shape[0]}, expected {dim}")
    if a.shape[-1] != dim:
        raise ValueError(f"point has dimension {a.shape[-1]}, expected {dim}")
    return a


def _sq_dists(xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    # broadcasted (m, k) squared distances; exactly symmetric when xs is zs
    diff = xs[:, None, :] - zs[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _gaussian_values(spec: KernelSpec, d2: np.ndarray) -> np.ndarray:
    norm = (4.0 * np.pi * spec.width) ** (-spec.dim / 2.0)
    return norm * np.exp(-d2 / (4.0 * spec.width))


def _matern_values(spec: KernelSpec, d2: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.maximum(d2, 0.0))
    u = np.sqrt(2.0 * spec.order) * r / spec.lengthscale
    if spec.order == 0.5:
        poly = 1.0
    elif spec.order == 1.5:
        poly = 1.0 + u
    elif spec.order == 2.5:
        poly = 1.0 + u + u**2 / 3.0
    else:  # 3.5
        poly = 1.0 + u + 0.4 * u**2 + u**3 / 15.0
    return poly * np.exp(-u)


def _values(spec: KernelSpec, d2: np.ndarray) -> np.ndarray:
    if spec.family == "gaussian":
        return _gaussian_values(spec, d2)
    return _matern_values(spec, d2)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    xa = _as_points(x, spec.dim)
    ya = _as_points(y, spec.dim)
    if xa.shape[0] != 1 or ya.shape[0] != 1:
        raise ValueError("eval_kernel expects single points; use gram for batches")
    return float(_values(spec, _sq_dists(xa, ya))[0, 0])


def kappa_sq(spec: KernelSpec) -> float:
    """Supremum of the kernel, attained on the diagonal k(x, x)."""
    if spec.family == "gaussian":
        return (4.0 * np.pi * spec.width) ** (-spec.dim / 2.0)
    return 1.0


def scale_shift(spec: KernelSpec, s: float) -> KernelSpec:
    """Kernel of the Hilbert-scale space shifted by ``s``.

    Gaussian widths shift additively (``w -> w + s``, any real ``s`` with
    ``w + s > 0``); matern orders shift by integer steps within the
    supported half-integer set.  Shifts compose:
    ``scale_shift(scale_shift(k, s), t) == scale_shift(k, s + t)``.
    """
    if spec.family == "gaussian":
        new_width = spec.width + s
        if new_width <= 0:
            raise ValueError(
                f"shift {s} leaves the gaussian family: width {spec.width} + s "
                f"must stay positive (admissible shifts: s > {-spec.width})"
            )
        return KernelSpec(family="gaussian", dim=spec.dim, width=new_width)
    if s != int(s):
        raise ValueError(
            f"matern scale shifts must be integers, got {s} "
            f"(admissible shifts from order {spec.order}: "
            f"{[int(o - spec.order) for o in MATERN_ORDERS]})"
        )
    new_order = spec.order + int(s)
    if new_order not in MATERN_ORDERS:
        raise ValueError(
            f"shift {int(s)} leaves the supported matern orders {MATERN_ORDERS} "
            f"(admissible shifts from order {spec.order}: "
            f"{[int(o - spec.order) for o in MATERN_ORDERS]})"
        )
    return KernelSpec(
        family="matern", dim=spec.dim, order=new_order, lengthscale=spec.lengthscale
    )


def gram(spec: KernelSpec, xs) -> np.ndarray:
    """Symmetric kernel matrix G with G[i, j] = k(x_i, x_j).

    The result is exactly symmetric and its diagonal equals k(x, x).
    """
    pts = _as_points(xs, spec.dim)
    if pts.shape[0] == 0:
        raise ValueError("gram requires at least one point")
    g = _values(spec, _sq_dists(pts, pts))
    np.fill_diagonal(g, kappa_sq(spec))
    return g


def gram_cross(spec: KernelSpec, xs, zs) -> np.ndarray:
    """Rectangular kernel matrix with entries k(x_i, z_j)."""
    xa = _as_points(xs, spec.dim)
    za = _as_points(zs, spec.dim)
    return _values(spec, _sq_dists(xa, za))


def format_spec(spec: KernelSpec) -> str:
    """Render a spec as a key=value group, e.g. ``family=gaussian width=1.0 dim=1``."""
    if spec.family == "gaussian":
        return f"family=gaussian width={spec.width!r} dim={spec.dim}"
    return (
        f"family=matern order={spec.order!r} "
        f"lengthscale={spec.lengthscale!r} dim={spec.dim}"
    )


def parse_spec(text: str) -> KernelSpec:
    """Inverse of :func:`format_spec`."""
    fields: dict[str, str] = {}
    for token in text.split():
        if "=" not in token:
            raise ValueError(f"malformed kernel spec token {token!r}")
        key, value = token.split("=", 1)
        if key in fields:
            raise ValueError(f"duplicate kernel spec key {key!r}")
        fields[key] = value
    family = fields.pop("family", None)
    if family is None:
        raise ValueError("kernel spec is missing the family key")
    try:
        dim = int(fields.pop("dim", "1"))
        if family == "gaussian":
            spec = KernelSpec(family="gaussian", dim=dim, width=float(fields.pop("width")))
        elif family == "matern":
            spec = KernelSpec(
                family="matern",
                dim=dim,
                order=float(fields.pop("order")),
                lengthscale=float(fields.pop("lengthscale", "1.0")),
            )
        else:
            raise ValueError(f"unknown kernel family {family!r}")
    except KeyError as exc:
        raise ValueError(f"kernel spec is missing the {exc.args[0]} key") from None
    if fields:
        raise ValueError(f"unknown kernel spec keys: {sorted(fields)}")
    return spec

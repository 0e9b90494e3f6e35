"""Tangent-bundle points, the connection map, and (p, q, alpha)-metrics.

Bundle tangents are stored as raw chart velocities (xdot, zdot); the
horizontal/vertical split is always computed through the connection map,
never stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffgeo import DiffConfig, ManifoldModel, ScalarField, christoffel_at, metric_at
from .errors import BasePointMismatchError


@dataclass(frozen=True, eq=False)
class BundlePoint:
    """A point of the tangent bundle: chart point x and fiber vector Z."""

    x: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, float))
        object.__setattr__(self, "Z", np.asarray(self.Z, float))
        if self.x.shape != self.Z.shape:
            raise ValueError("x and Z must have the same dimension")


@dataclass(frozen=True, eq=False)
class BundleTangent:
    """Tangent vector to the bundle at ``base`` in raw chart velocities."""

    base: BundlePoint
    xdot: np.ndarray
    zdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xdot", np.asarray(self.xdot, float))
        object.__setattr__(self, "zdot", np.asarray(self.zdot, float))

    def __add__(self, other: "BundleTangent") -> "BundleTangent":
        _require_same_base(self.base, other.base)
        return BundleTangent(self.base, self.xdot + other.xdot, self.zdot + other.zdot)

    def __rmul__(self, a: float) -> "BundleTangent":
        return BundleTangent(self.base, a * self.xdot, a * self.zdot)


def _require_same_base(a: BundlePoint, b: BundlePoint) -> None:
    if a is b:
        return
    if not (
        np.allclose(a.x, b.x, rtol=0.0, atol=1e-12)
        and np.allclose(a.Z, b.Z, rtol=0.0, atol=1e-12)
    ):
        raise BasePointMismatchError("bundle tangents live at different base points")


@dataclass(frozen=True)
class CGParams:
    """The scalar-field triple (p, q, alpha) defining a bundle metric.

    q must be non-negative and alpha strictly positive wherever evaluated;
    none of the three is assumed constant.
    """

    p: ScalarField
    q: ScalarField
    alpha: ScalarField

    @staticmethod
    def constant(p: float, q: float, alpha: float) -> "CGParams":
        if q < 0.0:
            raise ValueError("q must be non-negative")
        if alpha <= 0.0:
            raise ValueError("alpha must be positive")
        return CGParams(
            ScalarField.constant(p), ScalarField.constant(q), ScalarField.constant(alpha)
        )

    def at(self, x) -> tuple[float, float, float]:
        """Evaluate (p, q, alpha) at a chart point, validating sign constraints."""
        p = float(self.p.eval(x))
        q = float(self.q.eval(x))
        a = float(self.alpha.eval(x))
        if q < 0.0:
            raise ValueError(f"q(x) = {q} is negative")
        if a <= 0.0:
            raise ValueError(f"alpha(x) = {a} is not positive")
        return p, q, a


def sasaki_params() -> CGParams:
    """(0, 0, 1): the Sasaki metric."""
    return CGParams.constant(0.0, 0.0, 1.0)


def cheeger_gromoll_params() -> CGParams:
    """(1, 1, 1): the classical Cheeger-Gromoll metric."""
    return CGParams.constant(1.0, 1.0, 1.0)


def connection_map(model: ManifoldModel, A: BundleTangent, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Connection map K(A) = zdot + Gamma_x(xdot, Z).

    Vertical lifts map to their defining vector, horizontal vectors to zero;
    K is linear in A.
    """
    gam = christoffel_at(model, A.base.x, cfg)
    return A.zdot + np.einsum("kij,i,j->k", gam, A.xdot, A.base.Z)


def vertical_lift(at: BundlePoint, X) -> BundleTangent:
    """Vertical lift of X to the fiber point: velocity of t -> Z + tX."""
    return BundleTangent(at, np.zeros_like(at.x), np.asarray(X, float))


def horizontal_lift(
    model: ManifoldModel, at: BundlePoint, v, cfg: DiffConfig = DiffConfig()
) -> BundleTangent:
    """The unique bundle tangent over v annihilated by the connection map."""
    v = np.asarray(v, float)
    gam = christoffel_at(model, at.x, cfg)
    return BundleTangent(at, v, -np.einsum("kij,i,j->k", gam, v, at.Z))


def hv_decompose(
    model: ManifoldModel, A: BundleTangent, cfg: DiffConfig = DiffConfig()
) -> tuple[BundleTangent, BundleTangent]:
    """Split A into horizontal and vertical parts; they sum back to A."""
    k = connection_map(model, A, cfg)
    return horizontal_lift(model, A.base, A.xdot, cfg), vertical_lift(A.base, k)


def cg_metric_eval(
    model: ManifoldModel,
    params: CGParams,
    A: BundleTangent,
    B: BundleTangent,
    cfg: DiffConfig = DiffConfig(),
) -> float:
    """Evaluate the (p, q, alpha)-metric on two bundle tangents.

    h(A, B) = g(pi_* A, pi_* B)
              + w^p (g(KA, KB) + q g(KA, Z) g(KB, Z)),   w = 1/(1 + alpha g(Z, Z)),

    all scalar parameters evaluated at the base chart point.  (0, 0, 1)
    recovers the Sasaki metric, (1, 1, 1) the Cheeger-Gromoll metric.
    """
    _require_same_base(A.base, B.base)
    x, z = A.base.x, A.base.Z
    p, q, a = params.at(x)
    g = metric_at(model, x)
    ka = connection_map(model, A, cfg)
    kb = connection_map(model, B, cfg)
    w = 1.0 / (1.0 + a * float(z @ g @ z))
    gz = g @ z
    return float(
        A.xdot @ g @ B.xdot + w**p * (ka @ g @ kb + q * float(ka @ gz) * float(kb @ gz))
    )


def cg_metric_matrix(
    model: ManifoldModel,
    params: CGParams,
    at: BundlePoint,
    cfg: DiffConfig = DiffConfig(),
) -> np.ndarray:
    """Gram matrix of the bundle metric in the (horizontal, vertical) frame.

    The frame is horizontal lifts of the chart basis followed by vertical
    lifts; the result is block diagonal with blocks g and
    w^p (g + q (gZ)(gZ)^T).
    """
    x, z = at.x, at.Z
    p, q, a = params.at(x)
    g = metric_at(model, x)
    w = 1.0 / (1.0 + a * float(z @ g @ z))
    gz = g @ z
    m = model.dim
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = g
    out[m:, m:] = w**p * (g + q * np.outer(gz, gz))
    return out

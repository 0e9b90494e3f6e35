"""Charted Riemannian manifolds and the differentiation engine.

A manifold is modelled as a single chart: a metric field over an open subset
of R^n plus optional analytic oracles (Christoffel symbols, an ambient
embedding).  Every derived quantity falls back to central finite differences
when no oracle is supplied, so analytic and numerical routes can always be
cross-checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ChartDomainError,
    ConditioningError,
    DegeneratePlaneError,
    InvalidDilatationError,
)

EPS = float(np.finfo(float).eps)

#: Default step for first derivatives, h ~ eps^(1/3).
DEFAULT_STEP = EPS ** (1.0 / 3.0)

#: Default step for second derivatives, h ~ eps^(1/4).  Second-order stencils
#: amplify roundoff by 1/h^2, so they need a larger step than first-order ones.
DEFAULT_STEP_SECOND = EPS**0.25


@dataclass(frozen=True)
class DiffConfig:
    """Knobs for the finite-difference engine.

    Parameters
    ----------
    step : float
        Base step for first-derivative stencils; scaled by max(1, |x|_inf)
        at the evaluation point.
    step_second : float
        Base step for second-derivative stencils, scaled the same way.
    richardson : bool
        Apply one level of Richardson extrapolation (evaluate at h and h/2
        and cancel the leading h^2 error term).
    tol_derivative : float
        Tolerance used when derived quantities are compared against analytic
        oracles or against each other.
    """

    step: float = DEFAULT_STEP
    step_second: float = DEFAULT_STEP_SECOND
    richardson: bool = False
    tol_derivative: float = 1e-6

    def __post_init__(self):
        if self.step <= 0.0 or self.step_second <= 0.0:
            raise ValueError("finite-difference steps must be positive")
        if self.tol_derivative <= 0.0:
            raise ValueError("tol_derivative must be positive")


@dataclass(frozen=True)
class ScalarField:
    """Real-valued function on a chart with an optional analytic differential.

    ``gradient_oracle`` returns the coordinate partial derivatives (the
    differential); the metric gradient is obtained through :func:`grad_scalar`.
    """

    eval: Callable[[np.ndarray], float]
    gradient_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @staticmethod
    def constant(value: float) -> "ScalarField":
        v = float(value)
        return ScalarField(
            eval=lambda x: v,
            gradient_oracle=lambda x: np.zeros(np.shape(x)),
        )


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """Single-chart model of a Riemannian manifold.

    Parameters
    ----------
    dim : int
        Chart dimension.
    metric : callable
        Chart point -> (dim, dim) symmetric positive-definite matrix.
    christoffel : callable, optional
        Analytic oracle for the Levi-Civita symbols, chart point ->
        array Gamma[k, i, j] with the upper index first.
    embedding_dim, embedding : optional
        Isometric embedding into flat space: chart point -> ambient point.
        The pullback of the ambient inner product must agree with ``metric``.
    chart_domain : callable, optional
        Predicate deciding whether a chart point is admissible.  ``None``
        means the whole plane.
    """

    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    embedding_dim: Optional[int] = None
    embedding: Optional[Callable[[np.ndarray], np.ndarray]] = None
    chart_domain: Optional[Callable[[np.ndarray], bool]] = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if (self.embedding is None) != (self.embedding_dim is None):
            raise ValueError("embedding and embedding_dim must be given together")

    def contains(self, x) -> bool:
        if self.chart_domain is None:
            return True
        return bool(self.chart_domain(np.asarray(x, float)))


def _require_in_domain(model: ManifoldModel, x: np.ndarray) -> None:
    if not model.contains(x):
        raise ChartDomainError(
            f"point {np.asarray(x)} outside chart domain of {model.name or 'model'}"
        )


def _step_scale(x: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(x)))) if np.size(x) else 1.0


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def derivative_array(f, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Partial derivatives of an array-valued function.

    Returns ``out[m, ...] = d_m f(x)`` using central differences, with one
    Richardson level when ``cfg.richardson`` is set.
    """
    x = np.asarray(x, float)
    h = cfg.step * _step_scale(x)

    def stencil(hh):
        cols = []
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = hh
            cols.append((np.asarray(f(x + e), float) - np.asarray(f(x - e), float)) / (2.0 * hh))
        return np.stack(cols)

    d = stencil(h)
    if cfg.richardson:
        d = (4.0 * stencil(h / 2.0) - d) / 3.0
    return d


def second_derivative_array(f, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """All second partials of an array-valued function.

    Returns ``out[m, n, ...] = d_m d_n f(x)``; diagonal entries use the
    three-point stencil, mixed ones the four-point cross stencil.
    """
    x = np.asarray(x, float)
    n = x.size
    h = cfg.step_second * _step_scale(x)

    def stencil(hh):
        f0 = np.asarray(f(x), float)
        out = np.zeros((n, n) + f0.shape)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = hh
            out[i, i] = (
                np.asarray(f(x + ei), float) - 2.0 * f0 + np.asarray(f(x - ei), float)
            ) / hh**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = hh
                mixed = (
                    np.asarray(f(x + ei + ej), float)
                    - np.asarray(f(x + ei - ej), float)
                    - np.asarray(f(x - ei + ej), float)
                    + np.asarray(f(x - ei - ej), float)
                ) / (4.0 * hh**2)
                out[i, j] = mixed
                out[j, i] = mixed
        return out

    d2 = stencil(h)
    if cfg.richardson:
        d2 = (4.0 * stencil(h / 2.0) - d2) / 3.0
    return d2


def scalar_differential(f: ScalarField, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Coordinate partials of a scalar field (oracle when available)."""
    x = np.asarray(x, float)
    if f.gradient_oracle is not None:
        return np.asarray(f.gradient_oracle(x), float)
    return derivative_array(lambda p: float(f.eval(p)), x, cfg)


# ---------------------------------------------------------------------------
# Metric-level operations
# ---------------------------------------------------------------------------


def metric_at(model: ManifoldModel, x) -> np.ndarray:
    """Evaluate the metric tensor, rejecting points outside the chart."""
    x = np.asarray(x, float)
    _require_in_domain(model, x)
    g = np.asarray(model.metric(x), float)
    if g.shape != (model.dim, model.dim):
        raise ValueError(f"metric returned shape {g.shape}, expected {(model.dim,) * 2}")
    return g


def _solve_metric(g: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConditioningError(f"metric condition number {cond:.3e} too large")
    return np.linalg.solve(g, rhs)


def _inverse_metric(g: np.ndarray) -> np.ndarray:
    return _solve_metric(g, np.eye(g.shape[0]))


def christoffel_fd(model: ManifoldModel, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Levi-Civita symbols from metric derivatives alone (ignores any oracle).

    Gamma[k, i, j] = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}),
    with the metric derivatives taken by central differences.
    """
    x = np.asarray(x, float)
    g = metric_at(model, x)
    ginv = _inverse_metric(g)
    dg = derivative_array(model.metric, x, cfg)  # dg[m, i, j] = d_m g_ij
    a = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)  # a[i, j, l]
    return 0.5 * np.einsum("kl,ijl->kij", ginv, a)


def christoffel_at(model: ManifoldModel, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Levi-Civita symbols; the analytic oracle overrides finite differences."""
    x = np.asarray(x, float)
    _require_in_domain(model, x)
    if model.christoffel is not None:
        gam = np.asarray(model.christoffel(x), float)
        if gam.shape != (model.dim,) * 3:
            raise ValueError("christoffel oracle returned a wrongly shaped array")
        return gam
    return christoffel_fd(model, x, cfg)


def christoffel_consistency_residual(
    model: ManifoldModel, x, cfg: DiffConfig = DiffConfig()
) -> float:
    """Max component gap between the analytic oracle and the FD route."""
    if model.christoffel is None:
        raise ValueError("model has no christoffel oracle to compare against")
    x = np.asarray(x, float)
    return float(np.abs(christoffel_fd(model, x, cfg) - np.asarray(model.christoffel(x), float)).max())


def embedding_pullback_residual(model: ManifoldModel, x, cfg: DiffConfig = DiffConfig()) -> float:
    """Max gap between the embedding-pullback inner product and the metric."""
    if model.embedding is None:
        raise ValueError("model has no embedding")
    x = np.asarray(x, float)
    d = derivative_array(model.embedding, x, cfg)  # d[m, a] = d_m e^a
    return float(np.abs(d @ d.T - metric_at(model, x)).max())


def grad_scalar(model: ManifoldModel, f: ScalarField, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Metric gradient: the vector v with g(v, w) = df(w) for all w."""
    x = np.asarray(x, float)
    _require_in_domain(model, x)
    df = scalar_differential(f, x, cfg)
    return _solve_metric(metric_at(model, x), df)


def christoffel_with_derivative(model: ManifoldModel, x, cfg: DiffConfig = DiffConfig()):
    """Gamma and its partials d_m Gamma^k_ij at a point.

    With an analytic oracle the partials come from first differences of the
    oracle.  Without one they are assembled from first and second metric
    derivatives directly; nesting two first-order stencils would amplify
    roundoff beyond the documented tolerances.
    """
    x = np.asarray(x, float)
    _require_in_domain(model, x)
    if model.christoffel is not None:
        gam = np.asarray(model.christoffel(x), float)
        dgam = derivative_array(model.christoffel, x, cfg)
        return gam, dgam
    g = metric_at(model, x)
    ginv = _inverse_metric(g)
    dg = derivative_array(model.metric, x, cfg)
    d2g = second_derivative_array(model.metric, x, cfg)  # d2g[m, n, i, j]
    a = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    gam = 0.5 * np.einsum("kl,ijl->kij", ginv, a)
    da = d2g + d2g.transpose(0, 2, 1, 3) - d2g.transpose(0, 2, 3, 1)  # da[m, i, j, l]
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dgam = 0.5 * (
        np.einsum("mkl,ijl->mkij", dginv, a) + np.einsum("kl,mijl->mkij", ginv, da)
    )
    return gam, dgam


def sectional_curvature(model: ManifoldModel, x, u, v, cfg: DiffConfig = DiffConfig()) -> float:
    """Sectional curvature of the plane spanned by u and v.

    Convention: round spheres of radius rho come out at +1/rho^2.

    Raises
    ------
    DegeneratePlaneError
        When the g-Gram determinant of (u, v) is below 1e-12 |u|^2 |v|^2.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    g = metric_at(model, x)
    uu = float(u @ g @ u)
    vv = float(v @ g @ v)
    uv = float(u @ g @ v)
    gram = uu * vv - uv * uv
    if gram < 1e-12 * uu * vv or uu == 0.0 or vv == 0.0:
        raise DegeneratePlaneError("vectors are too close to parallel")
    gam, dgam = christoffel_with_derivative(model, x, cfg)
    # R(d_i, d_j) d_k = (d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik) d_l
    r1 = dgam.transpose(1, 0, 2, 3)  # r1[l, i, j, k] = d_i G^l_jk
    rr = (
        r1
        - r1.transpose(0, 2, 1, 3)
        + np.einsum("lim,mjk->lijk", gam, gam)
        - np.einsum("ljm,mik->lijk", gam, gam)
    )
    ruvv = np.einsum("lijk,i,j,k->l", rr, u, v, v)
    return float((ruvv @ g @ u) / gram)


def conformal_connection_shift(
    model: ManifoldModel,
    lam: ScalarField,
    x,
    X,
    Y,
    cfg: DiffConfig = DiffConfig(),
) -> np.ndarray:
    """Difference tensor between the Levi-Civita connections of g and lam*g.

    For a strictly positive scalar field lam this is the symmetric bilinear
    map ((X lam) Y + (Y lam) X - g(X, Y) grad lam) / (2 lam).
    """
    x = np.asarray(x, float)
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    _require_in_domain(model, x)
    lam_x = float(lam.eval(x))
    if lam_x <= 0.0:
        raise InvalidDilatationError(f"dilatation value {lam_x} is not positive")
    dlam = scalar_differential(lam, x, cfg)
    g = metric_at(model, x)
    grad = _solve_metric(g, dlam)
    return (float(dlam @ X) * Y + float(dlam @ Y) * X - float(X @ g @ Y) * grad) / (2.0 * lam_x)

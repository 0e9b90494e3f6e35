"""Built-in chart library: flat space, stereographic sphere charts, and the
quadratic sphere-to-sphere (Veronese) immersion.

All charts ship analytic metric and Christoffel oracles so that the
finite-difference engine can be validated against them.
"""

from __future__ import annotations

import numpy as np

from .diffgeo import ManifoldModel
from .errors import ChartDomainError, OffSphereError
from .immersions import SmoothMap

SQRT3 = float(np.sqrt(3.0))

#: Image sphere radius of the quadratic immersion of the unit 2-sphere.
VERONESE_TARGET_RADIUS = 1.0 / SQRT3


def euclidean_space(dim: int) -> ManifoldModel:
    """Flat n-space in its identity chart."""
    if dim < 1:
        raise ValueError("dim must be positive")

    return ManifoldModel(
        dim=dim,
        metric=lambda x: np.eye(dim),
        christoffel=lambda x: np.zeros((dim, dim, dim)),
        embedding_dim=dim,
        embedding=lambda x: np.array(x, float),
        name=f"euclidean-{dim}",
    )


def stereo_chart(dim: int, radius: float) -> ManifoldModel:
    """Stereographic chart of the round d-sphere of the given radius.

    Projection is from the pole (0, ..., 0, radius) onto the equatorial
    plane, so the chart origin maps to the antipodal pole.  The metric is
    conformal, 4 rho^4 / (rho^2 + |t|^2)^2 times the identity, with

        Gamma^k_ij = -2 (d_ik t_j + d_jk t_i - d_ij t_k) / (rho^2 + |t|^2).
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    rho = float(radius)
    if rho <= 0.0:
        raise ValueError("radius must be positive")
    rho2 = rho * rho
    eye = np.eye(dim)

    def metric(t):
        t = np.asarray(t, float)
        return (4.0 * rho2**2 / (rho2 + t @ t) ** 2) * eye

    def christoffel(t):
        t = np.asarray(t, float)
        gam = (
            np.einsum("ki,j->kij", eye, t)
            + np.einsum("kj,i->kij", eye, t)
            - np.einsum("ij,k->kij", eye, t)
        )
        return (-2.0 / (rho2 + t @ t)) * gam

    return ManifoldModel(
        dim=dim,
        metric=metric,
        christoffel=christoffel,
        embedding_dim=dim + 1,
        embedding=lambda t: stereo_unproject(t, rho),
        chart_domain=lambda t: bool(np.all(np.isfinite(t))),
        name=f"sphere-{dim}-r{rho:g}",
    )


def stereo_unproject(t, radius: float) -> np.ndarray:
    """Chart point -> sphere point in ambient coordinates."""
    t = np.asarray(t, float)
    rho = float(radius)
    a = t @ t + rho * rho
    return np.concatenate([2.0 * rho * rho * t / a, [rho * (t @ t - rho * rho) / a]])


def stereo_project(point, radius: float) -> np.ndarray:
    """Sphere point -> chart coordinates (projection from the north pole)."""
    point = np.asarray(point, float)
    rho = float(radius)
    denom = rho - point[-1]
    if abs(denom) <= 1e-12 * rho:
        raise ChartDomainError("point is at (or too close to) the projection pole")
    return rho * point[:-1] / denom


def veronese(x, tol: float = 1e-8) -> np.ndarray:
    """Quadratic map sending the unit 2-sphere onto a sphere of radius 1/sqrt(3).

    Components: (x2 x3, x1 x3, x1 x2, (x1^2 - x2^2)/2,
    sqrt(3)/6 (x1^2 + x2^2 - 2 x3^2)).  Antipodal points share an image.
    """
    x = np.asarray(x, float)
    if x.shape != (3,):
        raise ValueError("expected a point of R^3")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise OffSphereError(f"input norm {np.linalg.norm(x)} is not 1 within {tol}")
    x1, x2, x3 = x
    return np.array(
        [
            x2 * x3,
            x1 * x3,
            x1 * x2,
            0.5 * (x1 * x1 - x2 * x2),
            (SQRT3 / 6.0) * (x1 * x1 + x2 * x2 - 2.0 * x3 * x3),
        ]
    )


def veronese_map() -> SmoothMap:
    """Chart-level quadratic immersion of the open lower hemisphere.

    Source: stereographic chart of the unit 2-sphere (|t| < 1 covers the
    lower hemisphere, where the map is injective).  Target: stereographic
    chart of the radius-1/sqrt(3) 4-sphere; the image never reaches the
    projection pole, so the chart covers all of it.
    """
    source = stereo_chart(2, 1.0)
    target = stereo_chart(4, VERONESE_TARGET_RADIUS)

    def chart_map(t):
        return stereo_project(veronese(stereo_unproject(t, 1.0)), VERONESE_TARGET_RADIUS)

    return SmoothMap(source=source, target=target, eval=chart_map, name="veronese")


def veronese_image_chart() -> ManifoldModel:
    """Chart on the image surface of the quadratic immersion.

    Shares coordinates and metric with the unit-sphere chart (the immersion
    is isometric) but embeds into R^5 through the image parametrisation.
    """
    base = stereo_chart(2, 1.0)
    return ManifoldModel(
        dim=2,
        metric=base.metric,
        christoffel=base.christoffel,
        embedding_dim=5,
        embedding=lambda t: veronese(stereo_unproject(t, 1.0)),
        chart_domain=base.chart_domain,
        name="veronese-image",
    )


def equator_map(codim: int = 2, radius: float = 1.0) -> SmoothMap:
    """Totally geodesic equatorial inclusion of the 2-sphere.

    In stereographic charts the inclusion is plain zero-padding of the
    coordinates, so the Jacobian and Hessian oracles are exact.
    """
    if codim < 1:
        raise ValueError("codim must be positive")
    source = stereo_chart(2, radius)
    target = stereo_chart(2 + codim, radius)
    jac = np.vstack([np.eye(2), np.zeros((codim, 2))])

    return SmoothMap(
        source=source,
        target=target,
        eval=lambda t: np.concatenate([t, np.zeros(codim)]),
        jacobian=lambda t: jac,
        hessian=lambda t: np.zeros((2 + codim, 2, 2)),
        name=f"equator-codim{codim}",
    )


def builtin_charts() -> dict[str, ManifoldModel]:
    """The charts every differentiation self-check runs over."""
    return {
        "euclidean-2": euclidean_space(2),
        "sphere-2-r1": stereo_chart(2, 1.0),
        "sphere-3-r1": stereo_chart(3, 1.0),
        "sphere-4-veronese-target": stereo_chart(4, VERONESE_TARGET_RADIUS),
        "veronese-image": veronese_image_chart(),
    }

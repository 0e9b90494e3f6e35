"""Smooth maps between charts and their conformality analysis.

Covers pullback conformality of the base map, second fundamental forms of
images inside spheres, the induced tangent-bundle map, the closed-form
bundle dilatation, the exponent case classification, and the connection
transfer identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bundle import BundlePoint, BundleTangent, CGParams, cg_metric_eval, connection_map
from .diffgeo import (
    DiffConfig,
    ManifoldModel,
    ScalarField,
    _require_in_domain,
    conformal_connection_shift,
    derivative_array,
    metric_at,
    second_derivative_array,
)
from .errors import (
    DegenerateSampleError,
    InvalidDilatationError,
    NotConformalError,
    NotImmersionError,
    OffSphereError,
)


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """Map between charted manifolds with optional derivative oracles.

    ``jacobian`` returns J[a, i] = d phi^a / dx_i and ``hessian`` returns
    H[a, i, j]; both fall back to central finite differences.
    """

    source: ManifoldModel
    target: ManifoldModel
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""


def map_jacobian(phi: SmoothMap, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    x = np.asarray(x, float)
    if phi.jacobian is not None:
        return np.asarray(phi.jacobian(x), float)
    return derivative_array(lambda p: np.asarray(phi.eval(p), float), x, cfg).T


def map_hessian(phi: SmoothMap, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    x = np.asarray(x, float)
    if phi.hessian is not None:
        return np.asarray(phi.hessian(x), float)
    d2 = second_derivative_array(lambda p: np.asarray(phi.eval(p), float), x, cfg)
    return np.transpose(d2, (2, 0, 1))


def pushforward(phi: SmoothMap, x, v, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Differential of the map applied to a tangent vector."""
    x = np.asarray(x, float)
    _require_in_domain(phi.source, x)
    return map_jacobian(phi, x, cfg) @ np.asarray(v, float)


# ---------------------------------------------------------------------------
# Base conformality
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConformalityReport:
    """Result of fitting the pullback metric to a multiple of the source metric."""

    lambda_estimates: list
    max_offdiag_residual: float
    max_lambda_spread: float
    is_conformal: bool
    is_homothety: bool


def base_conformality(
    phi: SmoothMap,
    sample_points,
    cfg: DiffConfig = DiffConfig(),
    conformal_tol: float = 1e-5,
    homothety_tol: float = 1e-5,
) -> ConformalityReport:
    """Estimate the dilatation of phi at each sample point.

    Per point the pullback P = J^T g' J is fitted by least squares to
    lambda * g; the residual is the worst component of P - lambda*g relative
    to the larger of the two scales.  The map counts as a homothety when the
    relative spread of the per-point estimates stays below ``homothety_tol``.
    """
    estimates = []
    max_res = 0.0
    for x in sample_points:
        x = np.asarray(x, float)
        g = metric_at(phi.source, x)
        jac = map_jacobian(phi, x, cfg)
        if np.linalg.matrix_rank(jac) < phi.source.dim:
            raise NotImmersionError(f"rank-deficient differential at {x}")
        pullback = jac.T @ metric_at(phi.target, np.asarray(phi.eval(x), float)) @ jac
        lam = float(np.sum(pullback * g) / np.sum(g * g))
        scale = max(float(np.abs(pullback).max()), abs(lam) * float(np.abs(g).max()))
        max_res = max(max_res, float(np.abs(pullback - lam * g).max() / scale))
        estimates.append((x, lam))
    lams = np.array([lam for _, lam in estimates])
    spread = float((lams.max() - lams.min()) / abs(lams.mean())) if lams.size else 0.0
    conformal = bool(max_res <= conformal_tol and np.all(lams > 0.0))
    return ConformalityReport(
        lambda_estimates=estimates,
        max_offdiag_residual=max_res,
        max_lambda_spread=spread,
        is_conformal=conformal,
        is_homothety=bool(conformal and spread <= homothety_tol),
    )


# ---------------------------------------------------------------------------
# Second fundamental forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SffSample:
    """One evaluation of the flat-ambient second fundamental form."""

    point: np.ndarray
    pair: tuple
    ambient_value: np.ndarray
    in_sphere_inner_products: Optional[np.ndarray] = None


def _composite_embedding(phi: SmoothMap):
    if phi.target.embedding is None:
        raise ValueError("target model carries no ambient embedding")
    emb = phi.target.embedding
    return lambda t: np.asarray(emb(np.asarray(phi.eval(t), float)), float)


def _sff_data(phi: SmoothMap, x, cfg: DiffConfig):
    """Jacobian, normal second-derivative parts and ambient position of the
    composite chart-to-ambient parametrisation of the image."""
    x = np.asarray(x, float)
    _require_in_domain(phi.source, x)
    comp = _composite_embedding(phi)
    jac = derivative_array(comp, x, cfg).T  # (D, m)
    if np.linalg.matrix_rank(jac) < phi.source.dim:
        raise NotImmersionError(f"composite parametrisation rank deficient at {x}")
    hess = np.transpose(second_derivative_array(comp, x, cfg), (2, 0, 1))  # (D, m, m)
    q, _ = np.linalg.qr(jac)
    normal = hess - np.einsum("dc,cij->dij", q @ q.T, hess)
    return jac, normal, comp(x)


def ambient_sff(phi: SmoothMap, x, u, v, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Second fundamental form of the image of phi in flat ambient space.

    The normal component (to the image tangent plane) of the second
    derivative of the composite embedding, evaluated on (u, v).
    """
    _, normal, _ = _sff_data(phi, x, cfg)
    return np.einsum("dij,i,j->d", normal, np.asarray(u, float), np.asarray(v, float))


def ambient_sff_matrix(phi: SmoothMap, x, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """All values of the flat-ambient form on the chart basis, shape (D, m, m)."""
    _, normal, _ = _sff_data(phi, x, cfg)
    return normal


def _require_on_sphere(point: np.ndarray, radius: float, tol: float) -> None:
    r = float(np.linalg.norm(point))
    if abs(r - radius) > tol:
        raise OffSphereError(f"ambient point has norm {r}, expected {radius}")


def sphere_sff_inner(
    phi: SmoothMap,
    radius: float,
    x,
    pair_a: tuple,
    pair_b: tuple,
    cfg: DiffConfig = DiffConfig(),
    sphere_tol: float = 1e-8,
) -> float:
    """Inner product of in-sphere second-fundamental-form values.

    For an image inside the radius-rho sphere, chart basis fields e_i:

        <Pi(e_i, e_k), Pi(e_j, e_l)> =
            <PiBar(e_i, e_k), PiBar(e_j, e_l)> - <e_i, e_k> <e_j, e_l> / rho^2,

    where PiBar is the flat-ambient form and the right-hand inner products
    are the induced metric of the image.
    """
    jac, normal, pos = _sff_data(phi, x, cfg)
    _require_on_sphere(pos, radius, sphere_tol)
    i, k = pair_a
    j, l = pair_b
    gbar = jac.T @ jac
    return float(normal[:, i, k] @ normal[:, j, l] - gbar[i, k] * gbar[j, l] / radius**2)


def optimality_coefficient(
    phi: SmoothMap,
    radius: float,
    x,
    cfg: DiffConfig = DiffConfig(),
    sphere_tol: float = 1e-8,
) -> tuple[float, float]:
    """Best-fit coefficient C with <Pi(u,w), Pi(v,w)> = C <u,v> <w,w>.

    Works on a g-orthonormal basis of the image tangent plane; the residual
    is the worst deviation of the (polarised) condition at the fitted C.
    """
    jac, normal, pos = _sff_data(phi, x, cfg)
    _require_on_sphere(pos, radius, sphere_tol)
    gbar = jac.T @ jac
    tt = np.einsum("dik,djl->ikjl", normal, normal) - np.einsum("ik,jl->ikjl", gbar, gbar) / radius**2
    chol = np.linalg.cholesky(gbar)
    frame = np.linalg.inv(chol).T  # columns are g-orthonormal
    tn = np.einsum("ia,kc,jb,ld,ikjl->acbd", frame, frame, frame, frame, tt)
    m = phi.source.dim
    coeff = float(np.einsum("acac->", tn) / m**2)
    sym = 0.5 * (tn + np.transpose(tn, (0, 3, 2, 1)))
    expected = coeff * np.einsum("ab,cd->acbd", np.eye(m), np.eye(m))
    return coeff, float(np.abs(sym - expected).max())


def mean_curvature(
    phi: SmoothMap,
    radius: float,
    x,
    cfg: DiffConfig = DiffConfig(),
    sphere_tol: float = 1e-8,
) -> np.ndarray:
    """Trace of the in-sphere second fundamental form, as an ambient vector.

    The in-sphere form is reconstructed from the flat-ambient one through the
    radial shape-operator correction PiBar(u, v) + (<u, v>/rho^2) * position;
    the trace is taken with the induced metric of the image.
    """
    jac, normal, pos = _sff_data(phi, x, cfg)
    _require_on_sphere(pos, radius, sphere_tol)
    gbar = jac.T @ jac
    in_sphere = normal + np.einsum("ij,d->dij", gbar, pos) / radius**2
    return np.einsum("ij,dij->d", np.linalg.inv(gbar), in_sphere)


# ---------------------------------------------------------------------------
# Bundle differential and bundle conformality
# ---------------------------------------------------------------------------


def bundle_differential(phi: SmoothMap, A: BundleTangent, cfg: DiffConfig = DiffConfig()) -> BundleTangent:
    """Differential of the induced tangent-bundle map in chart coordinates.

    (x, Z, xdot, zdot) maps to (phi(x), J Z, J xdot, H(xdot, Z) + J zdot);
    the Hessian term is forced by the chain rule, and vertical lifts go to
    vertical lifts of the pushforwards.
    """
    x = A.base.x
    jac = map_jacobian(phi, x, cfg)
    hess = map_hessian(phi, x, cfg)
    base = BundlePoint(np.asarray(phi.eval(x), float), jac @ A.base.Z)
    zdot = np.einsum("aij,i,j->a", hess, A.xdot, A.base.Z) + jac @ A.zdot
    return BundleTangent(base, jac @ A.xdot, zdot)


@dataclass(frozen=True, eq=False)
class BundleRatioSample:
    """Measured against closed-form dilatation at one (x, Z)."""

    x: np.ndarray
    Z: np.ndarray
    measured_ratio: float
    closed_form: float
    pair_spread: float


@dataclass(frozen=True, eq=False)
class BundleConformalityReport:
    samples: list
    max_relative_deviation: float
    lambda_is_constant_in_A: bool


def closed_form_bundle_dilatation(
    lam: float, p: float, alpha: float, r: float, beta: float, zz: float
) -> float:
    """lam (1 + alpha |Z|^2)^p / (1 + lam beta |Z|^2)^r with |Z|^2 = zz."""
    return float(lam * (1.0 + alpha * zz) ** p / (1.0 + lam * beta * zz) ** r)


def bundle_conformality(
    phi: SmoothMap,
    params_src: CGParams,
    params_tgt: CGParams,
    samples,
    cfg: DiffConfig = DiffConfig(),
    rng: Optional[np.random.Generator] = None,
    pairs: int = 8,
    ratio_tol: float = 1e-5,
    conformal_tol: float = 1e-5,
) -> BundleConformalityReport:
    """Measure h'(Phi_* A, Phi_* B) / h(A, B) against the closed form.

    ``samples`` is a sequence of (x, Z).  At each sample the ratio is taken
    over random tangent pairs (resampling degenerate denominators) and
    compared with

        lam(x) (1 + alpha(x) |Z|^2)^p(x) / (1 + lam(x) beta(x') |Z|^2)^r(x').

    The base map must pass :func:`base_conformality` on the sample points.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    base_points = [np.asarray(x, float) for x, _ in samples]
    base_report = base_conformality(phi, base_points, cfg, conformal_tol=conformal_tol)
    if not base_report.is_conformal:
        raise NotConformalError(
            f"base map residual {base_report.max_offdiag_residual:.3e} exceeds {conformal_tol:.1e}"
        )
    m = phi.source.dim
    out = []
    max_rel = 0.0
    constant = True
    for (x, z), (_, lam) in zip(samples, base_report.lambda_estimates):
        x = np.asarray(x, float)
        z = np.asarray(z, float)
        at = BundlePoint(x, z)
        g = metric_at(phi.source, x)
        zz = float(z @ g @ z)
        xp = np.asarray(phi.eval(x), float)
        p, _, alpha = params_src.at(x)
        r, _, beta = params_tgt.at(xp)
        closed = closed_form_bundle_dilatation(lam, p, alpha, r, beta, zz)

        jac = map_jacobian(phi, x, cfg)
        hess = map_hessian(phi, x, cfg)
        image_base = BundlePoint(xp, jac @ z)

        def push(a: BundleTangent) -> BundleTangent:
            zdot = np.einsum("aij,i,j->a", hess, a.xdot, z) + jac @ a.zdot
            return BundleTangent(image_base, jac @ a.xdot, zdot)

        ratios = []
        attempts = 0
        while len(ratios) < pairs:
            attempts += 1
            if attempts > 50 * pairs:
                raise DegenerateSampleError("could not draw non-degenerate tangent pairs")
            a = BundleTangent(at, rng.standard_normal(m), rng.standard_normal(m))
            b = a if not ratios else BundleTangent(at, rng.standard_normal(m), rng.standard_normal(m))
            hab = cg_metric_eval(phi.source, params_src, a, b, cfg)
            naa = cg_metric_eval(phi.source, params_src, a, a, cfg)
            nbb = naa if b is a else cg_metric_eval(phi.source, params_src, b, b, cfg)
            if abs(hab) < 1e-6 * np.sqrt(naa * nbb):
                continue
            hpab = cg_metric_eval(phi.target, params_tgt, push(a), push(b), cfg)
            ratios.append(hpab / hab)
        ratios = np.array(ratios)
        measured = float(ratios.mean())
        spread = float((ratios.max() - ratios.min()) / abs(measured))
        constant = constant and spread <= ratio_tol
        max_rel = max(max_rel, abs(measured - closed) / abs(closed))
        out.append(BundleRatioSample(x, z, measured, closed, spread))
    return BundleConformalityReport(out, float(max_rel), bool(constant))


# ---------------------------------------------------------------------------
# Exponent case classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseTag:
    """Outcome of the exponent case analysis at one point.

    ``coefficient`` carries the nonzero constant of the optimality condition
    for the two cases that force it (E3 and E4) and is None otherwise.
    """

    tag: str
    coefficient: Optional[float] = None


def classify_case(
    p: float,
    q: float,
    alpha: float,
    r: float,
    s: float,
    beta: float,
    lam: float,
    rel_tol: float = 1e-9,
) -> CaseTag:
    """Classify source/target exponents for a conformal bundle map.

    Tags:
      E1            p = r = 0
      E2            p = r != 0 and lam*beta = alpha
      E3            p = r = 1 and lam*beta != alpha; coefficient lam*(alpha - lam*beta)
      E4            p = 1, r = 0; coefficient lam*alpha
      INCOMPATIBLE  q != lam*s, or no pattern matches

    Ties between the matched (E2) and unmatched (E3) branches go to E2.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("alpha and beta must be positive")
    if q < 0.0 or s < 0.0:
        raise ValueError("q and s must be non-negative")
    if lam <= 0.0:
        raise InvalidDilatationError("dilatation must be positive")

    def close(u: float, v: float) -> bool:
        return abs(u - v) <= rel_tol * max(1.0, abs(u), abs(v))

    if not close(q, lam * s):
        return CaseTag("INCOMPATIBLE")
    if close(p, 0.0) and close(r, 0.0):
        return CaseTag("E1")
    if close(p, r) and not close(p, 0.0) and close(lam * beta, alpha):
        return CaseTag("E2")
    if close(p, 1.0) and close(r, 1.0):
        return CaseTag("E3", lam * (alpha - lam * beta))
    if close(p, 1.0) and close(r, 0.0):
        return CaseTag("E4", lam * alpha)
    return CaseTag("INCOMPATIBLE")


# ---------------------------------------------------------------------------
# Connection transfer and the curvature relation
# ---------------------------------------------------------------------------


def connection_transfer_residual(
    phi: SmoothMap,
    lam: ScalarField,
    A: BundleTangent,
    cfg: DiffConfig = DiffConfig(),
    sphere_radius: Optional[float] = None,
    sphere_tol: float = 1e-8,
) -> float:
    """Residual of K'(Phi_* A) = phi_* K(A) + phi_* S(v, Z) + Pi(v', Z').

    Here v = pi_* A, S is the conformal connection shift of the dilatation,
    and Pi the second fundamental form of the image in the target manifold.
    The left side goes through the target connection map; the right side is
    assembled independently, with Pi reconstructed as an ambient vector via
    the radial correction when the target is a sphere.  For maps between
    equal-dimensional charts the Pi term is omitted.  Returns the target-norm
    of the gap.
    """
    x, z, v = A.base.x, A.base.Z, A.xdot
    image = bundle_differential(phi, A, cfg)
    lhs = connection_map(phi.target, image, cfg)
    jac = map_jacobian(phi, x, cfg)
    rhs = jac @ connection_map(phi.source, A, cfg)
    rhs = rhs + jac @ conformal_connection_shift(phi.source, lam, x, v, z, cfg)
    if phi.source.dim != phi.target.dim:
        cjac, normal, pos = _sff_data(phi, x, cfg)
        rho = float(np.linalg.norm(pos)) if sphere_radius is None else float(sphere_radius)
        _require_on_sphere(pos, rho, sphere_tol)
        vp = cjac @ v
        zp = cjac @ z
        pi_ambient = np.einsum("dij,i,j->d", normal, v, z) + (float(vp @ zp) / rho**2) * pos
        tjac = derivative_array(phi.target.embedding, image.base.x, cfg).T
        pi_chart, *_ = np.linalg.lstsq(tjac, pi_ambient, rcond=None)
        rhs = rhs + pi_chart
    diff = lhs - rhs
    gp = metric_at(phi.target, image.base.x)
    return float(np.sqrt(max(float(diff @ gp @ diff), 0.0)))


def gauss_relation_check(kappa: float, kappa_prime: float, coeff: float, lam: float) -> float:
    """Signed gap kappa - (lam*kappa_prime - 2*coeff*lam)."""
    return float(kappa - (lam * kappa_prime - 2.0 * coeff * lam))

"""Masonry-like (no-tension) nonlinear elastic material.

Stress, fracture strain and the analytic tangent are closed-form on four
cones V0..V3 of strain space, selected from the ordered principal strains
e1 <= e2 <= e3 by the sign of

    t1 = e1,   t2 = alpha*e1 + 2*(1 + alpha)*e2,   t3 = 2*e3 + alpha*tr(E)

with alpha = lambda/mu.  One always has t1 <= t2/(2 + 3*alpha) and
t2 <= t3, so the cones are nested half-lines of the same chain and a
strain falls in V3 if t3 <= 0, else V2 if t2 <= 0, else V1 if t1 <= 0,
else V0.  Within ``tol_region`` of a boundary the higher-index (stiffer)
region wins.

All functions are vectorised over leading batch dimensions of 6-vector
strains (see :mod:`masonry_modal.tensors`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import tensors as ts
from .tensors import SQRT2


class Region(IntEnum):
    V0 = 0
    V1 = 1
    V2 = 2
    V3 = 3


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic parameters: Lame moduli mu, lam (Pa) and density rho (kg/m^3).

    ``behavior`` is ``"masonry"`` for the no-tension law or ``"elastic"``
    for linear isotropic elasticity (tie rods, timber).
    """

    mu: float
    lam: float
    rho: float
    behavior: str = "masonry"

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError(f"shear modulus must be positive, got {self.mu}")
        if not self.lam >= 0.0:
            raise ValueError(f"Lame modulus lambda must be >= 0, got {self.lam}")
        if not self.rho > 0.0:
            raise ValueError(f"density must be positive, got {self.rho}")
        if self.behavior not in ("masonry", "elastic"):
            raise ValueError(f"unknown behavior {self.behavior!r}")

    @classmethod
    def from_young(cls, young: float, poisson: float, density: float, behavior="masonry"):
        if not young > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {young}")
        if not 0.0 <= poisson < 0.5:
            raise ValueError(f"Poisson's ratio must lie in [0, 0.5), got {poisson}")
        mu = young / (2.0 * (1.0 + poisson))
        lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        return cls(mu=mu, lam=lam, rho=density, behavior=behavior)

    @property
    def alpha(self) -> float:
        return self.lam / self.mu

    @property
    def young(self) -> float:
        return self.mu * (2.0 * self.mu + 3.0 * self.lam) / (self.mu + self.lam)

    @property
    def poisson(self) -> float:
        return self.lam / (2.0 * (self.mu + self.lam))

    @property
    def masonry(self) -> bool:
        return self.behavior == "masonry"

    def with_young_density(self, young: float, density: float) -> "MaterialParams":
        return MaterialParams.from_young(young, self.poisson, density, self.behavior)


@dataclass(frozen=True)
class ConstitutiveResponse:
    stress: np.ndarray
    fracture: np.ndarray
    tangent: np.ndarray
    region: np.ndarray
    boundary: np.ndarray


def elastic_tensor(params: MaterialParams) -> np.ndarray:
    """C = 2 mu I_Sym + lambda I (x) I."""
    return 2.0 * params.mu * ts.IDENTITY4 + params.lam * ts.outer(ts.IDENTITY, ts.IDENTITY)


def _region_tests(values, alpha):
    e1, e2, e3 = values[..., 0], values[..., 1], values[..., 2]
    t1 = e1
    t2 = alpha * e1 + 2.0 * (1.0 + alpha) * e2
    t3 = 2.0 * e3 + alpha * (e1 + e2 + e3)
    return t1, t2, t3


TOL_REGION = 1e-10


def _classify(values, enorm, alpha, tol_scale=TOL_REGION):
    t1, t2, t3 = _region_tests(values, alpha)
    tol = tol_scale * (1.0 + enorm)
    region = np.select(
        [t3 <= tol, t2 <= tol, t1 <= tol],
        [Region.V3, Region.V2, Region.V1],
        default=Region.V0,
    ).astype(np.int8)
    boundary = (np.abs(t1) <= tol) | (np.abs(t2) <= tol) | (np.abs(t3) <= tol)
    return region, boundary


def classify_region(E, params: MaterialParams):
    """Region index (0..3) and boundary flag for each strain."""
    E = np.asarray(E, dtype=float)
    values = ts.eigvalsh(E)
    return _classify(values, ts.norm(E), params.alpha)


def _ratio(num, den, upper, floor):
    """num/den clipped to its admissible range [0, upper]."""
    return np.clip(num / np.maximum(den, floor), 0.0, upper)


def _masonry_response(E, params: MaterialParams, want_tangent=True):
    E = np.asarray(E, dtype=float)
    sd = ts.spectral_decompose(E)
    e = sd.values
    e1, e2, e3 = e[..., 0], e[..., 1], e[..., 2]
    enorm = ts.norm(E)
    region, boundary = _classify(e, enorm, params.alpha)
    # stress and fracture strain use the sharp partition so that they stay
    # exactly continuous and admissible; the tolerance band only picks the tangent
    sharp, _ = _classify(e, enorm, params.alpha, 0.0)

    mu, lam, a = params.mu, params.lam, params.alpha
    young = params.young
    O11, O22, O33 = sd.O11, sd.O22, sd.O33
    O12, O13, O23 = sd.O12, sd.O13, sd.O23
    C = elastic_tensor(params)

    v1 = (sharp == Region.V1)[..., None]
    v2 = (sharp == Region.V2)[..., None]
    v3 = (sharp == Region.V3)[..., None]
    v0 = (sharp == Region.V0)[..., None]

    # stress
    s1 = (young * e1)[..., None] * O11
    k = 2.0 * mu / (2.0 + a)
    s2 = (k * (2.0 * (1.0 + a) * e1 + a * e2))[..., None] * O11 + (
        k * (a * e1 + 2.0 * (1.0 + a) * e2)
    )[..., None] * O22
    s3 = ts.apply(C, E)
    T = np.where(v1, s1, 0.0) + np.where(v2, s2, 0.0) + np.where(v3, s3, 0.0)

    # fracture strain
    c1 = a / (2.0 * (1.0 + a))
    f1 = (e2 + c1 * e1)[..., None] * O22 + (e3 + c1 * e1)[..., None] * O33
    f2 = (e3 + a / (2.0 + a) * (e1 + e2))[..., None] * O33
    Ef = np.where(v0, E, 0.0) + np.where(v1, f1, 0.0) + np.where(v2, f2, 0.0)

    if not want_tangent:
        return T, Ef, None, region, boundary

    floor = 1e-12 * (1.0 + enorm)
    # W1: -e1/(ek - e1) lies in [0, 2(1+a)/(2+3a)] on V1
    up1 = 2.0 * (1.0 + a) / (2.0 + 3.0 * a)
    r12 = _ratio(-e1, e2 - e1, up1, floor)
    r13 = _ratio(-e1, e3 - e1, up1, floor)
    D1 = young * (
        ts.outer(O11, O11)
        + r12[..., None, None] * ts.outer(O12, O12)
        + r13[..., None, None] * ts.outer(O13, O13)
    )
    # W2: both shear ratios lie in [0, 2 + a] on V2
    r13b = _ratio(-(2.0 * (1.0 + a) * e1 + a * e2), e3 - e1, 2.0 + a, floor)
    r23b = _ratio(-(a * e1 + 2.0 * (1.0 + a) * e2), e3 - e2, 2.0 + a, floor)
    P = (O11 + O22) / SQRT2
    Q = (O11 - O22) / SQRT2
    D2 = (
        2.0 * mu * ts.outer(O12, O12)
        + (k * r13b)[..., None, None] * ts.outer(O13, O13)
        + (k * r23b)[..., None, None] * ts.outer(O23, O23)
        + 2.0 * mu * (2.0 + 3.0 * a) / (2.0 + a) * ts.outer(P, P)
        + 2.0 * mu * ts.outer(Q, Q)
    )
    D = (
        np.where((region == Region.V1)[..., None, None], D1, 0.0)
        + np.where((region == Region.V2)[..., None, None], D2, 0.0)
        + np.where((region == Region.V3)[..., None, None], C, 0.0)
    )
    D = 0.5 * (D + np.swapaxes(D, -1, -2))
    return T, Ef, D, region, boundary


def _elastic_response(E, params: MaterialParams, want_tangent=True):
    E = np.asarray(E, dtype=float)
    C = elastic_tensor(params)
    T = ts.apply(C, E)
    shape = E.shape[:-1]
    D = np.broadcast_to(C, shape + (6, 6)).copy() if want_tangent else None
    return (
        T,
        np.zeros_like(E),
        D,
        np.full(shape, Region.V3, dtype=np.int8),
        np.zeros(shape, dtype=bool),
    )


def respond(E, params: MaterialParams) -> ConstitutiveResponse:
    """Stress, fracture strain, tangent and region from one classification."""
    fn = _masonry_response if params.masonry else _elastic_response
    T, Ef, D, region, boundary = fn(E, params)
    return ConstitutiveResponse(T, Ef, D, region, boundary)


def stress(E, params: MaterialParams) -> np.ndarray:
    fn = _masonry_response if params.masonry else _elastic_response
    return fn(E, params, want_tangent=False)[0]


def fracture_strain(E, params: MaterialParams) -> np.ndarray:
    fn = _masonry_response if params.masonry else _elastic_response
    return fn(E, params, want_tangent=False)[1]


def tangent(E, params: MaterialParams) -> np.ndarray:
    return respond(E, params).tangent


# --------------------------------------------------------------------------
# one-dimensional restriction (fibers)


def uniaxial_respond(eps, young: float, masonry: bool = True):
    """Fiber law: sigma = young*eps for eps <= 0, zero in tension.

    Returns ``(sigma, tangent, cracked)``.  At eps == 0 the compressive
    branch is taken (tangent = young).
    """
    eps = np.asarray(eps, dtype=float)
    if not masonry:
        return young * eps, np.full_like(eps, young), np.zeros(eps.shape, dtype=bool)
    cracked = eps > 0.0
    sigma = np.where(cracked, 0.0, young * eps)
    tang = np.where(cracked, 0.0, young)
    return sigma, tang, cracked


# --------------------------------------------------------------------------
# plane stress restriction

_IN_PLANE = np.array([0, 1, 5])


@dataclass(frozen=True)
class PlaneStressResponse:
    """In-plane stress/tangent/fracture strain as 3-vectors (11, 22, 12).

    Shear slots carry the sqrt(2) factor like the 3D 6-vectors.
    """

    stress: np.ndarray
    tangent: np.ndarray
    fracture: np.ndarray
    e33: np.ndarray
    region: np.ndarray
    boundary: np.ndarray
    iterations: int


class PlaneStressConvergenceError(RuntimeError):
    pass


def embed_plane(Ein, e33) -> np.ndarray:
    Ein = np.asarray(Ein, dtype=float)
    E = np.zeros(Ein.shape[:-1] + (6,))
    E[..., 0] = Ein[..., 0]
    E[..., 1] = Ein[..., 1]
    E[..., 2] = e33
    E[..., 5] = Ein[..., 2]
    return E


def _plane_predictor(Ein, params: MaterialParams):
    """Smallest out-of-plane strain giving T33 = 0, from the 2D law."""
    e11, e22, g = Ein[..., 0], Ein[..., 1], Ein[..., 2] / SQRT2
    mean = 0.5 * (e11 + e22)
    rad = np.sqrt((0.5 * (e11 - e22)) ** 2 + g**2)
    p1 = mean - rad
    p2 = mean + rad
    nu = params.poisson
    elastic = -params.lam / (params.lam + 2.0 * params.mu) * (e11 + e22)
    return np.select([p1 >= 0.0, p2 + nu * p1 >= 0.0], [0.0, -nu * p1], default=elastic)


def _t33(Ein, e33, params):
    return stress(embed_plane(Ein, e33), params)[..., 2]


def _solve_e33(Ein, params: MaterialParams, max_iter=200):
    # the law is positively homogeneous, so solve on the unit-norm strain
    s = np.abs(Ein).max(axis=-1)
    s = np.where(s > 0.0, s, 1.0)
    e33, iterations = _solve_e33_unit(Ein / s[..., None], params, max_iter)
    return e33 * s, iterations


def _solve_e33_unit(Ein, params: MaterialParams, max_iter):
    e33 = _plane_predictor(Ein, params)
    scale = params.young * (ts.norm(embed_plane(Ein, 0.0)) + np.abs(e33)) + 1e-300
    tol = 1e-10 * scale
    g = _t33(Ein, e33, params)
    bad = np.abs(g) > tol
    iterations = 0
    if not np.any(bad):
        return e33, iterations
    # bisection for the minimal root of the nondecreasing, nonpositive T33
    Eb = Ein[bad]
    span = ts.norm(embed_plane(Eb, 0.0)) + 1e-300
    lo = -(10.0 * span)
    hi = np.maximum.reduce([np.zeros_like(span), np.abs(Eb).max(axis=-1), span])
    tol_b = tol[bad]
    for iterations in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        gm = _t33(Eb, mid, params)
        root = gm >= -tol_b
        hi = np.where(root, mid, hi)
        lo = np.where(root, lo, mid)
        if np.all(hi - lo <= 1e-15 * span):
            break
    else:
        raise PlaneStressConvergenceError("out-of-plane strain bisection did not converge")
    e33 = e33.copy()
    e33[bad] = hi
    return e33, iterations


def plane_stress_respond(Ein, params: MaterialParams) -> PlaneStressResponse:
    """Plane-stress response with the out-of-plane strain solved for T33 = 0.

    ``Ein`` holds in-plane strains as (..., 3) vectors (E11, E22, sqrt2*E12).
    The returned tangent is the Schur complement of the 3D tangent
    eliminating the 33 component.
    """
    Ein = np.asarray(Ein, dtype=float)
    if params.masonry:
        e33, iters = _solve_e33(Ein, params)
    else:
        e11, e22 = Ein[..., 0], Ein[..., 1]
        e33 = -params.lam / (params.lam + 2.0 * params.mu) * (e11 + e22)
        iters = 0
    E3 = embed_plane(Ein, e33)
    r = respond(E3, params)
    D = r.tangent
    Dpp = D[..., _IN_PLANE[:, None], _IN_PLANE[None, :]]
    Dp3 = D[..., _IN_PLANE, 2]
    D33 = D[..., 2, 2]
    safe = D33 > 1e-12 * params.young
    corr = np.einsum("...i,...j->...ij", Dp3, Dp3) / np.where(safe, D33, 1.0)[..., None, None]
    Dps = Dpp - np.where(safe[..., None, None], corr, 0.0)
    return PlaneStressResponse(
        stress=r.stress[..., _IN_PLANE],
        tangent=0.5 * (Dps + np.swapaxes(Dps, -1, -2)),
        fracture=r.fracture[..., _IN_PLANE],
        e33=e33,
        region=r.region,
        boundary=r.boundary,
        iterations=iters,
    )

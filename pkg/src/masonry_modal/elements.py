"""Element kernels, vectorised over groups of elements sharing material data.

Each group exposes ``dofs`` (n_e, nd) and works on element displacement
arrays of shape (n_e, nd).  Matrices are returned as (n_e, nd, nd) stacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constitutive as cm
from .constitutive import MaterialParams

SQRT2 = np.sqrt(2.0)


def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@dataclass
class GroupResponse:
    fint: np.ndarray
    tangent: np.ndarray
    records: dict


def _sym(K):
    return 0.5 * (K + np.swapaxes(K, -1, -2))


# --------------------------------------------------------------------------
# fiber beam


class BeamGroup:
    """Two-node plane frame elements with a layered fiber section.

    The transverse field is a cubic whose rotation carries the constant shear
    strain of the exact homogeneous Timoshenko solution (interdependent
    interpolation).  With shear switched off the element is the classical
    Hermite Euler-Bernoulli element.  Fibers follow the uniaxial
    no-tension law; shear is carried elastically by k*G*A.

    Local dof order is (u1, v1, th1, u2, v2, th2).
    """

    kind = "beam"
    nd = 6

    def __init__(self, positions, dofs, coords, section, params: MaterialParams):
        self.positions = np.asarray(positions, dtype=int)
        self.dofs = np.asarray(dofs, dtype=int)
        self.section = section
        self.params = params
        xy = np.asarray(coords, dtype=float)  # (n_e, 2, 2)
        d = xy[:, 1] - xy[:, 0]
        self.length = L = np.hypot(d[:, 0], d[:, 1])
        c, s = d[:, 0] / L, d[:, 1] / L
        n_e = len(L)

        T = np.zeros((n_e, 6, 6))
        for k in (0, 3):
            T[:, k, k] = c
            T[:, k, k + 1] = s
            T[:, k + 1, k] = -s
            T[:, k + 1, k + 1] = c
            T[:, k + 2, k + 2] = 1.0
        self.T = T

        self.y = section.fiber_offsets
        self.af = section.fiber_areas
        young = params.young
        self.EA = young * section.area
        self.EI = young * section.inertia
        if section.shear:
            self.kGA = section.shear_factor * params.mu * section.area
            self.g = self.EI / self.kGA
        else:
            self.kGA = 0.0
            self.g = 0.0

        # coefficients of v(x) = [1, x, x^2, x^3] . a, a = Ainv @ (v1, th1, v2, th2)
        g = self.g
        A = np.zeros((n_e, 4, 4))
        A[:, 0, 0] = 1.0
        A[:, 1, 1] = 1.0
        A[:, 1, 3] = 6.0 * g
        A[:, 2, :] = np.stack([np.ones(n_e), L, L**2, L**3], axis=-1)
        A[:, 3, :] = np.stack([np.zeros(n_e), np.ones(n_e), 2 * L, 3 * L**2 + 6 * g], axis=-1)
        self.Ainv = np.linalg.inv(A)

        xg, wg = gauss_legendre(section.gauss_points)
        self.xg = 0.5 * (xg + 1.0)[None, :] * L[:, None]  # (n_e, ng)
        self.wg = 0.5 * wg[None, :] * L[:, None]

        ng = len(xg)
        Ba = np.zeros((n_e, ng, 6))
        Ba[:, :, 0] = -1.0 / L[:, None]
        Ba[:, :, 3] = 1.0 / L[:, None]
        poly = np.stack([np.zeros_like(self.xg), np.zeros_like(self.xg), 2 * np.ones_like(self.xg), 6 * self.xg], axis=-1)
        bk = np.einsum("egp,epq->egq", poly, self.Ainv)
        Bk = np.zeros((n_e, ng, 6))
        Bk[:, :, [1, 2, 4, 5]] = bk
        Bs = np.zeros((n_e, 6))
        Bs[:, [1, 2, 4, 5]] = -6.0 * g * self.Ainv[:, 3, :]
        # to global dofs
        self.Ba = np.einsum("egi,eij->egj", Ba, T)
        self.Bk = np.einsum("egi,eij->egj", Bk, T)
        self.Bs = np.einsum("ei,eij->ej", Bs, T)

    @property
    def n(self):
        return len(self.length)

    def _local_shapes(self, xi, w):
        """Axial, transverse and rotation shape rows at points x = xi*L."""
        L = self.length
        x = xi[None, :] * L[:, None]
        n_e, npt = x.shape
        Nu = np.zeros((n_e, npt, 6))
        Nu[:, :, 0] = 1.0 - xi[None, :]
        Nu[:, :, 3] = xi[None, :]
        pv = np.stack([np.ones_like(x), x, x**2, x**3], axis=-1)
        pt = np.stack([np.zeros_like(x), np.ones_like(x), 2 * x, 3 * x**2 + 6 * self.g], axis=-1)
        Nv = np.zeros((n_e, npt, 6))
        Nt = np.zeros((n_e, npt, 6))
        Nv[:, :, [1, 2, 4, 5]] = np.einsum("epq,eqr->epr", pv, self.Ainv)
        Nt[:, :, [1, 2, 4, 5]] = np.einsum("epq,eqr->epr", pt, self.Ainv)
        wL = w[None, :] * L[:, None]
        return Nu, Nv, Nt, wL

    def mass(self):
        xi, w = gauss_legendre(5)
        xi = 0.5 * (xi + 1.0)
        w = 0.5 * w
        Nu, Nv, Nt, wL = self._local_shapes(xi, w)
        rhoA = self.params.rho * self.section.area
        Ml = rhoA * (np.einsum("ep,epi,epj->eij", wL, Nu, Nu) + np.einsum("ep,epi,epj->eij", wL, Nv, Nv))
        if self.section.rotary_inertia:
            Ml += self.params.rho * self.section.inertia * np.einsum("ep,epi,epj->eij", wL, Nt, Nt)
        return _sym(np.einsum("eki,ekl,elj->eij", self.T, Ml, self.T))

    def line_load(self, qx, qy):
        """Consistent nodal forces of a global uniform load (N/m), (n_e, 6)."""
        xi, w = gauss_legendre(4)
        xi = 0.5 * (xi + 1.0)
        w = 0.5 * w
        Nu, Nv, _, wL = self._local_shapes(xi, w)
        qx = np.broadcast_to(np.asarray(qx, dtype=float), (self.n,))
        qy = np.broadcast_to(np.asarray(qy, dtype=float), (self.n,))
        c, s = self.T[:, 0, 0], self.T[:, 0, 1]
        qu = c * qx + s * qy
        qv = -s * qx + c * qy
        fl = np.einsum("ep,epi->ei", wL, Nu) * qu[:, None] + np.einsum("ep,epi->ei", wL, Nv) * qv[:, None]
        return np.einsum("eki,ek->ei", self.T, fl)

    def self_weight(self, gravity):
        return self.line_load(0.0, -self.params.rho * self.section.area * gravity)

    def _section_matrix(self, Et):
        y, a = self.y, self.af
        EA = np.einsum("egf,f->eg", Et, a)
        ES = -np.einsum("egf,f->eg", Et, a * y)
        EI = np.einsum("egf,f->eg", Et, a * y * y)
        return EA, ES, EI

    def _stiffness_from(self, EA, ES, EI):
        Ba, Bk, w = self.Ba, self.Bk, self.wg
        K = (
            np.einsum("eg,egi,egj->eij", w * EA, Ba, Ba)
            + np.einsum("eg,egi,egj->eij", w * ES, Ba, Bk)
            + np.einsum("eg,egi,egj->eij", w * ES, Bk, Ba)
            + np.einsum("eg,egi,egj->eij", w * EI, Bk, Bk)
        )
        if self.kGA:
            K += (self.kGA * self.length)[:, None, None] * np.einsum("ei,ej->eij", self.Bs, self.Bs)
        return _sym(K)

    def stiffness(self):
        ones = np.full(self.Ba.shape[:2] + (len(self.y),), self.params.young)
        return self._stiffness_from(*self._section_matrix(ones))

    def generalized_strains(self, ue):
        e0 = np.einsum("egi,ei->eg", self.Ba, ue)
        kappa = np.einsum("egi,ei->eg", self.Bk, ue)
        gamma = np.einsum("ei,ei->e", self.Bs, ue)
        return e0, kappa, gamma

    def respond(self, ue) -> GroupResponse:
        e0, kappa, gamma = self.generalized_strains(ue)
        eps = e0[..., None] - self.y[None, None, :] * kappa[..., None]
        sig, Et, cracked = cm.uniaxial_respond(eps, self.params.young, self.params.masonry)
        N = np.einsum("egf,f->eg", sig, self.af)
        M = -np.einsum("egf,f->eg", sig, self.af * self.y)
        V = self.kGA * gamma
        fint = np.einsum("eg,egi->ei", self.wg * N, self.Ba) + np.einsum("eg,egi->ei", self.wg * M, self.Bk)
        if self.kGA:
            fint += (self.length * V)[:, None] * self.Bs
        K = self._stiffness_from(*self._section_matrix(Et))
        records = {
            "axial_strain": e0,
            "curvature": kappa,
            "shear_strain": gamma,
            "fiber_strain": eps,
            "fiber_stress": sig,
            "cracked": cracked,
            "axial_force": N,
            "moment": M,
            "shear_force": V,
            "x": self.xg,
        }
        return GroupResponse(fint, K, records)


# --------------------------------------------------------------------------
# plane-stress quad


class QuadGroup:
    """Bilinear 4-node plane-stress quads, 2x2 Gauss rule.

    Dofs per element: (ux1, uy1, ..., ux4, uy4).  Strains are Mandel
    3-vectors (e11, e22, sqrt2*e12).
    """

    kind = "quad"
    nd = 8

    def __init__(self, positions, dofs, coords, thickness, params: MaterialParams):
        self.positions = np.asarray(positions, dtype=int)
        self.dofs = np.asarray(dofs, dtype=int)
        self.params = params
        xy = np.asarray(coords, dtype=float)  # (n_e, 4, 2)
        self.thickness = t = np.asarray(thickness, dtype=float)
        g = 1.0 / np.sqrt(3.0)
        pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
        n_e = len(xy)
        N = np.zeros((4, 4))
        B = np.zeros((n_e, 4, 3, 8))
        dv = np.zeros((n_e, 4))
        for q, (xi, eta) in enumerate(pts):
            N[q] = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
            dN = 0.25 * np.array(
                [
                    [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                    [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
                ]
            )
            J = np.einsum("ak,ekb->eab", dN, xy)
            det = np.linalg.det(J)
            dNx = np.linalg.solve(J, np.broadcast_to(dN, (n_e, 2, 4)))
            B[:, q, 0, 0::2] = dNx[:, 0]
            B[:, q, 1, 1::2] = dNx[:, 1]
            B[:, q, 2, 0::2] = dNx[:, 1] / SQRT2
            B[:, q, 2, 1::2] = dNx[:, 0] / SQRT2
            dv[:, q] = det * t
        self.N = N
        self.B = B
        self.dv = dv
        self.centroid = xy.mean(axis=1)
        self.area = dv.sum(axis=1) / t

    @property
    def n(self):
        return len(self.dv)

    def elastic_matrix(self):
        E, nu = self.params.young, self.params.poisson
        f = E / (1.0 - nu * nu)
        return f * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 1.0 - nu]])

    def mass(self):
        Nm = np.zeros((4, 2, 8))
        Nm[:, 0, 0::2] = self.N
        Nm[:, 1, 1::2] = self.N
        M = self.params.rho * np.einsum("eq,qai,qaj->eij", self.dv, Nm, Nm)
        return _sym(M)

    def self_weight(self, gravity):
        f = np.zeros((self.n, 8))
        f[:, 1::2] = -self.params.rho * gravity * np.einsum("eq,qa->ea", self.dv, self.N)
        return f

    def stiffness(self):
        D = self.elastic_matrix()
        return _sym(np.einsum("eq,eqai,ab,eqbj->eij", self.dv, self.B, D, self.B))

    def strains(self, ue):
        return np.einsum("eqai,ei->eqa", self.B, ue)

    def respond(self, ue) -> GroupResponse:
        eps = self.strains(ue)
        r = cm.plane_stress_respond(eps, self.params)
        fint = np.einsum("eq,eqai,eqa->ei", self.dv, self.B, r.stress)
        K = _sym(np.einsum("eq,eqai,eqab,eqbj->eij", self.dv, self.B, r.tangent, self.B))
        records = {
            "strain": eps,
            "stress": r.stress,
            "fracture": r.fracture,
            "e33": r.e33,
            "region": r.region,
        }
        return GroupResponse(fint, K, records)


# --------------------------------------------------------------------------
# truss, spring, point mass


class TrussGroup:
    """Two-node axial bars with the uniaxial law; consistent mass."""

    kind = "truss"
    nd = 4

    def __init__(self, positions, dofs, coords, area, params: MaterialParams):
        self.positions = np.asarray(positions, dtype=int)
        self.dofs = np.asarray(dofs, dtype=int)
        self.params = params
        self.area = np.asarray(area, dtype=float)
        xy = np.asarray(coords, dtype=float)
        d = xy[:, 1] - xy[:, 0]
        self.length = L = np.hypot(d[:, 0], d[:, 1])
        c, s = d[:, 0] / L, d[:, 1] / L
        self.b = np.stack([-c, -s, c, s], axis=-1) / L[:, None]

    @property
    def n(self):
        return len(self.length)

    def mass(self):
        m = self.params.rho * self.area * self.length / 6.0
        M = np.zeros((self.n, 4, 4))
        for a in range(2):
            M[:, a, a] = M[:, a + 2, a + 2] = 2 * m
            M[:, a, a + 2] = M[:, a + 2, a] = m
        return M

    def self_weight(self, gravity):
        f = np.zeros((self.n, 4))
        w = 0.5 * self.params.rho * self.area * self.length * gravity
        f[:, 1] = f[:, 3] = -w
        return f

    def _k(self, Et):
        return (Et * self.area * self.length)[:, None, None] * np.einsum("ei,ej->eij", self.b, self.b)

    def stiffness(self):
        return self._k(np.full(self.n, self.params.young))

    def respond(self, ue) -> GroupResponse:
        eps = np.einsum("ei,ei->e", self.b, ue)
        sig, Et, cracked = cm.uniaxial_respond(eps, self.params.young, self.params.masonry)
        fint = (sig * self.area * self.length)[:, None] * self.b
        return GroupResponse(fint, self._k(Et), {"strain": eps, "stress": sig, "cracked": cracked})


class SpringGroup:
    """Linear springs: grounded (one node) or relative (two nodes) on one dof."""

    kind = "spring"

    def __init__(self, positions, dofs, stiffness):
        self.positions = np.asarray(positions, dtype=int)
        self.dofs = np.asarray(dofs, dtype=int)
        self.nd = self.dofs.shape[1]
        self.k = np.asarray(stiffness, dtype=float)
        pattern = np.array([[1.0]]) if self.nd == 1 else np.array([[1.0, -1.0], [-1.0, 1.0]])
        self._K = self.k[:, None, None] * pattern

    @property
    def n(self):
        return len(self.k)

    def mass(self):
        return np.zeros_like(self._K)

    def self_weight(self, gravity):
        return np.zeros((self.n, self.nd))

    def stiffness(self):
        return self._K

    def respond(self, ue) -> GroupResponse:
        return GroupResponse(np.einsum("eij,ej->ei", self._K, ue), self._K, {})


class PointMassGroup:
    kind = "point_mass"
    nd = 2

    def __init__(self, positions, dofs, mass):
        self.positions = np.asarray(positions, dtype=int)
        self.dofs = np.asarray(dofs, dtype=int)
        self.m = np.asarray(mass, dtype=float)

    @property
    def n(self):
        return len(self.m)

    def mass(self):
        return self.m[:, None, None] * np.eye(2)

    def self_weight(self, gravity):
        f = np.zeros((self.n, 2))
        f[:, 1] = -self.m * gravity
        return f

    def stiffness(self):
        return np.zeros((self.n, 2, 2))

    def respond(self, ue) -> GroupResponse:
        return GroupResponse(np.zeros_like(ue), self.stiffness(), {})

"""Global assembly, constraint elimination and load vectors."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .elements import BeamGroup, PointMassGroup, QuadGroup, SpringGroup, TrussGroup
from .model import LoadStep, Model, ModelError


class ConstraintError(ModelError):
    pass


# --------------------------------------------------------------------------
# element groups


def element_groups(model: Model) -> list:
    """Element kernels grouped by (kind, material, section), cached on the model."""
    groups = model._cache.get("groups")
    if groups is not None:
        return groups
    buckets = defaultdict(list)
    for pos, e in enumerate(model.elements):
        key = (e.kind, e.material, e.section, len(e.nodes), e.dof)
        buckets[key].append(pos)
    groups = []
    for key, positions in buckets.items():
        kind, mat, sec = key[0], key[1], key[2]
        els = [model.elements[p] for p in positions]
        if kind == "beam":
            dofs = [[model.node_dofs[n][d] for n in e.nodes for d in ("ux", "uy", "rz")] for e in els]
            coords = [model.coords[list(e.nodes)] for e in els]
            g = BeamGroup(positions, dofs, coords, model.sections[sec], model.materials[mat])
        elif kind == "quad":
            dofs = [[model.node_dofs[n][d] for n in e.nodes for d in ("ux", "uy")] for e in els]
            coords = [model.coords[list(e.nodes)] for e in els]
            g = QuadGroup(positions, dofs, coords, [e.thickness for e in els], model.materials[mat])
        elif kind == "truss":
            dofs = [[model.node_dofs[n][d] for n in e.nodes for d in ("ux", "uy")] for e in els]
            coords = [model.coords[list(e.nodes)] for e in els]
            g = TrussGroup(positions, dofs, coords, [e.area for e in els], model.materials[mat])
        elif kind == "spring":
            dofs = [[model.node_dofs[n][e.dof] for n in e.nodes] for e in els]
            g = SpringGroup(positions, dofs, [e.stiffness for e in els])
        elif kind == "point_mass":
            dofs = [[model.node_dofs[e.nodes[0]][d] for d in ("ux", "uy")] for e in els]
            g = PointMassGroup(positions, dofs, [e.mass for e in els])
        else:  # pragma: no cover - schema rejects it
            raise ModelError(f"unknown element type {kind!r}")
        groups.append(g)
    model._cache["groups"] = groups
    return groups


def scatter_matrix(dofs_and_mats, n: int) -> sp.csc_array:
    """Sum element matrices into a CSC matrix in a fixed order."""
    rows, cols, vals = [], [], []
    for dofs, mats in dofs_and_mats:
        nd = dofs.shape[1]
        rows.append(np.repeat(dofs, nd, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nd)).ravel())
        vals.append(mats.reshape(len(dofs), -1).ravel())
    if not rows:
        return sp.csc_array((n, n))
    A = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A = A.tocsc()
    A.sum_duplicates()
    A.sort_indices()
    return A


def scatter_vector(dofs_and_vecs, n: int) -> np.ndarray:
    f = np.zeros(n)
    for dofs, vecs in dofs_and_vecs:
        np.add.at(f, dofs.ravel(), vecs.ravel())
    return f


def assemble_mass(model: Model) -> sp.csc_array:
    M = model._cache.get("M")
    if M is None:
        M = scatter_matrix([(g.dofs, g.mass()) for g in element_groups(model)], model.ndof)
        model._cache["M"] = M
    return M


def element_elastic_matrices(model: Model) -> list:
    Ke = model._cache.get("Ke")
    if Ke is None:
        Ke = [g.stiffness() for g in element_groups(model)]
        model._cache["Ke"] = Ke
    return Ke


def assemble_elastic_stiffness(model: Model) -> sp.csc_array:
    K = model._cache.get("K")
    if K is None:
        groups = element_groups(model)
        K = scatter_matrix(list(zip([g.dofs for g in groups], element_elastic_matrices(model))), model.ndof)
        model._cache["K"] = K
    return K


# --------------------------------------------------------------------------
# equilibrium state


@dataclass
class EquilibriumState:
    """Converged (or last) configuration of one load level.

    ``records`` holds one dict of integration-point data per element group,
    ``Ke`` and ``Kt`` the per-group element stacks of elastic and tangent
    matrices.
    """

    model: Model = field(repr=False)
    u: np.ndarray
    f_ext: np.ndarray
    fint: np.ndarray
    residual_norm: float
    records: list = field(repr=False)
    Ke: list = field(repr=False)
    Kt: list = field(repr=False)
    load_factor: float = 1.0
    step: str = ""
    increment: int = 0
    iterations: int = 0
    converged: bool = True
    regularized: bool = False
    residual_history: tuple = ()

    @property
    def groups(self):
        return element_groups(self.model)


def evaluate(model: Model, u: np.ndarray):
    """Internal forces, element tangents and point records at ``u``."""
    groups = element_groups(model)
    fint_parts, Kt, records = [], [], []
    for g in groups:
        r = g.respond(u[g.dofs])
        fint_parts.append((g.dofs, r.fint))
        Kt.append(r.tangent)
        records.append(r.records)
    return scatter_vector(fint_parts, model.ndof), Kt, records


def internal_forces(model: Model, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (model.ndof,) or not np.all(np.isfinite(u)):
        raise ValueError("displacement vector must be finite with one entry per dof")
    return evaluate(model, u)[0]


def make_state(model: Model, u, f_ext, **kw) -> EquilibriumState:
    fint, Kt, records = evaluate(model, u)
    red = reduction(model)
    res = red.G.T @ (f_ext - fint)
    return EquilibriumState(
        model=model,
        u=np.asarray(u, dtype=float),
        f_ext=np.asarray(f_ext, dtype=float),
        fint=fint,
        residual_norm=float(np.linalg.norm(res)),
        records=records,
        Ke=element_elastic_matrices(model),
        Kt=Kt,
        **kw,
    )


def assemble_tangent_stiffness(model: Model, state: EquilibriumState) -> sp.csc_array:
    groups = element_groups(model)
    return scatter_matrix(list(zip([g.dofs for g in groups], state.Kt)), model.ndof)


def element_stiffness_distance(state: EquilibriumState) -> np.ndarray:
    """Frobenius distance between tangent and elastic element matrices, in element order."""
    d = np.zeros(len(state.model.elements))
    for g, Ke, Kt in zip(state.groups, state.Ke, state.Kt):
        d[g.positions] = np.sqrt(np.sum((Kt - Ke) ** 2, axis=(1, 2)))
    return d


# --------------------------------------------------------------------------
# loads


def step_load(model: Model, step: LoadStep) -> np.ndarray:
    """Total external force vector of one load step."""
    f = np.zeros(model.ndof)
    for dof, value in step.nodal:
        f[dof] += value
    groups = element_groups(model)
    if step.self_weight:
        f += scatter_vector([(g.dofs, g.self_weight(model.gravity)) for g in groups], model.ndof)
    for positions, qx, qy in step.distributed:
        sel = set(positions)
        for g in groups:
            if g.kind != "beam":
                continue
            mask = np.array([p in sel for p in g.positions])
            if mask.any():
                fe = g.line_load(qx, qy)
                f += scatter_vector([(g.dofs[mask], fe[mask])], model.ndof)
    return f


def step_prescribed(model: Model, step: LoadStep) -> np.ndarray:
    u = np.zeros(model.ndof)
    for dof, value in step.prescribed:
        u[dof] += value
    return u


def stored_energy(state: EquilibriumState) -> float:
    """Elastic energy 1/2 * integral of T . (E - Ef); equals 1/2 T . E for this law."""
    W = 0.0
    for g, rec in zip(state.groups, state.records):
        if g.kind == "beam":
            fib = 0.5 * np.einsum("egf,egf,f,eg->", rec["fiber_stress"], rec["fiber_strain"], g.af, g.wg)
            W += fib + 0.5 * float(np.sum(g.kGA * g.length * rec["shear_strain"] ** 2))
        elif g.kind == "quad":
            W += 0.5 * np.einsum("eq,eqa,eqa->", g.dv, rec["stress"], rec["strain"])
        elif g.kind == "truss":
            W += 0.5 * float(np.sum(rec["stress"] * rec["strain"] * g.area * g.length))
        elif g.kind == "spring":
            ue = state.u[g.dofs]
            W += 0.5 * float(np.einsum("ei,eij,ej->", ue, g.stiffness(), ue))
    return float(W)


def self_weight_vector(model: Model) -> np.ndarray:
    return step_load(model, LoadStep("self_weight", 1, True))


def total_mass(model: Model, direction: str = "x") -> float:
    r = model.direction_vector(direction)
    return float(r @ (assemble_mass(model) @ r))


# --------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class Reduction:
    """u = G @ q with q the independent dofs; T @ u = 0 are the constraint rows."""

    G: sp.csc_array
    T: sp.csr_array
    free: np.ndarray

    @property
    def n_free(self) -> int:
        return self.G.shape[1]


def reduction(model: Model) -> Reduction:
    red = model._cache.get("reduction")
    if red is None:
        red = build_reduction(model.ndof, model.constraints.fixed, model.constraints.ties)
        model._cache["reduction"] = red
    return red


def build_reduction(n: int, fixed, ties) -> Reduction:
    fixed = set(int(i) for i in fixed)
    slaves = {}
    for t in ties:
        s = int(t.slave)
        if s in fixed:
            raise ConstraintError(f"dof {s} is both fixed and a slave")
        if s in slaves:
            raise ConstraintError(f"dependent constraint rows: dof {s} is slave of two ties")
        slaves[s] = tuple((int(m), float(c)) for m, c in t.masters)
    for s, masters in slaves.items():
        if any(m == s for m, _ in masters):
            raise ConstraintError(f"dependent constraint rows: dof {s} ties to itself")

    free = np.array([i for i in range(n) if i not in fixed and i not in slaves], dtype=int)
    if len(free) == 0:
        raise ConstraintError("no free dofs")
    col = {int(d): k for k, d in enumerate(free)}

    resolved = {}

    def expand(dof, stack):
        if dof in fixed:
            return {}
        if dof in col:
            return {col[dof]: 1.0}
        if dof in resolved:
            return resolved[dof]
        if dof in stack:
            raise ConstraintError(f"dependent constraint rows: cyclic ties through dof {dof}")
        out = defaultdict(float)
        for m, c in slaves[dof]:
            for j, v in expand(m, stack | {dof}).items():
                out[j] += c * v
        resolved[dof] = dict(out)
        return resolved[dof]

    rows, cols, vals = [], [], []
    for i in range(n):
        for j, v in sorted(expand(i, frozenset()).items()):
            rows.append(i)
            cols.append(j)
            vals.append(v)
    G = sp.csc_array((vals, (rows, cols)), shape=(n, len(free)))

    trows, tcols, tvals = [], [], []
    r = 0
    for i in sorted(fixed):
        trows.append(r)
        tcols.append(i)
        tvals.append(1.0)
        r += 1
    for s in sorted(slaves):
        trows.append(r)
        tcols.append(s)
        tvals.append(1.0)
        for m, c in slaves[s]:
            trows.append(r)
            tcols.append(m)
            tvals.append(-c)
        r += 1
    T = sp.csr_array((tvals, (trows, tcols)), shape=(r, n))
    return Reduction(G=G, T=T, free=free)


def reduce_system(K, M, red: Reduction):
    """Constraint-reduced symmetric pair (G^T K G, G^T M G)."""
    G = red.G
    Kr = (G.T @ K @ G).tocsc()
    Mr = (G.T @ M @ G).tocsc()
    Kr = 0.5 * (Kr + Kr.T)
    Mr = 0.5 * (Mr + Mr.T)
    return Kr.tocsc(), Mr.tocsc()


def export_matrix_market(path, A, comment: str = "") -> Path:
    path = Path(path)
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, symmetry="general")
    return path

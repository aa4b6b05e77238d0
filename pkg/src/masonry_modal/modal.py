"""Constrained generalized eigen-solution and modal diagnostics.

The pair (K, M) is reduced to the independent dofs, u = G q, and solved
there; shapes are expanded back to all dofs so that T phi = 0 holds by
construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly as asm
from .assembly import EquilibriumState, Reduction
from .model import LoadCase, Model, ModelError
from .solver import SolverSettings, solve_equilibrium

DENSE_LIMIT = 200
NEAR_ZERO = 1e-10


class EigenError(RuntimeError):
    pass


@dataclass
class ModalResult:
    eigenvalues: np.ndarray
    shapes: np.ndarray  # (ndof, n_modes), mass normalised
    reduced_shapes: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    near_zero: np.ndarray = field(repr=False)
    effective_mass: dict = field(default_factory=dict)
    method: str = "dense"

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(np.clip(self.eigenvalues, 0.0, None))

    @property
    def frequencies(self) -> np.ndarray:
        return self.omega / (2.0 * np.pi)


def _sign_convention(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def _dense(Kr, Mr, k):
    A = Kr.toarray() if sp.issparse(Kr) else np.asarray(Kr)
    B = Mr.toarray() if sp.issparse(Mr) else np.asarray(Mr)
    return sla.eigh(A, B, subset_by_index=[0, k - 1])


def _dense_two_sided(Kr, Mr, k):
    """Many modes: take each pair from the direct or the inverted problem.

    The direct solve is accurate for the high modes, the inverted one
    (M v = mu (K - sM) v) for the low ones; keep whichever has the smaller
    residual.
    """
    A = Kr.toarray() if sp.issparse(Kr) else np.asarray(Kr)
    B = Mr.toarray() if sp.issparse(Mr) else np.asarray(Mr)
    n = A.shape[0]
    w1, V1 = sla.eigh(A, B)
    s = _default_shift(Kr, Mr)
    mu, V2 = sla.eigh(B, A - s * B)
    w2 = s + 1.0 / mu[::-1]
    V2 = V2[:, ::-1]
    V2 = V2 / np.sqrt(np.einsum("ij,ij->j", V2, B @ V2))

    def res(w, V):
        KV = A @ V
        return np.linalg.norm(KV - (B @ V) * w, axis=0) / np.maximum(np.linalg.norm(KV, axis=0), 1e-300)

    pick = res(w2, V2) < res(w1, V1)
    w = np.where(pick, w2, w1)
    V = np.where(pick[None, :], V2, V1)
    order = np.argsort(w, kind="stable")[:k]
    return w[order], V[:, order]


def _rayleigh_ritz(Kr, Mr, V):
    """Re-solve on span(V); restores M-orthonormality to round-off."""
    KV = Kr @ V
    MV = Mr @ V
    A = V.T @ KV
    B = V.T @ MV
    w, Y = sla.eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
    return w, V @ Y


def _lanczos(Kr, Mr, k, shift):
    n = Kr.shape[0]
    if shift is None:
        shift = _default_shift(Kr, Mr)
    extra = max(8, k)
    while True:
        ncv_k = min(k + extra, n - 2)
        try:
            w, V = spla.eigsh(Kr, k=ncv_k, M=Mr, sigma=shift, which="LM", tol=0.0)
        except RuntimeError as exc:
            if "singular" in str(exc).lower() or "factor" in str(exc).lower():
                scale = float(np.abs(Kr.diagonal()).max() / max(np.abs(Mr.diagonal()).max(), 1e-300))
                shift = shift - 1e-8 * scale
                continue
            raise EigenError(f"Lanczos iteration failed: {exc}") from exc
        dist = np.max(np.abs(w - shift))
        # everything below the shift has to be inside the converged window
        if shift - dist <= min(0.0, w.min()) or ncv_k >= n - 2:
            break
        extra *= 2
    order = np.argsort(w)
    V = V[:, order[:k]]
    return _rayleigh_ritz(Kr, Mr, V)


def _default_shift(Kr, Mr):
    d = np.abs(Kr.diagonal() / np.maximum(Mr.diagonal(), 1e-300))
    if not d.size:
        return 0.0
    # a fully cracked state can leave K = 0; the shift must still be negative
    scale = float(np.median(d)) or float(d.max()) or 1.0
    return -1e-6 * scale


def _refine(Kr, Mr, V, sweeps=2):
    """Subspace inverse iteration + Rayleigh-Ritz on (K - s M)^-1 M, s < 0.

    Dense LAPACK residuals are relative to the largest eigenvalue; a couple
    of sweeps bring the low modes to full relative accuracy.
    """
    s = _default_shift(Kr, Mr)
    try:
        lu = spla.splu(sp.csc_array(Kr - s * Mr))
    except RuntimeError:
        return None
    W = V
    for _ in range(sweeps):
        W = lu.solve(np.asarray(Mr @ W))
        if not np.all(np.isfinite(W)):
            return None
        W, _ = np.linalg.qr(W)
    return _rayleigh_ritz(Kr, Mr, W)


def solve_reduced(Kr, Mr, n_modes, method="auto", shift=None):
    n = Kr.shape[0]
    if n_modes < 1:
        raise EigenError("n_modes must be >= 1")
    if n_modes > n:
        raise EigenError(f"n_modes={n_modes} exceeds the {n} free dofs")
    if method == "auto":
        method = "dense" if n < DENSE_LIMIT or n_modes > n - 3 else "lanczos"
    if method == "lanczos" and n_modes > n - 3:
        method = "dense"
    if method == "dense":
        w, V = _dense(Kr, Mr, n_modes)
    elif method == "lanczos":
        w, V = _lanczos(sp.csc_array(Kr), sp.csc_array(Mr), n_modes, shift)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    if method == "dense" and 2 * n_modes > n:
        w, V = _dense_two_sided(Kr, Mr, n_modes)
        return w, V, method
    refined = _refine(sp.csc_array(Kr), sp.csc_array(Mr), V)
    if refined is not None:
        w, V = refined
    return w, V, method


def solve_eigen(K, M, red: Reduction, n_modes: int, method: str = "auto", shift=None) -> ModalResult:
    """Lowest ``n_modes`` eigenpairs of K phi = omega^2 M phi with phi = G q."""
    Kr, Mr = asm.reduce_system(K, M, red)
    w, V, used = solve_reduced(Kr, Mr, n_modes, method, shift)
    Phi = _sign_convention(red.G @ V)
    V = np.asarray(Phi[red.free])
    scale = max(float(np.abs(Kr.diagonal()).max()), 1e-300) / max(float(np.abs(Mr.diagonal()).max()), 1e-300)
    near_zero = w <= NEAR_ZERO * scale
    KV = Kr @ V
    R = KV - (Mr @ V) * w
    knorm = np.linalg.norm(KV, axis=0)
    # zero-energy modes: measure against the stiffness scale instead
    kref = spla.norm(Kr, 1) * np.linalg.norm(V, axis=0)
    denom = np.where(near_zero | (knorm <= 1e-12 * kref), kref, knorm)
    residuals = np.linalg.norm(R, axis=0) / np.maximum(denom, 1e-300)
    return ModalResult(
        eigenvalues=w,
        shapes=Phi,
        reduced_shapes=V,
        residuals=residuals,
        near_zero=near_zero,
        method=used,
    )


# --------------------------------------------------------------------------
# diagnostics


def mac_m(phi_a, phi_b, M) -> float:
    a = np.asarray(phi_a, dtype=float)
    b = np.asarray(phi_b, dtype=float)
    Ma, Mb = M @ a, M @ b
    na, nb = float(a @ Ma), float(b @ Mb)
    if na <= 0.0 or nb <= 0.0:
        raise ValueError("mac_m needs nonzero vectors")
    return float(min(abs(a @ Mb) / np.sqrt(na * nb), 1.0))


def mac_matrix(A, B, M) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    MA, MB = M @ A, M @ B
    na = np.sqrt(np.einsum("ij,ij->j", A, MA))
    nb = np.sqrt(np.einsum("ij,ij->j", B, MB))
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("mac_m needs nonzero vectors")
    return np.clip(np.abs(A.T @ MB) / np.outer(na, nb), 0.0, 1.0)


@dataclass
class ModeTracking:
    mac: np.ndarray
    permutation: np.ndarray  # permutation[i] = damaged mode matched to linear mode i


def mode_tracking(linear: ModalResult, damaged: ModalResult, M) -> ModeTracking:
    mac = mac_matrix(linear.shapes, damaged.shapes, M)
    n = min(mac.shape)
    perm = -np.ones(mac.shape[0], dtype=int)
    work = mac.copy()
    for _ in range(n):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = j
        work[i, :] = -1.0
        work[:, j] = -1.0
    return ModeTracking(mac=mac, permutation=perm)


def participating_mass(model: Model, direction: str) -> float:
    """Mass the constrained structure can mobilise in a rigid translation."""
    M = asm.assemble_mass(model)
    red = asm.reduction(model)
    r = model.direction_vector(direction)
    _, Mr = asm.reduce_system(M, M, red)
    b = red.G.T @ (M @ r)
    return float(b @ spla.spsolve(Mr.tocsc(), b))


def effective_modal_mass(result: ModalResult, model: Model, direction: str, reference: str = "participating") -> np.ndarray:
    """Effective modal masses in percent.

    Gamma_i = phi_i . M r with r the rigid translation.  ``reference`` picks
    the 100 % level: "participating" uses the M-projection of r onto the
    admissible displacements, so the complete modal basis sums to 100 %;
    "total" uses r . M r (all mass, including mass sitting on supports).
    """
    if direction not in ("x", "y"):
        raise ModelError(f"direction must be 'x' or 'y', got {direction!r}")
    M = asm.assemble_mass(model)
    r = model.direction_vector(direction)
    gamma = result.shapes.T @ (M @ r)
    if reference == "participating":
        ref = participating_mass(model, direction)
    elif reference == "total":
        ref = float(r @ (M @ r))
    else:
        raise ValueError(f"unknown reference {reference!r}")
    if ref <= 0.0:
        # nothing can move in this direction
        return np.zeros_like(gamma)
    return 100.0 * gamma**2 / ref


def attach_effective_masses(result: ModalResult, model: Model) -> ModalResult:
    result.effective_mass = {d: effective_modal_mass(result, model, d) for d in ("x", "y")}
    return result


def modal_analysis(model: Model, n_modes: int, method: str = "auto", state: EquilibriumState | None = None, shift=None) -> ModalResult:
    """Linear (state None) or tangent modal analysis of ``model``."""
    K = asm.assemble_elastic_stiffness(model) if state is None else asm.assemble_tangent_stiffness(model, state)
    res = solve_eigen(K, asm.assemble_mass(model), asm.reduction(model), n_modes, method, shift)
    return attach_effective_masses(res, model)


@dataclass
class PrestressedResult:
    linear: ModalResult
    damaged: ModalResult
    state: EquilibriumState
    increments: list  # [(state, ModalResult)] for every increment

    def __iter__(self):
        return iter((self.linear, self.damaged, self.state))


def prestressed_modal(
    model: Model,
    load_case: LoadCase,
    settings: SolverSettings | None = None,
    n_modes: int = 6,
    method: str = "auto",
    log_stream=None,
) -> PrestressedResult:
    """Linear modes, equilibrium under the load case, tangent modes at each increment."""
    linear = modal_analysis(model, n_modes, method)
    states = solve_equilibrium(model, load_case, settings, log_stream=log_stream)
    incs = [(st, modal_analysis(model, n_modes, method, st)) for st in states]
    return PrestressedResult(linear=linear, damaged=incs[-1][1], state=states[-1], increments=incs)


# --------------------------------------------------------------------------
# beam sections


@dataclass
class CrackedProfile:
    x: np.ndarray  # section positions along the global x axis
    y: np.ndarray
    ratio: np.ndarray
    element: np.ndarray


def cracked_area_profile(state: EquilibriumState) -> CrackedProfile:
    """Cracked fiber area over section area at every beam integration section."""
    xs, ys, rs, es = [], [], [], []
    model = state.model
    for g, rec in zip(state.groups, state.records):
        if g.kind != "beam":
            continue
        ratio = np.einsum("egf,f->eg", rec["cracked"].astype(float), g.af) / g.af.sum()
        n0 = np.array([model.elements[p].nodes[0] for p in g.positions])
        c, s = g.T[:, 0, 0], g.T[:, 0, 1]
        xs.append(model.coords[n0, 0][:, None] + c[:, None] * g.xg)
        ys.append(model.coords[n0, 1][:, None] + s[:, None] * g.xg)
        rs.append(ratio)
        es.append(np.repeat(np.array([model.elements[p].id for p in g.positions])[:, None], g.xg.shape[1], axis=1))
    if not rs:
        raise ModelError("cracked area profile needs beam elements")
    x = np.concatenate([a.ravel() for a in xs])
    y = np.concatenate([a.ravel() for a in ys])
    r = np.concatenate([a.ravel() for a in rs])
    e = np.concatenate([a.ravel() for a in es])
    order = np.lexsort((y, x))
    return CrackedProfile(x=x[order], y=y[order], ratio=r[order], element=e[order])


# --------------------------------------------------------------------------
# export


def fmt_freq(f: float) -> str:
    return f"{f:.6g}"


def write_modal_csv(result: ModalResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "frequency_hz", "omega_rad_s", "eff_mass_x_pct", "eff_mass_y_pct", "residual", "near_zero"])
        for i in range(result.n_modes):
            w.writerow(
                [
                    i + 1,
                    fmt_freq(result.frequencies[i]),
                    f"{result.omega[i]:.6g}",
                    f"{result.effective_mass.get('x', np.full(result.n_modes, np.nan))[i]:.4f}",
                    f"{result.effective_mass.get('y', np.full(result.n_modes, np.nan))[i]:.4f}",
                    f"{result.residuals[i]:.2e}",
                    int(result.near_zero[i]),
                ]
            )
    return path


def write_mode_shapes(result: ModalResult, model: Model, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "node", "x", "y", "ux", "uy", "rz"])
        for i in range(result.n_modes):
            phi = result.shapes[:, i]
            for k, nid in enumerate(model.node_ids):
                d = model.node_dofs[k]
                rz = f"{phi[d['rz']]:.8e}" if "rz" in d else ""
                w.writerow(
                    [i + 1, int(nid), f"{model.coords[k, 0]:.6g}", f"{model.coords[k, 1]:.6g}", f"{phi[d['ux']]:.8e}", f"{phi[d['uy']]:.8e}", rz]
                )
    return path


def write_matrix_csv(matrix, path, row_prefix="lin", col_prefix="dam") -> Path:
    path = Path(path)
    matrix = np.asarray(matrix)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + [f"{col_prefix}{j + 1}" for j in range(matrix.shape[1])])
        for i, row in enumerate(matrix):
            w.writerow([f"{row_prefix}{i + 1}"] + [f"{v:.4f}" for v in row])
    return path

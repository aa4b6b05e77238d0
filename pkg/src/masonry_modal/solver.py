"""Incremental Newton-Raphson solution of the nonlinear equilibrium problem.

Load steps are additive: each step adds its loads (and prescribed
displacements) on top of everything applied by the previous steps, ramped
linearly over the step's increments.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly as asm
from .assembly import EquilibriumState
from .model import LoadCase, Model

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=np.nan, step="", increment=0, iteration=0):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.increment = increment
        self.iteration = iteration


class SingularTangentError(ConvergenceError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    rtol: float = 1e-8
    atol: float = 1.0
    max_iterations: int = 50
    increments: int | None = None  # overrides the step increment counts
    line_search: bool = True
    max_halvings: int = 8
    max_cuts: int = 8
    homotopy: bool = True  # tensile-stiffness continuation when plain Newton stalls

    def __post_init__(self):
        if not self.rtol > 0 or not self.atol >= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.increments is not None and self.increments < 1:
            raise ValueError("increments must be >= 1")


class SolverLog:
    """Line-oriented JSON records, one per accepted or failed increment."""

    def __init__(self, stream=None):
        self.stream = stream
        self.records = []

    def write(self, **rec):
        self.records.append(rec)
        if self.stream is not None:
            self.stream.write(json.dumps(rec, sort_keys=True) + "\n")


def _factorize(A):
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        return None
    # splu may succeed on an exactly singular pivot and return inf/nan
    if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0.0):
        return None
    return lu


def _solve_linear(Kr, R):
    lu = _factorize(Kr)
    regularized = False
    if lu is None:
        d = np.abs(Kr.diagonal())
        eps = 1e-12 * (d.max() if d.size else 1.0)
        lu = _factorize(Kr + eps * sp.identity(Kr.shape[0], format="csc"))
        regularized = True
        if lu is None:
            return None, True
    dq = lu.solve(R)
    if not np.all(np.isfinite(dq)):
        return None, regularized
    return dq, regularized


def _reduced_residual(model, red, u, f_ext, eps=0.0, K0=None):
    """Residual of the law softened by a fraction ``eps`` of elastic stiffness.

    ``eps = 0`` is the true residual.  Also returns the true residual.
    """
    fint, Kt, records = asm.evaluate(model, u)
    R0 = red.G.T @ (f_ext - fint)
    if eps == 0.0:
        return R0, R0, fint, Kt, records
    R = R0 - eps * (red.G.T @ (K0 @ u - fint))
    return R, R0, fint, Kt, records


def _iteration_matrix(model, red, Kt, eps=0.0, K0=None):
    Kfull = asm.scatter_matrix(list(zip([g.dofs for g in asm.element_groups(model)], Kt)), model.ndof)
    if eps:
        Kfull = (1.0 - eps) * Kfull + eps * K0
    return (red.G.T @ Kfull @ red.G).tocsc()


def _tolerance(red, f_ext, settings):
    return max(settings.rtol * np.linalg.norm(red.G.T @ f_ext), settings.atol)


def _newton(model, red, u0, f_ext, u_presc, settings, where, eps=0.0, K0=None, max_iterations=None):
    """Newton iterations for one load level; returns (u, info) or raises.

    With ``eps > 0`` the iterations drive the softened residual below the
    tolerance but stop early as soon as the true residual gets there.
    """
    G = red.G
    max_iterations = max_iterations or settings.max_iterations
    u = G @ u0[red.free] + _constrained_part(red, u_presc)
    R, R0, fint, Kt, records = _reduced_residual(model, red, u, f_ext, eps, K0)
    tol = _tolerance(red, f_ext, settings)
    history = [float(np.linalg.norm(R0))]
    current = float(np.linalg.norm(R))
    regularized = False

    def done(it):
        return u, dict(iterations=it, history=history, regularized=regularized, Kt=Kt, records=records, fint=fint)

    for it in range(1, max_iterations + 1):
        if history[-1] <= tol:
            return done(it - 1)
        if current <= tol:
            break
        dq, reg = _solve_linear(_iteration_matrix(model, red, Kt, eps, K0), R)
        regularized |= reg
        if dq is None:
            raise SingularTangentError(f"singular tangent at {where}, iteration {it}", history[-1], *where, it)
        du = G @ dq
        step = 1.0
        for _ in range(settings.max_halvings + 1 if settings.line_search else 1):
            trial = u + step * du
            R_t, R0_t, f_t, Kt_t, rec_t = _reduced_residual(model, red, trial, f_ext, eps, K0)
            n_t = float(np.linalg.norm(R_t))
            if not settings.line_search or n_t <= current:
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                f"line search stalled at {where}, iteration {it} (residual {history[-1]:.3e}, tol {tol:.3e})",
                history[-1],
                *where,
                it,
            )
        u, R, fint, Kt, records, current = trial, R_t, f_t, Kt_t, rec_t, n_t
        history.append(float(np.linalg.norm(R0_t)))
    if history[-1] <= tol or (eps and current <= tol):
        return done(len(history) - 1)
    raise ConvergenceError(
        f"no convergence at {where} after {len(history) - 1} iterations (residual {history[-1]:.3e}, tol {tol:.3e})",
        history[-1],
        *where,
        len(history) - 1,
    )


# softening fractions for the continuation, ending with the true law
HOMOTOPY_EPS = tuple(10.0 ** -k for k in range(1, 13)) + (0.0,)


def _homotopy(model, red, u0, f_ext, u_presc, settings, where):
    """Tensile-stiffness continuation for states where plain Newton stalls.

    Regions that crack freely make the tangent singular and the displacement
    field non-unique, so Newton can wander.  Adding ``eps`` times the elastic
    response to the material makes each problem strongly convex; ``eps`` is
    driven to zero and each solve warm-starts the next.
    """
    K0 = asm.assemble_elastic_stiffness(model)
    u = u0
    history = []
    iterations = 0
    regularized = False
    info = None
    for eps in HOMOTOPY_EPS:
        try:
            u, info = _newton(model, red, u, f_ext, u_presc, settings, where, eps, K0)
        except ConvergenceError:
            if eps == 0.0:
                raise
            continue
        history += info["history"]
        iterations += info["iterations"]
        regularized |= info["regularized"]
        if info["history"][-1] <= _tolerance(red, f_ext, settings):
            info.update(history=history, iterations=iterations, regularized=regularized, homotopy=eps)
            return u, info
    raise ConvergenceError(f"continuation failed at {where}", history[-1] if history else np.nan, *where, iterations)


def _constrained_part(red, u_presc):
    out = np.zeros_like(u_presc)
    fixed_mask = np.ones(len(u_presc), dtype=bool)
    fixed_mask[red.free] = False
    out[fixed_mask] = u_presc[fixed_mask]
    return out


def solve_equilibrium(model: Model, load_case: LoadCase, settings: SolverSettings | None = None, log_stream=None, u0=None):
    """States at the end of every increment of every step."""
    settings = settings or SolverSettings()
    load_case = load_case.staged(settings.increments)
    red = asm.reduction(model)
    slog = SolverLog(log_stream)
    u = np.zeros(model.ndof) if u0 is None else np.asarray(u0, dtype=float).copy()
    f_acc = np.zeros(model.ndof)
    p_acc = np.zeros(model.ndof)
    states = []
    n_total = sum(s.increments for s in load_case.steps)
    done = 0
    for j, step in enumerate(load_case.steps):
        f_step = asm.step_load(model, step)
        p_step = asm.step_prescribed(model, step)
        n = step.increments
        for k in range(1, n + 1):
            f_ext = f_acc + (k / n) * f_step
            u_p = p_acc + (k / n) * p_step
            f_prev = f_acc + ((k - 1) / n) * f_step
            p_prev = p_acc + ((k - 1) / n) * p_step
            u, info = _solve_with_cuts(model, red, u, f_prev, p_prev, f_ext, u_p, settings, (step.name, k), slog)
            done += 1
            st = EquilibriumState(
                model=model,
                u=u,
                f_ext=f_ext,
                fint=info["fint"],
                residual_norm=info["history"][-1],
                records=info["records"],
                Ke=asm.element_elastic_matrices(model),
                Kt=info["Kt"],
                load_factor=done / n_total,
                step=step.name,
                increment=k,
                iterations=info["iterations"],
                converged=True,
                regularized=info["regularized"],
                residual_history=tuple(info["history"]),
            )
            states.append(st)
        f_acc = f_acc + f_step
        p_acc = p_acc + p_step
    return states


def _solve_level(model, red, u, f1, p1, settings, where):
    try:
        return _newton(model, red, u, f1, p1, settings, where)
    except ConvergenceError:
        if not settings.homotopy:
            raise
    return _homotopy(model, red, u, f1, p1, settings, where)


def _solve_with_cuts(model, red, u, f0, p0, f1, p1, settings, where, slog, depth=0):
    try:
        u_new, info = _solve_level(model, red, u, f1, p1, settings, where)
    except ConvergenceError as exc:
        slog.write(event="failed", step=where[0], increment=where[1], depth=depth, residual=exc.residual, message=str(exc))
        if depth >= settings.max_cuts:
            raise
        fm, pm = 0.5 * (f0 + f1), 0.5 * (p0 + p1)
        u_mid, _ = _solve_with_cuts(model, red, u, f0, p0, fm, pm, settings, where, slog, depth + 1)
        return _solve_with_cuts(model, red, u_mid, fm, pm, f1, p1, settings, where, slog, depth + 1)
    slog.write(
        event="converged",
        step=where[0],
        increment=where[1],
        depth=depth,
        iterations=info["iterations"],
        residuals=info["history"],
        regularized=info["regularized"],
        homotopy=info.get("homotopy"),
    )
    return u_new, info


def continue_from(state: EquilibriumState, f_ext, settings: SolverSettings | None = None, u_prescribed=None) -> EquilibriumState:
    """Solve for a new total external load starting from a converged state."""
    settings = settings or SolverSettings()
    model = state.model
    red = asm.reduction(model)
    f_ext = np.asarray(f_ext, dtype=float)
    u_p = np.zeros(model.ndof) if u_prescribed is None else np.asarray(u_prescribed, dtype=float)
    fixed = np.asarray(model.constraints.fixed, dtype=int)
    p0 = np.zeros(model.ndof)
    p0[fixed] = state.u[fixed]
    u, info = _solve_with_cuts(model, red, state.u, state.f_ext, p0, f_ext, u_p, settings, ("continue", 1), SolverLog())
    return EquilibriumState(
        model=model,
        u=u,
        f_ext=f_ext,
        fint=info["fint"],
        residual_norm=info["history"][-1],
        records=info["records"],
        Ke=asm.element_elastic_matrices(model),
        Kt=info["Kt"],
        step="continue",
        increment=1,
        iterations=info["iterations"],
        regularized=info["regularized"],
        residual_history=tuple(info["history"]),
    )


def final_state(model: Model, load_case: LoadCase, settings: SolverSettings | None = None) -> EquilibriumState:
    return solve_equilibrium(model, load_case, settings)[-1]

"""Grid-search model updating of Young's modulus and density.

The objective is the sum of squared differences between the first
``len(targets)`` computed frequencies and the targets, evaluated either on
the elastic stiffness ("linear") or on the tangent stiffness at the
self-weight equilibrium ("damaged").
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .modal import EigenError, modal_analysis
from .model import Model, ModelError
from .solver import ConvergenceError, SolverSettings, solve_equilibrium

MODES = ("linear", "damaged")


@dataclass(frozen=True)
class GridRange:
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be > 0")
        if self.max < self.min:
            raise ValueError("grid range is empty")

    @property
    def values(self) -> np.ndarray:
        n = int(np.floor((self.max - self.min) / self.step + 1e-9)) + 1
        return self.min + self.step * np.arange(n)


@dataclass(frozen=True)
class UpdateSpec:
    targets: tuple
    young: GridRange = GridRange(3.0e9, 7.0e9, 0.5e9)
    density: GridRange = GridRange(1800.0, 2200.0, 100.0)
    mode: str = "linear"
    material: str = "masonry"
    load_case: str = "self_weight"
    method: str = "auto"

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=float)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("at least one target frequency is required")
        if np.any(t <= 0) or np.any(np.diff(t) < 0):
            raise ValueError("target frequencies must be positive and ascending")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_dict(cls, d: dict, mode: str | None = None) -> "UpdateSpec":
        kw = dict(targets=tuple(d["targets"]), mode=mode or d.get("mode", "linear"))
        for key in ("young", "density"):
            if key in d:
                kw[key] = GridRange(**d[key])
        for key in ("material", "load_case", "method"):
            if key in d:
                kw[key] = d[key]
        return cls(**kw)

    @classmethod
    def load(cls, path) -> list:
        """One spec per requested mode (``mode`` may be a string or a list)."""
        d = json.loads(Path(path).read_text())
        modes = d.get("mode", "linear")
        modes = [modes] if isinstance(modes, str) else list(modes)
        return [cls.from_dict(d, m) for m in modes]


@dataclass
class UpdateResult:
    mode: str
    young: np.ndarray
    density: np.ndarray
    objective: np.ndarray  # (nE, nrho), nan where not converged
    frequencies: np.ndarray  # (nE, nrho, k)
    converged: np.ndarray
    argmin: tuple
    failures: list = field(default_factory=list)

    @property
    def minimum(self) -> float:
        i, j = self.index
        return float(self.objective[i, j])

    @property
    def index(self):
        i = int(np.flatnonzero(self.young == self.argmin[0])[0])
        j = int(np.flatnonzero(self.density == self.argmin[1])[0])
        return i, j


def model_frequencies(model: Model, young: float, density: float, spec: UpdateSpec, n_modes: int | None = None, settings=None):
    n_modes = n_modes or len(spec.targets)
    params = model.materials[spec.material].with_young_density(young, density)
    m = model.with_material(spec.material, params)
    if spec.mode == "linear":
        return modal_analysis(m, n_modes, spec.method).frequencies
    states = solve_equilibrium(m, m.load_case(spec.load_case), settings)
    return modal_analysis(m, n_modes, spec.method, states[-1]).frequencies


def evaluate_objective(model: Model, params, spec: UpdateSpec, settings=None) -> float:
    """Sum of squared frequency errors (Hz^2) at ``params`` = (young, density)."""
    young, density = params
    f = model_frequencies(model, young, density, spec, settings=settings)
    return float(np.sum((f - np.asarray(spec.targets)) ** 2))


def _point(args):
    model, young, density, spec, settings = args
    try:
        f = model_frequencies(model, young, density, spec, settings=settings)
    except (ConvergenceError, EigenError) as exc:
        return None, str(exc)
    return f, None


def grid_search(model: Model, spec: UpdateSpec, settings: SolverSettings | None = None, workers: int = 1) -> UpdateResult:
    if spec.material not in model.materials:
        raise ModelError(f"unknown material {spec.material!r}")
    E = spec.young.values
    R = spec.density.values
    jobs = [(model, float(e), float(r), spec, settings) for e in E for r in R]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_point, jobs))
    else:
        out = [_point(j) for j in jobs]
    k = len(spec.targets)
    freqs = np.full((len(E), len(R), k), np.nan)
    conv = np.zeros((len(E), len(R)), dtype=bool)
    failures = []
    targets = np.asarray(spec.targets, dtype=float)
    for idx, (f, err) in enumerate(out):
        i, j = divmod(idx, len(R))
        if f is None:
            failures.append({"young": float(E[i]), "density": float(R[j]), "error": err})
            continue
        freqs[i, j] = f
        conv[i, j] = True
    obj = np.where(conv, np.sum((freqs - targets) ** 2, axis=-1), np.nan)
    if not conv.any():
        raise ConvergenceError("every grid point failed")
    # first minimum in E-major order: smaller E wins, then smaller density
    flat = np.where(conv, obj, np.inf).ravel()
    best = int(np.argmin(flat))
    i, j = divmod(best, len(R))
    return UpdateResult(
        mode=spec.mode,
        young=E,
        density=R,
        objective=obj,
        frequencies=freqs,
        converged=conv,
        argmin=(float(E[i]), float(R[j])),
        failures=failures,
    )


def write_surface_csv(result: UpdateResult, path) -> Path:
    path = Path(path)
    k = result.frequencies.shape[-1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["young_pa", "density_kg_m3", "objective_hz2"] + [f"f{i + 1}_hz" for i in range(k)] + ["converged"])
        for i, e in enumerate(result.young):
            for j, r in enumerate(result.density):
                row = [f"{e:.6g}", f"{r:.6g}"]
                if result.converged[i, j]:
                    row.append(f"{result.objective[i, j]:.10g}")
                    row += [f"{v:.6g}" for v in result.frequencies[i, j]]
                else:
                    row += [""] * (k + 1)
                row.append(int(result.converged[i, j]))
                w.writerow(row)
    return path


def summary(result: UpdateResult, spec: UpdateSpec) -> dict:
    i, j = result.index
    return {
        "mode": result.mode,
        "young": result.argmin[0],
        "density": result.argmin[1],
        "objective_hz2": result.minimum,
        "frequencies_hz": [float(f"{v:.6g}") for v in result.frequencies[i, j]],
        "targets_hz": list(spec.targets),
        "grid": {"young": asdict(spec.young), "density": asdict(spec.density)},
        "failed_points": result.failures,
    }

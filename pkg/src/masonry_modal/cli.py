"""Command-line front end: static, modal, nlmodal, sweep and update runs.

Every run writes plot-ready CSV files and a ``manifest.json`` into the
output directory.  Exit status is 0 when every requested computation
converged, 1 on solver or eigensolver failure and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import assembly as asm
from .modal import (
    EigenError,
    cracked_area_profile,
    fmt_freq,
    mac_matrix,
    modal_analysis,
    mode_tracking,
    write_matrix_csv,
    write_modal_csv,
    write_mode_shapes,
)
from .model import Model, ModelError, load_model
from .solver import ConvergenceError, SolverLog, SolverSettings, continue_from, solve_equilibrium
from .updating import UpdateSpec, grid_search, summary, write_surface_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _settings(args) -> SolverSettings:
    kw = {}
    if args.tol is not None:
        kw["rtol"] = args.tol
    if args.increments is not None:
        kw["increments"] = args.increments
    return SolverSettings(**kw)


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "masonry_modal": pkg}


# --------------------------------------------------------------------------
# state exports


def write_displacements(state, path):
    model = state.model
    fh, w = _writer(path)
    with fh:
        w.writerow(["node", "x", "y", "ux", "uy", "rz"])
        for k, nid in enumerate(model.node_ids):
            d = model.node_dofs[k]
            rz = f"{state.u[d['rz']]:.8e}" if "rz" in d else ""
            w.writerow([int(nid), f"{model.coords[k, 0]:.6g}", f"{model.coords[k, 1]:.6g}", f"{state.u[d['ux']]:.8e}", f"{state.u[d['uy']]:.8e}", rz])


def write_points(state, path):
    """Per integration point stress, fracture strain and region (quads and trusses)."""
    model = state.model
    fh, w = _writer(path)
    with fh:
        w.writerow(["element", "point", "s11", "s22", "s12", "ef11", "ef22", "ef12", "region"])
        for g, rec in zip(state.groups, state.records):
            ids = [model.elements[p].id for p in g.positions]
            if g.kind == "quad":
                s2 = np.sqrt(2.0)
                for e, eid in enumerate(ids):
                    for q in range(rec["stress"].shape[1]):
                        s, f = rec["stress"][e, q], rec["fracture"][e, q]
                        w.writerow([eid, q + 1, f"{s[0]:.6e}", f"{s[1]:.6e}", f"{s[2] / s2:.6e}", f"{f[0]:.6e}", f"{f[1]:.6e}", f"{f[2] / s2:.6e}", int(rec["region"][e, q])])
            elif g.kind == "truss":
                for e, eid in enumerate(ids):
                    ef = rec["strain"][e] if rec["cracked"][e] else 0.0
                    w.writerow([eid, 1, f"{rec['stress'][e]:.6e}", "", "", f"{ef:.6e}", "", "", ""])


def write_sections(state, path):
    """Beam section resultants and cracked-area ratio at every Gauss section."""
    model = state.model
    prof = cracked_area_profile(state)
    fh, w = _writer(path)
    with fh:
        w.writerow(["element", "x", "y", "axial_force", "moment", "shear_force", "cracked_area_ratio"])
        k = 0
        for g, rec in zip(state.groups, state.records):
            if g.kind != "beam":
                continue
            for e, p in enumerate(g.positions):
                for q in range(rec["moment"].shape[1]):
                    w.writerow(
                        [
                            model.elements[p].id,
                            f"{prof.x[k]:.6g}",
                            f"{prof.y[k]:.6g}",
                            f"{rec['axial_force'][e, q]:.6e}",
                            f"{rec['moment'][e, q]:.6e}",
                            f"{rec['shear_force'][e]:.6e}",
                            f"{prof.ratio[k]:.6f}",
                        ]
                    )
                    k += 1


def write_damage(state, path):
    model = state.model
    d = asm.element_stiffness_distance(state)
    fh, w = _writer(path)
    with fh:
        w.writerow(["element", "type", "stiffness_distance"])
        for el, v in zip(model.elements, d):
            w.writerow([el.id, el.kind, f"{v:.6e}"])


def export_state(state, out: Path, prefix=""):
    write_displacements(state, out / f"{prefix}displacements.csv")
    write_points(state, out / f"{prefix}points.csv")
    if any(g.kind == "beam" for g in state.groups):
        write_sections(state, out / f"{prefix}sections.csv")
    write_damage(state, out / f"{prefix}damage.csv")


# --------------------------------------------------------------------------
# subcommands


def cmd_static(args, model: Model, out: Path, manifest: dict) -> int:
    settings = _settings(args)
    with open(out / "solver_log.jsonl", "w") as log:
        states = solve_equilibrium(model, model.load_case(args.load_case), settings, log_stream=log)
    export_state(states[-1], out)
    manifest["results"] = {"increments": len(states), "residual": states[-1].residual_norm}
    return EXIT_OK


def cmd_modal(args, model: Model, out: Path, manifest: dict) -> int:
    res = modal_analysis(model, args.modes)
    write_modal_csv(res, out / "frequencies.csv")
    write_mode_shapes(res, model, out / "mode_shapes.csv")
    manifest["results"] = {"frequencies_hz": [fmt_freq(f) for f in res.frequencies], "method": res.method}
    return EXIT_OK


def _frequency_row(prefix, freqs):
    return prefix + [fmt_freq(f) for f in freqs]


def cmd_nlmodal(args, model: Model, out: Path, manifest: dict) -> int:
    settings = _settings(args)
    linear = modal_analysis(model, args.modes)
    write_modal_csv(linear, out / "linear_frequencies.csv")
    write_mode_shapes(linear, model, out / "linear_mode_shapes.csv")
    with open(out / "solver_log.jsonl", "w") as log:
        states = solve_equilibrium(model, model.load_case(args.load_case), settings, log_stream=log)
    k = linear.n_modes
    head = ["increment", "step", "load_factor"]
    M = asm.assemble_mass(model)
    fh_f, wf = _writer(out / "increments.csv")
    fh_r, wr = _writer(out / "ratios.csv")
    with fh_f, fh_r:
        wf.writerow(head + [f"f{i + 1}_hz" for i in range(k)])
        wr.writerow(head + [f"f{i + 1}_ratio" for i in range(k)])
        wf.writerow(_frequency_row([0, "linear", "0"], linear.frequencies))
        wr.writerow([0, "linear", "0"] + ["1"] * k)
        for n, st in enumerate(states, start=1):
            res = modal_analysis(model, args.modes, state=st)
            lf = f"{st.load_factor:.6g}"
            wf.writerow(_frequency_row([n, st.step, lf], res.frequencies))
            wr.writerow([n, st.step, lf] + [f"{v:.6g}" for v in res.frequencies / linear.frequencies])
    final = states[-1]
    write_modal_csv(res, out / "damaged_frequencies.csv")
    write_mode_shapes(res, model, out / "damaged_mode_shapes.csv")
    mac = mac_matrix(linear.shapes, res.shapes, M)
    write_matrix_csv(mac, out / "mac_final.csv")
    export_state(final, out)
    track = mode_tracking(linear, res, M)
    manifest["results"] = {
        "linear_hz": [fmt_freq(f) for f in linear.frequencies],
        "damaged_hz": [fmt_freq(f) for f in res.frequencies],
        "mode_permutation": [int(i) for i in track.permutation],
        "increments": len(states),
    }
    return EXIT_OK


def _parse_positions(text: str, model: Model) -> list:
    """Node ids ("12,40") or coordinates ("1.5:5.3,2:5.1", nearest node)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            try:
                xy = np.array([float(v) for v in item.split(":")])
            except ValueError:
                raise UsageError(f"bad position {item!r}") from None
            if xy.shape != (2,):
                raise UsageError(f"bad position {item!r}")
            out.append(int(np.argmin(np.linalg.norm(model.coords - xy, axis=1))))
        else:
            try:
                out.append(model.node_index(int(item)))
            except (ValueError, ModelError) as exc:
                raise UsageError(f"bad position {item!r}: {exc}") from None
    if not out:
        raise UsageError("no load positions given")
    return out


def _sweep_position(job):
    base, node, magnitudes, direction, n_modes, settings = job
    model = base.model
    rows = []
    state = base
    for P in magnitudes:
        f = base.f_ext.copy()
        f[model.dof(node, "ux")] += P * direction[0]
        f[model.dof(node, "uy")] += P * direction[1]
        try:
            state = continue_from(state, f, settings)
            res = modal_analysis(model, n_modes, state=state)
        except (ConvergenceError, EigenError) as exc:
            rows.append((P, None, None, str(exc)))
            break
        d = asm.element_stiffness_distance(state)
        rows.append((P, res.frequencies, float(d.max()), None))
    return rows


def cmd_sweep(args, model: Model, out: Path, manifest: dict) -> int:
    sweep = model.sweep
    if args.positions:
        positions = _parse_positions(args.positions, model)
        labels = [f"N{model.node_ids[p]}" for p in positions]
    elif sweep is not None:
        positions, labels = list(sweep.positions), list(sweep.labels)
    else:
        raise UsageError("model has no sweep definition; pass --positions")
    if args.magnitudes:
        try:
            magnitudes = [float(v) for v in args.magnitudes.split(",") if v.strip()]
        except ValueError:
            raise UsageError("bad --magnitudes list") from None
    elif sweep is not None:
        magnitudes = list(sweep.magnitudes)
    else:
        raise UsageError("model has no sweep magnitudes; pass --magnitudes")
    if not magnitudes:
        raise UsageError("no load magnitudes given")
    direction = sweep.direction if sweep is not None else (0.0, -1.0)
    base_case = args.load_case or (sweep.base_load_case if sweep is not None else None)
    settings = _settings(args)
    with open(out / "solver_log.jsonl", "w") as log:
        base = solve_equilibrium(model, model.load_case(base_case), settings, log_stream=log)[-1]
    linear = modal_analysis(model, args.modes)
    base_modes = modal_analysis(model, args.modes, state=base)
    jobs = [(base, p, magnitudes, direction, args.modes, settings) for p in positions]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sweep_position, jobs))
    else:
        results = [_sweep_position(j) for j in jobs]
    k = linear.n_modes
    failures = []
    fh, w = _writer(out / "sweep.csv")
    with fh:
        w.writerow(["position", "node", "x", "y", "load_n"] + [f"f{i + 1}_hz" for i in range(k)] + ["max_stiffness_distance", "converged"])
        w.writerow(["linear", "", "", "", ""] + [fmt_freq(f) for f in linear.frequencies] + ["", 1])
        w.writerow(["base", "", "", "", "0"] + [fmt_freq(f) for f in base_modes.frequencies] + ["", 1])
        for label, node, rows in zip(labels, positions, results):
            x, y = model.coords[node]
            for P, freqs, dmax, err in rows:
                pre = [label, int(model.node_ids[node]), f"{x:.6g}", f"{y:.6g}", f"{P:.6g}"]
                if freqs is None:
                    failures.append({"position": label, "load_n": P, "error": err})
                    w.writerow(pre + [""] * (k + 1) + [0])
                else:
                    w.writerow(pre + [fmt_freq(f) for f in freqs] + [f"{dmax:.6e}", 1])
    manifest["results"] = {"runs": len(positions) * len(magnitudes), "failures": failures}
    return EXIT_OK if not failures else EXIT_FAIL


def cmd_update(args, model: Model, out: Path, manifest: dict) -> int:
    if not args.spec:
        raise UsageError("update needs --spec PATH")
    try:
        specs = UpdateSpec.load(args.spec)
    except FileNotFoundError:
        raise UsageError(f"spec file not found: {args.spec}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad update spec: {exc}") from None
    settings = _settings(args)
    report = []
    failed = False
    for spec in specs:
        res = grid_search(model, spec, settings, workers=args.threads)
        write_surface_csv(res, out / f"surface_{spec.mode}.csv")
        s = summary(res, spec)
        failed |= bool(res.failures)
        report.append(s)
    (out / "update_summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    manifest["results"] = report
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"static": cmd_static, "modal": cmd_modal, "nlmodal": cmd_nlmodal, "sweep": cmd_sweep, "update": cmd_update}


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="masonry-modal", description="Modal analysis of no-tension masonry structures.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--model", required=True, help="model JSON file")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--modes", type=_positive_int, default=6, help="number of modes")
        s.add_argument("--tol", type=_positive_float, default=None, help="relative residual tolerance")
        s.add_argument("--increments", type=_positive_int, default=None, help="increments per load step")
        s.add_argument("--load-case", default=None, help="load case name")
        s.add_argument("--threads", type=_positive_int, default=1, help="worker processes for sweep/update")
        if name == "sweep":
            s.add_argument("--positions", default=None, help="node ids or x:y coordinates, comma separated")
            s.add_argument("--magnitudes", default=None, help="load magnitudes in N, comma separated")
        if name == "update":
            s.add_argument("--spec", default=None, help="update spec JSON")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    model_path = Path(args.model)
    if not model_path.is_file():
        print(f"error: model file not found: {model_path}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items())},
        "versions": _versions(),
    }
    t0 = time.perf_counter()
    try:
        model = load_model(model_path)
        manifest["model"] = {"name": model.name, "ndof": model.ndof, "elements": len(model.elements)}
        status = COMMANDS[args.command](args, model, out, manifest)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except (ConvergenceError, EigenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_FAIL
    manifest["status"] = status
    manifest["timings"] = {"wall_s": round(time.perf_counter() - t0, 3)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())

import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cholesky_eigvals, random_spd

from masonry_modal import assembly as asm
from masonry_modal.modal import (
    EigenError,
    cracked_area_profile,
    mac_m,
    mac_matrix,
    modal_analysis,
    mode_tracking,
    solve_eigen,
    solve_reduced,
    write_modal_csv,
    write_mode_shapes,
)
from masonry_modal.model import load_model
from masonry_modal.solver import solve_equilibrium


def test_toy_two_dof(models_dir):
    model = load_model(models_dir / "toy2dof.json")
    res = modal_analysis(model, 2)
    assert np.allclose(res.frequencies, [2 / (2 * np.pi), 3 / (2 * np.pi)], rtol=1e-14)
    assert np.allclose(np.abs(res.shapes[[model.dof(0, "ux"), model.dof(1, "ux")]]), np.eye(2), atol=1e-14)
    assert np.allclose(res.effective_mass["x"], [50.0, 50.0])
    assert np.all(res.effective_mass["y"] == 0)


def _sparse_pair(rng, n):
    """Banded SPD stiffness and diagonal-dominant mass, like a 1D mesh."""
    main = rng.uniform(2.0, 4.0, n)
    off = -rng.uniform(0.5, 0.9, n - 1)
    K = sp.diags([off, main, off], [-1, 0, 1], format="csc") * 1e6
    M = sp.diags([np.full(n - 1, 0.1), np.ones(n), np.full(n - 1, 0.1)], [-1, 0, 1], format="csc")
    return K, M


@pytest.mark.parametrize("method", ["dense", "lanczos"])
def test_lowest_modes_match_oracle(method):
    rng = np.random.default_rng(11)
    K, M = _sparse_pair(rng, 400)
    w, V, used = solve_reduced(K, M, 8, method=method)
    ref = np.sort(cholesky_eigvals(K.toarray(), M.toarray()))[:8]
    assert used == method
    assert np.allclose(w, ref, rtol=1e-9)
    assert np.allclose(V.T @ (M @ V), np.eye(8), atol=1e-10)


def test_shift_independence():
    rng = np.random.default_rng(5)
    K, M = _sparse_pair(rng, 300)
    ref, _, _ = solve_reduced(K, M, 6, method="lanczos")
    for shift in (0.0, 1e4, -1e5):
        w, _, _ = solve_reduced(K, M, 6, method="lanczos", shift=shift)
        assert np.allclose(w, ref, rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_random_pairs_full_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    K, M = random_spd(rng, n, 1e4), random_spd(rng, n, 1e2)
    w, V, _ = solve_reduced(K, M, n)
    ref = cholesky_eigvals(K, M)
    assert np.allclose(w, ref, rtol=1e-9)
    assert np.allclose(V.T @ M @ V, np.eye(n), atol=1e-9)


def test_mode_count_errors(beam60):
    with pytest.raises(EigenError):
        modal_analysis(beam60, 0)
    with pytest.raises(EigenError):
        modal_analysis(beam60, 181)


def test_arch_modes_orthonormal_and_constrained(arch):
    res = modal_analysis(arch, 6)
    assert res.method == "lanczos"
    M = asm.assemble_mass(arch)
    assert np.allclose(res.shapes.T @ (M @ res.shapes), np.eye(6), atol=1e-10)
    red = asm.reduction(arch)
    assert np.abs(red.T @ res.shapes).max() <= 1e-12
    assert res.residuals.max() <= 1e-8


def test_lanczos_agrees_with_dense_on_arch(arch):
    K, M, red = asm.assemble_elastic_stiffness(arch), asm.assemble_mass(arch), asm.reduction(arch)
    a = solve_eigen(K, M, red, 5, method="lanczos")
    b = solve_eigen(K, M, red, 5, method="dense")
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10)
    assert np.allclose(np.diag(mac_matrix(a.shapes, b.shapes, M)), 1.0, atol=1e-8)


def test_beam_modes_fixed_dofs_zero(beam60):
    res = modal_analysis(beam60, 6)
    fixed = list(beam60.constraints.fixed)
    assert np.all(res.shapes[fixed] == 0)


def test_mac_properties(beam60):
    res = modal_analysis(beam60, 6)
    M = asm.assemble_mass(beam60)
    mac = mac_matrix(res.shapes, res.shapes, M)
    assert np.allclose(mac, np.eye(6), atol=1e-9)
    phi = res.shapes[:, 0]
    assert np.isclose(mac_m(phi, -3.0 * phi, M), 1.0)
    assert np.isclose(mac_m(phi, res.shapes[:, 1], M), mac_m(res.shapes[:, 1], phi, M))
    rng = np.random.default_rng(2)
    A, B = rng.standard_normal((beam60.ndof, 3)), rng.standard_normal((beam60.ndof, 4))
    m = mac_matrix(A, B, M)
    assert np.all((m >= 0) & (m <= 1)) and m.shape == (3, 4)
    assert np.allclose(m, mac_matrix(B, A, M).T)
    with pytest.raises(ValueError):
        mac_m(np.zeros(beam60.ndof), phi, M)


def test_mode_tracking_finds_swap(beam60, beam60_staged):
    track = mode_tracking(beam60_staged.linear, beam60_staged.damaged, asm.assemble_mass(beam60))
    assert track.permutation[2] == 3
    assert sorted(track.permutation) == list(range(6))


def test_frequencies_drop_along_staging(beam60_staged):
    lin = beam60_staged.linear.frequencies
    for _, res in beam60_staged.increments:
        assert np.all(res.frequencies <= lin * (1 + 1e-9))


def test_effective_mass_sums_to_hundred(tower):
    n = asm.reduction(tower).n_free
    res = modal_analysis(tower, n)
    for d in ("x", "y"):
        assert np.isclose(res.effective_mass[d].sum(), 100.0, atol=1e-6)


def test_cracked_truss_has_zero_frequency():
    # a mass held by a no-tension bar that is stretched: the bar carries nothing
    doc = {
        "materials": {"m": {"young": 3e9, "poisson": 0.2, "density": 1800.0}},
        "nodes": [[1, 0.0, 0.0], [2, 1.0, 0.0]],
        "elements": [
            {"id": 1, "type": "truss", "nodes": [1, 2], "area": 1e-2, "material": "m"},
            {"id": 2, "type": "point_mass", "nodes": [2], "mass": 100.0},
        ],
        "constraints": {"fixed": [{"node": 1, "dofs": ["ux", "uy"]}, {"node": 2, "dofs": ["uy"]}]},
        "load_cases": {"stretch": {"steps": [{"name": "s", "prescribed": [{"node": 1, "dof": "ux", "value": -1e-3}]}]}},
    }
    model = load_model(doc)
    lin = modal_analysis(model, 1)
    assert lin.frequencies[0] > 1.0 and not lin.near_zero[0]
    state = solve_equilibrium(model, model.load_case("stretch"))[-1]
    res = modal_analysis(model, 1, state=state)
    assert res.near_zero[0]
    assert res.frequencies[0] <= 1e-6


def test_cracked_profile_peaks_at_midspan(beam60_staged):
    prof = cracked_area_profile(beam60_staged.state)
    assert prof.ratio.max() > 0
    peak = prof.x[prof.ratio == prof.ratio.max()]
    assert np.all(np.abs(peak - 3.0) <= 0.3)
    assert np.all(prof.ratio[(prof.x < 0.5) | (prof.x > 5.5)] == 0)
    assert np.all(np.diff(prof.x) >= 0)


def test_cracked_profile_needs_beams(arch):
    state = solve_equilibrium(arch, arch.load_case("self_weight"))[-1]
    with pytest.raises(Exception, match="beam"):
        cracked_area_profile(state)


def test_csv_writers(tmp_path, beam60):
    res = modal_analysis(beam60, 3)
    write_modal_csv(res, tmp_path / "f.csv")
    rows = list(csv.DictReader(open(tmp_path / "f.csv")))
    assert [r["mode"] for r in rows] == ["1", "2", "3"]
    assert np.isclose(float(rows[0]["frequency_hz"]), res.frequencies[0], rtol=1e-5)
    write_mode_shapes(res, beam60, tmp_path / "s.csv")
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert len(rows) == 3 * beam60.n_nodes

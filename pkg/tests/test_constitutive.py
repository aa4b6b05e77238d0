import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import elastic_plane_stress, principal_oracle
from strategies import poissons, strains, unit

from masonry_modal import constitutive as cm
from masonry_modal import tensors as ts
from masonry_modal.constitutive import Region

YOUNG = 3.0e9


def mat(nu=0.2):
    return cm.MaterialParams.from_young(YOUNG, nu, 1800.0)


def diag(*v):
    return np.array([*v, 0.0, 0.0, 0.0])


# --------------------------------------------------------------------------
# parameters and elasticity


def test_params_roundtrip():
    p = mat(0.2)
    assert np.isclose(p.young, YOUNG)
    assert np.isclose(p.poisson, 0.2)
    assert np.isclose(p.alpha, 2.0 / 3.0)
    q = p.with_young_density(5e9, 2000.0)
    assert np.isclose(q.young, 5e9) and np.isclose(q.poisson, 0.2) and q.rho == 2000.0


@pytest.mark.parametrize(
    "kw",
    [dict(mu=0.0, lam=1.0, rho=1.0), dict(mu=1.0, lam=-1.0, rho=1.0), dict(mu=1.0, lam=1.0, rho=0.0), dict(mu=1.0, lam=1.0, rho=1.0, behavior="rubber")],
)
def test_params_rejected(kw):
    with pytest.raises(ValueError):
        cm.MaterialParams(**kw)


@pytest.mark.parametrize("young,nu", [(-1.0, 0.2), (1.0, 0.5), (1.0, -0.1)])
def test_from_young_rejected(young, nu):
    with pytest.raises(ValueError):
        cm.MaterialParams.from_young(young, nu, 1.0)


def test_elastic_tensor_eigenspaces():
    p = mat(0.2)
    C = cm.elastic_tensor(p)
    assert np.allclose(ts.apply(C, ts.IDENTITY), (2 * p.mu + 3 * p.lam) * ts.IDENTITY)
    O12 = np.array([0, 0, 0, 0, 0, 1.0])
    assert np.allclose(ts.apply(C, O12), 2 * p.mu * O12)
    assert np.linalg.eigvalsh(C).min() > 0


# --------------------------------------------------------------------------
# worked examples


def test_classification_examples():
    p = mat(0.2)
    assert cm.classify_region(diag(1, 2, 3) * 1e-3, p)[0] == Region.V0
    assert cm.classify_region(diag(-1, -1, -1) * 1e-3, p)[0] == Region.V3
    assert cm.classify_region(diag(-1, 1, 1) * 1e-3, p)[0] == Region.V1


def test_v2_example():
    # e1 = -1, e2 = -0.1: alpha e1 + 2(1+alpha) e2 < 0 while 2 e3 + alpha trE > 0
    p = mat(0.2)
    E = diag(-1, -0.1, 1) * 1e-3
    assert cm.classify_region(E, p)[0] == Region.V2
    To, Fo = principal_oracle(E, p.mu, p.lam)
    assert np.allclose(cm.stress(E, p), To[0], atol=1e-6)
    assert np.allclose(cm.fracture_strain(E, p), Fo[0], atol=1e-18)


def test_stress_examples():
    p = mat(0.2)
    assert np.all(cm.stress(diag(1, 2, 3) * 1e-3, p) == 0)
    T = cm.stress(diag(-1, -1, -1) * 1e-3, p)
    assert np.allclose(T, -(2 * p.mu + 3 * p.lam) * 1e-3 * ts.IDENTITY)
    assert np.allclose(cm.stress(diag(-1, 1, 1) * 1e-3, p), diag(-3e6, 0, 0), atol=1e-6)


def test_fracture_strain_examples():
    p = mat(0.2)
    E0 = diag(1, 2, 3) * 1e-3
    assert np.allclose(cm.fracture_strain(E0, p), E0)
    assert np.all(cm.fracture_strain(diag(-1, -2, -3) * 1e-3, p) == 0)
    assert np.allclose(cm.fracture_strain(diag(-1, 1, 1) * 1e-3, p), diag(0, 0.8, 0.8) * 1e-3, atol=1e-18)


def test_tangent_examples():
    p = mat(0.2)
    assert np.all(cm.tangent(diag(1, 2, 3) * 1e-3, p) == 0)
    assert np.allclose(cm.tangent(diag(-1, -2, -3) * 1e-3, p), cm.elastic_tensor(p))
    E = diag(-1, 1, 2) * 1e-3
    assert cm.classify_region(E, p)[0] == Region.V1
    D = cm.tangent(E, p)
    h = 1e-7
    Dfd = np.column_stack([(cm.stress(E + h * e, p) - cm.stress(E - h * e, p)) / (2 * h) for e in np.eye(6)])
    assert np.linalg.norm(Dfd - D) <= 1e-5 * np.linalg.norm(D)


def test_elastic_behavior_is_linear():
    p = cm.MaterialParams.from_young(2.1e11, 0.3, 7850.0, behavior="elastic")
    E = diag(1, -2, 0.5) * 1e-4
    r = cm.respond(E, p)
    assert np.allclose(r.stress, ts.apply(cm.elastic_tensor(p), E))
    assert np.all(r.fracture == 0) and np.allclose(r.tangent, cm.elastic_tensor(p))


def test_uniaxial_examples():
    s, t, c = cm.uniaxial_respond(-1e-3, YOUNG)
    assert (s, t, c) == (-3e6, YOUNG, False)
    s, t, c = cm.uniaxial_respond(1e-3, YOUNG)
    assert (s, t, c) == (0.0, 0.0, True)
    s, t, c = cm.uniaxial_respond(0.0, YOUNG)
    assert (s, t, c) == (0.0, YOUNG, False)
    s, t, c = cm.uniaxial_respond(1e-3, YOUNG, masonry=False)
    assert s == 3e6 and not c


@given(st.floats(-1e-2, 1e-2))
def test_uniaxial_complementarity(eps):
    s, _, _ = cm.uniaxial_respond(eps, YOUNG)
    assert s <= 0
    assert abs(s * (eps - s / YOUNG)) <= 1e-12 * YOUNG * eps**2 + 1e-300


# --------------------------------------------------------------------------
# properties


@given(strains(), poissons)
def test_kkt_conditions(E, nu):
    p = mat(nu)
    r = cm.respond(E, p)
    nT, nF = ts.norm(r.stress), ts.norm(r.fracture)
    assert ts.eigvalsh(r.stress)[-1] <= 1e-9 * nT + 1e-12 * p.young
    assert ts.eigvalsh(r.fracture)[0] >= -1e-9 * nF - 1e-15
    assert abs(ts.dot(r.stress, r.fracture)) <= 1e-9 * nT * nF + 1e-300
    back = ts.apply(cm.elastic_tensor(p), E - r.fracture)
    assert ts.norm(r.stress - back) <= 1e-9 * p.young * ts.norm(E) + 1e-300


@given(strains(), poissons)
def test_matches_projection_oracle(E, nu):
    p = mat(nu)
    To, Fo = principal_oracle(E, p.mu, p.lam)
    nE = ts.norm(E)
    assert ts.norm(cm.stress(E, p) - To[0]) <= 1e-7 * ts.norm(To[0]) + 1e-12 * p.young * nE
    assert ts.norm(cm.fracture_strain(E, p) - Fo[0]) <= 1e-7 * ts.norm(Fo[0]) + 1e-12 * nE


@given(strains(), poissons)
def test_region_counts_cracked_directions(E, nu):
    # the region index is the number of principal directions that stay uncracked
    p = mat(nu)
    r = cm.respond(E, p)
    assume(not r.boundary)
    _, Fo = principal_oracle(E, p.mu, p.lam)
    f = ts.eigvalsh(Fo[0])
    cracked = int(np.sum(f > 1e-9 * ts.norm(E)))
    assert r.region == 3 - cracked


@given(strains(), poissons, st.floats(1e-3, 1e3))
def test_positive_homogeneity(E, nu, k):
    p = mat(nu)
    T = cm.stress(E, p)
    assert np.allclose(cm.stress(k * E, p), k * T, rtol=0, atol=1e-12 * k * p.young * ts.norm(E) + 1e-300)
    assert np.allclose(cm.fracture_strain(k * E, p), k * cm.fracture_strain(E, p), rtol=0, atol=1e-12 * k * ts.norm(E) + 1e-300)


@given(strains(), poissons)
def test_tangent_symmetric_and_loewner_bounded(E, nu):
    p = mat(nu)
    D = cm.tangent(E, p)
    assert ts.is_symmetric4(D, 1e-9)
    assert np.linalg.eigvalsh(cm.elastic_tensor(p) - D).min() >= -1e-9 * p.young
    assert np.linalg.eigvalsh(D).min() >= -1e-9 * p.young


@settings(max_examples=200)
@given(strains(), strains(), poissons)
def test_continuity_across_boundaries(Ea, Eb, nu):
    # bisect the segment Ea -> Eb down to a region change, then step across it
    p = mat(nu)
    ra, rb = cm.classify_region(Ea, p)[0], cm.classify_region(Eb, p)[0]
    assume(ra != rb)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cm.classify_region(Ea + mid * (Eb - Ea), p)[0] == ra:
            lo = mid
        else:
            hi = mid
        if (hi - lo) * ts.norm(Eb - Ea) <= 1e-8:
            break
    Em, Ep = Ea + lo * (Eb - Ea), Ea + hi * (Eb - Ea)
    step = ts.norm(Ep - Em)
    jump = ts.norm(cm.stress(Ep, p) - cm.stress(Em, p))
    # T is Lipschitz with the largest elastic modulus; any jump would break this
    lip = 2 * p.mu + 3 * p.lam
    assert jump <= (1.0 + 1e-6) * lip * step + 1e-6 * p.young * step


def test_region_tie_break_prefers_stiffer():
    p = mat(0.2)
    # e1 = 0 exactly: V0/V1 boundary, tagged V1
    region, boundary = cm.classify_region(diag(0, 1, 2) * 1e-3, p)
    assert boundary and region == Region.V1
    region, boundary = cm.classify_region(np.zeros(6), p)
    assert boundary and region == Region.V3


def test_batched_response_shapes():
    p = mat(0.2)
    E = np.random.default_rng(0).standard_normal((3, 4, 6)) * 1e-3
    r = cm.respond(E, p)
    assert r.stress.shape == (3, 4, 6) and r.tangent.shape == (3, 4, 6, 6) and r.region.shape == (3, 4)


# --------------------------------------------------------------------------
# plane stress


def test_plane_stress_zero():
    r = cm.plane_stress_respond(np.zeros(3), mat())
    assert np.all(r.stress == 0)


def test_plane_stress_biaxial_compression_matches_elastic_oracle():
    p = mat(0.2)
    Ein = np.array([-1e-3, -1e-3, 0.0])
    r = cm.plane_stress_respond(Ein, p)
    T2, D2 = elastic_plane_stress(Ein, p.young, p.poisson)
    assert np.allclose(r.stress, T2, rtol=1e-12)
    assert np.isclose(r.e33, 2 * p.lam / (p.lam + 2 * p.mu) * 1e-3)
    assert np.allclose(r.tangent, D2, rtol=1e-10)


def test_plane_stress_biaxial_tension():
    Ein = np.array([1e-3, 2e-3, 0.3e-3])
    r = cm.plane_stress_respond(Ein, mat())
    assert np.all(r.stress == 0)
    assert np.allclose(r.fracture, Ein)


def test_plane_stress_uniaxial_compression():
    p = mat(0.2)
    # sigma11 = young * e11 needs e22 = -nu e11 and e33 = -nu e11
    Ein = np.array([-1e-3, 0.2e-3, 0.0])
    r = cm.plane_stress_respond(Ein, p)
    assert np.allclose(r.stress, [-3e6, 0, 0], atol=1e-3)


@given(st.lists(unit, min_size=3, max_size=3), poissons)
def test_plane_stress_out_of_plane_free(v, nu):
    p = mat(nu)
    Ein = np.array(v) * 1e-3
    r = cm.plane_stress_respond(Ein, p)
    T3 = cm.stress(cm.embed_plane(Ein, r.e33), p)
    assert abs(T3[2]) <= 1e-8 * ts.norm(T3) + 1e-9
    assert np.allclose(T3[[0, 1, 5]], r.stress)


@given(st.lists(unit, min_size=3, max_size=3), poissons)
def test_plane_stress_tangent_matches_differences(v, nu):
    p = mat(nu)
    Ein = np.array(v) * 1e-3
    # stay away from the in-plane kinks: a principal strain or the gap near zero
    w = np.linalg.eigvalsh([[Ein[0], Ein[2] / np.sqrt(2)], [Ein[2] / np.sqrt(2), Ein[1]]])
    assume(min(abs(w[0]), abs(w[1]), w[1] - w[0], abs(w[1] + nu * w[0])) > 1e-2 * np.linalg.norm(w))
    r = cm.plane_stress_respond(Ein, p)
    h = 1e-6 * np.linalg.norm(Ein)
    cols = []
    for e in np.eye(3):
        cols.append((cm.plane_stress_respond(Ein + h * e, p).stress - cm.plane_stress_respond(Ein - h * e, p).stress) / (2 * h))
    Dfd = np.column_stack(cols)
    assert np.linalg.norm(Dfd - r.tangent) <= 1e-5 * max(np.linalg.norm(r.tangent), p.young)
    assert np.allclose(r.tangent, r.tangent.T)

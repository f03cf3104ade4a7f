import numpy as np
import pytest

from paraherm.connections import flat_connection
from paraherm.geometry import apply_endomorphism, constant_field, exterior_derivative
from paraherm.parastructure import (
    ParaHermitianStructure, bigraded_part_at, classify, n_scalar, nijenhuis,
    nijenhuis_connection_form, nijenhuis_projector_form, phi_scalar, rho,
    rho_field, rho_inverse, validate_structure,
)
from paraherm.randfields import random_form, random_vector_field
from conftest import sample_points, sphere_box


def _const_vecs(chart, rng, count):
    return [constant_field(chart, rng.uniform(-1, 1, chart.dim), 1, 0)
            for _ in range(count)]


# -- validation -----------------------------------------------------------------

def test_flat_validation_exact(flat2):
    pts = sample_points(flat2, 5, 0)
    rep = validate_structure(flat2.S, pts)
    assert rep.passed
    assert max(rep.residuals.values()) == 0.0


def test_rank_skewed_K_fails(flat2):
    chart = flat2.chart
    K = constant_field(chart, np.diag([1.0, 1.0, 1.0, -1.0]), 1, 1)
    eta = constant_field(chart, flat2.eta_matrix, 0, 2, sym="symmetric")
    S = ParaHermitianStructure(chart, eta, K)
    rep = validate_structure(S, sample_points(flat2, 3, 1))
    assert not rep.passed
    assert rep.residuals["trace_K"] > 1.0


def test_sphere_tm_validation(sphere_tm):
    pts = sample_points(sphere_tm, 50, 2, box=sphere_box())
    rep = validate_structure(sphere_tm.S, pts)
    assert rep.passed
    assert max(rep.residuals.values()) < 1e-12


# -- rho maps -------------------------------------------------------------------

def test_rho_flat_images(flat2):
    """rho_+(dtilde^i) = dx^i and rho_-(d_i) = dxt_i on the flat model."""
    chart = flat2.chart
    p = chart.point([0.1, -0.2, 0.3, 0.4])
    for i in range(2):
        dt = constant_field(chart, np.eye(4)[2 + i], 1, 0)
        gv = rho(flat2.S, +1, dt, p)
        assert np.max(np.abs(gv.vec.values())) == 0.0
        assert np.allclose(gv.cov.values(), np.eye(4)[i])
        dx = constant_field(chart, np.eye(4)[i], 1, 0)
        gv = rho(flat2.S, -1, dx, p)
        assert np.max(np.abs(gv.vec.values())) == 0.0
        assert np.allclose(gv.cov.values(), np.eye(4)[2 + i])


def test_rho_plus_fixes_plus_vectors(flat2):
    rng = np.random.default_rng(3)
    p = flat2.chart.point(rng.uniform(-1, 1, 4))
    xplus = constant_field(flat2.chart, [0.7, -0.4, 0.0, 0.0], 1, 0)
    gv = rho(flat2.S, +1, xplus, p)
    assert np.allclose(gv.vec.values(), [0.7, -0.4, 0.0, 0.0])
    assert gv.cov.max_abs() == 0.0


def test_rho_isometry(sphere_tm, sphere_pts):
    """<rho X, rho Y> = eta(X, Y) for 100 random pairs."""
    rng = np.random.default_rng(4)
    S = sphere_tm.S
    for p in sphere_pts[:2]:
        b = S.at(p, 0)
        etav = b.eta.values()
        for _ in range(50):
            X, Y = _const_vecs(S.chart, rng, 2)
            for sign in (+1, -1):
                gx = rho(S, sign, X, p)
                gy = rho(S, sign, Y, p)
                pair = (gx.cov.values() @ gy.vec.values()
                        + gy.cov.values() @ gx.vec.values())
                target = X.values(p) @ etav @ Y.values(p)
                assert abs(pair - target) < 1e-12


def test_rho_inverse_roundtrip(sphere_tm, sphere_pts):
    rng = np.random.default_rng(5)
    S = sphere_tm.S
    p = sphere_pts[0]
    for sign in (+1, -1):
        X = constant_field(S.chart, rng.uniform(-1, 1, 4), 1, 0)
        gv = rho(S, sign, X, p)
        back = rho_inverse(S, sign, gv.vec, gv.cov, p)
        assert np.max(np.abs(back.values() - X.values(p))) < 1e-12


def test_rho_field_matches_pointwise(flat2):
    rng = np.random.default_rng(6)
    X = random_vector_field(flat2.chart, rng)
    p = flat2.chart.point(rng.uniform(-1, 1, 4))
    vec, cov = rho_field(flat2.S, +1, X)
    gv = rho(flat2.S, +1, X, p)
    assert np.allclose(vec.values(p), gv.vec.values())
    assert np.allclose(cov.values(p), gv.cov.values())


# -- Nijenhuis -------------------------------------------------------------------

def test_flat_nijenhuis_vanishes(flat2):
    rng = np.random.default_rng(7)
    X = random_vector_field(flat2.chart, rng)
    Y = random_vector_field(flat2.chart, rng)
    p = flat2.chart.point(rng.uniform(-1, 1, 4))
    assert nijenhuis(flat2.S, X, Y).at(p, 0).max_abs() < 1e-12


def test_nijenhuis_forms_agree(curved3_tm):
    """All four algebraic forms agree pairwise at sampled points."""
    rng = np.random.default_rng(8)
    S = curved3_tm.S
    pts = sample_points(curved3_tm, 5, 9, box=[(-0.8, 0.8)] * 6)
    X = random_vector_field(S.chart, rng, degree=1)
    Y = random_vector_field(S.chart, rng, degree=1)
    f1 = nijenhuis(S, X, Y)
    f2 = nijenhuis_projector_form(S, X, Y)
    f3 = nijenhuis_connection_form(S, X, Y, flat_connection(S.chart))
    f4 = nijenhuis_connection_form(S, X, Y, S.levi_civita)
    for p in pts:
        v1 = f1.values(p)
        for other in (f2, f3, f4):
            assert np.max(np.abs(v1 - other.values(p))) < 1e-9


def test_sphere_tm_half_integrability(sphere_tm, sphere_pts):
    """N_- = 0 (vertical distribution integrable); N_+ reproduces the
    curvature contraction eta(N(H_i,H_j), .) = -(1/4-free) R-term check via
    the N_+ = eta([H_i,H_j], z_+)-route."""
    S = sphere_tm.S
    rng = np.random.default_rng(10)
    p = sphere_pts[0]
    for _ in range(10):
        X, Y, Z = _const_vecs(S.chart, rng, 3)
        assert abs(n_scalar(S, -1, X, Y, Z, p)) < 1e-12
    # N_+(X,Y,Z) = eta([P+X, P+Y], P+Z), nonzero by curvature
    from paraherm.geometry import lie_bracket, tdot

    worst = 0.0
    for _ in range(5):
        X, Y, Z = _const_vecs(S.chart, rng, 3)
        lhs = n_scalar(S, +1, X, Y, Z, p)
        b = S.at(p, 0)
        P = S.projector(+1)
        br = lie_bracket(apply_endomorphism(P, X), apply_endomorphism(P, Y))
        pz = tdot(b.Pp.comps, Z.at(p, 0).comps, ([1], [0]))
        rhs = float(tdot(tdot(b.eta.comps, br.at(p, 0).comps, ([0], [0])), pz,
                         ([0], [0]))[()].value)
        assert abs(lhs - rhs) < 1e-10
        worst = max(worst, abs(lhs))
    assert worst > 1e-3


# -- Phi tensor -----------------------------------------------------------------

def test_phi_vanishes_on_flat(flat2):
    rng = np.random.default_rng(11)
    X, Y, Z = _const_vecs(flat2.chart, rng, 3)
    p = flat2.chart.point(rng.uniform(-1, 1, 4))
    assert abs(phi_scalar(flat2.S, X, Y, Z, p)) < 1e-13


def test_phi_lemma_identities(sphere_tm, sphere_pts):
    """Phi(X, KY, KZ) = Phi(X,Y,Z) and Phi(X, P+Y, P-Z) = 0."""
    S = sphere_tm.S
    rng = np.random.default_rng(12)
    for p in sphere_pts[:3]:
        for _ in range(5):
            X, Y, Z = _const_vecs(S.chart, rng, 3)
            KY = apply_endomorphism(S.K, Y)
            KZ = apply_endomorphism(S.K, Z)
            a = phi_scalar(S, X, KY, KZ, p)
            b = phi_scalar(S, X, Y, Z, p)
            assert abs(a - b) < 1e-9
            PpY = apply_endomorphism(S.P_plus, Y)
            PmZ = apply_endomorphism(S.P_minus, Z)
            assert abs(phi_scalar(S, X, PpY, PmZ, p)) < 1e-9
            PmY = apply_endomorphism(S.P_minus, Y)
            PpZ = apply_endomorphism(S.P_plus, Z)
            assert abs(phi_scalar(S, X, PmY, PpZ, p)) < 1e-9


def test_nijenhuis_from_phi(curved3_tm):
    """N_pm(X,Y,Z) = 1/2 [Phi(PX,PY,PZ) - Phi(PY,PX,PZ)]."""
    S = curved3_tm.S
    rng = np.random.default_rng(13)
    pts = sample_points(curved3_tm, 3, 14, box=[(-0.8, 0.8)] * 6)
    for p in pts:
        for sign in (+1, -1):
            X, Y, Z = _const_vecs(S.chart, rng, 3)
            P = S.projector(sign)
            PX, PY, PZ = (apply_endomorphism(P, f) for f in (X, Y, Z))
            lhs = n_scalar(S, sign, X, Y, Z, p)
            rhs = 0.5 * (phi_scalar(S, PX, PY, PZ, p) - phi_scalar(S, PY, PX, PZ, p))
            assert abs(lhs - rhs) < 1e-9


# -- bigrading -------------------------------------------------------------------

def test_omega_is_type_one_one(sphere_tm, sphere_pts):
    S = sphere_tm.S
    for p in sphere_pts[:3]:
        b = S.at(p, 0)
        w = b.omega.values()
        Pp = b.Pp.values()
        Pm = b.Pm.values()
        assert np.max(np.abs(Pp.T @ w @ Pp)) < 1e-12
        assert np.max(np.abs(Pm.T @ w @ Pm)) < 1e-12


def test_bigrading_completeness(sphere_tm, sphere_pts):
    """Sum of the (+m,-n) projections reconstructs any (0,3) form."""
    rng = np.random.default_rng(15)
    S = sphere_tm.S
    w2 = random_form(S.chart, rng, k=2)
    T = exterior_derivative(w2)
    for p in sphere_pts[:3]:
        tj = T.at(p, 0)
        total = None
        for m in range(4):
            part = bigraded_part_at(S, tj, m, S.at(p, 0))
            total = part if total is None else total + part
        assert (total - tj).max_abs() < 1e-12


# -- classification --------------------------------------------------------------

def test_flat_classifies_para_kahler(flat2):
    rep = classify(flat2.S, sample_points(flat2, 4, 16))
    assert rep.flags["para_kahler"]
    assert rep.flags["p_integrable"] and rep.flags["n_integrable"]
    assert rep.flags["almost_para_kahler"] and rep.flags["nearly_para_kahler"]
    assert max(rep.cross_checks.values()) < 1e-12


def test_flatg_tm_is_n_para_kahler(flatg_tm):
    pts = sample_points(flatg_tm, 4, 17)
    rep = classify(flatg_tm.S, pts)
    assert rep.flags["para_kahler"]  # flat metric, Levi-Civita: fully integrable
    assert rep.flags["n_para_kahler"]


def test_sphere_tm_classification(sphere_tm, sphere_pts):
    rep = classify(sphere_tm.S, sphere_pts[:4])
    assert not rep.flags["p_integrable"]
    assert rep.flags["n_integrable"]
    assert rep.flags["n_para_kahler"]
    assert not rep.flags["para_kahler"]
    # d omega (3,0) equals the cyclic sum of N_+ (both sides here
    # vanish by the first Bianchi identity; the equality is the assertion).
    assert rep.cross_checks["d_omega_30_vs_cyclic_n_plus"] < 1e-9
    assert rep.cross_checks["d_omega_03_vs_cyclic_n_minus"] < 1e-9
    assert rep.cross_checks["para_kahler_iff_nabla_K"] == 0.0


def test_nonvacuous_cyclic_nijenhuis_identity_on_sheared_structure(flat3):
    """A B-transformed flat structure has d omega^(3,0) != 0; the classify
    cross-check exercises the Nijenhuis formula with nonzero sides."""
    from paraherm.deformations import b_transform
    from paraherm.geometry import TensorField

    pts = sample_points(flat3, 3, 18)
    comps = np.empty((6, 6), dtype=object)
    comps[...] = 0
    for (i, j), s in {(0, 1): "xt1", (0, 2): "x2*xt2", (1, 2): "x1"}.items():
        comps[i, j] = s
        comps[j, i] = f"-({s})"
    b = TensorField(flat3.chart, 0, 2, comps, sym="antisymmetric")
    T = b_transform(flat3.S, b, sample=pts)
    rep = classify(T.structure_B, pts)
    assert rep.residuals["domega_30"] > 0.1
    assert rep.cross_checks["d_omega_30_vs_cyclic_n_plus"] < 1e-9


def test_nearly_pk_implies_skew_nijenhuis(flat2, sphere_tm, sphere_pts, curved3_tm):
    """Where the nearly-para-Kahler flag holds, N must be fully skew."""
    rng = np.random.default_rng(19)
    cases = [
        (flat2.S, sample_points(flat2, 3, 20)),
        (sphere_tm.S, sphere_pts[:2]),
        (curved3_tm.S, sample_points(curved3_tm, 2, 21, box=[(-0.8, 0.8)] * 6)),
    ]
    triggered = 0
    for S, pts in cases:
        rep = classify(S, pts)
        if not rep.flags["nearly_para_kahler"]:
            continue
        triggered += 1
        for p in pts:
            for _ in range(5):
                X, Y, Z = _const_vecs(S.chart, rng, 3)
                for sign in (+1, -1):
                    a = n_scalar(S, sign, X, Y, Z, p)
                    b = n_scalar(S, sign, X, Z, Y, p)  # swap last two slots
                    assert abs(a + b) < 1e-9
    assert triggered >= 1

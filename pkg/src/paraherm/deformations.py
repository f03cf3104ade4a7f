"""B-transformations of para-Hermitian structures, weak-integrability and
compatibility checks, the twisted D-bracket and flux extraction.

Sign anchors, used consistently everywhere: omega_B = omega + 2b, and the
twist of the D-bracket is -(db)(X,Y,Z).  All flux signs inherit from these
two, and the two-way computations in `maurer_cartan_sides` and
`twisted_d_bracket_reference` are the tests that keep them honest.

Antisymmetrized component displays (H, Q, covariantized H) follow the global
unnormalized cyclic-sum convention of the geometry module.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .brackets import d_bracket, schouten_self
from .connections import flat_connection
from .errors import (
    MissingSplit,
    NotAntisymmetric,
    NotParaKahler,
    SingularFrame,
    Unsupported,
    WrongType,
)
from .geometry import (
    DerivedField,
    Field,
    JetTensor,
    TensorField,
    apply_endomorphism,
    exterior_derivative,
    invert_matrix_jets,
    tdot,
)
from .parastructure import ParaHermitianStructure, bigraded_part_at

__all__ = [
    "BTransformation", "b_transform", "b_minus_transform",
    "simultaneous_transform", "MCSides", "maurer_cartan_sides",
    "maurer_cartan_residual", "mc_form", "compatibility_residual",
    "twisted_d_bracket", "twisted_d_bracket_reference",
    "extract_fluxes", "FluxReport", "f_flux",
]


class BTransformation:
    """A shear of T+ toward T- (side=+1) or the mirror (side=-1).

    Carries the base structure S, the two-form data, and the derived maps:
    B (1,1), e^B = 1 + B, K_B = K + 2 sign B, and the transformed structure
    (eta, K_B) with its own projections and canonical connection.
    """

    def __init__(self, S: ParaHermitianStructure, b: Field, side=+1):
        self.S = S
        self.b = b
        self.side = side
        chart = S.chart

        def B_fn(p, k):
            bundle = S.at(p, k)
            bj = b.at(p, k).comps
            # B^M_I = b_{IN} eta^{NM}
            return np.transpose(tdot(bj, bundle.eta_inv.comps, ([1], [0])), (1, 0))

        self.B = DerivedField(chart, 1, 1, B_fn)
        self.K_B = S.K + self.B * (2.0 * side)
        self.e_B = DerivedField(chart, 1, 1, self._eB_comps)
        self.structure_B = ParaHermitianStructure(chart, S.eta, self.K_B)
        # Bivector with both slots raised: b^{MN} = b_{IJ} eta^{IM} eta^{JN}.

        def bivec_fn(p, k):
            bundle = S.at(p, k)
            bj = b.at(p, k).comps
            up1 = tdot(bundle.eta_inv.comps, bj, ([0], [0]))
            return tdot(up1, bundle.eta_inv.comps, ([1], [0]))

        self.b_bivector = DerivedField(chart, 2, 0, bivec_fn, sym="antisymmetric")
        self._pk_cache = {}

    def _eB_comps(self, p, k):
        ctx = self.S.chart.context(k)
        dim = self.S.chart.dim
        eye = np.empty((dim, dim), dtype=object)
        for i in range(dim):
            for j in range(dim):
                eye[i, j] = ctx.constant(1.0 if i == j else 0.0)
        return eye + self.B.at(p, k).comps

    @property
    def omega_B(self) -> Field:
        return self.S.omega + self.b * (2.0 * self.side)

    def sheared_projector(self) -> Field:
        """Projector onto the deformed eigenbundle (T+^B for side +1)."""
        return self.structure_B.projector(self.side)

    def base_parakahler_residual(self, point) -> float:
        """Cached pointwise para-Kahler residual of the base structure."""
        hit = self._pk_cache.get(point.key)
        if hit is None:
            dw = exterior_derivative(self.S.omega).at(point, 0).max_abs()
            scale = max(1.0, self.S.at(point, 0).eta.max_abs())
            res = max(
                dw / scale,
                self.S.integrability_residual(+1, point),
                self.S.integrability_residual(-1, point),
            )
            hit = self._pk_cache[point.key] = res
        return hit

    def require_parakahler(self, point, tol=1e-8):
        res = self.base_parakahler_residual(point)
        if res > tol:
            raise NotParaKahler(
                f"base structure fails para-Kahler residual {res:.3e} at {point}"
            )


def _type_residuals(S, b, sample, side):
    """(antisymmetry, wrong-type) residuals of the two-form at the sample."""
    anti = 0.0
    wrong = 0.0
    for p in sample:
        bj = b.at(p, 0)
        vals = bj.values()
        scale = max(1.0, float(np.max(np.abs(vals))))
        anti = max(anti, float(np.max(np.abs(vals + vals.T))) / scale)
        bundle = S.at(p, 0)
        Q = (bundle.Pm if side > 0 else bundle.Pp).values()
        wrong = max(
            wrong,
            float(np.max(np.abs(Q.T @ vals))) / scale,
            float(np.max(np.abs(vals @ Q))) / scale,
        )
    return anti, wrong


def b_transform(S, b: Field, sample=(), tol=1e-10) -> BTransformation:
    """Validate the two-form and build the sheared structure (plus side)."""
    anti, wrong = _type_residuals(S, b, sample, +1)
    if anti > tol:
        raise NotAntisymmetric(f"b antisymmetry residual {anti:.3e}")
    if wrong > tol:
        raise WrongType(f"b has components off the (+2,-0) type, residual {wrong:.3e}")
    return BTransformation(S, b, side=+1)


def b_minus_transform(S, beta: Field, sample=(), tol=1e-10) -> BTransformation:
    """Mirror shear of T- toward T+, driven by a type (+0,-2) two-form."""
    anti, wrong = _type_residuals(S, beta, sample, -1)
    if anti > tol:
        raise NotAntisymmetric(f"beta antisymmetry residual {anti:.3e}")
    if wrong > tol:
        raise WrongType(f"beta has components off the (+0,-2) type, residual {wrong:.3e}")
    return BTransformation(S, beta, side=-1)


def simultaneous_transform(S, b, beta):
    raise Unsupported("simultaneous B+ and B- transformations are not supported")


# --------------------------------------------------------------------------
# Weak integrability and the Maurer-Cartan equation
# --------------------------------------------------------------------------

@dataclass
class MCSides:
    d_bracket_side: float
    form_side: float

    @property
    def agreement(self) -> float:
        return abs(self.d_bracket_side - self.form_side)

    @property
    def residual(self) -> float:
        return abs(self.d_bracket_side)


def maurer_cartan_sides(T: BTransformation, X, Y, Z, point) -> MCSides:
    """Both sides of the weak-integrability identity, by disjoint code paths.

    Left: eta([P^B X, P^B Y]^D, P^B Z) through the D-bracket machinery.
    Right: the projected exterior derivative of b plus the eta-lowered
    Schouten bracket of the associated bivector.
    """
    S = T.S
    PB = T.sheared_projector()
    PBX = apply_endomorphism(PB, X)
    PBY = apply_endomorphism(PB, Y)
    br = d_bracket(S, PBX, PBY).at(point, 0).comps
    bundle = S.at(point, 0)
    pbz = PB.at(point, 0)
    zj = tdot(pbz.comps, Z.at(point, 0).comps, ([1], [0]))
    lhs = float(tdot(tdot(bundle.eta.comps, br, ([0], [0])), zj, ([0], [0]))[()].value)
    rhs = float(
        _mc_form_values(T, point, (X.at(point, 0).comps, Y.at(point, 0).comps,
                                   Z.at(point, 0).comps))
    )
    return MCSides(lhs, rhs)


def maurer_cartan_residual(T: BTransformation, X, Y, Z, point) -> float:
    """The weak-integrability obstruction eta([P^B X, P^B Y]^D, P^B Z).

    Computed through the D-bracket; `maurer_cartan_sides` exposes both this
    and the independently computed form side for the two-way test.
    """
    return maurer_cartan_sides(T, X, Y, Z, point).residual


def _mc_form_values(T, point, arg_comps):
    t = mc_form(T).at(point, 0).comps
    for arg in arg_comps:
        t = tdot(t, arg, ([0], [0]))
    return t[()].value


def mc_form(T: BTransformation) -> Field:
    """d_side b + (Lambda^3 eta)[b,b]_other as a (0,3) tensor field."""
    S = T.S
    db = exterior_derivative(T.b)
    sch = schouten_self(T.b_bivector, flat_connection(S.chart), check_torsion=False)
    m_plus = 3 if T.side > 0 else 0

    def fn(p, k):
        bundle = S.at(p, k)
        proj = bigraded_part_at(S, db.at(p, k), m_plus, bundle)
        sc = sch.at(p, k).comps
        low = tdot(bundle.eta.comps, sc, ([1], [0]))
        low = tdot(bundle.eta.comps, low, ([1], [1]))
        low = tdot(bundle.eta.comps, low, ([1], [2]))
        low = np.transpose(low, (2, 1, 0))
        return proj.comps + low

    return DerivedField(S.chart, 0, 3, fn, sym="antisymmetric")


def compatibility_residual(T: BTransformation, sample) -> float:
    """Max scale-normalized Maurer-Cartan component over the sample."""
    form = mc_form(T)
    worst = 0.0
    for p in sample:
        scale = max(1.0, _jet_scale(T.b.at(p, 1)))
        worst = max(worst, form.at(p, 0).max_abs() / scale)
    return worst


def _jet_scale(jt: JetTensor) -> float:
    worst = 0.0
    for idx in np.ndindex(jt.comps.shape):
        worst = max(worst, float(np.max(np.abs(jt.comps[idx].coeffs))))
    return worst


# --------------------------------------------------------------------------
# Twisted D-bracket
# --------------------------------------------------------------------------

def twisted_d_bracket(T: BTransformation, X: Field, Y: Field, pk_tol=1e-8) -> Field:
    """D-bracket of (eta, K_B) via its own canonical connection.

    Only defined here over a para-Kahler base; the gate is checked at every
    evaluation point.
    """
    inner = d_bracket(T.structure_B, X, Y)

    def fn(p, k):
        T.require_parakahler(p, tol=pk_tol)
        return inner.at(p, k).comps

    return DerivedField(T.S.chart, 1, 0, fn)


def twisted_d_bracket_reference(T: BTransformation, X: Field, Y: Field) -> Field:
    """Independent route: base D-bracket minus the db contraction,

    eta([X,Y]^{D,B}, Z) = eta([X,Y]^D, Z) - db(X,Y,Z).
    """
    S = T.S
    base = d_bracket(S, X, Y)
    db = exterior_derivative(T.b)

    def fn(p, k):
        bundle = S.at(p, k)
        dbj = db.at(p, k).comps
        xi = tdot(tdot(dbj, X.at(p, k).comps, ([0], [0])), Y.at(p, k).comps, ([0], [0]))
        corr = tdot(bundle.eta_inv.comps, xi, ([1], [0]))
        return base.at(p, k).comps - corr

    return DerivedField(S.chart, 1, 0, fn)


# --------------------------------------------------------------------------
# Fluxes
# --------------------------------------------------------------------------

@dataclass
class FluxReport:
    point: list
    h_flux: list
    r_flux: list
    q_flux: list
    covariantized_h: list
    h_frame: list
    q_frame: list
    reassembly_residual: float
    vanishing_residual: float
    cross_check_residual: float
    extras: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {
            "point": self.point,
            "h_flux": self.h_flux,
            "r_flux": self.r_flux,
            "q_flux": self.q_flux,
            "covariantized_h": self.covariantized_h,
            "h_frame": self.h_frame,
            "q_frame": self.q_frame,
            "reassembly_residual": self.reassembly_residual,
            "vanishing_residual": self.vanishing_residual,
            "cross_check_residual": self.cross_check_residual,
            "extras": self.extras,
        }


def extract_fluxes(T: BTransformation, point, pk_tol=1e-8) -> FluxReport:
    """Flux decomposition of db at a point, in both coframes.

    H is the (+3,-0) part of db with respect to the base structure, the dual
    R-flux is the triple-lowered Schouten bracket, the covariantized H-flux
    is their sum (equal to the (+3,-0)_B part), and the dual Q-flux is the
    (+2,-1)_B part read in the sheared frame.  The remaining bigraded parts
    of db must vanish, and the parts must reassemble db exactly.
    """
    if T.side != +1:
        raise Unsupported("flux extraction is defined for the plus-side shear")
    S = T.S
    chart = S.chart
    if chart.split is None:
        raise MissingSplit("flux extraction needs adapted (split) coordinates")
    T.require_parakahler(point, tol=pk_tol)
    n = chart.split
    dbj = exterior_derivative(T.b).at(point, 0)
    base_bundle = S.at(point, 0)
    b_bundle = T.structure_B.at(point, 0)

    H = bigraded_part_at(S, dbj, 3, base_bundle)
    sch = schouten_self(T.b_bivector, flat_connection(chart), check_torsion=False)
    sc = sch.at(point, 0).comps
    low = tdot(base_bundle.eta.comps, sc, ([1], [0]))
    low = tdot(base_bundle.eta.comps, low, ([1], [1]))
    low = tdot(base_bundle.eta.comps, low, ([1], [2]))
    R = JetTensor(0, 3, np.transpose(low, (2, 1, 0)), 0)
    covH = H + R

    parts = {m: bigraded_part_at(S, dbj, m, b_bundle) for m in range(4)}
    cross = (covH - parts[3]).max_abs()
    vanishing = max(parts[1].max_abs(), parts[0].max_abs())
    reassembly = (covH + parts[2] + parts[1] + parts[0] - dbj).max_abs()

    # Sheared frame: H'_i = (1 + B) e_i for the first n coordinates, V_j the rest.
    eB = T.e_B.at(point, 0).values()
    frame_plus = [eB[:, i] for i in range(n)]
    frame_minus = [np.eye(chart.dim)[n + j] for j in range(n)]
    covH_vals = covH.values()
    db_vals = dbj.values()
    h_frame = np.einsum(
        "abc,ai,bj,ck->ijk", covH_vals,
        np.stack(frame_plus, axis=1), np.stack(frame_plus, axis=1),
        np.stack(frame_plus, axis=1),
    )
    q_frame = np.einsum(
        "abc,ai,bj,ck->ijk", db_vals,
        np.stack(frame_minus, axis=1), np.stack(frame_plus, axis=1),
        np.stack(frame_plus, axis=1),
    )
    return FluxReport(
        point=[float(c) for c in point.coords],
        h_flux=H.values().tolist(),
        r_flux=R.values().tolist(),
        q_flux=parts[2].values().tolist(),
        covariantized_h=covH.values().tolist(),
        h_frame=h_frame.tolist(),
        q_frame=q_frame.tolist(),
        reassembly_residual=float(reassembly),
        vanishing_residual=float(vanishing),
        cross_check_residual=float(cross),
    )


def f_flux(S, A_block, point, order=0) -> np.ndarray:
    """Frame structure constants f^c_{ab} = eta([e_a, e_b]^D, e^c).

    `A_block` is an n x n array of chart scalars defining the frame
    e_a = A^i_a d_i on the plus block; the dual frame uses the pointwise
    inverse transpose on the minus block.
    """
    chart = S.chart
    if chart.split is None:
        raise MissingSplit("f-flux needs adapted (split) coordinates")
    n = chart.split
    A = TensorField(chart, 1, 1, _embed_block(chart, A_block, n))

    detA = np.linalg.det(A.at(point, 0).values()[:n, :n])
    if abs(detA) < 1e-12:
        raise SingularFrame(f"|det A| = {abs(detA):.3e} at {point}")

    def frame_vec(a):
        def fn(p, k):
            comps = A.at(p, k).comps
            out = np.empty(chart.dim, dtype=object)
            ctx = chart.context(k)
            for i in range(chart.dim):
                out[i] = comps[i, a] if i < n else ctx.zero()
            return out

        return DerivedField(chart, 1, 0, fn)

    def dual_vec(c):
        def fn(p, k):
            comps = A.at(p, k).comps[:n, :n]
            inv = invert_matrix_jets(comps)
            ctx = chart.context(k)
            out = np.empty(chart.dim, dtype=object)
            for i in range(chart.dim):
                out[i] = inv[c, i - n] if i >= n else ctx.zero()
            return out

        return DerivedField(chart, 1, 0, fn)

    out = np.zeros((n, n, n))
    bundle = S.at(point, order)
    for a in range(n):
        ea = frame_vec(a)
        for b in range(n):
            br = d_bracket(S, ea, frame_vec(b)).at(point, order).comps
            lowered = tdot(bundle.eta.comps, br, ([0], [0]))
            for c in range(n):
                ec = dual_vec(c).at(point, order).comps
                out[c, a, b] = float(tdot(lowered, ec, ([0], [0]))[()].value)
    return out


def _embed_block(chart, A_block, n):
    comps = np.empty((chart.dim, chart.dim), dtype=object)
    comps[...] = 0
    block = np.asarray(A_block, dtype=object)
    for i in range(n):
        for j in range(n):
            comps[i, j] = block[i, j]
    return comps

"""Bracket operations: connection-associated brackets, projected brackets,
the D- and C-brackets, leafwise Dorfman brackets, the Schouten bracket and
the Courant-axiom test harness.

Brackets of fields return fields again (closures over jets), so nested
brackets for Jacobi-defect measurements come for free; each nesting level
pulls jets of one order higher from its inputs, against the chart budget.

The flat coordinate D-bracket at the bottom is an oracle: it is coded
directly from the index formula and shares nothing with the connection path
it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .connections import Connection, require_torsionless
from .errors import NotIntegrable, RankMismatch
from .geometry import (
    DerivedField,
    Field,
    JetTensor,
    ScalarField,
    d_scalar,
    exterior_derivative,
    interior_product,
    jets_gradient,
    lie_bracket,
    lie_derivative,
    lie_derivative_scalar,
    tdot,
)
from .parastructure import GeneralizedVector, bigraded_part_at

__all__ = [
    "GeneralizedVectorField", "pairing", "standard_dorfman",
    "dorfman_via_connection", "associated_bracket", "projected_bracket",
    "d_bracket", "c_bracket", "dorfman_leafwise", "leafwise_d",
    "jacobi_defect", "schouten_self", "schouten_scalar",
    "courant_axiom_suite", "BracketReport", "flat_coordinate_dbracket",
]


# --------------------------------------------------------------------------
# Generalized vectors as fields
# --------------------------------------------------------------------------

@dataclass
class GeneralizedVectorField:
    """Section X + alpha of (T + T*) over a chart (or a foliation of it)."""

    vec: Field
    cov: Field
    side: int = 0

    @property
    def chart(self):
        return self.vec.chart

    def at(self, point, order=0) -> GeneralizedVector:
        return GeneralizedVector(
            self.vec.at(point, order), self.cov.at(point, order), self.side
        )

    def __sub__(self, other):
        return GeneralizedVectorField(
            self.vec - other.vec, self.cov - other.cov, self.side
        )

    def __add__(self, other):
        return GeneralizedVectorField(
            self.vec + other.vec, self.cov + other.cov, self.side
        )


def pairing(e1: GeneralizedVectorField, e2: GeneralizedVectorField) -> ScalarField:
    """<X + a, Y + b> = a(Y) + b(X)."""

    def fn(p, ctx):
        k = ctx.order
        a = tdot(e1.cov.at(p, k).comps, e2.vec.at(p, k).comps, ([0], [0]))
        b = tdot(e2.cov.at(p, k).comps, e1.vec.at(p, k).comps, ([0], [0]))
        return a[()] + b[()]

    return ScalarField(e1.chart, fn)


def standard_dorfman(e1, e2) -> GeneralizedVectorField:
    """[X,Y] + L_X beta - L_Y alpha + d(alpha(Y)) on the full chart."""
    vec = lie_bracket(e1.vec, e2.vec)
    inner = ScalarField(
        e1.chart,
        lambda p, ctx: tdot(
            e1.cov.at(p, ctx.order).comps, e2.vec.at(p, ctx.order).comps, ([0], [0])
        )[()],
    )
    cov = lie_derivative(e1.vec, e2.cov) - lie_derivative(e2.vec, e1.cov) + d_scalar(inner)
    return GeneralizedVectorField(vec, cov)


def dorfman_via_connection(C: Connection, e1, e2, check=False) -> GeneralizedVectorField:
    """Standard Dorfman via a torsionless connection:

    <[e1,e2], e3> = <nabla_{X1} e2 - nabla_{X2} e1, e3> + <nabla_{X3} e1, e2>.
    """
    chart = e1.chart

    def comps(p, k):
        if check:
            require_torsionless(C, p)
        gamma = C.gamma(p, k)
        x1 = e1.vec.at(p, k + 1).comps
        x2 = e2.vec.at(p, k + 1).comps
        a1 = e1.cov.at(p, k + 1).comps
        a2 = e2.cov.at(p, k + 1).comps
        vec = _covd_vec(gamma, x1, x2) - _covd_vec(gamma, x2, x1)
        cov = _covd_cov(gamma, x1, a2) - _covd_cov(gamma, x2, a1)
        # + <nabla_Z e1, e2> as a covector in Z:
        #   alpha2(nabla_Z X1) + (nabla_Z alpha1)(X2)
        dx1 = jets_gradient(x1)  # dx1[J, M]
        gx1 = tdot(gamma, x1, ([2], [0]))  # (M, J)
        covX = tdot(dx1 + np.transpose(gx1, (1, 0)), a2, ([1], [0]))
        da1 = jets_gradient(a1)  # da1[J, M]
        ga1 = tdot(gamma, a1, ([0], [0]))  # (J, M) = Gamma^m_{JM'} a_m
        covA = tdot(da1 - ga1, x2, ([1], [0]))
        return vec, cov + covX + covA

    vecf = DerivedField(chart, 1, 0, lambda p, k: comps(p, k)[0])
    covf = DerivedField(chart, 0, 1, lambda p, k: comps(p, k)[1])
    return GeneralizedVectorField(vecf, covf)


def _covd_vec(gamma, direction, x):
    dx = jets_gradient(x)
    return tdot(direction, dx, ([0], [0])) + tdot(
        tdot(gamma, direction, ([1], [0])), x, ([1], [0])
    )


def _covd_cov(gamma, direction, a):
    da = jets_gradient(a)
    return tdot(direction, da, ([0], [0])) - tdot(
        tdot(gamma, direction, ([1], [0])), a, ([0], [0])
    )


# --------------------------------------------------------------------------
# Brackets associated to a connection on an almost para-Hermitian manifold
# --------------------------------------------------------------------------

def _eta_contract(eta, w):
    return tdot(eta, w, ([0], [0]))


def _bracket_core(C, S, X, Y, project=None):
    """Shared engine: eta([X,Y], Z) = eta(nabla_X Y - nabla_Y X, Z) + eta(nabla_Z X, Y),
    with all three connection arguments optionally projected by `project`."""

    def fn(p, k):
        bundle = S.at(p, k)
        gamma = C.gamma(p, k)
        xj = X.at(p, k + 1).comps
        yj = Y.at(p, k + 1).comps
        if project is None:
            dirx, diry = xj, yj
        else:
            P = (bundle.Pp if project > 0 else bundle.Pm).comps
            dirx = tdot(P, xj, ([1], [0]))
            diry = tdot(P, yj, ([1], [0]))
        w = _covd_vec(gamma, dirx, yj) - _covd_vec(gamma, diry, xj)
        xi = _eta_contract(bundle.eta.comps, w)
        # c_I = eta(nabla_{d_I} X, Y)
        dx = jets_gradient(xj)                      # dx[I, M]
        gx = tdot(gamma, xj, ([2], [0]))            # gx[M, I]
        full = tdot(dx + np.transpose(gx, (1, 0)), _eta_contract(bundle.eta.comps, yj),
                    ([1], [0]))
        if project is None:
            xi = xi + full
        else:
            P = (bundle.Pp if project > 0 else bundle.Pm).comps
            xi = xi + tdot(P, full, ([0], [0]))
        return tdot(bundle.eta_inv.comps, xi, ([1], [0]))

    return DerivedField(S.chart, 1, 0, fn)


def associated_bracket(C: Connection, S, X: Field, Y: Field) -> Field:
    """The bracket associated to a connection, returned as a vector field."""
    return _bracket_core(C, S, X, Y, project=None)


def projected_bracket(C: Connection, S, sign, X: Field, Y: Field) -> Field:
    """P+- projected bracket: all three connection directions projected."""
    return _bracket_core(C, S, X, Y, project=sign)


def d_bracket(S, X: Field, Y: Field) -> Field:
    """D-bracket: the bracket associated to the canonical connection of S."""
    return associated_bracket(S.canonical, S, X, Y)


def c_bracket(S, X: Field, Y: Field) -> Field:
    """Skew part of the D-bracket."""
    return (d_bracket(S, X, Y) - d_bracket(S, Y, X)) * 0.5


# --------------------------------------------------------------------------
# Leafwise Dorfman bracket through rho
# --------------------------------------------------------------------------

def leafwise_d(S, side, obj):
    """Foliation-algebroid exterior derivative: all derivative slots projected.

    For scalars and one-forms this reduces to projecting every slot of the
    full coordinate d, which is what is implemented.
    """
    if isinstance(obj, ScalarField):
        P = S.projector(side)
        df = d_scalar(obj)

        def fn(p, k):
            return tdot(P.at(p, k).comps, df.at(p, k).comps, ([0], [0]))

        return DerivedField(S.chart, 0, 1, fn, sym="antisymmetric")
    if obj.rank == (0, 1):
        tagged = DerivedField(obj.chart, 0, 1, lambda p, k: obj.at(p, k).comps,
                              sym="antisymmetric")
        dxi = exterior_derivative(tagged)

        def fn2(p, k):
            b = S.at(p, k)
            return bigraded_part_at(
                S, dxi.at(p, k), 2 if side > 0 else 0, b
            ).comps

        return DerivedField(S.chart, 0, 2, fn2, sym="antisymmetric")
    raise RankMismatch("leafwise_d handles scalars and one-forms")


def leafwise_lie(S, side, X: Field, xi: Field) -> Field:
    """L^E_X xi = d_E(xi(X)) + iota_X d_E xi on the foliation algebroid."""
    inner = ScalarField(
        S.chart,
        lambda p, ctx: tdot(xi.at(p, ctx.order).comps, X.at(p, ctx.order).comps,
                            ([0], [0]))[()],
    )
    return leafwise_d(S, side, inner) + interior_product(X, leafwise_d(S, side, xi))


def dorfman_leafwise(S, side, e1: GeneralizedVectorField, e2: GeneralizedVectorField,
                     integrability_tol=1e-8) -> GeneralizedVectorField:
    """Dorfman bracket of the foliation Courant algebroid on the `side` leaf.

    Raises NotIntegrable at evaluation points where the corresponding
    Nijenhuis residual exceeds the tolerance.
    """
    vec = lie_bracket(e1.vec, e2.vec)
    inner = ScalarField(
        S.chart,
        lambda p, ctx: tdot(e1.cov.at(p, ctx.order).comps,
                            e2.vec.at(p, ctx.order).comps, ([0], [0]))[()],
    )
    cov = (
        leafwise_lie(S, side, e1.vec, e2.cov)
        - leafwise_lie(S, side, e2.vec, e1.cov)
        + leafwise_d(S, side, inner)
    )

    def checked_vec(p, k):
        res = S.integrability_residual(side, p)
        if res > integrability_tol:
            raise NotIntegrable(
                f"side {side:+d} Nijenhuis residual {res:.3e} at {p}"
            )
        return vec.at(p, k).comps

    return GeneralizedVectorField(
        DerivedField(S.chart, 1, 0, checked_vec), cov, side
    )


# --------------------------------------------------------------------------
# Jacobi defect and Schouten bracket
# --------------------------------------------------------------------------

def jacobi_defect(bracket, X, Y, Z, point) -> float:
    """Max-abs of [X,[Y,Z]] - [Y,[X,Z]] - [[X,Y],Z] at a point."""
    defect = bracket(X, bracket(Y, Z)) - bracket(Y, bracket(X, Z)) - bracket(
        bracket(X, Y), Z
    )
    return defect.at(point, 0).max_abs()


def schouten_self(beta: Field, C: Connection, check_torsion=True) -> Field:
    """[beta, beta] of a bivector via a torsionless connection:

    [beta,beta](l,m,n) = sum_cycl (nabla_{beta(l)} beta)(m,n),
    returned as a (3,0) field.  No 1/2 normalization.
    """
    if beta.rank != (2, 0):
        raise RankMismatch("schouten_self expects a (2,0) bivector")

    def fn(p, k):
        if check_torsion:
            require_torsionless(C, p)
        gamma = C.gamma(p, k)
        bj = beta.at(p, k + 1).comps
        db = jets_gradient(bj)  # db[M, J, K]
        corr1 = np.moveaxis(tdot(gamma, bj, ([2], [0])), 1, 0)  # (M, J, K)
        corr2 = np.moveaxis(tdot(gamma, bj, ([2], [1])), 1, 0)
        corr2 = np.transpose(corr2, (0, 2, 1))
        D = db + corr1 + corr2
        # S1[I, J, K] = beta^{IM} (nabla_M beta)^{JK}: the direction slot of
        # beta(lambda) is the second one, lambda contracts the first.
        S1 = tdot(bj, D, ([1], [0]))
        return S1 + np.transpose(S1, (1, 2, 0)) + np.transpose(S1, (2, 0, 1))

    return DerivedField(beta.chart, 3, 0, fn)


def schouten_scalar(beta, C, lam, mu, nu, point, order=0, check_torsion=True) -> float:
    """[beta,beta](lam, mu, nu) for covector values at a point."""
    t = schouten_self(beta, C, check_torsion=check_torsion).at(point, order).comps
    for covec in (lam, mu, nu):
        arr = covec.comps if isinstance(covec, JetTensor) else np.asarray(covec, dtype=object)
        t = tdot(t, arr, ([0], [0]))
    return float(t[()].value)


# --------------------------------------------------------------------------
# Courant axiom suite
# --------------------------------------------------------------------------

@dataclass
class BracketReport:
    axiom1: float
    axiom2: float
    axiom3: float
    tol: float
    n_points: int
    seed: int
    witnesses: dict = dc_field(default_factory=dict)

    def passed(self, expect_jacobi_failure=False) -> bool:
        ok12 = self.axiom1 <= self.tol and self.axiom2 <= self.tol
        if expect_jacobi_failure:
            return ok12 and self.axiom3 > self.tol
        return ok12 and self.axiom3 <= self.tol

    def to_dict(self):
        return {
            "axiom1": self.axiom1, "axiom2": self.axiom2, "axiom3": self.axiom3,
            "tol": self.tol, "n_points": self.n_points, "seed": self.seed,
            "witnesses": self.witnesses,
        }


def courant_axiom_suite(bracket, anchor, pair, elements, sample, tol=1e-9,
                        seed=0, skip_pairing=False) -> BracketReport:
    """Residuals of the three Courant axioms for a bracket/anchor/pairing triple.

    `elements` is a pool of test sections; axioms are evaluated on ordered
    triples drawn deterministically from the pool at every sample point.
    `skip_pairing` drops axioms 1 and 2 (for the plain Lie bracket, whose
    pairing is degenerate).
    """
    worst = {1: 0.0, 2: 0.0, 3: 0.0}
    witnesses = {}
    triples = []
    n = len(elements)
    for i in range(n):
        triples.append((elements[i], elements[(i + 1) % n], elements[(i + 2) % n]))
    for p in sample:
        for ti, (X, Y, Z) in enumerate(triples):
            if not skip_pairing:
                lhs = lie_derivative_scalar(anchor(X), pair(Y, Z)).value(p)
                r1 = lhs - pair(bracket(X, Y), Z).value(p) - pair(Y, bracket(X, Z)).value(p)
                r2 = pair(bracket(X, X), Y).value(p) - 0.5 * lie_derivative_scalar(
                    anchor(Y), pair(X, X)
                ).value(p)
            else:
                r1 = r2 = 0.0
            r3 = jacobi_defect(bracket, X, Y, Z, p)
            for axiom, val in ((1, abs(r1)), (2, abs(r2)), (3, abs(r3))):
                if val > worst[axiom]:
                    worst[axiom] = val
                    witnesses[axiom] = {
                        "point": [float(c) for c in p.coords], "triple": ti,
                        "residual": val,
                    }
    return BracketReport(
        axiom1=worst[1], axiom2=worst[2], axiom3=worst[3], tol=tol,
        n_points=len(list(sample)), seed=seed,
        witnesses={str(k): v for k, v in witnesses.items()},
    )


# --------------------------------------------------------------------------
# Flat coordinate oracle (test-only routine, independently coded)
# --------------------------------------------------------------------------

def flat_coordinate_dbracket(chart, eta_matrix, X: Field, Y: Field) -> Field:
    """The coordinate D-bracket on a flat chart with constant metric:

    [X,Y]^J = X^I d_I Y^J - Y^I d_I X^J + eta_{IL} eta^{KJ} Y^I d_K X^L.

    Deliberately written from the raw index formula with an explicit constant
    metric matrix, sharing no code with the connection-based path.
    """
    eta = np.asarray(eta_matrix, dtype=float)
    eta_inv = np.linalg.inv(eta)
    dim = chart.dim

    def fn(p, k):
        ctx = chart.context(k)
        xj = X.at(p, k + 1).comps
        yj = Y.at(p, k + 1).comps
        out = np.empty(dim, dtype=object)
        for J in range(dim):
            acc = ctx.zero()
            for I in range(dim):
                acc = acc + xj[I] * yj[J].partial(I) - yj[I] * xj[J].partial(I)
                for K in range(dim):
                    for L in range(dim):
                        c = eta[I, L] * eta_inv[K, J]
                        if c != 0.0:
                            acc = acc + c * (yj[I] * xj[L].partial(K))
            out[J] = acc
        return out

    return DerivedField(chart, 1, 0, fn)

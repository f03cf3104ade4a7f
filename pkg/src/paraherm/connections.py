"""Affine connections on a chart: Levi-Civita, canonical, torsion, curvature.

A connection carries an evaluation procedure for its Christoffel symbols
rather than closed-form expressions: Levi-Civita needs the pointwise inverse
metric and the canonical connection needs projector insertions, both of which
are rational in the inputs and exact under jet arithmetic.

Index conventions: gamma[k, i, j] = Gamma^k_{ij} with i the differentiation
direction and j the argument, nabla_{d_i} d_j = Gamma^k_{ij} d_k.  The
curvature sign is fixed so that on the tangent-bundle model the horizontal
frame satisfies [H_i, H_j] = R^k_{ijl} v^l V_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotTorsionless
from .geometry import (
    DerivedField,
    Field,
    JetTensor,
    jets_gradient,
    metric_inverse_at,
    tdot,
)

__all__ = [
    "Connection", "flat_connection", "levi_civita", "from_christoffels",
    "canonical_connection", "canonical_connection_contorsion",
    "covariant_derivative", "covariant_differential", "torsion", "curvature",
    "check_adapted", "AdaptedReport",
]


class Connection:
    """Christoffel symbols as a cached evaluation procedure over jets."""

    def __init__(self, chart, fn, provenance="user_supplied"):
        self.chart = chart
        self._fn = fn
        self.provenance = provenance
        self._cache = {}

    def gamma(self, point, order):
        key = (point.key, order)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._fn(point, order)
        return hit

    def __repr__(self):
        return f"Connection({self.provenance}, chart={self.chart.coord_names})"


def flat_connection(chart) -> Connection:
    def fn(point, order):
        ctx = chart.context(order)
        out = np.empty((chart.dim,) * 3, dtype=object)
        out[...] = ctx.zero()
        return out

    return Connection(chart, fn, provenance="flat")


def from_christoffels(chart, comps, provenance="user_supplied") -> Connection:
    """Connection from an explicit Gamma^k_{ij} array of chart scalars."""
    from .geometry import TensorField

    tf = TensorField(chart, 1, 2, comps)

    def fn(point, order):
        return tf.at(point, order).comps

    return Connection(chart, fn, provenance=provenance)


def levi_civita(eta: Field) -> Connection:
    """Gamma^k_{ij} = 1/2 eta^{kl} (d_i eta_{jl} + d_j eta_{il} - d_l eta_{ij})."""
    chart = eta.chart

    def fn(point, order):
        ej, inv = metric_inverse_at(eta, point, order + 1)
        de = jets_gradient(ej.comps)  # de[a, b, c] = d_a eta_{bc}
        # bracket[i, j, l] = d_i eta_{jl} + d_j eta_{il} - d_l eta_{ij}
        bracket = de + np.transpose(de, (1, 0, 2)) - np.transpose(de, (1, 2, 0))
        gamma = 0.5 * tdot(inv.comps, bracket, ([1], [2]))  # (k, i, j)
        return _trunc(gamma, order)

    return Connection(chart, fn, provenance="levi_civita")


def _trunc(comps, order):
    out = np.empty(comps.shape, dtype=object)
    for idx in np.ndindex(comps.shape):
        out[idx] = comps[idx].truncate(min(order, comps[idx].ctx.order))
    return out


def canonical_connection(S) -> Connection:
    """Projector form: nabla^c_X Y = P+ nablao_X (P+ Y) + P- nablao_X (P- Y)."""
    lc = S.levi_civita

    def fn(point, order):
        g0 = lc.gamma(point, order)
        bundle = S.at(point, order + 1)
        out = None
        for P in (bundle.Pp.comps, bundle.Pm.comps):
            dP = jets_gradient(P)  # dP[i, m, j] = d_i P^m_j
            first = tdot(P, dP, ([1], [1]))                        # (k, i, j)
            second = tdot(tdot(P, g0, ([1], [0])), P, ([2], [0]))  # (k, i, j)
            term = first + second
            out = term if out is None else out + term
        return _trunc(out, order)

    return Connection(S.chart, fn, provenance="canonical")


def canonical_connection_contorsion(S) -> Connection:
    """Contorsion form: eta(nabla^c_X Y, Z) = eta(nablao_X Y, Z) - 1/2 nablao_X omega(Y, KZ).

    Independent of the projector form; the two are compared in tests.
    """
    lc = S.levi_civita

    def fn(point, order):
        g0 = lc.gamma(point, order)
        bundle = S.at(point, order + 1)
        omega = bundle.omega.comps
        dw = jets_gradient(omega)  # dw[i, j, l]
        # Phi[i, j, l] = (nablao_i omega)_{jl}
        phi = (
            dw
            - tdot(g0, omega, ([0], [0]))                        # Gamma^a_{ij} omega_{al}
            - np.transpose(tdot(g0, omega, ([0], [1])), (0, 2, 1))  # Gamma^a_{il} omega_{ja}
        )
        corr = tdot(phi, bundle.K.comps, ([2], [0]))  # corr[i, j, l] = Phi_{ijm} K^m_l
        gamma = g0 - 0.5 * tdot(bundle.eta_inv.comps, corr, ([0], [2]))  # (k, i, j)
        return _trunc(gamma, order)

    return Connection(S.chart, fn, provenance="canonical")


# --------------------------------------------------------------------------
# Derivatives, torsion, curvature
# --------------------------------------------------------------------------

def _covd_comps(gamma, direction, tj, r, s):
    """nabla_V T at one point: V^I (d_I T + Gamma corrections)."""
    grad = jets_gradient(tj)             # grad[I, ...]
    out = tdot(direction, grad, ([0], [0]))
    gdir = tdot(direction, gamma, ([0], [1]))  # gdir[k, m] = V^I Gamma^k_{Im}
    for axis in range(r):
        out = out + np.moveaxis(tdot(gdir, tj, ([1], [axis])), 0, axis)
    for axis in range(r, r + s):
        out = out - np.moveaxis(tdot(gdir, tj, ([0], [axis])), 0, axis)
    return out


def covariant_derivative(C: Connection, X: Field, T: Field) -> Field:
    """nabla_X T as a derived field of the same rank."""

    def fn(p, k):
        gamma = C.gamma(p, k)
        xj = X.at(p, k).comps
        tj = T.at(p, k + 1).comps
        return _covd_comps(gamma, xj, tj, T.r, T.s)

    return DerivedField(T.chart, T.r, T.s, fn)


def covariant_differential(C: Connection, T: Field) -> Field:
    """Total nabla T, rank (r, s+1); the derivative slot is the first covariant axis."""

    def fn(p, k):
        gamma = C.gamma(p, k)
        tj = T.at(p, k + 1).comps
        grad = jets_gradient(tj)  # grad[I, ...]
        out = grad
        for axis in range(T.r):
            # + Gamma^A_{IM} T^{..M..}
            corr = tdot(gamma, tj, ([2], [axis]))      # (A, I, rest)
            corr = np.moveaxis(corr, 1, 0)             # (I, A, rest)
            out = out + np.moveaxis(corr, 1, axis + 1)
        for axis in range(T.r, T.r + T.s):
            corr = tdot(gamma, tj, ([0], [axis]))      # (I, B, rest)
            out = out - np.moveaxis(corr, 1, axis + 1)
        # Move the derivative index to the first covariant slot.
        return np.moveaxis(out, 0, T.r)

    return DerivedField(T.chart, T.r, T.s + 1, fn)


def torsion(C: Connection) -> Field:
    """T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji}, a (1,2) tensor field."""

    def fn(p, k):
        g = C.gamma(p, k)
        return g - np.transpose(g, (0, 2, 1))

    return DerivedField(C.chart, 1, 2, fn)


def torsion_residual(C: Connection, point, order=0) -> float:
    return JetTensor(1, 2, torsion(C).at(point, order).comps, order).max_abs()


def require_torsionless(C: Connection, point, tol=1e-10):
    res = torsion_residual(C, point)
    if res > tol:
        raise NotTorsionless(f"torsion residual {res:.3e} exceeds {tol}")


def curvature(C: Connection) -> Field:
    """R^k_{ijl} with the sign fixed by [H_i,H_j] = R^k_{ijl} v^l V_k."""

    def fn(p, k):
        g = C.gamma(p, k + 1)
        dg = jets_gradient(g)        # dg[a, k, i, j] = d_a Gamma^k_{ij}
        gg = tdot(g, g, ([2], [0]))  # gg[k, a, b, c] = Gamma^k_{am} Gamma^m_{bc}
        # R^k_{ijl} = d_j Gamma^k_{il} - d_i Gamma^k_{jl}
        #           + Gamma^k_{jm} Gamma^m_{il} - Gamma^k_{im} Gamma^m_{jl}
        term1 = np.transpose(dg, (1, 2, 0, 3))   # out[k,i,j,l] = dg[j,k,i,l]
        term2 = np.transpose(dg, (1, 0, 2, 3))   # out[k,i,j,l] = dg[i,k,j,l]
        term3 = np.transpose(gg, (0, 2, 1, 3))   # out[k,i,j,l] = gg[k,j,i,l]
        term4 = gg
        out = term1 - term2 + term3 - term4
        return _trunc(out, k)

    return DerivedField(C.chart, 1, 3, fn)


# --------------------------------------------------------------------------
# Adapted-connection checker (four conditions, per side)
# --------------------------------------------------------------------------

@dataclass
class AdaptedReport:
    side: str
    conditions: dict
    seed: int
    n_points: int
    n_vectors: int
    tol: float
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.conditions.values())

    def to_dict(self):
        return {
            "side": self.side,
            "conditions": {str(k): v for k, v in self.conditions.items()},
            "seed": self.seed,
            "n_points": self.n_points,
            "n_vectors": self.n_vectors,
            "tol": self.tol,
            "passed": self.passed,
            "witnesses": self.witnesses,
        }


def _nabla_eta_values(C, S, point):
    bundle = S.at(point, 1)
    gamma = C.gamma(point, 0)
    ev = bundle.eta.comps
    de = jets_gradient(ev)  # de[i, j, k]
    corr1 = tdot(gamma, ev, ([0], [0]))                           # Gamma^m_{ij} eta_{mk}
    corr2 = np.transpose(tdot(gamma, ev, ([0], [1])), (0, 2, 1))  # Gamma^m_{ik} eta_{jm}
    nabla = de - corr1 - corr2
    return _values(nabla)


def _values(comps):
    out = np.empty(comps.shape)
    for idx in np.ndindex(comps.shape):
        out[idx] = comps[idx].value
    return out


def check_adapted(C: Connection, S, side="p", sample=(), n_vectors=20,
                  seed=2024, tol=1e-9) -> AdaptedReport:
    """Residuals of the four adapted-connection conditions over random frames.

    Sections of the eigenbundles are realized as projector images of
    constant-coefficient vectors, jet-extended; conditions (1)-(3) are
    tensorial and condition (4) is extension-independent on isotropic
    eigenbundles, so this quantification is exhaustive for multilinear
    conditions.
    """
    rng = np.random.default_rng(seed)
    dim = S.chart.dim
    worst = {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}
    witnesses = []
    for point in sample:
        bundle = S.at(point, 1)
        Pp = bundle.Pp.comps
        Pm = bundle.Pm.comps
        if side == "n":
            Pp, Pm = Pm, Pp
        Ppv = _values(Pp)
        Pmv = _values(Pm)
        etav = _values(bundle.eta.comps)
        gamma = C.gamma(point, 0)
        gv = _values(gamma)
        nabla_eta = _nabla_eta_values(C, S, point)
        tors = gv - np.transpose(gv, (0, 2, 1))
        dPp = _values(jets_gradient(Pp))  # dPp[i, a, b]
        dPm = _values(jets_gradient(Pm))
        scale = max(1.0, np.max(np.abs(etav)), np.max(np.abs(gv)))
        point_worst = dict.fromkeys(worst, 0.0)
        for _ in range(n_vectors):
            u, v, w = rng.uniform(-1.0, 1.0, (3, dim))
            xp = Ppv @ u
            yp = Ppv @ v
            zp = Ppv @ w
            ym = Pmv @ v
            zm = Pmv @ w
            # (1) nabla_{x+} eta = 0
            r1 = np.einsum("ijk,i,j,k->", nabla_eta, xp, v, w)
            # (2) P+ nabla_{x+} (P- v) = 0
            dy = np.einsum("iab,b->ia", dPm, v)  # d_i (P- v)^a
            w2 = np.einsum("i,ia->a", xp, dy) + np.einsum("kim,i,m->k", gv, xp, ym)
            r2 = np.max(np.abs(Ppv @ w2))
            # (3) eta(T(x+, y+), z-) = 0
            tv = np.einsum("kij,i,j->k", tors, xp, yp)
            r3 = etav @ zm @ tv
            # (4) eta(T(x+, y+), z+) + eta(nabla_{z+} x+, y+) = 0
            dx = np.einsum("iab,b->ia", dPp, u)
            nz = np.einsum("i,ia->a", zp, dx) + np.einsum("kim,i,m->k", gv, zp, xp)
            r4 = etav @ zp @ tv + etav @ yp @ nz
            for cond, val in ((1, abs(r1)), (2, r2), (3, abs(r3)), (4, abs(r4))):
                point_worst[cond] = max(point_worst[cond], val / scale)
        for cond, val in point_worst.items():
            if val > worst[cond]:
                worst[cond] = val
            if val > tol:
                witnesses.append(
                    {"condition": cond, "point": [float(c) for c in point.coords],
                     "residual": val}
                )
    return AdaptedReport(
        side=side, conditions=worst, seed=seed, n_points=len(list(sample)),
        n_vectors=n_vectors, tol=tol, witnesses=witnesses,
    )

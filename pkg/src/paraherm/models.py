"""Built-in example manifolds.

`build_flat(n)` is the constant-coefficient model on R^{2n} in adapted
coordinates (x^1..x^n, xt1..xtn): off-diagonal identity metric blocks and
K = diag(1, -1), a para-Kahler structure with vanishing Christoffels.

`build_tm(g, coords)` realizes the tangent bundle of an n-dimensional
Riemannian base (M, g) as a chart (x^i, v^i) with the horizontal frames of
the Levi-Civita connection of g:

    H_i = d_i - Gamma^k_{ij} v^j d_{v^k},   V_i = d_{v^i},
    eta(H_i, V_j) = g_ij,  eta(H,H) = eta(V,V) = 0,
    omega = g_ij H^i wedge V^j,  K = H_i (x) H^i - V_i (x) V^i.

The Christoffels of g are evaluation procedures over jets; the textbook
closed forms for specific metrics live in the tests as independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deformations import BTransformation, b_transform
from .errors import NotParaKahler, NotPositiveDefinite, RankMismatch
from .geometry import (
    Chart,
    DerivedField,
    Field,
    TensorField,
    constant_field,
    invert_matrix_jets,
    tdot,
)
from .parastructure import ParaHermitianStructure

__all__ = [
    "FlatModel", "TangentBundleModel", "build_flat", "build_tm",
    "b_field_on_tm", "sphere_base", "BUILTIN_MODELS",
]


@dataclass
class FlatModel:
    n: int
    chart: Chart
    S: ParaHermitianStructure
    eta_matrix: np.ndarray
    K_matrix: np.ndarray

    def default_box(self):
        return [(-1.0, 1.0)] * self.chart.dim

    def point_ok(self, coords):
        return True


def build_flat(n: int, jet_order=3, coord_names=None) -> FlatModel:
    if coord_names is None:
        coord_names = [f"x{i + 1}" for i in range(n)] + [f"xt{i + 1}" for i in range(n)]
    chart = Chart(coord_names, split=n, jet_order=jet_order)
    eye = np.eye(n)
    eta = np.block([[np.zeros((n, n)), eye], [eye, np.zeros((n, n))]])
    K = np.block([[eye, np.zeros((n, n))], [np.zeros((n, n)), -eye]])
    S = ParaHermitianStructure(
        chart,
        constant_field(chart, eta, 0, 2, sym="symmetric"),
        constant_field(chart, K, 1, 1),
    )
    return FlatModel(n=n, chart=chart, S=S, eta_matrix=eta, K_matrix=K)


class TangentBundleModel:
    def __init__(self, n, chart, g_field, S, frames_h, frames_v, coframes_h,
                 coframes_v, gamma_g, riemann_g, point_ok=None):
        self.n = n
        self.chart = chart
        self.g = g_field
        self.S = S
        self.H = frames_h
        self.V = frames_v
        self.H_co = coframes_h
        self.V_co = coframes_v
        self.gamma_g = gamma_g
        self.riemann_g = riemann_g
        self._point_ok = point_ok

    def default_box(self):
        return [(-1.0, 1.0)] * self.chart.dim

    def point_ok(self, coords):
        return True if self._point_ok is None else self._point_ok(coords)


def build_tm(g_sources, base_coords, jet_order=3, sample=(), point_ok=None,
             v_prefix="v") -> TangentBundleModel:
    """Assemble the tangent-bundle model for a base metric g.

    `g_sources` is an n x n nested sequence of chart scalars in the base
    coordinates; `sample` points (on the full 2n chart) are used for the
    positive-definiteness check of g.
    """
    n = len(base_coords)
    coord_names = list(base_coords) + [f"{v_prefix}{i + 1}" for i in range(n)]
    chart = Chart(coord_names, split=n, jet_order=jet_order)
    g_arr = np.asarray(g_sources, dtype=object)
    if g_arr.shape != (n, n):
        raise RankMismatch(f"base metric must be {n} x {n}")
    g_field = _block_field(chart, g_arr, n)

    gamma_cache = {}

    def gamma_g(point, order):
        """Gamma^k_{ij} of g, base indices only, as jets on the 2n chart."""
        key = (point.key, order)
        hit = gamma_cache.get(key)
        if hit is not None:
            return hit
        gj = g_field.at(point, order + 1).comps[:n, :n]
        inv = invert_matrix_jets(gj)
        dg = np.empty((n, n, n), dtype=object)  # dg[a, b, c] = d_a g_{bc}
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    dg[a, b, c] = gj[b, c].partial(a)
        bracket = dg + np.transpose(dg, (1, 0, 2)) - np.transpose(dg, (1, 2, 0))
        gamma = 0.5 * tdot(inv, bracket, ([1], [2]))  # (k, i, j)
        gamma = _trunc(gamma, order)
        gamma_cache[key] = gamma
        return gamma

    def riemann_g(point, order=0):
        """R^k_{ijl} of g with the sign fixed by [H_i,H_j] = R^k_{ijl} v^l V_k."""
        g1 = gamma_g(point, order + 1)
        dg = np.empty((n, n, n, n), dtype=object)
        for a in range(n):
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        dg[a, k, i, j] = g1[k, i, j].partial(a)
        gg = tdot(g1, g1, ([2], [0]))
        out = (
            np.transpose(dg, (1, 2, 0, 3))
            - np.transpose(dg, (1, 0, 2, 3))
            + np.transpose(gg, (0, 2, 1, 3))
            - gg
        )
        return _trunc(out, order)

    def frame_h(i):
        def fn(p, k):
            ctx = chart.context(k)
            gamma = gamma_g(p, k)
            out = np.empty(2 * n, dtype=object)
            for a in range(n):
                out[a] = ctx.constant(1.0 if a == i else 0.0)
            for kk in range(n):
                acc = ctx.zero()
                for j in range(n):
                    acc = acc - gamma[kk, i, j] * ctx.coordinate(n + j, p.coords[n + j])
                out[n + kk] = acc
            return out

        return DerivedField(chart, 1, 0, fn)

    def coframe_v(i):
        def fn(p, k):
            ctx = chart.context(k)
            gamma = gamma_g(p, k)
            out = np.empty(2 * n, dtype=object)
            for kk in range(n):
                acc = ctx.zero()
                for j in range(n):
                    acc = acc + gamma[i, kk, j] * ctx.coordinate(n + j, p.coords[n + j])
                out[kk] = acc
            for a in range(n):
                out[n + a] = ctx.constant(1.0 if a == i else 0.0)
            return out

        return DerivedField(chart, 0, 1, fn)

    frames_h = [frame_h(i) for i in range(n)]
    frames_v = [constant_field(chart, np.eye(2 * n)[n + i], 1, 0) for i in range(n)]
    coframes_h = [constant_field(chart, np.eye(2 * n)[i], 0, 1) for i in range(n)]
    coframes_v = [coframe_v(i) for i in range(n)]

    def eta_fn(p, k):
        gj = g_field.at(p, k).comps[:n, :n]
        vco = [coframes_v[i].at(p, k).comps for i in range(n)]
        hco = [coframes_h[i].at(p, k).comps for i in range(n)]
        out = np.empty((2 * n, 2 * n), dtype=object)
        ctx = chart.context(k)
        for A in range(2 * n):
            for Bax in range(2 * n):
                acc = ctx.zero()
                for i in range(n):
                    for j in range(n):
                        acc = acc + gj[i, j] * (
                            vco[i][A] * hco[j][Bax] + hco[i][A] * vco[j][Bax]
                        )
                out[A, Bax] = acc
        return out

    def K_fn(p, k):
        hs = [frames_h[i].at(p, k).comps for i in range(n)]
        vs = [frames_v[i].at(p, k).comps for i in range(n)]
        hco = [coframes_h[i].at(p, k).comps for i in range(n)]
        vco = [coframes_v[i].at(p, k).comps for i in range(n)]
        out = np.empty((2 * n, 2 * n), dtype=object)
        ctx = chart.context(k)
        for A in range(2 * n):
            for Bax in range(2 * n):
                acc = ctx.zero()
                for i in range(n):
                    acc = acc + hs[i][A] * hco[i][Bax] - vs[i][A] * vco[i][Bax]
                out[A, Bax] = acc
        return out

    eta = DerivedField(chart, 0, 2, eta_fn, sym="symmetric")
    K = DerivedField(chart, 1, 1, K_fn)
    S = ParaHermitianStructure(chart, eta, K)
    model = TangentBundleModel(
        n, chart, g_field, S, frames_h, frames_v, coframes_h, coframes_v,
        gamma_g, riemann_g, point_ok=point_ok,
    )
    for p in sample:
        gv = g_field.at(p, 0).values()[:n, :n]
        try:
            np.linalg.cholesky(gv)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"base metric not positive definite at {p}")
    return model


def _block_field(chart, g_arr, n):
    comps = np.empty((2 * n, 2 * n), dtype=object)
    comps[...] = 0
    for i in range(n):
        for j in range(n):
            comps[i, j] = g_arr[i, j]
    return TensorField(chart, 0, 2, comps, sym="symmetric")


def _trunc(comps, order):
    out = np.empty(comps.shape, dtype=object)
    for idx in np.ndindex(comps.shape):
        out[idx] = comps[idx].truncate(min(order, comps[idx].ctx.order))
    return out


def flatness_residual(model: TangentBundleModel, sample) -> float:
    """Max |Riemann of g| over the sample (scale-normalized)."""
    worst = 0.0
    for p in sample:
        r = model.riemann_g(p, 0)
        vals = np.empty(r.shape)
        for idx in np.ndindex(r.shape):
            vals[idx] = r[idx].value
        gv = model.g.at(p, 0).values()
        worst = max(worst, float(np.max(np.abs(vals))) / max(1.0, float(np.max(np.abs(gv)))))
    return worst


def b_field_on_tm(model: TangentBundleModel, b_sources, sample=(),
                  flat_tol=1e-9) -> BTransformation:
    """B-transformation of the tangent-bundle model by b = b_ij dx^i ^ dx^j.

    Requires a flat base metric (checked through the curvature procedure);
    `b_sources` is the n x n lower-block component array, functions of both
    x and v.
    """
    res = flatness_residual(model, sample)
    if res > flat_tol:
        raise NotParaKahler(f"base metric is not flat: curvature residual {res:.3e}")
    n = model.n
    arr = np.asarray(b_sources, dtype=object)
    if arr.shape != (n, n):
        raise RankMismatch(f"b block must be {n} x {n}")
    comps = np.empty((2 * n, 2 * n), dtype=object)
    comps[...] = 0
    for i in range(n):
        for j in range(n):
            comps[i, j] = arr[i, j]
    b = TensorField(model.chart, 0, 2, comps, sym="antisymmetric")
    return b_transform(model.S, b, sample=sample)


def sphere_base():
    """Base data for the round 2-sphere: g = diag(1, sin^2 th) in (th, ph)."""
    coords = ["th", "ph"]
    g = [["1", "0"], ["0", "sin(th)^2"]]

    def point_ok(c):
        return abs(np.sin(c[0])) > 0.05

    return g, coords, point_ok


BUILTIN_MODELS = ("flat", "tangent_bundle")

"""Chart-based manifolds, vector bundles, and the test-object toolbox.

Manifolds here are finite atlases of open boxes in R^n glued by transition
maps from a small catalog (identity, affine, polar).  That is enough for
planes, cylinders, tori, and disk-like patches at desk scale, and it keeps
every geometric question concrete: points are (chart id, coordinates),
compact sets are boxes strictly inside a chart, and the Riemannian distance
is a shortest-polyline upper bound that converges under refinement.

The module also builds the finite test objects that every characterization
check quantifies over: smooth bump functions with analytic jets to order 3,
compactly supported fiber-linear bundle test maps, partitions of unity
subordinate to a box cover, and compactly supported one-densities.
"""

from __future__ import annotations

import configparser
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    AtlasMismatch,
    BallEscapesChart,
    ConfigError,
    CoverGap,
    DimensionMismatch,
    NoMetric,
    OutsideDomain,
)
from .expressions import compile_expression
from .nets import (
    SmoothMapHandle,
    handle_compose,
    handle_linear,
    handle_product,
    make_handle,
)

_INVARIANT_TOL = 1e-9

# ---------------------------------------------------------------------------
# charts and compact sets


def _as_box(box, dim=None):
    b = np.asarray(box, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2:
        raise DimensionMismatch(f"box must have shape (n, 2), got {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise DimensionMismatch(f"box has dim {b.shape[0]}, expected {dim}")
    if np.any(b[:, 0] >= b[:, 1]):
        raise DimensionMismatch("box must have lo < hi on every axis")
    return b


def box_contains(box, x, slack=1e-12):
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= box[:, 0] - slack) and np.all(x <= box[:, 1] + slack))


def sample_box(box, per_axis):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class Chart:
    id: str
    box: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "box", _as_box(self.box))

    @property
    def dim(self):
        return self.box.shape[0]


@dataclass(frozen=True)
class CompactSet:
    """A closed box strictly inside a chart domain, with a sample resolution."""

    chart_id: str
    box: np.ndarray
    resolution: int = 9

    def __post_init__(self):
        object.__setattr__(self, "box", _as_box(self.box))
        if self.resolution < 2:
            raise DimensionMismatch("resolution must be at least 2")

    def sample_points(self):
        return sample_box(self.box, self.resolution)

    def validate_inside(self, chart: Chart):
        margin = min(
            float(np.min(self.box[:, 0] - chart.box[:, 0])),
            float(np.min(chart.box[:, 1] - self.box[:, 1])),
        )
        if margin <= 0:
            raise OutsideDomain(
                f"compact box must sit strictly inside chart {chart.id!r}"
            )
        return margin


# ---------------------------------------------------------------------------
# transition catalog


def identity_transition(dim):
    def jf(x, alpha):
        out = np.zeros(x.shape[:-1] + (dim,))
        if sum(alpha) == 1:
            out[..., alpha.index(1)] = 1.0
        return out

    return make_handle(lambda x: x.copy(), dim, dim, jet_fn=jf, name="identity")


def affine_transition(matrix, offset=None):
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError("affine transition needs a square matrix")
    n = A.shape[0]
    b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)

    def ev(x):
        return x @ A.T + b

    def jf(x, alpha):
        out = np.zeros(x.shape[:-1] + (n,))
        if sum(alpha) == 1:
            out[...] = A[:, alpha.index(1)]
        return out

    return make_handle(ev, n, n, jet_fn=jf, name="affine")


def polar_transition():
    """(r, theta) -> (r cos theta, r sin theta), first-order jets analytic."""

    def ev(x):
        r, t = x[..., 0], x[..., 1]
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def jf(x, alpha):
        r, t = x[..., 0], x[..., 1]
        if alpha == (1, 0):
            return np.stack([np.cos(t), np.sin(t)], axis=-1)
        return np.stack([-r * np.sin(t), r * np.cos(t)], axis=-1)

    h = make_handle(ev, 2, 2, jet_fn=jf, name="polar")
    h.k_max = 1
    return h


def polar_inverse_transition():
    def ev(x):
        a, b = x[..., 0], x[..., 1]
        return np.stack([np.hypot(a, b), np.arctan2(b, a)], axis=-1)

    return make_handle(ev, 2, 2, name="polar-inverse")


TRANSITION_CATALOG = {
    "identity": lambda dim, **kw: (identity_transition(dim), identity_transition(dim)),
    "affine": lambda dim, matrix, offset=None, **kw: (
        affine_transition(matrix, offset),
        affine_transition(
            np.linalg.inv(np.asarray(matrix, float)),
            -np.linalg.inv(np.asarray(matrix, float)) @ (
                np.zeros(dim) if offset is None else np.asarray(offset, float)
            ),
        ),
    ),
    "polar": lambda dim, **kw: (polar_transition(), polar_inverse_transition()),
}


# ---------------------------------------------------------------------------
# atlases


class Atlas:
    """Finite atlas of box charts with optional per-chart Riemannian metric.

    ``transitions`` maps (from_id, to_id) to a SmoothMapHandle defined on
    the overlap; declared transitions must be mutually inverse at sampled
    points (checked at construction).  ``metric`` maps chart id to a
    callable returning symmetric positive-definite matrices, shape
    (..., n, n) for points (..., n).
    """

    def __init__(self, charts, transitions=None, metric=None, name="", validate=True):
        self.charts = {c.id: c for c in charts}
        if not self.charts:
            raise AtlasMismatch("atlas needs at least one chart")
        dims = {c.dim for c in self.charts.values()}
        if len(dims) != 1:
            raise AtlasMismatch(f"charts disagree in dimension: {sorted(dims)}")
        self.dim = dims.pop()
        self.transitions = dict(transitions or {})
        self.metric = dict(metric or {})
        self.name = name
        if validate:
            self._validate()

    def _validate(self):
        per_axis = {1: 9, 2: 7, 3: 4, 4: 3}.get(self.dim, 3)
        for (a, b), fwd in self.transitions.items():
            if a not in self.charts or b not in self.charts:
                raise AtlasMismatch(f"transition {a}->{b} references unknown chart")
            back = self.transitions.get((b, a))
            if back is None:
                raise AtlasMismatch(f"transition {a}->{b} lacks an inverse pair")
            pts = sample_box(self.charts[a].box, per_axis)
            ys = fwd(pts)
            inside = np.all(
                (ys >= self.charts[b].box[:, 0] - 1e-12)
                & (ys <= self.charts[b].box[:, 1] + 1e-12),
                axis=-1,
            )
            if not np.any(inside):
                raise AtlasMismatch(f"transition {a}->{b} has empty sampled overlap")
            round_trip = back(ys[inside])
            err = float(np.max(np.abs(round_trip - pts[inside])))
            if err > _INVARIANT_TOL:
                raise AtlasMismatch(
                    f"transition pair {a}<->{b} not mutually inverse: error {err:.2e}"
                )
        for cid, g in self.metric.items():
            if cid not in self.charts:
                raise AtlasMismatch(f"metric references unknown chart {cid!r}")
            pts = sample_box(self.charts[cid].box, per_axis)
            mats = np.asarray(g(pts))
            if mats.shape[-2:] != (self.dim, self.dim):
                raise AtlasMismatch(f"metric on {cid!r} has wrong shape {mats.shape}")
            sym = float(np.max(np.abs(mats - np.swapaxes(mats, -1, -2))))
            if sym > _INVARIANT_TOL * (1.0 + float(np.max(np.abs(mats)))):
                raise AtlasMismatch(f"metric on {cid!r} not symmetric: {sym:.2e}")
            eigs = np.linalg.eigvalsh(mats)
            if np.min(eigs) <= 0:
                raise AtlasMismatch(
                    f"metric on {cid!r} not positive definite: min eig {np.min(eigs):.2e}"
                )

    # -- point plumbing ----------------------------------------------------

    def chart(self, chart_id) -> Chart:
        try:
            return self.charts[chart_id]
        except KeyError:
            raise AtlasMismatch(f"no chart {chart_id!r} in atlas") from None

    def locate(self, p):
        """Resolve a point to (chart_id, coords); arrays pick the first
        chart whose box contains them."""
        if isinstance(p, tuple) and len(p) == 2 and isinstance(p[0], str):
            cid, x = p
            x = np.asarray(x, dtype=float)
            if not box_contains(self.chart(cid).box, x):
                raise OutsideDomain(f"point outside chart {cid!r}")
            return cid, x
        x = np.asarray(p, dtype=float)
        for cid, c in self.charts.items():
            if box_contains(c.box, x):
                return cid, x
        raise OutsideDomain("point lies in no chart of the atlas")

    def to_chart(self, x, from_id, to_id):
        if from_id == to_id:
            return np.asarray(x, dtype=float)
        t = self.transitions.get((from_id, to_id))
        if t is None:
            raise AtlasMismatch(f"no transition {from_id}->{to_id} declared")
        return t(x)

    def transition_handle(self, from_id, to_id) -> SmoothMapHandle:
        if from_id == to_id:
            return identity_transition(self.dim)
        t = self.transitions.get((from_id, to_id))
        if t is None:
            raise AtlasMismatch(f"no transition {from_id}->{to_id} declared")
        return t

    def metric_at(self, chart_id, x):
        g = self.metric.get(chart_id)
        if g is None:
            raise NoMetric(f"chart {chart_id!r} carries no metric")
        return np.asarray(g(np.asarray(x, dtype=float)))

    @property
    def has_metric(self):
        return bool(self.metric)


def euclidean_atlas(dim, half_width=10.0, name="euclidean"):
    box = [(-half_width, half_width)] * dim
    eye = np.eye(dim)

    def g(x):
        return np.broadcast_to(eye, x.shape[:-1] + (dim, dim)).copy()

    return Atlas([Chart("main", box)], metric={"main": g}, name=name)


def constant_metric(matrix):
    m = np.asarray(matrix, dtype=float)

    def g(x):
        return np.broadcast_to(m, x.shape[:-1] + m.shape).copy()

    return g


class VBAtlas:
    """Vector bundle atlas: base atlas, fiber dimension, fiber transitions.

    ``fiber_transitions`` maps (from_chart, to_chart) to a callable
    x -> invertible (fiber_dim x fiber_dim) matrices at base points x in
    the *from* chart's coordinates.  The cocycle identity is checked at
    sampled overlap points.
    """

    def __init__(self, base: Atlas, fiber_dim: int, vb_chart_ids=None,
                 fiber_transitions=None, validate=True):
        self.base = base
        self.fiber_dim = int(fiber_dim)
        self.vb_chart_ids = list(vb_chart_ids or base.charts.keys())
        for cid in self.vb_chart_ids:
            base.chart(cid)
        self.fiber_transitions = dict(fiber_transitions or {})
        if validate:
            self._validate()

    def _validate(self):
        per_axis = {1: 9, 2: 7, 3: 4, 4: 3}.get(self.base.dim, 3)
        ids = self.vb_chart_ids
        for (a, b), phi in self.fiber_transitions.items():
            back = self.fiber_transitions.get((b, a))
            if back is None:
                raise AtlasMismatch(f"fiber transition {a}->{b} lacks an inverse pair")
            pts = self._overlap_samples(a, b, per_axis)
            if pts is None:
                continue
            mats = np.asarray(phi(pts))
            ys = self.base.to_chart(pts, a, b)
            inv = np.asarray(back(ys))
            err = float(np.max(np.abs(inv @ mats - np.eye(self.fiber_dim))))
            if err > _INVARIANT_TOL:
                raise AtlasMismatch(
                    f"fiber transitions {a}<->{b} not mutually inverse: {err:.2e}"
                )
        for a, b, c in itertools.permutations(ids, 3):
            if ((a, b) in self.fiber_transitions
                    and (b, c) in self.fiber_transitions
                    and (a, c) in self.fiber_transitions):
                pts = self._overlap_samples(a, b, per_axis, also=c)
                if pts is None:
                    continue
                ab = np.asarray(self.fiber_transitions[(a, b)](pts))
                bc = np.asarray(
                    self.fiber_transitions[(b, c)](self.base.to_chart(pts, a, b))
                )
                ac = np.asarray(self.fiber_transitions[(a, c)](pts))
                err = float(np.max(np.abs(bc @ ab - ac)))
                if err > _INVARIANT_TOL:
                    raise AtlasMismatch(
                        f"cocycle identity fails on {a},{b},{c}: error {err:.2e}"
                    )

    def _overlap_samples(self, a, b, per_axis, also=None):
        pts = sample_box(self.base.chart(a).box, per_axis)
        try:
            ys = self.base.to_chart(pts, a, b)
        except AtlasMismatch:
            return None
        inside = np.all(
            (ys >= self.base.chart(b).box[:, 0] - 1e-12)
            & (ys <= self.base.chart(b).box[:, 1] + 1e-12),
            axis=-1,
        )
        if also is not None:
            try:
                zs = self.base.to_chart(pts, a, also)
            except AtlasMismatch:
                return None
            inside &= np.all(
                (zs >= self.base.chart(also).box[:, 0] - 1e-12)
                & (zs <= self.base.chart(also).box[:, 1] + 1e-12),
                axis=-1,
            )
        if not np.any(inside):
            return None
        return pts[inside]

    def fiber_transition(self, from_id, to_id, x):
        if from_id == to_id:
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(
                np.eye(self.fiber_dim), x.shape[:-1] + (self.fiber_dim,) * 2
            ).copy()
        phi = self.fiber_transitions.get((from_id, to_id))
        if phi is None:
            raise AtlasMismatch(f"no fiber transition {from_id}->{to_id} declared")
        return np.asarray(phi(np.asarray(x, dtype=float)))


def trivial_bundle(atlas: Atlas, fiber_dim: int) -> VBAtlas:
    return VBAtlas(atlas, fiber_dim)


# ---------------------------------------------------------------------------
# Riemannian distance


def _polyline_length(atlas, chart_id, vertices):
    # per-segment Simpson on sqrt(v g v); vertices shape (V, n)
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        v = b - a
        pts = np.stack([a, 0.5 * (a + b), b])
        g = atlas.metric_at(chart_id, pts)
        speeds = np.sqrt(np.maximum(np.einsum("i,...ij,j->...", v, g, v), 0.0))
        total += (speeds[0] + 4.0 * speeds[1] + speeds[2]) / 6.0
    return total


def _refine_polyline(vertices):
    mids = 0.5 * (vertices[:-1] + vertices[1:])
    out = np.empty((2 * len(vertices) - 1, vertices.shape[1]))
    out[0::2] = vertices
    out[1::2] = mids
    return out


def _optimize_polyline(atlas, chart_id, vertices, box):
    if len(vertices) <= 2:
        return vertices, _polyline_length(atlas, chart_id, vertices)
    p, q = vertices[0], vertices[-1]
    interior_shape = vertices[1:-1].shape

    def objective(flat):
        verts = np.vstack([p, flat.reshape(interior_shape), q])
        return _polyline_length(atlas, chart_id, verts)

    bounds = [(lo, hi) for lo, hi in box] * interior_shape[0]
    res = minimize(
        objective,
        vertices[1:-1].ravel(),
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 200, "ftol": 1e-12},
    )
    verts = np.vstack([p, res.x.reshape(interior_shape), q])
    return verts, float(res.fun)


def riemannian_distance(atlas: Atlas, p, q, rel_tol=1e-3, max_segments=64):
    """Length of the shortest sampled polyline from p to q.

    This is an upper bound on the metric distance that converges under
    refinement; segments are doubled until the optimized length changes by
    less than ``rel_tol`` relatively.  For constant metrics the straight
    line is already optimal and the result is exact.  Points in different
    charts are routed through sampled waypoints on the declared overlap.
    """
    if not atlas.has_metric:
        raise NoMetric("atlas carries no metric")
    cid_p, xp = atlas.locate(p)
    cid_q, xq = atlas.locate(q)
    if cid_p == cid_q:
        return _single_chart_distance(atlas, cid_p, xp, xq, rel_tol, max_segments)
    # route through the overlap: waypoints sampled in the p-chart
    t = atlas.transitions.get((cid_p, cid_q))
    if t is None:
        raise AtlasMismatch(f"no transition {cid_p}->{cid_q} declared")
    box_p = atlas.chart(cid_p).box
    box_q = atlas.chart(cid_q).box
    cand = sample_box(box_p, {1: 17, 2: 9}.get(atlas.dim, 5))
    ys = t(cand)
    inside = np.all((ys >= box_q[:, 0]) & (ys <= box_q[:, 1]), axis=-1)
    if not np.any(inside):
        raise AtlasMismatch(f"empty sampled overlap between {cid_p} and {cid_q}")
    best = math.inf
    for w, wy in zip(cand[inside], ys[inside]):
        d = _single_chart_distance(
            atlas, cid_p, xp, w, rel_tol, max_segments
        ) + _single_chart_distance(atlas, cid_q, wy, xq, rel_tol, max_segments)
        best = min(best, d)
    return best


def _single_chart_distance(atlas, chart_id, xp, xq, rel_tol, max_segments):
    if np.array_equal(xp, xq):
        return 0.0
    box = atlas.chart(chart_id).box
    n_seg = 4
    ts = np.linspace(0.0, 1.0, n_seg + 1)[:, None]
    verts = xp[None, :] * (1 - ts) + xq[None, :] * ts
    verts, length = _optimize_polyline(atlas, chart_id, verts, box)
    while 2 * (len(verts) - 1) <= max_segments:
        verts2 = _refine_polyline(verts)
        verts2, length2 = _optimize_polyline(atlas, chart_id, verts2, box)
        done = abs(length2 - length) <= rel_tol * max(length2, 1e-300)
        verts, length = verts2, length2
        if done:
            break
    return float(length)


def chord_distance(atlas: Atlas, chart_id, xp, xq):
    """Midpoint-metric chord length; fast bi-Lipschitz stand-in for the
    polyline distance on compact sets (equivalent rates, not equal values)."""
    xp = np.asarray(xp, dtype=float)
    xq = np.asarray(xq, dtype=float)
    v = xq - xp
    g = atlas.metric_at(chart_id, 0.5 * (xp + xq))
    return float(np.sqrt(max(np.einsum("...i,...ij,...j->...", v, g, v), 0.0)))


# ---------------------------------------------------------------------------
# bump functions

_PSI_CUTOFF = 1e-30


def _psi_jets(s):
    """exp(-1/s) for s > 0 (0 otherwise) and its first three derivatives."""
    s = np.asarray(s, dtype=float)
    live = s > _PSI_CUTOFF
    ss = np.where(live, s, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        e = np.where(live, np.exp(-1.0 / ss), 0.0)
    i1 = 1.0 / ss
    p0 = e
    p1 = np.where(live, e * i1**2, 0.0)
    p2 = np.where(live, e * (i1**4 - 2.0 * i1**3), 0.0)
    p3 = np.where(live, e * (i1**6 - 6.0 * i1**5 + 6.0 * i1**4), 0.0)
    return p0, p1, p2, p3


def _profile_jets(q, r0_sq, r1_sq):
    """Smooth step in q = r^2: 1 for q <= r0_sq, 0 for q >= r1_sq.

    Returns value and derivatives in q up to order 3.  The denominator
    W = a + b is bounded below by psi of half the band width, which for
    hairline bands can underflow to zero; those points get the limiting
    step values (the transition is below float resolution there).
    """
    q = np.asarray(q, dtype=float)
    a0, a1_, a2_, a3_ = _psi_jets(r1_sq - q)
    b0, b1, b2, b3 = _psi_jets(q - r0_sq)
    a1, a2, a3 = -a1_, a2_, -a3_
    W = a0 + b0
    dead = W <= 1e-280
    Ws = np.where(dead, 1.0, W)
    # every quantity is divided by W once before any product is formed:
    # powers of a small W underflow long before W itself does, and the
    # normalized ratios stay inside float range
    with np.errstate(invalid="ignore", divide="ignore", under="ignore"):
        an0, an1, an2, an3 = a0 / Ws, a1 / Ws, a2 / Ws, a3 / Ws
        bn0, bn1, bn2, bn3 = b0 / Ws, b1 / Ws, b2 / Ws, b3 / Ws
        Wn1 = an1 + bn1
        Wn2 = an2 + bn2
        Nn = an1 * bn0 - an0 * bn1
        Nn1 = an2 * bn0 - an0 * bn2
        Nn2 = an3 * bn0 + an2 * bn1 - an1 * bn2 - an0 * bn3
        beta0 = an0
        beta1 = Nn
        beta2 = Nn1 - 2.0 * Nn * Wn1
        beta3 = Nn2 - 4.0 * Nn1 * Wn1 - 2.0 * Nn * Wn2 + 6.0 * Nn * Wn1**2
    if np.any(dead):
        mid = 0.5 * (r0_sq + r1_sq)
        step = np.where(q < mid, 1.0, 0.0)
        beta0 = np.where(dead, step, beta0)
        beta1 = np.where(dead, 0.0, beta1)
        beta2 = np.where(dead, 0.0, beta2)
        beta3 = np.where(dead, 0.0, beta3)
    return beta0, beta1, beta2, beta3


def _radial_profile_handle(r0, r1):
    r0_sq, r1_sq = float(r0) ** 2, float(r1) ** 2

    def ev(q):
        return _profile_jets(q[..., 0], r0_sq, r1_sq)[0][..., None]

    def jf(q, alpha):
        return _profile_jets(q[..., 0], r0_sq, r1_sq)[alpha[0]][..., None]

    h = make_handle(ev, 1, 1, jet_fn=jf, name="profile")
    h.k_max = 3
    return h


def _squared_distance_handle(center):
    c = np.asarray(center, dtype=float)
    n = c.shape[0]

    def ev(x):
        return np.sum((x - c) ** 2, axis=-1, keepdims=True)

    def jf(x, alpha):
        k = sum(alpha)
        if k == 1:
            i = alpha.index(1)
            return (2.0 * (x[..., i] - c[i]))[..., None]
        if k == 2:
            if 2 in alpha:
                return np.full(x.shape[:-1] + (1,), 2.0)
            return np.zeros(x.shape[:-1] + (1,))
        return np.zeros(x.shape[:-1] + (1,))

    return make_handle(ev, n, 1, jet_fn=jf, name="sqdist")


def make_bump(center, inner_radius, outer_radius, box=None) -> SmoothMapHandle:
    """Radial C^inf bump: 1 on the inner ball, 0 outside the outer ball.

    Jets are analytic to order 3 (profile derivatives composed with the
    squared-distance map).  When ``box`` is given, the outer ball must fit
    inside it.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if not 0.0 < inner_radius < outer_radius:
        raise BallEscapesChart("need 0 < inner_radius < outer_radius")
    if box is not None:
        box = _as_box(box, center.shape[0])
        if np.any(center - outer_radius < box[:, 0]) or np.any(
            center + outer_radius > box[:, 1]
        ):
            raise BallEscapesChart("outer ball does not fit inside the chart box")
    h = handle_compose(
        _radial_profile_handle(inner_radius, outer_radius),
        _squared_distance_handle(center),
    )
    h.name = "bump"
    h.support_box = np.stack([center - outer_radius, center + outer_radius], axis=-1)
    return h


def make_box_bump(inner_box, outer_box) -> SmoothMapHandle:
    """Product of per-axis bumps: 1 on inner_box, 0 outside outer_box."""
    inner = _as_box(inner_box)
    outer = _as_box(outer_box, inner.shape[0])
    if np.any(inner[:, 0] <= outer[:, 0]) or np.any(inner[:, 1] >= outer[:, 1]):
        raise BallEscapesChart("inner box must sit strictly inside outer box")
    n = inner.shape[0]
    factors = []
    for i in range(n):
        c = 0.5 * (inner[i, 0] + inner[i, 1])
        r_in = 0.5 * (inner[i, 1] - inner[i, 0])
        r_out = min(c - outer[i, 0], outer[i, 1] - c)
        prof = _radial_profile_handle(r_in, r_out)

        def coord_sq(x, _i=i, _c=c):
            return ((x[..., _i] - _c) ** 2)[..., None]

        def coord_sq_jet(x, alpha, _i=i, _c=c):
            k = sum(alpha)
            if k == 1 and alpha[_i] == 1:
                return (2.0 * (x[..., _i] - _c))[..., None]
            if k == 2 and alpha[_i] == 2:
                return np.full(x.shape[:-1] + (1,), 2.0)
            return np.zeros(x.shape[:-1] + (1,))

        qh = make_handle(coord_sq, n, 1, jet_fn=coord_sq_jet, name=f"q{i}")
        factors.append(handle_compose(prof, qh))
    h = factors[0]
    for f in factors[1:]:
        h = handle_product(h, f)
    h.name = "box-bump"
    h.support_box = outer
    return h


def reciprocal_handle():
    """y -> 1/y with analytic jets at all orders; valid for y bounded away
    from zero (callers guarantee this on their evaluation region)."""

    def ev(y):
        return 1.0 / y

    def jf(y, alpha):
        k = alpha[0]
        return (-1.0) ** k * math.factorial(k) * y ** (-(k + 1))

    return make_handle(ev, 1, 1, jet_fn=jf, name="recip")


def coordinate_handle(dim, index):
    def jf(x, alpha):
        k = sum(alpha)
        out = np.zeros(x.shape[:-1] + (1,))
        if k == 1 and alpha[index] == 1:
            out[...] = 1.0
        return out

    return make_handle(
        lambda x: x[..., index : index + 1], dim, 1, jet_fn=jf, name=f"x{index}"
    )


# ---------------------------------------------------------------------------
# fiber-linear test homomorphisms


@dataclass
class VBHomTest:
    """Compactly supported fiber-linear test map to R x R^fiber_dim.

    Near the cutoff's core this is the chart trivialization itself: base
    part = cutoff(x) * x[coord_index], fiber part = cutoff(x) * xi.
    """

    vb: "VBAtlas"
    chart_id: str
    coord_index: int
    cutoff: SmoothMapHandle
    support_box: np.ndarray

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        chi = self.cutoff(x)[..., 0]
        base = chi * x[..., self.coord_index]
        fiber = chi[..., None] * xi
        return base, fiber

    def base_handle(self) -> SmoothMapHandle:
        return handle_product(
            self.cutoff, coordinate_handle(self.vb.base.dim, self.coord_index)
        )


def make_vbhom_test(vb: VBAtlas, chart_id, cutoff, coord_index=0) -> VBHomTest:
    """Cutoff-localized chart projection as a compactly supported test
    homomorphism.  ``cutoff`` is a bump handle (or (center, r_in, r_out)
    spec) supported inside the chart."""
    chart = vb.base.chart(chart_id)
    if isinstance(cutoff, tuple):
        center, r_in, r_out = cutoff
        cutoff = make_bump(center, r_in, r_out, box=chart.box)
    support = getattr(cutoff, "support_box", None)
    if support is None:
        raise BallEscapesChart("cutoff has no support box metadata")
    support = np.asarray(support, dtype=float)
    if np.any(support[:, 0] < chart.box[:, 0]) or np.any(
        support[:, 1] > chart.box[:, 1]
    ):
        raise BallEscapesChart("cutoff support escapes the chart box")
    if not 0 <= coord_index < vb.base.dim:
        raise DimensionMismatch(f"coord_index {coord_index} out of range")
    return VBHomTest(vb, chart_id, coord_index, cutoff, support)


# ---------------------------------------------------------------------------
# partitions of unity


@dataclass
class PartitionMember:
    chart_id: str
    handle: SmoothMapHandle
    support_box: np.ndarray


def partition_of_unity(atlas: Atlas, cores: Sequence[CompactSet], margin_frac=0.5):
    """Bump-based partition subordinate to the cores' charts.

    Each member is ``b_j / sum_k b_k`` where b_j is a box bump equal to 1
    on core j.  The normalized sum is exactly 1 wherever some b_k > 0; a
    sampled point of some core where all bumps vanish raises cover-gap.
    Members of a multi-chart cover are normalized through the declared
    transitions.
    """
    if not cores:
        raise CoverGap("empty cover")
    bumps = []
    for core in cores:
        chart = atlas.chart(core.chart_id)
        gap = core.validate_inside(chart)
        widths = core.box[:, 1] - core.box[:, 0]
        pad = np.minimum(margin_frac * widths, 0.9 * gap)
        outer = np.stack([core.box[:, 0] - pad, core.box[:, 1] + pad], axis=-1)
        bumps.append((core.chart_id, make_box_bump(core.box, outer)))

    def total_handle(eval_chart):
        terms = []
        for cid, b in bumps:
            if cid == eval_chart:
                terms.append(b)
            else:
                terms.append(handle_compose(b, atlas.transition_handle(eval_chart, cid)))
        return handle_linear(terms, [1.0] * len(terms)) if len(terms) > 1 else terms[0]

    members = []
    for cid, b in bumps:
        total = total_handle(cid)
        member = handle_product(b, handle_compose(reciprocal_handle(), total))
        member.name = "partition-member"
        members.append(PartitionMember(cid, member, getattr(b, "support_box")))

    # cover check: every sampled core point must see positive bump mass
    for core in cores:
        pts = core.sample_points()
        total = total_handle(core.chart_id)(pts)
        if np.any(total <= 1e-12):
            raise CoverGap("sampled core point not covered by any bump")
        s = sum(
            (m.handle(pts) if m.chart_id == core.chart_id else
             m.handle(atlas.to_chart(pts, core.chart_id, m.chart_id)))
            for m in members
        )
        if float(np.max(np.abs(s - 1.0))) > _INVARIANT_TOL:
            raise CoverGap("partition does not sum to 1 on the covered region")
    return members


# ---------------------------------------------------------------------------
# test banks


@dataclass
class ScalarTest:
    # jets_stable: the test equals a polynomial (constant or coordinate) on
    # the plateau covering the region of interest, so jets of test∘u there
    # reproduce jets of u exactly.  Only such tests give usable derivative
    # sup curves; narrow bumps are kept for order-0 separation, where the
    # double-exponential falloff at their support edge cannot poison a fit.
    handle: SmoothMapHandle
    support_box: np.ndarray
    kind: str
    label: str = ""
    jets_stable: bool = False


@dataclass
class DensityTest:
    """Compactly supported one-density in a fixed chart: a smooth
    coefficient function against which nets are integrated."""

    chart_id: str
    handle: SmoothMapHandle
    support_box: np.ndarray
    id: str = ""


@dataclass
class TestBank:
    scalar_tests: list
    vbhom_tests: list = field(default_factory=list)
    densities: list = field(default_factory=list)

    def __len__(self):
        return len(self.scalar_tests)


def _lattice(box, count):
    """Up to ``count`` well-separated points inside the box."""
    n = box.shape[0]
    per_axis = max(2, math.ceil(count ** (1.0 / n)))
    axes = [
        np.linspace(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo), per_axis)
        for lo, hi in box
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    stride = max(1, len(pts) // count)
    return pts[::stride][:count]


def default_test_bank(atlas: Atlas, region: CompactSet, size=16, vb: Optional[VBAtlas] = None) -> TestBank:
    """Finite stand-in for "all compactly supported smooth functions".

    Contents: per-coordinate cutoff-times-coordinate functions whose cutoff
    is 1 on the whole region (so differences of nets pass through raw), and
    bumps at two scales with separated centers.  The bank size is reported
    by callers in every verdict that quantifies over it.
    """
    chart = atlas.chart(region.chart_id)
    gap = region.validate_inside(chart)
    n = atlas.dim
    box = region.box
    widths = box[:, 1] - box[:, 0]
    scale = float(np.max(widths))

    tests = []
    pad = min(0.45 * gap, 0.25 * scale)
    inner = np.stack([box[:, 0] - pad * 0.5, box[:, 1] + pad * 0.5], axis=-1)
    outer = np.stack([box[:, 0] - pad, box[:, 1] + pad], axis=-1)
    plateau = make_box_bump(inner, outer)
    tests.append(ScalarTest(plateau, outer, "plateau", "cutoff", jets_stable=True))
    for i in range(n):
        h = handle_product(plateau, coordinate_handle(n, i))
        h.support_box = outer
        tests.append(
            ScalarTest(h, outer, "coordinate", f"x{i}*cutoff", jets_stable=True)
        )

    remaining = max(size - len(tests), 2)
    big = math.ceil(remaining / 2)
    centers_big = _lattice(box, big)
    centers_small = _lattice(box, remaining - big)
    r_big = min(0.35 * scale, 0.9 * gap)
    r_small = r_big / 3.0
    for j, c in enumerate(centers_big):
        b = make_bump(c, 0.5 * r_big, r_big, box=chart.box)
        tests.append(ScalarTest(b, b.support_box, "bump", f"bump-big-{j}"))
    for j, c in enumerate(centers_small):
        b = make_bump(c, 0.5 * r_small, r_small, box=chart.box)
        tests.append(ScalarTest(b, b.support_box, "bump", f"bump-small-{j}"))

    vbhoms = []
    if vb is not None:
        center = 0.5 * (box[:, 0] + box[:, 1])
        r_out = min(0.5 * scale + pad, 0.9 * gap + 0.5 * scale)
        cut = make_bump(center, 0.6 * r_out, r_out, box=chart.box)
        for i in range(n):
            vbhoms.append(make_vbhom_test(vb, region.chart_id, cut, coord_index=i))

    densities = []
    center = 0.5 * (box[:, 0] + box[:, 1])
    for j, shift in enumerate((0.0, 0.15)):
        c = center + shift * widths
        r = min(0.3 * scale, 0.8 * gap)
        b = make_bump(c, 0.5 * r, r, box=chart.box)
        densities.append(
            DensityTest(region.chart_id, b, b.support_box, f"density-{j}")
        )
    return TestBank(tests, vbhoms, densities)


# ---------------------------------------------------------------------------
# atlas description files


def _parse_box(text):
    rows = [r.strip() for r in text.split(";") if r.strip()]
    box = []
    for r in rows:
        parts = r.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"box row needs two numbers, got {r!r}")
        box.append((float(parts[0]), float(parts[1])))
    return box


def _parse_matrix(text):
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return [[float(v) for v in r.replace(",", " ").split()] for r in rows]


def _metric_from_expressions(rows, dim):
    exprs = [[compile_expression(e) for e in row] for row in rows]
    if len(exprs) != dim or any(len(r) != dim for r in exprs):
        raise ConfigError(f"metric needs {dim}x{dim} entries")
    names = [f"x{i+1}" for i in range(dim)]

    def g(x):
        x = np.asarray(x, dtype=float)
        env = {nm: x[..., i] for i, nm in enumerate(names)}
        mat = np.empty(x.shape[:-1] + (dim, dim))
        for i in range(dim):
            for j in range(dim):
                mat[..., i, j] = exprs[i][j](env)
        return mat

    return g


def load_atlas(path) -> Atlas:
    """Read an atlas description file.

    Sections: ``[atlas]`` with ``dim`` (and optional ``name``);
    ``[chart:ID]`` with ``box = lo hi; lo hi; ...`` and an optional
    ``metric`` whose entries are expression strings in x1..xn (rows split
    by ';', entries by ',');  ``[transition:A->B]`` with ``type`` from the
    catalog (identity, affine, polar) and type-specific keys (``matrix``,
    ``offset``).  Both directions of each transition are installed.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read atlas file {path!r}")
    if "atlas" not in cp:
        raise ConfigError("missing [atlas] section")
    try:
        dim = cp.getint("atlas", "dim")
    except (ValueError, configparser.NoOptionError) as exc:
        raise ConfigError(f"bad or missing dim: {exc}") from None
    name = cp.get("atlas", "name", fallback="")

    charts, metric = [], {}
    for section in cp.sections():
        if section.startswith("chart:"):
            cid = section.split(":", 1)[1]
            if not cp.has_option(section, "box"):
                raise ConfigError(f"chart {cid!r} lacks a box")
            box = _parse_box(cp.get(section, "box"))
            if len(box) != dim:
                raise ConfigError(f"chart {cid!r} box has wrong dimension")
            charts.append(Chart(cid, box))
            if cp.has_option(section, "metric"):
                rows = [
                    [e.strip() for e in row.split(",")]
                    for row in cp.get(section, "metric").split(";")
                ]
                metric[cid] = _metric_from_expressions(rows, dim)

    transitions = {}
    for section in cp.sections():
        if section.startswith("transition:"):
            spec_part = section.split(":", 1)[1]
            if "->" not in spec_part:
                raise ConfigError(f"transition section {section!r} needs A->B")
            a, b = (s.strip() for s in spec_part.split("->", 1))
            kind = cp.get(section, "type", fallback="identity")
            if kind not in TRANSITION_CATALOG:
                raise ConfigError(f"unknown transition type {kind!r}")
            kwargs = {}
            if cp.has_option(section, "matrix"):
                kwargs["matrix"] = _parse_matrix(cp.get(section, "matrix"))
            if cp.has_option(section, "offset"):
                kwargs["offset"] = [
                    float(v) for v in cp.get(section, "offset").replace(",", " ").split()
                ]
            fwd, back = TRANSITION_CATALOG[kind](dim, **kwargs)
            transitions[(a, b)] = fwd
            transitions[(b, a)] = back

    return Atlas(charts, transitions, metric, name=name)

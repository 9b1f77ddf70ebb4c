"""Generalized bundle homomorphisms, hybrid nets, and their checkers.

A homomorphism net is stored in local form: one base net between the base
atlases plus, per vb-chart pair, a net of fiber matrices.  The projection
identity (bundle projection after the hom equals the base map after the
projection) then holds by construction and is never tested numerically.
Hybrid nets carry fiber vectors instead of matrices; generalized sections
are hybrid nets whose base is the identity.

Fiber norms use the operator norm induced by the max norm (largest
absolute row sum); derivative curves of fiber entries use the entrywise
max, an equivalent norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .asymptotics import (
    MODERATE,
    NEGLIGIBLE,
    NEITHER,
    AsymptoticVerdict,
    EpsGrid,
    estimate_growth_order,
    negligible_to_resolution,
)
from .errors import (
    AlignmentError,
    AtlasMismatch,
    DimensionMismatch,
    InconsistentRoutes,
    NotCBounded,
    NotModerate,
    OutsideDomain,
)
from .geometry import (
    CompactSet,
    TestBank,
    VBAtlas,
    box_contains,
    chord_distance,
    default_test_bank,
    partition_of_unity,
    trivial_bundle,
)
from .manifold_maps import (
    GeneralizedManifoldPoint,
    ManifoldNet,
    _check_points,
    _combine_verdicts,
    _fd_step_for,
    _index_tuples,
    _sup_abs,
    check_cbounded,
    check_equivalent,
    check_moderate,
    compose,
)
from .nets import Net, finite_difference_jet

_AGREEMENT_TOL = 1e-9
_EVAL_EPS_SAMPLES = (0.5, 0.1, 0.02)


def opnorm_max(M) -> np.ndarray:
    """Operator norm induced by the max norm: largest absolute row sum."""
    M = np.asarray(M, dtype=float)
    return np.max(np.sum(np.abs(M), axis=-1), axis=-1)


_DIFF_NOISE_C = 4.0


def _sup_diff(a_vals, b_vals, mask=None) -> float:
    """Sup |a - b| with sub-roundoff differences counted as measured zeros.

    Two O(1) values agreeing to machine precision differ by arithmetic
    noise, not by a residual scale; a flat eps_mach curve would otherwise
    read as Moderate(0) and block verdicts no finite-precision experiment
    could refute.  The floor is relative to the operands' own magnitude,
    so genuinely small quantities keep their genuinely small differences.
    """
    a = np.asarray(a_vals, dtype=float)
    b = np.asarray(b_vals, dtype=float)
    if mask is not None:
        a, b = a[mask], b[mask]
    if a.size == 0:
        return 0.0
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return float("inf")
    d = float(np.max(np.abs(a - b)))
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return 0.0 if d <= _DIFF_NOISE_C * np.finfo(float).eps * scale else d


def matrix_net(fn, dim_in, shape, jet=None, box=None, label="") -> Net:
    """Net of fiber matrices (or vectors) from ``fn(eps, x) -> (..., *shape)``.

    Stored flattened so the scalar net machinery applies; ``fiber_shape``
    on the result records how to fold values back.
    """
    from .nets import net_from_function

    shape = tuple(int(s) for s in shape)
    size = int(np.prod(shape))

    def flat_fn(eps, x):
        vals = np.asarray(fn(eps, x), dtype=float)
        return vals.reshape(x.shape[:-1] + (size,))

    flat_jet = None
    if jet is not None:
        def flat_jet(eps, x, alpha):
            vals = np.asarray(jet(eps, x, alpha), dtype=float)
            return vals.reshape(x.shape[:-1] + (size,))

    net = net_from_function(flat_fn, dim_in, size, box=box, jet=flat_jet, label=label)
    net.fiber_shape = shape
    return net


def fiber_values(net: Net, eps, x) -> np.ndarray:
    """Evaluate a matrix net and fold the flat output back to fiber shape."""
    x = np.asarray(x, dtype=float)
    flat = net.at(eps)(x)
    return flat.reshape(x.shape[:-1] + net.fiber_shape)


# ---------------------------------------------------------------------------
# homomorphism nets


@dataclass
class HomNet:
    """Fiber-linear net between vector bundles in local form."""

    source: VBAtlas
    target: VBAtlas
    base_net: ManifoldNet
    fiber_nets: dict
    label: str = ""

    def __post_init__(self):
        m_in, m_out = self.source.fiber_dim, self.target.fiber_dim
        for (s, t), net in self.fiber_nets.items():
            if s not in self.source.vb_chart_ids or t not in self.target.vb_chart_ids:
                raise AtlasMismatch(f"fiber net keyed by unknown vb charts ({s},{t})")
            if net.fiber_shape != (m_out, m_in):
                raise DimensionMismatch(
                    f"fiber net ({s},{t}) has shape {net.fiber_shape}, "
                    f"bundle expects {(m_out, m_in)}"
                )
            if net.dim_in != self.source.base.dim:
                raise DimensionMismatch("fiber net domain dim != base dim")
        self._check_fiber_agreement()

    def _check_fiber_agreement(self):
        by_source = {}
        for (s, t), net in sorted(self.fiber_nets.items()):
            by_source.setdefault(s, []).append((t, net))
        for s, entries in by_source.items():
            if len(entries) < 2:
                continue
            box = self.base_net.rep_for(s)[1].box
            if box is None:
                continue
            from .geometry import sample_box

            pts = sample_box(box, 5)
            for (t1, n1), (t2, n2) in zip(entries, entries[1:]):
                for eps in _EVAL_EPS_SAMPLES:
                    tgt1, y1 = self.base_net.eval(eps, pts, s)
                    if tgt1 != t1:
                        y1 = self.target.base.to_chart(y1, tgt1, t1)
                    inside = np.all(
                        (y1 >= self.target.base.chart(t1).box[:, 0] - 1e-9)
                        & (y1 <= self.target.base.chart(t1).box[:, 1] + 1e-9),
                        axis=-1,
                    )
                    if not np.any(inside):
                        continue
                    T = self.target.fiber_transition(t1, t2, y1[inside])
                    M1 = fiber_values(n1, eps, pts[inside])
                    M2 = fiber_values(n2, eps, pts[inside])
                    err = float(np.max(np.abs(T @ M1 - M2)))
                    if err > _AGREEMENT_TOL:
                        raise AtlasMismatch(
                            f"fiber nets ({s},{t1}) and ({s},{t2}) disagree through "
                            f"the fiber transition: error {err:.2e} at eps={eps}"
                        )

    def fiber_for(self, src_chart: str):
        for (s, t), net in self.fiber_nets.items():
            if s == src_chart:
                return t, net
        raise AtlasMismatch(f"no fiber net with source chart {src_chart!r}")

    def fiber_matrix(self, eps: float, x, src_chart: Optional[str] = None):
        if src_chart is None:
            src_chart = next(iter(self.fiber_nets))[0]
        t, net = self.fiber_for(src_chart)
        return t, fiber_values(net, eps, x)

    def apply(self, eps: float, x, xi, src_chart: Optional[str] = None):
        """Full bundle map: (x, xi) -> (base image, matrix times xi)."""
        if src_chart is None:
            src_chart = next(iter(self.fiber_nets))[0]
        tgt, y = self.base_net.eval(eps, x, src_chart)
        t2, M = self.fiber_matrix(eps, np.asarray(x, dtype=float), src_chart)
        if t2 != tgt:
            y = self.target.base.to_chart(y, tgt, t2)
            tgt = t2
        eta = np.einsum("...ij,...j->...i", M, np.asarray(xi, dtype=float))
        return tgt, y, eta


def single_chart_hom(
    source: VBAtlas,
    target: VBAtlas,
    base: ManifoldNet,
    matrix_fn,
    src_chart="main",
    tgt_chart="main",
    jet=None,
    label="",
) -> HomNet:
    m = matrix_net(
        matrix_fn,
        source.base.dim,
        (target.fiber_dim, source.fiber_dim),
        jet=jet,
        box=source.base.chart(src_chart).box,
        label=label,
    )
    return HomNet(source, target, base, {(src_chart, tgt_chart): m}, label)


def identity_hom(vb: VBAtlas, chart="main", label="id") -> HomNet:
    from .manifold_maps import single_chart_map

    base = single_chart_map(
        vb.base, vb.base, lambda e, x: x, src_chart=chart, tgt_chart=chart, label=label
    )
    eye = np.eye(vb.fiber_dim)

    def mat(e, x):
        return np.broadcast_to(eye, x.shape[:-1] + eye.shape)

    return single_chart_hom(vb, vb, base, mat, chart, chart, label=label)


def tangent_map(u: ManifoldNet, label="") -> HomNet:
    """The hom net of Jacobians of u's chart representations."""
    source = trivial_bundle(u.source, u.source.dim)
    target = trivial_bundle(u.target, u.target.dim)
    fiber = {}
    for (s, t), net in u.reps.items():
        def mat(e, x, _net=net):
            h = _net.at(e)
            return h.jacobian(x, step=_fd_step_for(e))

        fiber[(s, t)] = matrix_net(
            mat, u.source.dim, (u.target.dim, u.source.dim),
            box=net.box, label=f"D({net.label or 'net'})",
        )
    return HomNet(source, target, u, fiber, label or f"T({u.label})")


# ---------------------------------------------------------------------------
# vb generalized points


@dataclass
class VBGeneralizedPoint:
    """eps-parametrized bundle point: base point plus fiber vector."""

    at_fn: Callable
    support: CompactSet
    label: str = ""

    def at(self, eps: float):
        out = self.at_fn(eps)
        if len(out) == 3:
            cid, x, xi = out
        else:
            x, xi = out
            cid = self.support.chart_id
        return cid, np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(
            np.asarray(xi, dtype=float)
        )

    def check(self, grid: Optional[EpsGrid] = None) -> AsymptoticVerdict:
        """Base stays in its support; fiber norm classifies moderate."""
        grid = grid or EpsGrid.default()
        curve = []
        for eps in grid:
            cid, x, xi = self.at(eps)
            if cid == self.support.chart_id and not box_contains(
                self.support.box, x, slack=1e-9
            ):
                raise OutsideDomain(
                    f"vb point base leaves its support at eps={eps}"
                )
            curve.append(float(np.max(np.abs(xi))))
        verdict = estimate_growth_order(curve, grid)
        if verdict.classification == NEITHER:
            raise NotModerate("fiber norm of the vb point is not moderate")
        return verdict


def constant_vb_point(support: CompactSet, x, xi, label="") -> VBGeneralizedPoint:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return VBGeneralizedPoint(lambda eps: (x, xi), support, label)


def vb_points_equivalent(
    vb: VBAtlas,
    p: VBGeneralizedPoint,
    q: VBGeneralizedPoint,
    grid: Optional[EpsGrid] = None,
) -> bool:
    """Base distance negligible and, where the bases co-locate, fiber
    difference negligible."""
    grid = grid or EpsGrid.default()
    base_curve, fiber_curve = [], []
    for eps in grid:
        cp, xp, fp = p.at(eps)
        cq, xq, fq = q.at(eps)
        if cp != cq:
            T = vb.fiber_transition(cq, cp, xq)
            fq = T @ fq
            xq = vb.base.to_chart(xq, cq, cp)
        base_curve.append(chord_distance(vb.base, cp, xp, xq))
        fiber_curve.append(_sup_diff(fp, fq))
    return negligible_to_resolution(base_curve, grid) and negligible_to_resolution(
        fiber_curve, grid
    )


def vb_point_insert(u: HomNet, e: VBGeneralizedPoint) -> VBGeneralizedPoint:
    """Apply the hom slicewise to a bundle point."""
    cb = check_cbounded(u.base_net, e.support)
    if not cb.ok:
        raise NotCBounded("point insertion needs a c-bounded base net")

    def at(eps):
        cid, x, xi = e.at(eps)
        tgt, y, eta = u.apply(eps, x[None, :], xi[None, :], cid)
        return tgt, y[0], eta[0]

    return VBGeneralizedPoint(at, cb.witness, label=f"{u.label}({e.label})")


# ---------------------------------------------------------------------------
# moderateness and equivalence of homs


@dataclass
class VBModerateReport:
    verdict: AsymptoticVerdict
    base_report: object
    fiber_verdicts: list
    bank_verdicts: list
    witness: Optional[CompactSet]

    def __bool__(self):
        return self.verdict.classification in (MODERATE, NEGLIGIBLE)


def _fiber_step(eps, k):
    # k-th central differences of O(1) fiber entries drown in roundoff
    # once the step drops below eps_mach^(1/(k+2)); the eps-scaled step
    # stays in charge above that line
    h = _fd_step_for(eps)
    if k >= 2:
        h = max(h, float(np.finfo(float).eps) ** (1.0 / (k + 2)))
    return h


def _fiber_entry_curves(u, L, k_max, grid, pts):
    """Per order k: sup over sampled L of entrywise fiber-net jets."""
    src = L.chart_id
    _, net = u.fiber_for(src)
    out = []
    for k in range(k_max + 1):
        curve = []
        for eps in grid:
            h = net.at(eps)
            sup = 0.0
            for alpha in _index_tuples(net.dim_in, k):
                sup = max(sup, _sup_abs(h.jet(pts, alpha, _fiber_step(eps, k))))
            curve.append(sup)
        out.append((k, estimate_growth_order(curve, grid)))
    return out


def check_vb_moderate(
    u: HomNet,
    L: CompactSet,
    k_max: int = 2,
    grid: Optional[EpsGrid] = None,
    bank: Optional[TestBank] = None,
) -> VBModerateReport:
    """Base moderateness plus fiber-matrix classification.

    The fiber runs two routes: jets of the raw chart matrices, and the
    order-0 norm of the matrix localized by each compactly supported test
    hom (cutoff at the base image times the matrix).  The combined verdict
    is the worst of base and fiber.
    """
    grid = grid or EpsGrid.default()
    base_report = check_moderate(u.base_net, L, k_max=k_max, grid=grid, bank=None)
    witness = base_report.witness
    pts = _check_points(L)

    fiber_verdicts = _fiber_entry_curves(u, L, k_max, grid, pts)

    if bank is None:
        bank = default_test_bank(u.target.base, witness, vb=u.target)
    bank_verdicts = []
    src = L.chart_id
    for test in bank.vbhom_tests:
        curve = []
        for eps in grid:
            tgt, y = u.base_net.eval(eps, pts, src)
            if tgt != test.chart_id:
                y = u.target.base.to_chart(y, tgt, test.chart_id)
            chi = test.cutoff(y)[..., 0]
            _, M = u.fiber_matrix(eps, pts, src)
            curve.append(_sup_abs(chi * opnorm_max(M)))
        bank_verdicts.append(estimate_growth_order(curve, grid))

    verdict = _combine_verdicts(
        [base_report.verdict]
        + [v for _, v in fiber_verdicts]
        + bank_verdicts
    )
    return VBModerateReport(verdict, base_report, fiber_verdicts, bank_verdicts, witness)


@dataclass
class VBEquivalenceReport:
    equivalent: bool
    base_report: object
    route_chart: bool
    route_bank: bool
    fiber_vacuous: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __bool__(self):
        return self.equivalent


def check_vb_equivalent(
    u: HomNet,
    v: HomNet,
    L: CompactSet,
    grid: Optional[EpsGrid] = None,
    bank: Optional[TestBank] = None,
    derivative_order: int = 0,
) -> VBEquivalenceReport:
    """Base equivalence plus order-0 fiber-matrix difference negligibility.

    The fiber difference runs a chart route (matrix differences where both
    base images sit in the shared witness) and a test-hom route (cutoff
    times matrix differences); the routes must agree.  Fiber jets up to
    ``derivative_order`` extend the chart route; the verdict must not
    depend on it.
    """
    grid = grid or EpsGrid.default()
    mu = check_vb_moderate(u, L, grid=grid)
    mv = check_vb_moderate(v, L, grid=grid)
    if not (bool(mu) and bool(mv)):
        raise NotModerate("vb equivalence needs both homs vb-moderate")

    base_report = check_equivalent(u.base_net, v.base_net, L, grid=grid)
    lo = np.minimum(mu.witness.box[:, 0], mv.witness.box[:, 0])
    hi = np.maximum(mu.witness.box[:, 1], mv.witness.box[:, 1])
    witness_box = np.stack([lo, hi], axis=-1)
    pts = _check_points(L)
    src = L.chart_id
    t_u, net_u = u.fiber_for(src)
    t_v, net_v = v.fiber_for(src)

    # chart route: matrix differences masked to co-located base images
    route_chart = True
    vacuous = True
    for k in range(derivative_order + 1):
        curve = []
        for eps in grid:
            tu, yu = u.base_net.eval(eps, pts, src)
            tv, yv = v.base_net.eval(eps, pts, src)
            if tv != tu:
                yv = u.target.base.to_chart(yv, tv, tu)
            mask = np.all(
                (yu >= witness_box[:, 0]) & (yu <= witness_box[:, 1])
                & (yv >= witness_box[:, 0]) & (yv <= witness_box[:, 1]),
                axis=-1,
            )
            if not np.any(mask):
                curve.append(0.0)
                continue
            vacuous = False
            hu, hv = net_u.at(eps), net_v.at(eps)
            sup = 0.0
            for alpha in _index_tuples(net_u.dim_in, k):
                ju = hu.jet(pts, alpha, _fiber_step(eps, k))
                jv = hv.jet(pts, alpha, _fiber_step(eps, k))
                sup = max(sup, _sup_diff(ju, jv, mask))
            curve.append(sup)
        if not negligible_to_resolution(curve, grid):
            route_chart = False

    if bank is None:
        bank = default_test_bank(u.target.base, mu.witness, vb=u.target)
    route_bank = True
    for test in bank.vbhom_tests:
        curve = []
        for eps in grid:
            tu, yu = u.base_net.eval(eps, pts, src)
            tv, yv = v.base_net.eval(eps, pts, src)
            if tu != test.chart_id:
                yu = u.target.base.to_chart(yu, tu, test.chart_id)
            if tv != test.chart_id:
                yv = u.target.base.to_chart(yv, tv, test.chart_id)
            chi_u = test.cutoff(yu)[..., 0]
            chi_v = test.cutoff(yv)[..., 0]
            Mu = fiber_values(net_u, eps, pts)
            Mv = fiber_values(net_v, eps, pts)
            curve.append(
                _sup_diff(chi_u[..., None, None] * Mu, chi_v[..., None, None] * Mv)
            )
        if not negligible_to_resolution(curve, grid):
            route_bank = False

    diagnostics = {"grid": grid, "derivative_order": derivative_order}
    if vacuous:
        # bases never co-locate on the witness; only the base verdict is
        # meaningful and the fiber test is flagged, not failed
        return VBEquivalenceReport(
            base_report.equivalent, base_report, True, route_bank, True, diagnostics
        )
    if route_chart != route_bank:
        raise InconsistentRoutes(
            f"vb fiber routes disagree: chart={route_chart}, bank={route_bank} "
            f"for ({u.label!r}, {v.label!r})"
        )
    equivalent = base_report.equivalent and route_chart
    return VBEquivalenceReport(
        equivalent, base_report, route_chart, route_bank, False, diagnostics
    )


# ---------------------------------------------------------------------------
# composition


def _quick_moderate_guard(net: Net, box, label: str):
    """Coarse order-0 check that a freshly composed fiber net is usable."""
    from .geometry import sample_box

    if box is None:
        return
    box = np.asarray(box, dtype=float)
    mid = 0.5 * (box[:, :1] + box[:, 1:])
    pts = sample_box(mid + 0.8 * (box - mid), 4)
    grid = EpsGrid.dyadic(4, 9)
    curve = []
    for eps in grid:
        vals = net.at(eps)(pts)
        curve.append(_sup_abs(vals))
    verdict = estimate_growth_order(curve, grid)
    if verdict.classification == NEITHER:
        raise NotModerate(f"composed fiber net {label!r} fails moderateness")


def compose_homs(u: HomNet, v: HomNet, label="") -> HomNet:
    """The hom whose fiber matrices multiply through the middle bundle."""
    if u.target is not v.source and u.target.fiber_dim != v.source.fiber_dim:
        raise AtlasMismatch("hom composition needs matching middle bundle")
    base = compose(u.base_net, v.base_net, label=label)
    fiber = {}
    for (s, m1), net_u in u.fiber_nets.items():
        for (m2, t), net_v in v.fiber_nets.items():
            if m1 != m2:
                continue

            def mat(e, x, _nu=net_u, _nv=net_v, _s=s, _m=m1):
                Mu = fiber_values(_nu, e, x)
                tgt, y = u.base_net.eval(e, x, _s)
                if tgt != _m:
                    y = u.target.base.to_chart(y, tgt, _m)
                Mv = fiber_values(_nv, e, y)
                return Mv @ Mu

            fiber[(s, t)] = matrix_net(
                mat,
                u.source.base.dim,
                (v.target.fiber_dim, u.source.fiber_dim),
                box=net_u.box,
                label=f"{net_v.label}*{net_u.label}",
            )
    if not fiber:
        raise AtlasMismatch("no chart pair chains through the middle bundle")
    out = HomNet(u.source, v.target, base, fiber, label or f"{v.label}o{u.label}")
    for (s, t), net in out.fiber_nets.items():
        _quick_moderate_guard(net, net.box, net.label)
    return out


# ---------------------------------------------------------------------------
# hybrid nets


@dataclass
class HybridNet:
    """Net from a manifold into a vector bundle: base map plus fiber vector."""

    source: object
    target: VBAtlas
    base_net: ManifoldNet
    fiber_nets: dict
    label: str = ""

    def __post_init__(self):
        m = self.target.fiber_dim
        for (s, t), net in self.fiber_nets.items():
            if net.fiber_shape != (m,):
                raise DimensionMismatch(
                    f"hybrid fiber net ({s},{t}) has shape {net.fiber_shape}, "
                    f"expected ({m},)"
                )

    def fiber_for(self, src_chart: str):
        for (s, t), net in self.fiber_nets.items():
            if s == src_chart:
                return t, net
        raise AtlasMismatch(f"no fiber net with source chart {src_chart!r}")

    def apply(self, eps: float, x, src_chart: Optional[str] = None):
        if src_chart is None:
            src_chart = next(iter(self.fiber_nets))[0]
        tgt, y = self.base_net.eval(eps, x, src_chart)
        t2, net = self.fiber_for(src_chart)
        vec = fiber_values(net, eps, np.asarray(x, dtype=float))
        if t2 != tgt:
            y = self.target.base.to_chart(y, tgt, t2)
            tgt = t2
        return tgt, y, vec


def single_chart_hybrid(
    source,
    target: VBAtlas,
    base: ManifoldNet,
    vector_fn,
    src_chart="main",
    tgt_chart="main",
    jet=None,
    label="",
) -> HybridNet:
    v = matrix_net(
        vector_fn,
        source.dim,
        (target.fiber_dim,),
        jet=jet,
        box=source.chart(src_chart).box,
        label=label,
    )
    return HybridNet(source, target, base, {(src_chart, tgt_chart): v}, label)


def section_net(vb: VBAtlas, vector_fn, chart="main", jet=None, label="") -> HybridNet:
    """Generalized section: hybrid net over the identity base."""
    from .manifold_maps import single_chart_map

    base = single_chart_map(
        vb.base, vb.base, lambda e, x: x, src_chart=chart, tgt_chart=chart,
        label=f"id[{label}]",
    )
    return single_chart_hybrid(vb.base, vb, base, vector_fn, chart, chart, jet, label)


def check_hybrid_moderate(
    u: HybridNet,
    L: CompactSet,
    k_max: int = 2,
    grid: Optional[EpsGrid] = None,
    bank: Optional[TestBank] = None,
) -> VBModerateReport:
    grid = grid or EpsGrid.default()
    base_report = check_moderate(u.base_net, L, k_max=k_max, grid=grid)
    witness = base_report.witness
    pts = _check_points(L)
    fiber_verdicts = _fiber_entry_curves(u, L, k_max, grid, pts)
    if bank is None:
        bank = default_test_bank(u.target.base, witness, vb=u.target)
    bank_verdicts = []
    src = L.chart_id
    t_u, net_u = u.fiber_for(src)
    for test in bank.vbhom_tests:
        curve = []
        for eps in grid:
            tgt, y = u.base_net.eval(eps, pts, src)
            if tgt != test.chart_id:
                y = u.target.base.to_chart(y, tgt, test.chart_id)
            chi = test.cutoff(y)[..., 0]
            vec = fiber_values(net_u, eps, pts)
            curve.append(_sup_abs(chi[..., None] * vec))
        bank_verdicts.append(estimate_growth_order(curve, grid))
    verdict = _combine_verdicts(
        [base_report.verdict] + [v for _, v in fiber_verdicts] + bank_verdicts
    )
    return VBModerateReport(verdict, base_report, fiber_verdicts, bank_verdicts, witness)


def check_hybrid_equivalent(
    u: HybridNet,
    v: HybridNet,
    L: CompactSet,
    grid: Optional[EpsGrid] = None,
    bank: Optional[TestBank] = None,
    derivative_order: int = 0,
) -> VBEquivalenceReport:
    """Base equivalence plus order-0 fiber-vector differences; the test-hom
    route cross-checks the chart route."""
    grid = grid or EpsGrid.default()
    mu = check_hybrid_moderate(u, L, grid=grid)
    mv = check_hybrid_moderate(v, L, grid=grid)
    if not (bool(mu) and bool(mv)):
        raise NotModerate("hybrid equivalence needs both nets moderate")

    base_report = check_equivalent(u.base_net, v.base_net, L, grid=grid)
    lo = np.minimum(mu.witness.box[:, 0], mv.witness.box[:, 0])
    hi = np.maximum(mu.witness.box[:, 1], mv.witness.box[:, 1])
    witness_box = np.stack([lo, hi], axis=-1)
    pts = _check_points(L)
    src = L.chart_id
    t_u, net_u = u.fiber_for(src)
    t_v, net_v = v.fiber_for(src)

    route_chart = True
    vacuous = True
    for k in range(derivative_order + 1):
        curve = []
        for eps in grid:
            tu, yu = u.base_net.eval(eps, pts, src)
            tv, yv = v.base_net.eval(eps, pts, src)
            if tv != tu:
                yv = u.target.base.to_chart(yv, tv, tu)
            mask = np.all(
                (yu >= witness_box[:, 0]) & (yu <= witness_box[:, 1])
                & (yv >= witness_box[:, 0]) & (yv <= witness_box[:, 1]),
                axis=-1,
            )
            if not np.any(mask):
                curve.append(0.0)
                continue
            vacuous = False
            hu, hv = net_u.at(eps), net_v.at(eps)
            sup = 0.0
            for alpha in _index_tuples(net_u.dim_in, k):
                ju = hu.jet(pts, alpha, _fiber_step(eps, k))
                jv = hv.jet(pts, alpha, _fiber_step(eps, k))
                sup = max(sup, _sup_diff(ju, jv, mask))
            curve.append(sup)
        if not negligible_to_resolution(curve, grid):
            route_chart = False

    if bank is None:
        bank = default_test_bank(u.target.base, mu.witness, vb=u.target)
    route_bank = True
    for test in bank.vbhom_tests:
        curve = []
        for eps in grid:
            tu, yu = u.base_net.eval(eps, pts, src)
            tv, yv = v.base_net.eval(eps, pts, src)
            if tu != test.chart_id:
                yu = u.target.base.to_chart(yu, tu, test.chart_id)
            if tv != test.chart_id:
                yv = u.target.base.to_chart(yv, tv, test.chart_id)
            chi_u = test.cutoff(yu)[..., 0]
            chi_v = test.cutoff(yv)[..., 0]
            su = fiber_values(net_u, eps, pts)
            sv = fiber_values(net_v, eps, pts)
            curve.append(_sup_diff(chi_u[..., None] * su, chi_v[..., None] * sv))
        if not negligible_to_resolution(curve, grid):
            route_bank = False

    diagnostics = {"grid": grid, "derivative_order": derivative_order}
    if vacuous:
        return VBEquivalenceReport(
            base_report.equivalent, base_report, True, route_bank, True, diagnostics
        )
    if route_chart != route_bank:
        raise InconsistentRoutes(
            f"hybrid fiber routes disagree: chart={route_chart}, bank={route_bank} "
            f"for ({u.label!r}, {v.label!r})"
        )
    return VBEquivalenceReport(
        base_report.equivalent and route_chart,
        base_report,
        route_chart,
        route_bank,
        False,
        diagnostics,
    )


def hybrid_point_value(
    u: HybridNet, p: GeneralizedManifoldPoint
) -> VBGeneralizedPoint:
    cb = check_cbounded(u.base_net, p.support)
    if not cb.ok:
        raise NotCBounded("hybrid point value needs a c-bounded base net")

    def at(eps):
        cid, x = p.at(eps)
        tgt, y, vec = u.apply(eps, x[None, :], cid)
        return tgt, y[0], vec[0]

    return VBGeneralizedPoint(at, cb.witness, label=f"{u.label}({p.label})")


def check_hybrid_pointvalues(
    u: HybridNet,
    v: HybridNet,
    sample_points: Sequence[GeneralizedManifoldPoint],
    L: Optional[CompactSet] = None,
    grid: Optional[EpsGrid] = None,
    include_adversarial: bool = True,
) -> tuple[bool, dict]:
    """Values-at-points characterization of hybrid equality."""
    grid = grid or EpsGrid.default()
    points = list(sample_points)
    if include_adversarial and L is not None:
        points.append(_adversarial_hybrid_point(u, v, L, grid))
    failed = []
    for p in points:
        pu = hybrid_point_value(u, p)
        pv = hybrid_point_value(v, p)
        if not vb_points_equivalent(u.target, pu, pv, grid):
            failed.append(p)
    return not failed, {"failed_points": failed, "tested": len(points)}


def _adversarial_hybrid_point(u, v, L, grid) -> GeneralizedManifoldPoint:
    pts = _check_points(L)
    src = L.chart_id
    _, net_u = u.fiber_for(src)
    _, net_v = v.fiber_for(src)
    chosen = {}
    for eps in grid:
        _, yu = u.base_net.eval(eps, pts, src)
        _, yv = v.base_net.eval(eps, pts, src)
        su = fiber_values(net_u, eps, pts)
        sv = fiber_values(net_v, eps, pts)
        gap = np.max(np.abs(yu - yv), axis=-1) + np.max(np.abs(su - sv), axis=-1)
        gap = np.where(np.isfinite(gap), gap, np.inf)
        chosen[eps] = pts[int(np.argmax(gap))]
    eps_sorted = sorted(chosen, reverse=True)

    def at(eps):
        for e in eps_sorted:
            if eps >= e:
                return chosen[e]
        return chosen[eps_sorted[-1]]

    return GeneralizedManifoldPoint(at, L, label="adversarial")


def compose_hybrid(u: ManifoldNet, v: HybridNet, label="") -> HybridNet:
    """Hybrid after a manifold net: fiber part pulled back along u."""
    if u.target is not v.source and u.target.dim != v.source.dim:
        raise AtlasMismatch("hybrid composition needs matching middle manifold")
    base = compose(u, v.base_net, label=label)
    fiber = {}
    for (s, m1), net_base in u.reps.items():
        for (m2, t), net_v in v.fiber_nets.items():
            if m1 != m2:
                continue

            def vec(e, x, _nv=net_v, _s=s, _m=m1):
                tgt, y = u.eval(e, x, _s)
                if tgt != _m:
                    y = u.target.to_chart(y, tgt, _m)
                return fiber_values(_nv, e, y)

            fiber[(s, t)] = matrix_net(
                vec, u.source.dim, (v.target.fiber_dim,),
                box=net_base.box, label=f"{net_v.label}o{u.label}",
            )
    if not fiber:
        raise AtlasMismatch("no chart pair chains through the middle manifold")
    return HybridNet(u.source, v.target, base, fiber, label or f"{v.label}o{u.label}")


def compose_hybrid_hom(v: HybridNet, w: HomNet, label="") -> HybridNet:
    """Hom after a hybrid: the fiber vector runs through w's matrices."""
    if v.target is not w.source and v.target.fiber_dim != w.source.fiber_dim:
        raise AtlasMismatch("composition needs matching middle bundle")
    base = compose(v.base_net, w.base_net, label=label)
    fiber = {}
    for (s, m1), net_v in v.fiber_nets.items():
        for (m2, t), net_w in w.fiber_nets.items():
            if m1 != m2:
                continue

            def vec(e, x, _nv=net_v, _nw=net_w, _s=s, _m=m1):
                sv = fiber_values(_nv, e, x)
                tgt, y = v.base_net.eval(e, x, _s)
                if tgt != _m:
                    y = v.target.base.to_chart(y, tgt, _m)
                M = fiber_values(_nw, e, y)
                return np.einsum("...ij,...j->...i", M, sv)

            fiber[(s, t)] = matrix_net(
                vec, v.source.dim, (w.target.fiber_dim,),
                box=net_v.box, label=f"{net_w.label}o{net_v.label}",
            )
    if not fiber:
        raise AtlasMismatch("no chart pair chains through the middle bundle")
    return HybridNet(v.source, w.target, base, fiber, label or f"{w.label}o{v.label}")


# ---------------------------------------------------------------------------
# representative alignment


@dataclass
class AlignmentInfo:
    eps_threshold: float
    radius: float
    region: CompactSet
    passthrough: bool = False


def _alignment_radius(atlas, witness: CompactSet) -> float:
    """Default ball radius: half the minimal chart-overlap width when the
    atlas declares transitions, else half the smallest gap between the
    witness box and its chart boundary."""
    from .geometry import sample_box

    widths = []
    for (a, b) in getattr(atlas, "transitions", {}):
        pts = sample_box(atlas.chart(a).box, 33 if atlas.dim == 1 else 9)
        try:
            ys = atlas.to_chart(pts, a, b)
        except AtlasMismatch:
            continue
        bbox = atlas.chart(b).box
        inside = np.all((ys >= bbox[:, 0]) & (ys <= bbox[:, 1]), axis=-1)
        if np.count_nonzero(inside) < 2:
            continue
        span = pts[inside]
        widths.append(float(np.min(span.max(axis=0) - span.min(axis=0))))
    if widths:
        r = 0.5 * min(widths)
        if r <= 0:
            raise AlignmentError("chart overlaps are too thin for a ball cover")
        return r
    chart = atlas.chart(witness.chart_id)
    gaps = np.minimum(
        witness.box[:, 0] - chart.box[:, 0], chart.box[:, 1] - witness.box[:, 1]
    )
    r = 0.5 * float(np.min(gaps))
    if r <= 0:
        raise AlignmentError("witness region touches the chart boundary")
    return r


def align_representative(
    v,
    u_rep: ManifoldNet,
    L: CompactSet,
    grid: Optional[EpsGrid] = None,
    radius: Optional[float] = None,
    cores: Optional[Sequence[CompactSet]] = None,
):
    """Rebase a hom or hybrid net so its induced base map IS ``u_rep``.

    Each fiber value is transported from the old base image to the new one
    through the vb-chart cover of the working region (``cores`` overrides
    the default single-piece cover), weighted by a partition of unity.
    Below the recorded eps threshold the output's base evaluations are
    bitwise those of ``u_rep``; above it the original fiber values pass
    through unchanged and the report says so.
    """
    grid = grid or EpsGrid.default()
    is_hom = isinstance(v, HomNet)
    target = v.target
    atlas = target.base

    cb_v = check_cbounded(v.base_net, L, grid)
    cb_u = check_cbounded(u_rep, L, grid)
    if not (cb_v.ok and cb_u.ok):
        raise NotCBounded("alignment needs both base nets c-bounded on L")
    lo = np.minimum(cb_v.witness.box[:, 0], cb_u.witness.box[:, 0])
    hi = np.maximum(cb_v.witness.box[:, 1], cb_u.witness.box[:, 1])
    region = CompactSet(cb_v.witness.chart_id, np.stack([lo, hi], axis=-1))
    r = radius if radius is not None else _alignment_radius(atlas, region)

    # threshold: all smaller grid eps keep the two base images r-close
    pts = _check_points(L)
    src = L.chart_id
    ok_from = None
    for i, eps in enumerate(grid.values):
        t_u, yu = u_rep.eval(eps, pts, src)
        t_v, yv = v.base_net.eval(eps, pts, src)
        if t_v != t_u:
            yv = atlas.to_chart(yv, t_v, t_u)
        d = max(
            chord_distance(atlas, t_u, a, b) for a, b in zip(yu, yv)
        )
        if d < r:
            if ok_from is None:
                ok_from = i
        else:
            ok_from = None
    if ok_from is None:
        raise AlignmentError(
            f"sup distance never drops below the alignment radius {r:.3g} "
            "on the tested grid"
        )
    eps_threshold = grid.values[ok_from]

    members = partition_of_unity(atlas, list(cores) if cores else [region])
    t_in, old_net = v.fiber_for(src)
    shape = old_net.fiber_shape
    trivial = (
        len(members) == 1
        and members[0].chart_id == t_in
        and len(target.vb_chart_ids) == 1
    )

    def new_fiber(eps, x):
        old = fiber_values(old_net, eps, x)
        if trivial or eps > eps_threshold:
            # one trivialization covers everything: transport between the
            # old and new base points is the identity, fiber passes through
            return old
        tu, y_new = u_rep.eval(eps, x, src)
        if tu != t_in:
            y_new = atlas.to_chart(y_new, tu, t_in)
        tv, y_old = v.base_net.eval(eps, x, src)
        if tv != t_in:
            y_old = atlas.to_chart(y_old, tv, t_in)
        acc = np.zeros_like(old)
        for member in members:
            y_new_j = (
                y_new if member.chart_id == t_in
                else atlas.to_chart(y_new, t_in, member.chart_id)
            )
            chi = member.handle(y_new_j)[..., 0]
            into = target.fiber_transition(t_in, member.chart_id, y_old)
            back = target.fiber_transition(member.chart_id, t_in, y_new_j)
            if is_hom:
                moved = np.einsum(
                    "...ij,...jk,...kl->...il", back, into, old
                )
                acc = acc + chi[..., None, None] * moved
            else:
                moved = np.einsum("...ij,...jk,...k->...i", back, into, old)
                acc = acc + chi[..., None] * moved
        return acc

    aligned = matrix_net(
        new_fiber, old_net.dim_in, shape, box=old_net.box,
        label=f"aligned({old_net.label})",
    )
    info = AlignmentInfo(
        eps_threshold, r, region, passthrough=eps_threshold < grid.values[0]
    )
    if is_hom:
        out = HomNet(v.source, target, u_rep, {(src, t_in): aligned},
                     label=f"aligned({v.label})")
    else:
        out = HybridNet(v.source, target, u_rep, {(src, t_in): aligned},
                        label=f"aligned({v.label})")
    out.alignment = info
    return out


def hom_u_add(v1: HomNet, v2: HomNet, u_rep: ManifoldNet, L: CompactSet,
              grid: Optional[EpsGrid] = None) -> HomNet:
    """Fiberwise sum after aligning both homs to the shared base."""
    a1 = align_representative(v1, u_rep, L, grid)
    a2 = align_representative(v2, u_rep, L, grid)
    src = L.chart_id
    t1, n1 = a1.fiber_for(src)
    t2, n2 = a2.fiber_for(src)
    if t1 != t2:
        raise AlignmentError("aligned homs land in different vb charts")

    def mat(e, x):
        return fiber_values(n1, e, x) + fiber_values(n2, e, x)

    summed = matrix_net(mat, n1.dim_in, n1.fiber_shape, box=n1.box,
                        label=f"{v1.label}+{v2.label}")
    out = HomNet(v1.source, v1.target, u_rep, {(src, t1): summed},
                 label=f"{v1.label}+{v2.label}")
    out.alignment = a1.alignment
    return out


def hom_u_scale(c: float, v: HomNet, u_rep: Optional[ManifoldNet] = None,
                L: Optional[CompactSet] = None,
                grid: Optional[EpsGrid] = None) -> HomNet:
    """Fiberwise scaling; aligns first when a shared base is requested."""
    if u_rep is not None:
        if L is None:
            raise AlignmentError("scaling with alignment needs the working region")
        v = align_representative(v, u_rep, L, grid)
    c = float(c)
    fiber = {}
    for (s, t), net in v.fiber_nets.items():
        def mat(e, x, _n=net):
            return c * fiber_values(_n, e, x)

        fiber[(s, t)] = matrix_net(mat, net.dim_in, net.fiber_shape, box=net.box,
                                   label=f"{c}*{net.label}")
    out = HomNet(v.source, v.target, v.base_net, fiber, label=f"{c}*{v.label}")
    if hasattr(v, "alignment"):
        out.alignment = v.alignment
    return out


# ---------------------------------------------------------------------------
# metric pairing derivative


@dataclass
class PairingReport:
    residuals: dict
    max_residual: float

    def __bool__(self):
        return np.isfinite(self.max_residual)


def _christoffel_fd(metric_fn, eps, x, h=1e-5):
    """Gamma^k_ij from central differences of the metric."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    g = np.asarray(metric_fn(eps, x), dtype=float)
    dg = np.empty(x.shape[:-1] + (n, n, n))
    for l in range(n):
        step = np.zeros(n)
        step[l] = h
        gp = np.asarray(metric_fn(eps, x + step), dtype=float)
        gm = np.asarray(metric_fn(eps, x - step), dtype=float)
        dg[..., l, :, :] = (gp - gm) / (2.0 * h)
    ginv = np.linalg.inv(g)
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
    term = (
        np.einsum("...ilj->...lij", dg)
        + np.einsum("...jli->...lij", dg)
        - np.einsum("...lij->...lij", dg)
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)


def metric_pairing_derivative_check(
    metric_fn,
    xi: HybridNet,
    eta: HybridNet,
    eps_values=(1e-2,),
    t_span=(-1.0, 1.0),
    step: float = 1e-4,
    christoffel=None,
) -> PairingReport:
    """Residual of d/dt g(xi, eta) = g(xi', eta) + g(xi, eta') along the
    shared base curve, with the covariant derivative from the metric's
    Christoffel symbols (finite differences unless supplied).

    ``xi`` and ``eta`` must share their base net object; align first.
    """
    if xi.base_net is not eta.base_net:
        raise AlignmentError("pairing check needs fields over the same curve net")
    curve = xi.base_net
    src = next(iter(curve.reps))[0]
    _, net_xi = xi.fiber_for(src)
    _, net_eta = eta.fiber_for(src)
    gamma = christoffel or _christoffel_fd

    residuals = {}
    for eps in eps_values:
        ts = np.arange(t_span[0], t_span[1] + 0.5 * step, step)[:, None]
        _, x = curve.eval(eps, ts, src)
        xi_v = fiber_values(net_xi, eps, ts)
        eta_v = fiber_values(net_eta, eps, ts)
        g = np.asarray(metric_fn(eps, x), dtype=float)

        h_curve = curve.rep_for(src)[1].at(eps)
        xdot = h_curve.jet(ts, (1,), 1e-6)
        dxi = finite_difference_jet(lambda t: net_xi.at(eps)(t), ts, (1,), 1e-6)
        dxi = dxi.reshape(xi_v.shape)
        deta = finite_difference_jet(lambda t: net_eta.at(eps)(t), ts, (1,), 1e-6)
        deta = deta.reshape(eta_v.shape)

        G = gamma(metric_fn, eps, x)
        xi_prime = dxi + np.einsum("...kij,...i,...j->...k", G, xdot, xi_v)
        eta_prime = deta + np.einsum("...kij,...i,...j->...k", G, xdot, eta_v)

        pairing = np.einsum("...i,...ij,...j->...", xi_v, g, eta_v)
        lhs = np.gradient(pairing, step, axis=0)
        rhs = np.einsum("...i,...ij,...j->...", xi_prime, g, eta_v) + np.einsum(
            "...i,...ij,...j->...", xi_v, g, eta_prime
        )
        interior = slice(2, -2)
        residuals[eps] = float(np.max(np.abs(lhs - rhs)[interior]))
    return PairingReport(residuals, max(residuals.values()))

"""Epsilon-parametrized nets of smooth maps on boxes in chart coordinates.

A :class:`Net` is a family ``eps -> smooth map`` on a domain box; every map
is a :class:`SmoothMapHandle` that evaluates points and partial-derivative
jets.  Jets come from an analytic rule where the constructor supplies one
(up to ``k_max``) and otherwise from central finite differences with two
Richardson extrapolation levels.  The finite-difference step shrinks with
eps, ``h = max(eps**1.5, 1e-7) * (1 + |x|)``, because interesting nets
oscillate at scale eps.

Points are numpy arrays whose last axis is the input dimension; evaluation
broadcasts over leading axes.  Multi-indices are integer tuples of length
``dim_in``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteValue,
    OrderUnreachable,
    OutsideDomain,
)

#: sentinel order for handles whose analytic jets are valid at every order
INF_ORDER = 10**6

#: composition uses the exact multivariate chain rule up to this jet order,
#: plain finite differences of the composite above it
CHAIN_ORDER_CAP = 3

#: finite differences support jets up to this order (beyond analytic reach)
FD_ORDER_CAP = 4

_RICHARDSON_LEVELS = 2

# multiplier on the eps_mach * sum|coeffs| * max|f| / h^k roundoff scale;
# covers the Richardson combination weights with margin
_FD_NOISE_C = 4.0


def fd_step(eps: float) -> float:
    """Base finite-difference step for the eps-slice of a net."""
    return max(eps**1.5, 1e-7)


# ---------------------------------------------------------------------------
# multi-index utilities


def order(alpha) -> int:
    return int(sum(alpha))


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return tuple(e)


def add_index(alpha, beta):
    return tuple(a + b for a, b in zip(alpha, beta))


def sub_indices(alpha):
    """All multi-indices beta <= alpha (componentwise), including bounds."""
    ranges = [range(a + 1) for a in alpha]
    return itertools.product(*ranges)


def index_binom(alpha, beta) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if dim != 1:
            raise DimensionMismatch(f"scalar point given, expected dim {dim}")
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"point has dim {x.shape[-1]}, expected {dim}")
    return x


# ---------------------------------------------------------------------------
# finite differences

def _stencil(alpha):
    """Tensor-product central-difference stencil: (offsets, coeffs) in h units."""
    per_dim = []
    for a in alpha:
        if a == 0:
            per_dim.append([(0.0, 1.0)])
        else:
            pts = [((a / 2.0 - j), (-1.0) ** j * math.comb(a, j)) for j in range(a + 1)]
            per_dim.append(pts)
    offsets, coeffs = [], []
    for combo in itertools.product(*per_dim):
        offsets.append([c[0] for c in combo])
        coeffs.append(math.prod(c[1] for c in combo))
    return np.asarray(offsets), np.asarray(coeffs)


def finite_difference_jet(eval_fn, x, alpha, step):
    """Central-difference jet of ``eval_fn`` at ``x`` with Richardson levels.

    ``step`` is the base step; the actual step per point is
    ``step * (1 + max_i |x_i|)``.  The stencil may probe points slightly
    outside a declared domain box, so evaluators must tolerate an
    O(step)-neighborhood of it.

    Results smaller than the stencil's roundoff resolution at its finest
    level are measured zeros and returned as exact 0.0; without the snap,
    curves of true-zero jets read as roundoff noise growing like a power
    of 1/h and poison growth fits.
    """
    k = order(alpha)
    if k == 0:
        return eval_fn(x)
    offsets, coeffs = _stencil(alpha)
    scale = step * (1.0 + np.max(np.abs(x), axis=-1, keepdims=True))
    fmax = None

    def estimate(h):
        nonlocal fmax
        acc = None
        for off, c in zip(offsets, coeffs):
            val = eval_fn(x + h * off)
            a = np.abs(np.asarray(val, dtype=float))
            fmax = a if fmax is None else np.maximum(fmax, a)
            acc = c * val if acc is None else acc + c * val
        return acc / (h**k)

    estimates = [estimate(scale / (2.0**lvl)) for lvl in range(_RICHARDSON_LEVELS + 1)]
    # central differences have an even error expansion: orders 2, 4, ...
    p = 2.0
    for lvl in range(_RICHARDSON_LEVELS):
        factor = 2.0 ** (p * (lvl + 1))
        estimates = [
            (factor * hi - lo) / (factor - 1.0)
            for lo, hi in zip(estimates[:-1], estimates[1:])
        ]
    result = np.asarray(estimates[0], dtype=float)
    h_min = scale / (2.0**_RICHARDSON_LEVELS)
    floor = (
        _FD_NOISE_C
        * np.finfo(float).eps
        * np.sum(np.abs(coeffs))
        * fmax
        / (h_min**k)
    )
    snap = np.isfinite(result) & np.isfinite(floor) & (np.abs(result) <= floor)
    return np.where(snap, 0.0, result)


# ---------------------------------------------------------------------------
# smooth map handles


@dataclass
class SmoothMapHandle:
    """A single smooth map with point and jet evaluation.

    ``jet_fn(x, alpha)`` supplies analytic partial derivatives for
    ``|alpha| <= k_max``; ``k_max = 0`` means finite differences are the
    only route above order zero.  ``jet_impl`` replaces the whole dispatch
    (used by algebraic combinators that delegate to their operands).
    """

    dim_in: int
    dim_out: int
    eval_fn: Callable
    jet_fn: Optional[Callable] = None
    k_max: int = 0
    jet_impl: Optional[Callable] = None
    name: str = ""

    def __call__(self, x):
        x = _as_points(x, self.dim_in)
        out = np.asarray(self.eval_fn(x), dtype=float)
        return out

    def jet(self, x, alpha, step=1e-6):
        x = _as_points(x, self.dim_in)
        if len(alpha) != self.dim_in:
            raise DimensionMismatch(
                f"multi-index length {len(alpha)} != dim_in {self.dim_in}"
            )
        k = order(alpha)
        if k == 0:
            return self(x)
        if self.jet_impl is not None:
            return np.asarray(self.jet_impl(x, tuple(alpha), step), dtype=float)
        if self.jet_fn is not None and k <= self.k_max:
            return np.asarray(self.jet_fn(x, tuple(alpha)), dtype=float)
        return finite_difference_jet(self.eval_fn, x, tuple(alpha), step)

    def jacobian(self, x, step=1e-6):
        """Matrix of first partials, shape (..., dim_out, dim_in)."""
        cols = [self.jet(x, _unit(self.dim_in, i), step) for i in range(self.dim_in)]
        return np.stack(cols, axis=-1)


def make_handle(eval_fn, dim_in, dim_out, jet_fn=None, k_max=0, name=""):
    if jet_fn is not None and k_max == 0:
        k_max = INF_ORDER
    return SmoothMapHandle(dim_in, dim_out, eval_fn, jet_fn, k_max, name=name)


def constant_handle(value, dim_in):
    value = np.atleast_1d(np.asarray(value, dtype=float))

    def ev(x):
        return np.broadcast_to(value, x.shape[:-1] + value.shape).copy()

    def jf(x, alpha):
        return np.zeros(x.shape[:-1] + value.shape)

    return SmoothMapHandle(dim_in, value.shape[0], ev, jf, INF_ORDER, name="const")


def identity_handle(dim):
    def jf(x, alpha):
        k = order(alpha)
        out = np.zeros(x.shape[:-1] + (dim,))
        if k == 1:
            i = next(j for j, a in enumerate(alpha) if a)
            out[..., i] = 1.0
        return out

    return SmoothMapHandle(dim, dim, lambda x: x.copy(), jf, INF_ORDER, name="id")


# -- algebraic combinators ---------------------------------------------------


def handle_linear(handles: Sequence[SmoothMapHandle], coeffs: Sequence[float]):
    if not handles:
        raise DimensionMismatch("empty handle list")
    dim_in, dim_out = handles[0].dim_in, handles[0].dim_out
    for h in handles:
        if (h.dim_in, h.dim_out) != (dim_in, dim_out):
            raise DimensionMismatch("handles disagree in dimensions")
    if len(coeffs) != len(handles):
        raise DimensionMismatch("coefficient list length mismatch")
    coeffs = [float(c) for c in coeffs]

    def ev(x):
        acc = coeffs[0] * handles[0].eval_fn(x)
        for c, h in zip(coeffs[1:], handles[1:]):
            acc = acc + c * h.eval_fn(x)
        return acc

    def ji(x, alpha, step):
        acc = coeffs[0] * handles[0].jet(x, alpha, step)
        for c, h in zip(coeffs[1:], handles[1:]):
            acc = acc + c * h.jet(x, alpha, step)
        return acc

    k = min(h.k_max for h in handles)
    return SmoothMapHandle(dim_in, dim_out, ev, None, k, jet_impl=ji, name="lincomb")


def handle_product(f: SmoothMapHandle, g: SmoothMapHandle):
    """Componentwise product; jets by the Leibniz rule."""
    if f.dim_in != g.dim_in or f.dim_out != g.dim_out:
        raise DimensionMismatch("product operands disagree in dimensions")

    def ev(x):
        return f.eval_fn(x) * g.eval_fn(x)

    def ji(x, alpha, step):
        acc = 0.0
        for beta in sub_indices(alpha):
            gamma = tuple(a - b for a, b in zip(alpha, beta))
            acc = acc + index_binom(alpha, beta) * f.jet(x, beta, step) * g.jet(
                x, gamma, step
            )
        return acc

    k = min(f.k_max, g.k_max)
    return SmoothMapHandle(f.dim_in, f.dim_out, ev, None, k, jet_impl=ji, name="prod")


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1 :]
        yield [[first]] + part


def _chain_jet(outer, inner, x, alpha, step):
    """Multivariate Faa di Bruno over set partitions of the derivative slots."""
    dirs = [i for i, a in enumerate(alpha) for _ in range(a)]
    y = inner(x)
    m = inner.dim_out
    inner_cache, outer_cache = {}, {}

    def inner_jet(beta):
        if beta not in inner_cache:
            inner_cache[beta] = inner.jet(x, beta, step)
        return inner_cache[beta]

    def outer_jet(gamma):
        if gamma not in outer_cache:
            outer_cache[gamma] = outer.jet(y, gamma, step)
        return outer_cache[gamma]

    total = 0.0
    for part in _set_partitions(dirs):
        block_jets = []
        for block in part:
            beta = [0] * inner.dim_in
            for d in block:
                beta[d] += 1
            block_jets.append(inner_jet(tuple(beta)))
        r = len(part)
        for assign in itertools.product(range(m), repeat=r):
            gamma = [0] * m
            for a in assign:
                gamma[a] += 1
            weight = block_jets[0][..., assign[0]]
            for bj, a in zip(block_jets[1:], assign[1:]):
                weight = weight * bj[..., a]
            total = total + outer_jet(tuple(gamma)) * weight[..., None]
    return total


def handle_compose(outer: SmoothMapHandle, inner: SmoothMapHandle):
    if inner.dim_out != outer.dim_in:
        raise DimensionMismatch(
            f"inner dim_out {inner.dim_out} != outer dim_in {outer.dim_in}"
        )

    def ev(x):
        return outer.eval_fn(inner.eval_fn(x))

    def ji(x, alpha, step):
        if order(alpha) <= CHAIN_ORDER_CAP:
            return _chain_jet(outer, inner, x, alpha, step)
        return finite_difference_jet(ev, x, alpha, step)

    k = min(inner.k_max, outer.k_max, CHAIN_ORDER_CAP)
    return SmoothMapHandle(
        inner.dim_in, outer.dim_out, ev, None, k, jet_impl=ji, name="compose"
    )


# ---------------------------------------------------------------------------
# generalized numbers


@dataclass
class GeneralizedNumber:
    """An eps-indexed vector in R^d; moderateness is a query, not an invariant."""

    at_fn: Callable[[float], np.ndarray]
    d: int
    label: str = ""

    def at(self, eps: float) -> np.ndarray:
        v = np.atleast_1d(np.asarray(self.at_fn(eps), dtype=float))
        if v.shape != (self.d,):
            raise DimensionMismatch(f"value has shape {v.shape}, expected ({self.d},)")
        return v

    @classmethod
    def constant(cls, value, label=""):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(lambda eps: value, value.shape[0], label)

    def __sub__(self, other: "GeneralizedNumber") -> "GeneralizedNumber":
        if self.d != other.d:
            raise DimensionMismatch(f"dimensions {self.d} != {other.d}")
        return GeneralizedNumber(
            lambda eps: self.at(eps) - other.at(eps), self.d,
            f"{self.label or 'a'}-{other.label or 'b'}",
        )


# ---------------------------------------------------------------------------
# nets


@dataclass
class Net:
    """An eps-indexed family of smooth maps on a fixed domain box.

    ``at(eps)`` must be valid for every eps in (0, 1].  The box is the
    evaluability region: points outside raise, there is no extrapolation.
    ``feature_scale``, when set, maps eps to a list of (lo, hi) windows per
    axis-0 coordinate where the slice has eps-scale features (quadrature
    uses it to place subdivisions).
    """

    dim_in: int
    dim_out: int
    at_fn: Callable[[float], SmoothMapHandle]
    box: Optional[np.ndarray] = None
    label: str = ""
    feature_scale: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.box is not None:
            self.box = np.asarray(self.box, dtype=float).reshape(self.dim_in, 2)

    def at(self, eps: float) -> SmoothMapHandle:
        if not 0.0 < eps <= 1.0:
            raise OutsideDomain(f"eps {eps} outside (0, 1]")
        h = self._cache.get(eps)
        if h is None:
            h = self.at_fn(eps)
            if (h.dim_in, h.dim_out) != (self.dim_in, self.dim_out):
                raise DimensionMismatch("slice handle dimensions disagree with net")
            self._cache[eps] = h
        return h

    def contains(self, x) -> bool:
        if self.box is None:
            return True
        x = _as_points(x, self.dim_in)
        lo, hi = self.box[:, 0], self.box[:, 1]
        return bool(np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12))

    def eval(self, eps, x):
        return eval_jet(self, eps, x, (0,) * self.dim_in)

    def __repr__(self):
        return f"Net({self.label or 'unnamed'}, {self.dim_in}->{self.dim_out})"


def net_from_function(
    fn,
    dim_in,
    dim_out,
    box=None,
    jet=None,
    k_max=None,
    label="",
    feature_scale=None,
):
    """Net from ``fn(eps, x)`` with optional analytic jets ``jet(eps, x, alpha)``."""
    if k_max is None:
        k_max = INF_ORDER if jet is not None else 0

    def at(eps):
        jf = None if jet is None else (lambda x, alpha, _e=eps: jet(_e, x, alpha))
        return SmoothMapHandle(
            dim_in, dim_out, lambda x, _e=eps: fn(_e, x), jf, k_max
        )

    return Net(dim_in, dim_out, at, box, label, feature_scale)


def constant_net(handle: SmoothMapHandle, box=None, label=""):
    """Net whose slices are all the same smooth map (constant in eps)."""
    return Net(handle.dim_in, handle.dim_out, lambda eps: handle, box, label)


# -- spec operations ---------------------------------------------------------


def eval_jet(net: Net, eps: float, x, alpha):
    """Partial derivative of the eps-slice of ``net`` at ``x``.

    Uses the analytic jet when ``|alpha| <= k_max`` of the slice, central
    finite differences with Richardson extrapolation otherwise.
    """
    handle = net.at(eps)
    x = _as_points(x, net.dim_in)
    if not net.contains(x):
        raise OutsideDomain(f"point outside the domain box of {net.label or 'net'}")
    alpha = tuple(int(a) for a in alpha)
    k = order(alpha)
    if k > max(handle.k_max, FD_ORDER_CAP):
        raise OrderUnreachable(
            f"order {k} exceeds analytic ({handle.k_max}) and FD ({FD_ORDER_CAP}) support"
        )
    val = handle.jet(x, alpha, fd_step(eps))
    if np.any(np.isnan(val)):
        raise NonFiniteValue(f"jet {alpha} of {net.label or 'net'} returned NaN")
    return val


def compose_nets(outer: Net, inner: Net) -> Net:
    """Slicewise composition ``outer.at(eps) o inner.at(eps)``."""
    if inner.dim_out != outer.dim_in:
        raise DimensionMismatch(
            f"inner dim_out {inner.dim_out} != outer dim_in {outer.dim_in}"
        )
    return Net(
        inner.dim_in,
        outer.dim_out,
        lambda eps: handle_compose(outer.at(eps), inner.at(eps)),
        inner.box,
        label=f"({outer.label or 'outer'})o({inner.label or 'inner'})",
        feature_scale=inner.feature_scale,
    )


def linear_combination(nets: Sequence[Net], coeffs: Sequence[float]) -> Net:
    """Pointwise, slicewise linear combination; jets combine linearly."""
    if not nets:
        raise DimensionMismatch("empty net list")
    if len(nets) != len(coeffs):
        raise DimensionMismatch("coefficient list length mismatch")
    first = nets[0]
    for n in nets:
        if (n.dim_in, n.dim_out) != (first.dim_in, first.dim_out):
            raise DimensionMismatch("nets disagree in dimensions")
    box = None
    for n in nets:
        if n.box is not None:
            box = n.box if box is None else np.array(
                [np.maximum(box[:, 0], n.box[:, 0]), np.minimum(box[:, 1], n.box[:, 1])]
            ).T
    feats = [n.feature_scale for n in nets if n.feature_scale is not None]

    def feature(eps):
        out = []
        for f in feats:
            out.extend(f(eps))
        return out

    return Net(
        first.dim_in,
        first.dim_out,
        lambda eps: handle_linear([n.at(eps) for n in nets], coeffs),
        box,
        label="+".join(f"{c}*{n.label or 'net'}" for c, n in zip(coeffs, nets)),
        feature_scale=feature if feats else None,
    )


def directional_derivative(net: Net, field: SmoothMapHandle) -> Net:
    """Lie derivative of a scalar net along a smooth vector field, slicewise."""
    if net.dim_out != 1:
        raise DimensionMismatch("directional derivative requires a scalar net")
    n = net.dim_in
    if (field.dim_in, field.dim_out) != (n, n):
        raise DimensionMismatch(f"vector field must map R^{n} -> R^{n}")

    def at(eps):
        u = net.at(eps)
        step0 = fd_step(eps)

        def ev(x):
            xi = field.eval_fn(x)
            acc = 0.0
            for i in range(n):
                acc = acc + xi[..., i : i + 1] * u.jet(x, _unit(n, i), step0)
            return acc

        def ji(x, alpha, step):
            acc = 0.0
            for i in range(n):
                for beta in sub_indices(alpha):
                    gamma = tuple(a - b for a, b in zip(alpha, beta))
                    xi_b = field.jet(x, beta, step)[..., i : i + 1]
                    u_g = u.jet(x, add_index(gamma, _unit(n, i)), step)
                    acc = acc + index_binom(alpha, beta) * xi_b * u_g
            return acc

        k = max(0, min(field.k_max, u.k_max - 1))
        return SmoothMapHandle(n, 1, ev, None, k, jet_impl=ji, name="lie")

    return Net(n, 1, at, net.box, label=f"L({net.label or 'net'})")


# ---------------------------------------------------------------------------
# label registry (CLI addressing)

_REGISTRY: dict[str, Net] = {}


def register_net(net: Net, label=None) -> Net:
    key = label or net.label
    if not key:
        raise ValueError("net needs a label to be registered")
    _REGISTRY[key] = net
    return net


def lookup_net(label: str) -> Net:
    from .errors import UnknownNet

    try:
        return _REGISTRY[label]
    except KeyError:
        raise UnknownNet(f"no net registered under {label!r}") from None


def registered_nets():
    return dict(_REGISTRY)

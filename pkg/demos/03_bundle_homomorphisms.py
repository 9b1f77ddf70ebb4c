"""Vector-bundle homomorphisms over generalized base maps.

A hom net carries a base map together with fiber matrices.  Two homs
over slightly different bases can still be compared: alignment rebases
one onto the other's representative (base evaluations become bitwise
equal), after which fiberwise sum and scalar multiple are defined.  The
equivalence verdict is the same whether fiber jets are compared to
order 0 or order 2.
"""

import numpy as np

from colombeau.bundle_maps import (
    check_vb_equivalent,
    hom_u_add,
    hom_u_scale,
    single_chart_hom,
)
from colombeau.geometry import CompactSet, euclidean_atlas, trivial_bundle
from colombeau.manifold_maps import single_chart_map

LINE = euclidean_atlas(1)
TX = trivial_bundle(LINE, 1)
K = CompactSet("main", [(-1.0, 1.0)])

base = single_chart_map(
    LINE, LINE, lambda e, x: x,
    jet=lambda e, x, a: x if a[0] == 0 else (
        np.ones_like(x) if a[0] == 1 else np.zeros_like(x)),
    label="id",
)
drifted = single_chart_map(
    LINE, LINE, lambda e, x: x + np.exp(-1.0 / e), label="id+tail"
)

v = single_chart_hom(TX, TX, drifted, lambda e, x: 2.0 + np.sin(x), label="v")
w = single_chart_hom(TX, TX, base, lambda e, x: 1.0 + 0.5 * x, label="w")

print("alignment: rebasing v (base id + negligible drift) onto id")
from colombeau.bundle_maps import align_representative

aligned = align_representative(v, base, K)
print("    aligned base is the target representative:",
      aligned.base_net is base)
print("    aligned hom still equivalent to v:",
      check_vb_equivalent(aligned, v, K).equivalent)

print("\nmodule operations over the shared base")
s = hom_u_add(v, w, base, K)
s_flip = hom_u_add(w, v, base, K)
print("    v + w  ~  w + v :", check_vb_equivalent(s, s_flip, K).equivalent)
tw = hom_u_scale(2.0, w)
print("    2*(w) has doubled fiber:",
      np.allclose(tw.fiber_matrix(0.25, np.array([[0.3]]), "main")[1],
                  2 * w.fiber_matrix(0.25, np.array([[0.3]]), "main")[1]))

print("\nderivative-order collapse: order-0 and order-2 verdicts agree")
for label, other in [
    ("same fiber + negligible", single_chart_hom(
        TX, TX, base, lambda e, x: 1.0 + 0.5 * x + np.exp(-1.0 / e), label="w'")),
    ("fiber off by eps*x", single_chart_hom(
        TX, TX, base, lambda e, x: 1.0 + 0.5 * x + e * x, label="w''")),
]:
    v0 = check_vb_equivalent(w, other, K, derivative_order=0).equivalent
    v2 = check_vb_equivalent(w, other, K, derivative_order=2).equivalent
    print(f"    {label}: order0={v0} order2={v2}")

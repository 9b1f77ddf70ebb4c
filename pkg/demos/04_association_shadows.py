"""Association: weak limits recover distributions from their mollifications.

A mollified delta pairs with a test density to nu(0); the mollified step
satisfies H^2 ~ H in the weak sense even though the squared net is not
equal to the original.  Squaring a delta leaves the algebra's moderate
class unless renormalized by eps, and the renormalized square remembers
which mollifier built it: the two limits differ by the squared-mass
ratio, so association distinguishes what equality cannot.
"""

import numpy as np

from colombeau.association import (
    check_associated_zero,
    embed_distribution,
    shadow,
    sharp_mollifier,
    standard_mollifier,
)
from colombeau.geometry import DensityTest, euclidean_atlas, make_bump
from colombeau.nets import net_from_function

LINE = euclidean_atlas(1)
nu = DensityTest("main", make_bump(np.zeros(1), 0.05, 0.5),
                 np.array([[-0.5, 0.5]]), "nu")
nu0 = float(nu.handle(np.zeros((1, 1)))[0, 0])

rho1, rho2 = standard_mollifier(), sharp_mollifier()
print(f"mollifier squared masses: c1 = {rho1.squared_mass():.6f}, "
      f"c2 = {rho2.squared_mass():.6f} "
      f"(separation {abs(rho1.squared_mass() - rho2.squared_mass()) / rho1.squared_mass():.1%})")

heavi = embed_distribution("heaviside", rho1, LINE)
defect = net_from_function(
    lambda e, x: heavi.at(e)(x) ** 2 - heavi.at(e)(x), 1, 1,
    box=[(-10, 10)], label="H^2 - H", feature_scale=heavi.feature_scale,
)
rep = check_associated_zero(defect, [nu])
print(f"\nH^2 - H associated to zero: {bool(rep)} "
      f"(final pairing {rep.rows[0].final:.2e})")
h_mid = heavi.at(2.0**-10)(np.array([[0.0]]))[0, 0]
print(f"but H^2 - H is not the zero net: at the step midpoint the "
      f"difference is {h_mid**2 - h_mid:+.4f}")

print("\nrenormalized squared deltas: shadow of eps * d_eps^2")
for rho, tag in ((rho1, "c1"), (rho2, "c2")):
    d = embed_distribution("delta", rho, LINE)
    sq = net_from_function(
        lambda e, x, _d=d: e * _d.at(e)(x) ** 2, 1, 1, box=[(-10, 10)],
        label=f"eps*delta^2[{tag}]", feature_scale=d.feature_scale,
    )
    srep = shadow(sq, [nu], candidate=lambda n, _c=rho.squared_mass(): _c * nu0)
    row = srep.rows[0]
    print(f"    {tag}: limit {row.extrapolated:.6f}, "
          f"candidate {row.candidate:.6f}, residual {row.residual:.2e}")

print("\na net with no shadow: sin(1/eps) * bump(x)")
bump = make_bump(np.zeros(1), 0.2, 0.8)
flicker = net_from_function(
    lambda e, x: np.sin(1.0 / e) * bump(x), 1, 1, box=[(-10, 10)],
    label="flicker",
)
srep = shadow(flicker, [nu])
print(f"    converged: {srep.converged}, flag: {srep.rows[0].flag!r}")

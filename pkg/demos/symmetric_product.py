"""The symmetric product of w = z^2 on (P^1)^k.

Checks that pi(f_hat(x)) matches f(pi(x)) and compares the sampled adjoint
multiplicity with the k! delta(h)^k bound.
"""
from __future__ import annotations

import numpy as np

from corrlab.corr1 import critical_family, make_corr
from corrlab.mult import adjoint_multiplicity
from corrlab.symprod import delta_product_bound, induced_degrees, product_delta, sampled_delta, semiconjugacy_check

for name, h in [("w - z**2", make_corr("w - z**2")), ("family (2,3,c=5)", critical_family(2, 3, 5))]:
    for k in (2, 3):
        rep = semiconjugacy_check(h, k, 50, rng=np.random.default_rng(k))
        dh = adjoint_multiplicity(h)
        print(f"{name:20s} k={k} degrees {induced_degrees(*h.bidegree, k).degrees} "
              f"residual {rep.max_residual:.1e} delta {sampled_delta(h, k)} "
              f"<= bound {delta_product_bound(product_delta(dh, k), k)}")

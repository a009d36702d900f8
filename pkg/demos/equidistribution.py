"""Backward orbits of w = z^2 accumulate on the unit circle.

Samples d1^-n (f^n)^* delta_a by random backward paths, pairs the result
against the standard test functions and compares with the circle average.
Then fits the geometric rate of the exact pullback iterates.
"""
from __future__ import annotations

from corrlab.corr1 import make_corr
from corrlab.green import backward_orbit_sample, circle_average, equidist_rate, pair_with_sigma, standard_test_functions

f = make_corr("w - z**2")
mu = backward_orbit_sample(f, 1.0 + 0.5j, 12, 200_000, seed=7)
for phi in standard_test_functions():
    val, sig = pair_with_sigma(mu, phi)
    ref = circle_average(phi)
    fit = equidist_rate(f, 1.0 + 0.5j, phi, 12)
    print(f"{phi.kind:10s} mc {val:+.5f} +- {sig:.1e}  circle {ref:+.5f}  "
          f"z-score {(val - ref) / sig:+.2f}  rate {fit.lam:.3f} (R^2 {fit.r2:.3f})")

#!/usr/bin/env python3
"""Walk through the SO(3) x Id_2 Cayley fibration.

For fixed ``v`` the invariant fibres are level sets of the first integral
``F(alpha, u)``.  The value ``5 c v H(pi/2)`` separates fibres that reach the
zero section at some ``alpha_0 < pi/2`` from fibres that escape to infinity,
and the fibre exactly at the threshold is the singular one through
``alpha = pi/2``.  The script traces one fibre of each kind, reports where it
ends and the largest Cayley residual along it, and then fits the asymptotic
cone at both ends of an escaping fibre.
"""

import numpy as np

from bscayley.so3 import (
    SO3FibreParams,
    asymptotic_cone_so3,
    curve_eta_residuals,
    singular_model_so3,
    threshold_F,
    trace_level_set,
)


def main() -> None:
    c, v = 1.0, 1.0
    thr = threshold_F(v, c)
    print(f"threshold 5 c v H(pi/2) = {thr:.15f}")
    for scale in (0.5, 1.0, 1.5):
        params = SO3FibreParams(0.0, 0.0, v, scale * thr, c)
        curve = trace_level_set(params, n=81)
        eta = curve_eta_residuals(curve)
        print(f"F = {scale:.1f} x threshold: {curve.topology:<12} ends at alpha = {curve.alpha_end:.12f}, "
              f"max Cayley residual {np.nanmax(eta):.1e}")

    params = SO3FibreParams(0.0, 0.0, v, 2.0 * thr, c)
    for end in ("alpha_to_0", "alpha_to_pi_half"):
        fit = asymptotic_cone_so3(params, end)
        print(f"cone at {end:<16} exponent {fit['exponent']:.6f}, constant {fit['cone_constant']:.6f} "
              f"(9/25 = 0.36), squashing {fit['squashing']:.6f}")

    model = singular_model_so3(v, c, eps=1e-3)
    print("near the singular point the sigma coefficients approach the ratios",
          tuple(round(x, 4) for x in model["sigma_ratios"]))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Integrate the Sp(1) x Id_1 vector field X = (f1, f2) and classify its flow lines.

The critical curves ``alpha_c`` and ``beta_c`` cut the strip into the regions
where ``f1`` and ``f2`` keep their signs.  Each launch point below is followed
forwards and backwards until it closes up at ``alpha = pi/2`` (an R^4 fibre),
runs into the equilibrium ``(-pi/2, 0)`` (the exceptional R^4 fibre for
``c > 0``), or escapes along one of the two asymptotic cones.
"""

from bscayley.sp1 import (
    ALPHA_INF,
    HALF_PI,
    Sp1PhaseState,
    alpha_c,
    asymptotic_cone_sp1,
    beta_c,
    green_launch,
    integrate_fibre,
    verify_cayley_sp1,
)


def main() -> None:
    c = 1.0
    for r in (0.5, 1.0, 10.0):
        print(f"r = {r:5.1f}: beta_c = {beta_c(r, c):+.6f}, alpha_c = {alpha_c(r, c):+.6f}")
    print(f"alpha_c tends to arcsin(-1/4) = {ALPHA_INF:+.6f} as r grows")

    launches = [Sp1PhaseState(a, r, c) for a, r in ((-1.2, 1.0), (-1.2, 0.2), (ALPHA_INF, 1.0))]
    for launch in launches + [green_launch(c)]:
        curve = integrate_fibre(launch)
        eta = verify_cayley_sp1(curve, stride=20)
        print(f"launch ({launch.alpha:+.4f}, {launch.r:.2e}): {curve.topology:<8} "
              f"ends {curve.ends['backward']} / {curve.ends['forward']}, max Cayley residual {eta:.1e}")

    curve = integrate_fibre(Sp1PhaseState(-1.2, 1.0, c))
    for end, target, limit in (("backward", 9 / 25, -HALF_PI), ("forward", 9 / 16, ALPHA_INF)):
        fit = asymptotic_cone_sp1(curve, end=end)
        print(f"{end} end escapes at alpha = {fit['alpha_limit']:+.6f} (expected {limit:+.6f}); "
              f"cone constant {fit['cone_constant']:.6f} (expected {target:.4f})")

if __name__ == "__main__":
    main()

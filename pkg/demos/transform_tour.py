"""Closed-form transforms next to their Monte Carlo estimates.

For each family with a known marginal transform, print the deterministic value
of E exp(-lam X_t), then a simulation estimate with its standard error. The
last block adds the time integral to the exponent and repeats the comparison.

    python3 demos/transform_tour.py
"""

from fkmatch import (
    GBesqI,
    GBesqII,
    SimConfig,
    SquaredBesselBridge,
    SquaredRadialOU,
    TransformQuery,
    joint_functional,
    joint_laplace,
    laplace_functional,
    laplace_marginal,
    mc_expectation,
)

PATHS = 20_000
DT = 1e-3

specs = {
    "constant dimension 2": GBesqI(1.0, "2"),
    "oscillating dimension": GBesqI(1.0, "1 + 0.5*sin(t)"),
    "time-varying mean reversion": GBesqII(1.0, "1 + t", "-0.5 - t"),
    "squared radial OU": SquaredRadialOU(1.0, 2.0, 1.0),
    "squared Bessel bridge": SquaredBesselBridge(1.0, 2.0),
}

print("marginal transform at lam = 1")
for label, spec in specs.items():
    t = 0.5 if spec.family == "bridge" else 1.0
    exact = laplace_marginal(spec, TransformQuery(t, 1.0))
    est = mc_expectation(spec, laplace_functional(1.0), SimConfig(t, DT, PATHS, master_seed=1))
    z = (est.mean - exact) / est.stderr
    print(f"  {label:<28} t={t:<4} exact={exact:.6f}  mc={est.mean:.6f} +/- {est.stderr:.6f}  z={z:+.2f}")

print("\njoint transform at lam = 1, gamma = 0.5")
for label in ("constant dimension 2", "squared radial OU", "squared Bessel bridge"):
    spec = specs[label]
    t = 0.5 if spec.family == "bridge" else 1.0
    exact = joint_laplace(spec, TransformQuery(t, 1.0, 0.5))
    est = mc_expectation(spec, joint_functional(1.0, 0.5), SimConfig(t, DT, PATHS, master_seed=2))
    z = (est.mean - exact) / est.stderr
    print(f"  {label:<28} t={t:<4} exact={exact:.6f}  mc={est.mean:.6f} +/- {est.stderr:.6f}  z={z:+.2f}")

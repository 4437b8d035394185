"""Scan the relativistic Euler system for strong hyperbolicity.

Samples admissible fluid states and unit directions, reports the verdict,
the symmetrizer bounds and the worst eigenvalue gap, then shows what a
failing system (a Jordan block) looks like.
"""
import numpy as np

from torushyp import (
    EquationOfState,
    SamplePlan,
    euler_state,
    make_constant_coefficient,
    make_relativistic_euler,
    scan_hyperbolicity,
)
from torushyp.symbol import unit_directions

rng = np.random.default_rng(0)
eos = EquationOfState.barotropic(0.5, 1.6)
euler = make_relativistic_euler(eos)

states = []
while len(states) < 50:
    v = rng.uniform(-0.5, 0.5, 3)
    z = euler_state(v, rng.uniform(0.1, 1.4), rng.uniform(-1, 1))
    if euler.domain.contains(z):
        states.append(z)

plan = SamplePlan(times=[0.0], points=[np.zeros(3)], states=states,
                  directions=list(unit_directions(3, 20, 0)))
report = scan_hyperbolicity(euler, plan)
print(f"euler: {report.verdict} over {report.samples} samples")
print(f"  symmetrizer bounds [{report.lambda0:.3f}, {report.lambda1:.3f}], "
      f"min gap {report.min_gap:.3e}, worst cond(S) {report.worst_condS:.2f}")

jordan = make_constant_coefficient([[[1.0, 1.0], [0.0, 1.0]]], name="jordan")
bad = scan_hyperbolicity(jordan, SamplePlan(times=[0.0], points=[np.zeros(1)],
                                            states=[np.zeros(2)],
                                            directions=[np.array([1.0])]))
print(f"jordan: {bad.verdict}, failures {bad.failures}")
print(f"  first witness: {bad.witnesses[0]}")

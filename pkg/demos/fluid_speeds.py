"""Characteristic speeds of the relativistic fluid models.

Prints acoustic speeds of a boosted perfect fluid next to the relativistic
velocity-addition formula, and shows how bulk viscosity raises the sound
speed until the causality limit is reached.
"""
import math

import numpy as np

from torushyp import (
    EquationOfState,
    boosted_speeds,
    bulk_state,
    characteristic_speeds,
    euler_state,
    make_bulk_viscous,
    make_relativistic_euler,
)

cs = 1 / math.sqrt(3)
euler = make_relativistic_euler(EquationOfState.linear(cs * cs), N=1)
print("   v    fastest   (v+c)/(1+vc)")
for v in np.linspace(0, 0.9, 4):
    speeds = characteristic_speeds(euler, 0.0, None, euler_state([v, 0, 0], 1.0), [1.0])
    print(f"{v:5.2f}  {speeds[-1]:.6f}  {boosted_speeds(v, cs)[1]:.6f}")

eos = EquationOfState.mixed(0.2, 0.1, 1.5)
z = bulk_state([0, 0, 0], 1.0, 1.0)
print("\nzeta   sound speed  admissible")
for zeta in (0.0, 0.2, 0.4, 0.8, 1.0):
    sys = make_bulk_viscous(eos, tau=1.0, zeta=max(zeta, 1e-12))
    if not sys.domain.contains(z):
        print(f"{zeta:4.1f}   (acausal)    False")
        continue
    fast = characteristic_speeds(sys, 0.0, None, z, [1, 0, 0])[-1]
    print(f"{zeta:4.1f}   {fast:.6f}     True")

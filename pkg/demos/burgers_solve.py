"""Solve advection and inviscid Burgers on the circle by Picard iteration.

Compares against exact solutions and prints the contraction ratios of
successive Picard differences.
"""
import numpy as np

from torushyp import SolveConfig, TorusField, TorusGrid, make_advection, make_burgers, picard_solve

grid = TorusGrid(1, 128)
x = grid.points[0]

adv = picard_solve(make_advection([1.0]), TorusField(grid, np.stack([np.sin(x)])),
                   SolveConfig(T_request=1.0, dt_cfl=0.2))
err = np.max(np.abs(adv.trajectory.final.values[0] - np.sin(x - 1.0)))
print(f"advection to t=1: max error {err:.2e} after {len(adv.trajectory) - 1} steps")

u0 = TorusField(grid, np.stack([0.5 * np.sin(x)]))
out = picard_solve(make_burgers(), u0, SolveConfig(T_request=1.0))
print(f"burgers (amplitude 0.5, breaking at t=2): {out.status} at t={out.T_actual}")
print("  contraction ratios:", ", ".join(f"{r:.3g}" for r in out.history.ratios(0)))

# compare with the implicit characteristic solution u = u0(x - t u)
u = out.trajectory.final.values[0]
residual = np.max(np.abs(u - 0.5 * np.sin(x - out.T_actual * u)))
print(f"  characteristic residual {residual:.2e}")

for e in out.energies[:: max(1, len(out.energies) // 4)]:
    print(f"  t={e.t:.3f}  energy={e.energy:.6f}  H^s norm^2={e.sobolev ** 2:.6f}")

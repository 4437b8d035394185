"""Watch the continuation monitor stop a solve.

Burgers with ``u0 = sin x`` steepens into a shock at t = 1 and the
resolution sentinel reports a norm blow-up shortly before.  A sink model
whose state drains toward the boundary of its admissible region stops
when the margin vanishes.
"""
import numpy as np

from torushyp import SolveConfig, TorusField, TorusGrid, make_burgers, make_sink, picard_solve

grid = TorusGrid(1, 512)
u0 = TorusField(grid, np.stack([np.sin(grid.points[0])]))
out = picard_solve(make_burgers(), u0, SolveConfig(T_request=2.0))
st = out.continuation
print(f"burgers: {st.kind} at t={st.t:.4f} (breaking time 1), trigger {st.evidence.get('trigger')}")

small = TorusGrid(1, 16)
out = picard_solve(make_sink(), TorusField(small, np.full((1, 16), 0.1)),
                   SolveConfig(T_request=0.5))
st = out.continuation
print(f"sink: {st.kind} at t={st.t:.4f} (state reaches 0 at t=0.1), "
      f"margin {st.evidence['min_margin']:.2e}")

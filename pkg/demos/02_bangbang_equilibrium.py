"""Solve a game with discontinuous equilibrium controls.

The case2-bangbang scenario has drift affine in both controls, so each
player's best reply is a Heaviside of a switching argument: full throttle
on one side of a moving curve, idle on the other.  Solving directly with
the jump makes the fixed-point iteration chatter, so the solver walks a
shrinking sequence of ramp widths and stops when tightening the ramp no
longer moves the surface.
"""

import numpy as np

from nashpde import builtin_scenario, default_resolver
from nashpde.feedback import resolve_feedback_batch
from nashpde.pde import Grid, picard_solve

spec = builtin_scenario("case2-bangbang")
grid = Grid(1, 6.0, 241, 200, 1.0)
resolver = default_resolver(spec)

field, diag = picard_solve(spec, grid, resolver,
                           epsilon_schedule=(0.5, 0.25, 0.125))
print(f"converged: {diag.converged} after {diag.iterations_used} sweeps")
print(f"ramp widths visited: {diag.epsilon_schedule} "
      f"(stopped early once the surface froze)")
print(f"sup-bound margin vs terminal and running data: "
      f"{diag.max_principle_margin:.3e} (>= 0 up to rounding)")
print()

# read the equilibrium controls along the x axis at the start of play
x = np.linspace(-4.0, 4.0, 17)[:, None]
level = grid.time_steps  # full horizon remaining
p1, p2 = field.gradients_at_level(level, x)
u1, u2 = resolve_feedback_batch(resolver.with_epsilon(0.0), spec, 0.0, x, p1, p2)

print("equilibrium controls at t = 0 (1 = full throttle, 0 = idle):")
print("   x     u1   u2")
for xi, a, b in zip(x[:, 0], u1[:, 0], u2[:, 0]):
    print(f"{xi:+5.1f}   {a:.1f}  {b:.1f}")
print()
print("both controls take only extreme values; the switch point is where")
print("each player's switching argument changes sign")

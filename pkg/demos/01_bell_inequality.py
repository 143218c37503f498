"""
The four-party inequality, from the ground up
=============================================

A box is a conditional distribution P(x|u) over 16 outcomes given 16 joint
settings.  The functional sums specific entries: at the four weight-1
settings it collects the even-parity outcomes, at the four weight-3 settings
the odd-parity ones.  Smaller is better; local models cannot go below 2,
while the no-signaling polytope reaches 0.
"""

import itertools

import numpy as np

from randamp.boxes import (
    BELL_FUNCTIONAL,
    INEQUALITY_SETTINGS,
    algebraic_violation_box,
    bell_value,
    bits_str,
    enumerate_local_deterministic_boxes,
    lhv_minimum,
    mixed_with_uniform,
    uniform_box,
)

print("settings entering the inequality (one bit per party, party 1 first):")
for u in INEQUALITY_SETTINGS:
    print("   ", "".join(map(str, u)))

# each column of the functional touches exactly 8 of the 16 outcomes
cols = BELL_FUNCTIONAL.sum(axis=0)
print("nonzero columns:", int((cols > 0).sum()), "of 16, each with",
      int(cols.max()), "unit coefficients")

print()
print("uniform noise box  :", bell_value(uniform_box()))
print("best local model   :", lhv_minimum())
print("no-signaling floor :", bell_value(algebraic_violation_box()))

# the 256 deterministic strategies, tallied by value
tally = {}
for _, table in enumerate_local_deterministic_boxes():
    v = bell_value(table)
    tally[v] = tally.get(v, 0) + 1
print()
print("deterministic strategy values:", dict(sorted(tally.items())))

# mixing the violating box toward noise moves the value linearly, 4 * weight
print()
for w in (0.0, 0.1, 0.2, 0.5):
    box = mixed_with_uniform(algebraic_violation_box(), w)
    print(f"noise weight {w:.1f} -> Bell value {bell_value(box):.3f}")

"""
Reaching the algebraic floor with a four-qubit state
====================================================

Sixteen real amplitudes, all +-1/4, measured in X (setting 0) or Z
(setting 1) per party.  Every outcome the functional counts has amplitude
exactly zero, so the Bell value vanishes — not just below the local bound
of 2 but at the absolute minimum 0.  Noise brings it back up smoothly.
"""

import numpy as np

from randamp.boxes import bell_value
from randamp.quantum import (
    NoiseSpec,
    born_box,
    build_state,
    noisy_box,
    xz_bases,
)

state = build_state()
print("amplitudes (x 4):", np.round(state.real * 4).astype(int))

box = born_box(state, xz_bases())
print("clean Bell value:", bell_value(box))

# isotropic mixing: (1-m) rho + m I/16 costs exactly 4m
print()
print("state mixing m -> Bell value (exactly 4m):")
for m in (0.01, 0.1, 0.25, 0.5, 1.0):
    print(f"  m={m:<5} {bell_value(noisy_box(NoiseSpec(state_mixing=m))):.6f}")

# misaligned analyzers: quadratic in the tilt angle, so small calibration
# errors are forgiving
print()
print("basis rotation theta -> Bell value (~ 32 theta^2 for small theta):")
for theta in (1e-3, 1e-2, 1e-1):
    v = bell_value(noisy_box(NoiseSpec(basis_rotation=theta)))
    print(f"  theta={theta:<6} {v:.8f}   ratio to 32 theta^2: {v / (32 * theta**2):.4f}")

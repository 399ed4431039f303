"""
One fiber of the valley
=======================

Across the valley the operator reduces to a 1-D anharmonic oscillator
H(eps).  Its ground energy stays above -eps/4 and the first excitation
sits sqrt(2) higher at eps = 0.
"""
import numpy as np

from susytoy.fiber import (assemble_fiber, discretization_tolerance, excitation_gap, ground_energy,
                           largest_admissible_c)

print("gap at eps = 0:", excitation_gap(assemble_fiber(0.0)), " vs sqrt2 =", np.sqrt(2))

print("   eps      E0 + eps/4     tol     largest c")
for eps in np.geomspace(2.0**-7, 1.0, 8):
    p = assemble_fiber(eps)
    c = largest_admissible_c(p, -eps / 4 - 0.05 * eps)
    print(f"{eps:8.5f}  {ground_energy(p) + eps / 4:+.3e}  {discretization_tolerance(p):.1e}  {c:.3f}")

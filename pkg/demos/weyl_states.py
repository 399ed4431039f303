"""
Weyl states along a valley
==========================

A spinor that sits in the fermionic ground state across the valley y = 0
and spreads over a length t along it has energy of order t^-2.  Dividing
by the weighted norm tells us whether the weight rho can ever lose.
"""
import numpy as np

from susytoy import WeightSpec
from susytoy.weyl import CutoffProfile, quadratic_form, weighted_quotient, weyl_state

ts = np.array([4.0, 8.0, 16.0, 32.0])
prof = CutoffProfile()
states = [weyl_state(t, prof) for t in ts]

# energy decays like t^-2
q = np.array([quadratic_form(s) for s in states])
print("t        q(t)        t^2 q(t)")
for t, v in zip(ts, q):
    print(f"{t:5.0f}  {v:.4e}  {t * t * v:.4f}")

# weighted quotient: slope alpha - 2 below alpha = 2, bounded below above it
for alpha in (0.0, 1.0, 3.0):
    r = [weighted_quotient(s, WeightSpec(alpha)) for s in states]
    slope = np.polyfit(np.log(ts), np.log(r), 1)[0]
    print(f"alpha = {alpha:g}: log-log slope {slope:+.3f}")

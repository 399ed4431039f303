"""
Counting bound states
=====================

N(lambda) is the number of eigenvalues of H - lambda rho below zero,
computed exactly from the inertia of a sparse factorization.  A slowly
decaying weight (alpha < 2) keeps producing states as the box grows;
a fast one (alpha > 2) does not, up to grid effects on the coarse mesh.

Runs in about a minute.
"""
import numpy as np

from susytoy import Box2D, WeightSpec, assemble_shifted, count_negative
from susytoy.experiments import fit_growth

h = 0.2
for alpha in (1.0, 3.0):
    ns = [count_negative(assemble_shifted(Box2D.square(L, h), WeightSpec(alpha, 1.0))).n_negative
          for L in (4.0, 6.0, 8.0, 10.0)]
    print(f"alpha = {alpha:g}, lambda = 1, L = 4..10: N = {ns}")

# growth in lambda at fixed box
lams = np.geomspace(2, 64, 6)
pts = [(l, count_negative(assemble_shifted(Box2D.square(8.0, h), WeightSpec(3.0, l))).n_negative) for l in lams]
fit = fit_growth(pts)
print("N(lambda):", [n for _, n in pts])
print(f"fitted exponent {fit.exponent:.3f}, R^2 = {fit.r_squared:.3f}")

"""Reproduce the pinned two-point criterion values used in test_cv.cpp.

Data (y, x) = (0, 0), (1, 1), H = I, Gaussian kernel. Leaving one point out
leaves a single pair, so the conditional density is phi(y - y_j) and its
squared integral is 1 / (2 sqrt(pi)).
"""

import mpmath

mpmath.mp.dps = 40

phi1 = mpmath.npdf(1)
lscv = 1 / (2 * mpmath.sqrt(mpmath.pi)) - 2 * phi1
lcv = -mpmath.log(phi1)

print("lscv", mpmath.nstr(lscv, 20))
print("lcv ", mpmath.nstr(lcv, 20))

"""Noise variance for simulation case 2: Var[2 pi (X1 + X2) / (1 + X3)] / 3, X ~ U[0,1]^3.

S = X1 + X2 and T = 1 + X3 are independent, so
  Var(S/T) = E[S^2] E[T^-2] - (E[S] E[T^-1])^2 = (7/6)(1/2) - ln(2)^2.
The closed form is checked against direct triple quadrature.
"""

import mpmath as mp

mp.mp.dps = 40

closed = 4 * mp.pi**2 / 3 * (mp.mpf(7) / 12 - mp.log(2) ** 2)

g = lambda a, b, c: 2 * mp.pi * (a + b) / (1 + c)
m1 = mp.quad(lambda a, b, c: g(a, b, c), [0, 1], [0, 1], [0, 1])
m2 = mp.quad(lambda a, b, c: g(a, b, c) ** 2, [0, 1], [0, 1], [0, 1])
numeric = (m2 - m1**2) / 3

print("closed form :", mp.nstr(closed, 20))
print("quadrature  :", mp.nstr(numeric, 20))
assert abs(closed - numeric) < mp.mpf(10) ** -15

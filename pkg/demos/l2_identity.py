"""The L^2 identity for the fractional area function, on a 1-D grid.

For a Gaussian, ||S_alpha f||_2^2 / ||(-Delta)^(alpha/2) f||_2^2 should equal
|B(0,1)| * C(alpha, n), with C an explicit 1-D integral of the ball symbol.
In one dimension with alpha = 1/2 that constant is exactly pi/6.

Run:  python3 demos/l2_identity.py
"""
import math

from ballsquare.experiments import c_alpha_n, l2_identity

C = c_alpha_n(0.5, 1)
print(f"C(0.5, 1) = {C:.12f}   pi/6 = {math.pi / 6:.12f}")

# a smaller grid than the acceptance run keeps this well under a minute
rep = l2_identity(alpha=0.5, n=1, N=2 ** 13, L=32.0, t_min=1e-3, t_max=1e4)
for line in rep.summary_lines():
    print(line)

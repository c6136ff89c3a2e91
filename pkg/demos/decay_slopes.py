"""How fast the band pieces T_j of the composite square function decay.

A fractional kernel of order alpha gives log2 ||T_j|| slopes of 2 - alpha
for j < 0 and -alpha for j > 0.  The second-order kernel should give +2/-2,
but in one dimension its symbol only falls like 1/r at infinity, so the
j > 0 side stalls near -1.  In three dimensions both sides reach 2.

Run:  python3 demos/decay_slopes.py
"""
import numpy as np

from ballsquare.grid_spectral import make_grid
from ballsquare.kernels import KernelFamily, build_window_pair
from ballsquare.lp_decomposition import OctaveQuadrature, fit_slope, measure_decay, t_j_l2_norm

grid = make_grid(1, 2048, 256.0)
quad = OctaveQuadrature(2.0 ** -6, 2.0 ** 6, 8)
for fam in (KernelFamily.fractional(1, 0.5), KernelFamily.second_order(1)):
    d = measure_decay(fam, (-3, 3), grid=grid, quad=quad, trials=10)
    print(f"{fam!r:40s} neg {d.slope_neg:+.3f} (want {d.predicted_neg:+g})"
          f"  pos {d.slope_pos:+.3f} (want {d.predicted_pos:+g})")

# exact L^2 norms come straight from the symbol, no grid needed
w = build_window_pair()
oq = OctaveQuadrature(2.0 ** -16, 2.0 ** 16, 8)
for n in (1, 3):
    fam = KernelFamily.second_order(n)
    js = np.arange(2, 11)
    v = np.log2([t_j_l2_norm(fam, int(j), w, oq, points=4001) for j in js])
    print(f"second order, n={n}: exact-norm slope for j>0 = {fit_slope(js, v)[0]:+.3f}")

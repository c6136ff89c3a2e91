"""The dilated-bump counterexample at a size that runs in about a minute.

phi_j is a bump at frequency 2^j.  Below the threshold p* = 2n/(2 alpha + n)
the area-function norm of phi_j outgrows ||phi_j||_p, so the fitted exponent
of the ratio changes sign near p*.  Here n = 1, alpha = 1/4 and p* = 4/3.

The full-window exponent (S_tilde) is still drifting toward its limit at
these j; the windowed functional (t in [1, 2] only) shows the crossover
cleanly.

Run:  python3 demos/sharpness_small.py
"""
from ballsquare.experiments import SharpnessConfig, sharpness_sweep

cfg = SharpnessConfig(N=2 ** 16, js=tuple(range(4, 10)), ps=(1.05, 1.2, 1.4, 1.6, 1.9))
rep = sharpness_sweep(cfg)
print(f"p* = {cfg.p_star:.4f}")
print(" p     S_tilde/phi   windowed/phi   predicted")
rows = {(k1, k2): v for kind, k1, k2, v in rep.rows if kind == "exponent"}
for p in cfg.ps:
    k = f"p={p:g}"
    print(f"{p:4.2f}   {rows[k, 'S_tilde/phi']:+.4f}       {rows[k, 'W/phi']:+.4f}        "
          f"{rows[k, 'S_tilde/phi_predicted']:+.4f}")
for line in rep.summary_lines():
    print(line)

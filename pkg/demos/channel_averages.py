"""Monte-Carlo doubled-channel averages against their closed forms."""
import numpy as np

from parityqv import analytic as an
from parityqv import noise as nz

rng = np.random.default_rng(1)
for alpha in (0.05, 0.1, 0.3):
    mc, se = nz.average_gue_channel(alpha, 50000, rng, return_stderr=True)
    z = np.abs(mc - an.gue_doubled_average(alpha)) / np.maximum(se, 1e-15)
    a, b = an.gue_weights(alpha)
    print(f"GUE alpha={alpha}: f={an.f_alpha(alpha):.5f} a={a:.5f} b={b:.5f} max z={z.max():.2f}")

for sigma in (0.05, 0.1, 0.2):
    p = nz.sigma_to_p(sigma)
    mc, se = nz.average_faulty_swap_channel(sigma, 50000, rng, return_stderr=True)
    dev = np.abs(mc - an.swap_doubled_average(p)).max()
    print(f"faulty swap sigma={sigma}: p={p:.5f} max |deviation|={dev:.2e} (stderr {se.max():.1e})")

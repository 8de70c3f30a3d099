"""Parity circuits under GUE gate noise: sampled heavy-output frequency vs closed form."""
import numpy as np

from parityqv import analytic as an
from parityqv import bench

print(" N  alpha    h_mean   stderr   exact    approx")
for n in (4, 6):
    rows = []
    for alpha in np.linspace(0, 0.05, 6):
        row, _ = bench.run_point(dict(kind="parity", n=n, t=n, m=None, noise={"type": "gue", "alpha": float(alpha)},
                                      insert_x=False, circuits=100, shots=100, seed=3, n_cap=14))
        rows.append(row)
        print(f"{n:2d}  {alpha:.3f}  {row['h_mean']:.4f}  {row['h_stderr_pooled']:.4f}  "
              f"{row['pred_exact']:.4f}  {row['pred_approx']:.4f}")
    fit = bench.fit_q(rows, n)
    print(f"    Q/(NT) vs alpha^2 slope {fit.slope:.3f} +/- {fit.slope_stderr:.3f} (expected about 2)")

d = an.predict_parity(6, 6, 0.03, d_env=2)
print(f"dissipative d_E=2 at alpha=0.03 predicts {d.exact:.4f}; "
      f"GUE at alpha*sqrt2 predicts {an.predict_parity(6, 6, 0.03 * np.sqrt(2)).exact:.4f}")

"""Swap-omission and combined noise on double-parity circuits; W and Q' fits."""
import numpy as np

from parityqv import bench


def run(kind, n, noise, circuits, shots):
    return bench.run_point(dict(kind=kind, n=n, t=n, m=None, noise=noise, insert_x=False,
                                circuits=circuits, shots=shots, seed=5, n_cap=14))[0]


n = 6
parity = [run("parity", n, {"type": "gue", "alpha": float(a)}, 150, 50) for a in np.linspace(0, 0.05, 6)]
swaps = [run("double-parity", n, {"type": "swap_omission", "p": float(p)}, 200, 20)
         for p in np.linspace(0.002, 0.012, 6)]
combined = [run("double-parity", n, {"type": "gue", "alpha": float(a)}, 300, 30) for a in np.linspace(0.01, 0.05, 5)]

q_fit = bench.fit_q(parity, n)
w_fit = bench.fit_w(swaps, n)
qp_fit = bench.fit_qprime(combined, n, q_fit, w_fit)
print(f"N={n}: Q slope {q_fit.slope:.3f}, W slope {w_fit.slope:.3f}, Q' slope {qp_fit.slope:.3f} "
      f"+/- {qp_fit.slope_stderr:.3f}")
for r in combined:
    print(f"  alpha={r['alpha']:.3f} h={r['h_mean']:.4f} +/- {r['h_stderr']:.4f} closed form {r['pred_exact']:.4f}")

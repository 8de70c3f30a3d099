"""Quantum-volume decisions for standard and parity circuits under the same GUE noise."""
from parityqv import noise as nz
from parityqv import sim

spec = nz.GueTwoQubit(0.15)
for kind in ("standard", "parity", "double-parity"):
    res = sim.measure_quantum_volume(spec, kind, n_max=6, n_circuits=40, n_shots=100, rng=7)
    line = ", ".join(f"N={n}: {d.mean_h:.3f}{'+' if d.passed else '-'}" for n, d in res.decisions.items())
    print(f"{kind:14s} log2 QV = {res.log2_qv}  [{line}]")

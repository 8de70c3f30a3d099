"""Generate each circuit family, print its heavy subspace and round-trip it through JSON."""
import numpy as np

from parityqv import circuit as circ
from parityqv import sim

rng = np.random.default_rng(0)

for kind in circ.GENERATOR_KINDS:
    n = 4
    c = circ.generate(kind, n, 3, rng, m=2, insert_x=True)
    probs = sim.simulate_ideal(c)
    hs = circ.heavy_predicate(c, probs if kind == "standard" else None)
    heavy = [circ.bitstring(int(x), n) for x in np.flatnonzero(hs.mask())]
    print(f"{kind:22s} heavy mass {hs.heavy_mass(probs):.4f}  |heavy set| = {len(heavy)}")
    assert circ.serialize(circ.deserialize(circ.serialize(c))) == circ.serialize(c)

# three-qubit subset-parity example: two cyclic shifts, tracked pair {0, 1}, X on qubit 0
c = circ.generate_m_parity(3, 2, 2, 1, perms=[[1, 2, 0], [1, 2, 0]], subset=[0, 1], x_qubits=[0])
probs = sim.simulate_ideal(c)
print("subset per layer:", c.metadata["subsets"])
print("outcomes:", sorted(circ.bitstring(int(x), 3) for x in np.flatnonzero(probs > 1e-12)))

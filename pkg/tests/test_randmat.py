import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from parityqv import randmat as rm
from parityqv.randmat import RngStream


def kron_embed(gate, q1, q2, n):
    """Explicit 2^n x 2^n operator of a two-qubit gate (qubit 0 = LSB)."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        b1, b2 = (x >> q1) & 1, (x >> q2) & 1
        col = 2 * b1 + b2
        for row in range(4):
            y = x & ~(1 << q1) & ~(1 << q2)
            y |= ((row >> 1) & 1) << q1
            y |= (row & 1) << q2
            full[y, x] += gate[row, col]
    return full


def test_haar_dim1_is_phase():
    u = rm.sample_haar_unitary(1, 3)
    assert u.shape == (1, 1)
    assert abs(abs(u[0, 0]) - 1) < 1e-12


def test_haar_rejects_dim0():
    with pytest.raises(ValueError, match="invalid dimension"):
        rm.sample_haar_unitary(0, 1)


def test_haar_second_moment():
    u = rm.sample_haar_unitary(4, 0, size=10_000)
    x = np.abs(u[:, 0, 0]) ** 2
    assert abs(x.mean() - 0.25) < 3 * x.std() / np.sqrt(x.size)


def test_haar_u2_entry_uniform_ks():
    u = rm.sample_haar_unitary(2, 1, size=10_000)
    assert stats.kstest(np.abs(u[:, 0, 0]) ** 2, "uniform").pvalue > 1e-3


def test_samplers_unitary():
    gen = np.random.default_rng(2)
    for u in (rm.sample_haar_unitary(4, gen, 50), rm.sample_haar_su4(gen, 50), rm.sample_parity_gate(gen, 50),
              rm.gue_unitary(8, 0.3, gen, 50), rm.block_gate(((0, 1), (2, 3)), gen, 50)):
        assert rm.is_unitary(u)


def test_su4_determinant():
    u = rm.sample_haar_su4(4, size=20)
    assert np.allclose(np.linalg.det(u), 1)


def test_gue_hermitian_and_zero_trace_mean():
    h = rm.sample_gue(4, 0, size=10_000)
    assert np.allclose(h, np.conj(np.swapaxes(h, -1, -2)))
    tr = np.real(np.trace(h, axis1=1, axis2=2))
    assert abs(tr.mean()) < 3 * tr.std() / np.sqrt(tr.size)


def test_matrix_exp():
    assert np.allclose(rm.matrix_exp_unitary(rm.sample_gue(4, 1), 0.0), np.eye(4))
    z = rm.matrix_exp_unitary(rm.PAULI_Z, np.pi / 2)
    assert np.allclose(z, np.diag([1j, -1j]))
    h = rm.sample_gue(4, 5)
    assert np.abs(rm.matrix_exp_unitary(h, 0.3) @ rm.matrix_exp_unitary(h, -0.3) - np.eye(4)).max() < 1e-10


def test_parity_gate_structure():
    u = rm.sample_parity_gate(7)
    for i, j in [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)]:
        assert u[i, j] == 0
    out = u @ np.array([1, 0, 0, 0])
    assert np.allclose(out[[1, 2]], 0)
    x = np.abs(rm.sample_parity_gate(8, size=10_000)[:, 0, 0]) ** 2
    assert abs(x.mean() - 0.5) < 3 * x.std() / np.sqrt(x.size)


def test_parity_gate_closure():
    u = rm.sample_parity_gate(1) @ rm.sample_parity_gate(2)
    mask = np.ones((4, 4), bool)
    mask[np.ix_([0, 3], [0, 3])] = False
    mask[np.ix_([1, 2], [1, 2])] = False
    assert np.abs(u[mask]).max() < 1e-12


def test_diagonal_zz():
    assert np.allclose(rm.diagonal_zz_gate(0), np.eye(4))
    p = np.exp(1j * np.pi / 4)
    assert np.allclose(rm.diagonal_zz_gate(np.pi / 4), np.diag([p, p.conj(), p.conj(), p]))
    g = rm.diagonal_zz_gate(1.3)
    zi = np.kron(rm.PAULI_Z, np.eye(2))
    assert np.allclose(g @ zi, zi @ g)


def test_fractional_swap_values():
    assert np.allclose(rm.fractional_swap(1), rm.SWAP)
    assert np.allclose(rm.fractional_swap(0), np.eye(4))
    assert np.allclose(rm.fractional_swap(2), np.eye(4))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_fractional_swap_additive(b1, b2):
    assert np.abs(rm.fractional_swap(b1) @ rm.fractional_swap(b2) - rm.fractional_swap(b1 + b2)).max() < 1e-10


def test_apply_gate_basics():
    s = np.zeros(4, complex)
    s[1] = 1  # qubit 0 set
    out = rm.apply_gate(s, rm.SWAP, 0, 1)
    assert np.allclose(out, np.eye(4)[2])
    assert np.allclose(rm.apply_gate(s, np.eye(4), 0, 1), s)
    with pytest.raises(ValueError, match="invalid target"):
        rm.apply_gate(s, rm.SWAP, 0, 0)
    with pytest.raises(ValueError, match="invalid target"):
        rm.apply_gate(s, rm.SWAP, 0, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.data())
def test_apply_gate_matches_explicit(n, data):
    q1 = data.draw(st.integers(0, n - 1))
    q2 = data.draw(st.integers(0, n - 1).filter(lambda q: q != q1))
    seed = data.draw(st.integers(0, 2**31))
    gen = np.random.default_rng(seed)
    g = rm.sample_haar_unitary(4, gen)
    psi = rm.sample_haar_unitary(1 << n, gen)[:, 0]
    assert np.abs(rm.apply_gate(psi, g, q1, q2) - kron_embed(g, q1, q2, n) @ psi).max() < 1e-10


def test_batched_gate_per_state():
    gen = np.random.default_rng(0)
    psi = rm.sample_haar_unitary(8, gen, 5)[:, :, 0]
    gates = rm.sample_haar_unitary(4, gen, 5)
    out = rm.apply_gate(psi, gates, 2, 0)
    for b in range(5):
        assert np.allclose(out[b], rm.apply_gate(psi[b], gates[b], 2, 0))


def test_permutation_figure_convention():
    s = np.zeros(8, complex)
    s[1] = 1  # "100": qubit 0 set
    out = rm.apply_permutation(s, [1, 2, 0])
    assert np.flatnonzero(out).tolist() == [2]  # "010"


def test_permutation_invalid():
    with pytest.raises(ValueError, match="invalid permutation"):
        rm.apply_permutation(np.ones(4) / 2, [0, 0])


@given(st.permutations(range(4)), st.integers(0, 15))
def test_permutation_preserves_weight(perm, x):
    s = np.zeros(16, complex)
    s[x] = 1
    y = int(np.flatnonzero(rm.apply_permutation(s, perm))[0])
    assert bin(y).count("1") == bin(x).count("1")
    assert y == rm.permute_index(x, perm)


def test_rng_stream_reproducible():
    a = RngStream(5, 2).generator().random(4)
    b = RngStream(5, 2).generator().random(4)
    c = RngStream(5, 3).generator().random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert not np.array_equal(RngStream(5, 2).child(0).generator().random(4), a)

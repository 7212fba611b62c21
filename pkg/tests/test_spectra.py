"""Ground-state solver and full-space sector cross-checks."""

import numpy as np
import pytest

from z2vqe import spectra
from z2vqe.lattice import build_lattice


def test_lambda_zero_energies():
    # at lam = 0 the ground state is the all-plus product: E0 = -N
    for d in (2, 3, 4):
        g = build_lattice(d)
        e0, st = spectra.ground_state(g, 0.0)
        assert e0 == pytest.approx(-g.n_links, abs=1e-9)
        assert abs(st.amplitudes[0]) == pytest.approx(1.0, abs=1e-9)


def test_matvec_matches_dense():
    g = build_lattice(3)
    lam = 1.7
    h = spectra.dense_dual_hamiltonian(g, lam)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(h.shape[0]) + 1j * rng.standard_normal(h.shape[0])
    assert np.allclose(spectra.dual_matvec(g, lam, v), h @ v, atol=1e-12)


def test_dense_hermitian_and_diagonal():
    g = build_lattice(3)
    h = spectra.dense_dual_hamiltonian(g, 0.9)
    assert np.allclose(h, h.T.conj())
    # diagonal entry of basis state b: -(N - 2*wt) with wt the number of
    # links flipped by the occupied plaquettes
    full = np.zeros(1 << g.n_plaquettes)
    colmasks = [int(sum(1 << int(l) for l in np.nonzero(g.incidence[:, p])[0]))
                for p in range(g.n_plaquettes)]
    for b in range(1 << g.n_plaquettes):
        x = 0
        for p in range(g.n_plaquettes):
            if b >> p & 1:
                x ^= colmasks[p]
        full[b] = -(g.n_links - 2 * bin(x).count("1"))
    assert np.allclose(np.diag(h), full)


def test_iterative_path_matches_dense_eigh():
    # d = 4 exercises the Krylov branch; eigh on the 4096-dim dense matrix
    # is the oracle
    g = build_lattice(4)
    lam = 3.0
    e0, _ = spectra.ground_state(g, lam)
    ref = np.linalg.eigvalsh(spectra.dense_dual_hamiltonian(g, lam))[0]
    assert e0 == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("d", [2, 3])
def test_physical_sector_dimension(d):
    g = build_lattice(d)
    idx = spectra.physical_sector_indices(g)
    assert idx.size == 1 << g.n_plaquettes


@pytest.mark.parametrize("d,lam", [(2, 0.0), (2, 1.3), (3, 3.0)])
def test_full_space_sector_check(d, lam):
    g = build_lattice(d)
    report = spectra.full_space_sector_check(g, lam)
    assert report.matched
    assert report.sector_dim == 1 << g.n_plaquettes
    assert report.max_eigenvalue_deviation <= 1e-8


def test_ground_state_energy_monotone_in_lambda():
    g = build_lattice(3)
    vals = [spectra.ground_state(g, lam)[0] for lam in (0.0, 1.0, 2.0, 4.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))

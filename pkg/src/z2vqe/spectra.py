"""Exact spectra: dual-basis ground states and full-space cross checks.

The dual Hamiltonian H = -diag(D) - lambda * sum_n flip_n is applied
matrix-free (one diagonal pass plus N_p strided bit flips), which keeps the
2^20-dimensional d=5 problem cheap.  The full 2^N Hamiltonian is expressed
in the X basis, where the electric term and all gauge constraints are
diagonal and each plaquette operator is a bit-flip mask.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .dual_engine import DualState, field_table
from .lattice import LatticeGeometry

_MAX_NP = 24


def dual_matvec(geom: LatticeGeometry, lam: float, v: np.ndarray) -> np.ndarray:
    diag = field_table(geom).diag
    out = -diag * v
    for n in range(geom.n_plaquettes):
        view = v.reshape(-1, 2, 1 << n)
        out -= lam * np.ascontiguousarray(view[:, ::-1, :]).reshape(-1)
    return out


def dense_dual_hamiltonian(geom: LatticeGeometry, lam: float) -> np.ndarray:
    dim = 1 << geom.n_plaquettes
    h = np.diag(-field_table(geom).diag.astype(np.float64))
    b = np.arange(dim)
    for n in range(geom.n_plaquettes):
        h[b, b ^ (1 << n)] -= lam
    return h


def ground_state(geom: LatticeGeometry, lam: float,
                 tol: float = 1e-10) -> tuple[float, DualState]:
    """Lowest eigenpair of the dual Hamiltonian via implicitly restarted
    Lanczos with a deterministic start vector."""
    n_p = geom.n_plaquettes
    if n_p > _MAX_NP:
        raise MemoryError(f"N_p = {n_p} exceeds eigensolver budget {_MAX_NP}")
    dim = 1 << n_p
    if dim <= 64:
        h = dense_dual_hamiltonian(geom, lam)
        vals, vecs = np.linalg.eigh(h)
        vec = vecs[:, 0].astype(np.complex128)
        return float(vals[0]), DualState(vec, geom)

    op = spla.LinearOperator(
        (dim, dim), matvec=lambda v: dual_matvec(geom, lam, v),
        dtype=np.float64)
    v0 = np.random.default_rng(12345).standard_normal(dim)
    try:
        vals, vecs = spla.eigsh(op, k=1, which="SA", v0=v0, tol=tol,
                                maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise RuntimeError(f"Lanczos did not converge for d={geom.d}, "
                           f"lambda={lam}: {exc}") from exc
    e0 = float(vals[0])
    vec = vecs[:, 0]
    resid = np.linalg.norm(dual_matvec(geom, lam, vec) - e0 * vec)
    h_scale = geom.n_links + abs(lam) * n_p
    if resid > max(tol, 1e-9) * h_scale:
        raise RuntimeError(f"eigenpair residual {resid:.2e} above tolerance")
    return e0, DualState(vec.astype(np.complex128), geom)


def _full_colmasks(geom: LatticeGeometry) -> np.ndarray:
    masks = np.zeros(geom.n_plaquettes, dtype=np.int64)
    for p in range(geom.n_plaquettes):
        for l in np.nonzero(geom.incidence[:, p])[0]:
            masks[p] |= 1 << int(l)
    return masks


def physical_sector_indices(geom: LatticeGeometry) -> np.ndarray:
    """X-basis configs with all gauge constraints +1 and logical X = +1."""
    n = geom.n_links
    x = np.arange(1 << n, dtype=np.int64)
    keep = np.ones(1 << n, dtype=bool)
    for v in geom.vertices:
        mask = 0
        for l in v:
            mask |= 1 << l
        keep &= (np.bitwise_count(x & mask) & 1) == 0
    logical = 0
    for l in geom.logical_x_path:
        logical |= 1 << l
    keep &= (np.bitwise_count(x & logical) & 1) == 0
    return x[keep]


def full_space_hamiltonian_sector(geom: LatticeGeometry,
                                  lam: float) -> np.ndarray:
    """Dense full-space Hamiltonian restricted to the physical sector."""
    idx = physical_sector_indices(geom)
    pos = {int(v): i for i, v in enumerate(idx)}
    dim = idx.size
    n = geom.n_links
    h = np.zeros((dim, dim))
    h[np.arange(dim), np.arange(dim)] = -(
        n - 2 * np.bitwise_count(idx).astype(np.int64))
    for mask in _full_colmasks(geom):
        for i, v in enumerate(idx):
            h[i, pos[int(v ^ mask)]] -= lam
    return h


@dataclass
class SectorCheckReport:
    d: int
    lam: float
    sector_dim: int
    dual_dim: int
    max_eigenvalue_deviation: float

    @property
    def matched(self) -> bool:
        return (self.sector_dim == self.dual_dim
                and self.max_eigenvalue_deviation <= 1e-8)


def full_space_sector_check(geom: LatticeGeometry,
                            lam: float) -> SectorCheckReport:
    """Compare the projected full-space spectrum with the dual spectrum."""
    if geom.n_links > 13:
        raise MemoryError("full-space check limited to d <= 3")
    h_sector = full_space_hamiltonian_sector(geom, lam)
    h_dual = dense_dual_hamiltonian(geom, lam)
    ev_sector = np.linalg.eigvalsh(h_sector)
    ev_dual = np.linalg.eigvalsh(h_dual)
    dev = (float(np.max(np.abs(ev_sector - ev_dual)))
           if ev_sector.size == ev_dual.size else float("inf"))
    return SectorCheckReport(
        d=geom.d, lam=lam,
        sector_dim=h_sector.shape[0], dual_dim=h_dual.shape[0],
        max_eigenvalue_deviation=dev)

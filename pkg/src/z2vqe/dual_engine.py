"""Gauge-fixed state-vector engine over the plaquette-occupation basis.

States live in the 2^{N_p}-dimensional physical sector: basis index ``b``
encodes which plaquette flip operators have been applied to the all-plus
reference state (bit n of b <-> plaquette n).  In this basis the electric
term is diagonal, with value D(b) = sum_l (-1)^{sum_{p contains l} b_p},
and the magnetic term is a sum of single-bit flips.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import LatticeGeometry, wilson_rectangle

_MAX_PRECOMPUTE_NP = 20
_MAX_FULL_N = 26
_MAX_GROUP_RANK = 22


class CreutzUndefinedError(ValueError):
    """Raised when a Wilson expectation entering a Creutz ratio is <= 0."""


class EntropyBudgetError(MemoryError):
    """Raised when the GF(2) grouping would exceed the memory budget."""

    def __init__(self, rank: int):
        super().__init__(f"complement-group rank {rank} exceeds budget "
                         f"{_MAX_GROUP_RANK}")
        self.rank = rank


@dataclass
class FieldTable:
    """Per-link plaquette masks and the cached electric diagonal D(b)."""

    geom: LatticeGeometry
    link_masks: np.ndarray  # uint32 plaquette bitmask per link
    diag: np.ndarray        # D(b) over all 2^{N_p} basis states, int8

    @property
    def diag_index(self) -> np.ndarray:
        """diag shifted to [0, 2N], for table lookups keyed by D(b)."""
        idx = getattr(self, "_diag_index", None)
        if idx is None:
            idx = (self.diag.astype(np.int64) + self.geom.n_links)
            object.__setattr__(self, "_diag_index", idx)
        return idx

    @classmethod
    def build(cls, geom: LatticeGeometry) -> "FieldTable":
        n_p = geom.n_plaquettes
        if n_p > _MAX_PRECOMPUTE_NP:
            raise MemoryError(f"N_p = {n_p} exceeds precompute budget")
        masks = np.array([geom.link_plaq_mask(l) for l in range(geom.n_links)],
                         dtype=np.uint32)
        b = np.arange(1 << n_p, dtype=np.uint32)
        diag = np.zeros(1 << n_p, dtype=np.int8)
        for m in masks:
            diag += 1 - 2 * (np.bitwise_count(b & m) & 1).astype(np.int8)
        return cls(geom=geom, link_masks=masks, diag=diag)


_FIELD_TABLES: dict[int, FieldTable] = {}


def field_table(geom: LatticeGeometry) -> FieldTable:
    ft = _FIELD_TABLES.get(geom.d)
    if ft is None or ft.geom is not geom and ft.geom.d != geom.d:
        ft = FieldTable.build(geom)
        _FIELD_TABLES[geom.d] = ft
    return ft


@dataclass
class DualState:
    """Complex amplitudes over the 2^{N_p} plaquette-occupation basis."""

    amplitudes: np.ndarray
    geom: LatticeGeometry

    def copy(self) -> "DualState":
        return DualState(self.amplitudes.copy(), self.geom)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def init_reference(geom: LatticeGeometry) -> DualState:
    """The electric ground state: all plaquette bits zero."""
    amps = np.zeros(1 << geom.n_plaquettes, dtype=np.complex128)
    amps[0] = 1.0
    return DualState(amps, geom)


def init_uniform(geom: LatticeGeometry) -> DualState:
    """The magnetic ground state: uniform superposition over all bits."""
    dim = 1 << geom.n_plaquettes
    amps = np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)
    return DualState(amps, geom)


def _flip_view(amps: np.ndarray, n: int) -> np.ndarray:
    """Reshape so that axis 1 indexes plaquette bit n."""
    return amps.reshape(-1, 2, 1 << n)


def _butterfly_all(amps: np.ndarray, n_plaquettes: int, c: complex,
                   s: complex) -> None:
    """In-place prod_n (c + s * flip_n), via the eigenbasis of each flip.

    Each factor maps (a0, a1) -> (c*a0 + s*a1, s*a0 + c*a1), i.e. it scales
    the symmetric/antisymmetric combinations by (c+s) and (c-s).  Working in
    that basis halves the arithmetic and, with reused scratch buffers, avoids
    per-plaquette allocations on large state vectors.
    """
    half = amps.size // 2
    t_buf = np.empty(half, dtype=amps.dtype)
    u_buf = np.empty(half, dtype=amps.dtype)
    cp, cm = 0.5 * (c + s), 0.5 * (c - s)
    for n in range(n_plaquettes):
        v = _flip_view(amps, n)
        a0, a1 = v[:, 0, :], v[:, 1, :]
        t = t_buf.reshape(a0.shape)
        u = u_buf.reshape(a0.shape)
        np.add(a0, a1, out=t)
        np.subtract(a0, a1, out=u)
        t *= cp
        u *= cm
        np.add(t, u, out=a0)
        np.subtract(t, u, out=a1)


def apply_flip(state: DualState, n: int) -> DualState:
    """Apply the plaquette flip operator for plaquette ``n``."""
    v = _flip_view(state.amplitudes, n)
    return DualState(np.ascontiguousarray(v[:, ::-1, :]).reshape(-1), state.geom)


def apply_dissipative(state: DualState, beta: float,
                      return_norm: bool = False):
    """Apply prod_n (cosh(beta) + sinh(beta) * flip_n) and renormalize.

    With ``return_norm`` the accumulated normalization factor is returned as
    well; on the reference state it equals (cosh 2*beta)^{N_p/2}.
    """
    if beta < 0:
        raise ValueError(f"dissipative strength must be >= 0, got {beta}")
    ch, sh = np.cosh(beta), np.sinh(beta)
    amps = state.amplitudes.copy()
    _butterfly_all(amps, state.geom.n_plaquettes, ch, sh)
    norm = np.linalg.norm(amps)
    out = DualState(amps / norm, state.geom)
    if return_norm:
        return out, float(norm)
    return out


def apply_electric_phase(state: DualState, alpha: float) -> DualState:
    """Diagonal phase e^{i*alpha*D(b)} on every amplitude."""
    ft = field_table(state.geom)
    # D(b) takes integer values in [-N, N]; exponentiate once per value and
    # gather, rather than taking exp over the whole state vector.
    table = np.exp(1j * alpha * np.arange(-ft.geom.n_links,
                                          ft.geom.n_links + 1))
    return DualState(state.amplitudes * table[ft.diag_index], state.geom)


def apply_magnetic_phase(state: DualState, alpha: float) -> DualState:
    """Per-plaquette rotation exp(i*alpha*flip): cos(a)*1 + i sin(a)*flip."""
    amps = state.amplitudes.copy()
    _butterfly_all(amps, state.geom.n_plaquettes,
                   np.cos(alpha), 1j * np.sin(alpha))
    return DualState(amps, state.geom)


def electric_expectation(state: DualState) -> float:
    diag = field_table(state.geom).diag
    return float(np.sum(np.abs(state.amplitudes) ** 2 * diag))


def magnetic_expectation(state: DualState) -> float:
    amps = state.amplitudes
    total = 0.0
    for n in range(state.geom.n_plaquettes):
        v = _flip_view(amps, n)
        total += float(np.real(np.vdot(amps, np.ascontiguousarray(
            v[:, ::-1, :]).reshape(-1))))
    return total


def apply_hamiltonian(state: DualState, lam: float) -> DualState:
    """H psi with H = -H_E - lambda*H_B (unnormalized output)."""
    diag = field_table(state.geom).diag
    amps = -state.amplitudes * diag
    for n in range(state.geom.n_plaquettes):
        v = _flip_view(state.amplitudes, n)
        o = _flip_view(amps, n)
        o[:, 0, :] -= lam * v[:, 1, :]
        o[:, 1, :] -= lam * v[:, 0, :]
    return DualState(amps, state.geom)


def apply_hb(state: DualState) -> DualState:
    """H_B psi = sum of plaquette flips (unnormalized output)."""
    amps = np.zeros_like(state.amplitudes)
    for n in range(state.geom.n_plaquettes):
        v = _flip_view(state.amplitudes, n)
        o = _flip_view(amps, n)
        o[:, 0, :] += v[:, 1, :]
        o[:, 1, :] += v[:, 0, :]
    return DualState(amps, state.geom)


def energy(state: DualState, lam: float) -> float:
    """<H> = -<H_E> - lambda*<H_B> on a unit-norm state."""
    return -electric_expectation(state) - lam * magnetic_expectation(state)


def dual_magnetization(state: DualState, n: int) -> float:
    """The 't Hooft string expectation telescopes to the endpoint bit."""
    dim = state.amplitudes.size
    signs = 1.0 - 2.0 * ((np.arange(dim) >> n) & 1)
    return float(np.sum(np.abs(state.amplitudes) ** 2 * signs))


def bulk_average_magnetization(state: DualState) -> float:
    bulk = state.geom.bulk_plaquettes()
    return float(np.mean([dual_magnetization(state, n) for n in bulk]))


def wilson_expectation(state: DualState, mask: int) -> float:
    """<W> for the product of plaquette flips in ``mask`` (real part)."""
    if mask == 0:
        return 1.0
    idx = np.arange(state.amplitudes.size) ^ mask
    return float(np.real(np.vdot(state.amplitudes[idx], state.amplitudes)))


def creutz_ratio(state: DualState, l: int, anchor: int | None = None) -> float:
    """chi(l,l) from the four rectangular Wilson loops sharing one anchor."""
    geom = state.geom
    if l < 2:
        raise ValueError("Creutz ratio needs l >= 2")
    if anchor is None:
        c0 = (geom.d - 1 - l) // 2
        r0 = (geom.d - l) // 2
        anchor = geom.plaq_index(c0, r0)
    vals = {}
    for (a, b) in [(l, l), (l - 1, l - 1), (l - 1, l), (l, l - 1)]:
        w = wilson_expectation(state, wilson_rectangle(geom, a, b, anchor))
        if w <= 0:
            raise CreutzUndefinedError(
                f"non-positive Wilson expectation {w:.3e} for {a}x{b} loop")
        vals[(a, b)] = w
    return float(-np.log(vals[(l, l)] * vals[(l - 1, l - 1)]
                         / (vals[(l - 1, l)] * vals[(l, l - 1)])))


def _link_pattern_keys(state: DualState, subset: list[int]) -> np.ndarray:
    """For every basis index b, pack the X-basis bits of ``subset`` links."""
    ft = field_table(state.geom)
    b = np.arange(state.amplitudes.size, dtype=np.uint32)
    keys = np.zeros(state.amplitudes.size, dtype=np.uint64)
    for i, l in enumerate(subset):
        bit = (np.bitwise_count(b & ft.link_masks[l]) & 1).astype(np.uint64)
        keys |= bit << np.uint64(i)
    return keys


def _gf2_rank(rows: list[int]) -> int:
    rank = 0
    pivots: list[int] = []
    for r in rows:
        for p in pivots:
            r = min(r, r ^ p)
        if r:
            pivots.append(r)
            rank += 1
    return rank


def renyi2_entropy(state: DualState, subset: list[int]) -> float:
    """Second Renyi entropy of the link subset via GF(2) grouping.

    Basis states are grouped by their X-basis image on the complement links;
    Tr rho_S^2 is the squared Frobenius norm of the group Gram matrix.
    """
    geom = state.geom
    subset = sorted(set(subset))
    comp = [l for l in range(geom.n_links) if l not in subset]
    # rank of the incidence rows restricted to the complement bounds the
    # number of groups
    rows = []
    for p in range(geom.n_plaquettes):
        row = 0
        for i, l in enumerate(comp):
            if geom.incidence[l, p]:
                row |= 1 << i
        rows.append(row)
    rank = _gf2_rank(rows)
    if rank > _MAX_GROUP_RANK:
        raise EntropyBudgetError(rank)

    comp_keys = _link_pattern_keys(state, comp)
    sub_keys = _link_pattern_keys(state, subset)
    _, g = np.unique(comp_keys, return_inverse=True)
    _, u = np.unique(sub_keys, return_inverse=True)
    m = sp.coo_matrix((state.amplitudes, (g, u))).tocsr()
    gram = (m @ m.conj().T).toarray() if m.shape[0] <= m.shape[1] \
        else (m.conj().T @ m).toarray()
    purity = float(np.sum(np.abs(gram) ** 2))
    return float(-np.log2(purity))


def topological_entropy(state: DualState, region_a: list[int],
                        region_b: list[int], region_c: list[int]) -> float:
    """Seven-term Renyi-2 combination over a tripartite link region."""
    a, b, c = list(region_a), list(region_b), list(region_c)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("regions must be disjoint")
    s = renyi2_entropy
    return (s(state, a) + s(state, b) + s(state, c)
            - s(state, a + b) - s(state, a + c) - s(state, b + c)
            + s(state, a + b + c))


def default_topo_partition(geom: LatticeGeometry) \
        -> tuple[list[int], list[int], list[int]]:
    """Three pie-slice link regions around the lattice center.

    The tripartite region is a centered disk cut into three sectors, the
    standard arrangement for isolating the topological term.
    """
    d = geom.d
    # midpoint of the cloud of link midpoints; disk radius strictly smaller
    # than the lattice so the tripartite region is a proper subset (the
    # seven-term combination vanishes identically on the whole system).
    x0, y0 = (d - 1) / 2.0, d / 2.0
    radius = 0.65 * (d - 1)
    regions: tuple[list[int], list[int], list[int]] = ([], [], [])
    for lid, (c, r, ori) in enumerate(geom.links):
        x, y = (c, r + 0.5) if ori == "y" else (c + 0.5, r)
        dx, dy = x - x0, y - y0
        if np.hypot(dx, dy) > radius + 1e-9:
            continue
        ang = np.degrees(np.arctan2(dy, dx)) % 360.0
        regions[int(ang // 120.0)].append(lid)
    return regions


def to_full_xbasis(state: DualState) -> np.ndarray:
    """Expand to the full 2^N X-basis (bit l = 1 means link l in |->)."""
    geom = state.geom
    if geom.n_links > _MAX_FULL_N:
        raise MemoryError(f"N = {geom.n_links} exceeds full-space budget "
                          f"{_MAX_FULL_N}")
    n_p = geom.n_plaquettes
    colmasks = np.zeros(n_p, dtype=np.uint64)
    for p in range(n_p):
        for l in np.nonzero(geom.incidence[:, p])[0]:
            colmasks[p] |= np.uint64(1 << int(l))
    b = np.arange(1 << n_p, dtype=np.uint64)
    xconf = np.zeros(1 << n_p, dtype=np.uint64)
    for p in range(n_p):
        xconf ^= colmasks[p] * ((b >> np.uint64(p)) & np.uint64(1))
    full = np.zeros(1 << geom.n_links, dtype=np.complex128)
    full[xconf] = state.amplitudes
    return full

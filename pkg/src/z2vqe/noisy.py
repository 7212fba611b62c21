"""Circuit-level noisy simulation of the preparation circuits.

Full state-vector evolution over N data + N_p ancilla qubits with sampled
Pauli faults: after every gate a fault fires with probability p (uniform
over the 3 single-qubit Paulis, or the 15 nontrivial Pauli pairs for a
CNOT); qubit initialization and measurement records flip with probability
2p/3 each; idling locations are noise-free.  Ancillas are measured
mid-circuit with Born-rule sampling and dropped from the state, so the bulk
of the circuit runs on the data register only.

Each trajectory owns two random streams spawned deterministically from
(master seed, trajectory index): one for fault locations and one for
measurement outcomes and shot sampling, so estimates are bit-for-bit
reproducible regardless of scheduling.  Fault-free trajectories — the vast
majority at small p — are detected by replaying only the random draws and
served from a cached ideal final state.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dual_engine as de
from .circuits import Circuit, build_dva_circuit
from .lattice import LatticeGeometry

_MAX_QUBITS = 25

_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _rot(axis: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]])
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]])


@dataclass(frozen=True)
class NoiseModel:
    """Uniform circuit-level Pauli noise of strength p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("error rate must lie in [0, 1]")

    @property
    def p_gate(self) -> float:
        return self.p

    @property
    def p_flip(self) -> float:
        return 2.0 * self.p / 3.0


class _SimState:
    """State vector with droppable qubits; bit k holds qubit layout[k]."""

    def __init__(self, n_qubits: int):
        if n_qubits > _MAX_QUBITS:
            raise MemoryError(f"{n_qubits} qubits exceeds simulator budget")
        self.layout = list(range(n_qubits))
        self.amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        self.amps[0] = 1.0

    def _pos(self, q: int) -> int:
        return self.layout.index(q)

    def apply_1q(self, q: int, mat: np.ndarray) -> None:
        k = self._pos(q)
        v = self.amps.reshape(-1, 2, 1 << k)
        a0 = mat[0, 0] * v[:, 0, :] + mat[0, 1] * v[:, 1, :]
        a1 = mat[1, 0] * v[:, 0, :] + mat[1, 1] * v[:, 1, :]
        v[:, 0, :], v[:, 1, :] = a0, a1

    def apply_x(self, q: int) -> None:
        k = self._pos(q)
        v = self.amps.reshape(-1, 2, 1 << k)
        v[:] = v[:, ::-1, :]

    def apply_z(self, q: int) -> None:
        k = self._pos(q)
        self.amps.reshape(-1, 2, 1 << k)[:, 1, :] *= -1.0

    def apply_y(self, q: int) -> None:
        k = self._pos(q)
        v = self.amps.reshape(-1, 2, 1 << k)
        v[:] = v[:, ::-1, :]
        v[:, 0, :] *= -1j
        v[:, 1, :] *= 1j

    def apply_pauli(self, q: int, which: int) -> None:
        (self.apply_x, self.apply_y, self.apply_z)[which](q)

    def apply_cnot(self, ctrl: int, tgt: int) -> None:
        kc, kt = self._pos(ctrl), self._pos(tgt)
        hi, lo = max(kc, kt), min(kc, kt)
        v = self.amps.reshape(-1, 2, 1 << (hi - lo - 1) if hi > lo + 1 else 1,
                              2, 1 << lo)
        if kc == hi:
            v[:, 1, :, :, :] = v[:, 1, :, ::-1, :]
        else:
            v[:, :, :, 1, :] = v[:, ::-1, :, 1, :]

    def measure_drop(self, q: int, u: float | None,
                     forced: int | None = None) -> int:
        """Z measurement; collapses, renormalizes, and removes the qubit."""
        k = self._pos(q)
        v = self.amps.reshape(-1, 2, 1 << k)
        p1 = float(np.sum(np.abs(v[:, 1, :]) ** 2))
        m = forced if forced is not None else int(u < p1)
        branch = np.ascontiguousarray(v[:, m, :]).reshape(-1)
        nrm = np.linalg.norm(branch)
        if nrm < 1e-30:
            raise ValueError("forced outcome has zero probability")
        self.amps = branch / nrm
        self.layout.pop(k)
        return m


def _fault_after_1q(state, q, noise, rng_f):
    if rng_f.random() < noise.p_gate:
        state.apply_pauli(q, int(rng_f.integers(3)))


def _fault_after_2q(state, q0, q1, noise, rng_f):
    if rng_f.random() < noise.p_gate:
        idx = int(rng_f.integers(15)) + 1  # skip identity-identity
        a, b = idx // 4, idx % 4
        if a:
            state.apply_pauli(q0, a - 1)
        if b:
            state.apply_pauli(q1, b - 1)


def _cond_fires(gate, cbits: dict[int, int]) -> list[int]:
    fired = []
    for q, slots in gate.conditions:
        par = 0
        for c in slots:
            par ^= cbits[c]
        if par:
            fired.append(q)
    return fired


def run_trajectory(circuit: Circuit, noise: NoiseModel,
                   rng_f: np.random.Generator, rng_m: np.random.Generator,
                   forced_outcomes: np.ndarray | None = None
                   ) -> tuple[np.ndarray, dict[int, int]]:
    """One noisy execution; returns the final data-register state (Z basis,
    bit l = link l) and the recorded classical bits."""
    state = _SimState(circuit.n_qubits)
    for q in range(circuit.n_qubits):
        if rng_f.random() < noise.p_flip:
            state.apply_x(q)
    cbits: dict[int, int] = {}
    for moment in circuit.moments:
        for g in moment:
            if g.kind == "H":
                state.apply_1q(g.qubits[0], _H)
                _fault_after_1q(state, g.qubits[0], noise, rng_f)
            elif g.kind in ("RX", "RY", "RZ"):
                state.apply_1q(g.qubits[0], _rot(g.kind[1].lower(), g.param))
                _fault_after_1q(state, g.qubits[0], noise, rng_f)
            elif g.kind == "X":
                state.apply_x(g.qubits[0])
                _fault_after_1q(state, g.qubits[0], noise, rng_f)
            elif g.kind == "CNOT":
                state.apply_cnot(*g.qubits)
                _fault_after_2q(state, *g.qubits, noise, rng_f)
            elif g.kind == "MEASURE_Z":
                forced = (None if forced_outcomes is None
                          else int(forced_outcomes[g.cbit]))
                u = None if forced is not None else rng_m.random()
                m = state.measure_drop(g.qubits[0], u, forced)
                if rng_f.random() < noise.p_flip:
                    m ^= 1
                cbits[g.cbit] = m
            elif g.kind == "COND_X":
                for q in _cond_fires(g, cbits):
                    state.apply_x(q)
                    _fault_after_1q(state, q, noise, rng_f)
            else:
                raise ValueError(f"unknown gate kind {g.kind}")
    return state.amps, cbits


def _replay_is_fault_free(circuit: Circuit, noise: NoiseModel,
                          rng_f: np.random.Generator,
                          rng_m: np.random.Generator,
                          outcome_conditionals) -> bool:
    """Replays the trajectory's random draws without touching a state
    vector; valid only while no fault has fired, which is exactly the
    regime where the ideal outcome conditionals apply."""
    for _ in range(circuit.n_qubits):
        if rng_f.random() < noise.p_flip:
            return False
    cbits: dict[int, int] = {}
    raw: dict[int, int] = {}
    for moment in circuit.moments:
        for g in moment:
            if g.kind in ("H", "RX", "RY", "RZ", "X"):
                if rng_f.random() < noise.p_gate:
                    return False
            elif g.kind == "CNOT":
                if rng_f.random() < noise.p_gate:
                    return False
            elif g.kind == "MEASURE_Z":
                m = int(rng_m.random() < outcome_conditionals(g.cbit, raw))
                raw[g.cbit] = m
                if rng_f.random() < noise.p_flip:
                    return False
                cbits[g.cbit] = m
            elif g.kind == "COND_X":
                for _ in _cond_fires(g, cbits):
                    if rng_f.random() < noise.p_gate:
                        return False
    return True


def _ideal_outcome_conditionals(geom: LatticeGeometry, beta: float):
    """P(m_n = 1 | m_0..m_{n-1}) for the fault-free dissipative layer."""
    ch, sh = np.cosh(beta), np.sinh(beta)

    def conditional(n: int, prev: dict[int, int]) -> float:
        # outcome m applies cosh(b) + (-1)^m sinh(b) * flip_n (pre-correction)
        st = de.init_reference(geom)
        for k, m in prev.items():
            sign = 1.0 if m == 0 else -1.0
            flipped = de.apply_flip(st, k)
            st = de.DualState(
                ch * st.amplitudes + sign * sh * flipped.amplitudes, geom)
        flipped = de.apply_flip(st, n)
        a0 = ch * st.amplitudes + sh * flipped.amplitudes
        a1 = ch * st.amplitudes - sh * flipped.amplitudes
        tot = np.linalg.norm(a0) ** 2 + np.linalg.norm(a1) ** 2
        return float(np.linalg.norm(a1) ** 2 / tot)

    return conditional


@dataclass
class ExperimentConfig:
    d: int
    layers: int
    params: np.ndarray
    lam: float
    p: float
    n_trajectories: int = 2000
    shots: int = 100
    seed: int = 0
    post_select: bool = True


@dataclass
class EstimatorResult:
    he: float
    hb: float
    energy: float
    he_stderr: float
    hb_stderr: float
    energy_stderr: float
    rejection_rate: float
    kept: int
    total: int
    traj_energies: np.ndarray = field(repr=False,
                                      default_factory=lambda: np.array([]))


class _ShotTables:
    """Per-bitstring observables over the 2^N data register (Z basis)."""

    def __init__(self, geom: LatticeGeometry):
        n = geom.n_links
        idx = np.arange(1 << n, dtype=np.int64)
        plq = np.zeros(1 << n)
        for p in range(geom.n_plaquettes):
            mask = 0
            for l in np.nonzero(geom.incidence[:, p])[0]:
                mask |= 1 << int(l)
            plq += 1.0 - 2.0 * (np.bitwise_count(idx & mask) & 1)
        self.hb = plq
        self.he = n - 2.0 * np.bitwise_count(idx).astype(np.float64)
        ok = np.ones(1 << n, dtype=bool)
        for v in geom.vertices:
            mask = 0
            for l in v:
                mask |= 1 << l
            ok &= (np.bitwise_count(idx & mask) & 1) == 0
        self.gauss_ok = ok


_tables_cache: dict[int, _ShotTables] = {}


def _tables(geom: LatticeGeometry) -> _ShotTables:
    if geom.d not in _tables_cache:
        _tables_cache[geom.d] = _ShotTables(geom)
    return _tables_cache[geom.d]


def xbasis_amplitudes(state: np.ndarray, n: int) -> np.ndarray:
    """Hadamard transform on every qubit (bit l = 1 means link l in |->)."""
    amps = state
    for k in range(n):
        v = amps.reshape(-1, 2, 1 << k)
        a0 = (v[:, 0, :] + v[:, 1, :])
        a1 = (v[:, 0, :] - v[:, 1, :])
        amps = np.stack([a0, a1], axis=1).reshape(-1) / np.sqrt(2)
    return amps


def _xbasis_probs(state: np.ndarray, n: int) -> np.ndarray:
    return np.abs(xbasis_amplitudes(state, n)) ** 2


def _trajectory_rngs(seed: int, index: int):
    ss = np.random.SeedSequence(entropy=(seed, index))
    f, m = ss.spawn(2)
    return np.random.default_rng(f), np.random.default_rng(m)


def estimate_energy(geom: LatticeGeometry,
                    config: ExperimentConfig) -> EstimatorResult:
    """Trajectory-averaged shot estimate of the variational energy."""
    if geom.d != config.d:
        raise ValueError("geometry/config mismatch")
    params = np.asarray(config.params, dtype=float)
    circuit = build_dva_circuit(geom, params, config.layers)
    noise = NoiseModel(config.p)
    tables = _tables(geom)
    n = geom.n_links

    rng0_f, rng0_m = _trajectory_rngs(config.seed, 1 << 40)
    ideal_state, _ = run_trajectory(
        circuit, NoiseModel(0.0), rng0_f, rng0_m,
        forced_outcomes=np.zeros(geom.n_plaquettes, dtype=int))
    ideal_zprobs = np.abs(ideal_state) ** 2
    ideal_xprobs = _xbasis_probs(ideal_state, n)
    conditionals = _ideal_outcome_conditionals(geom, params[0])

    traj_hb = np.zeros(config.n_trajectories)
    traj_he = np.full(config.n_trajectories, np.nan)
    traj_kept = np.zeros(config.n_trajectories, dtype=int)
    total_x = 0
    for t in range(config.n_trajectories):
        rng_f, rng_m = _trajectory_rngs(config.seed, t)
        if config.p == 0 or _replay_is_fault_free(
                circuit, noise, rng_f, rng_m, conditionals):
            zprobs, xprobs = ideal_zprobs, ideal_xprobs
        else:
            # replay consumed draws; restart the streams for the full run
            rng_f, rng_m = _trajectory_rngs(config.seed, t)
            state, _ = run_trajectory(circuit, noise, rng_f, rng_m)
            zprobs = np.abs(state) ** 2
            xprobs = _xbasis_probs(state, n)
        zshots = rng_m.choice(1 << n, size=config.shots, p=zprobs)
        xshots = rng_m.choice(1 << n, size=config.shots, p=xprobs)
        traj_hb[t] = float(np.mean(tables.hb[zshots]))
        total_x += config.shots
        if config.post_select:
            keep = tables.gauss_ok[xshots]
            xshots = xshots[keep]
        traj_kept[t] = xshots.size
        if xshots.size:
            traj_he[t] = float(np.mean(tables.he[xshots]))

    kept = int(traj_kept.sum())
    if kept == 0:
        raise ValueError("post-selection rejected every shot")
    valid = traj_kept > 0
    w = traj_kept[valid].astype(float)
    he = float(np.sum(w * traj_he[valid]) / w.sum())
    hb = float(np.mean(traj_hb))
    he_var = np.sum(w ** 2 * (traj_he[valid] - he) ** 2) / w.sum() ** 2
    hb_var = (np.var(traj_hb, ddof=1) / traj_hb.size
              if traj_hb.size > 1 else 0.0)
    he_se, hb_se = float(np.sqrt(he_var)), float(np.sqrt(hb_var))
    energy = -he - config.lam * hb
    e_se = float(np.hypot(he_se, config.lam * hb_se))
    traj_e = np.where(valid, -np.nan_to_num(traj_he)
                      - config.lam * traj_hb, np.nan)
    return EstimatorResult(
        he=he, hb=hb, energy=energy, he_stderr=he_se, hb_stderr=hb_se,
        energy_stderr=e_se, rejection_rate=1.0 - kept / total_x,
        kept=kept, total=total_x, traj_energies=traj_e)


@dataclass
class ThresholdResult:
    layer_pair: tuple[int, int]
    p_cross: float | None
    p_cross_err: float | None
    censored: bool


def _crossing(p_grid: np.ndarray, diff: np.ndarray) -> float | None:
    """Root of diff(log p) by log-linear interpolation at the first sign
    change."""
    for i in range(len(p_grid) - 1):
        a, b = diff[i], diff[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            return float(p_grid[i])
        if a * b < 0:
            la, lb = np.log(p_grid[i]), np.log(p_grid[i + 1])
            return float(np.exp(la - a * (lb - la) / (b - a)))
    return None


def threshold_scan(geom: LatticeGeometry, lam: float,
                   params_by_layers: dict[int, np.ndarray],
                   p_grid: np.ndarray, n_trajectories: int = 2000,
                   shots: int = 100, seed: int = 0,
                   n_bootstrap: int = 100
                   ) -> tuple[list[ThresholdResult], dict]:
    """Energy-gap curves over the p grid and their layer-pair crossings.

    The gap of an l-layer run is its estimated energy minus the exact
    ground-state energy, so at p -> 0 each curve plateaus at the noiseless
    precision of its layer count.  Curves of adjacent layer counts cross at
    the error rate where the extra layer stops paying off.  Bootstrap over
    trajectories supplies the crossing uncertainty.
    """
    layer_set = sorted(params_by_layers)
    if len(layer_set) < 2 or len(p_grid) < 4:
        raise ValueError("need >= 2 layer counts and >= 4 error rates")
    curves: dict[int, dict] = {}
    # common exact reference: all layer counts are gauged against the true
    # ground energy, not their own noiseless value, so the deeper ansatz
    # starts below and the curves can cross
    from . import spectra
    e_ref = spectra.ground_state(geom, lam)[0]
    for li, l in enumerate(layer_set):
        gaps, traj_store = [], []
        for pi, p in enumerate(p_grid):
            cfg = ExperimentConfig(
                d=geom.d, layers=l, params=params_by_layers[l], lam=lam,
                p=float(p), n_trajectories=n_trajectories, shots=shots,
                seed=seed + 10000 * li + 100 * pi)
            res = estimate_energy(geom, cfg)
            gaps.append(res.energy - e_ref)
            traj_store.append(res.traj_energies - e_ref)
        curves[l] = {"p": np.asarray(p_grid, dtype=float),
                     "gap": np.array(gaps), "traj": traj_store}

    rng = np.random.default_rng(seed + 777)
    results = []
    for l1, l2 in zip(layer_set[:-1], layer_set[1:]):
        diff = curves[l2]["gap"] - curves[l1]["gap"]
        pc = _crossing(np.asarray(p_grid, dtype=float), diff)
        if pc is None:
            results.append(ThresholdResult((l1, l2), None, None, True))
            continue
        boots = []
        for _ in range(n_bootstrap):
            d2 = np.zeros(len(p_grid))
            for i in range(len(p_grid)):
                def bmean(arr):
                    vals = arr[~np.isnan(arr)]
                    pick = rng.integers(0, vals.size, vals.size)
                    return float(np.mean(vals[pick]))
                d2[i] = (bmean(curves[l2]["traj"][i])
                         - bmean(curves[l1]["traj"][i]))
            bc = _crossing(np.asarray(p_grid, dtype=float), d2)
            if bc is not None:
                boots.append(bc)
        err = float(np.std(boots)) if len(boots) > 1 else None
        results.append(ThresholdResult((l1, l2), pc, err, False))
    return results, curves

"""Variational ground-state search in the dual plaquette basis.

Ansatz families
---------------
``dva``       : non-unitary entangling layer K(beta) = prod_n (cosh b
                + sinh b * flip_n) acting on the electric reference state,
                followed by an electric phase and, per extra layer, a
                magnetic/electric phase pair.  2*layers parameters.
``hva_e``     : unitary ansatz from the electric reference state; each layer
                is a magnetic phase followed by an electric phase.
``hva_b``     : unitary ansatz from the uniform (magnetic) reference state;
                each layer is an electric phase followed by a magnetic phase.
``beta_only`` : the single-parameter dissipative layer alone (mean-field
                limit of ``dva``).

Parameters are stored in application order.  The first ``dva``/``beta_only``
parameter is the dissipative strength beta, box-constrained to [0, 1]; all
remaining parameters are phase angles, periodic with period 2*pi.

Gradients come from two independent routes: a reverse (adjoint) sweep, and a
term-by-term generator-insertion assembly that also counts the auxiliary
expectation values a hardware run would need.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import dual_engine as de
from .dual_engine import DualState
from .lattice import LatticeGeometry

_KINDS = ("dva", "hva_e", "hva_b", "beta_only")


@dataclass(frozen=True)
class AnsatzSpec:
    """Ansatz family and layer count; defines the parameter layout."""

    kind: str
    layers: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.kind == "beta_only" and self.layers != 1:
            raise ValueError("beta_only ansatz has a single layer")

    @property
    def n_params(self) -> int:
        return 1 if self.kind == "beta_only" else 2 * self.layers

    def ops(self, params: np.ndarray) -> list[tuple[str, float]]:
        """Sequence of (generator, value) steps in application order."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, "
                             f"got shape {params.shape}")
        if self.kind == "beta_only":
            return [("diss", params[0])]
        if self.kind == "dva":
            ops = [("diss", params[0]), ("E", params[1])]
            for j in range(1, self.layers):
                ops += [("B", params[2 * j]), ("E", params[2 * j + 1])]
            return ops
        pair = ("B", "E") if self.kind == "hva_e" else ("E", "B")
        ops = []
        for j in range(self.layers):
            ops += [(pair[0], params[2 * j]), (pair[1], params[2 * j + 1])]
        return ops

    def reference(self, geom: LatticeGeometry) -> DualState:
        if self.kind == "hva_b":
            return de.init_uniform(geom)
        return de.init_reference(geom)


def _apply_op(state: DualState, op: str, val: float) -> DualState:
    if op == "diss":
        return de.apply_dissipative(state, val)
    if op == "E":
        return de.apply_electric_phase(state, val)
    if op == "B":
        return de.apply_magnetic_phase(state, val)
    raise ValueError(op)


def prepare(geom: LatticeGeometry, spec: AnsatzSpec,
            params: np.ndarray) -> DualState:
    """Variational state for the given parameter vector."""
    state = spec.reference(geom)
    for op, val in spec.ops(params):
        state = _apply_op(state, op, val)
    return state


def energy(geom: LatticeGeometry, spec: AnsatzSpec, params: np.ndarray,
           lam: float) -> float:
    return de.energy(prepare(geom, spec, params), lam)


def energy_and_gradient(geom: LatticeGeometry, spec: AnsatzSpec,
                        params: np.ndarray,
                        lam: float) -> tuple[float, np.ndarray]:
    """Energy and exact gradient via a reverse sweep.

    The normalized dissipative layer phi(b) = K(b)|ref> / ||.|| has
    d phi/d b = (H_B - <phi|H_B|phi>) phi since K(b) = exp(b * H_B), so the
    sweep treats it like a unitary layer with a mean-shifted generator.
    """
    ops = spec.ops(params)
    ket = spec.reference(geom)
    diss_state = None
    for op, val in ops:
        ket = _apply_op(ket, op, val)
        if op == "diss":
            diss_state = ket.copy()
    bra = de.apply_hamiltonian(ket, lam)
    e0 = float(np.real(np.vdot(ket.amplitudes, bra.amplitudes)))

    grads = np.zeros(len(ops))
    for k in range(len(ops) - 1, -1, -1):
        op, val = ops[k]
        if op == "E":
            d = de.field_table(geom).diag
            z = np.vdot(bra.amplitudes, 1j * d * ket.amplitudes)
            grads[k] = 2.0 * z.real
            ket = de.apply_electric_phase(ket, -val)
            bra = de.apply_electric_phase(bra, -val)
        elif op == "B":
            hbk = de.apply_hb(ket)
            z = np.vdot(bra.amplitudes, 1j * hbk.amplitudes)
            grads[k] = 2.0 * z.real
            ket = de.apply_magnetic_phase(ket, -val)
            bra = de.apply_magnetic_phase(bra, -val)
        else:  # dissipative layer is always first; no further rewind needed
            phi = diss_state
            hbp = de.apply_hb(phi)
            mean = float(np.real(np.vdot(phi.amplitudes, hbp.amplitudes)))
            dv = hbp.amplitudes - mean * phi.amplitudes
            grads[k] = 2.0 * float(np.real(np.vdot(bra.amplitudes, dv)))
    return e0, grads


@dataclass
class ShiftGradient:
    gradient: np.ndarray
    n_expectations: int


def parameter_shift_gradient(geom: LatticeGeometry, spec: AnsatzSpec,
                             params: np.ndarray, lam: float) -> ShiftGradient:
    """Gradient assembled one generator term at a time.

    Each parameter's generator is a sum of elementary terms (plaquette flips
    for magnetic angles and the dissipative strength, per-link diagonal signs
    for electric angles).  For every term the derivative contribution is an
    overlap of the full state with the state carrying a single insertion of
    that term, obtained from an independent forward pass.  The counter tracks
    the auxiliary expectation values a shift-rule evaluation on hardware
    would consume: two per plaquette term and one per link term.
    """
    ops = spec.ops(params)
    table = de.field_table(geom)
    n_p = geom.n_plaquettes

    psi = prepare(geom, spec, params)
    h_psi = de.apply_hamiltonian(psi, lam)

    def propagate(state: DualState, start: int) -> DualState:
        for op, val in ops[start:]:
            state = _apply_op(state, op, val)
        return state

    def state_before(k: int) -> DualState:
        st = spec.reference(geom)
        for op, val in ops[:k]:
            st = _apply_op(st, op, val)
        return st

    grads = np.zeros(len(ops))
    count = 0
    for k, (op, val) in enumerate(ops):
        if op == "E":
            base = _apply_op(state_before(k), "E", val)
            total = 0.0
            for l in range(geom.n_links):
                sign = 1.0 - 2.0 * (
                    np.bitwise_count(
                        np.arange(1 << n_p, dtype=np.uint32)
                        & table.link_masks[l]) & 1).astype(float)
                ins = DualState(1j * sign * base.amplitudes, geom)
                ins = propagate(ins, k + 1)
                total += 2.0 * float(
                    np.real(np.vdot(h_psi.amplitudes, ins.amplitudes)))
                count += 1
            grads[k] = total
        elif op == "B":
            base = _apply_op(state_before(k), "B", val)
            total = 0.0
            for n in range(n_p):
                ins = de.apply_flip(base, n)
                ins = DualState(1j * ins.amplitudes, geom)
                ins = propagate(ins, k + 1)
                total += 2.0 * float(
                    np.real(np.vdot(h_psi.amplitudes, ins.amplitudes)))
                count += 2
            grads[k] = total
        else:
            phi = _apply_op(state_before(k), "diss", val)
            total = 0.0
            for n in range(n_p):
                flipped = de.apply_flip(phi, n)
                mean = float(np.real(
                    np.vdot(phi.amplitudes, flipped.amplitudes)))
                ins = DualState(flipped.amplitudes - mean * phi.amplitudes,
                                geom)
                ins = propagate(ins, k + 1)
                total += 2.0 * float(
                    np.real(np.vdot(h_psi.amplitudes, ins.amplitudes)))
                count += 2
            grads[k] = total
    return ShiftGradient(gradient=grads, n_expectations=count)


def wrap_angles(spec: AnsatzSpec, params: np.ndarray) -> np.ndarray:
    """Map phase angles to (-pi, pi]; the dissipative strength is left as is."""
    out = np.array(params, dtype=float)
    start = 1 if spec.kind in ("dva", "beta_only") else 0
    wrapped = np.mod(out[start:] + np.pi, 2 * np.pi) - np.pi
    wrapped[wrapped == -np.pi] = np.pi
    out[start:] = wrapped
    return out


def parameter_bounds(spec: AnsatzSpec) -> list[tuple]:
    bounds: list[tuple] = []
    if spec.kind in ("dva", "beta_only"):
        bounds.append((0.0, 1.0))
    while len(bounds) < spec.n_params:
        bounds.append((None, None))
    return bounds


def minimize_energy(geom: LatticeGeometry, spec: AnsatzSpec, lam: float,
                    x0: np.ndarray, gtol: float = 1e-12,
                    ftol: float = 1e-15,
                    maxiter: int = 500) -> optimize.OptimizeResult:
    """Local quasi-Newton descent from x0 with exact gradients."""

    def fun(x):
        return energy_and_gradient(geom, spec, x, lam)

    res = optimize.minimize(
        fun, np.asarray(x0, dtype=float), jac=True, method="L-BFGS-B",
        bounds=parameter_bounds(spec),
        options={"gtol": gtol, "ftol": ftol, "maxiter": maxiter})
    res.x = wrap_angles(spec, res.x)
    return res


@dataclass(frozen=True)
class SweepPreset:
    """Sweep work budget: grid resolution and restart count."""

    n_lambda: int
    lam_max: float
    n_starts: int
    perturb_var: float = 0.1
    # line-search tolerances; looser values cut evaluation counts on large
    # lattices without moving the optimum at the accuracy level tested here
    gtol: float = 1e-12
    ftol: float = 1e-15


DESK_PRESET = SweepPreset(n_lambda=100, lam_max=16.0, n_starts=16)
PAPER_PRESET = SweepPreset(n_lambda=800, lam_max=16.0, n_starts=336)


@dataclass
class SweepResult:
    spec: AnsatzSpec
    lambdas: np.ndarray
    energies: np.ndarray
    params: np.ndarray  # (n_lambda, n_params)
    seed: int = 0
    extras: dict = field(default_factory=dict)


def sweep(geom: LatticeGeometry, spec: AnsatzSpec,
          preset: SweepPreset = DESK_PRESET, seed: int = 0,
          lam_grid: np.ndarray | None = None) -> SweepResult:
    """Warm-started sweep over the coupling grid.

    Starting from the exactly solvable lam = 0 point (all parameters zero),
    each grid point is optimized from the previous optimum plus n_starts
    restarts, keeping the lowest energy.  Restarts alternate between local
    Gaussian perturbations of the previous optimum (diagonal covariance
    perturb_var) and global draws over the parameter ranges, so the chain
    can escape basins the warm start is locked into.  Each restart draws
    from its own generator seeded by the master seed plus a global task
    index, so results are independent of execution order.
    """
    if lam_grid is None:
        lam_grid = np.linspace(0.0, preset.lam_max, preset.n_lambda)
    lam_grid = np.asarray(lam_grid, dtype=float)
    n_par = spec.n_params
    params = np.zeros((lam_grid.size, n_par))
    energies = np.zeros(lam_grid.size)

    prev = np.zeros(n_par)
    scale = np.sqrt(preset.perturb_var)
    bounds = parameter_bounds(spec)
    for i, lam in enumerate(lam_grid):
        starts = [prev.copy()]
        for s in range(preset.n_starts):
            rng = np.random.default_rng(seed + i * preset.n_starts + s)
            if s % 2 == 0:
                x = prev + scale * rng.standard_normal(n_par)
            else:
                x = np.array([rng.uniform(lo, hi) if lo is not None
                              else rng.normal(0.0, np.pi / 2)
                              for lo, hi in bounds])
            for j, (lo, hi) in enumerate(bounds):
                if lo is not None:
                    x[j] = np.clip(x[j], lo, hi if hi is not None else np.inf)
            starts.append(x)
        best_e, best_x = np.inf, prev
        for x0 in starts:
            res = minimize_energy(geom, spec, lam, x0,
                                  gtol=preset.gtol, ftol=preset.ftol)
            if res.fun < best_e:
                best_e, best_x = float(res.fun), res.x
        params[i] = best_x
        energies[i] = best_e
        prev = best_x
    return SweepResult(spec=spec, lambdas=lam_grid, energies=energies,
                       params=params, seed=seed)


def beta_only_optimum(geom: LatticeGeometry, lam: float) -> tuple[float, float]:
    """Optimal dissipative strength and energy for the mean-field ansatz."""
    spec = AnsatzSpec("beta_only")

    def f(b):
        return energy(geom, spec, np.array([b]), lam)

    res = optimize.minimize_scalar(f, bounds=(0.0, 1.0), method="bounded",
                                   options={"xatol": 1e-12})
    return float(res.x), float(res.fun)

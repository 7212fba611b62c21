"""Gate-level preparation circuits with explicit parallel scheduling.

Qubit layout: data qubits 0..N-1 follow the link ids, ancilla qubit N + n
serves plaquette n.  Classical slot n stores the measurement of ancilla n.

The dissipative layer works as follows.  The ancilla is rotated by
RY(theta(beta)) and then Hadamard-transformed, so its state is
cos(t/2)|+> + sin(t/2)|->.  The CNOT train (data controls, ancilla target)
copies the plaquette Z-parity onto the ancilla, and a Z measurement then
applies cosh(beta) + sinh(beta) * P_n to the data register when the outcome
is 0.  Outcome 1 produces the sign-flipped factor, which the feed-forward
X string along the plaquette's dual path converts back into the desired one.

Scheduling.  The CNOT train runs in four timesteps keyed by the link's role
in its plaquette (top, right, bottom, left): a link has different roles in
its two adjacent plaquettes, so no qubit is touched twice per step.  In the
unitary layers the plaquette exponentials are packed into 12 timesteps:
four-link chains run over slots 0-6, top-row three-link chains over slots
1-5 (0-4 when there is no interior row), and bottom-row chains over slots
7-11; the trailing RX wall brings each unitary layer to 13 steps and the
dissipative layer to 9.
"""

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeGeometry

_1Q = ("H", "RX", "RY", "RZ", "X")


@dataclass(frozen=True)
class Gate:
    """One scheduled gate.

    kind: H | RX | RY | RZ | CNOT | MEASURE_Z | COND_X.
    qubits: (q,) for single-qubit gates, (control, target) for CNOT; for
    COND_X the full tuple of potentially corrected data qubits.
    cbit: classical slot written by MEASURE_Z.
    conditions: for COND_X, ((qubit, (cbit, ...)), ...) — the X on `qubit`
    fires when the XOR of the listed classical slots is 1.
    """

    kind: str
    qubits: tuple
    param: float | None = None
    cbit: int | None = None
    conditions: tuple = ()

    def __post_init__(self):
        if self.param is not None and not np.isfinite(self.param):
            raise ValueError("gate angle must be finite")


@dataclass
class Circuit:
    n_qubits: int
    n_data: int
    n_cbits: int
    moments: list[list[Gate]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.moments)

    def gates(self):
        for moment in self.moments:
            yield from moment

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates() if g.kind == "CNOT")

    def check_schedule(self) -> None:
        """No qubit twice per timestep; classical slots written once."""
        written = set()
        for t, moment in enumerate(self.moments):
            used: set[int] = set()
            for g in moment:
                qs = set(g.qubits)
                if len(qs) != len(g.qubits) or qs & used:
                    raise ValueError(f"qubit reuse in timestep {t}")
                used |= qs
                if any(q < 0 or q >= self.n_qubits for q in qs):
                    raise ValueError(f"qubit id out of range in timestep {t}")
                if g.kind == "MEASURE_Z":
                    if g.cbit in written:
                        raise ValueError(f"classical slot {g.cbit} rewritten")
                    written.add(g.cbit)
                if g.kind == "COND_X":
                    for _, cbits in g.conditions:
                        if not set(cbits) <= written:
                            raise ValueError("COND_X reads unwritten slot")

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits, "n_data": self.n_data,
            "n_cbits": self.n_cbits, "meta": self.meta,
            "depth": self.depth, "cnot_count": self.cnot_count,
            "moments": [[{"kind": g.kind, "qubits": list(g.qubits),
                          "param": g.param, "cbit": g.cbit,
                          "conditions": [[q, list(c)]
                                         for q, c in g.conditions]}
                         for g in m] for m in self.moments],
        }


def theta_of_beta(beta: float) -> float:
    """Ancilla rotation angle realizing dissipative strength beta."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return 2.0 * np.arctan(np.tanh(beta))


def link_roles(geom: LatticeGeometry, n: int) -> dict[str, int]:
    """Role (top/right/bottom/left) of each link around plaquette n."""
    c, r = geom.plaq_coords[n]
    roles = {}
    for l in np.nonzero(geom.incidence[:, n])[0]:
        lc, lr, ori = geom.links[int(l)]
        if ori == "y":
            roles["left" if lc == c else "right"] = int(l)
        else:
            roles["bottom" if lr == r else "top"] = int(l)
    return roles


def correction_mask(geom: LatticeGeometry,
                    outcomes: np.ndarray) -> np.ndarray:
    """Data-qubit X mask repairing the sign of every flagged plaquette.

    XOR of the horizontal dual paths (to the left boundary) of all
    plaquettes with outcome 1; the mask has odd overlap with plaquette p's
    links exactly when outcome_p = 1.
    """
    outcomes = np.asarray(outcomes, dtype=int)
    mask = np.zeros(geom.n_links, dtype=np.uint8)
    for n in np.nonzero(outcomes)[0]:
        for l in geom.dual_paths[int(n)]:
            mask[l] ^= 1
    return mask


def plaquette_exponential_block(links: list[int],
                                alpha: float) -> list[Gate]:
    """Gate list realizing exp(i*alpha * Z on each given link), unscheduled.

    Parity fan-in: every other link CNOTs onto the last link (the head),
    RZ(-2*alpha) on the head, then the mirrored fan-out.  Non-head links
    act only as controls, so blocks of plaquettes sharing such a link
    commute gate-by-gate and can be interleaved freely.
    """
    if not 3 <= len(links) <= 4:
        raise ValueError("plaquette must have 3 or 4 links")
    head = links[-1]
    fan = [Gate("CNOT", (l, head)) for l in links[:-1]]
    rz = Gate("RZ", (head,), param=-2.0 * alpha)
    return fan + [rz] + fan[::-1]


def _block_layout(geom: LatticeGeometry, n: int) -> tuple[list[int], int]:
    """Control order, head, and start offset for plaquette n's exponential.

    Heads are the right-hand vertical links, so a head is shared only with
    the horizontal neighbor, which reads it purely as a control.  Column
    (and boundary-row) offsets stagger the schedule so every control use of
    a head falls outside the owning block's busy window; all remaining
    shared-link uses are control-control and merely avoid equal timesteps.
    The deepest block ends at timestep 11, fixing the 12-step window.
    """
    roles = link_roles(geom, n)
    c, _ = geom.plaq_coords[n]
    if len(roles) == 4:
        order = [roles["top"], roles["bottom"], roles["left"],
                 roles["right"]]
        offset = 0 if c % 2 == 0 else 5
    elif "bottom" not in roles:  # bottom boundary row
        order = [roles["top"], roles["left"], roles["right"]]
        offset = 0 if c % 2 == 0 else 7
    else:  # top boundary row
        order = [roles["left"], roles["bottom"], roles["right"]]
        offset = 0 if c % 2 == 0 else 7
    return order, offset


_UNITARY_SLOTS = 12  # magnetic exponential window; RX wall is slot 13


def build_dva_circuit(geom: LatticeGeometry, params: np.ndarray,
                      layers: int) -> Circuit:
    """Scheduled circuit for the dissipative ansatz with `layers` layers.

    Parameters follow the variational layout: beta, the first electric
    angle, then a magnetic/electric pair per additional layer.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (2 * layers,):
        raise ValueError(f"expected {2 * layers} parameters")
    beta = params[0]
    n = geom.n_links
    n_p = geom.n_plaquettes
    anc = lambda p: n + p
    moments: list[list[Gate]] = []

    # dissipative layer: 9 timesteps
    theta = theta_of_beta(beta)
    moments.append([Gate("H", (q,)) for q in range(n)]
                   + [Gate("RY", (anc(p),), param=theta) for p in range(n_p)])
    moments.append([Gate("H", (anc(p),)) for p in range(n_p)])
    for role in ("top", "right", "bottom", "left"):
        step = []
        for p in range(n_p):
            roles = link_roles(geom, p)
            if role in roles:
                step.append(Gate("CNOT", (roles[role], anc(p))))
        moments.append(step)
    moments.append([Gate("MEASURE_Z", (anc(p),), cbit=p)
                    for p in range(n_p)])
    cond = tuple((l, tuple(p for p in range(n_p)
                           if l in geom.dual_paths[p]))
                 for l in range(n)
                 if any(l in geom.dual_paths[p] for p in range(n_p)))
    moments.append([Gate("COND_X", tuple(q for q, _ in cond),
                         conditions=cond)])
    moments.append([Gate("RX", (q,), param=-2.0 * params[1])
                    for q in range(n)])

    # unitary layers: 13 timesteps each
    for j in range(1, layers):
        a_b, a_e = params[2 * j], params[2 * j + 1]
        slots: list[list[Gate]] = [[] for _ in range(_UNITARY_SLOTS)]
        for p in range(n_p):
            links, offset = _block_layout(geom, p)
            for k, g in enumerate(plaquette_exponential_block(links, a_b)):
                slots[offset + k].append(g)
        moments.extend(slots)
        moments.append([Gate("RX", (q,), param=-2.0 * a_e)
                        for q in range(n)])

    circ = Circuit(n_qubits=n + n_p, n_data=n, n_cbits=n_p,
                   moments=moments,
                   meta={"d": geom.d, "layers": layers, "ansatz": "dva"})
    circ.check_schedule()
    return circ


def cnot_count_formula(geom: LatticeGeometry, unitary_layers: int) -> int:
    """Closed-form CNOT total for the scheduled dissipative circuit."""
    d = geom.d
    n_p = geom.n_plaquettes
    return (4 * n_p - 2 * (d - 1)
            + unitary_layers * (6 * n_p - 4 * (d - 1)))


def depth_formula(unitary_layers: int) -> int:
    return 13 * unitary_layers + 9

"""Variational circuit synthesis over the native gate set.

Targets are matched by minimizing the masked squared Frobenius distance
C(theta) = sum_{(i,j) in mask} |O_ij - U_ij(theta)|^2 with a seeded
multi-start simplex search followed by finite-difference BFGS refinement.

Also holds the SVD machinery for the non-unitary recovery factors and the
block encoding of the diagonal part. The recovery factorization uses a
coordinate layout that places the two nonzero singular values at the
X-paired basis positions 000 and 100; in that gauge the two branch
factorizations share U and D exactly and the damping-branch V is the
X-conjugated no-damping one. A descending-order SVD cannot satisfy those
relations (the required completion column collides with an occupied one),
which is why ``canonical_recovery_split`` exists alongside the generic
``svd_split``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize as sciopt

from . import code3
from .noise import DEFAULT_GATE_DURATIONS
from .circuits import Circuit, Gate, remapped
from .qcore import TOL_STRUCT, embed, ry

LINE_EDGES_3Q = ((0, 1), (1, 2))


@dataclass(frozen=True)
class NativeGateSet:
    """Gate vocabulary plus the undirected coupling graph."""

    single_qubit: tuple[str, ...] = ("RX", "RZ", "SX", "X", "ID")
    two_qubit: tuple[str, ...] = ("CZ", "RZZ")
    edges: tuple[tuple[int, int], ...] = LINE_EDGES_3Q

    def connected(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges


@dataclass(frozen=True)
class Ansatz:
    """Alternating single-qubit rotation layers (RX then RZ on every qubit)
    and CZ entangling layers over the gate set's edges."""

    n_qubits: int
    layers: int
    gateset: NativeGateSet = field(default_factory=NativeGateSet)

    @property
    def parameter_count(self) -> int:
        return 2 * self.n_qubits * (self.layers + 1)

    def circuit(self, params: Sequence[float]) -> Circuit:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.parameter_count,):
            raise ValueError(
                f"expected {self.parameter_count} parameters, got {params.shape}"
            )
        gates: list[Gate] = []
        k = 0
        for layer in range(self.layers + 1):
            for q in range(self.n_qubits):
                gates.append(Gate("RX", (q,), params[k]))
                gates.append(Gate("RZ", (q,), params[k + 1]))
                k += 2
            if layer < self.layers:
                for a, b in self.gateset.edges:
                    gates.append(Gate("CZ", (a, b)))
        return Circuit(self.n_qubits, tuple(gates))


class _AnsatzEvaluator:
    """Fast unitary evaluation: entangling layers are cached matrices,
    rotation layers are applied through axis reshapes."""

    def __init__(self, ansatz: Ansatz):
        self.ansatz = ansatz
        n = ansatz.n_qubits
        ent = np.eye(2**n, dtype=complex)
        for a, b in ansatz.gateset.edges:
            ent = embed(np.diag([1, 1, 1, -1]).astype(complex), [a, b], n) @ ent
        self.entangler = ent

    def unitary(self, params: np.ndarray) -> np.ndarray:
        a = self.ansatz
        n = a.n_qubits
        u = np.eye(2**n, dtype=complex)
        k = 0
        for layer in range(a.layers + 1):
            for q in range(n):
                u = _apply_1q(_rx_mat(params[k]), u, q, n)
                u = _apply_1q(_rz_mat(params[k + 1]), u, q, n)
                k += 2
            if layer < a.layers:
                u = self.entangler @ u
        return u


def _rx_mat(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz_mat(t: float) -> np.ndarray:
    return np.array([[np.exp(-1j * t / 2), 0], [0, np.exp(1j * t / 2)]])


def _apply_1q(g: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    dim = 2**n
    t = u.reshape(2**q, 2, -1)
    out = np.einsum("ab,ibj->iaj", g, t)
    return out.reshape(dim, dim)


@dataclass(frozen=True)
class SynthesisProblem:
    target: np.ndarray
    ansatz: Ansatz
    mask: Optional[object] = None  # None | column index list | (i, j) pair list
    tolerance: float = 1e-10
    # minimize over a global phase before evaluating the distance; off by
    # default so the cost is the literal masked sum
    phase_aligned: bool = False

    def mask_indices(self) -> tuple[np.ndarray, np.ndarray]:
        dim = self.target.shape[0]
        if self.mask is None:
            rows, cols = np.meshgrid(range(dim), range(dim), indexing="ij")
            return rows.ravel(), cols.ravel()
        mask = list(self.mask)
        if mask and isinstance(mask[0], (tuple, list)):
            rows = np.array([i for i, _ in mask])
            cols = np.array([j for _, j in mask])
        else:
            cols = np.repeat(np.asarray(mask, dtype=int), dim)
            rows = np.tile(np.arange(dim), len(mask))
        if rows.size and (rows.min() < 0 or rows.max() >= dim
                          or cols.min() < 0 or cols.max() >= dim):
            raise ValueError(f"mask exceeds the {dim}x{dim} index range")
        return rows, cols


def _masked_distance(target_vals: np.ndarray, u_vals: np.ndarray,
                     phase_aligned: bool) -> float:
    if phase_aligned:
        inner = np.vdot(u_vals, target_vals)
        aligned = u_vals * (inner / abs(inner)) if abs(inner) > 1e-15 else u_vals
        return float(np.sum(np.abs(target_vals - aligned) ** 2))
    return float(np.sum(np.abs(target_vals - u_vals) ** 2))


def cost(problem: SynthesisProblem, params: Sequence[float]) -> float:
    """Masked squared Frobenius distance, literal by default; with
    ``phase_aligned`` the distance is minimized over a global phase first."""
    u = _AnsatzEvaluator(problem.ansatz).unitary(np.asarray(params, dtype=float))
    rows, cols = problem.mask_indices()
    return _masked_distance(problem.target[rows, cols], u[rows, cols],
                            problem.phase_aligned)


@dataclass(frozen=True)
class SynthesisResult:
    params: np.ndarray
    cost: float
    converged: bool
    restarts_used: int
    seed: int


def optimize(
    problem: SynthesisProblem,
    seed: int = 0,
    restarts: int = 20,
    simplex_maxiter: Optional[int] = None,
    fd_step: float = 1e-6,
) -> SynthesisResult:
    """Multi-start Nelder-Mead with central-difference BFGS refinement.

    Deterministic for a given (problem, seed); restarts stop early once the
    problem tolerance is met. Non-convergence is reported, not raised.
    """
    evaluator = _AnsatzEvaluator(problem.ansatz)
    rows, cols = problem.mask_indices()
    tgt = problem.target[rows, cols]

    def f(x: np.ndarray) -> float:
        return _masked_distance(tgt, evaluator.unitary(x)[rows, cols],
                                problem.phase_aligned)

    def grad(x: np.ndarray) -> np.ndarray:
        g = np.empty_like(x)
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = fd_step
            g[i] = (f(x + step) - f(x - step)) / (2 * fd_step)
        return g

    nparams = problem.ansatz.parameter_count
    maxiter = simplex_maxiter or 250 * nparams
    best_x, best_c = None, math.inf
    used = 0
    for r in range(restarts):
        used = r + 1
        rng = np.random.default_rng((seed << 20) + r)
        x0 = rng.uniform(-math.pi, math.pi, nparams)
        res = sciopt.minimize(f, x0, method="Nelder-Mead",
                              options={"maxiter": maxiter, "fatol": 1e-12,
                                       "xatol": 1e-10})
        x, c = res.x, float(res.fun)
        ref = sciopt.minimize(f, x, jac=grad, method="BFGS",
                              options={"gtol": 1e-12, "maxiter": 400})
        if float(ref.fun) < c:
            x, c = ref.x, float(ref.fun)
        if c < best_c:
            best_x, best_c = x, c
        if best_c <= problem.tolerance:
            break
    return SynthesisResult(np.asarray(best_x), best_c, best_c <= problem.tolerance,
                           used, seed)


def synthesize(
    target: np.ndarray,
    mask: Optional[object],
    n_qubits: int,
    seed: int = 0,
    gateset: Optional[NativeGateSet] = None,
    start_layers: int = 3,
    max_layers: int = 8,
    tolerance: float = 1e-10,
    restarts: int = 20,
) -> tuple[Circuit, SynthesisResult]:
    """Depth-growing synthesis: start shallow, add a layer on failure."""
    gateset = gateset or NativeGateSet(edges=_line_edges(n_qubits))
    result = None
    for layers in range(start_layers, max_layers + 1):
        ansatz = Ansatz(n_qubits, layers, gateset)
        problem = SynthesisProblem(np.asarray(target, dtype=complex), ansatz,
                                   mask=mask, tolerance=tolerance)
        result = optimize(problem, seed=seed, restarts=restarts)
        if result.converged:
            return ansatz.circuit(result.params), result
    return Ansatz(n_qubits, max_layers, gateset).circuit(result.params), result


def _line_edges(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((q, q + 1) for q in range(n - 1))


# ---------------------------------------------------------------------------
# SVD splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SvdSplit:
    u: np.ndarray
    d: np.ndarray  # diagonal matrix of singular values
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u @ self.d @ self.v.conj().T


def svd_split(r: np.ndarray) -> SvdSplit:
    """Numeric SVD, singular values descending, phases fixed so the first
    above-tolerance entry of each U column is real positive."""
    r = np.asarray(r, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("svd_split expects a square matrix")
    u, s, vh = np.linalg.svd(r)
    v = vh.conj().T
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(np.abs(col) > 1e-9)[0]
        if nz.size:
            phase = col[nz[0]] / abs(col[nz[0]])
            u[:, j] = col / phase
            v[:, j] = v[:, j] / phase
    split = SvdSplit(u, np.diag(s).astype(complex), v)
    dev = np.max(np.abs(split.reconstruct() - r))
    if dev > TOL_STRUCT:
        raise ValueError(f"SVD reconstruction failed: deviation {dev}")
    return split


# Coordinate layout of the canonical recovery factorization: singular value
# 1 at position 000, (1-gamma) at 100, the occupied zero directions at 011
# and 111 so that a doubly-controlled rotation on qubits 1, 2 flags them on
# the block ancilla.
_POS_SV1 = 0  # |000>
_POS_SVG = 4  # |100>
_POS_DEAD = (3, 7)  # |011>, |111>


@dataclass(frozen=True)
class RecoverySplit:
    u: np.ndarray
    d: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    gamma: float


def canonical_recovery_split(gamma: float) -> RecoverySplit:
    """Shared-factor split of the two recovery operators.

    R_no-damping agrees with U D V0^dag and R_damping with U D V1^dag on
    their parity branches, with V0 = U and V1 = (XxXxX) U (XxIxI). D is
    diagonal with entries 1 at 000, (1-gamma) at 100, 0 at the occupied
    dead coordinates 011 and 111, and 1 at the unreachable positions.
    """
    k0 = code3.codeword(0).amplitudes
    k1 = code3.codeword(1).amplitudes
    # odd-parity complement of the code space (occupied dead directions)
    c1 = np.zeros(8, complex)
    c1[[4, 2]] = [1 / math.sqrt(2), -1 / math.sqrt(2)]
    c2 = np.zeros(8, complex)
    c2[[4, 2, 1]] = [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)]
    # even-parity basis for the remaining columns
    e000 = np.zeros(8, complex)
    e000[0] = 1.0
    sym2 = np.zeros(8, complex)
    sym2[[3, 5, 6]] = 1 / math.sqrt(3)
    f1 = np.zeros(8, complex)
    f1[[3, 5]] = [1 / math.sqrt(2), -1 / math.sqrt(2)]
    f2 = np.zeros(8, complex)
    f2[[3, 5, 6]] = [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)]

    u = np.zeros((8, 8), complex)
    u[:, _POS_SV1] = k1
    u[:, _POS_SVG] = k0
    u[:, _POS_DEAD[0]] = c1
    u[:, _POS_DEAD[1]] = c2
    for col, vec in zip((1, 2, 5, 6), (e000, sym2, f1, f2)):
        u[:, col] = vec

    d = np.eye(8, dtype=complex)
    d[_POS_SVG, _POS_SVG] = 1 - gamma
    for pos in _POS_DEAD:
        d[pos, pos] = 0.0

    xmat = np.array([[0, 1], [1, 0]], complex)
    xxx = embed(xmat, [0], 3) @ embed(xmat, [1], 3) @ embed(xmat, [2], 3)
    x1 = embed(xmat, [0], 3)
    v1 = xxx @ u @ x1
    return RecoverySplit(u=u, d=d, v0=u.copy(), v1=v1, gamma=gamma)


# ---------------------------------------------------------------------------
# Block encoding of the diagonal factor
# ---------------------------------------------------------------------------


def block_diagonal_unitary(diag: np.ndarray) -> np.ndarray:
    """Exact (n+1)-qubit unitary whose ancilla-(0,0) block is diag(d).

    The block ancilla is the last (least significant) register qubit and
    rotates by 2*arccos(d_i) conditioned on each data basis state.
    """
    diag = np.real_if_close(np.asarray(diag))
    if np.any((diag < -1e-12) | (diag > 1 + 1e-12)):
        raise ValueError(f"diagonal entries must lie in [0, 1], got {diag}")
    dim = diag.size
    w = np.zeros((2 * dim, 2 * dim), dtype=complex)
    for i, dval in enumerate(np.clip(diag, 0.0, 1.0)):
        block = ry(2 * math.acos(float(dval)))
        w[2 * i: 2 * i + 2, 2 * i: 2 * i + 2] = block
    return w


def _cx_gates(control: int, target: int) -> list[Gate]:
    """CX from the native set: RY(-pi/2) t, CZ, RY(pi/2) t. Phase exact."""
    return [
        Gate("RY", (target,), -math.pi / 2),
        Gate("CZ", (control, target)),
        Gate("RY", (target,), math.pi / 2),
    ]


def multiplexed_ry(controls: Sequence[int], target: int,
                   angles: Sequence[float]) -> list[Gate]:
    """Uniformly controlled RY: applies RY(angles[x]) to the target for
    control pattern x (controls[0] = most significant). Exact, built from
    2^k RY and 2^k CX."""
    angles = np.asarray(angles, dtype=float)
    if angles.size != 2 ** len(controls):
        raise ValueError("need one angle per control pattern")
    if len(controls) == 0:
        return [Gate("RY", (target,), float(angles[0]))]
    half = angles.size // 2
    avg = (angles[:half] + angles[half:]) / 2
    diff = (angles[:half] - angles[half:]) / 2
    gates = multiplexed_ry(controls[1:], target, avg)
    gates += _cx_gates(controls[0], target)
    gates += multiplexed_ry(controls[1:], target, diff)
    gates += _cx_gates(controls[0], target)
    return gates


# Margolus-type 5-CZ realization of the gamma = 0 diagonal block on a
# (control, control, ancilla) line with only nearest-neighbour CZs: the
# ancilla-0-input columns equal those of the doubly-controlled RY(pi)
# exactly (the textbook 3-CNOT form needs a control adjacent to the
# ancilla, which the line does not provide; 4 CZs are insufficient on this
# topology, as the synthesis landscape bottoms out well above zero).
# Angle table found by the in-package optimizer and snapped to exact
# multiples of pi/12; rows are the six rotation layers, entries are
# (RZ, RX, RZ) Euler angles per qubit in units of pi/12.
_MARGOLUS_EULER_K = (
    (0, 12, -12, -6, -6, -12, -12, 6, 5),
    (0, 0, -6, -6, 3, 0, -1, -6, 6),
    (0, -12, -6, -12, 9, -6, -12, 5, 0),
    (-12, 0, 0, 0, -6, -6, -6, 6, -6),
    (-6, -12, 6, -6, -6, -12, 0, 6, 6),
    (6, -12, 0, 6, 6, -6, 0, -9, -6),
)
_MARGOLUS_CZ_ORDER = ((1, 2), (0, 1), (1, 2), (0, 1), (1, 2))


def margolus_circuit() -> Circuit:
    """The frozen 5-CZ Margolus-type block circuit on qubits
    (control, control, block ancilla)."""
    gates: list[Gate] = []
    for layer, row in enumerate(_MARGOLUS_EULER_K):
        for q in range(3):
            a, b, c = row[3 * q: 3 * q + 3]
            for name, k in (("RZ", a), ("RX", b), ("RZ", c)):
                if k != 0:
                    gates.append(Gate(name, (q,), k * math.pi / 12))
        if layer < len(_MARGOLUS_CZ_ORDER):
            gates.append(Gate("CZ", _MARGOLUS_CZ_ORDER[layer]))
    return Circuit(3, tuple(gates))


def diagonal_block_circuit(diag: Sequence[float]) -> Circuit:
    """Exact circuit block-encoding an arbitrary diagonal with entries in
    [0, 1]: one multiplexed RY onto a fresh trailing ancilla, with angles
    2*arccos(d_i)."""
    diag = np.real_if_close(np.asarray(diag))
    if np.any((diag < -1e-12) | (diag > 1 + 1e-12)):
        raise ValueError(f"diagonal entries must lie in [0, 1], got {diag}")
    n = int(round(math.log2(diag.size)))
    if 2**n != diag.size:
        raise ValueError("diagonal length must be a power of two")
    angles = [2 * math.acos(float(np.clip(d, 0.0, 1.0))) for d in diag]
    return Circuit(n + 1, tuple(multiplexed_ry(list(range(n)), n, angles)))


def block_encode_diagonal(gamma: float, mode: str = "exact") -> Circuit:
    """Circuit realization of the recovery's diagonal factor on a
    (q0, q1, q2, block ancilla) register.

    exact: one multiplexed RY carrying the two nonzero rotation angles
    (2*arccos of 1 and 1-gamma) plus the pi flips on the dead coordinates;
    its ancilla-0 block equals the canonical diagonal for any gamma.
    approx: the gamma = 0 Margolus-type 5-CZ construction, acting on
    (q1, q2, ancilla) only.
    """
    split = canonical_recovery_split(gamma)
    diag = np.real(np.diag(split.d))
    if mode == "exact":
        return diagonal_block_circuit(diag)
    if mode == "approx":
        return remapped(margolus_circuit(), {0: 1, 1: 2, 2: 3}, 4)
    raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")


# ---------------------------------------------------------------------------
# Recovery circuit assembly and verification
# ---------------------------------------------------------------------------


def encoder_target() -> tuple[np.ndarray, list[int]]:
    """Column-masked encoder synthesis target: |000> -> |0_L|,
    |100> -> |1_L> (only those two columns matter)."""
    target = np.zeros((8, 8), complex)
    target[:, 0] = code3.codeword(0).amplitudes
    target[:, 4] = code3.codeword(1).amplitudes
    return target, [0, 4]


def recovery_u_target() -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Masked target for the shared recovery unitary U.

    Pins the two live columns (000 -> |1_L>, 100 -> |0_L>) by value and
    confines the dead columns 011 and 111 to the odd-parity subspace, which
    is exactly what the composite U D V^dag needs to reproduce the recovery
    on its branches.
    """
    split = canonical_recovery_split(0.0)
    target = np.zeros((8, 8), complex)
    target[:, _POS_SV1] = split.u[:, _POS_SV1]
    target[:, _POS_SVG] = split.u[:, _POS_SVG]
    pairs = [(i, j) for j in (_POS_SV1, _POS_SVG) for i in range(8)]
    even_rows = [0, 3, 5, 6]
    pairs += [(i, j) for j in _POS_DEAD for i in even_rows]
    return target, pairs


def synthesize_encoder(seed: int = 7, **kwargs) -> tuple[Circuit, SynthesisResult]:
    target, mask = encoder_target()
    return synthesize(target, mask, 3, seed=seed, **kwargs)


def synthesize_recovery_u(seed: int = 11, **kwargs) -> tuple[Circuit, SynthesisResult]:
    target, mask = recovery_u_target()
    return synthesize(target, mask, 3, seed=seed, **kwargs)


def build_recovery_circuit(u_circuit: Circuit, gamma: float = 0.0,
                           mode: str = "approx") -> Circuit:
    """Full syndrome-conditioned recovery on (q0, q1, q2, a1, a2).

    Applies V^dag conditioned on the syndrome ancilla a1 (plain U^dag for
    a1 = 1, X-conjugated for a1 = 0), the diagonal block encoding on a2,
    then U. Anti-controls on a1 are X-conjugated CXs.
    """
    if u_circuit.n_qubits != 3:
        raise ValueError("recovery factor circuit must act on 3 qubits")
    u5 = remapped(u_circuit, {0: 0, 1: 1, 2: 2}, 5)
    d5 = remapped(block_encode_diagonal(gamma, mode), {0: 0, 1: 1, 2: 2, 3: 4}, 5)
    gates: list[Gate] = [Gate("X", (3,))]
    for q in range(3):  # XXX on data when a1 = 0
        gates += _cx_gates(3, q)
    gates += list(u5.inverse().gates)
    gates += _cx_gates(3, 0)  # X on q0 when a1 = 0
    gates.append(Gate("X", (3,)))
    gates += list(d5.gates)
    gates += list(u5.gates)
    return Circuit(5, tuple(gates))


@dataclass(frozen=True)
class RecoveryVerification:
    max_deviation: float
    deviation_no_damping: float
    deviation_damping: float
    cz_count: int
    duration_us: float
    passed: bool


def verify_recovery_circuit(circ: Circuit, rmap: "code3.RecoveryMap",
                            tolerance: float = 1e-6,
                            gate_times: Optional[dict] = None) -> RecoveryVerification:
    """Compare the circuit's post-selected action against the analytic
    recovery branches (restricted to each branch's parity sector)."""
    if circ.n_qubits != 5:
        raise ValueError("expected the 5-qubit combined recovery circuit")
    w = circ.unitary()
    r0, r1 = rmap.operators()
    p_odd, p_even = code3.parity_projectors()
    devs = []
    for a1, (r, proj) in ((1, (r0, p_odd)), (0, (r1, p_even))):
        block = _post_selected_block(w, a1)
        impl = block @ proj
        ref = r @ proj
        dev = _channel_deviation(impl, ref)
        devs.append(dev)
    times = dict(DEFAULT_GATE_DURATIONS)
    if gate_times:
        times.update(gate_times)
    max_dev = max(devs)
    return RecoveryVerification(
        max_deviation=max_dev,
        deviation_no_damping=devs[0],
        deviation_damping=devs[1],
        cz_count=circ.count("CZ"),
        duration_us=circ.duration(times),
        passed=max_dev < tolerance,
    )


def _post_selected_block(w: np.ndarray, a1_value: int) -> np.ndarray:
    """Data-space action of the 5-qubit recovery for a fixed syndrome bit,
    post-selected on the block ancilla a2 = 0 (register (q0,q1,q2,a1,a2))."""
    block = np.zeros((8, 8), dtype=complex)
    for col in range(8):
        in_idx = col * 4 + a1_value * 2 + 0  # a1 bit, a2 = 0
        for row in range(8):
            out_idx = row * 4 + a1_value * 2 + 0
            block[row, col] = w[out_idx, in_idx]
    return block


def _channel_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Max-entry distance between a and b after aligning the global phase
    (density-matrix semantics make a global phase unobservable)."""
    inner = np.vdot(a.ravel(), b.ravel())
    phase = inner / abs(inner) if abs(inner) > 1e-12 else 1.0
    return float(np.max(np.abs(a * phase - b)))

"""Dense complex linear algebra for small qubit registers.

Index convention used by every module in this package: qubit 0 is the MOST
significant bit of a computational-basis index. A 3-qubit basis state
|q0 q1 q2> has index q0*4 + q1*2 + q2, so |100> lives at index 4. Tensor
products place the left operand on the high-order qubits.

Registers here never exceed 7 qubits (dim 128), so everything is a dense
complex ndarray; no sparsity machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

# Tolerance constants shared across the package. STRUCT covers structural
# checks (unitarity, positivity), ARITH covers plain arithmetic residues.
TOL_STRUCT = 1e-10
TOL_ARITH = 1e-12

# Set to False to skip invariant validation on construction (hot loops
# should operate on raw arrays instead).
VALIDATE = True

ArrayLike = Union[np.ndarray, Sequence]


def _as_complex(a: ArrayLike) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def _qubit_count(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return n


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on an n-qubit register."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _as_complex(self.amplitudes))
        _qubit_count(self.dim)
        if VALIDATE:
            norm = np.linalg.norm(self.amplitudes)
            if abs(norm - 1.0) > TOL_ARITH:
                raise ValueError(f"state not normalized: |psi| = {norm}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def qubit_count(self) -> int:
        return _qubit_count(self.dim)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive-semidefinite matrix on an n-qubit register.

    ``normalized=False`` marks a sub-normalized post-selection branch whose
    weight is carried in the trace.
    """

    data: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "data", _as_complex(self.data))
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("density matrix must be square")
        _qubit_count(self.dim)
        if VALIDATE:
            herm = np.max(np.abs(self.data - self.data.conj().T))
            if herm > TOL_ARITH:
                raise ValueError(f"not Hermitian: max |rho - rho^dag| = {herm}")
            if self.normalized and abs(self.trace - 1.0) > TOL_ARITH:
                raise ValueError(f"trace {self.trace} != 1 for normalized matrix")
            min_eig = np.linalg.eigvalsh(self.data)[0]
            if min_eig < -TOL_STRUCT:
                raise ValueError(f"not positive semidefinite: min eigenvalue {min_eig}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def qubit_count(self) -> int:
        return _qubit_count(self.dim)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def normalize(self) -> "DensityMatrix":
        t = self.trace
        if t <= 0:
            raise ValueError("cannot normalize a zero-trace matrix")
        return DensityMatrix(self.data / t)


@dataclass(frozen=True)
class Operator:
    """A dim x dim matrix tagged with its structural kind."""

    data: np.ndarray
    kind: str = "unitary"  # unitary | non-unitary | hermitian

    def __post_init__(self):
        object.__setattr__(self, "data", _as_complex(self.data))
        _qubit_count(self.dim)
        if self.kind not in ("unitary", "non-unitary", "hermitian"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if VALIDATE and self.kind == "unitary":
            dev = np.max(np.abs(self.data.conj().T @ self.data - np.eye(self.dim)))
            if dev > TOL_STRUCT:
                raise ValueError(f"not unitary: max |O^dag O - I| = {dev}")
        if VALIDATE and self.kind == "hermitian":
            dev = np.max(np.abs(self.data - self.data.conj().T))
            if dev > TOL_STRUCT:
                raise ValueError(f"not Hermitian: deviation {dev}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def qubit_count(self) -> int:
        return _qubit_count(self.dim)

    def dagger(self) -> "Operator":
        return Operator(self.data.conj().T, kind=self.kind)


# ---------------------------------------------------------------------------
# Fixed gate matrices (raw ndarrays; wrap in Operator where a typed value
# is needed).
# ---------------------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def rx(theta: float) -> np.ndarray:
    """exp(-i theta X / 2)"""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    """exp(-i theta Y / 2)"""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    """exp(-i theta Z / 2)"""
    return np.array(
        [[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex
    )


def rzz(theta: float) -> np.ndarray:
    """exp(-i theta Z(x)Z / 2) on two qubits."""
    ph = np.exp(-1j * theta / 2)
    return np.diag([ph, ph.conjugate(), ph.conjugate(), ph]).astype(complex)


def basis_state(n_qubits: int, index: int) -> PureState:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[index] = 1.0
    return PureState(amps)


# ---------------------------------------------------------------------------
# Register operations
# ---------------------------------------------------------------------------


def tensor(a, b):
    """Kronecker product of two values of the same kind.

    The left operand occupies the high-order qubits of the result.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(
            np.kron(a.data, b.data), normalized=a.normalized and b.normalized
        )
    if isinstance(a, Operator) and isinstance(b, Operator):
        kind = a.kind if a.kind == b.kind else "non-unitary"
        return Operator(np.kron(a.data, b.data), kind=kind)
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return np.kron(a, b)
    raise TypeError(f"tensor operands must share a kind: {type(a)}, {type(b)}")


def embed(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift a k-qubit operator onto an n-qubit register.

    ``targets[i]`` is the register qubit carrying axis ``i`` of ``op``
    (axis 0 = most significant bit of the small operator's index).
    """
    op = np.asarray(op, dtype=complex)
    k = _qubit_count(op.shape[0])
    if len(targets) != k:
        raise ValueError(f"operator acts on {k} qubits, got {len(targets)} targets")
    if len(set(targets)) != k or any(t < 0 or t >= n_qubits for t in targets):
        raise ValueError(f"invalid target set {targets} for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    order = list(targets) + rest
    full = np.kron(op, np.eye(2 ** (n_qubits - k), dtype=complex))
    # full's axis i corresponds to register qubit order[i]; permute basis
    # indices so axis i corresponds to register qubit i.
    idx = np.zeros(2**n_qubits, dtype=np.intp)
    for p in range(2**n_qubits):
        u = 0
        for i, q in enumerate(order):
            bit = (p >> (n_qubits - 1 - q)) & 1
            u |= bit << (n_qubits - 1 - i)
        idx[p] = u
    return full[np.ix_(idx, idx)]


def apply_unitary(rho: DensityMatrix, u, targets: Sequence[int] | None = None) -> DensityMatrix:
    """rho -> U rho U^dag, optionally embedding U onto ``targets``."""
    mat = u.data if isinstance(u, Operator) else np.asarray(u, dtype=complex)
    if targets is not None:
        mat = embed(mat, targets, rho.qubit_count)
    return DensityMatrix(mat @ rho.data @ mat.conj().T, normalized=rho.normalized)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (ascending register order)."""
    n = rho.qubit_count
    keep = sorted(set(keep))
    if any(q < 0 or q >= n for q in keep):
        raise ValueError(f"keep set {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    t = rho.data.reshape((2,) * (2 * n))
    for q in sorted(traced, reverse=True):
        # axes q (row side) and q + current-n (column side) are contracted
        cur = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + cur)
    k = len(keep)
    return DensityMatrix(t.reshape(2**k, 2**k), normalized=rho.normalized)


def fidelity(rho: DensityMatrix, psi: PureState) -> float:
    """<psi| rho |psi> for a normalized rho and pure target."""
    if rho.dim != psi.dim:
        raise ValueError(f"dimension mismatch: rho {rho.dim}, psi {psi.dim}")
    val = psi.amplitudes.conj() @ rho.data @ psi.amplitudes
    if abs(val.imag) > 100 * TOL_ARITH:
        raise ValueError(f"fidelity has imaginary residue {val.imag}")
    return float(val.real)


def measure_computational(rho: DensityMatrix, qubits: Sequence[int]) -> np.ndarray:
    """Outcome distribution over the listed qubits.

    Entry ``b`` is the probability that reading ``qubits`` (first listed =
    most significant bit of ``b``) yields the bits of ``b``. The complement
    register is traced out.
    """
    qubits = list(qubits)
    if not qubits:
        raise ValueError("empty measurement qubit set")
    n = rho.qubit_count
    if len(set(qubits)) != len(qubits) or any(q < 0 or q >= n for q in qubits):
        raise ValueError(f"invalid measurement qubits {qubits}")
    reduced = partial_trace(rho, qubits)
    diag = np.real(np.diag(reduced.data))
    # partial_trace keeps ascending register order; permute to listed order
    asc = sorted(qubits)
    m = len(qubits)
    probs = np.zeros(2**m)
    for b_asc in range(2**m):
        b_out = 0
        for i, q in enumerate(asc):
            bit = (b_asc >> (m - 1 - i)) & 1
            b_out |= bit << (m - 1 - qubits.index(q))
        probs[b_out] = diag[b_asc]
    return probs

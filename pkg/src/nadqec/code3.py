"""The 3-qubit amplitude-damping code.

Codewords (with qubit 0 as the most significant bit):

    |0_L> = (|100> + |010> + |001>) / sqrt(3)      (the W state)
    |1_L> = |111>

Both carry odd excitation parity, so a single Z1 Z2 Z3 parity measurement
separates the no-damping branch (ancilla 1) from the single-damping branch
(ancilla 0). Recovery is a trace-non-increasing two-operator map applied by
block encoding with one extra ancilla and post-selecting on its 0 outcome,
which makes the scheme probabilistic.

The success probability comes in two closed-form variants that disagree
in one sign; see ``success_probability_minus_form`` /
``oracle_success_probability`` and ``match_success_form``. Branch-trace
simulation arbitrates (the "+" variant wins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import noise as noise_mod
from .qcore import (
    CX,
    DensityMatrix,
    Operator,
    PureState,
    apply_unitary,
    basis_state,
    embed,
    fidelity,
    measure_computational,
    partial_trace,
    rx,
    ry,
    rz,
    tensor,
)


@dataclass(frozen=True)
class LogicalStateSpec:
    """Bloch angles of the protected logical state."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta {self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi {self.phi} outside [0, 2*pi)")


def codeword(which: int) -> PureState:
    """Logical basis state: 0 -> the W state, 1 -> |111>."""
    amps = np.zeros(8, dtype=complex)
    if which == 0:
        amps[[4, 2, 1]] = 1.0 / math.sqrt(3)
    elif which == 1:
        amps[7] = 1.0
    else:
        raise ValueError(f"codeword index must be 0 or 1, got {which}")
    return PureState(amps)


def encode_ideal(spec: LogicalStateSpec) -> PureState:
    """cos(theta/2)|0_L> + e^{i phi} sin(theta/2)|1_L>."""
    c = math.cos(spec.theta / 2)
    s = math.sin(spec.theta / 2)
    amps = c * codeword(0).amplitudes + s * np.exp(1j * spec.phi) * codeword(1).amplitudes
    return PureState(amps)


def prep_unitary(spec: LogicalStateSpec) -> np.ndarray:
    """Single-qubit G with G|0> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return rz(spec.phi) @ ry(spec.theta)


def encoder_unitary() -> Operator:
    """8x8 unitary mapping |000> -> |0_L> and |100> -> |1_L>.

    Only those two columns are contractually fixed; the remaining six are a
    deterministic Gram-Schmidt completion over the standard basis.
    """
    cols = np.zeros((8, 8), dtype=complex)
    cols[:, 0] = codeword(0).amplitudes
    cols[:, 4] = codeword(1).amplitudes
    filled = [0, 4]
    free = [c for c in range(8) if c not in filled]
    basis_iter = iter(np.eye(8, dtype=complex).T)
    for slot in free:
        while True:
            v = next(basis_iter).copy()
            for c in filled + [s for s in free if s < slot]:
                v -= cols[:, c] * (cols[:, c].conj() @ v)
            nrm = np.linalg.norm(v)
            if nrm > 1e-8:
                cols[:, slot] = v / nrm
                break
    return Operator(cols, kind="unitary")


# ---------------------------------------------------------------------------
# Recovery map
# ---------------------------------------------------------------------------


def recovery_operators(gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """The two noise-adapted recovery operators.

    R0 = (1-gamma)|0_L><0_L| + |1_L><1_L|           (no-damping branch)
    R1 = (1-gamma)|0_L><000|
         + |1_L>(<011| + <101| + <110|)/sqrt(3)     (single-damping branch)
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    k0 = codeword(0).amplitudes
    k1 = codeword(1).amplitudes
    r0 = (1 - gamma) * np.outer(k0, k0.conj()) + np.outer(k1, k1.conj())
    e000 = np.zeros(8, dtype=complex)
    e000[0] = 1.0
    sym2 = np.zeros(8, dtype=complex)
    sym2[[3, 5, 6]] = 1.0 / math.sqrt(3)  # (|011> + |101> + |110>)/sqrt(3)
    r1 = (1 - gamma) * np.outer(k0, e000.conj()) + np.outer(k1, sym2.conj())
    return r0, r1


@dataclass(frozen=True)
class RecoveryMap:
    """Recovery variant: gamma-adapted analytic, gamma=0 approximate, or a
    block-encoded circuit unitary produced by the synthesis module."""

    variant: str  # ideal | approximate | synthesized
    gamma: float = 0.0
    r0: Optional[Operator] = None
    r1: Optional[Operator] = None
    unitary: Optional[np.ndarray] = None  # 5-qubit combined recovery (synthesized)

    @classmethod
    def ideal(cls, gamma: float) -> "RecoveryMap":
        r0, r1 = recovery_operators(gamma)
        return cls("ideal", gamma=gamma,
                   r0=Operator(r0, "non-unitary"), r1=Operator(r1, "non-unitary"))

    @classmethod
    def approximate(cls) -> "RecoveryMap":
        r0, r1 = recovery_operators(0.0)
        return cls("approximate", gamma=0.0,
                   r0=Operator(r0, "non-unitary"), r1=Operator(r1, "non-unitary"))

    @classmethod
    def synthesized(cls, unitary: np.ndarray) -> "RecoveryMap":
        u = np.asarray(unitary, dtype=complex)
        if u.shape != (32, 32):
            raise ValueError("synthesized recovery must be a 5-qubit unitary")
        return cls("synthesized", unitary=u)

    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """The (no-damping, damping) branch operators; the ideal variant is
        adapted to the map's own gamma."""
        if self.variant == "ideal":
            return recovery_operators(self.gamma)
        if self.variant == "approximate":
            return recovery_operators(0.0)
        raise ValueError("synthesized maps carry a circuit unitary, not operators")


def parity_projectors() -> tuple[np.ndarray, np.ndarray]:
    """(P_odd, P_even) over the 3-qubit computational basis."""
    diag = np.array([bin(i).count("1") % 2 for i in range(8)])
    p_odd = np.diag(diag).astype(complex)
    return p_odd, np.eye(8) - p_odd


def syndrome_extract(rho: DensityMatrix) -> DensityMatrix:
    """Parity extraction on a 3 data + 1 ancilla register.

    Three CNOTs (data -> ancilla) leave the ancilla in |1> on the odd-parity
    (no-damping) branch and |0> on the even-parity (single-damping) branch.
    """
    if rho.qubit_count != 4:
        raise ValueError(f"expected 3 data + 1 ancilla, got {rho.qubit_count} qubits")
    for q in range(3):
        rho = apply_unitary(rho, CX, targets=[q, 3])
    return rho


@dataclass(frozen=True)
class RecoverBranch:
    """Result of applying one recovery operator with post-selection."""

    success_state: DensityMatrix  # sub-normalized
    success_weight: float
    failure_weight: float


def recover(rho: DensityMatrix, syndrome: int, rmap: RecoveryMap) -> RecoverBranch:
    """Apply R0 (syndrome 1, no damping) or R1 (syndrome 0) to a branch.

    The branch is block-encoded with one recovery ancilla; the success
    branch is the ancilla-0 outcome with weight Tr[R rho R^dag], the failure
    branch carries Tr[(I - R^dag R) rho].
    """
    if syndrome not in (0, 1):
        raise ValueError(f"syndrome bit must be 0 or 1, got {syndrome}")
    r0, r1 = rmap.operators()
    r = r0 if syndrome == 1 else r1
    succ = r @ rho.data @ r.conj().T
    w_succ = float(np.real(np.trace(succ)))
    w_fail = float(np.real(np.trace((np.eye(8) - r.conj().T @ r) @ rho.data)))
    return RecoverBranch(DensityMatrix(succ, normalized=False), w_succ, w_fail)


@dataclass(frozen=True)
class QecOutcome:
    conditional_state: DensityMatrix
    success_probability: float
    fidelity: float


def _apply_cycle_noise(rho: DensityMatrix, gamma: float, p: float) -> DensityMatrix:
    for q in range(3):
        rho = noise_mod.apply_channel(rho, noise_mod.amplitude_damping(gamma), q)
        if p > 0:
            rho = noise_mod.apply_channel(rho, noise_mod.dephasing(p), q)
    return rho


def qec_cycle(
    state: DensityMatrix | PureState,
    gamma: float,
    p: float,
    rmap: RecoveryMap,
    target: Optional[PureState] = None,
) -> QecOutcome:
    """One full cycle: noise, syndrome extraction, post-selected recovery.

    Ancillas are handled exactly: conditioning the syndrome ancilla splits
    the state into its parity blocks, and the recovery ancilla outcome 0
    keeps the R rho R^dag branch. The returned success probability is the
    combined weight of both syndrome branches after post-selection.
    """
    if isinstance(state, PureState):
        if target is None:
            target = state
        rho = state.to_density_matrix()
    else:
        rho = state
    if target is None:
        raise ValueError("a fidelity target is required for mixed-state input")
    if rho.qubit_count != 3:
        raise ValueError("qec_cycle operates on the 3-qubit data register")

    rho_noisy = _apply_cycle_noise(rho, gamma, p)

    if rmap.variant == "synthesized":
        sigma, p_succ = _cycle_via_circuit(rho_noisy, rmap.unitary)
    else:
        r0, r1 = rmap.operators()
        p_odd, p_even = parity_projectors()
        rho_odd = p_odd @ rho_noisy.data @ p_odd
        rho_even = p_even @ rho_noisy.data @ p_even
        succ = r0 @ rho_odd @ r0.conj().T + r1 @ rho_even @ r1.conj().T
        p_succ = float(np.real(np.trace(succ))) / rho_noisy.trace
        sigma = DensityMatrix(succ / np.trace(succ))
    return QecOutcome(sigma, p_succ, fidelity(sigma, target))


def _cycle_via_circuit(rho3: DensityMatrix, w5: np.ndarray) -> tuple[DensityMatrix, float]:
    """Syndrome + recovery through an explicit 5-qubit unitary.

    Register order (q0, q1, q2, a1, a2); post-selects a2 = 0 and traces out
    both ancillas.
    """
    anc = basis_state(2, 0).to_density_matrix()
    full = tensor(rho3, anc)
    full = syndrome_extract_5q(full)
    full = apply_unitary(full, w5)
    proj = embed(np.array([[1, 0], [0, 0]], dtype=complex), [4], 5)
    kept = proj @ full.data @ proj
    p_succ = float(np.real(np.trace(kept))) / full.trace
    reduced = partial_trace(DensityMatrix(kept, normalized=False), [0, 1, 2])
    return DensityMatrix(reduced.data / reduced.trace), p_succ


def syndrome_extract_5q(rho: DensityMatrix) -> DensityMatrix:
    """Parity CNOTs (data -> a1) on a (q0, q1, q2, a1, a2) register."""
    if rho.qubit_count != 5:
        raise ValueError("expected a 5-qubit register")
    for q in range(3):
        rho = apply_unitary(rho, CX, targets=[q, 3])
    return rho


# ---------------------------------------------------------------------------
# Exact block-encoded recovery (used by the measured-circuit estimator)
# ---------------------------------------------------------------------------


def block_unitary(r: np.ndarray) -> np.ndarray:
    """Embed a trace-non-increasing operator as the ancilla-0 block of a
    unitary on (ancilla, data): W = [[R, S'], [S, -R^dag]] with the square
    roots chosen to make W unitary."""
    r = np.asarray(r, dtype=complex)
    dim = r.shape[0]
    eye = np.eye(dim)
    s_in = _psd_sqrt(eye - r.conj().T @ r)
    s_out = _psd_sqrt(eye - r @ r.conj().T)
    w = np.block([[r, s_out], [s_in, -r.conj().T]])
    dev = np.max(np.abs(w.conj().T @ w - np.eye(2 * dim)))
    if dev > 1e-9:
        raise ValueError(f"block completion failed to be unitary: deviation {dev}")
    return w


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def combined_recovery_unitary(gamma: float,
                              rmap: Optional[RecoveryMap] = None) -> np.ndarray:
    """5-qubit unitary applying the branch recovery conditioned on a1.

    a1 = 1 selects the no-damping operator, a1 = 0 the single-damping one;
    a2 is the block-encoding ancilla whose 0 outcome flags success.
    """
    if rmap is None:
        rmap = RecoveryMap.ideal(gamma)
    r0, r1 = rmap.operators()
    w0 = block_unitary(r0)  # on (a2, data)
    w1 = block_unitary(r1)
    w0_full = embed(w0, [4, 0, 1, 2], 5)
    w1_full = embed(w1, [4, 0, 1, 2], 5)
    p1_a1 = embed(np.array([[0, 0], [0, 1]], dtype=complex), [3], 5)
    p0_a1 = embed(np.array([[1, 0], [0, 0]], dtype=complex), [3], 5)
    return p1_a1 @ w0_full + p0_a1 @ w1_full


def measured_circuit_distribution(
    spec: LogicalStateSpec,
    gamma: float,
    p: float,
    rmap: Optional[RecoveryMap] = None,
    encoder: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Outcome distribution of the full measured estimator circuit.

    Runs G, the encoder, the noise channel, syndrome extraction, the
    block-encoded recovery, then the inverted encoder and G^dag, and
    measures (q0, q1, q2, a2). The all-zero probability conditioned on
    a2 = 0 equals the post-selected state fidelity.
    """
    if rmap is None:
        rmap = RecoveryMap.ideal(gamma)
    psi0 = basis_state(5, 0).to_density_matrix()
    g = prep_unitary(spec)
    en = encoder_unitary().data if encoder is None else np.asarray(encoder, complex)
    rho = apply_unitary(psi0, g, targets=[0])
    rho = apply_unitary(rho, en, targets=[0, 1, 2])
    for q in range(3):
        rho = noise_mod.apply_channel(rho, noise_mod.amplitude_damping(gamma), q)
        if p > 0:
            rho = noise_mod.apply_channel(rho, noise_mod.dephasing(p), q)
    rho = syndrome_extract_5q(rho)
    if rmap.variant == "synthesized":
        w5 = rmap.unitary
    else:
        w5 = combined_recovery_unitary(gamma, rmap)
    rho = apply_unitary(rho, w5)
    rho = apply_unitary(rho, en.conj().T, targets=[0, 1, 2])
    rho = apply_unitary(rho, g.conj().T, targets=[0])
    return measure_computational(rho, [0, 1, 2, 4])


def fidelity_from_distribution(probs: np.ndarray) -> tuple[float, float]:
    """(conditional all-zero probability, success probability) of the
    measured estimator; the a2 success bit is the least significant."""
    probs = np.asarray(probs, dtype=float)
    success = probs[0::2].sum()  # a2 = 0
    if success <= 0:
        raise ValueError("post-selection removed all weight")
    return float(probs[0] / success), float(success)


# ---------------------------------------------------------------------------
# Closed-form oracles
# ---------------------------------------------------------------------------


def oracle_fidelity_ad(theta: float, gamma: float) -> float:
    """Post-selected state fidelity under pure damping with the adapted
    recovery: (1 + g^2 s^2 c^2) / (1 + g^2 s^2), s = sin(theta/2)."""
    s2 = math.sin(theta / 2) ** 2
    c2 = math.cos(theta / 2) ** 2
    return (1 + gamma**2 * s2 * c2) / (1 + gamma**2 * s2)


def oracle_worst_case_fidelity(gamma: float) -> float:
    """Minimum over logical states, attained at theta = pi."""
    return 1.0 / (1.0 + gamma**2)


def oracle_success_probability(theta: float, gamma: float, p: float = 0.0) -> float:
    """Success probability, the "+"-sign closed form simulation confirms:
    (1-g)^2 (1 + g^2 sin^2(t/2) + (8/3) p (p-1)(1-g) cos^2(t/2))."""
    s2 = math.sin(theta / 2) ** 2
    c2 = math.cos(theta / 2) ** 2
    return (1 - gamma) ** 2 * (
        1 + gamma**2 * s2 + (8.0 / 3.0) * p * (p - 1) * (1 - gamma) * c2
    )


def success_probability_minus_form(theta: float, gamma: float) -> float:
    """The alternative printed form (1-g)^2 (1 - g^2 sin^2(theta/2)).

    Disagrees with the "+" form in the sign of the g^2 term; kept so
    callers can report which variant the simulation matches.
    """
    s2 = math.sin(theta / 2) ** 2
    return (1 - gamma) ** 2 * (1 - gamma**2 * s2)


def success_probability_zero_logical(gamma: float, p: float) -> float:
    """Lower bound over logical states (theta = 0)."""
    return (1 - gamma) ** 2 * (1 + (8 * p / 3.0) * (gamma + p - 1 - gamma * p))


def match_success_form(tol: float = 1e-10) -> str:
    """Report which printed success-probability form branch-trace
    simulation reproduces: 'plus', 'minus', or 'neither'."""
    thetas = np.linspace(0.0, math.pi, 5)
    gammas = np.linspace(0.0, 0.3, 5)
    dev_app = dev_main = 0.0
    for theta in thetas:
        for g in gammas:
            out = qec_cycle(encode_ideal(LogicalStateSpec(theta)), g, 0.0,
                            RecoveryMap.ideal(g))
            dev_app = max(dev_app, abs(out.success_probability
                                       - oracle_success_probability(theta, g, 0.0)))
            dev_main = max(dev_main, abs(out.success_probability
                                         - success_probability_minus_form(theta, g)))
    if dev_app < tol:
        return "plus"
    if dev_main < tol:
        return "minus"
    return "neither"


_SERIES_COEFFS = {
    # variant -> (p, p^2, p*g, g^2) coefficient functions of theta
    "ideal": (
        lambda th: -(4.0 / 3.0) * math.sin(th) ** 2,
        lambda th: -(4.0 / 9.0) * math.sin(th) ** 2 * (4 * math.cos(th) + 1),
        lambda th: (1.0 / 3.0) * (2 * math.cos(th) - 1) * math.sin(th) ** 2,
        lambda th: (1.0 / 8.0) * (3 * math.cos(th) - 5) * math.sin(th / 2) ** 2,
    ),
    "approximate": (
        lambda th: -(4.0 / 3.0) * math.sin(th) ** 2,
        lambda th: -(4.0 / 9.0) * math.sin(th) ** 2 * (4 * math.cos(th) + 1),
        lambda th: (4.0 / 3.0) * math.cos(th) * math.sin(th) ** 2,
        lambda th: 0.5 * (math.cos(th) - 1),
    ),
}


def oracle_fidelity_series(theta: float, gamma: float, p: float,
                           variant: str = "ideal") -> float:
    """Truncated small-(gamma, p) fidelity expansion for either recovery.

    Valid in the small-noise regime only; the caller owns regime validity.
    """
    if variant not in _SERIES_COEFFS:
        raise ValueError(f"variant must be 'ideal' or 'approximate', got {variant!r}")
    cp, cpp, cpg, cgg = _SERIES_COEFFS[variant]
    return 1.0 + cp(theta) * p + cpp(theta) * p**2 + cpg(theta) * p * gamma \
        + cgg(theta) * gamma**2


def oracle_fidelity_series_time(theta: float, t: float, t1: float, t2: float,
                                variant: str = "ideal") -> float:
    """The same expansions re-parameterized in (t, T1, T2)."""
    s2 = math.sin(theta) ** 2
    sh2 = math.sin(theta / 2) ** 2
    lin = (2 * t1 - t2) * s2 / (3 * t1 * t2)
    if variant == "ideal":
        quad = (
            45 * t2**2
            + (32 * t1**2 - 56 * t1 * t2 - 7 * t2**2) * math.cos(theta)
            - 4 * (2 * t1 - t2) * (-4 * t1 + 5 * t2) * math.cos(2 * theta)
        ) * sh2 / (72 * t1**2 * t2**2)
    elif variant == "approximate":
        quad = (
            6 * t2 * (-t1 + 2 * t2)
            + (2 * t1 - t2) * ((2 * t1 - 7 * t2) * math.cos(theta)
                               + 2 * (t1 - 2 * t2) * math.cos(2 * theta))
        ) * sh2 / (9 * t1**2 * t2**2)
    else:
        raise ValueError(f"variant must be 'ideal' or 'approximate', got {variant!r}")
    return 1.0 - lin * t - quad * t**2


def oracle_fidelity_plus_state(gamma: float, p: float) -> float:
    """Special case |+_L>, |-_L> under the adapted recovery:
    1 - (4 + g) p / 3 - 4 p^2 / 9 - 5 g^2 / 16."""
    return 1.0 - (4 + gamma) * p / 3.0 - 4 * p**2 / 9.0 - 5 * gamma**2 / 16.0

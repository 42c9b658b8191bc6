"""Multi-round QEC scheduling, CHaDD dynamical decoupling, and the
two-qubit ZZ-crosstalk Lindblad toy model.

Timing defaults (microseconds): encoding 0.548, recovery 3.072, ancilla
reset 2.72. The reset overlaps the following round's delay and only adds
time when that delay is shorter than the reset itself. Durations are
handled as exact decimal fractions so worked examples come out exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import code3
from .noise import NoiseParams, amplitude_damping, apply_channel, dephasing, gamma_of_t, p_of_t
from .qcore import (
    DensityMatrix,
    PureState,
    X,
    Z,
    basis_state,
    embed,
    fidelity,
    partial_trace,
    rx,
    tensor,
)


def _frac(x: float | str | Fraction) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(str(x))


@dataclass(frozen=True)
class Timing:
    t_encode: float = 0.548
    t_recovery: float = 3.072
    t_reset: float = 2.72

    def __post_init__(self):
        for name in ("t_encode", "t_recovery", "t_reset"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ProtocolConfig:
    logical: code3.LogicalStateSpec
    max_delay: float
    total_free: tuple[float, ...]  # sweep points, microseconds
    recovery_variant: str = "ideal"  # ideal | approximate | synthesized
    chadd_enabled: bool = False
    timing: Timing = field(default_factory=Timing)
    recovery_unitary: Optional[np.ndarray] = None  # for the synthesized variant
    idle_noise_during_recovery: bool = False

    def __post_init__(self):
        if self.max_delay <= 0:
            raise ValueError("max_delay must be positive")
        object.__setattr__(self, "total_free", tuple(self.total_free))
        if self.recovery_variant not in ("ideal", "approximate", "synthesized"):
            raise ValueError(f"unknown recovery variant {self.recovery_variant!r}")
        if self.recovery_variant == "synthesized" and self.recovery_unitary is None:
            raise ValueError("synthesized variant requires recovery_unitary")


def schedule_rounds(total_free: float, max_delay: float) -> list[float]:
    """Greedy fill: full max_delay rounds plus one remainder round.

    Delay arithmetic runs on exact fractions so the delays sum to
    total_free exactly.
    """
    if max_delay <= 0:
        raise ValueError("max_delay must be positive")
    total = _frac(total_free)
    if total < 0:
        raise ValueError("total_free must be non-negative")
    step = _frac(max_delay)
    out: list[Fraction] = []
    while total >= step:
        out.append(step)
        total -= step
    if total > 0:
        out.append(total)
    return [float(d) for d in out]


def total_evolution_time(schedule: Sequence[float], timing: Timing = Timing()) -> float:
    """Encode + per-round (delay + recovery) + mirrored decode.

    The ancilla reset between rounds overlaps the next delay; if that delay
    is shorter than the reset, the shortfall is added.
    """
    return float(total_evolution_time_exact(schedule, timing))


def total_evolution_time_exact(schedule: Sequence[float],
                               timing: Timing = Timing()) -> Fraction:
    enc = _frac(timing.t_encode)
    rec = _frac(timing.t_recovery)
    rst = _frac(timing.t_reset)
    total = 2 * enc
    for i, delay in enumerate(_frac(d) for d in schedule):
        total += delay + rec
        if i > 0:
            shortfall = rst - delay
            if shortfall > 0:
                total += shortfall
    return total


@dataclass(frozen=True)
class MultiQecPoint:
    total_free_us: float
    total_evolution_us: float
    rounds: int
    fidelity: float
    success_probability: float
    variant: str
    chadd: bool


def _recovery_map(config: ProtocolConfig, gamma: float) -> code3.RecoveryMap:
    if config.recovery_variant == "ideal":
        return code3.RecoveryMap.ideal(gamma)
    if config.recovery_variant == "approximate":
        return code3.RecoveryMap.approximate()
    return code3.RecoveryMap.synthesized(config.recovery_unitary)


def run_multiqec(config: ProtocolConfig, noise: NoiseParams) -> list[MultiQecPoint]:
    """Analytic multi-round protocol: encode, n x (idle noise + QEC cycle),
    report fidelity against the ideal logical state and the cumulative
    post-selection probability.

    Idle noise uses gamma(t) and p(t) over each delay; by default the
    recovery window itself is noiseless (gates are time-accounted but
    error-free), which keeps single-round runs exactly on the closed-form
    oracle.
    """
    target = code3.encode_ideal(config.logical)
    points = []
    for total_free in config.total_free:
        schedule = schedule_rounds(total_free, config.max_delay)
        rho = target.to_density_matrix()
        p_total = 1.0
        for i, delay in enumerate(schedule):
            window = delay
            if config.idle_noise_during_recovery and i > 0:
                window += config.timing.t_recovery
            gammas = [gamma_of_t(window, noise.t1_of(q)) for q in range(3)]
            ps = [p_of_t(window, noise.tphi_of(q)) for q in range(3)]
            for q in range(3):
                rho = apply_channel(rho, amplitude_damping(gammas[q]), q)
                if ps[q] > 0:
                    rho = apply_channel(rho, dephasing(ps[q]), q)
            gamma_round = gammas[0]
            out = code3.qec_cycle(rho, 0.0, 0.0, _recovery_map(config, gamma_round),
                                  target=target)
            rho = out.conditional_state
            p_total *= out.success_probability
        points.append(MultiQecPoint(
            total_free_us=total_free,
            total_evolution_us=total_evolution_time(schedule, config.timing),
            rounds=len(schedule),
            fidelity=fidelity(rho, target) if schedule else 1.0,
            success_probability=p_total,
            variant=config.recovery_variant,
            chadd=False,
        ))
    return points


def bare_qubit_fidelity(t: float, t1: float) -> float:
    """|1>-prepared physical qubit reference: P(1) = exp(-t/T1)."""
    return math.exp(-t / t1)


def fit_lifetime(times: Sequence[float], fidelities: Sequence[float]) -> float:
    """Least-squares fit of A*exp(-t/tau); returns tau (microseconds)."""
    from scipy.optimize import curve_fit

    times = np.asarray(times, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    popt, _ = curve_fit(lambda t, a, tau: a * np.exp(-t / tau), times, fids,
                        p0=(1.0, max(times.max(), 1.0)), maxfev=10000)
    return float(popt[1])


# ---------------------------------------------------------------------------
# CHaDD sequences
# ---------------------------------------------------------------------------

_HADAMARD_2 = np.array([[1, 1], [1, -1]])
SIGN_MATRIX_4 = np.kron(_HADAMARD_2, _HADAMARD_2)

# Robust single-axis X-type pulse list for chromaticity 2: X on color 1,
# X on color 2, then the RX(-pi) counterparts twice, closed by plain X
# pulses again. One free interval precedes every pulse (eight equal
# intervals in total), which makes the toggling-frame sign sums over Z1,
# Z2 and Z1Z2 vanish exactly; with only the seven printed intervals they
# do not cancel.
ROBUST_PULSES = (("X", 1), ("X", 2), ("XT", 1), ("XT", 2),
                 ("XT", 1), ("XT", 2), ("X", 1), ("X", 2))
PLAIN_PULSES = (("X", 1), ("X", 2), ("X", 1), ("X", 2))


@dataclass(frozen=True)
class ChaddSequence:
    chromaticity: int
    sign_matrix: np.ndarray
    row_assignment: dict
    pulses: tuple
    tau: float

    @property
    def interval_count(self) -> int:
        return len(self.pulses)

    @property
    def cycle_time(self) -> float:
        return self.tau * self.interval_count

    def toggling_signs(self) -> np.ndarray:
        """Sign of (Z_color1, Z_color2, Z_color1*Z_color2) during each free
        interval; rows sum to zero over the cycle."""
        s1 = s2 = 1
        rows = []
        for kind, color in self.pulses:
            rows.append((s1, s2, s1 * s2))
            if color == 1:
                s1 = -s1
            else:
                s2 = -s2
        return np.array(rows).T


def chadd_sequence(chi: int, tau: float, robust: bool = True) -> ChaddSequence:
    """Single-axis X-type CHaDD for a two-colorable layout."""
    if chi != 2:
        raise ValueError(f"only chromaticity 2 is supported, got {chi}")
    if tau <= 0:
        raise ValueError("tau must be positive")
    pulses = ROBUST_PULSES if robust else PLAIN_PULSES
    # the realized toggling signs of (Z_color1, Z_color2) trace rows 3 and 2
    # of the sign matrix (the robust cycle walks each row twice); both are
    # orthogonal to each other and to the all-ones row
    seq = ChaddSequence(
        chromaticity=2,
        sign_matrix=SIGN_MATRIX_4.copy(),
        row_assignment={1: 3, 2: 2},
        pulses=pulses,
        tau=tau,
    )
    signs = seq.toggling_signs()
    if np.any(signs.sum(axis=1) != 0):
        raise AssertionError(f"toggling-frame sums must vanish: {signs}")
    reps = len(pulses) // 4
    for color in (1, 2):
        row = np.tile(seq.sign_matrix[seq.row_assignment[color]], reps)
        if not np.array_equal(signs[color - 1], row):
            raise AssertionError(f"color {color} signs do not trace its row")
    return seq


def pulse_matrix(kind: str) -> np.ndarray:
    if kind == "X":
        return X
    if kind == "XT":  # RX(-pi) = iX, an X pulse up to phase
        return rx(-math.pi)
    raise ValueError(f"unknown pulse kind {kind!r}")


# ---------------------------------------------------------------------------
# Lindblad integrator (fixed-step RK4 on the density matrix)
# ---------------------------------------------------------------------------


def lindblad_rhs(h: np.ndarray, rho: np.ndarray,
                 collapse: Sequence[np.ndarray]) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for c in collapse:
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def rk4_step(h: np.ndarray, rho: np.ndarray, dt: float,
             collapse: Sequence[np.ndarray]) -> np.ndarray:
    k1 = lindblad_rhs(h, rho, collapse)
    k2 = lindblad_rhs(h, rho + 0.5 * dt * k1, collapse)
    k3 = lindblad_rhs(h, rho + 0.5 * dt * k2, collapse)
    k4 = lindblad_rhs(h, rho + dt * k3, collapse)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve_lindblad(h: np.ndarray, rho: np.ndarray, duration: float,
                    collapse: Sequence[np.ndarray], steps: int) -> np.ndarray:
    if steps < 1:
        raise ValueError("need at least one step")
    dt = duration / steps
    for _ in range(steps):
        rho = rk4_step(h, rho, dt, collapse)
    rho = 0.5 * (rho + rho.conj().T)
    return rho


def collapse_operators(n_qubits: int, params: NoiseParams) -> list[np.ndarray]:
    """Per-qubit relaxation (sigma-) at 1/T1 and dephasing (Z) at 1/(2 Tphi)."""
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    ops = []
    for q in range(n_qubits):
        t1 = params.t1_of(q)
        if math.isfinite(t1):
            ops.append(math.sqrt(1.0 / t1) * embed(sm, [q], n_qubits))
        tphi = params.tphi_of(q)
        if math.isfinite(tphi):
            ops.append(math.sqrt(1.0 / (2.0 * tphi)) * embed(Z, [q], n_qubits))
    return ops


@dataclass(frozen=True)
class CrosstalkModel:
    """Two-qubit ZZ toy model: H = w1/2 Z1 + w2/2 Z2 + g Z1 Z2 (angular
    frequencies, rad/us) with per-qubit relaxation and dephasing."""

    omega1: float = 0.0
    omega2: float = 0.0
    g: float = 0.05
    t1: float = math.inf
    tphi: float = math.inf
    steps_per_interval: int = 200
    pulse_duration: float = 0.0  # 0 means ideal instantaneous pulses

    def hamiltonian(self) -> np.ndarray:
        z1 = embed(Z, [0], 2)
        z2 = embed(Z, [1], 2)
        return 0.5 * self.omega1 * z1 + 0.5 * self.omega2 * z2 + self.g * z1 @ z2

    def collapse(self) -> list[np.ndarray]:
        return collapse_operators(2, NoiseParams(t1=self.t1, tphi=self.tphi))


def _color_matrix(colors: Sequence[int], color: int, kind: str,
                  n_qubits: int) -> np.ndarray:
    u = np.eye(2**n_qubits, dtype=complex)
    for q, c in enumerate(colors):
        if c == color:
            u = embed(pulse_matrix(kind), [q], n_qubits) @ u
    return u


def chadd_cycle_unitary(seq: ChaddSequence, h: np.ndarray,
                        colors: Sequence[int]) -> np.ndarray:
    """Closed-system propagator of one full cycle with ideal pulses."""
    from scipy.linalg import expm

    n = int(round(math.log2(h.shape[0])))
    free = expm(-1j * h * seq.tau)
    u = np.eye(h.shape[0], dtype=complex)
    for kind, color in seq.pulses:
        u = _color_matrix(colors, color, kind, n) @ (free @ u)
    return u


@dataclass(frozen=True)
class ToySeries:
    times: np.ndarray
    pop0: np.ndarray
    pop1: np.ndarray
    fidelity: np.ndarray


def run_crosstalk_toy(model: CrosstalkModel, probe_init: str,
                      chadd: Optional[ChaddSequence], t_final: float,
                      check_convergence: bool = False) -> ToySeries:
    """Evolve (probe, spectator=|0>) under the ZZ toy model, recording the
    probe populations and its fidelity to the initial probe state.

    With CHaDD the free evolution is chopped into the sequence's intervals
    with instantaneous pulses in between; samples are taken once per full
    cycle (the pulse product is identity up to phase there).
    """
    kets = {"0": np.array([1, 0], complex), "1": np.array([0, 1], complex),
            "+": np.array([1, 1], complex) / math.sqrt(2)}
    if probe_init not in kets:
        raise ValueError(f"probe_init must be one of {sorted(kets)}")
    probe = kets[probe_init]
    psi = np.kron(probe, kets["0"])
    rho = np.outer(psi, psi.conj())
    h = model.hamiltonian()
    collapse = model.collapse()
    colors = (1, 2)

    def run(steps_scale: int) -> ToySeries:
        times = [0.0]
        rows = [rho]
        state = rho.copy()
        if chadd is None:
            n_samples = 40
            dt_sample = t_final / n_samples
            steps = model.steps_per_interval * steps_scale
            for i in range(n_samples):
                state = evolve_lindblad(h, state, dt_sample, collapse, steps)
                times.append((i + 1) * dt_sample)
                rows.append(state)
        else:
            cycle = chadd.cycle_time
            n_cycles = int(round(t_final / cycle))
            if abs(n_cycles * cycle - t_final) > 1e-9:
                raise ValueError(
                    f"t_final {t_final} is not a whole number of CHaDD cycles "
                    f"(cycle time {cycle})")
            steps = model.steps_per_interval * steps_scale
            for i in range(n_cycles):
                for kind, color in chadd.pulses:
                    state = evolve_lindblad(h, state, chadd.tau, collapse, steps)
                    u = _color_matrix(colors, color, kind, 2)
                    state = u @ state @ u.conj().T
                    if model.pulse_duration > 0:
                        # finite pulse window: dissipators act, drive ignored
                        state = evolve_lindblad(np.zeros_like(h), state,
                                                model.pulse_duration, collapse,
                                                max(4, steps // 16))
                times.append((i + 1) * cycle)
                rows.append(state)
        pop0, pop1, fid = [], [], []
        proj_probe = np.outer(probe, probe.conj())
        for r in rows:
            reduced = partial_trace(DensityMatrix(r, normalized=False), [0]).data
            pop0.append(float(np.real(reduced[0, 0])))
            pop1.append(float(np.real(reduced[1, 1])))
            fid.append(float(np.real(np.trace(proj_probe @ reduced))))
        return ToySeries(np.asarray(times), np.asarray(pop0), np.asarray(pop1),
                         np.asarray(fid))

    series = run(1)
    if check_convergence:
        finer = run(2)
        dev = np.max(np.abs(series.fidelity - finer.fidelity))
        if dev > 1e-8:
            raise RuntimeError(
                f"integrator not converged: halving the step moved the "
                f"fidelity trace by {dev:.2e} (> 1e-8); raise steps_per_interval")
    return series


# ---------------------------------------------------------------------------
# Multi-QEC with CHaDD-interleaved delays on a data + spectator register
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectatorLayout:
    """Data qubits 0..2 plus spectators, with static ZZ couplings.

    ``couplings`` are (qubit_a, qubit_b, g_rad_per_us) over the combined
    register; ``colors`` assigns each register qubit a CHaDD color (the
    default alternates along the data chain and gives each spectator the
    color opposite its first coupled partner).
    """

    spectators: int = 1
    couplings: tuple = ()
    colors: Optional[tuple] = None

    @property
    def n_qubits(self) -> int:
        return 3 + self.spectators

    def resolved_colors(self) -> tuple:
        if self.colors is not None:
            return tuple(self.colors)
        colors = {0: 1, 1: 2, 2: 1}
        for q in range(3, self.n_qubits):
            partner = next((a if b == q else b for a, b, _ in self.couplings
                            if q in (a, b)), None)
            colors[q] = 1 if partner is None else 3 - colors.get(partner, 2)
        return tuple(colors[q] for q in range(self.n_qubits))


def run_multiqec_with_chadd(
    config: ProtocolConfig,
    noise: NoiseParams,
    layout: SpectatorLayout,
    steps_per_interval: int = 60,
    robust: bool = True,
    cycles_per_delay: int = 1,
) -> list[MultiQecPoint]:
    """Multi-round QEC where each delay is Lindblad free evolution of the
    data + spectator register (ZZ couplings included), optionally chopped
    into CHaDD cycles with instantaneous pulses.

    The two QEC ancillas stay implicit: syndrome conditioning and recovery
    act on the data qubits through the exact branch arithmetic, and the
    ancilla reset is an exact replacement, so only their timing matters.
    """
    n = layout.n_qubits
    if n > 7:
        raise ValueError(f"register of {n} qubits exceeds the 7-qubit cap")
    target3 = code3.encode_ideal(config.logical)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for a, b, g in layout.couplings:
        h += g * embed(Z, [a], n) @ embed(Z, [b], n)
    collapse = collapse_operators(n, noise)
    colors = layout.resolved_colors()
    r0, r1 = code3.recovery_operators(0.0)
    p_odd, p_even = code3.parity_projectors()

    spect0 = basis_state(n - 3, 0).to_density_matrix() if n > 3 else None

    points = []
    for total_free in config.total_free:
        schedule = schedule_rounds(total_free, config.max_delay)
        rho3 = target3.to_density_matrix()
        rho = tensor(rho3, spect0).data if spect0 is not None else rho3.data
        p_total = 1.0
        for delay in schedule:
            if config.chadd_enabled:
                tau = delay / (8.0 * cycles_per_delay) if robust else \
                    delay / (4.0 * cycles_per_delay)
                seq = chadd_sequence(2, tau, robust=robust)
                for _ in range(cycles_per_delay):
                    for kind, color in seq.pulses:
                        rho = evolve_lindblad(h, rho, tau, collapse,
                                              steps_per_interval)
                        u = _color_matrix(colors, color, kind, n)
                        rho = u @ rho @ u.conj().T
            else:
                rho = evolve_lindblad(h, rho, delay, collapse,
                                      steps_per_interval * 8)
            gamma_round = gamma_of_t(delay, noise.t1_of(0))
            if config.recovery_variant == "ideal":
                rr0, rr1 = code3.recovery_operators(gamma_round)
            else:
                rr0, rr1 = r0, r1
            rho, p_round = _qec_on_register(rho, n, rr0, rr1, p_odd, p_even)
            p_total *= p_round
        reduced = partial_trace(DensityMatrix(rho, normalized=False),
                                [0, 1, 2]).normalize()
        points.append(MultiQecPoint(
            total_free_us=total_free,
            total_evolution_us=total_evolution_time(schedule, config.timing),
            rounds=len(schedule),
            fidelity=fidelity(reduced, target3),
            success_probability=p_total,
            variant=config.recovery_variant,
            chadd=config.chadd_enabled,
        ))
    return points


def _qec_on_register(rho: np.ndarray, n: int, r0: np.ndarray, r1: np.ndarray,
                     p_odd: np.ndarray, p_even: np.ndarray) -> tuple[np.ndarray, float]:
    """One post-selected QEC cycle on data qubits 0..2 of an n-qubit
    register, spectators untouched."""
    eye_rest = np.eye(2 ** (n - 3), dtype=complex)
    m0 = np.kron(r0 @ p_odd, eye_rest)
    m1 = np.kron(r1 @ p_even, eye_rest)
    out = m0 @ rho @ m0.conj().T + m1 @ rho @ m1.conj().T
    weight = float(np.real(np.trace(out)))
    total = float(np.real(np.trace(rho)))
    if weight <= 0:
        raise ValueError("post-selection removed all weight")
    return out / weight, weight / total

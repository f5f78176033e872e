"""Photon emission, wave-plate mapping, two-photon interference and the
herald budget.

Basis conventions
-----------------
Atom: index 0 is the Zeeman state that the transfer pulses map to clock
|0>, index 1 the one mapped to clock |1>. Photon: index 0 is sigma+
before the quarter-wave plate and H after it; index 1 is sigma- / V.

Each excited atom decays into the maximally entangled atom-photon
singlet (|0>|sigma-> - |1>|sigma+>)/sqrt(2). The wave plate is the
fixed unitary diag(i, 1), which sends the emission state to
(|0>|V> - i |1>|H>)/sqrt(2).

Bell-state measurement
----------------------
The two photons interfere on a 50/50 beam-splitter; each output port is
split by a polarizer onto two detectors. Detectors are numbered so that
a coincidence on (1,2) or (3,4) projects onto (|HV> + |VH>)/sqrt(2)
(detector phase 0) and a coincidence on (1,3) or (2,4) projects onto
(|HV> - |VH>)/sqrt(2) (detector phase pi). Same-polarization photon
pairs bunch and never produce a valid coincidence.

Partial distinguishability enters through the mode overlap v of the two
photon wave packets. The indistinguishable fraction v^2 performs the
coherent Bell projection; the remaining 1 - v^2 behaves as two
independent single-photon detections, which heralds on the same
detector pairs but projects onto |HV><HV| or |VH><VH| instead,
degrading the heralded fidelity. For every v the no-herald operator is
|HH><HH| + |VV><VV|.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .states import (
    QuantumState,
    StateError,
    apply_phase,
    apply_unitary,
    mixed_state,
    partial_trace,
    pure_state,
    tensor,
)

__all__ = [
    "LinkBudget",
    "LinkErrorModel",
    "HeraldEvent",
    "CALIBRATED_MODE_OVERLAP",
    "DETECTOR_PAIRS",
    "emit_atom_photon",
    "ideal_emission_ket",
    "qwp_map",
    "qwp_matrix",
    "module_emission",
    "bsm_outcome_distribution",
    "bsm",
    "conditional_herald_states",
    "herald_remote_pair",
    "heralded_bell_ket",
    "success_probability",
    "expected_rate",
]

# Mode overlap that combines with the 0.92 atom-photon fidelity per
# module to give a heralded fidelity of 0.79. Derived in
# scripts/calibrate.py from F = w^2 (1 + v^2)/2 + (1 - w^2)/4 with
# w = (4*0.92 - 1)/3 the per-module Werner weight.
CALIBRATED_MODE_OVERLAP = 0.9237467653169369

# Valid coincidence pairs and their detector phases.
DETECTOR_PAIRS: dict[tuple[int, int], float] = {
    (1, 2): 0.0,
    (3, 4): 0.0,
    (1, 3): math.pi,
    (2, 4): math.pi,
}


@dataclass(frozen=True)
class LinkBudget:
    """Multiplicative factors of the coincidence probability.

    The per-photon factors (excitation, decay branch, detector quantum
    efficiency, fiber and optics transmission, collection solid angle)
    enter squared; selecting two of the four photonic Bell states gives
    the remaining factor of one half.
    """

    p_bell: float = 0.5
    p_pi: float = 0.95
    p_s_half: float = 0.995
    q_e: float = 0.35
    t_fib: float = 0.14
    t_opt: float = 0.95
    solid_angle_fraction: float = 0.1
    rep_rate: float = 4.7e5

    def __post_init__(self):
        for name in (
            "p_bell",
            "p_pi",
            "p_s_half",
            "q_e",
            "t_fib",
            "t_opt",
            "solid_angle_fraction",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"link_budget.{name} = {value} outside [0, 1]")
        if self.rep_rate <= 0:
            raise ValueError(f"link_budget.rep_rate = {self.rep_rate} must be positive")


@dataclass(frozen=True)
class LinkErrorModel:
    """Imperfections of one heralding attempt.

    ``atom_photon_fidelity`` is the fidelity of each module's
    atom-photon state to the ideal singlet; internally it maps to a
    Werner mixing weight so that the produced state has exactly this
    fidelity. ``mode_overlap`` is the wave-packet overlap v at the
    beam-splitter. Dark counts are out of scope and pinned to zero.
    """

    atom_photon_fidelity: float = 0.92
    mode_overlap: float = CALIBRATED_MODE_OVERLAP
    dark_counts: float = 0.0

    def __post_init__(self):
        for name in ("atom_photon_fidelity", "mode_overlap"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"link_errors.{name} = {value} outside [0, 1]")
        if self.dark_counts != 0.0:
            raise ValueError("dark counts are not modelled; link_errors.dark_counts must be 0")

    def werner_weight(self) -> float:
        """Mixing weight w with rho = w |psi><psi| + (1 - w) I/4."""
        return (4.0 * self.atom_photon_fidelity - 1.0) / 3.0


@dataclass(frozen=True)
class HeraldEvent:
    """A successful two-photon coincidence."""

    detector_pair: tuple[int, int]
    phi_d: float
    attempt_index: int = 1
    time: float = 0.0

    def __post_init__(self):
        if self.detector_pair not in DETECTOR_PAIRS:
            raise ValueError(f"invalid detector pair {self.detector_pair}")
        if self.phi_d != DETECTOR_PAIRS[self.detector_pair]:
            raise ValueError(
                f"phi_d = {self.phi_d} inconsistent with detector pair {self.detector_pair}"
            )
        if self.attempt_index < 1:
            raise ValueError(f"attempt_index must be >= 1, got {self.attempt_index}")


def ideal_emission_ket(atom_label: str, photon_label: str) -> QuantumState:
    """(|0>|sigma-> - |1>|sigma+>)/sqrt(2) on (atom, photon)."""
    amps = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)
    return pure_state(amps, [atom_label, photon_label])


def emit_atom_photon(
    error: LinkErrorModel, atom_label: str = "atom", photon_label: str = "photon"
) -> QuantumState:
    """Excite one atom and collect its photon.

    Returns the Werner state w |psi><psi| + (1 - w) I/4 around the ideal
    atom-photon singlet; w is chosen so the state fidelity equals the
    configured ``atom_photon_fidelity`` exactly.
    """
    ideal = ideal_emission_ket(atom_label, photon_label)
    w = error.werner_weight()
    if w >= 1.0:
        return ideal
    rho = w * ideal.density() + (1.0 - w) * np.eye(4) / 4.0
    return mixed_state(rho, [atom_label, photon_label])


def qwp_matrix() -> np.ndarray:
    """Quarter-wave plate: sigma+ -> i H, sigma- -> V."""
    return np.diag([1j, 1.0]).astype(complex)


def qwp_map(s: QuantumState, photon_label: str) -> QuantumState:
    """Circular-to-linear polarization mapping on one photon mode."""
    return apply_unitary(s, qwp_matrix(), [photon_label])


def module_emission(
    error: LinkErrorModel, atom_label: str, photon_label: str
) -> QuantumState:
    """Emission followed by the wave plate: the state entering the fiber."""
    return qwp_map(emit_atom_photon(error, atom_label, photon_label), photon_label)


def _pol_kets() -> dict[str, np.ndarray]:
    h = np.array([1.0, 0.0], dtype=complex)
    v = np.array([0.0, 1.0], dtype=complex)
    return {"H": h, "V": v}


def _projector(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def bsm_kraus_operators(v: float) -> dict[tuple[int, int], list[np.ndarray]]:
    """Kraus operators on the two-photon polarization space per outcome.

    Basis order (HH, HV, VH, VV) with photon A the first factor. Each
    valid detector pair carries one coherent Bell-projection operator
    (weight v^2) and two incoherent product projections (weight 1-v^2).
    """
    if not 0.0 <= v <= 1.0:
        raise StateError(f"mode overlap {v} outside [0, 1]")
    kets = _pol_kets()
    hv = np.kron(kets["H"], kets["V"])
    vh = np.kron(kets["V"], kets["H"])
    psi_plus = (hv + vh) / math.sqrt(2.0)
    psi_minus = (hv - vh) / math.sqrt(2.0)
    coherent = math.sqrt(0.5) * v
    incoherent = 0.5 * math.sqrt(max(1.0 - v * v, 0.0))
    out: dict[tuple[int, int], list[np.ndarray]] = {}
    for pair, phase in DETECTOR_PAIRS.items():
        bell = psi_plus if phase == 0.0 else psi_minus
        ops = [coherent * _projector(bell)]
        if incoherent > 0.0:
            ops.append(incoherent * _projector(hv))
            ops.append(incoherent * _projector(vh))
        out[pair] = ops
    return out


def bsm_outcome_distribution(
    s: QuantumState, photon_labels: Sequence[str], v: float
) -> dict[tuple[int, int] | None, float]:
    """Probability of each detector pair (and of no herald, key None)."""
    photon_labels = list(photon_labels)
    if len(photon_labels) != 2:
        raise StateError(f"two photon modes required, got {photon_labels}")
    rho = partial_trace(s, photon_labels)
    # partial_trace keeps register order; realign to the requested order.
    if rho.labels != tuple(photon_labels):
        rho = mixed_state(_reorder_pair(rho, photon_labels), photon_labels)
    probs: dict[tuple[int, int] | None, float] = {}
    total = 0.0
    for pair, kraus in bsm_kraus_operators(v).items():
        p = 0.0
        for k in kraus:
            p += float(np.trace(k @ rho.density() @ k.conj().T).real)
        probs[pair] = p
        total += p
    probs[None] = max(1.0 - total, 0.0)
    return probs


def _reorder_pair(s: QuantumState, order: Sequence[str]) -> np.ndarray:
    perm = [s.axis(lbl) for lbl in order]
    t = s.density().reshape((2, 2, 2, 2))
    t = t.transpose(perm + [2 + ax for ax in perm])
    return t.reshape(4, 4)


def bsm(
    photons: QuantumState, v: float, rng: np.random.Generator
) -> HeraldEvent | None:
    """Sample one interference outcome for a two-photon state.

    Returns ``None`` when the photons bunch or land on an invalid
    detector combination (the attempt restarts in that case, so no
    state is tracked).
    """
    if photons.n_subsystems != 2:
        raise StateError("bsm expects a register of exactly two photon modes")
    dist = bsm_outcome_distribution(photons, list(photons.labels), v)
    outcomes = list(dist.keys())
    weights = np.array([dist[o] for o in outcomes])
    weights = weights / weights.sum()
    pick = outcomes[int(rng.choice(len(outcomes), p=weights))]
    if pick is None:
        return None
    return HeraldEvent(detector_pair=pick, phi_d=DETECTOR_PAIRS[pick])


def conditional_herald_states(
    atom_a_photon: QuantumState,
    atom_b_photon: QuantumState,
    error: LinkErrorModel,
    transfer_phase: float = 0.0,
) -> list[tuple[HeraldEvent, float, QuantumState]]:
    """Exact post-herald atom states for every valid detector pair.

    Inputs are the (atom, photon) states of the two modules after the
    wave plates. Probabilities are conditioned on both photons being
    present (they sum to the herald fraction, 1/2 for ideal inputs).
    The returned two-atom states have the photons traced out and the
    transfer pulses applied; ``transfer_phase`` is the total static
    phase the transfer pulses and geometry imprint on the A atom.
    """
    if atom_a_photon.n_subsystems != 2 or atom_b_photon.n_subsystems != 2:
        raise StateError("each module input must be one atom and one photon mode")
    atom_a, photon_a = atom_a_photon.labels
    atom_b, photon_b = atom_b_photon.labels
    joint = tensor(atom_a_photon, atom_b_photon)
    results = []
    for pair, kraus in bsm_kraus_operators(error.mode_overlap).items():
        prob, state = _project_photons(joint, (photon_a, photon_b), kraus)
        if prob <= 0.0:
            continue
        atoms = partial_trace(state, [atom_a, atom_b])
        if transfer_phase != 0.0:
            atoms = apply_phase(atoms, atom_a, transfer_phase)
        event = HeraldEvent(detector_pair=pair, phi_d=DETECTOR_PAIRS[pair])
        results.append((event, prob, atoms))
    return results


def _project_photons(
    joint: QuantumState, photon_labels: tuple[str, str], kraus: list[np.ndarray]
) -> tuple[float, QuantumState]:
    """Apply a photon-space Kraus set and renormalize."""
    n = joint.n_subsystems
    axes = [joint.axis(lbl) for lbl in photon_labels]
    rho = joint.density()
    out = np.zeros_like(rho)
    for k in kraus:
        branch = _embed_apply(rho, k, axes, n)
        out += branch
    prob = float(out.trace().real)
    if prob <= 0.0:
        return 0.0, joint
    return prob, mixed_state(out / prob, joint.labels)


def _embed_apply(rho: np.ndarray, op: np.ndarray, axes: list[int], n: int) -> np.ndarray:
    """K rho K^dagger with K acting on two subsystems of the register."""
    t = rho.reshape((2,) * (2 * n))
    op_t = op.reshape(2, 2, 2, 2)
    ket_axes = axes
    bra_axes = [n + ax for ax in axes]
    t = np.tensordot(op_t, t, axes=([2, 3], ket_axes))
    t = np.moveaxis(t, [0, 1], ket_axes)
    t = np.tensordot(op_t.conj(), t, axes=([2, 3], bra_axes))
    t = np.moveaxis(t, [0, 1], bra_axes)
    return t.reshape(rho.shape)


def herald_remote_pair(
    atom_a_photon: QuantumState,
    atom_b_photon: QuantumState,
    error: LinkErrorModel,
    rng: np.random.Generator,
    transfer_phase: float = 0.0,
) -> tuple[HeraldEvent, QuantumState] | None:
    """One coincidence attempt given both photons were collected.

    Samples the interference outcome; on a valid coincidence returns
    the herald event and the two-atom state, otherwise ``None``.
    """
    branches = conditional_herald_states(
        atom_a_photon, atom_b_photon, error, transfer_phase
    )
    probs = np.array([p for _, p, _ in branches])
    p_none = max(1.0 - probs.sum(), 0.0)
    weights = np.append(probs, p_none)
    weights = weights / weights.sum()
    pick = int(rng.choice(len(weights), p=weights))
    if pick == len(branches):
        return None
    event, _, state = branches[pick]
    return event, state


def heralded_bell_ket(pair: Sequence[str], phase: float) -> QuantumState:
    """(|01> + e^{i phase} |10>)/sqrt(2) on the given atom pair."""
    amps = np.zeros(4, dtype=complex)
    amps[1] = 1.0 / math.sqrt(2.0)
    amps[2] = np.exp(1j * phase) / math.sqrt(2.0)
    return pure_state(amps, list(pair))


def success_probability(b: LinkBudget) -> float:
    """Coincidence probability of a single excitation attempt."""
    per_photon = (
        b.p_pi * b.p_s_half * b.q_e * b.t_fib * b.t_opt * b.solid_angle_fraction
    )
    return b.p_bell * per_photon**2


def expected_rate(b: LinkBudget) -> float:
    """Heralded entanglement rate in events per second."""
    return success_probability(b) * b.rep_rate

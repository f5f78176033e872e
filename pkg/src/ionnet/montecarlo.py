"""Discrete-event Monte Carlo engine for the full modular protocol.

A protocol is an ordered script of steps over declared qubits: attempt a
remote herald on a link, re-initialize a qubit, run the local entangling
gate, apply analysis rotations, wait, and finally measure everything.

Two statistics paths share all channel code. The exact path propagates
density matrices conditioned on each herald branch (the four detector
pairs), which is cheap because the stochastic waiting time never touches
the state: the pair is born at the herald and only deterministic step
durations evolve it afterwards. The sampled path draws per-trial herald
branches, waiting times, measurement outcomes and detector errors from
the exact conditional states.

Randomness is reproducible and order-independent: every trial uses its
own generator derived from the root seed by the counter scheme
``default_rng(SeedSequence(entropy=seed, spawn_key=(stream, index)))``
with stream 0 reserved for trial sampling.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from . import states as st
from .detection import DetectorGroup, DetectorModel, apply_readout_array, confusion_matrix
from .fitting import CosineFit, DecayFit, RateFit, fit_cosine, fit_exponential_rate
from .gates import GateNoise, GateTiming, analysis_rotation, gate_timing, ms_gate
from .phases import MemoryDecoherence, PhaseLedger
from .photonics import (
    HeraldEvent,
    LinkBudget,
    LinkErrorModel,
    conditional_herald_states,
    module_emission,
    success_probability,
)

__all__ = [
    "HeraldStep",
    "ReinitStep",
    "MSGateStep",
    "AnalysisStep",
    "WaitStep",
    "MeasureStep",
    "ProtocolScript",
    "ProtocolConfig",
    "TrialRecord",
    "BranchState",
    "ParityCurve",
    "ProtocolResult",
    "ScriptError",
    "rng_stream",
    "sample_waiting",
    "exact_branches",
    "run_protocol",
    "parity_scan",
    "fit_rate",
    "coherent_entanglement_distance",
]

TRIAL_STREAM = 0


class ScriptError(ValueError):
    """Raised when a protocol script fails validation."""


@dataclass(frozen=True)
class HeraldStep:
    link: str = "ab"


@dataclass(frozen=True)
class ReinitStep:
    qubit: str


@dataclass(frozen=True)
class MSGateStep:
    pair: tuple[str, str]
    phi_a: float


@dataclass(frozen=True)
class AnalysisStep:
    targets: tuple[str, ...]
    theta: float
    phi: float


@dataclass(frozen=True)
class WaitStep:
    duration_s: float


@dataclass(frozen=True)
class MeasureStep:
    pass


Step = HeraldStep | ReinitStep | MSGateStep | AnalysisStep | WaitStep | MeasureStep


@dataclass(frozen=True)
class ProtocolScript:
    """Declared register plus the ordered step list.

    ``modules`` maps module names to the qubits they host (used for
    crosstalk and detector grouping); ``links`` maps link names to the
    (module-A atom, module-B atom) pair they entangle.
    """

    qubits: tuple[str, ...]
    modules: dict[str, tuple[str, ...]]
    links: dict[str, tuple[str, str]]
    steps: tuple[Step, ...]

    def __post_init__(self):
        self.validate()

    def validate(self):
        declared = set(self.qubits)
        if len(declared) != len(self.qubits):
            raise ScriptError(f"duplicate qubit declarations: {self.qubits}")
        hosted = [q for qs in self.modules.values() for q in qs]
        if sorted(hosted) != sorted(self.qubits):
            raise ScriptError("modules must partition the declared qubits")
        for name, (qa, qb) in self.links.items():
            if qa not in declared or qb not in declared:
                raise ScriptError(f"link {name!r} references undeclared qubits")
        if not self.steps or not isinstance(self.steps[-1], MeasureStep):
            raise ScriptError("script must end with exactly one measure step")
        measures = [s for s in self.steps if isinstance(s, MeasureStep)]
        if len(measures) != 1:
            raise ScriptError("script must contain exactly one measure step")
        for step in self.steps:
            if isinstance(step, HeraldStep) and step.link not in self.links:
                raise ScriptError(f"herald step references unknown link {step.link!r}")
            if isinstance(step, ReinitStep) and step.qubit not in declared:
                raise ScriptError(f"reinit step references unknown qubit {step.qubit!r}")
            if isinstance(step, MSGateStep):
                if any(q not in declared for q in step.pair):
                    raise ScriptError(f"gate step references unknown qubits {step.pair}")
            if isinstance(step, AnalysisStep):
                if any(q not in declared for q in step.targets):
                    raise ScriptError(
                        f"analysis step references unknown qubits {step.targets}"
                    )
            if isinstance(step, WaitStep) and step.duration_s < 0:
                raise ScriptError(f"negative wait duration {step.duration_s}")

    def module_of(self, qubit: str) -> str:
        for module, qs in self.modules.items():
            if qubit in qs:
                return module
        raise ScriptError(f"qubit {qubit!r} not hosted by any module")

    def detector_layout(self) -> tuple[DetectorGroup, ...]:
        """Detector groups over bit positions in ``qubits`` order."""
        groups = []
        for module, qs in self.modules.items():
            positions = tuple(self.qubits.index(q) for q in qs if q in self.qubits)
            if positions:
                groups.append(DetectorGroup(module=module, positions=positions))
        return tuple(groups)


@dataclass(frozen=True)
class ProtocolConfig:
    """Physics knobs consumed by the engine (built from a Scenario)."""

    budget: LinkBudget = field(default_factory=LinkBudget)
    link_errors: LinkErrorModel = field(default_factory=LinkErrorModel)
    gate_noise: GateNoise = field(default_factory=GateNoise)
    timing: GateTiming = field(default_factory=lambda: gate_timing(20e3))
    ledger: PhaseLedger = field(default_factory=PhaseLedger)
    decoherence: MemoryDecoherence | None = field(default_factory=MemoryDecoherence)
    detectors: DetectorModel = field(default_factory=DetectorModel)
    crosstalk_depol: float = 0.0
    reinit_duration_s: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.crosstalk_depol <= 1.0:
            raise ValueError(
                f"protocol.crosstalk_depol = {self.crosstalk_depol} outside [0, 1]"
            )
        if self.reinit_duration_s < 0:
            raise ValueError("reinit duration must be non-negative")


@dataclass(frozen=True)
class TrialRecord:
    herald: HeraldEvent | None
    attempts_used: int
    wall_time_s: float
    outcome_bits: tuple[int, ...]
    true_bits: tuple[int, ...]
    analysis_phase: float


@dataclass(frozen=True)
class BranchState:
    """One deterministic herald branch of the protocol."""

    herald: HeraldEvent | None
    weight: float
    state: st.QuantumState
    elapsed_s: float


@dataclass(frozen=True)
class ParityCurve:
    """Parity of a qubit pair versus the analysis phase.

    ``values`` are sampled through the detector model; the exact curves
    carry the density-matrix expectations with (``exact_reported``) and
    without (``exact_ideal``) detection errors. ``condition`` is "all"
    or "<qubit>=<bit>" for curves conditioned on a reported bit.
    """

    condition: str
    phases: tuple[float, ...]
    values: tuple[float, ...]
    errors: tuple[float, ...]
    exact_reported: tuple[float, ...]
    exact_ideal: tuple[float, ...]


@dataclass
class ProtocolResult:
    n_trials: int
    seed: int
    populations: dict[str, tuple[float, float]]
    populations_true: dict[str, tuple[float, float]]
    exact_populations: dict[str, float]
    branches: list[BranchState]
    records: list[TrialRecord]
    analysis_phase: float
    rate_fit: RateFit | None = None
    coherence_fit: DecayFit | None = None
    parity_curves: dict[str, ParityCurve] = field(default_factory=dict)
    oscillation_fits: dict[str, CosineFit] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for a (stream, index, ...) counter under the root seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def sample_waiting(link: LinkBudget, rng: np.random.Generator) -> tuple[int, float]:
    """Number of attempts until the first herald and the wall time spent.

    Attempts are geometric with the budget coincidence probability; the
    wall time is attempts over the repetition rate.
    """
    p = success_probability(link)
    if p <= 0.0:
        raise ValueError("success probability is zero; the protocol would never herald")
    attempts = int(rng.geometric(p))
    return attempts, attempts / link.rep_rate


def _free_evolution(
    state: st.QuantumState,
    dt: float,
    cfg: ProtocolConfig,
    script: ProtocolScript,
    live_pairs: list[tuple[str, str]],
) -> st.QuantumState:
    """Inter-module phase beat plus memory dephasing for ``dt`` seconds.

    The Zeeman beat is a local Z phase on every module-B atom (each
    module is tracked in its own rotating frame, so intra-module
    coherences are static). Collective dephasing acts on each heralded
    pair that is still in the register.
    """
    if dt <= 0:
        return state
    out = state
    b_module_qubits = script.modules.get("B", ())
    for q in b_module_qubits:
        if q in out.labels:
            out = st.apply_phase(out, q, -cfg.ledger.delta_omega_ab * dt)
    if cfg.decoherence is not None:
        gamma = math.exp(-dt / cfg.decoherence.tau_s)
        for pair in live_pairs:
            if all(q in out.labels for q in pair):
                out = st.dephase_pair(out, pair, gamma)
    return out


def exact_branches(script: ProtocolScript, cfg: ProtocolConfig) -> list[BranchState]:
    """Propagate the script exactly, branching on herald outcomes."""
    initial = st.basis_state([0] * len(script.qubits), script.qubits)
    branches = [BranchState(herald=None, weight=1.0, state=initial, elapsed_s=0.0)]
    live_pairs: list[tuple[str, str]] = []
    for step in script.steps:
        if isinstance(step, MeasureStep):
            break
        if isinstance(step, HeraldStep):
            branches = _herald_branches(branches, script.links[step.link], cfg)
            live_pairs.append(script.links[step.link])
        elif isinstance(step, ReinitStep):
            branches = [
                replace(
                    b,
                    state=_reinit(b.state, step.qubit, script, cfg),
                    elapsed_s=b.elapsed_s + cfg.reinit_duration_s,
                )
                for b in branches
            ]
            if cfg.reinit_duration_s > 0:
                branches = [
                    replace(
                        b,
                        state=_free_evolution(
                            b.state, cfg.reinit_duration_s, cfg, script, live_pairs
                        ),
                    )
                    for b in branches
                ]
        elif isinstance(step, MSGateStep):
            t_g = cfg.timing.gate_time_s
            branches = [
                replace(
                    b,
                    state=_free_evolution(
                        ms_gate(b.state, list(step.pair), step.phi_a, cfg.gate_noise),
                        t_g,
                        cfg,
                        script,
                        live_pairs,
                    ),
                    elapsed_s=b.elapsed_s + t_g,
                )
                for b in branches
            ]
        elif isinstance(step, AnalysisStep):
            branches = [
                replace(
                    b,
                    state=analysis_rotation(b.state, list(step.targets), step.theta, step.phi),
                )
                for b in branches
            ]
        elif isinstance(step, WaitStep):
            branches = [
                replace(
                    b,
                    state=_free_evolution(b.state, step.duration_s, cfg, script, live_pairs),
                    elapsed_s=b.elapsed_s + step.duration_s,
                )
                for b in branches
            ]
        else:  # pragma: no cover
            raise ScriptError(f"unhandled step {step}")
    return branches


def _reinit(state: st.QuantumState, qubit: str, script: ProtocolScript, cfg: ProtocolConfig):
    out = st.reset_subsystem(state, qubit, 0)
    if cfg.crosstalk_depol > 0:
        module = script.module_of(qubit)
        for neighbour in script.modules[module]:
            if neighbour != qubit and neighbour in out.labels:
                out = st.depolarize(out, [neighbour], cfg.crosstalk_depol)
    return out


def _herald_branches(
    branches: list[BranchState], pair: tuple[str, str], cfg: ProtocolConfig
) -> list[BranchState]:
    qa, qb = pair
    emission_a = module_emission(cfg.link_errors, qa, f"_ph_{qa}")
    emission_b = module_emission(cfg.link_errors, qb, f"_ph_{qb}")
    transfer_phase = cfg.ledger.geometric_phase() + cfg.ledger.delta_phi_t
    conditional = conditional_herald_states(
        emission_a, emission_b, cfg.link_errors, transfer_phase
    )
    total = sum(p for _, p, _ in conditional)
    out = []
    for b in branches:
        # The heralded pair replaces whatever the two qubits held before.
        others = [q for q in b.state.labels if q not in pair]
        for event, prob, pair_state in conditional:
            if others:
                rest = st.partial_trace(b.state, others)
                joined = st.tensor(rest, pair_state)
            else:
                joined = pair_state
            out.append(
                BranchState(
                    herald=event,
                    weight=b.weight * prob / total,
                    state=joined,
                    elapsed_s=b.elapsed_s,
                )
            )
    return out


def _analysis_phase(script: ProtocolScript) -> float:
    for step in script.steps:
        if isinstance(step, AnalysisStep):
            return step.phi
    return 0.0


def _bits_of_index(idx: int, n: int) -> tuple[int, ...]:
    return tuple((idx >> (n - 1 - k)) & 1 for k in range(n))


def run_protocol(
    script: ProtocolScript,
    cfg: ProtocolConfig,
    n_trials: int,
    seed: int,
) -> ProtocolResult:
    """Execute ``n_trials`` end-to-end trials of the script.

    Identical (script, cfg, n_trials, seed) produce identical results;
    trials use independent generators so aggregation is insensitive to
    execution order.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    branches = exact_branches(script, cfg)
    n_bits = len(script.qubits)
    branch_probs = np.array([b.weight for b in branches])
    branch_probs = branch_probs / branch_probs.sum()
    branch_diagonals = [b.state.probabilities() if b.state.labels == script.qubits
                        else st.outcome_probabilities(b.state, script.qubits)
                        for b in branches]
    layout = script.detector_layout()
    has_herald = any(isinstance(s, HeraldStep) for s in script.steps)
    analysis_phase = _analysis_phase(script)

    records: list[TrialRecord] = []
    for i in range(n_trials):
        rng = rng_stream(seed, TRIAL_STREAM, i)
        b_idx = int(rng.choice(len(branches), p=branch_probs))
        branch = branches[b_idx]
        if has_herald:
            attempts, wait = sample_waiting(cfg.budget, rng)
            herald = replace(
                branch.herald, attempt_index=attempts, time=wait
            ) if branch.herald is not None else None
        else:
            attempts, wait, herald = 0, 0.0, None
        probs = branch_diagonals[b_idx]
        outcome_idx = int(rng.choice(len(probs), p=probs))
        true_bits = _bits_of_index(outcome_idx, n_bits)
        reported = apply_readout_array(
            np.array([true_bits], dtype=np.int64), cfg.detectors, layout, rng
        )[0]
        records.append(
            TrialRecord(
                herald=herald,
                attempts_used=attempts,
                wall_time_s=wait + branch.elapsed_s,
                outcome_bits=tuple(int(x) for x in reported),
                true_bits=true_bits,
                analysis_phase=analysis_phase,
            )
        )

    populations = _population_estimates([r.outcome_bits for r in records])
    populations_true = _population_estimates([r.true_bits for r in records])
    exact_populations: dict[str, float] = {}
    for w, diag in zip(branch_probs, branch_diagonals):
        for idx, p in enumerate(diag):
            key = "".join(str(x) for x in _bits_of_index(idx, n_bits))
            exact_populations[key] = exact_populations.get(key, 0.0) + float(w * p)

    rate = None
    if has_herald and n_trials >= 100:
        rate = fit_exponential_rate([r.wall_time_s for r in records])
    return ProtocolResult(
        n_trials=n_trials,
        seed=seed,
        populations=populations,
        populations_true=populations_true,
        exact_populations=exact_populations,
        branches=branches,
        records=records,
        analysis_phase=analysis_phase,
        rate_fit=rate,
    )


def parity_scan(
    script_builder: Callable[[float], ProtocolScript],
    phases: Sequence[float],
    cfg: ProtocolConfig,
    shots: int,
    seed: int,
    pair: tuple[str, str],
    condition_qubit: str | None = None,
    stream: int = 2,
) -> tuple[dict[str, ParityCurve], dict[str, CosineFit]]:
    """Parity of ``pair`` versus the analysis phase, sampled and exact.

    For every phase the script is propagated exactly, the reported-
    outcome distribution is sampled ``shots`` times through the detector
    model, and parities are accumulated unconditioned plus (optionally)
    conditioned on each reported value of ``condition_qubit``. Cosine
    fits at the second harmonic are returned for each curve and for the
    two exact variants.
    """
    phases = [float(p) for p in phases]
    first = script_builder(phases[0])
    qubits = first.qubits
    n_bits = len(qubits)
    i1, i2 = qubits.index(pair[0]), qubits.index(pair[1])
    cond_idx = qubits.index(condition_qubit) if condition_qubit is not None else None
    conditions = ["all"]
    if condition_qubit is not None:
        conditions += [f"{condition_qubit}=1", f"{condition_qubit}=0"]

    acc = {
        c: {"values": [], "errors": [], "reported": [], "ideal": []} for c in conditions
    }
    sign = np.array(
        [1.0 if ((idx >> (n_bits - 1 - i1)) & 1) == ((idx >> (n_bits - 1 - i2)) & 1) else -1.0
         for idx in range(2**n_bits)]
    )
    for i, phi in enumerate(phases):
        script = script_builder(phi)
        branches = exact_branches(script, cfg)
        true_diag = np.zeros(2**n_bits)
        for b in branches:
            true_diag += b.weight * st.outcome_probabilities(b.state, qubits)
        true_diag /= true_diag.sum()
        m = confusion_matrix(n_bits, cfg.detectors, script.detector_layout())
        reported = m @ true_diag
        rng = rng_stream(seed, stream, i)
        outcomes = rng.choice(len(reported), size=shots, p=reported / reported.sum())
        for cond in conditions:
            if cond == "all":
                mask_r = np.ones(2**n_bits, dtype=bool)
                sel = outcomes
            else:
                bit = int(cond[-1])
                mask_r = np.array(
                    [((idx >> (n_bits - 1 - cond_idx)) & 1) == bit for idx in range(2**n_bits)]
                )
                sel = outcomes[((outcomes >> (n_bits - 1 - cond_idx)) & 1) == bit]
            rep_c = reported[mask_r]
            true_c = true_diag[mask_r]
            sign_c = sign[mask_r]
            exact_rep = float((rep_c * sign_c).sum() / rep_c.sum()) if rep_c.sum() > 0 else 0.0
            exact_ideal = float((true_c * sign_c).sum() / true_c.sum()) if true_c.sum() > 0 else 0.0
            if sel.size:
                par = float(sign[sel].mean())
                err = math.sqrt(max(1.0 - par * par, 1.0 / sel.size) / sel.size)
            else:
                par, err = 0.0, 1.0
            acc[cond]["values"].append(par)
            acc[cond]["errors"].append(err)
            acc[cond]["reported"].append(exact_rep)
            acc[cond]["ideal"].append(exact_ideal)

    curves: dict[str, ParityCurve] = {}
    fits: dict[str, CosineFit] = {}
    for cond in conditions:
        data = acc[cond]
        curves[cond] = ParityCurve(
            condition=cond,
            phases=tuple(phases),
            values=tuple(data["values"]),
            errors=tuple(data["errors"]),
            exact_reported=tuple(data["reported"]),
            exact_ideal=tuple(data["ideal"]),
        )
        fits[cond] = fit_cosine(phases, data["values"], harmonic=2, sigma=data["errors"])
        fits[f"{cond}_exact_reported"] = fit_cosine(phases, data["reported"], harmonic=2)
        fits[f"{cond}_ideal_readout"] = fit_cosine(phases, data["ideal"], harmonic=2)
    return curves, fits


def _population_estimates(bit_tuples: list[tuple[int, ...]]) -> dict[str, tuple[float, float]]:
    n = len(bit_tuples)
    counts: dict[str, int] = {}
    for bits in bit_tuples:
        key = "".join(str(b) for b in bits)
        counts[key] = counts.get(key, 0) + 1
    out = {}
    for key in sorted(counts):
        p = counts[key] / n
        err = math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
        out[key] = (p, err)
    return out


def fit_rate(records: Sequence[TrialRecord], min_n: int = 100) -> RateFit:
    """Exponential-rate fit to the recorded wall times."""
    return fit_exponential_rate([r.wall_time_s for r in records], min_n=min_n)


def coherent_entanglement_distance(d_q: float, rate: float, tau: float) -> float:
    """Figure of merit: qubit separation times rate times coherence time."""
    for name, value in (("d_q", d_q), ("rate", rate), ("tau", tau)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    return d_q * rate * tau

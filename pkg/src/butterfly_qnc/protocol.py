"""Quantum network coding over the butterfly with two pre-shared |Phi+> pairs.

Photon numbering follows the experiment: pairs (12) and (34) are shared by
the senders (S1 holds 1 and 3, S2 holds 2 and 4); photons 6 and 8 carry the
inputs (state mode) or halves of the source pairs (56), (78) (entanglement
mode).

Protocol round:

1. S1 measures (6, 1) in the Bell basis, applies X^m1 Z^n1 to photon 3;
   S2 measures (8, 4), applies X^m2 Z^n2 to photon 2.
2. Photon 3 goes S1 -> R2 and photon 2 goes S2 -> R1. Both frames go to C1,
   which XORs them; C2 copies the result to R1 and R2.
3. Each receiver applies X^m3 Z^n3.

Photon 2, delivered at R1, carries the stream injected at S1 (stream 1);
photon 3, delivered at R2, carries stream 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import network as net
from .noise import NoiseModel, depolarize
from .quantum import (
    I2,
    X,
    Z,
    DensityMatrix,
    Operator,
    PureState,
    QuantumError,
    SeedLike,
    apply_unitary,
    as_rng,
    fidelity,
    partial_trace,
    projective_measure,
    projector,
    single_qubit_state,
    tensor_all,
)

INPUT_LABELS = ("H", "V", "+", "-", "L", "R")

# photon number -> register qubit
STATE_LAYOUT = {1: 0, 2: 1, 3: 2, 4: 3, 6: 4, 8: 5}
ENTANGLEMENT_LAYOUT = {p: p - 1 for p in range(1, 9)}


class BellKind(str, Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)

_S = 1 / np.sqrt(2.0)
_BELL_AMPS = {
    BellKind.PHI_PLUS: [_S, 0, 0, _S],
    BellKind.PHI_MINUS: [_S, 0, 0, -_S],
    BellKind.PSI_PLUS: [0, _S, _S, 0],
    BellKind.PSI_MINUS: [0, -_S, _S, 0],
}


@dataclass(frozen=True, order=True)
class PauliFrame:
    """Correction bits: the frame (m, n) stands for X^m Z^n."""

    m: int
    n: int

    def __post_init__(self):
        if self.m not in (0, 1) or self.n not in (0, 1):
            raise ValueError(f"frame bits must be 0 or 1, got ({self.m}, {self.n})")

    @property
    def bits(self) -> tuple[int, int]:
        return (self.m, self.n)

    def __xor__(self, other: "PauliFrame") -> "PauliFrame":
        return PauliFrame(self.m ^ other.m, self.n ^ other.n)

    def __str__(self) -> str:
        return f"{self.m}{self.n}"


ALL_FRAMES = tuple(PauliFrame(m, n) for m in (0, 1) for n in (0, 1))

FRAME_OF = {
    BellKind.PHI_PLUS: PauliFrame(0, 0),
    BellKind.PSI_PLUS: PauliFrame(1, 0),
    BellKind.PHI_MINUS: PauliFrame(0, 1),
    BellKind.PSI_MINUS: PauliFrame(1, 1),
}


@dataclass(frozen=True)
class BsmOutcome:
    bell_kind: BellKind
    probability: float
    frame: PauliFrame = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bell_kind", BellKind(self.bell_kind))
        object.__setattr__(self, "frame", FRAME_OF[self.bell_kind])
        if not -1e-12 <= self.probability <= 1 + 1e-12:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


class Mode(str, Enum):
    STATE = "state"
    ENTANGLEMENT = "entanglement"
    BASELINE = "baseline"


@dataclass(frozen=True)
class ProtocolRun:
    """Result of one protocol round.

    ``received_1`` is stream 1 (injected at S1, delivered at R1 on photon 2)
    and ``received_2`` is stream 2 (injected at S2, delivered at R2 on
    photon 3). In entanglement mode these are the two-photon states of
    (5, 2) and (7, 3). ``uncorrected_*`` hold the same subsystems before the
    receivers apply the combined frame. Baseline runs have no BSM, so the
    outcome and frame fields are ``None``.
    """

    mode: Mode
    input_labels: tuple[str, str] | None
    outcome_s1: BsmOutcome | None
    outcome_s2: BsmOutcome | None
    combined_frame: PauliFrame | None
    received_1: DensityMatrix
    received_2: DensityMatrix
    transcript: tuple[net.Event, ...]
    uncorrected_1: DensityMatrix | None = None
    uncorrected_2: DensityMatrix | None = None

    @property
    def outcome_probability(self) -> float:
        """Joint Born probability of the two BSM outcomes."""
        if self.outcome_s1 is None:
            return 1.0
        return self.outcome_s1.probability * self.outcome_s2.probability

    def targets(self) -> tuple[PureState, PureState]:
        if self.mode is Mode.ENTANGLEMENT:
            phi = bell_pair(BellKind.PHI_PLUS)
            return phi, phi
        return single_qubit_state(self.input_labels[0]), single_qubit_state(self.input_labels[1])

    def fidelities(self) -> tuple[float, float]:
        t1, t2 = self.targets()
        return fidelity(self.received_1, t1), fidelity(self.received_2, t2)


def bell_pair(kind: BellKind | str) -> PureState:
    return PureState(_BELL_AMPS[BellKind(kind)])


BELL_PROJECTORS = tuple(projector(bell_pair(k)) for k in BELL_ORDER)


def bsm(state, q_a: int, q_b: int, rng: SeedLike = None, *, forced: BellKind | str | None = None):
    """Bell-basis measurement of qubits ``(q_a, q_b)``.

    With ``forced`` the measurement is post-selected on that Bell state
    (renormalized projection) instead of sampled.

    Returns:
        ``(BsmOutcome, post_state)``.
    """
    if q_a == q_b:
        raise QuantumError("BSM needs two distinct qubits")
    outcome = None if forced is None else BELL_ORDER.index(BellKind(forced))
    index, post, prob = projective_measure(state, BELL_PROJECTORS, rng, targets=[q_a, q_b], outcome=outcome)
    return BsmOutcome(BELL_ORDER[index], prob), post


@lru_cache(maxsize=4)
def correction_unitary(frame: PauliFrame) -> Operator:
    """X^m Z^n with Z applied first."""
    mat = I2.matrix
    if frame.n:
        mat = Z.matrix @ mat
    if frame.m:
        mat = X.matrix @ mat
    return Operator(mat, "unitary")


def combine_frames(f1: PauliFrame, f2: PauliFrame) -> PauliFrame:
    return f1 ^ f2


def _forced_pair(forced_outcomes):
    if forced_outcomes is None:
        return None, None
    a, b = forced_outcomes
    return BellKind(a), BellKind(b)


def _check_label(label: str) -> None:
    if label not in INPUT_LABELS:
        raise ValueError(f"unknown input label {label!r}; expected one of {INPUT_LABELS}")


def _run_butterfly(
    rho: DensityMatrix,
    layout: dict[int, int],
    noise: NoiseModel,
    rng: np.random.Generator,
    forced_outcomes,
    keep_1: Sequence[int],
    keep_2: Sequence[int],
):
    q = layout
    forced_1, forced_2 = _forced_pair(forced_outcomes)
    topo = net.build_butterfly()
    ledger = net.UsageLedger(topo)
    e = topo.edge

    out_1, rho = bsm(rho, q[6], q[1], rng, forced=forced_1)
    rho = apply_unitary(rho, correction_unitary(out_1.frame), [q[3]])
    out_2, rho = bsm(rho, q[8], q[4], rng, forced=forced_2)
    rho = apply_unitary(rho, correction_unitary(out_2.frame), [q[2]])

    ledger.send(net.Message(net.QubitRef(3, stream=2), e("S1", "R2")))
    ledger.send(net.Message(out_1.frame.bits, e("S1", "C1")))
    ledger.send(net.Message(net.QubitRef(2, stream=1), e("S2", "R1")))
    ledger.send(net.Message(out_2.frame.bits, e("S2", "C1")))
    if noise.depolarizing_p:
        rho = depolarize(rho, noise.depolarizing_p, q[3])
        rho = depolarize(rho, noise.depolarizing_p, q[2])

    coded = ledger.xor("C1", out_1.frame.bits, out_2.frame.bits)
    ledger.send(net.Message(coded, e("C1", "C2")))
    to_r1, to_r2 = ledger.copy("C2", coded)
    ledger.send(net.Message(to_r1, e("C2", "R1")))
    ledger.send(net.Message(to_r2, e("C2", "R2")))
    combined = PauliFrame(*coded)

    uncorrected_1 = partial_trace(rho, keep_1)
    uncorrected_2 = partial_trace(rho, keep_2)
    fix = correction_unitary(PauliFrame(*to_r1))
    rho = apply_unitary(rho, fix, [q[2]])
    rho = apply_unitary(rho, correction_unitary(PauliFrame(*to_r2)), [q[3]])

    return dict(
        outcome_s1=out_1,
        outcome_s2=out_2,
        combined_frame=combined,
        received_1=partial_trace(rho, keep_1),
        received_2=partial_trace(rho, keep_2),
        transcript=tuple(ledger.events),
        uncorrected_1=uncorrected_1,
        uncorrected_2=uncorrected_2,
    )


def run_state_mode(
    phi1: str,
    phi2: str,
    noise: NoiseModel | None = None,
    rng_seed: SeedLike = None,
    forced_outcomes: tuple[BellKind | str, BellKind | str] | None = None,
) -> ProtocolRun:
    """Cross-transmit two single-qubit states through the butterfly.

    Simulates the 6-qubit register of photons (1, 2, 3, 4, 6, 8). Photon 6
    holds ``phi1`` and photon 8 holds ``phi2``, as heralded by projecting
    photon 5 (7) of a source pair.

    Args:
        phi1, phi2: labels from ``INPUT_LABELS``.
        noise: defaults to :meth:`NoiseModel.ideal`.
        rng_seed: seed or Generator for the BSM outcomes.
        forced_outcomes: ``(S1 outcome, S2 outcome)`` to post-select on.
    """
    _check_label(phi1)
    _check_label(phi2)
    noise = NoiseModel.ideal() if noise is None else noise
    rng = as_rng(noise.seed if rng_seed is None else rng_seed)
    rho = tensor_all(
        noise.shared_pair(),
        noise.shared_pair(),
        noise.prepared_input(single_qubit_state(phi1)),
        noise.prepared_input(single_qubit_state(phi2)),
    )
    q = STATE_LAYOUT
    parts = _run_butterfly(rho, q, noise, rng, forced_outcomes, [q[2]], [q[3]])
    return ProtocolRun(Mode.STATE, (phi1, phi2), **parts)


def run_entanglement_mode(
    noise: NoiseModel | None = None,
    rng_seed: SeedLike = None,
    forced_outcomes: tuple[BellKind | str, BellKind | str] | None = None,
) -> ProtocolRun:
    """Cross-distribute entanglement: returns the states of photons (5, 2) and (7, 3)."""
    noise = NoiseModel.ideal() if noise is None else noise
    rng = as_rng(noise.seed if rng_seed is None else rng_seed)
    rho = tensor_all(noise.shared_pair(), noise.shared_pair(), noise.source_pair(), noise.source_pair())
    q = ENTANGLEMENT_LAYOUT
    parts = _run_butterfly(rho, q, noise, rng, forced_outcomes, [q[5], q[2]], [q[7], q[3]])
    return ProtocolRun(Mode.ENTANGLEMENT, None, **parts)


_Z_BASIS = (projector(single_qubit_state("H")), projector(single_qubit_state("V")))


def run_baseline_measure_resend(phi1: str, phi2: str, rng_seed: SeedLike = None) -> ProtocolRun:
    """No-prior-entanglement strategy: measure in Z, send the bit, re-prepare.

    Each sender uses its direct link classically, so the transcript is
    audited against ``build_butterfly(direct_kind=CLASSICAL)``.
    """
    _check_label(phi1)
    _check_label(phi2)
    rng = as_rng(rng_seed)
    topo = net.build_butterfly(direct_kind=net.EdgeKind.CLASSICAL)
    ledger = net.UsageLedger(topo)
    received = []
    for label, edge in ((phi1, topo.edge("S1", "R2")), (phi2, topo.edge("S2", "R1"))):
        bit, _, _ = projective_measure(single_qubit_state(label), _Z_BASIS, rng)
        ledger.send(net.Message((bit,), edge))
        received.append(single_qubit_state("HV"[bit]).to_density())
    return ProtocolRun(Mode.BASELINE, (phi1, phi2), None, None, None, received[0], received[1], tuple(ledger.events))


class BsmSetting(str, Enum):
    S0 = "S0"
    S45 = "S45"


_ACCEPTS = {
    BsmSetting.S0: {BellKind.PHI_PLUS, BellKind.PHI_MINUS},
    BsmSetting.S45: {BellKind.PSI_PLUS, BellKind.PSI_MINUS},
}


def linear_optics_filter(outcome: BsmOutcome, setting: BsmSetting | str | None = None, rng_seed: SeedLike = None) -> bool:
    """Whether a two-setting PBS analyser identifies ``outcome``.

    Setting S0 resolves Phi+/Phi-, setting S45 resolves Psi+/Psi-. With
    ``setting=None`` the setting is drawn uniformly from ``rng_seed``.
    """
    if setting is None:
        setting = BsmSetting.S0 if as_rng(rng_seed).random() < 0.5 else BsmSetting.S45
    return outcome.bell_kind in _ACCEPTS[BsmSetting(setting)]

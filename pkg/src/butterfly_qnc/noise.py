"""Imperfect entangled pairs, depolarizing noise and SPDC coincidence-rate estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantum import X, Y, Z, DensityMatrix, PureState, _apply_matrix, _check_targets

_PHI_PLUS = np.array([1, 0, 0, 1]) / np.sqrt(2.0)

# Experimental source and pair parameters.
EXPERIMENT_PAIR_FIDELITY = 0.993
EXPERIMENT_REP_RATE = 80e6
EXPERIMENT_PAIR_PROB = 0.0036
EXPERIMENT_COLLECTION_EFF = 0.28
EXPERIMENT_BSM_SUCCESS = 0.25


def werner_state(v: float) -> DensityMatrix:
    """Isotropic pair v |Phi+><Phi+| + (1 - v) I/4."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {v}")
    return DensityMatrix._trusted(v * np.outer(_PHI_PLUS, _PHI_PLUS) + (1.0 - v) * np.eye(4) / 4.0)


def v_from_fidelity(f: float) -> float:
    """Werner parameter whose overlap with |Phi+> is ``f``."""
    if not 0.25 < f <= 1.0:
        raise ValueError(f"pair fidelity must lie in (0.25, 1], got {f}")
    return (4.0 * f - 1.0) / 3.0


def depolarize(rho: DensityMatrix, p: float, target: int) -> DensityMatrix:
    """Single-qubit depolarizing channel (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {p}")
    (target,) = _check_targets([target], rho.n_qubits)
    if p == 0.0:
        return rho
    out = (1.0 - p) * rho.matrix
    for pauli in (X, Y, Z):
        out = out + (p / 3.0) * _apply_matrix(rho, pauli.matrix, [target])
    return DensityMatrix._trusted(out)


def white_noise(state: PureState, v: float) -> DensityMatrix:
    """Mix a pure state with white noise: v |s><s| + (1 - v) I/d."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    dim = state.amplitudes.size
    pure = np.outer(state.amplitudes, state.amplitudes.conj())
    return DensityMatrix._trusted(v * pure + (1.0 - v) * np.eye(dim) / dim)


@dataclass(frozen=True)
class NoiseModel:
    """Noise configuration of one protocol run.

    Attributes:
        shared_pair_fidelity: overlap of the pre-shared pairs (12), (34) with |Phi+>.
        source_pair_fidelity: overlap of the source pairs (56), (78) with |Phi+>.
        depolarizing_p: depolarizing probability per qubit sent on a quantum edge.
        seed: default seed for runs driven by this model.
    """

    shared_pair_fidelity: float = 1.0
    source_pair_fidelity: float = 1.0
    depolarizing_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("shared_pair_fidelity", "source_pair_fidelity"):
            f = getattr(self, name)
            if not 0.25 < f <= 1.0:
                raise ValueError(f"{name} must lie in (0.25, 1], got {f}")
        if not 0.0 <= self.depolarizing_p <= 1.0:
            raise ValueError(f"depolarizing_p must lie in [0, 1], got {self.depolarizing_p}")

    @classmethod
    def ideal(cls, seed: int = 0) -> "NoiseModel":
        return cls(1.0, 1.0, 0.0, seed)

    @classmethod
    def experimental(cls, seed: int = 0) -> "NoiseModel":
        """Both pair types at the reported 99.3% fidelity, no channel noise."""
        return cls(EXPERIMENT_PAIR_FIDELITY, EXPERIMENT_PAIR_FIDELITY, 0.0, seed)

    @property
    def is_ideal(self) -> bool:
        return self.shared_pair_fidelity == 1.0 and self.source_pair_fidelity == 1.0 and self.depolarizing_p == 0.0

    def shared_pair(self) -> DensityMatrix:
        return werner_state(v_from_fidelity(self.shared_pair_fidelity))

    def source_pair(self) -> DensityMatrix:
        return werner_state(v_from_fidelity(self.source_pair_fidelity))

    def prepared_input(self, state: PureState) -> DensityMatrix:
        """Photon 6 (8) after projecting photon 5 (7) of a source pair onto conj(state).

        For a Werner source pair with parameter v this heralds
        v |state><state| + (1 - v) I/2.
        """
        return white_noise(state, v_from_fidelity(self.source_pair_fidelity))


@dataclass(frozen=True)
class SourceParams:
    """SPDC source and detection parameters.

    Attributes:
        rep_rate: pump repetition rate in Hz.
        pair_prob: probability of one pair per pulse per crystal.
        collection_eff: per-photon collection efficiency.
        bsm_success: joint success probability of the two linear-optics BSMs.
    """

    rep_rate: float = EXPERIMENT_REP_RATE
    pair_prob: float = EXPERIMENT_PAIR_PROB
    collection_eff: float = EXPERIMENT_COLLECTION_EFF
    bsm_success: float = EXPERIMENT_BSM_SUCCESS

    def __post_init__(self):
        for name in ("rep_rate", "pair_prob", "collection_eff", "bsm_success"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("pair_prob", "collection_eff", "bsm_success"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} must not exceed 1")


def estimate_fourfold_rate(sp: SourceParams) -> float:
    """Order-of-magnitude fourfold coincidence rate in counts per second.

    rep_rate * pair_prob**2 * collection_eff**4 * bsm_success. Detector
    asymmetries and filter differences are ignored.
    """
    return sp.rep_rate * sp.pair_prob**2 * sp.collection_eff**4 * sp.bsm_success

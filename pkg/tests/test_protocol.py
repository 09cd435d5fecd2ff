import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from butterfly_qnc.network import audit, build_butterfly, EdgeKind
from butterfly_qnc.noise import NoiseModel
from butterfly_qnc.protocol import (
    ALL_FRAMES,
    BELL_ORDER,
    FRAME_OF,
    INPUT_LABELS,
    BellKind,
    BsmOutcome,
    BsmSetting,
    Mode,
    PauliFrame,
    bell_pair,
    bsm,
    combine_frames,
    correction_unitary,
    linear_optics_filter,
    run_baseline_measure_resend,
    run_entanglement_mode,
    run_state_mode,
)
from butterfly_qnc.quantum import (
    Z,
    DensityMatrix,
    QuantumError,
    apply_unitary,
    fidelity,
    single_qubit_state,
    tensor,
)

S = 1 / np.sqrt(2)
OUTCOME_PAIRS = list(itertools.product(BELL_ORDER, repeat=2))
LABEL_PAIRS = list(itertools.product(INPUT_LABELS, repeat=2))


class TestBellPairs:
    def test_vectors(self):
        np.testing.assert_allclose(bell_pair("PhiPlus").amplitudes, [S, 0, 0, S])
        np.testing.assert_allclose(bell_pair("PsiPlus").amplitudes, [0, S, S, 0])

    def test_phi_minus_is_z_on_phi_plus(self):
        out = apply_unitary(bell_pair(BellKind.PHI_PLUS), Z, [0])
        np.testing.assert_allclose(out.amplitudes, bell_pair(BellKind.PHI_MINUS).amplitudes, atol=1e-12)

    def test_match_oracle(self):
        for kind in BELL_ORDER:
            np.testing.assert_allclose(bell_pair(kind).amplitudes, oracle.BELL[kind.value], atol=1e-15)

    def test_orthonormal(self):
        m = np.array([bell_pair(k).amplitudes for k in BELL_ORDER])
        np.testing.assert_allclose(m @ m.conj().T, np.eye(4), atol=1e-12)


class TestBsm:
    def test_phi_plus_certain(self):
        outcome, _ = bsm(bell_pair("PhiPlus"), 0, 1, 0)
        assert outcome.bell_kind is BellKind.PHI_PLUS
        assert outcome.probability == pytest.approx(1.0)
        assert outcome.frame == PauliFrame(0, 0)

    @pytest.mark.parametrize("label", INPUT_LABELS)
    def test_teleportation_resource_uniform(self, label):
        state = tensor(single_qubit_state(label), bell_pair("PhiPlus"))
        k = oracle.KETS[label]
        full = np.kron(oracle.BELL["PhiPlus"], k)  # qubit 0 = input
        for kind in BELL_ORDER:
            outcome, post = bsm(state, 0, 1, forced=kind)
            proj = oracle.embed_cached(kind.value, (0, 1), 3)
            expected = np.real(full.conj() @ proj @ full)
            assert outcome.probability == pytest.approx(expected, abs=1e-12)
            assert outcome.probability == pytest.approx(0.25, abs=1e-12)
            # the frame undoes the by-product on the third qubit
            fixed = apply_unitary(post, correction_unitary(outcome.frame), [2])
            assert fidelity(fixed.to_density(), tensor(bell_pair(kind), single_qubit_state(label))) == pytest.approx(1.0, abs=1e-12)

    def test_hh(self):
        hh = tensor(single_qubit_state("H"), single_qubit_state("H"))
        probs = {k: bsm(hh, 0, 1, forced=k)[0].probability for k in (BellKind.PHI_PLUS, BellKind.PHI_MINUS)}
        assert probs == {BellKind.PHI_PLUS: pytest.approx(0.5), BellKind.PHI_MINUS: pytest.approx(0.5)}
        for k in (BellKind.PSI_PLUS, BellKind.PSI_MINUS):
            with pytest.raises(QuantumError):
                bsm(hh, 0, 1, forced=k)

    def test_maximally_mixed_marginal(self):
        rho = DensityMatrix.maximally_mixed(3)
        for kind in BELL_ORDER:
            assert bsm(rho, 2, 0, forced=kind)[0].probability == pytest.approx(0.25, abs=1e-9)

    def test_same_qubit(self):
        with pytest.raises(QuantumError):
            bsm(bell_pair("PhiPlus"), 1, 1)

    def test_out_of_range(self):
        with pytest.raises(QuantumError):
            bsm(bell_pair("PhiPlus"), 0, 2)

    def test_outcome_frame_fixed(self):
        for kind, frame in FRAME_OF.items():
            assert BsmOutcome(kind.value, 0.25).frame == frame


class TestFrames:
    @pytest.mark.parametrize("frame, mat", [
        (PauliFrame(0, 0), [[1, 0], [0, 1]]),
        (PauliFrame(1, 1), [[0, -1], [1, 0]]),
        (PauliFrame(0, 1), [[1, 0], [0, -1]]),
        (PauliFrame(1, 0), [[0, 1], [1, 0]]),
    ])
    def test_correction_matrices(self, frame, mat):
        np.testing.assert_allclose(correction_unitary(frame).matrix, mat, atol=1e-15)

    @pytest.mark.parametrize("a, b, out", [((0, 0), (0, 0), (0, 0)), ((1, 0), (0, 1), (1, 1)), ((1, 1), (1, 1), (0, 0))])
    def test_combine_examples(self, a, b, out):
        assert combine_frames(PauliFrame(*a), PauliFrame(*b)) == PauliFrame(*out)

    def test_invalid_bits(self):
        with pytest.raises(ValueError):
            PauliFrame(2, 0)

    def test_str(self):
        assert str(PauliFrame(1, 0)) == "10"

    @pytest.mark.parametrize("f1, f2", list(itertools.product(ALL_FRAMES, repeat=2)))
    def test_composition(self, f1, f2):
        for label in INPUT_LABELS:
            rho = single_qubit_state(label).to_density()
            two = apply_unitary(apply_unitary(rho, correction_unitary(f2), [0]), correction_unitary(combine_frames(f1, f2)), [0])
            one = apply_unitary(rho, correction_unitary(f1), [0])
            np.testing.assert_allclose(two.matrix, one.matrix, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from(ALL_FRAMES), st.sampled_from(ALL_FRAMES))
    def test_composition_random_states(self, seed, f1, f2):
        rho = DensityMatrix(oracle.random_density(2, np.random.default_rng(seed)))
        two = apply_unitary(apply_unitary(rho, correction_unitary(f2), [0]), correction_unitary(f1 ^ f2), [0])
        assert two.allclose(apply_unitary(rho, correction_unitary(f1), [0]), atol=1e-12)


class TestStateMode:
    def test_h_r_sampled(self):
        for seed in range(8):
            run = run_state_mode("H", "R", rng_seed=seed)
            assert run.fidelities() == (pytest.approx(1.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))
            assert run.mode is Mode.STATE

    def test_forced_matches_oracle(self):
        run = run_state_mode("+", "+", forced_outcomes=("PsiMinus", "PsiPlus"))
        r1, r2, p = oracle.state_mode_outcome("+", "+", "PsiMinus", "PsiPlus")
        np.testing.assert_allclose(run.received_1.matrix, r1, atol=1e-12)
        np.testing.assert_allclose(run.received_2.matrix, r2, atol=1e-12)
        assert run.outcome_probability == pytest.approx(p, abs=1e-12)
        assert run.fidelities() == (pytest.approx(1.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))

    @pytest.mark.parametrize("o1, o2", OUTCOME_PAIRS)
    def test_all_forced_outcomes(self, o1, o2):
        run = run_state_mode("H", "V", forced_outcomes=(o1, o2))
        assert run.fidelities() == (pytest.approx(1.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))
        assert run.outcome_probability == pytest.approx(1 / 16, abs=1e-12)
        assert run.combined_frame == FRAME_OF[o1] ^ FRAME_OF[o2]

    def test_outcome_independence_exhaustive(self):
        worst = 1.0
        for (a, b), pair in itertools.product(LABEL_PAIRS, OUTCOME_PAIRS):
            worst = min(worst, *run_state_mode(a, b, forced_outcomes=pair).fidelities())
        assert worst == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("a, b", [("H", "+"), ("L", "-"), ("R", "V")])
    def test_noisy_average_matches_oracle(self, a, b):
        noise = NoiseModel(0.993, 0.993)
        runs = [run_state_mode(a, b, noise, forced_outcomes=p) for p in OUTCOME_PAIRS]
        avg = [sum(r.outcome_probability * r.fidelities()[i] for r in runs) for i in (0, 1)]
        v = 4 / 3 * 0.993 - 1 / 3
        assert avg == pytest.approx(oracle.state_mode_average_fidelity(a, b, v, v), abs=1e-9)
        assert avg == pytest.approx([(1 + v * v) / 2] * 2, abs=1e-9)

    def test_depolarizing_matches_oracle(self):
        noise = NoiseModel(depolarizing_p=0.05)
        runs = [run_state_mode("L", "+", noise, forced_outcomes=p) for p in OUTCOME_PAIRS]
        avg = [sum(r.outcome_probability * r.fidelities()[i] for r in runs) for i in (0, 1)]
        assert avg == pytest.approx(oracle.state_mode_average_fidelity("L", "+", depol_p=0.05), abs=1e-9)

    @pytest.mark.parametrize("label", INPUT_LABELS)
    def test_no_signaling(self, label):
        # photon 2 before the combined frame, averaged over S1's outcome, is maximally mixed
        for o2 in BELL_ORDER:
            avg = np.zeros((2, 2), complex)
            for o1 in BELL_ORDER:
                run = run_state_mode(label, "H", forced_outcomes=(o1, o2))
                avg += run.outcome_s1.probability * run.uncorrected_1.matrix
            np.testing.assert_allclose(avg, np.eye(2) / 2, atol=1e-9)

    def test_seed_reproducible(self):
        a = run_state_mode("+", "R", NoiseModel(0.97, 0.98), rng_seed=11)
        b = run_state_mode("+", "R", NoiseModel(0.97, 0.98), rng_seed=11)
        assert (a.outcome_s1, a.outcome_s2) == (b.outcome_s1, b.outcome_s2)
        assert a.received_1.allclose(b.received_1)

    def test_sampled_outcomes_uniform(self):
        rng = np.random.default_rng(0)
        counts = {k: 0 for k in BELL_ORDER}
        for _ in range(2000):
            counts[run_state_mode("L", "V", rng_seed=rng).outcome_s1.bell_kind] += 1
        for c in counts.values():
            assert abs(c / 2000 - 0.25) < 4 * np.sqrt(0.25 * 0.75 / 2000)

    def test_bad_label(self):
        with pytest.raises(ValueError):
            run_state_mode("D", "H")

    def test_transcript_passes_audit(self):
        run = run_state_mode("-", "L", NoiseModel.experimental(), rng_seed=2)
        assert audit(run.transcript, build_butterfly()) == []
        streams = {ev.payload.stream: ev.edge.name for ev in run.transcript if hasattr(ev.payload, "stream")}
        assert streams == {1: "S2->R1", 2: "S1->R2"}


class TestEntanglementMode:
    @pytest.mark.parametrize("o1, o2", OUTCOME_PAIRS)
    def test_ideal_all_outcomes(self, o1, o2):
        run = run_entanglement_mode(forced_outcomes=(o1, o2))
        assert run.fidelities() == (pytest.approx(1.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))
        assert run.received_1.n_qubits == 2

    def test_werner_shared_pairs_match_oracle(self):
        noise = NoiseModel(shared_pair_fidelity=0.993)
        runs = [run_entanglement_mode(noise, forced_outcomes=p) for p in OUTCOME_PAIRS]
        avg = [sum(r.outcome_probability * r.fidelities()[i] for r in runs) for i in (0, 1)]
        expected = oracle.entanglement_mode_average_fidelity(v_shared=4 / 3 * 0.993 - 1 / 3)
        assert avg == pytest.approx(expected, abs=1e-9)
        assert avg[0] < 1

    def test_sampled(self):
        run = run_entanglement_mode(rng_seed=5)
        assert min(run.fidelities()) == pytest.approx(1.0, abs=1e-9)
        assert audit(run.transcript, build_butterfly()) == []


class TestBaseline:
    def test_basis_states_survive(self):
        for seed in range(5):
            assert run_baseline_measure_resend("H", "V", seed).fidelities() == (pytest.approx(1.0), pytest.approx(1.0))

    def test_plus_l_half(self):
        run = run_baseline_measure_resend("+", "L", 0)
        assert run.fidelities() == (pytest.approx(0.5), pytest.approx(0.5))

    def test_average_two_thirds(self):
        rng = np.random.default_rng(0)
        f = [np.mean(run_baseline_measure_resend(a, b, rng).fidelities()) for a, b in LABEL_PAIRS]
        assert np.mean(f) == pytest.approx(2 / 3, abs=1e-12)

    def test_transcript_classical_only(self):
        run = run_baseline_measure_resend("R", "-", 3)
        assert audit(run.transcript, build_butterfly(EdgeKind.CLASSICAL)) == []
        assert len(run.transcript) == 2
        assert run.outcome_probability == 1.0


class TestLinearOptics:
    @pytest.mark.parametrize("kind, setting, accepted", [
        ("PhiPlus", "S0", True),
        ("PhiMinus", "S0", True),
        ("PsiPlus", "S0", False),
        ("PsiMinus", "S45", True),
        ("PhiPlus", "S45", False),
    ])
    def test_examples(self, kind, setting, accepted):
        assert linear_optics_filter(BsmOutcome(kind, 0.25), BsmSetting(setting)) is accepted

    def test_joint_acceptance_rate(self):
        rng = np.random.default_rng(0)
        n, hits = 100_000, 0
        kinds = rng.integers(0, 4, size=(n, 2))
        for k1, k2 in kinds:
            a = linear_optics_filter(BsmOutcome(BELL_ORDER[k1], 0.25), rng_seed=rng)
            b = linear_optics_filter(BsmOutcome(BELL_ORDER[k2], 0.25), rng_seed=rng)
            hits += a and b
        assert hits / n == pytest.approx(0.25, abs=0.005)

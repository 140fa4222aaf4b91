import numpy as np
import pytest

from gatemem.channels import GateLabel, apply, compose, ideal_channel
from gatemem.exceptions import DimensionError, LabelError, ValidationError
from gatemem.nonmarkov import (
    avg_trace_distance,
    conditional_map,
    cp_violation,
    markovian_choi_reference,
    process_tensor_proxy,
)
from gatemem.qcore import DensityMatrix, trace_distance
from gatemem.simulator import (
    DEFAULT_COUPLING,
    DEFAULT_COUPLING_GRID,
    SEModel,
    SpamSpec,
    build_default_model,
    circuit_distribution,
    cji_circuit,
    extract_channel,
    run_sequence,
    sample_counts,
)
from gatemem.tomography import build_frame, enumerate_circuits

from conftest import random_density

LABELS = [GateLabel(n, (0,)) for n in ("H", "S", "T", "X", "Y", "Z")]
H, S, T, X, Y, Z = LABELS


@pytest.fixture(scope="module")
def persistent_model():
    return build_default_model(LABELS, coupling=DEFAULT_COUPLING, reset_policy="persistent")


@pytest.fixture(scope="module")
def markovian_model():
    return build_default_model(LABELS, coupling=DEFAULT_COUPLING, reset_policy="reset_each_gate")


class TestModelValidation:
    def test_rejects_non_unitary(self):
        with pytest.raises(ValidationError):
            SEModel(
                sys_qubits=1,
                env_dim=2,
                env_initial=np.eye(2) / 2,
                gate_unitaries={X: np.ones((4, 4), dtype=complex)},
                reset_policy="persistent",
            )

    def test_rejects_unknown_policy(self):
        with pytest.raises(ValidationError):
            SEModel(1, 2, np.eye(2) / 2, {}, "sometimes")

    def test_joint_unitaries_are_unitary(self, persistent_model):
        for label, u in persistent_model.gate_unitaries.items():
            np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)

    def test_unknown_gate_raises(self, persistent_model):
        with pytest.raises(LabelError):
            run_sequence(persistent_model, [GateLabel("CX", (0, 1))], DensityMatrix.maximally_mixed(2))


class TestRunSequence:
    def test_product_unitaries_match_ideal_composition(self, rng):
        model = build_default_model(LABELS, coupling=0.0, reset_policy="persistent")
        rho = random_density(2, rng)
        out = run_sequence(model, [X, Z], rho)
        expected = apply(compose(ideal_channel(Z), ideal_channel(X)), rho)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_reset_policy_factorizes(self, markovian_model, rng):
        phi_u = extract_channel(markovian_model, [X])
        phi_v = extract_channel(markovian_model, [Z])
        rho = random_density(2, rng)
        out = run_sequence(markovian_model, [X, Z], rho)
        expected = apply(compose(phi_v, phi_u), rho)
        np.testing.assert_allclose(out.data, expected, atol=1e-10)

    def test_persistent_policy_does_not_factorize(self, persistent_model, rng):
        phi_u = extract_channel(persistent_model, [X])
        phi_v = extract_channel(persistent_model, [Z])
        rho = random_density(2, rng)
        out = run_sequence(persistent_model, [X, Z], rho)
        expected = apply(compose(phi_v, phi_u), rho)
        assert trace_distance(out.data, expected) > 1e-3

    def test_input_dimension_checked(self, persistent_model):
        with pytest.raises(DimensionError):
            run_sequence(persistent_model, [X], DensityMatrix.maximally_mixed(4))


class TestExtractChannel:
    def test_empty_sequence_is_identity(self, persistent_model):
        chan = extract_channel(persistent_model, [])
        np.testing.assert_allclose(chan.superop, np.eye(4), atol=1e-12)

    def test_product_unitary_gives_ideal_channel(self):
        model = build_default_model(LABELS, coupling=0.0, reset_policy="reset_each_gate")
        for label in LABELS:
            np.testing.assert_allclose(
                extract_channel(model, [label]).superop,
                ideal_channel(label).superop,
                atol=1e-12,
            )

    def test_consistent_with_run_sequence(self, persistent_model, rng):
        chan = extract_channel(persistent_model, [X, H, Z])
        for _ in range(20):
            rho = random_density(2, rng)
            direct = run_sequence(persistent_model, [X, H, Z], rho)
            np.testing.assert_allclose(apply(chan, rho), direct.data, atol=1e-10)

    def test_extracted_channels_cptp(self, persistent_model):
        from gatemem.channels import choi_from_superop

        chan = extract_channel(persistent_model, [X, Z])
        choi = choi_from_superop(chan)
        assert choi.is_cp(1e-12)
        assert choi.is_tp(1e-12)


class TestSampleCounts:
    def test_exact_mode_matches_expected_distribution(self, persistent_model):
        frame = build_frame(1)
        descriptors = enumerate_circuits([X], frame)
        for desc in descriptors[:4]:
            record = sample_counts(persistent_model, desc, None)
            assert record.shots is None
            probs = circuit_distribution(persistent_model, desc)
            np.testing.assert_allclose(
                [record.counts["0"], record.counts["1"]], probs, atol=1e-12
            )

    def test_shot_concentration(self, persistent_model):
        frame = build_frame(1)
        desc = enumerate_circuits([X], frame)[0]
        probs = circuit_distribution(persistent_model, desc)
        shots = 100_000
        record = sample_counts(persistent_model, desc, shots, rng=7)
        for key, p in zip(("0", "1"), probs):
            assert abs(record.counts[key] / shots - p) <= 5 / np.sqrt(shots)

    def test_seeded_determinism(self, persistent_model):
        frame = build_frame(1)
        desc = enumerate_circuits([X], frame)[2]
        a = sample_counts(persistent_model, desc, 1024, rng=123)
        b = sample_counts(persistent_model, desc, 1024, rng=123)
        assert a.counts == b.counts
        assert a.seed == b.seed == 123

    def test_exact_mode_with_spam_off_is_bit_identical(self):
        base = build_default_model(LABELS, coupling=0.3, reset_policy="persistent")
        spammed = build_default_model(
            LABELS, coupling=0.3, reset_policy="persistent",
            spam=SpamSpec(prep_strength=0.0, meas_strength=0.0, seed=9),
        )
        frame = build_frame(1)
        for desc in enumerate_circuits([H], frame):
            a = circuit_distribution(base, desc)
            b = circuit_distribution(spammed, desc)
            np.testing.assert_array_equal(a, b)

    def test_spam_kicks_shift_distributions(self):
        spammed = build_default_model(
            LABELS, coupling=0.0, reset_policy="persistent",
            spam=SpamSpec(prep_strength=0.01, meas_strength=0.01, seed=9),
        )
        clean = build_default_model(LABELS, coupling=0.0, reset_policy="persistent")
        frame = build_frame(1)
        diffs = [
            np.max(np.abs(circuit_distribution(spammed, d) - circuit_distribution(clean, d)))
            for d in enumerate_circuits([H], frame)
        ]
        assert max(diffs) > 1e-4


class TestDetectability:
    def test_markovian_regime_passes_all_null_tests(self, markovian_model, rng):
        singles = {l: extract_channel(markovian_model, [l]) for l in LABELS}
        for u, v in [(X, Z), (H, S), (T, Y)]:
            joint = extract_channel(markovian_model, [u, v])
            cm = conditional_map(joint, singles[u])
            assert cp_violation(cm) <= 1e-8
            dist = avg_trace_distance(cm.channel, singles[v], 2_000, rng)
            assert dist.mean <= 1e-8

    def test_detectability_monotone_in_coupling(self):
        means = []
        for g in DEFAULT_COUPLING_GRID:
            model = build_default_model(LABELS, coupling=g, reset_policy="persistent")
            singles = {l: extract_channel(model, [l]) for l in LABELS}
            values = [
                cp_violation(conditional_map(extract_channel(model, [u, v]), singles[u]))
                for u in LABELS
                for v in LABELS
            ]
            means.append(np.mean(values))
        assert all(b >= a - 1e-12 for a, b in zip(means, means[1:]))


class TestCjiCircuit:
    def test_ideal_gates_give_two_entangled_pairs(self):
        model = build_default_model(LABELS, coupling=0.0, reset_policy="persistent")
        state = cji_circuit(model, S, T)
        # wires ordered (kept1, out1, kept2, out2): each pair is the
        # corresponding gate's trace-1 operator representation
        ref = markovian_choi_reference(ideal_channel(S), ideal_channel(T))
        np.testing.assert_allclose(state.data, ref, atol=1e-12)

    def test_markovian_noise_factorizes(self, markovian_model):
        state = cji_circuit(markovian_model, X, Z)
        ref = markovian_choi_reference(
            extract_channel(markovian_model, [X]), extract_channel(markovian_model, [Z])
        )
        assert process_tensor_proxy(state, ref) <= 1e-8

    def test_persistent_memory_scores_above_floor(self, persistent_model, markovian_model):
        measured = cji_circuit(persistent_model, X, Z)
        ref = markovian_choi_reference(
            extract_channel(persistent_model, [X]), extract_channel(persistent_model, [Z])
        )
        value = process_tensor_proxy(measured, ref)
        floor_state = cji_circuit(markovian_model, X, Z)
        floor_ref = markovian_choi_reference(
            extract_channel(markovian_model, [X]), extract_channel(markovian_model, [Z])
        )
        floor = process_tensor_proxy(floor_state, floor_ref)
        assert value > 10 * max(floor, 1e-8)

import numpy as np
import pytest

from gatemem.channels import (
    GateLabel,
    choi_from_superop,
    ideal_channel,
    identity_channel,
    random_channel,
)
from gatemem.exceptions import SolverError
from gatemem.nonmarkov import avg_trace_distance, diamond_distance, diamond_lower_bound
from gatemem.sdp import _project_simplex, diamond_sdp


class TestSimplexProjection:
    def test_already_on_simplex(self):
        w = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(_project_simplex(w), w, atol=1e-12)

    def test_projects_negative_entries(self, rng):
        for _ in range(50):
            w = rng.standard_normal(4)
            p = _project_simplex(w)
            assert p.min() >= 0.0
            assert p.sum() == pytest.approx(1.0, abs=1e-10)
            # optimality: projection is closer than any random simplex point
            q = rng.dirichlet(np.ones(4))
            assert np.linalg.norm(w - p) <= np.linalg.norm(w - q) + 1e-12


class TestDiamondDistance:
    def test_equal_channels_is_zero(self, rng):
        chan = random_channel(2, rng)
        result = diamond_distance(chan, chan)
        assert result.value == pytest.approx(0.0, abs=1e-12)
        assert result.gap <= 1e-6

    def test_identity_vs_bit_flip_is_one(self):
        result = diamond_distance(
            identity_channel(2), ideal_channel(GateLabel("X", (0,)))
        )
        assert result.value == pytest.approx(1.0, abs=1e-6)
        assert result.gap <= 1e-6

    def test_orthogonal_unitaries_without_entanglement(self):
        result = diamond_distance(
            identity_channel(2), ideal_channel(GateLabel("Z", (0,)))
        )
        assert result.value == pytest.approx(1.0, abs=1e-6)

    def test_random_pairs_against_brute_force(self, rng):
        for _ in range(8):
            a, b = random_channel(2, rng), random_channel(2, rng)
            result = diamond_distance(a, b)
            bound = diamond_lower_bound(a, b, n_samples=4_000, rng=rng)
            assert result.gap <= 1e-6
            assert result.value >= bound - 1e-12
            assert result.value - bound <= 1e-3

    def test_certificate_input_achieves_primal_bound(self, rng):
        a, b = random_channel(2, rng), random_channel(2, rng)
        result = diamond_distance(a, b)
        delta = choi_from_superop(a).data - choi_from_superop(b).data
        choi4 = delta.reshape(2, 2, 2, 2)
        out = np.einsum(
            "stuv,saub->tavb", choi4, result.optimal_input.reshape(2, 2, 2, 2)
        ).reshape(4, 4)
        achieved = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (out + out.conj().T))))
        assert achieved == pytest.approx(result.primal_bound, abs=1e-9)

    def test_two_qubit_channels(self, rng):
        a, b = random_channel(4, rng), random_channel(4, rng)
        result = diamond_distance(a, b)
        assert 0.0 <= result.value <= 1.0 + 1e-6
        assert result.gap <= 1e-6

    def test_metric_symmetry(self, rng):
        a, b = random_channel(2, rng), random_channel(2, rng)
        ab = diamond_distance(a, b).value
        ba = diamond_distance(b, a).value
        assert ab == pytest.approx(ba, abs=3e-6)

    def test_triangle_inequality(self, rng):
        for _ in range(5):
            a, b, c = (random_channel(2, rng) for _ in range(3))
            dab = diamond_distance(a, b).value
            dac = diamond_distance(a, c).value
            dcb = diamond_distance(c, b).value
            assert dab <= dac + dcb + 3e-6

    def test_dominates_average_distance(self, rng):
        for _ in range(5):
            a, b = random_channel(2, rng), random_channel(2, rng)
            dd = diamond_distance(a, b).value
            avg = avg_trace_distance(a, b, 20_000, rng)
            assert dd >= avg.mean - 1e-6 - 3 * avg.stderr

    def test_reconstructed_non_tp_channels(self, rng):
        # finite-shot reconstructions are only approximately trace
        # preserving; the marginal correction must keep the certificate
        # valid
        from gatemem.pipeline import records_from_channel, reconstruct_channel
        from gatemem.tomography import build_frame

        frame = build_frame(1)
        truth_a, truth_b = random_channel(2, rng), random_channel(2, rng)
        rec_a = reconstruct_channel(
            records_from_channel(truth_a, 2_000, seed=1, frame=frame), frame
        ).channel
        rec_b = reconstruct_channel(
            records_from_channel(truth_b, 2_000, seed=2, frame=frame), frame
        ).channel
        result = diamond_distance(rec_a, rec_b)
        bound = diamond_lower_bound(rec_a, rec_b, n_samples=4_000, rng=rng)
        assert result.gap <= 1e-6
        assert result.value >= bound - 1e-9
        assert result.value - bound <= 1e-3

    def test_solver_error_reports_gap(self, rng):
        a, b = random_channel(2, rng), random_channel(2, rng)
        delta = choi_from_superop(a).data - choi_from_superop(b).data
        with pytest.raises(SolverError) as excinfo:
            diamond_sdp(delta, gap_tol=1e-15, max_iterations=1, check_every=1)
        assert excinfo.value.gap > 0.0

"""End-to-end reconstruction flows shared by the CLI, the error
analysis, and the test suite: enumerate configurations, sample (or
evaluate exactly), estimate output states, and invert to a channel."""

from __future__ import annotations

import math

import numpy as np

from .channels import QuantumChannel, apply
from .simulator import SEModel, sample_counts
from .tomography import (
    CountRecord,
    TomographyFrame,
    TomographyResult,
    build_frame,
    enumerate_circuits,
    expected_distribution,
    mle_estimate,
    outcome_bitstrings,
    process_tomography,
)


def simulate_records(
    model: SEModel,
    gates,
    shots: int | None,
    seed: int | None = None,
    frame: TomographyFrame | None = None,
) -> list[CountRecord]:
    """Count records for every tomography configuration of one sequence.

    Sampling seeds are spawned per configuration from ``seed`` so runs
    are reproducible and records carry their own seeds.
    """
    frame = frame or build_frame(model.sys_qubits)
    descriptors = enumerate_circuits(gates, frame)
    if shots is None:
        return [sample_counts(model, desc, None) for desc in descriptors]
    seq = np.random.SeedSequence(seed)
    child_seeds = seq.generate_state(len(descriptors), dtype=np.uint64)
    return [
        sample_counts(model, desc, shots, int(child))
        for desc, child in zip(descriptors, child_seeds)
    ]


def records_from_channel(
    channel: QuantumChannel,
    shots: int | None,
    seed: int | None = None,
    frame: TomographyFrame | None = None,
) -> list[CountRecord]:
    """Count records an ideal experiment on ``channel`` would produce.

    Exact mode (``shots=None``) emits the channel's true outcome
    probabilities; otherwise each configuration is sampled
    multinomially with its own spawned seed.
    """
    frame = frame or build_frame(int(math.log2(channel.dim)))
    keys = outcome_bitstrings(frame.n_qubits)
    records = []
    seq = np.random.SeedSequence(seed)
    child_seeds = iter(seq.generate_state(len(frame.prep_labels) * len(frame.meas_labels), dtype=np.uint64))
    for prep in frame.prep_labels:
        out = apply(channel, frame.prep_state(prep))
        for meas in frame.meas_labels:
            probs = np.clip(expected_distribution(out, meas), 0.0, None)
            probs = probs / probs.sum()
            if shots is None:
                counts = {k: float(p) for k, p in zip(keys, probs)}
                records.append(CountRecord(prep, meas, counts, None))
            else:
                child = int(next(child_seeds))
                rng = np.random.default_rng(child)
                draw = rng.multinomial(int(shots), probs)
                counts = {k: int(c) for k, c in zip(keys, draw)}
                records.append(CountRecord(prep, meas, counts, int(shots), seed=child))
    return records


def reconstruct_channel(
    records,
    frame: TomographyFrame | None = None,
    provenance: str = "",
) -> TomographyResult:
    """Full reconstruction chain over a record set: group records by
    preparation, run the likelihood estimator per preparation, then
    invert the frame to a channel."""
    records = list(records)
    n_qubits = records[0].n_qubits
    frame = frame or build_frame(n_qubits)
    states, logliks, iterations = {}, {}, {}
    for prep in frame.prep_labels:
        prep_records = [r for r in records if r.prep_label == prep]
        est = mle_estimate(prep_records, frame)
        states[prep] = est.state
        logliks[prep] = est.loglik
        iterations[prep] = est.iterations
    channel = process_tomography(states, frame, provenance=provenance)
    return TomographyResult(
        states=states, channel=channel, loglik=logliks, iterations=iterations
    )


def reconstruct_from_model(
    model: SEModel,
    gates,
    shots: int | None,
    seed: int | None = None,
    frame: TomographyFrame | None = None,
) -> TomographyResult:
    """Simulate one sequence and reconstruct its channel."""
    frame = frame or build_frame(model.sys_qubits)
    records = simulate_records(model, gates, shots, seed, frame)
    provenance = "+".join(str(g) for g in gates) or "I"
    return reconstruct_channel(records, frame, provenance=provenance)


def reconstruction_noise_samples(
    model: SEModel,
    gates,
    shots: int,
    metric_fn,
    n_pairs: int,
    seed: int | None = None,
    frame: TomographyFrame | None = None,
) -> list[float]:
    """Metric values between independent reconstructions of one channel.

    Each sample reconstructs the same ground truth twice with fresh
    shot noise and evaluates ``metric_fn(channel_a, channel_b)``; the
    resulting distribution is pure statistical fluctuation, the basis of
    the detection floor.
    """
    frame = frame or build_frame(model.sys_qubits)
    seq = np.random.SeedSequence(seed)
    seeds = seq.generate_state(2 * n_pairs, dtype=np.uint64)
    values = []
    for k in range(n_pairs):
        a = reconstruct_from_model(model, gates, shots, int(seeds[2 * k]), frame)
        b = reconstruct_from_model(model, gates, shots, int(seeds[2 * k + 1]), frame)
        values.append(float(metric_fn(a.channel, b.channel)))
    return values

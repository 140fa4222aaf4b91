"""Error propagation: Monte-Carlo statistical uncertainty through the
reconstruction pipeline, and scaling of preparation/measurement
imperfections.

Shot statistics enter as a Gaussian perturbation of each outcome
probability with standard deviation 1/sqrt(N), clamped to [0, 1] and
renormalized by Euclidean projection onto the probability simplex
(projection distorts the perturbation less than rescaling when one
outcome dominates); a direct count-resampling oracle lives in the test
suite to bound the bias of the whole model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import GateLabel
from .exceptions import GatememError, ValidationError
from .pipeline import reconstruct_from_model
from .sdp import _project_simplex
from .simulator import SEModel, SpamSpec, extract_channel
from .tomography import CountRecord, outcome_bitstrings


@dataclass(frozen=True)
class UncertaintyReport:
    """Spread of a pipeline metric under resampled statistics."""

    metric_name: str
    point_estimate: float
    std: float
    trials: int
    shots: int | None
    values: tuple[float, ...]
    failed_trials: int = 0

    def __post_init__(self):
        if self.trials < 2:
            raise ValidationError("uncertainty estimate needs at least two trials")
        if self.std < 0:
            raise ValidationError("standard deviation must be nonnegative")


@dataclass(frozen=True)
class SpamDecomposition:
    """Reconstruction error against preparation/measurement strength.

    ``errors[i]`` is the Frobenius distance between the true channel
    and the one tomography recovers at strength ``strengths[i]``; the
    log-log fit over the nonzero strengths exposes the leading order.
    """

    strengths: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float


def _perturb_record(record: CountRecord, rng: np.random.Generator) -> CountRecord:
    """Gaussian-perturb outcome probabilities at sigma = 1/sqrt(shots)."""
    keys = outcome_bitstrings(record.n_qubits)
    probs = record.frequencies()
    if record.shots is not None:
        sigma = 1.0 / math.sqrt(record.shots)
        probs = np.clip(probs + rng.normal(0.0, sigma, probs.size), 0.0, 1.0)
        probs = _project_simplex(probs)
        total = probs.sum()
        if total <= 0.0:
            raise GatememError("perturbed probabilities vanished")
        probs = probs / total
    counts = {k: float(p) for k, p in zip(keys, probs)}
    return CountRecord(record.prep_label, record.meas_label, counts, None)


def propagate_statistics(
    records,
    pipeline,
    trials: int,
    rng: np.random.Generator,
    metric_name: str = "metric",
) -> UncertaintyReport:
    """Push resampled statistics through an analysis closure.

    ``pipeline`` maps a list of records to a real number.  Each trial
    perturbs every record's outcome probabilities, reruns the closure,
    and contributes one value; trials whose reconstruction fails are
    excluded and counted.  Exact-mode records carry no statistical
    noise, so their reported spread is zero.
    """
    if trials < 2:
        raise ValidationError("need at least two trials")
    records = list(records)
    point = float(pipeline(records))
    shots = records[0].shots if records else None

    if all(r.shots is None for r in records):
        return UncertaintyReport(
            metric_name=metric_name,
            point_estimate=point,
            std=0.0,
            trials=trials,
            shots=None,
            values=(point,) * trials,
        )

    values = []
    failed = 0
    for _ in range(trials):
        try:
            perturbed = [_perturb_record(r, rng) for r in records]
            values.append(float(pipeline(perturbed)))
        except GatememError:
            failed += 1
    if len(values) < 2:
        raise ValidationError(f"only {len(values)} trials survived, cannot report a spread")
    arr = np.asarray(values)
    return UncertaintyReport(
        metric_name=metric_name,
        point_estimate=point,
        std=float(arr.std(ddof=1)),
        trials=trials,
        shots=shots,
        values=tuple(values),
        failed_trials=failed,
    )


def spam_scaling(model: SEModel, gate: GateLabel, strengths) -> SpamDecomposition:
    """Reconstruction error of one gate's channel versus SPAM strength.

    Runs exact-statistics tomography at each strength (preparation and
    measurement set equal) and compares against the model's true
    channel; to first order the error is linear in the strength, so the
    fitted log-log slope should sit near one.
    """
    strengths = sorted(float(s) for s in strengths)
    if 0.0 not in strengths:
        raise ValidationError("strength grid must include 0")
    if strengths[-1] > 0.05:
        raise ValidationError("strengths beyond 0.05 leave the small-kick regime")
    truth = extract_channel(model, [gate])
    errors = []
    for eps in strengths:
        spec = SpamSpec(prep_strength=eps, meas_strength=eps, seed=model.spam.seed)
        noisy = replace(model, spam=spec)
        result = reconstruct_from_model(noisy, [gate], shots=None)
        errors.append(float(np.linalg.norm(result.channel.superop - truth.superop)))

    log_eps = np.log10([s for s in strengths if s > 0])
    log_err = np.log10([e for s, e in zip(strengths, errors) if s > 0])
    slope, intercept = np.polyfit(log_eps, log_err, 1)
    fitted = slope * log_eps + intercept
    ss_res = float(np.sum((log_err - fitted) ** 2))
    ss_tot = float(np.sum((log_err - log_err.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SpamDecomposition(
        strengths=tuple(strengths),
        errors=tuple(errors),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
    )

"""Full reconstruction signal chain: frames, measurement statistics,
maximum-likelihood state estimation, and linear-inversion process
tomography.

Label grammar (version 1): preparations and measurement settings are
per-qubit symbols joined by ``*`` with qubit 0 leftmost.  Preparation
symbols are ``Z+`` (|0>), ``Z-`` (|1>), ``X+`` (|+>), ``Y+`` (|+i>);
measurement symbols are ``X``, ``Y``, ``Z``, realized as a basis-change
rotation followed by a computational-basis measurement.  Outcome keys
are bitstrings with qubit 0 leftmost.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channels import GateLabel, QuantumChannel, vec
from .exceptions import (
    ConvergenceError,
    DimensionError,
    IncompleteDataError,
    LabelError,
    ValidationError,
)
from .qcore import DensityMatrix, _as_matrix

LABEL_GRAMMAR_VERSION = 1

PREP_SYMBOLS = ("Z+", "Z-", "X+", "Y+")
MEAS_SYMBOLS = ("X", "Y", "Z")

_SQ2 = 1.0 / math.sqrt(2.0)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I = np.eye(2, dtype=complex)

#: Unitary taking |0> to the labelled preparation.
PREP_UNITARIES = {
    "Z+": _I,
    "Z-": _X,
    "X+": _H,
    "Y+": _S @ _H,
}

#: Rotation applied before the computational-basis measurement so that
#: the Z outcome reports the labelled Pauli.
MEAS_ROTATIONS = {
    "X": _H,
    "Y": _H @ _S.conj().T,
    "Z": _I,
}

#: Gate realization of each preparation, applied to |0>.
PREP_GATE_NAMES = {
    "Z+": (),
    "Z-": ("X",),
    "X+": ("H",),
    "Y+": ("H", "S"),  # applied left to right: S(H|0>) = |+i>
}

#: Gate realization of each measurement rotation (S applied three times
#: realizes S-dagger).
MEAS_GATE_NAMES = {
    "X": ("H",),
    "Y": ("S", "S", "S", "H"),
    "Z": (),
}


def split_label(label: str) -> tuple[str, ...]:
    return tuple(label.split("*"))


def join_label(symbols) -> str:
    return "*".join(symbols)


def prep_unitary(label: str) -> np.ndarray:
    """Tensor-product unitary preparing the labelled state from |0...0>."""
    mats = []
    for symbol in split_label(label):
        if symbol not in PREP_UNITARIES:
            raise LabelError(f"unknown preparation symbol {symbol!r} in {label!r}")
        mats.append(PREP_UNITARIES[symbol])
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def meas_rotation(label: str) -> np.ndarray:
    """Tensor-product basis-change rotation for the labelled setting."""
    mats = []
    for symbol in split_label(label):
        if symbol not in MEAS_ROTATIONS:
            raise LabelError(f"unknown measurement symbol {symbol!r} in {label!r}")
        mats.append(MEAS_ROTATIONS[symbol])
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def outcome_bitstrings(n_qubits: int) -> list[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=n_qubits)]


@dataclass(frozen=True)
class TomographyFrame:
    """Spanning preparation set, its duals, and the measurement settings.

    ``duals`` satisfy ``tr(D_i+ rho_j) = delta_ij`` against the
    preparations, enabling linear channel reconstruction.
    """

    n_qubits: int
    prep_labels: tuple[str, ...]
    prep_states: tuple[np.ndarray, ...]
    duals: tuple[np.ndarray, ...]
    meas_labels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def prep_state(self, label: str) -> np.ndarray:
        try:
            return self.prep_states[self.prep_labels.index(label)]
        except ValueError:
            raise LabelError(f"unknown preparation label {label!r}") from None


def build_frame(n_qubits: int) -> TomographyFrame:
    """Frame of 4^N preparations and 3^N Pauli measurement settings."""
    if n_qubits not in (1, 2):
        raise DimensionError(f"supported qubit counts are 1 and 2, got {n_qubits}")
    ket0 = np.zeros(2**n_qubits, dtype=complex)
    ket0[0] = 1.0

    prep_labels = []
    prep_states = []
    for symbols in itertools.product(PREP_SYMBOLS, repeat=n_qubits):
        label = join_label(symbols)
        u = prep_unitary(label)
        v = u @ ket0
        prep_labels.append(label)
        prep_states.append(np.outer(v, v.conj()))

    gram = np.array(
        [[np.trace(a.conj().T @ b) for b in prep_states] for a in prep_states]
    )
    cond = np.linalg.cond(gram)
    if cond > 1e6:
        raise ValidationError(f"preparation set is ill-conditioned (kappa={cond:.3g})")
    gram_inv = np.linalg.inv(gram)
    duals = []
    for i in range(len(prep_states)):
        d = sum(gram_inv[k, i] * prep_states[k] for k in range(len(prep_states)))
        duals.append(d)

    meas_labels = [
        join_label(symbols) for symbols in itertools.product(MEAS_SYMBOLS, repeat=n_qubits)
    ]
    return TomographyFrame(
        n_qubits=n_qubits,
        prep_labels=tuple(prep_labels),
        prep_states=tuple(prep_states),
        duals=tuple(duals),
        meas_labels=tuple(meas_labels),
    )


@dataclass(frozen=True)
class CountRecord:
    """One measured configuration: preparation, setting, and outcomes.

    ``shots`` is the repetition count; ``shots=None`` marks exact mode,
    where ``counts`` holds outcome probabilities summing to one instead
    of integers.  ``seed`` records the sampling seed when one was used.
    """

    prep_label: str
    meas_label: str
    counts: dict
    shots: int | None
    seed: int | None = None

    def __post_init__(self):
        n = len(split_label(self.prep_label))
        if len(split_label(self.meas_label)) != n:
            raise ValidationError(
                f"prep {self.prep_label!r} and meas {self.meas_label!r} disagree on qubits"
            )
        for key in self.counts:
            if len(key) != n or set(key) - {"0", "1"}:
                raise ValidationError(f"bad outcome key {key!r} for {n} qubit(s)")
        total = sum(self.counts.values())
        if self.shots is None:
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(f"exact-mode probabilities sum to {total}, not 1")
        else:
            if self.shots <= 0:
                raise ValidationError("shots must be positive")
            if any(v < 0 or int(v) != v for v in self.counts.values()):
                raise ValidationError("counts must be nonnegative integers")
            if total != self.shots:
                raise ValidationError(f"counts sum to {total}, shots say {self.shots}")

    @property
    def n_qubits(self) -> int:
        return len(split_label(self.prep_label))

    def frequencies(self, n_qubits: int | None = None) -> np.ndarray:
        """Outcome frequencies (or exact probabilities) as a dense vector."""
        n = self.n_qubits if n_qubits is None else n_qubits
        freq = np.zeros(2**n)
        for i, key in enumerate(outcome_bitstrings(n)):
            freq[i] = self.counts.get(key, 0)
        if self.shots is not None:
            freq = freq / self.shots
        return freq

    @property
    def weight(self) -> float:
        """Statistical weight of this record (1 in exact mode)."""
        return 1.0 if self.shots is None else float(self.shots)


@dataclass(frozen=True)
class CircuitDescriptor:
    """One tomography configuration: prepare, run the sequence, rotate,
    and measure in the computational basis."""

    prep_label: str
    meas_label: str
    gates: tuple[GateLabel, ...]
    n_qubits: int

    @property
    def prep_gate_names(self) -> tuple[tuple[str, ...], ...]:
        return tuple(PREP_GATE_NAMES[s] for s in split_label(self.prep_label))

    @property
    def meas_gate_names(self) -> tuple[tuple[str, ...], ...]:
        return tuple(MEAS_GATE_NAMES[s] for s in split_label(self.meas_label))


def enumerate_circuits(gate_sequence, frame: TomographyFrame) -> list[CircuitDescriptor]:
    """All 4^N x 3^N configurations for one gate sequence."""
    gates = tuple(gate_sequence)
    for gate in gates:
        if max(gate.qubits) >= frame.n_qubits:
            raise DimensionError(f"gate {gate} does not fit on {frame.n_qubits} qubit(s)")
    return [
        CircuitDescriptor(p, m, gates, frame.n_qubits)
        for p in frame.prep_labels
        for m in frame.meas_labels
    ]


def expected_distribution(state, meas_label: str) -> np.ndarray:
    """Outcome probabilities for the labelled Pauli setting.

    Applies the setting's basis-change rotation and reads the diagonal;
    outcome ordering follows :func:`outcome_bitstrings`.
    """
    rho = _as_matrix(state)
    rot = meas_rotation(meas_label)
    if rho.shape != rot.shape:
        raise DimensionError(f"state dim {rho.shape[0]} does not match {meas_label!r}")
    probs = np.real(np.diag(rot @ rho @ rot.conj().T)).copy()
    probs[np.abs(probs) < 1e-15] = 0.0
    return probs


def _measurement_effects(meas_label: str) -> np.ndarray:
    """Stack of projective effects R+|o><o|R for one setting."""
    rot = meas_rotation(meas_label)
    d = rot.shape[0]
    effects = np.empty((d, d, d), dtype=complex)
    for o in range(d):
        effects[o] = np.outer(rot[o].conj(), rot[o])
    return effects


@dataclass(frozen=True)
class MleEstimate:
    state: DensityMatrix
    loglik: float
    iterations: int


def _group_by_setting(records) -> dict[str, CountRecord]:
    grouped: dict[str, CountRecord] = {}
    for rec in records:
        if rec.meas_label in grouped:
            raise ValidationError(f"duplicate records for setting {rec.meas_label!r}")
        grouped[rec.meas_label] = rec
    return grouped


def mle_estimate(
    records,
    frame: TomographyFrame,
    step_tol: float = 1e-12,
    max_iterations: int = 10_000,
) -> MleEstimate:
    """Diluted fixed-point maximum-likelihood state estimate.

    ``records`` must cover every measurement setting of the frame for a
    single preparation.  The iteration is the multiplicative R-rho-R
    update with the step diluted whenever the log-likelihood would
    decrease, so the likelihood is non-decreasing and the iterate stays
    positive semidefinite throughout.  Convergence is declared when the
    Frobenius step falls below ``step_tol`` (loosened to the statistical
    resolution of the data when counts are finite).  Exact-mode data
    that is consistent with a physical state short-circuits to that
    state, which is the exact optimum.
    """
    grouped = _group_by_setting(records)
    missing = [m for m in frame.meas_labels if m not in grouped]
    if missing:
        raise IncompleteDataError(f"missing measurement settings: {missing}", missing)

    d = frame.dim
    settings = list(frame.meas_labels)
    effects = np.concatenate([_measurement_effects(m) for m in settings])  # (S*d, d, d)
    freqs = np.concatenate([grouped[m].frequencies(frame.n_qubits) for m in settings])
    weights = np.repeat([grouped[m].weight for m in settings], d)
    total_weight = float(sum(grouped[m].weight for m in settings))
    wf = weights * freqs  # per-effect weighted frequency

    # Beyond the shot-noise radius extra iterations buy nothing.
    if any(grouped[m].shots is not None for m in settings):
        step_tol = max(step_tol, 1e-3 / math.sqrt(total_weight))

    active = wf > 0.0
    eff_active = effects[active]
    wf_active = wf[active]

    def probabilities(rho: np.ndarray) -> np.ndarray:
        return np.maximum(np.real(np.einsum("kij,ji->k", eff_active, rho)), 1e-300)

    def loglik(rho: np.ndarray) -> float:
        return float(wf_active @ np.log(probabilities(rho))) / total_weight

    def r_operator(rho: np.ndarray) -> np.ndarray:
        coeff = wf_active / probabilities(rho) / total_weight
        return np.einsum("k,kij->ij", coeff, eff_active)

    # With exact probabilities the unconstrained likelihood maximum is
    # the least-squares state reproducing them; when that state is
    # physical it is the estimate, to machine precision rather than the
    # sqrt(eps) floor of likelihood-monitored iteration.
    if all(grouped[m].shots is None for m in settings):
        design = effects.transpose(0, 2, 1).reshape(effects.shape[0], d * d)
        solution, *_ = np.linalg.lstsq(design, freqs.astype(complex), rcond=None)
        rho_lin = solution.reshape(d, d)
        rho_lin = 0.5 * (rho_lin + rho_lin.conj().T)
        rho_lin = rho_lin / np.trace(rho_lin).real
        residual = float(np.max(np.abs(np.real(np.einsum("kij,ji->k", effects, rho_lin)) - freqs)))
        w, v = np.linalg.eigh(rho_lin)
        if residual < 1e-10 and w[0] >= -1e-11:
            w = np.clip(w, 0.0, None)
            rho_lin = (v * (w / w.sum())) @ v.conj().T
            return MleEstimate(state=DensityMatrix(rho_lin), loglik=loglik(rho_lin), iterations=0)
        # inconsistent or unphysical exact-mode data heads for a boundary
        # optimum, where the fixed point contracts sublinearly; such
        # pseudo-data carries no exactness requirement
        step_tol = max(step_tol, 1e-9)

    ident = np.eye(d, dtype=complex)
    rho = ident / d
    ll = loglik(rho)
    iterations = 0
    # Likelihood gating resolves improvements only down to sqrt(machine
    # epsilon) in state error; once it stalls, the plain fixed-point
    # update keeps contracting for interior optima, so a bounded
    # terminal phase runs ungated on the step criterion alone.
    stalled = False
    polish_left = 1_000
    for iterations in range(1, max_iterations + 1):
        r = r_operator(rho)
        cand = r @ rho @ r
        cand = cand / np.trace(cand).real
        if not stalled:
            ll_cand = loglik(cand)
            if ll_cand < ll:
                eps = 0.5
                while eps > 1e-8:  # dilute toward the identity
                    g = ident + eps * (r - ident)
                    diluted = g @ rho @ g
                    diluted = diluted / np.trace(diluted).real
                    ll_diluted = loglik(diluted)
                    if ll_diluted >= ll:
                        cand, ll_cand = diluted, ll_diluted
                        break
                    eps *= 0.5
                if ll_cand < ll:
                    stalled = True
                    cand = r @ rho @ r
                    cand = cand / np.trace(cand).real
                    ll_cand = ll
            ll = ll_cand
        else:
            polish_left -= 1
        step = float(np.linalg.norm(cand - rho))
        rho = cand
        if step < step_tol or (stalled and polish_left <= 0):
            break
    else:
        raise ConvergenceError(
            f"MLE did not converge in {max_iterations} iterations",
            rho,
            max_iterations,
        )

    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return MleEstimate(state=DensityMatrix(rho), loglik=ll, iterations=iterations)


def mle_state(records, frame: TomographyFrame, **kwargs) -> DensityMatrix:
    """The physical state maximizing the likelihood of ``records``."""
    return mle_estimate(records, frame, **kwargs).state


def process_tomography(
    results, frame: TomographyFrame, provenance: str = ""
) -> QuantumChannel:
    """Linear-inversion channel from per-preparation output states.

    The superoperator is the dual-frame expansion
    ``sum_i vec(rho'_i) vec(D_i)+``; no CP constraint is applied, so a
    physically impossible reconstruction stays visible.
    """
    missing = [p for p in frame.prep_labels if p not in results]
    if missing:
        raise IncompleteDataError(f"missing preparations: {missing}", missing)
    d = frame.dim
    superop = np.zeros((d * d, d * d), dtype=complex)
    for label, dual in zip(frame.prep_labels, frame.duals):
        out = _as_matrix(results[label])
        superop += np.outer(vec(out), vec(dual).conj())
    return QuantumChannel(superop, provenance=provenance)


@dataclass(frozen=True)
class TomographyResult:
    """Reconstructed channel with its per-preparation MLE metadata."""

    states: dict
    channel: QuantumChannel
    loglik: dict
    iterations: dict

"""Ground-truth generator with a controllable quantum memory.

Gates act jointly on the system and a small environment; resetting the
environment between gates yields a memoryless (factorizing) process,
while letting it persist produces genuine history dependence.  The
default model couples each system qubit to one shared environment qubit
through a ZZ interaction of tunable strength and gives the environment
an always-on transverse rotation, so the noise a gate sees depends on
what the previous gates did to the environment.

The sampler emits count records with the same schema as externally
supplied data; analysis code cannot distinguish provenance.
"""

from __future__ import annotations

import math
import types
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    GateLabel,
    QuantumChannel,
    embed_unitary,
    gate_unitary,
    vec,
)
from .exceptions import DimensionError, LabelError, ValidationError
from .qcore import DensityMatrix, _as_matrix, _partial_trace_raw
from .tomography import (
    CircuitDescriptor,
    CountRecord,
    expected_distribution,
    meas_rotation,
    outcome_bitstrings,
    prep_unitary,
)

#: Coupling strengths used for detectability studies; detection strength
#: grows monotonically across this grid.
DEFAULT_COUPLING_GRID = (0.05, 0.1, 0.2, 0.4, 0.55)

#: Default memory coupling for detection demonstrations: strong enough
#: that every gate pair's conditioned map is visibly non-CP, while all
#: single-gate maps stay well-conditioned for inversion.
DEFAULT_COUPLING = 0.55

_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class SpamSpec:
    """Preparation/measurement imperfection strengths.

    Each distinct preparation or measurement label gets one fixed
    random small-angle unitary kick, drawn once from ``seed`` and scaled
    by the corresponding strength; zero strength skips the kick path
    entirely, so it is bit-identical to a noiseless run.
    """

    prep_strength: float = 0.0
    meas_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.prep_strength < 0 or self.meas_strength < 0:
            raise ValidationError("SPAM strengths must be nonnegative")


@dataclass(frozen=True)
class SEModel:
    """System + environment model: per-gate joint unitaries and a reset
    policy.

    ``gate_unitaries`` maps :class:`GateLabel` to a unitary on
    system (x) environment (system factors first).  ``reset_policy`` is
    ``"persistent"`` or ``"reset_each_gate"``.
    """

    sys_qubits: int
    env_dim: int
    env_initial: np.ndarray
    gate_unitaries: dict
    reset_policy: str
    spam: SpamSpec = field(default_factory=SpamSpec)

    def __post_init__(self):
        if self.reset_policy not in ("persistent", "reset_each_gate"):
            raise ValidationError(f"unknown reset policy {self.reset_policy!r}")
        env = np.array(self.env_initial, dtype=complex)
        DensityMatrix(env)  # validates the environment state
        env.setflags(write=False)
        object.__setattr__(self, "env_initial", env)
        d_joint = self.sys_dim * self.env_dim
        unitaries = {}
        for label, u in self.gate_unitaries.items():
            u = np.array(u, dtype=complex)
            if u.shape != (d_joint, d_joint):
                raise DimensionError(f"joint unitary for {label} has shape {u.shape}")
            if np.max(np.abs(u @ u.conj().T - np.eye(d_joint))) > 1e-12:
                raise ValidationError(f"joint operator for {label} is not unitary")
            u.setflags(write=False)
            unitaries[label] = u
        object.__setattr__(self, "gate_unitaries", types.MappingProxyType(unitaries))

    @property
    def sys_dim(self) -> int:
        return 2**self.sys_qubits

    def joint_unitary(self, gate: GateLabel) -> np.ndarray:
        try:
            return self.gate_unitaries[gate]
        except KeyError:
            raise LabelError(f"model has no unitary for gate {gate}") from None


def _env_rotation(omega: float, duration: float) -> np.ndarray:
    angle = omega * duration
    return math.cos(angle) * np.eye(2) - 1j * math.sin(angle) * _X


#: Relative weight of the transverse coupling term; keeps the
#: system-environment interaction from commuting with any system gate,
#: so every gate pair feels the memory.
COUPLING_MIX = 0.5


def _coupling_unitary(sys_qubits: int, strength: float, duration: float) -> np.ndarray:
    """exp(-i g t sum_q (Z_q Z_env + mix * X_q X_env))."""
    dims = (2,) * sys_qubits
    generator = np.zeros((2**sys_qubits * 2,) * 2, dtype=complex)
    for q in range(sys_qubits):
        generator += np.kron(embed_unitary(_Z, (q,), dims), _Z)
        generator += COUPLING_MIX * np.kron(embed_unitary(_X, (q,), dims), _X)
    w, v = np.linalg.eigh(strength * duration * generator)
    return (v * np.exp(-1j * w)) @ v.conj().T


def build_default_model(
    labels,
    coupling: float = DEFAULT_COUPLING,
    reset_policy: str = "persistent",
    sys_qubits: int | None = None,
    env_omega: float = 0.7,
    durations: dict | None = None,
    env_initial: np.ndarray | None = None,
    spam: SpamSpec | None = None,
) -> SEModel:
    """One-environment-qubit model with tunable memory ``coupling``.

    Each gate's joint unitary is (U_gate (x) R_env) exp(-i g C t) with C
    the sum of system-qubit (ZZ + mix XX) couplings to the shared
    environment qubit, t the per-gate duration (default 1, two-qubit
    gates 2), and R_env a transverse environment rotation that keeps the
    memory moving between gates.  At ``coupling=0`` every joint unitary
    is a product, so the model reproduces ideal gates under either reset
    policy.
    """
    labels = [l if isinstance(l, GateLabel) else GateLabel.parse(l) for l in labels]
    n = sys_qubits or max(max(l.qubits) for l in labels) + 1
    durations = dict(durations or {})
    unitaries = {}
    for label in labels:
        t = durations.get(label.name, 2.0 if label.name == "CX" else 1.0)
        u_sys = gate_unitary(label, n)
        joint = np.kron(u_sys, _env_rotation(env_omega, t)) @ _coupling_unitary(n, coupling, t)
        unitaries[label] = joint
    if env_initial is None:
        env_initial = np.full((2, 2), 0.5, dtype=complex)  # |+><+|
    return SEModel(
        sys_qubits=n,
        env_dim=2,
        env_initial=np.asarray(env_initial, dtype=complex),
        gate_unitaries=unitaries,
        reset_policy=reset_policy,
        spam=spam or SpamSpec(),
    )


def _evolve_joint(model: SEModel, gates, joint: np.ndarray) -> np.ndarray:
    dims = (model.sys_dim, model.env_dim)
    for gate in gates:
        u = model.joint_unitary(gate)
        joint = u @ joint @ u.conj().T
        if model.reset_policy == "reset_each_gate":
            reduced = _partial_trace_raw(joint, dims, keep=(0,))
            joint = np.kron(reduced, model.env_initial)
    return joint


def _run_sequence_raw(model: SEModel, gates, system_mat: np.ndarray) -> np.ndarray:
    joint = np.kron(system_mat, model.env_initial)
    joint = _evolve_joint(model, gates, joint)
    return _partial_trace_raw(joint, (model.sys_dim, model.env_dim), keep=(0,))


def run_sequence(model: SEModel, gates, input_state) -> DensityMatrix:
    """Apply a gate sequence to a system state, tracing out the
    environment at the end.  The environment starts fresh at the start
    of the sequence and is re-fed between gates only under the
    ``reset_each_gate`` policy."""
    mat = _as_matrix(input_state)
    if mat.shape != (model.sys_dim, model.sys_dim):
        raise DimensionError(f"input shape {mat.shape} does not fit {model.sys_qubits} qubit(s)")
    return DensityMatrix(_run_sequence_raw(model, gates, mat))


def extract_channel(model: SEModel, gates) -> QuantumChannel:
    """Exact superoperator of the map a gate sequence induces on the
    system, built by propagating the matrix-unit basis."""
    d = model.sys_dim
    superop = np.empty((d * d, d * d), dtype=complex)
    for j in range(d):
        for i in range(d):
            basis = np.zeros((d, d), dtype=complex)
            basis[i, j] = 1.0
            superop[:, j * d + i] = vec(_run_sequence_raw(model, gates, basis))
    provenance = "+".join(str(g) for g in gates) or "I"
    return QuantumChannel(superop, provenance=provenance)


def _spam_kick(spec: SpamSpec, kind: str, label: str, dim: int, strength: float) -> np.ndarray:
    """Fixed small-angle unitary for one preparation/measurement label."""
    entropy = [int(spec.seed), 0 if kind == "prep" else 1] + [ord(c) for c in label]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    herm = 0.5 * (a + a.conj().T)
    herm = herm / np.linalg.norm(herm, 2)
    w, v = np.linalg.eigh(herm)
    return (v * np.exp(-1j * strength * w)) @ v.conj().T


def circuit_distribution(model: SEModel, descriptor: CircuitDescriptor) -> np.ndarray:
    """Exact outcome probabilities of one tomography configuration,
    including any configured preparation/measurement kicks."""
    if descriptor.n_qubits != model.sys_qubits:
        raise DimensionError(
            f"descriptor is for {descriptor.n_qubits} qubit(s), model has {model.sys_qubits}"
        )
    d = model.sys_dim
    prep = prep_unitary(descriptor.prep_label)
    if model.spam.prep_strength > 0:
        kick = _spam_kick(model.spam, "prep", descriptor.prep_label, d, model.spam.prep_strength)
        prep = kick @ prep
    ket0 = np.zeros(d, dtype=complex)
    ket0[0] = 1.0
    psi = prep @ ket0
    rho_in = np.outer(psi, psi.conj())

    rho_out = _run_sequence_raw(model, descriptor.gates, rho_in)

    if model.spam.meas_strength > 0:
        kick = _spam_kick(model.spam, "meas", descriptor.meas_label, d, model.spam.meas_strength)
        rot = meas_rotation(descriptor.meas_label) @ kick
        probs = np.real(np.diag(rot @ rho_out @ rot.conj().T)).copy()
        probs[np.abs(probs) < 1e-15] = 0.0
    else:
        probs = expected_distribution(rho_out, descriptor.meas_label)
    return np.clip(probs, 0.0, None) / np.sum(np.clip(probs, 0.0, None))


def sample_counts(
    model: SEModel,
    descriptor: CircuitDescriptor,
    shots: int | None,
    rng=None,
) -> CountRecord:
    """Multinomial counts (or exact probabilities when ``shots`` is
    None) for one configuration.  Passing an integer ``rng`` seeds a
    dedicated generator and records the seed on the record."""
    probs = circuit_distribution(model, descriptor)
    keys = outcome_bitstrings(descriptor.n_qubits)
    if shots is None:
        counts = {k: float(p) for k, p in zip(keys, probs)}
        return CountRecord(descriptor.prep_label, descriptor.meas_label, counts, None)
    seed = None
    if rng is None:
        rng = np.random.default_rng()
    elif isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    draw = rng.multinomial(int(shots), probs)
    counts = {k: int(c) for k, c in zip(keys, draw)}
    return CountRecord(
        descriptor.prep_label, descriptor.meas_label, counts, int(shots), seed=seed
    )


_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CX2 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def cji_circuit(model: SEModel, u_gate: GateLabel, v_gate: GateLabel) -> DensityMatrix:
    """Four-qubit entangled state encoding a two-step process.

    Two Bell pairs are prepared cleanly (Hadamard then controlled-NOT);
    the noisy gates act in sequence on one physical wire, with an exact
    swap (three controlled-NOTs) moving the first step's output aside in
    between.  Wire order of the result is (kept half 1, step-1 output,
    kept half 2, step-2 output), so for memoryless noise it equals the
    product of the two steps' trace-1 operator representations.
    """
    if model.sys_qubits != 1:
        raise DimensionError("the process-encoding circuit drives a single-qubit model")
    dims = (2, 2, 2, 2, model.env_dim)
    ket = np.zeros(16, dtype=complex)
    ket[0] = 1.0
    state = np.kron(np.outer(ket, ket.conj()), model.env_initial)

    def clean(u, wires):
        nonlocal state
        full = embed_unitary(u, wires, dims)
        state = full @ state @ full.conj().T

    def noisy(gate):
        nonlocal state
        joint = model.joint_unitary(gate)  # acts on (system wire, env)
        full = embed_unitary(joint, (1, 4), dims)
        state = full @ state @ full.conj().T
        if model.reset_policy == "reset_each_gate":
            reduced = _partial_trace_raw(state, dims, keep=(0, 1, 2, 3))
            state = np.kron(reduced, model.env_initial)

    clean(_H2, (0,))
    clean(_CX2, (0, 1))
    noisy(u_gate)
    clean(_H2, (2,))
    clean(_CX2, (2, 3))
    # swap wires 1 and 3 as three controlled-NOTs
    clean(_CX2, (1, 3))
    clean(_CX2, (3, 1))
    clean(_CX2, (1, 3))
    noisy(v_gate)

    reduced = _partial_trace_raw(state, dims, keep=(0, 1, 2, 3))
    # reorder wires (0, 1, 2, 3) -> (0, 3, 2, 1)
    tensor = reduced.reshape((2,) * 8)
    perm = (0, 3, 2, 1)
    tensor = tensor.transpose(perm + tuple(p + 4 for p in perm))
    return DensityMatrix(tensor.reshape(16, 16))

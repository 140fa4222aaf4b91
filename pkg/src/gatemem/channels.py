"""Quantum channels as superoperators, with Choi-matrix structure checks.

Vectorization is column-stacking throughout the package: ``vec`` stacks
matrix columns, so the superoperator of a unitary conjugation
``rho -> U rho U+`` is ``kron(conj(U), U)``.  Choi matrices put the
input factor first and are stored with total trace d ("trace-d"); a
trace-1 rescaling exists for measures defined on normalized operator
representations.

Channels are never forced to be CP or TP: maps reconstructed from data
or obtained by inversion are first-class values, and structure checks
are explicit queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, LabelError, SingularChannelError, ValidationError

_SQ2 = 1.0 / math.sqrt(2.0)

_GATE_MATRICES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # control on the first listed wire, target on the second
    "CX": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

SINGLE_QUBIT_GATES = ("H", "S", "T", "X", "Y", "Z")
GATE_SET = SINGLE_QUBIT_GATES + ("CX",)


@dataclass(frozen=True)
class GateLabel:
    """A named gate together with the wire indices it acts on."""

    name: str
    qubits: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.name not in _GATE_MATRICES:
            raise LabelError(f"unknown gate {self.name!r}; known: {GATE_SET}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if self.name == "CX":
            if len(qubits) != 2 or qubits[0] == qubits[1]:
                raise ValidationError("CX takes exactly two distinct wire indices")
        elif len(qubits) != 1:
            raise ValidationError(f"{self.name} takes exactly one wire index")

    def __str__(self) -> str:
        return f"{self.name}@{'.'.join(str(q) for q in self.qubits)}"

    @classmethod
    def parse(cls, text: str) -> "GateLabel":
        """Parse ``NAME`` or ``NAME@q`` or ``CX@c.t`` (default wires 0 / 0.1).

        The wire separator is ``.`` so that comma-separated gate lists
        stay unambiguous; ``,`` is accepted outside such lists.
        """
        name, _, wires = text.strip().partition("@")
        if wires:
            qubits = tuple(int(q) for q in wires.replace(",", ".").split("."))
        else:
            qubits = (0, 1) if name == "CX" else (0,)
        return cls(name, qubits)


@dataclass(frozen=True)
class QuantumChannel:
    """A linear map on density matrices, held as a d^2 x d^2 superoperator.

    ``provenance`` is a free-form label (typically the gate sequence the
    map represents) carried through compositions and serialization.
    """

    superop: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        superop = np.array(self.superop, dtype=complex)
        if superop.ndim != 2 or superop.shape[0] != superop.shape[1]:
            raise ValidationError(f"superoperator must be square, got {superop.shape}")
        d = math.isqrt(superop.shape[0])
        if d * d != superop.shape[0]:
            raise ValidationError(f"superoperator size {superop.shape[0]} is not a square")
        superop.setflags(write=False)
        object.__setattr__(self, "superop", superop)

    @property
    def dim(self) -> int:
        return math.isqrt(self.superop.shape[0])

    def is_trace_preserving(self, tol: float = 1e-8) -> bool:
        ident = vec(np.eye(self.dim))
        return bool(np.max(np.abs(self.superop.conj().T @ ident - ident)) <= tol)


@dataclass(frozen=True)
class ChoiMatrix:
    """Operator representation of a channel, input factor first.

    ``normalization`` is ``"trace-d"`` (the stored convention for TP
    maps) or ``"trace-1"``.  The matrix must be Hermitian to 1e-8; CP
    and TP are queries, not invariants.
    """

    data: np.ndarray
    normalization: str = "trace-d"

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValidationError(f"Choi matrix must be square, got {data.shape}")
        d = math.isqrt(data.shape[0])
        if d * d != data.shape[0]:
            raise ValidationError(f"Choi size {data.shape[0]} is not a square")
        if self.normalization not in ("trace-d", "trace-1"):
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        if np.max(np.abs(data - data.conj().T)) > 1e-8:
            raise ValidationError("Choi matrix is not Hermitian")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return math.isqrt(self.data.shape[0])

    def rescaled(self, normalization: str) -> "ChoiMatrix":
        if normalization == self.normalization:
            return self
        if normalization == "trace-1":
            return ChoiMatrix(self.data / self.dim, "trace-1")
        if normalization == "trace-d":
            return ChoiMatrix(self.data * self.dim, "trace-d")
        raise ValidationError(f"unknown normalization {normalization!r}")

    def is_cp(self, tol: float = 1e-8) -> bool:
        return bool(np.linalg.eigvalsh(self.data)[0] >= -tol)

    def is_tp(self, tol: float = 1e-8) -> bool:
        d = self.dim
        scale = 1.0 if self.normalization == "trace-d" else float(d)
        marginal = scale * np.einsum(self.data.reshape(d, d, d, d), [0, 2, 1, 2], [0, 1])
        return bool(np.max(np.abs(marginal - np.eye(d))) <= tol)


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(mat, dtype=complex).reshape(-1, order="F")


def unvec(vector: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec` (square target)."""
    vector = np.asarray(vector, dtype=complex).ravel()
    d = math.isqrt(vector.size)
    if d * d != vector.size:
        raise DimensionError(f"vector length {vector.size} is not a square")
    return vector.reshape(d, d, order="F")


def _reshuffle(mat: np.ndarray) -> np.ndarray:
    """Involution exchanging superoperator and Choi orderings."""
    n = mat.shape[0]
    d = math.isqrt(n)
    return mat.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(n, n)


def embed_unitary(u: np.ndarray, wires, dims) -> np.ndarray:
    """Embed a unitary acting on ``wires`` into the full tensor space.

    ``dims`` lists all subsystem dimensions (index 0 leftmost); ``wires``
    gives the subsystems ``u`` acts on, in the order of its own tensor
    factors.
    """
    dims = tuple(int(d) for d in dims)
    wires = tuple(int(w) for w in wires)
    n = len(dims)
    if len(set(wires)) != len(wires) or any(w < 0 or w >= n for w in wires):
        raise DimensionError(f"invalid wires {wires} for {n} subsystems")
    d_act = math.prod(dims[w] for w in wires)
    u = np.asarray(u, dtype=complex)
    if u.shape != (d_act, d_act):
        raise DimensionError(f"unitary shape {u.shape} does not match wires {wires}")
    rest = [i for i in range(n) if i not in wires]
    full = np.kron(u, np.eye(math.prod(dims[r] for r in rest) if rest else 1))
    order = list(wires) + rest  # current factor order of `full`
    cur_dims = [dims[i] for i in order]
    inv = [order.index(i) for i in range(n)]
    tensor = full.reshape(cur_dims + cur_dims)
    tensor = tensor.transpose(inv + [i + n for i in inv])
    total = math.prod(dims)
    return tensor.reshape(total, total)


def gate_unitary(gate: GateLabel, n_qubits: int | None = None) -> np.ndarray:
    """Unitary matrix of a gate embedded on ``n_qubits`` wires."""
    n = max(gate.qubits) + 1 if n_qubits is None else int(n_qubits)
    if max(gate.qubits) >= n:
        raise DimensionError(f"gate {gate} does not fit on {n} qubits")
    return embed_unitary(_GATE_MATRICES[gate.name], gate.qubits, (2,) * n)


def ideal_channel(gate: GateLabel, n_qubits: int | None = None) -> QuantumChannel:
    """Noiseless channel ``rho -> U rho U+`` for a standard gate."""
    u = gate_unitary(gate, n_qubits)
    return QuantumChannel(np.kron(u.conj(), u), provenance=str(gate))


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel(np.eye(dim * dim, dtype=complex), provenance="I")


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """The map "first, then second": superoperator product second @ first."""
    if second.dim != first.dim:
        raise DimensionError(f"dimension mismatch: {second.dim} vs {first.dim}")
    provenance = f"({second.provenance}*{first.provenance})"
    return QuantumChannel(second.superop @ first.superop, provenance=provenance)


def invert(
    chan: QuantumChannel,
    cond_threshold: float = 1e-8,
    pseudo_inverse: bool = False,
) -> QuantumChannel:
    """Matrix inverse of the superoperator.

    Raises :class:`SingularChannelError` when ``sigma_min / sigma_max``
    falls below ``cond_threshold``; passing ``pseudo_inverse=True``
    instead returns the Moore-Penrose pseudo-inverse with that cutoff.
    """
    s = np.linalg.svd(chan.superop, compute_uv=False)
    sigma_max, sigma_min = float(s[0]), float(s[-1])
    provenance = f"inv({chan.provenance})"
    if sigma_max == 0.0 or sigma_min / sigma_max < cond_threshold:
        if pseudo_inverse:
            pinv = np.linalg.pinv(chan.superop, rcond=cond_threshold)
            return QuantumChannel(pinv, provenance=provenance)
        raise SingularChannelError(
            f"superoperator is singular (sigma_min={sigma_min:.3e}, "
            f"sigma_max={sigma_max:.3e})",
            sigma_min,
            sigma_max,
        )
    return QuantumChannel(np.linalg.inv(chan.superop), provenance=provenance)


def condition_number(chan: QuantumChannel) -> float:
    s = np.linalg.svd(chan.superop, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def choi_from_superop(chan: QuantumChannel) -> ChoiMatrix:
    """Choi matrix (input factor first, trace-d normalization)."""
    return ChoiMatrix(_reshuffle(chan.superop), "trace-d")


def superop_from_choi(choi: ChoiMatrix) -> QuantumChannel:
    data = choi.data if choi.normalization == "trace-d" else choi.data * choi.dim
    return QuantumChannel(_reshuffle(data))


def apply(chan: QuantumChannel, rho) -> np.ndarray:
    """Act on a state: ``unvec(superop @ vec(rho))``.

    The result is returned unchecked: outputs of non-CP maps may
    legitimately violate positivity, and that violation is signal.
    """
    from .qcore import _as_matrix

    mat = _as_matrix(rho)
    if mat.shape != (chan.dim, chan.dim):
        raise DimensionError(f"state shape {mat.shape} does not match dim {chan.dim}")
    return unvec(chan.superop @ vec(mat))


def random_channel(
    dim: int, rng: np.random.Generator, kraus_rank: int | None = None
) -> QuantumChannel:
    """Random CPTP channel from a Haar-random Stinespring isometry."""
    k = dim * dim if kraus_rank is None else int(kraus_rank)
    m = rng.standard_normal((dim * k, dim)) + 1j * rng.standard_normal((dim * k, dim))
    q, _ = np.linalg.qr(m)
    kraus = q.reshape(k, dim, dim)
    superop = sum(np.kron(op.conj(), op) for op in kraus)
    return QuantumChannel(superop, provenance=f"random(k={k})")

"""States, Haar sampling, and state-level metrics.

Conventions shared by the whole package:

* matrices are dense ``complex128`` numpy arrays,
* subsystem index 0 is the leftmost tensor factor,
* Hermitian eigendecomposition is the single numerical kernel, and any
  eigenvalue within ``ZERO_TOL`` of zero is treated as zero.

All types are immutable after construction and all operations are pure
functions, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, SupportError, ValidationError

#: Magnitude below which an eigenvalue counts as zero.  Dimensions stay
#: small (d <= 64), so double precision leaves ample headroom.
ZERO_TOL = 1e-10


def _as_matrix(obj) -> np.ndarray:
    """Return the underlying matrix of a state-like object."""
    if isinstance(obj, DensityMatrix):
        return obj.data
    if isinstance(obj, PureState):
        return np.outer(obj.amplitudes, obj.amplitudes.conj())
    return np.asarray(obj, dtype=complex)


@dataclass(frozen=True)
class DensityMatrix:
    """A d x d Hermitian, positive-semidefinite, unit-trace matrix.

    Construction validates all three invariants (each to ``ZERO_TOL``)
    and freezes the underlying array.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValidationError(f"state matrix must be square, got shape {data.shape}")
        if np.max(np.abs(data - data.conj().T)) > ZERO_TOL:
            raise ValidationError("state matrix is not Hermitian")
        if abs(np.trace(data) - 1.0) > ZERO_TOL:
            raise ValidationError(f"state matrix has trace {np.trace(data):.12g}, expected 1")
        if np.linalg.eigvalsh(data)[0] < -ZERO_TOL:
            raise ValidationError("state matrix has a negative eigenvalue")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        """Projector onto the given state vector (normalized internally)."""
        v = np.asarray(amplitudes, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def computational(cls, dim: int, index: int = 0) -> "DensityMatrix":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class PureState:
    """A unit-norm complex state vector (norm checked to 1e-12)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        if amp.size == 0:
            raise ValidationError("state vector is empty")
        if abs(np.linalg.norm(amp) - 1.0) > 1e-12:
            raise ValidationError("state vector is not normalized")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``.

    Equals ``0.5 * sum(|eigenvalues|)`` of the (Hermitian) difference.
    Symmetric, satisfies the triangle inequality, and lies in [0, 1]
    for valid states; matrices that violate positivity (conditional-map
    outputs) are accepted and may yield values above 1.
    """
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def relative_entropy(rho, sigma) -> float:
    """Base-2 relative entropy ``tr[rho (log2 rho - log2 sigma)]``.

    Requires the support of ``rho`` to lie inside the support of
    ``sigma`` (rank tolerance ``ZERO_TOL``); otherwise raises
    :class:`SupportError` carrying the offending kernel weight.
    """
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    lam, u = np.linalg.eigh(0.5 * (a + a.conj().T))
    mu, v = np.linalg.eigh(0.5 * (b + b.conj().T))

    kernel = mu <= ZERO_TOL
    if kernel.any():
        weights = np.real(np.einsum("ij,ik,kj->j", v[:, kernel].conj(), a, v[:, kernel]))
        worst = float(weights.max()) if weights.size else 0.0
        if worst > ZERO_TOL:
            raise SupportError(
                f"first state has weight {worst:.3e} outside the reference support", worst
            )

    lam = np.clip(lam, 0.0, None)
    pos = lam > ZERO_TOL
    entropy_term = float(np.sum(lam[pos] * np.log2(lam[pos])))

    overlap = np.abs(u.conj().T @ v) ** 2  # overlap[i, j] = |<u_i|v_j>|^2
    good = mu > ZERO_TOL
    cross_term = float(lam @ overlap[:, good] @ np.log2(mu[good]))
    return max(entropy_term - cross_term, 0.0)


def haar_random_pure(dim: int, rng: np.random.Generator) -> PureState:
    """Haar-distributed pure state: normalized complex-Gaussian vector."""
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(v / np.linalg.norm(v))


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r)
    return q * (phases / np.abs(phases))


def _partial_trace_raw(mat: np.ndarray, dims, keep) -> np.ndarray:
    """Partial trace of an arbitrary square matrix (no state validation)."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} subsystems")
    total = math.prod(dims)
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (total, total):
        raise DimensionError(f"matrix shape {mat.shape} inconsistent with dims {dims}")
    tensor = mat.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    reduced = np.einsum(tensor, row + col, out)
    d_keep = math.prod(dims[i] for i in keep) if keep else 1
    return reduced.reshape(d_keep, d_keep)


def partial_trace(rho, dims, keep) -> DensityMatrix:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists the subsystem dimensions with index 0 leftmost; their
    product must equal the state dimension.  Keeping every index is the
    identity.
    """
    return DensityMatrix(_partial_trace_raw(_as_matrix(rho), dims, keep))

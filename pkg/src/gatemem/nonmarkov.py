"""Memory tests on reconstructed channels.

Three complementary witnesses of gate-history dependence:

1. complete-positivity violation of the history-conditioned map
   ``compose(joint, invert(first))``,
2. distance between the conditioned map and the unconditioned one, and
3. dependence of the conditioned map on *which* gate preceded it.

Two channel distances back these tests: the worst-case (diamond)
distance via the certified SDP in :mod:`gatemem.sdp`, and the typical-
case distance averaged over Haar-random pure inputs.  A memory-length
scan compares an n-step map against concatenations of its shorter
reconstructions, and a relative-entropy proxy scores the multi-step
process against its memoryless reference.

Stored distance values are never scaled; the display conventions
(1/d for diamond entries, a factor 2 for two-qubit columns) are opt-in
presentation flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import (
    GateLabel,
    QuantumChannel,
    choi_from_superop,
    compose,
    condition_number,
    invert,
)
from .exceptions import DimensionError, IncompleteDataError, SupportError, ValidationError
from .qcore import _as_matrix, relative_entropy
from .sdp import DiamondResult, diamond_sdp

#: Default Monte-Carlo sample count for the averaged trace distance.
DEFAULT_AVG_SAMPLES = 100_000

#: Default upper sequence length of a memory-length scan.
DEFAULT_SCAN_NMAX = 15


@dataclass(frozen=True)
class ConditionalMap:
    """Effective map of a gate given the gate that preceded it.

    ``channel`` may be non-CP; that is the point.  ``cond_number`` is
    the condition number of the inverted first-gate superoperator and
    bounds the reconstruction error of the composition.
    """

    channel: QuantumChannel
    conditioned_on: GateLabel | None = None
    target: GateLabel | None = None
    cond_number: float = float("nan")


@dataclass(frozen=True)
class DistanceMatrix:
    """Labelled matrix of channel distances plus applied display scalings."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    values: np.ndarray
    metric: str
    scaling: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValidationError("distance matrix shape does not match labels")
        if not np.all(np.isfinite(values)) or values.min() < -1e-9:
            raise ValidationError("distance matrix entries must be finite and >= -1e-9")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class MemoryScan:
    """Distances between n-step maps and their (m, n-m) concatenations,
    defined on the strict lower triangle 1 <= m < n <= n_max."""

    n_max: int
    entries: dict

    def __post_init__(self):
        expected = {(n, m) for n in range(2, self.n_max + 1) for m in range(1, n)}
        if set(self.entries) != expected:
            raise ValidationError("memory scan must cover exactly the strict lower triangle")


@dataclass(frozen=True)
class AvgDistanceResult:
    """Monte-Carlo averaged trace distance with its raw sample distances."""

    mean: float
    stderr: float
    samples: np.ndarray

    def __float__(self) -> float:
        return self.mean


def conditional_map(
    phi_vu: QuantumChannel,
    phi_u: QuantumChannel,
    cond_threshold: float = 1e-8,
    pseudo_inverse: bool = False,
    conditioned_on: GateLabel | None = None,
    target: GateLabel | None = None,
) -> ConditionalMap:
    """Divide the joint two-gate map by the first-gate map.

    Returns ``compose(phi_vu, invert(phi_u))``; for memoryless data this
    reproduces the unconditioned second-gate map, and any CP violation
    or dependence on the first gate witnesses memory.
    """
    if phi_vu.dim != phi_u.dim:
        raise DimensionError(f"dimension mismatch: {phi_vu.dim} vs {phi_u.dim}")
    inverse = invert(phi_u, cond_threshold, pseudo_inverse=pseudo_inverse)
    chan = compose(phi_vu, inverse)
    return ConditionalMap(
        channel=chan,
        conditioned_on=conditioned_on,
        target=target,
        cond_number=condition_number(phi_u),
    )


def _channel_of(obj) -> QuantumChannel:
    return obj.channel if isinstance(obj, ConditionalMap) else obj


def cp_violation(cm) -> float:
    """Trace-norm excess of the normalized operator representation.

    Computes ``sum_i |lambda_i| - 1`` over the eigenvalues of the
    trace-1-rescaled Choi matrix: exactly zero for CP maps, positive as
    soon as any eigenvalue dips below zero.
    """
    chan = _channel_of(cm)
    choi = choi_from_superop(chan).rescaled("trace-1").data
    eigs = np.linalg.eigvalsh(choi)
    return max(float(np.sum(np.abs(eigs)) - 1.0), 0.0)


def _haar_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return np.einsum("ni,nj->nij", z, z.conj())


def _batched_trace_distance(a_out: np.ndarray, b_out: np.ndarray) -> np.ndarray:
    diff = a_out - b_out
    diff = 0.5 * (diff + np.conj(diff.transpose(0, 2, 1)))
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=1)


def avg_trace_distance(
    a: QuantumChannel,
    b: QuantumChannel,
    m_samples: int = DEFAULT_AVG_SAMPLES,
    rng: np.random.Generator | None = None,
) -> AvgDistanceResult:
    """Mean output trace distance over Haar-random pure inputs.

    Inputs are pure states of the system dimension (no ancilla), so
    this is the typical-case counterpart of the worst-case diamond
    distance.  The raw per-sample distances are returned for
    distribution plots, along with the Monte-Carlo standard error.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if m_samples < 1:
        raise ValidationError(f"need at least one sample, got {m_samples}")
    rng = np.random.default_rng() if rng is None else rng
    d = a.dim

    samples = np.empty(m_samples)
    batch = 20_000
    for start in range(0, m_samples, batch):
        count = min(batch, m_samples - start)
        rhos = _haar_states(d, count, rng)
        vecs = rhos.transpose(0, 2, 1).reshape(count, d * d)  # batched column-stacking
        out_a = (vecs @ a.superop.T).reshape(count, d, d).transpose(0, 2, 1)
        out_b = (vecs @ b.superop.T).reshape(count, d, d).transpose(0, 2, 1)
        samples[start : start + count] = _batched_trace_distance(out_a, out_b)

    stderr = float(samples.std(ddof=1) / math.sqrt(m_samples)) if m_samples > 1 else 0.0
    return AvgDistanceResult(mean=float(samples.mean()), stderr=stderr, samples=samples)


def diamond_distance(
    a: QuantumChannel,
    b: QuantumChannel,
    gap_tol: float = 1e-6,
    max_iterations: int = 2_000_000,
) -> DiamondResult:
    """Half the diamond norm of the difference, with a solver certificate.

    The difference map must be Hermiticity-preserving (Hermitian
    difference Choi); the result carries the certified primal-dual gap
    and the optimizing joint input.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    delta = choi_from_superop(a).data - choi_from_superop(b).data
    if np.max(np.abs(delta - delta.conj().T)) > 1e-8:
        raise ValidationError("difference map is not Hermiticity-preserving")
    return diamond_sdp(delta, gap_tol=gap_tol, max_iterations=max_iterations)


def diamond_lower_bound(
    a: QuantumChannel,
    b: QuantumChannel,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
    refine_candidates: int = 5,
    refine_iterations: int = 300,
) -> float:
    """Brute-force lower bound on the diamond distance.

    Maximizes the output trace distance over Haar-random pure inputs on
    system (x) ancilla, then locally refines the best candidates by
    alternating between the optimal discriminating projector and the
    top eigenvector of its pullback.  Every reported value is an
    achieved distance, hence a true lower bound.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    rng = np.random.default_rng() if rng is None else rng
    d = a.dim
    delta = choi_from_superop(a).data - choi_from_superop(b).data
    choi4 = delta.reshape(d, d, d, d)  # [in, out, in', out']

    def output(psi_mat: np.ndarray) -> np.ndarray:
        # psi_mat[s, anc]; joint density |psi><psi|
        return np.einsum("stuv,sa,ub->tavb", choi4, psi_mat, psi_mat.conj()).reshape(
            d * d, d * d
        )

    def value(psi_mat: np.ndarray) -> float:
        out = output(psi_mat)
        out = 0.5 * (out + out.conj().T)
        return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(out))))

    # batched random search
    z = rng.standard_normal((n_samples, d * d)) + 1j * rng.standard_normal((n_samples, d * d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    psis = z.reshape(n_samples, d, d)
    outs = np.einsum("stuv,nsa,nub->ntavb", choi4, psis, psis.conj()).reshape(
        n_samples, d * d, d * d
    )
    outs = 0.5 * (outs + np.conj(outs.transpose(0, 2, 1)))
    values = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(outs)), axis=1)

    best = float(values.max())
    order = np.argsort(values)[::-1][:refine_candidates]
    for idx in order:
        psi = psis[idx].copy()
        current = values[idx]
        for _ in range(refine_iterations):
            out = output(psi)
            out = 0.5 * (out + out.conj().T)
            w, v = np.linalg.eigh(out)
            pos = v[:, w > 0]
            proj = pos @ pos.conj().T
            # pull the discriminating projector back through the map
            h = np.einsum(
                "stuv,tavb->saub", choi4.conj(), proj.reshape(d, d, d, d)
            ).reshape(d * d, d * d)
            h = 0.5 * (h + h.conj().T)
            psi_new = np.linalg.eigh(h)[1][:, -1].reshape(d, d)
            new_value = value(psi_new)
            if new_value <= current + 1e-13:
                break
            psi, current = psi_new, new_value
        best = max(best, current)
    return best


def _distance(a, b, metric, m_samples, rng, gap_tol) -> float:
    if metric == "avg":
        return avg_trace_distance(a, b, m_samples, rng).mean
    if metric == "diamond":
        return diamond_distance(a, b, gap_tol=gap_tol).value
    raise ValidationError(f"unknown metric {metric!r}; use 'avg' or 'diamond'")


def _label_is_cx(label) -> bool:
    if isinstance(label, GateLabel):
        return label.name == "CX"
    return str(label).startswith("CX")


def _figure_scale(metric: str, dim: int, target_label) -> tuple[float, tuple[str, ...]]:
    """Display scaling: diamond entries by 1/d, everything doubled when
    the target gate is the two-qubit one."""
    scale, applied = 1.0, []
    if metric == "diamond":
        scale /= dim
        applied.append(f"diamond/{dim}")
    if _label_is_cx(target_label):
        scale *= 2.0
        applied.append("x2-two-qubit-target")
    return scale, tuple(applied)


def gate_dependence_matrix(
    conditionals,
    metric: str = "avg",
    m_samples: int = DEFAULT_AVG_SAMPLES,
    rng: np.random.Generator | None = None,
    gap_tol: float = 1e-6,
    scale_figure: bool = False,
    target_label=None,
) -> DistanceMatrix:
    """Pairwise distances between maps conditioned on different first gates.

    ``conditionals`` maps each first-gate label to its conditioned map,
    all for the same target gate and on one common dimension.  A
    clock-like memory that ignores which gate came first produces the
    zero matrix; structure in the entries is dependence on the past.
    """
    labels = [str(k) for k in conditionals]
    if len(labels) < 2:
        raise ValidationError("need at least two conditioning gates")
    chans = [_channel_of(v) for v in conditionals.values()]
    if len({c.dim for c in chans}) != 1:
        raise DimensionError("conditioned maps must share one dimension")
    n = len(labels)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = _distance(
                chans[i], chans[j], metric, m_samples, rng, gap_tol
            )
    applied: tuple[str, ...] = ()
    if scale_figure:
        scale, applied = _figure_scale(metric, chans[0].dim, target_label)
        values = values * scale
    return DistanceMatrix(tuple(labels), tuple(labels), values, metric, applied)


def conditional_vs_marginal_matrix(
    marginals,
    joints,
    metric: str = "avg",
    m_samples: int = DEFAULT_AVG_SAMPLES,
    rng: np.random.Generator | None = None,
    gap_tol: float = 1e-6,
    scale_figure: bool = False,
    cond_threshold: float = 1e-8,
) -> DistanceMatrix:
    """Distance between each history-conditioned map and its marginal.

    ``marginals`` maps gate labels to single-gate channels; ``joints``
    maps (first, second) label pairs to two-gate channels, all on one
    common dimension.  Rows are the first gate, columns the second.
    Memoryless data gives the zero matrix; non-constant columns are the
    signature of a past-dependent process.
    """
    u_labels = sorted({u for (u, _) in joints}, key=str)
    v_labels = sorted({v for (_, v) in joints}, key=str)
    missing = [
        f"{u},{v}" for u in u_labels for v in v_labels if (u, v) not in joints
    ] + [str(g) for g in set(u_labels) | set(v_labels) if g not in marginals]
    if missing:
        raise IncompleteDataError(f"missing channels: {missing}", missing)
    values = np.zeros((len(u_labels), len(v_labels)))
    applied: set[str] = set()
    for i, u in enumerate(u_labels):
        for j, v in enumerate(v_labels):
            cm = conditional_map(joints[(u, v)], marginals[u], cond_threshold)
            cell = _distance(cm.channel, marginals[v], metric, m_samples, rng, gap_tol)
            if scale_figure:
                scale, tags = _figure_scale(metric, joints[(u, v)].dim, v)
                cell *= scale
                applied.update(tags)
            values[i, j] = cell
    return DistanceMatrix(
        tuple(str(u) for u in u_labels),
        tuple(str(v) for v in v_labels),
        values,
        metric,
        tuple(sorted(applied)),
    )


def memory_scan(
    channels,
    metrics=("avg", "diamond"),
    m_samples: int = DEFAULT_AVG_SAMPLES,
    rng: np.random.Generator | None = None,
    gap_tol: float = 1e-6,
) -> MemoryScan:
    """Compare n-step maps against every (m, n-m) concatenation.

    ``channels[k]`` must hold the reconstructed map of k+1 sequential
    gate applications.  For a divisible (memoryless) family every entry
    vanishes; structure as a function of the cut position m reveals the
    range of the memory.
    """
    chans = list(channels)
    n_max = len(chans)
    if n_max < 2:
        raise ValidationError("memory scan needs channels up to n >= 2")
    if len({c.dim for c in chans}) != 1:
        raise DimensionError("memory scan channels must share one dimension")
    entries: dict = {}
    for n in range(2, n_max + 1):
        for m in range(1, n):
            concat = compose(chans[m - 1], chans[n - m - 1])
            entries[(n, m)] = {
                metric: _distance(chans[n - 1], concat, metric, m_samples, rng, gap_tol)
                for metric in metrics
            }
    return MemoryScan(n_max=n_max, entries=entries)


def statistical_floor(values) -> float:
    """Mean + 3 sigma of a metric evaluated on noise-only reconstructions."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size < 2:
        raise ValidationError("floor estimate needs at least two samples")
    return float(arr.mean() + 3.0 * arr.std(ddof=1))


def markovian_choi_reference(chan_u: QuantumChannel, chan_v: QuantumChannel) -> np.ndarray:
    """Product of the trace-1 operator representations of two maps.

    This is the multi-step state a memoryless process would produce;
    compare it against a measured one with
    :func:`process_tensor_proxy`.
    """
    cu = choi_from_superop(chan_u).rescaled("trace-1").data
    cv = choi_from_superop(chan_v).rescaled("trace-1").data
    ref = np.kron(cu, cv)
    return 0.5 * (ref + ref.conj().T)


def process_tensor_proxy(measured, markovian_reference, regularization: float = 1e-12) -> float:
    """Relative entropy of a measured multi-step state to its memoryless
    reference.

    The reference is blended with ``regularization`` times the
    maximally mixed state, which makes it full rank by construction, so
    the entropy is evaluated against the exact regularized spectrum
    (every eigenvalue is at least ``regularization / d``) instead of the
    generic support-checked path.
    """
    m = _as_matrix(measured)
    r = _as_matrix(markovian_reference)
    if m.shape != r.shape or m.shape[0] != m.shape[1]:
        raise DimensionError(f"incompatible shapes {m.shape} vs {r.shape}")
    if regularization <= 0.0:
        try:
            return relative_entropy(m, r)
        except SupportError as err:
            raise SupportError(
                f"support violation with no regularization applied: {err}", err.weight
            ) from err
    d = m.shape[0]
    r = (1.0 - regularization) * 0.5 * (r + r.conj().T) + regularization * np.eye(d) / d

    lam, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    lam = np.clip(lam, 0.0, None)
    mu, v = np.linalg.eigh(r)
    mu = np.maximum(mu, 0.5 * regularization / d)  # guards roundoff only
    pos = lam > 1e-12
    entropy_term = float(np.sum(lam[pos] * np.log2(lam[pos])))
    overlap = np.abs(u.conj().T @ v) ** 2
    cross_term = float(lam @ overlap @ np.log2(mu))
    return max(entropy_term - cross_term, 0.0)

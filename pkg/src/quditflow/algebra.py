"""Dense linear algebra for small qudit registers.

Index convention used everywhere in this package: qudit 0 is the most
significant digit, so a basis state |s_0 s_1 ... s_{n-1}> has flat index
s = s_0 * d**(n-1) + ... + s_{n-1}.  This matches the ordering produced by
np.kron(op_0, op_1, ...).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

# Capacity cap: dense density matrices up to this Hilbert dimension.
MAX_DIM = 4096

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
EIGENVALUE_TOL = 1e-9
UNITARITY_TOL = 1e-10
CPTP_TOL = 1e-9
DISTRIBUTION_TOL = 1e-9


class InvariantViolation(ValueError):
    """A numerical object failed one of its defining invariants."""


class CapacityError(ValueError):
    """Requested Hilbert-space dimension exceeds the configured cap."""


def check_capacity(dim: int) -> None:
    if dim > MAX_DIM:
        raise CapacityError(f"Hilbert dimension {dim} exceeds the cap of {MAX_DIM}")


def _square_complex(data, what: str) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvariantViolation(f"{what} must be a square matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DensityMatrix:
    """Trace-one positive-semidefinite Hermitian matrix.

    Validation happens at construction: Hermiticity and unit trace to 1e-10,
    eigenvalues above -1e-9.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _square_complex(self.data, "density matrix")
        check_capacity(arr.shape[0])
        herm = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
        if herm > HERMITICITY_TOL:
            raise InvariantViolation(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = np.trace(arr)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace {tr} is not 1")
        evals = np.linalg.eigvalsh((arr + arr.conj().T) / 2.0)
        if evals.min() < -EIGENVALUE_TOL:
            raise InvariantViolation(f"density matrix has eigenvalue {evals.min():.3e} < -{EIGENVALUE_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def basis_state(cls, dim: int, index: int = 0) -> "DensityMatrix":
        if not 0 <= index < dim:
            raise ValueError(f"basis index {index} out of range for dimension {dim}")
        m = np.zeros((dim, dim), dtype=complex)
        m[index, index] = 1.0
        return cls(m)

    @classmethod
    def from_statevector(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-9:
            raise InvariantViolation(f"state vector norm {norm} is not 1")
        return cls(np.outer(v, v.conj()))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))


@dataclass(frozen=True)
class UnitaryMatrix:
    data: np.ndarray

    def __post_init__(self):
        arr = _square_complex(self.data, "unitary")
        check_capacity(arr.shape[0])
        dev = np.max(np.abs(arr.conj().T @ arr - np.eye(arr.shape[0])))
        if dev > UNITARITY_TOL:
            raise InvariantViolation(f"matrix is not unitary (U^H U deviates by {dev:.3e})")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.data.conj().T)


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, (DensityMatrix, UnitaryMatrix)):
        return obj.data
    return np.asarray(obj, dtype=complex)


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive trace-preserving map stored as a Kraus list.

    The Kraus operators are stacked into one (k, dim, dim) array so a channel
    application costs two batched matrix products regardless of k.
    """

    kraus: tuple
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise InvariantViolation("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        for k in ops:
            if k.ndim != 2 or k.shape != (dim, dim):
                raise InvariantViolation(f"Kraus operators must share square shape, got {k.shape}")
        check_capacity(dim)
        stack = np.stack(ops)
        # trace preservation: sum_k K^H K = I
        tp = np.einsum("kij,kil->jl", stack.conj(), stack)
        dev = np.max(np.abs(tp - np.eye(dim)))
        if dev > CPTP_TOL:
            raise InvariantViolation(f"channel is not trace preserving (deviation {dev:.3e})")
        stack.setflags(write=False)
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "_stack", stack)

    @property
    def dim(self) -> int:
        return self._stack.shape[1]

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        """sum_k K rho K^H on a raw ndarray."""
        kr = self._stack @ rho          # (k, dim, dim)
        return np.einsum("kij,klj->il", kr, self._stack.conj())

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return DensityMatrix(self.apply_matrix(rho.data))

    def choi(self) -> np.ndarray:
        """Choi matrix sum_k vec(K) vec(K)^H with column-major vec."""
        vecs = self._stack.transpose(0, 2, 1).reshape(self._stack.shape[0], -1)
        return vecs.T @ vecs.conj()  # vec convention: columns stacked

    def is_cp(self, tol: float = CPTP_TOL) -> bool:
        evals = np.linalg.eigvalsh(self.choi())
        return bool(evals.min() >= -tol)

    def reduced(self, tol: float = 1e-12) -> "QuantumChannel":
        """Minimal Kraus representation recovered from the Choi matrix."""
        dim = self.dim
        evals, evecs = np.linalg.eigh(self.choi())
        ops = []
        for lam, v in zip(evals, evecs.T):
            if lam > tol:
                ops.append(np.sqrt(lam) * v.reshape(dim, dim, order="F"))
        return QuantumChannel(tuple(ops))

    @classmethod
    def identity(cls, dim: int) -> "QuantumChannel":
        return cls((np.eye(dim, dtype=complex),))

    @classmethod
    def from_unitary(cls, u) -> "QuantumChannel":
        return cls((_as_matrix(u),))


def chain_channels(*channels: QuantumChannel) -> QuantumChannel:
    """Compose channels in application order: the first argument acts first."""
    if not channels:
        raise ValueError("chain_channels needs at least one channel")
    dim = channels[0].dim
    for ch in channels:
        if ch.dim != dim:
            raise InvariantViolation(f"cannot chain channels of dimensions {dim} and {ch.dim}")
    ops: Sequence[np.ndarray] = channels[0].kraus
    for ch in channels[1:]:
        ops = tuple(b @ a for b in ch.kraus for a in ops)
    return QuantumChannel(tuple(ops))


def channel_tensor_identity(ch: QuantumChannel, extra_dim: int) -> QuantumChannel:
    """Extend a channel by an identity factor appended as the least significant subsystem."""
    if extra_dim == 1:
        return ch
    eye = np.eye(extra_dim, dtype=complex)
    return QuantumChannel(tuple(np.kron(k, eye) for k in ch.kraus))


def kron(*operators) -> np.ndarray:
    """Tensor product with the package-wide most-significant-first ordering."""
    mats = [_as_matrix(op) for op in operators]
    dim = int(np.prod([m.shape[0] for m in mats]))
    check_capacity(dim)
    return reduce(np.kron, mats)


def embed_operator(op: np.ndarray, qudits: Sequence[int], n: int, d: int) -> np.ndarray:
    """Embed an operator acting on the given qudits (in tensor-factor order)
    into the full n-qudit register."""
    qudits = tuple(qudits)
    m = len(qudits)
    if len(set(qudits)) != m:
        raise ValueError(f"duplicate qudit indices in {qudits}")
    if any(not 0 <= q < n for q in qudits):
        raise ValueError(f"qudit indices {qudits} out of range for n={n}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (d**m, d**m):
        raise ValueError(f"operator shape {op.shape} does not match {m} qudits of dimension {d}")
    check_capacity(d**n)
    if m == n and qudits == tuple(range(n)):
        return op
    full = np.kron(op, np.eye(d ** (n - m), dtype=complex))
    order = list(qudits) + [i for i in range(n) if i not in qudits]
    perm = np.argsort(order)
    tensor = full.reshape((d,) * (2 * n))
    tensor = tensor.transpose(tuple(perm) + tuple(n + p for p in perm))
    return np.ascontiguousarray(tensor.reshape(d**n, d**n))


def embed_channel(ch: QuantumChannel, qudits: Sequence[int], n: int, d: int) -> QuantumChannel:
    if ch.dim == d**n and tuple(qudits) == tuple(range(n)):
        return ch
    return QuantumChannel(tuple(embed_operator(k, qudits, n, d) for k in ch.kraus))


def apply_channel(ch: QuantumChannel, rho: DensityMatrix) -> DensityMatrix:
    if ch.dim != rho.dim:
        raise InvariantViolation(f"channel dimension {ch.dim} does not match state dimension {rho.dim}")
    return ch.apply(rho)


def expectation(observable, rho: DensityMatrix | np.ndarray) -> complex:
    """Tr(O rho).  Complex in general; real up to 1e-10 for Hermitian O."""
    obs = _as_matrix(observable)
    mat = _as_matrix(rho)
    if obs.shape != mat.shape:
        raise InvariantViolation(f"observable shape {obs.shape} does not match state shape {mat.shape}")
    return complex(np.trace(obs @ mat))


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability vector over the d**n computational outcomes.

    Readout-error inversion can produce small negative entries; such vectors
    are kept as-is with quasi=True and must be clipped before sampling.
    """

    n: int
    d: int
    probs: np.ndarray
    quasi: bool = False

    def __post_init__(self):
        vec = np.array(self.probs, dtype=float).reshape(-1)
        if vec.size != self.d**self.n:
            raise InvariantViolation(
                f"distribution length {vec.size} does not match d**n = {self.d**self.n}")
        total = vec.sum()
        if abs(total - 1.0) > DISTRIBUTION_TOL:
            raise InvariantViolation(f"distribution sums to {total}, expected 1")
        if not self.quasi:
            if vec.min() < -DISTRIBUTION_TOL:
                raise InvariantViolation(
                    f"negative probability {vec.min():.3e}; flag as quasi or clip")
            vec = np.clip(vec, 0.0, None)
            vec = vec / vec.sum()
        vec.setflags(write=False)
        object.__setattr__(self, "probs", vec)

    @property
    def size(self) -> int:
        return self.d**self.n

    def outcome_digits(self, index: int) -> tuple:
        digits = []
        for _ in range(self.n):
            digits.append(index % self.d)
            index //= self.d
        return tuple(reversed(digits))

    def clipped(self) -> tuple["OutcomeDistribution", float]:
        """Clip negatives and renormalize; returns the clipped mass removed."""
        vec = np.clip(self.probs, 0.0, None)
        removed = float(self.probs.sum() - vec.sum())
        vec = vec / vec.sum()
        return OutcomeDistribution(self.n, self.d, vec, quasi=False), abs(removed)


def sample_counts(dist: OutcomeDistribution, shots: int, seed=None) -> np.ndarray:
    """Multinomial counts for the outcome distribution.  Quasi inputs are refused."""
    if dist.quasi:
        raise InvariantViolation("cannot sample from a quasi-distribution; clip it first")
    if shots <= 0:
        raise ValueError("shots must be positive for sampling")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.multinomial(shots, dist.probs)


def variation_distance(p: OutcomeDistribution | np.ndarray, q: OutcomeDistribution | np.ndarray) -> float:
    """Total variation distance (1/2) sum |p - q|; quasi inputs enter as-is."""
    pv = p.probs if isinstance(p, OutcomeDistribution) else np.asarray(p, dtype=float)
    qv = q.probs if isinstance(q, OutcomeDistribution) else np.asarray(q, dtype=float)
    if pv.shape != qv.shape:
        raise InvariantViolation("distributions have mismatched lengths")
    return float(0.5 * np.abs(pv - qv).sum())

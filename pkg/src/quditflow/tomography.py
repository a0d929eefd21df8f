"""State reconstruction from Weyl-basis measurements, state metrics, and
channel transfer-matrix analysis (process fidelity, decoherence split).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import utils
from .algebra import (
    CapacityError,
    DensityMatrix,
    InvariantViolation,
    OutcomeDistribution,
    QuantumChannel,
)
from .circuit import Circuit, EigenbasisRotationGate, append_easy_gates, measure_distribution
from .weyl import WeylLabel, all_labels, weyl_commutator_phase, _weyl_ndarray

MAX_TOMO_SETTINGS = 6561


# ---------------------------------------------------------------------------
# measurement settings and the linear-inversion estimator


def tomo_settings(n: int, d: int) -> list:
    """Every n-qudit Weyl label, one measurement setting each (d**2n total)."""
    count = d ** (2 * n)
    if count > MAX_TOMO_SETTINGS:
        raise CapacityError(
            f"{count} tomography settings exceed the supported maximum {MAX_TOMO_SETTINGS}")
    return list(all_labels(d, n))


def setting_circuit(circuit: Circuit, setting: WeylLabel) -> Circuit:
    """Append the per-qudit eigenbasis rotations that diagonalize the setting's
    Weyl operator, merged into the trailing Easy cycle."""
    if (setting.d, setting.n) != (circuit.d, circuit.n):
        raise ValueError("setting label does not match the circuit register")
    gates = []
    for i in range(circuit.n):
        p, q = setting.site(i)
        if p == 0 and q == 0:
            continue
        gates.append((i, EigenbasisRotationGate(WeylLabel.single(circuit.d, p, q))))
    out = append_easy_gates(circuit, gates)
    return out.with_metadata(tomo_setting=setting.index)


def _digit_table(n: int, d: int) -> np.ndarray:
    # digits[s, i] = base-d digit of outcome s at qudit i (qudit 0 most significant)
    idx = np.unravel_index(np.arange(d**n), (d,) * n)
    return np.stack(idx, axis=1)


def expectation_from_distribution(setting: WeylLabel, dist: OutcomeDistribution) -> complex:
    """<W_setting> from the outcome distribution of its setting circuit.

    Outcome digit k on an active qudit contributes the eigenvalue omega^k.
    """
    if (setting.d, setting.n) != (dist.d, dist.n):
        raise ValueError("setting label does not match the distribution register")
    d, n = setting.d, setting.n
    digits = _digit_table(n, d)
    active = np.array([1 if any(setting.site(i)) else 0 for i in range(n)])
    exponents = (digits @ active) % d
    omega = np.exp(2j * np.pi / d)
    return complex(np.sum(dist.probs * omega**exponents))


def reconstruct_state(n: int, d: int, expectations: Mapping[WeylLabel, complex]) -> np.ndarray:
    """Linear-inversion reconstruction rho = (1/d**n) sum_a <W_a> W_a^H.

    Returns the raw (possibly non-physical) matrix; use project_state to get a
    valid density matrix.
    """
    dim = d**n
    rho = np.zeros((dim, dim), dtype=complex)
    for label in all_labels(d, n):
        value = expectations.get(label)
        if value is None:
            raise ValueError(f"missing expectation for label index {label.index}")
        rho += complex(value) * _weyl_ndarray(label).conj().T
    return rho / dim


@dataclass(frozen=True)
class ReconstructionResult:
    raw: np.ndarray
    state: DensityMatrix


def reconstruct(expectations: Mapping[WeylLabel, complex], n: int, d: int) -> ReconstructionResult:
    """Linear inversion plus projection; returns both the raw matrix and the
    projected density matrix."""
    identity = WeylLabel.identity(d, n)
    e_id = expectations.get(identity)
    if e_id is None:
        raise ValueError("missing identity expectation")
    if abs(complex(e_id) - 1.0) > 1e-6:
        raise InvariantViolation(
            f"identity expectation must be 1 (distribution normalization), got {e_id}")
    raw = reconstruct_state(n, d, expectations)
    return ReconstructionResult(raw, project_state(raw))


def project_state(raw: np.ndarray) -> DensityMatrix:
    """Nearest density matrix in Frobenius norm: hermitize, then project the
    spectrum onto the probability simplex (eigenvalue clipping with a
    water-filling shift)."""
    h = 0.5 * (raw + raw.conj().T)
    vals, vecs = np.linalg.eigh(h)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    dim = len(vals)
    cumulative = np.cumsum(vals)
    k = 0
    for i in range(dim):
        if vals[i] + (1.0 - cumulative[i]) / (i + 1) > 0.0:
            k = i
    shift = (1.0 - cumulative[k]) / (k + 1)
    clipped = np.clip(vals + shift, 0.0, None)
    clipped[k + 1:] = 0.0
    clipped = clipped / clipped.sum()
    rho = (vecs * clipped) @ vecs.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


@dataclass(frozen=True)
class TomographyResult:
    raw: np.ndarray
    state: DensityMatrix
    expectations: dict
    shots_per_setting: int


def state_tomography(
    circuit: Circuit,
    noise=None,
    shots: int = 0,
    seed=None,
    confusions: Optional[Sequence] = None,
) -> TomographyResult:
    """Measure every Weyl setting of the circuit's output state and invert.

    confusions: per-qudit readout confusion estimates to unfold from each
    distribution before taking expectations.
    """
    from .noise import rcal_correct

    expectations = {}
    for s, setting in enumerate(tomo_settings(circuit.n, circuit.d)):
        circ = setting_circuit(circuit, setting)
        sub = None if seed is None else utils.child_seed(seed, 70, s)
        dist = measure_distribution(circ, noise=noise, shots=shots, seed=sub).distribution
        if confusions is not None:
            dist = rcal_correct(dist, confusions)
        expectations[setting] = expectation_from_distribution(setting, dist)
    raw = reconstruct_state(circuit.n, circuit.d, expectations)
    return TomographyResult(raw, project_state(raw), expectations, shots)


# ---------------------------------------------------------------------------
# state metrics


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Overlap fidelity Tr(rho sigma); equals state fidelity when either
    argument is pure."""
    return float(np.real(np.trace(rho.data @ sigma.data)))


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """General fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2."""
    root = _psd_sqrt(rho.data)
    inner = _psd_sqrt(root @ sigma.data @ root)
    value = float(np.real(np.trace(inner))) ** 2
    return min(value, 1.0)


@dataclass(frozen=True)
class PurifyResult:
    data: np.ndarray
    residual: float
    converged: bool

    def state(self) -> DensityMatrix:
        if not self.converged:
            raise InvariantViolation("purification did not converge to a projector")
        return DensityMatrix(self.data / np.trace(self.data).real)


def purify(rho: DensityMatrix, steps: int = 20, tol: float = 1e-12) -> PurifyResult:
    """Iterate rho -> 3 rho^2 - 2 rho^3, driving the spectrum to {0, 1}.

    Converges to the projector onto the dominant eigenvector when that
    eigenvalue exceeds one half.
    """
    m = np.array(rho.data)
    residual = float(np.linalg.norm(m @ m - m))
    for _ in range(steps):
        m2 = m @ m
        m = 3.0 * m2 - 2.0 * (m2 @ m)
        m = 0.5 * (m + m.conj().T)
        residual = float(np.linalg.norm(m @ m - m))
        if residual < tol:
            break
    converged = residual < 1e-8 and np.trace(m).real > 0.5
    return PurifyResult(m, residual, converged)


# ---------------------------------------------------------------------------
# transfer matrices


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Channel matrix in the normalized Weyl basis B_k = W_k / sqrt(dim),
    ordered by canonical label index: R[i, j] = Tr(B_i^H ch(B_j))."""

    d: int
    n: int
    data: np.ndarray

    def __post_init__(self):
        k = self.d ** (2 * self.n)
        m = np.array(self.data, dtype=complex)
        if m.shape != (k, k):
            raise ValueError(f"transfer matrix shape {m.shape} does not match register ({k})")
        m.setflags(write=False)
        object.__setattr__(self, "data", m)

    @property
    def dim(self) -> int:
        return self.d**self.n


def transfer_matrix(channel, d: int, n: int) -> TransferMatrix:
    """Works for any object with an apply_matrix(rho) method (QuantumChannel,
    or an averaged-circuit adapter)."""
    dim = d**n
    ch_dim = getattr(channel, "dim", dim)
    if ch_dim != dim:
        raise ValueError(f"channel dimension {ch_dim} does not match d**n = {dim}")
    labels = all_labels(d, n)
    basis = np.stack([_weyl_ndarray(l) for l in labels]) / np.sqrt(dim)
    images = np.stack([channel.apply_matrix(b) for b in basis])
    data = np.einsum("iab,jab->ij", basis.conj(), images)
    return TransferMatrix(d, n, data)


def process_fidelity(tm: TransferMatrix) -> float:
    """F_pro = Tr(R) / dim**2; the trace must be real for physical channels."""
    tr = np.trace(tm.data)
    if abs(tr.imag) > 1e-10:
        raise InvariantViolation(f"transfer-matrix trace has imaginary part {tr.imag:.3e}")
    return float(tr.real) / tm.data.shape[0]


def decoherent_fidelity(tm: TransferMatrix) -> float:
    """Fidelity the channel would have if its transfer weight were purely
    stochastic: ||R||_F / dim.  Equals 1 exactly for unitary channels."""
    return float(np.linalg.norm(tm.data)) / tm.dim


def coherent_fraction(tm: TransferMatrix) -> Optional[float]:
    """Share of the infidelity carried coherently:
    (F_decoh - F_pro) / (1 - F_pro).  None for a noiseless channel."""
    f_pro = process_fidelity(tm)
    f_dec = decoherent_fidelity(tm)
    if f_pro <= 0.5 or f_dec <= 1.0 / np.sqrt(2.0):
        raise ValueError(
            f"coherent fraction needs a high-fidelity channel (F_pro={f_pro:.3f}, F_decoh={f_dec:.3f})")
    if 1.0 - f_pro < 1e-12:
        return None
    return (f_dec - f_pro) / (1.0 - f_pro)


def conjugation_phase_vector(t: WeylLabel) -> np.ndarray:
    """Diagonal of the transfer matrix of rho -> W_t rho W_t^H: entry b is
    omega^{c(t, b)} with c the commutation phase."""
    d = t.d
    omega = np.exp(2j * np.pi / d)
    return np.array([omega ** weyl_commutator_phase(t, b) for b in all_labels(d, t.n)])


def twirled_transfer(tm: TransferMatrix, labels: Sequence[WeylLabel]) -> TransferMatrix:
    """Transfer matrix of the channel averaged over the Weyl frame
    {W_t^H ch(W_t . W_t^H) W_t : t in labels}; an entrywise mask on R."""
    if not labels:
        raise ValueError("need at least one twirl label")
    k = tm.data.shape[0]
    mask = np.zeros((k, k), dtype=complex)
    for t in labels:
        v = conjugation_phase_vector(t)
        mask += np.outer(v.conj(), v)
    mask /= len(labels)
    return TransferMatrix(tm.d, tm.n, tm.data * mask)

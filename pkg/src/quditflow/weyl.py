"""Weyl-Heisenberg operators over Z_d with exact integer phase tracking.

Conventions (fixed package-wide):

* X|n> = |n+1 mod d>, Z|n> = omega^n |n> with omega = exp(2*pi*i/d).
* W_{p,q} = omega^{-p*q/2} Z^p X^q per qudit; multi-qudit labels are tensor
  products site by site.  For odd d the half power is realized as
  omega^{(d+1)/2}, which keeps every phase inside the group generated by
  tau = exp(i*pi/d) (tau**2 == omega) and gives W^d = I.  For d = 2 the same
  tau bookkeeping produces the standard Pauli phases (W_{1,1} = Y).
* Phases are tracked as integer exponents of tau modulo 2d, so group algebra
  (composition, inverse, conjugation) is exact.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .algebra import (
    InvariantViolation,
    QuantumChannel,
    UnitaryMatrix,
    check_capacity,
)

CONJUGATION_TOL = 1e-10


class NormalizerViolation(InvariantViolation):
    """A gate declared Clifford does not map the Weyl group to itself."""


@dataclass(frozen=True)
class WeylLabel:
    """Exponent vectors (p, q) of a tensor product of Z^p X^q operators."""

    d: int
    p: tuple
    q: tuple

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"qudit dimension must be at least 2, got {self.d}")
        p = tuple(int(x) % self.d for x in self.p)
        q = tuple(int(x) % self.d for x in self.q)
        if len(p) != len(q):
            raise ValueError(f"p and q must have equal length, got {len(p)} and {len(q)}")
        if not p:
            raise ValueError("label needs at least one qudit")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def is_identity(self) -> bool:
        return all(x == 0 for x in self.p) and all(x == 0 for x in self.q)

    @property
    def index(self) -> int:
        """Canonical enumeration index: base-d digits of p then q, qudit 0 most significant."""
        val = 0
        for x in self.p + self.q:
            val = val * self.d + x
        return val

    @classmethod
    def single(cls, d: int, p: int, q: int) -> "WeylLabel":
        return cls(d, (p,), (q,))

    @classmethod
    def identity(cls, d: int, n: int) -> "WeylLabel":
        return cls(d, (0,) * n, (0,) * n)

    @classmethod
    def from_index(cls, d: int, n: int, index: int) -> "WeylLabel":
        digits = []
        for _ in range(2 * n):
            digits.append(index % d)
            index //= d
        digits.reverse()
        return cls(d, tuple(digits[:n]), tuple(digits[n:]))

    def site(self, i: int) -> tuple:
        return (self.p[i], self.q[i])

    def add(self, other: "WeylLabel") -> "WeylLabel":
        self._check_compatible(other)
        return WeylLabel(
            self.d,
            tuple((a + b) % self.d for a, b in zip(self.p, other.p)),
            tuple((a + b) % self.d for a, b in zip(self.q, other.q)),
        )

    def negate(self) -> "WeylLabel":
        return WeylLabel(self.d, tuple(-x % self.d for x in self.p), tuple(-x % self.d for x in self.q))

    def _check_compatible(self, other: "WeylLabel") -> None:
        if self.d != other.d or self.n != other.n:
            raise ValueError(
                f"incompatible labels: (d={self.d}, n={self.n}) vs (d={other.d}, n={other.n})")


def all_labels(d: int, n: int) -> Iterator[WeylLabel]:
    """All d**(2n) labels in canonical index order (identity first)."""
    check_capacity(d**n)
    for digits in itertools.product(range(d), repeat=2 * n):
        yield WeylLabel(d, digits[:n], digits[n:])


def _site_phase_exponent(d: int, p: int, q: int) -> int:
    """tau exponent of the canonical prefactor omega^{-p*q/2} for one site."""
    if d % 2:
        return (-p * q * (d + 1)) % (2 * d)
    return (-p * q) % (2 * d)


def canonical_phase_exponent(label: WeylLabel) -> int:
    d = label.d
    total = 0
    for p, q in zip(label.p, label.q):
        total += _site_phase_exponent(d, p, q)
    return total % (2 * d)


def tau(d: int) -> complex:
    return np.exp(1j * np.pi / d)


@lru_cache(maxsize=None)
def _shift_matrix(d: int) -> np.ndarray:
    x = np.zeros((d, d), dtype=complex)
    for n in range(d):
        x[(n + 1) % d, n] = 1.0
    x.setflags(write=False)
    return x


@lru_cache(maxsize=None)
def _clock_matrix(d: int) -> np.ndarray:
    omega = np.exp(2j * np.pi / d)
    z = np.diag(omega ** np.arange(d)).astype(complex)
    z.setflags(write=False)
    return z


@lru_cache(maxsize=None)
def _single_weyl(d: int, p: int, q: int) -> np.ndarray:
    phase = tau(d) ** _site_phase_exponent(d, p, q)
    m = phase * (np.linalg.matrix_power(_clock_matrix(d), p)
                 @ np.linalg.matrix_power(_shift_matrix(d), q))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=4096)
def _weyl_ndarray(label: WeylLabel) -> np.ndarray:
    check_capacity(label.d**label.n)
    m = _single_weyl(label.d, label.p[0], label.q[0])
    for i in range(1, label.n):
        m = np.kron(m, _single_weyl(label.d, label.p[i], label.q[i]))
    m.setflags(write=False)
    return m


def weyl_matrix(label: WeylLabel) -> UnitaryMatrix:
    return UnitaryMatrix(_weyl_ndarray(label))


@dataclass(frozen=True)
class PhasedWeyl:
    """tau**phase_exp times the canonical Weyl operator W_label."""

    label: WeylLabel
    phase_exp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase_exp", int(self.phase_exp) % (2 * self.label.d))

    @property
    def d(self) -> int:
        return self.label.d

    @property
    def n(self) -> int:
        return self.label.n

    @property
    def phase(self) -> complex:
        return tau(self.d) ** self.phase_exp

    def matrix(self) -> np.ndarray:
        return self.phase * _weyl_ndarray(self.label)

    @classmethod
    def identity(cls, d: int, n: int) -> "PhasedWeyl":
        return cls(WeylLabel.identity(d, n), 0)

    def compose(self, other: "PhasedWeyl") -> "PhasedWeyl":
        return weyl_compose(self, other)

    def inverse(self) -> "PhasedWeyl":
        inv_label = self.label.negate()
        # phase chosen so that self.compose(inverse) is the identity with phase 0
        exp = -(self.phase_exp
                + canonical_phase_exponent(self.label)
                + canonical_phase_exponent(inv_label)
                + _cross_exponent(self.label, inv_label))
        return PhasedWeyl(inv_label, exp)

    def power(self, k: int) -> "PhasedWeyl":
        if k < 0:
            return self.inverse().power(-k)
        result = PhasedWeyl.identity(self.d, self.n)
        for _ in range(k):
            result = result.compose(self)
        return result


def _cross_exponent(a: WeylLabel, b: WeylLabel) -> int:
    """tau exponent picked up when X^{q_a} moves past Z^{p_b} site by site."""
    d = a.d
    total = 0
    for i in range(a.n):
        total += -2 * b.p[i] * a.q[i]
    return total % (2 * d)


def weyl_compose(a: PhasedWeyl, b: PhasedWeyl) -> PhasedWeyl:
    """Product a * b in matrix order: matrix(a) @ matrix(b) == result.matrix()."""
    a.label._check_compatible(b.label)
    label = a.label.add(b.label)
    exp = (a.phase_exp + b.phase_exp
           + canonical_phase_exponent(a.label)
           + canonical_phase_exponent(b.label)
           + _cross_exponent(a.label, b.label)
           - canonical_phase_exponent(label))
    return PhasedWeyl(label, exp)


def weyl_commutator_phase(a: WeylLabel, b: WeylLabel) -> int:
    """Exponent c with matrix(W_a) @ matrix(W_b) = omega^c matrix(W_b) @ matrix(W_a).

    c = sum_i (p_a[i] q_b[i] - q_a[i] p_b[i]) mod d.
    """
    a._check_compatible(b)
    total = 0
    for i in range(a.n):
        total += a.p[i] * b.q[i] - a.q[i] * b.p[i]
    return total % a.d


def weyl_eigenbasis(label: WeylLabel) -> UnitaryMatrix:
    """Unitary V whose k-th column is the eigenvector of W_label with
    eigenvalue omega^k, phase-fixed so the first nonzero component is real
    positive.  Single-qudit labels only; identity returns I."""
    if label.n != 1:
        raise ValueError("eigenbasis is defined per qudit; got a multi-qudit label")
    return UnitaryMatrix(_eigenbasis_ndarray(label))


@lru_cache(maxsize=None)
def _eigenbasis_ndarray(label: WeylLabel) -> np.ndarray:
    d = label.d
    if label.is_identity:
        m = np.eye(d, dtype=complex)
        m.setflags(write=False)
        return m
    w = _weyl_ndarray(label)
    evals, evecs = np.linalg.eig(w)
    omega = np.exp(2j * np.pi / d)
    cols = np.empty((d, d), dtype=complex)
    used = set()
    for k in range(d):
        target = omega**k
        dists = np.abs(evals - target)
        for j in used:
            dists[j] = np.inf
        j = int(np.argmin(dists))
        if dists[j] > 1e-8:
            raise InvariantViolation(
                f"no eigenvalue near omega^{k} for label {label}; spectrum {evals}")
        used.add(j)
        v = evecs[:, j]
        v = v / np.linalg.norm(v)
        for comp in v:
            if abs(comp) > 1e-8:
                v = v * (comp.conjugate() / abs(comp))
                break
        cols[:, k] = v
    return cols


# ---------------------------------------------------------------------------
# Clifford gates


def _match_phased_weyl(m: np.ndarray, d: int, n: int, tol: float = CONJUGATION_TOL) -> PhasedWeyl:
    """Find the PhasedWeyl equal to m, or raise NormalizerViolation."""
    dim = d**n
    for label in all_labels(d, n):
        w = _weyl_ndarray(label)
        # m == phase * w  <=>  m w^H == phase * I
        probe = m @ w.conj().T
        phase = probe[0, 0]
        if abs(abs(phase) - 1.0) > tol:
            continue
        if np.max(np.abs(probe - phase * np.eye(dim))) > tol:
            continue
        exp = round(np.angle(phase) / (np.pi / d)) % (2 * d)
        if abs(tau(d) ** exp - phase) > tol:
            continue
        return PhasedWeyl(label, exp)
    raise NormalizerViolation("operator is not a Weyl operator up to phase")


@dataclass(frozen=True, eq=False)
class CliffordGate:
    """A multi-qudit gate that normalizes the Weyl group.

    Conjugation images of the single-site Z and X generators are computed
    numerically once at construction and cached; conjugation of arbitrary
    phased Weyls is then exact integer phase algebra.
    """

    name: str
    d: int
    matrix: np.ndarray
    conj_table: Mapping = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if dev > 1e-10:
            raise InvariantViolation(f"gate {self.name!r} is not unitary (deviation {dev:.3e})")
        arity = round(np.log(m.shape[0]) / np.log(self.d))
        if self.d**arity != m.shape[0]:
            raise InvariantViolation(
                f"gate {self.name!r} dimension {m.shape[0]} is not a power of d={self.d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.conj_table is None:
            object.__setattr__(self, "conj_table", self._build_conj_table(m, arity))

    @property
    def arity(self) -> int:
        return round(np.log(self.matrix.shape[0]) / np.log(self.d))

    def _build_conj_table(self, m: np.ndarray, arity: int) -> dict:
        table = {}
        for site in range(arity):
            for kind, gen in (("Z", (1, 0)), ("X", (0, 1))):
                p = [0] * arity
                q = [0] * arity
                p[site], q[site] = gen
                w = _weyl_ndarray(WeylLabel(self.d, tuple(p), tuple(q)))
                img = m @ w @ m.conj().T
                try:
                    table[(site, kind)] = _match_phased_weyl(img, self.d, arity)
                except NormalizerViolation as exc:
                    raise NormalizerViolation(
                        f"gate {self.name!r} does not normalize the Weyl group: "
                        f"conjugate of {kind} on site {site} is not a phased Weyl") from exc
        return table

    def dagger(self) -> "CliffordGate":
        name = {"cz": "czdag", "czdag": "cz"}.get(self.name)
        if name is None:
            name = self.name[:-4] if self.name.endswith("_dag") else self.name + "_dag"
        return CliffordGate(name, self.d, self.matrix.conj().T)

    def order(self, max_order: int = 24) -> int:
        """Smallest k with matrix**k proportional to the identity."""
        dim = self.matrix.shape[0]
        acc = np.eye(dim, dtype=complex)
        for k in range(1, max_order + 1):
            acc = acc @ self.matrix
            if abs(abs(np.trace(acc)) - dim) < 1e-9:
                return k
        raise InvariantViolation(f"gate {self.name!r} has order above {max_order}")


def clifford_conjugate(gate: CliffordGate, sites: Sequence[int], w: PhasedWeyl) -> PhasedWeyl:
    """g W g^H for a gate acting on the given register sites (tensor-factor order)."""
    sites = tuple(sites)
    if len(sites) != gate.arity:
        raise ValueError(f"gate {gate.name!r} has arity {gate.arity}, got sites {sites}")
    d, n = w.d, w.n
    site_of = {s: i for i, s in enumerate(sites)}
    result = PhasedWeyl(
        WeylLabel.identity(d, n),
        w.phase_exp + canonical_phase_exponent(w.label),
    )
    for i in range(n):
        p, q = w.label.site(i)
        if p == 0 and q == 0:
            continue
        if i in site_of:
            local = site_of[i]
            z_img = _embed_phased(gate.conj_table[(local, "Z")], sites, n)
            x_img = _embed_phased(gate.conj_table[(local, "X")], sites, n)
            factor = z_img.power(p).compose(x_img.power(q))
        else:
            # untouched site: bare Z^p X^q as a phased Weyl
            pv = [0] * n
            qv = [0] * n
            pv[i], qv[i] = p, q
            label = WeylLabel(d, tuple(pv), tuple(qv))
            factor = PhasedWeyl(label, -canonical_phase_exponent(label))
        result = result.compose(factor)
    return result


def _embed_phased(w: PhasedWeyl, sites: Sequence[int], n: int) -> PhasedWeyl:
    d = w.d
    p = [0] * n
    q = [0] * n
    for local, s in enumerate(sites):
        p[s] = w.label.p[local]
        q[s] = w.label.q[local]
    return PhasedWeyl(WeylLabel(d, tuple(p), tuple(q)), w.phase_exp)


# built-in Clifford gates --------------------------------------------------


@lru_cache(maxsize=None)
def cz_matrix(d: int) -> np.ndarray:
    """CZ = sum_n |n><n| (x) Z^n: diagonal phases omega^{n*m}."""
    omega = np.exp(2j * np.pi / d)
    phases = np.array([omega ** (nn * mm) for nn in range(d) for mm in range(d)])
    m = np.diag(phases)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def hadamard_matrix(d: int) -> np.ndarray:
    """Fourier gate H|n> = d^{-1/2} sum_m omega^{n*m} |m>."""
    omega = np.exp(2j * np.pi / d)
    m = omega ** np.outer(np.arange(d), np.arange(d)).T / np.sqrt(d)
    m = np.asarray(m, dtype=complex)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def sdiag_matrix(d: int) -> np.ndarray:
    """Diagonal quadratic-phase Clifford: tau^{n(n-1)} for odd d (a power of
    omega), tau^{n**2} for d = 2 (the standard S gate)."""
    t = tau(d)
    if d % 2:
        phases = [t ** (n * (n - 1)) for n in range(d)]
    else:
        phases = [t ** (n * n) for n in range(d)]
    m = np.diag(np.array(phases, dtype=complex))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def cz_gate(d: int = 3) -> CliffordGate:
    return CliffordGate("cz", d, cz_matrix(d))


@lru_cache(maxsize=None)
def czdag_gate(d: int = 3) -> CliffordGate:
    return CliffordGate("czdag", d, cz_matrix(d).conj().T)


@lru_cache(maxsize=None)
def hadamard_clifford(d: int = 3) -> CliffordGate:
    return CliffordGate("hadamard", d, hadamard_matrix(d))


@lru_cache(maxsize=None)
def sdiag_clifford(d: int = 3) -> CliffordGate:
    return CliffordGate("sdiag", d, sdiag_matrix(d))


def custom_clifford(name: str, matrix, d: int) -> CliffordGate:
    """Declare a custom Clifford; raises NormalizerViolation if it is not one."""
    return CliffordGate(name, d, np.asarray(matrix, dtype=complex))


# twirling ------------------------------------------------------------------


def twirl_channel(ch: QuantumChannel, d: int) -> QuantumChannel:
    """Exact Weyl twirl: average of W^H ch(W . W^H) W over all d**(2n) labels.

    The result is a stochastic Weyl channel (diagonal transfer matrix in the
    Weyl basis) with the same process fidelity as the input.
    """
    dim = ch.dim
    n = round(np.log(dim) / np.log(d))
    if d**n != dim:
        raise ValueError(f"channel dimension {dim} is not a power of d={d}")
    labels = list(all_labels(d, n))
    scale = 1.0 / len(labels)
    ops = []
    for label in labels:
        w = _weyl_ndarray(label)
        wh = w.conj().T
        for k in ch.kraus:
            ops.append(np.sqrt(scale) * (wh @ k @ w))
    return QuantumChannel(tuple(ops)).reduced()

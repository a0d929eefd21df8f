"""Circuit intermediate representation: alternating Easy / Hard cycles.

Easy cycles hold arbitrary single-qudit gates; Hard cycles hold multi-qudit
Clifford gates.  Construction normalizes every circuit to the canonical
alternating form Easy, Hard, ..., Easy by inserting empty Easy cycles, so a
cycle's parity is structural, not positional bookkeeping.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import utils
from .algebra import (
    DensityMatrix,
    InvariantViolation,
    OutcomeDistribution,
    check_capacity,
    embed_operator,
    sample_counts,
)
from .weyl import (
    CliffordGate,
    WeylLabel,
    _eigenbasis_ndarray,
    _weyl_ndarray,
    cz_gate,
    czdag_gate,
    hadamard_clifford,
    hadamard_matrix,
    sdiag_clifford,
    custom_clifford,
)

EASY = "easy"
HARD = "hard"

CIRCUIT_SCHEMA = "qf-circuit/1"


class CircuitParseError(ValueError):
    """A circuit document failed structural validation; the message names the field."""


# ---------------------------------------------------------------------------
# single-qudit (Easy) gates


@dataclass(frozen=True)
class WeylGate:
    """Single-qudit canonical Weyl operator W_{p,q}."""

    label: WeylLabel

    def __post_init__(self):
        if self.label.n != 1:
            raise ValueError("WeylGate takes a single-qudit label")

    @property
    def d(self) -> int:
        return self.label.d

    kind = "weyl"

    def matrix(self) -> np.ndarray:
        return np.array(_weyl_ndarray(self.label))

    def payload(self) -> dict:
        return {"p": self.label.p[0], "q": self.label.q[0]}


@dataclass(frozen=True)
class HadamardGate:
    d: int
    dagger: bool = False

    kind = "hadamard"

    def matrix(self) -> np.ndarray:
        m = hadamard_matrix(self.d)
        return np.array(m.conj().T if self.dagger else m)

    def payload(self) -> dict:
        return {"dagger": self.dagger}


@dataclass(frozen=True)
class VirtualDiagGate:
    """Diagonal phase gate diag(exp(i*phi_k)); used for Ramsey-style sweeps."""

    d: int
    phases: tuple

    def __post_init__(self):
        phases = tuple(float(x) for x in self.phases)
        if len(phases) != self.d:
            raise ValueError(f"need {self.d} phases, got {len(phases)}")
        object.__setattr__(self, "phases", phases)

    kind = "virtual_diag"

    def matrix(self) -> np.ndarray:
        return np.diag(np.exp(1j * np.array(self.phases)))

    def payload(self) -> dict:
        return {"phases": list(self.phases)}


@dataclass(frozen=True, eq=False)
class HaarUnitaryGate:
    """A fixed unitary sampled from the Haar measure, tagged with its provenance."""

    d: int
    data: np.ndarray
    seed_tag: str = ""

    def __post_init__(self):
        m = np.array(self.data, dtype=complex)
        if m.shape != (self.d, self.d):
            raise ValueError(f"Haar gate matrix shape {m.shape} does not match d={self.d}")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(self.d)))
        if dev > 1e-10:
            raise InvariantViolation(f"Haar gate matrix is not unitary (deviation {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "data", m)

    kind = "haar"

    @classmethod
    def sample(cls, d: int, rng: np.random.Generator, seed_tag: str = "") -> "HaarUnitaryGate":
        return cls(d, haar_unitary(d, rng), seed_tag)

    def matrix(self) -> np.ndarray:
        return np.array(self.data)

    def payload(self) -> dict:
        return {"matrix": utils.complex_matrix_to_pairs(self.data), "seed_tag": self.seed_tag}


@dataclass(frozen=True)
class EigenbasisRotationGate:
    """Rotation V^H mapping the eigenbasis of a Weyl operator onto the
    computational basis, so outcome k reports eigenvalue omega^k."""

    label: WeylLabel

    def __post_init__(self):
        if self.label.n != 1:
            raise ValueError("EigenbasisRotationGate takes a single-qudit label")

    @property
    def d(self) -> int:
        return self.label.d

    kind = "eigenbasis_rotation"

    def matrix(self) -> np.ndarray:
        return np.array(_eigenbasis_ndarray(self.label).conj().T)

    def payload(self) -> dict:
        return {"p": self.label.p[0], "q": self.label.q[0]}


@dataclass(frozen=True, eq=False)
class CustomGate:
    """Arbitrary single-qudit unitary (e.g. a recompiled Easy gate)."""

    d: int
    data: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.array(self.data, dtype=complex)
        if m.shape != (self.d, self.d):
            raise ValueError(f"custom gate shape {m.shape} does not match d={self.d}")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(self.d)))
        if dev > 1e-10:
            raise InvariantViolation(f"custom gate is not unitary (deviation {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "data", m)

    kind = "custom"

    def matrix(self) -> np.ndarray:
        return np.array(self.data)

    def payload(self) -> dict:
        out = {"matrix": utils.complex_matrix_to_pairs(self.data)}
        if self.name:
            out["name"] = self.name
        return out


EASY_GATE_KINDS = ("weyl", "hadamard", "virtual_diag", "haar", "eigenbasis_rotation", "custom")


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with the
    column-phase fix that makes the distribution exactly Haar."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


# ---------------------------------------------------------------------------
# cycles and circuits


@dataclass(frozen=True, eq=False)
class Cycle:
    """One layer of gates on disjoint qudits.  kind is EASY or HARD."""

    kind: str
    gates: tuple  # of (qudits tuple, gate)

    def __post_init__(self):
        if self.kind not in (EASY, HARD):
            raise ValueError(f"cycle kind must be {EASY!r} or {HARD!r}, got {self.kind!r}")
        gates = []
        seen: set = set()
        for qudits, gate in self.gates:
            qudits = tuple(int(q) for q in qudits)
            if self.kind == EASY:
                if len(qudits) != 1:
                    raise ValueError(f"easy gates act on one qudit, got {qudits}")
                if not hasattr(gate, "matrix"):
                    raise ValueError("easy gate must provide a matrix()")
            else:
                if len(qudits) < 2:
                    raise ValueError(f"hard gates act on at least two qudits, got {qudits}")
                if not isinstance(gate, CliffordGate):
                    raise ValueError("hard cycle gates must be CliffordGate instances")
                if len(qudits) != gate.arity:
                    raise ValueError(
                        f"gate {gate.name!r} arity {gate.arity} does not match qudits {qudits}")
            for q in qudits:
                if q in seen:
                    raise ValueError(f"qudit {q} appears twice in one cycle")
                seen.add(q)
            gates.append((qudits, gate))
        object.__setattr__(self, "gates", tuple(gates))

    @property
    def support(self) -> tuple:
        out = []
        for qudits, _ in self.gates:
            out.extend(qudits)
        return tuple(sorted(out))


def empty_easy_cycle() -> Cycle:
    return Cycle(EASY, ())


@dataclass(frozen=True, eq=False)
class Circuit:
    """Alternating Easy/Hard cycle list on an n-qudit register.

    Circuits are immutable; all rewriting helpers return new instances.
    """

    n: int
    d: int
    cycles: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one qudit, got n={self.n}")
        if self.d < 2:
            raise ValueError(f"qudit dimension must be at least 2, got d={self.d}")
        check_capacity(self.d**self.n)
        normalized = _normalize_cycles(self.cycles)
        for cycle in normalized:
            for qudits, gate in cycle.gates:
                for q in qudits:
                    if not 0 <= q < self.n:
                        raise ValueError(f"qudit index {q} out of range for n={self.n}")
                gate_d = getattr(gate, "d", None)
                if gate_d is not None and gate_d != self.d:
                    raise ValueError(f"gate dimension {gate_d} does not match circuit d={self.d}")
        object.__setattr__(self, "cycles", normalized)

    @property
    def dim(self) -> int:
        return self.d**self.n

    def hard_cycles(self) -> list:
        """(position, cycle) pairs for the Hard cycles, in order."""
        return [(i, c) for i, c in enumerate(self.cycles) if c.kind == HARD]

    def with_metadata(self, **entries) -> "Circuit":
        meta = dict(self.metadata)
        meta.update(entries)
        return Circuit(self.n, self.d, self.cycles, meta)


def _normalize_cycles(cycles: Iterable[Cycle]) -> tuple:
    """Insert empty Easy cycles so the sequence alternates and ends Easy."""
    out: list[Cycle] = []
    for cycle in cycles:
        if not isinstance(cycle, Cycle):
            raise ValueError(f"expected Cycle, got {type(cycle).__name__}")
        if cycle.kind == HARD and (not out or out[-1].kind == HARD):
            out.append(empty_easy_cycle())
        if cycle.kind == EASY and out and out[-1].kind == EASY:
            out.append(_merge_easy(out.pop(), cycle))
            continue
        out.append(cycle)
    if not out or out[0].kind == HARD:
        out.insert(0, empty_easy_cycle())
    if out[-1].kind == HARD:
        out.append(empty_easy_cycle())
    return tuple(out)


def _merge_easy(first: Cycle, second: Cycle) -> Cycle:
    """Compose two adjacent Easy cycles into one (second acts after first)."""
    gates = {qudits[0]: gate for qudits, gate in first.gates}
    for qudits, gate in second.gates:
        q = qudits[0]
        if q in gates:
            old = gates[q]
            gates[q] = CustomGate(gate.d, gate.matrix() @ old.matrix())
        else:
            gates[q] = gate
    return Cycle(EASY, tuple(((q,), g) for q, g in sorted(gates.items())))


def cycle_unitary(cycle: Cycle, n: int, d: int) -> np.ndarray:
    u = np.eye(d**n, dtype=complex)
    for qudits, gate in cycle.gates:
        mat = gate.matrix if isinstance(gate, CliffordGate) else gate.matrix()
        u = embed_operator(mat, qudits, n, d) @ u
    return u


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    u = np.eye(circuit.dim, dtype=complex)
    for cycle in circuit.cycles:
        u = cycle_unitary(cycle, circuit.n, circuit.d) @ u
    return u


def apply_circuit(circuit: Circuit, rho: np.ndarray, noise=None) -> np.ndarray:
    """The circuit's channel applied to a raw matrix (no state validation);
    the workhorse behind simulate and transfer-matrix analytics."""
    rho = np.array(rho, dtype=complex)
    easy_ordinal = 0
    hard_ordinal = 0
    for cycle in circuit.cycles:
        u = cycle_unitary(cycle, circuit.n, circuit.d)
        rho = u @ rho @ u.conj().T
        if noise is not None:
            if cycle.kind == HARD:
                ch = noise.hard_channel(hard_ordinal, cycle, circuit.n)
                if ch is not None:
                    rho = ch.apply_matrix(rho)
                hard_ordinal += 1
            else:
                ch = noise.easy_channel(easy_ordinal, cycle, circuit.n)
                if ch is not None:
                    rho = ch.apply_matrix(rho)
                easy_ordinal += 1
    return rho


def simulate(circuit: Circuit, noise=None, initial: Optional[DensityMatrix] = None) -> DensityMatrix:
    """Density-matrix evolution.  With a noise model, the dressing channel of
    each Hard cycle is applied right after the cycle's unitary, and Easy-cycle
    noise (if configured) after each Easy cycle."""
    if initial is None:
        rho = np.zeros((circuit.dim, circuit.dim), dtype=complex)
        rho[0, 0] = 1.0
    else:
        if initial.dim != circuit.dim:
            raise InvariantViolation(
                f"initial state dimension {initial.dim} does not match circuit dimension {circuit.dim}")
        rho = initial.data
    return DensityMatrix(apply_circuit(circuit, rho, noise=noise))


@dataclass(frozen=True)
class MeasurementResult:
    distribution: OutcomeDistribution
    counts: Optional[np.ndarray] = None
    shots: int = 0


def measure_distribution(circuit: Circuit, noise=None, shots: int = 0, seed=None) -> MeasurementResult:
    """Computational-basis outcome distribution after the circuit.

    shots = 0 returns the exact distribution; shots > 0 draws multinomial
    counts and returns the empirical distribution alongside them.  Readout
    confusion from the noise model is applied before sampling.
    """
    rho = simulate(circuit, noise=noise)
    probs = np.real(np.diag(rho.data)).copy()
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    if noise is not None and noise.readout is not None:
        probs = noise.apply_readout(probs)
    dist = OutcomeDistribution(circuit.n, circuit.d, probs)
    if shots == 0:
        return MeasurementResult(dist, None, 0)
    counts = sample_counts(dist, shots, seed)
    empirical = OutcomeDistribution(circuit.n, circuit.d, counts / shots)
    return MeasurementResult(empirical, counts, shots)


# ---------------------------------------------------------------------------
# builders


def ghz_circuit(n: int = 3, d: int = 3) -> Circuit:
    """Entangler chain preparing (|0..0> + |1..1> + ... )/sqrt(d).

    Layout: Easy[H(0), Hdag(1)]; then for each link j: Hard[CZdag(j-1, j)],
    Easy[H(j), Hdag(j+1)].  Uses n-1 Hard cycles.
    """
    if n < 2:
        raise ValueError("the entangler chain needs at least two qudits")
    czd = czdag_gate(d)
    cycles = [Cycle(EASY, (((0,), HadamardGate(d)), ((1,), HadamardGate(d, dagger=True))))]
    for j in range(1, n):
        cycles.append(Cycle(HARD, (((j - 1, j), czd),)))
        easy = [((j,), HadamardGate(d))]
        if j + 1 < n:
            easy.append(((j + 1,), HadamardGate(d, dagger=True)))
        cycles.append(Cycle(EASY, tuple(easy)))
    return Circuit(n, d, tuple(cycles))


def ghz_state(n: int = 3, d: int = 3) -> DensityMatrix:
    vec = np.zeros(d**n, dtype=complex)
    step = (d**n - 1) // (d - 1)
    for k in range(d):
        vec[k * step] = 1.0
    return DensityMatrix.from_statevector(vec / np.linalg.norm(vec))


def append_easy_gates(circuit: Circuit, gates: Sequence) -> Circuit:
    """Compose extra single-qudit gates into the final Easy cycle.

    gates: sequence of (qudit, gate).  A qudit already carrying a gate in the
    final cycle gets the matrix product (new @ old) as a CustomGate.
    """
    last = circuit.cycles[-1]
    existing = {qudits[0]: gate for qudits, gate in last.gates}
    for qudit, gate in gates:
        if qudit in existing:
            old = existing[qudit]
            existing[qudit] = CustomGate(circuit.d, gate.matrix() @ old.matrix())
        else:
            existing[qudit] = gate
    new_last = Cycle(EASY, tuple(((q,), g) for q, g in sorted(existing.items())))
    return Circuit(circuit.n, circuit.d, circuit.cycles[:-1] + (new_last,), dict(circuit.metadata))


# ---------------------------------------------------------------------------
# serialization

_HARD_BUILTINS = {
    "cz": cz_gate,
    "czdag": czdag_gate,
    "hadamard": hadamard_clifford,
    "sdiag": sdiag_clifford,
}


def serialize(circuit: Circuit) -> str:
    doc = {
        "version": CIRCUIT_SCHEMA,
        "n": circuit.n,
        "d": circuit.d,
        "metadata": circuit.metadata,
        "cycles": [_cycle_doc(c) for c in circuit.cycles],
    }
    return utils.dumps_canonical(doc)


def _cycle_doc(cycle: Cycle) -> dict:
    gates = []
    for qudits, gate in cycle.gates:
        if cycle.kind == HARD:
            entry = {"qudits": list(qudits), "kind": gate.name}
            if gate.name not in _HARD_BUILTINS:
                entry["payload"] = {"matrix": utils.complex_matrix_to_pairs(gate.matrix)}
            else:
                entry["payload"] = {}
        else:
            entry = {"qudits": list(qudits), "kind": gate.kind, "payload": gate.payload()}
        gates.append(entry)
    return {"kind": cycle.kind, "gates": gates}


def parse(text: str) -> Circuit:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise CircuitParseError("top level: expected an object")
    version = doc.get("version")
    if version != CIRCUIT_SCHEMA:
        raise CircuitParseError(f"version: expected {CIRCUIT_SCHEMA!r}, got {version!r}")
    n = _require_int(doc, "n")
    d = _require_int(doc, "d")
    cycles_doc = doc.get("cycles")
    if not isinstance(cycles_doc, list):
        raise CircuitParseError("cycles: expected a list")
    cycles = []
    for i, cdoc in enumerate(cycles_doc):
        cycles.append(_parse_cycle(cdoc, i, d))
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise CircuitParseError("metadata: expected an object")
    try:
        return Circuit(n, d, tuple(cycles), metadata)
    except ValueError as exc:
        raise CircuitParseError(str(exc)) from exc


def _require_int(doc: Mapping, key: str) -> int:
    value = doc.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise CircuitParseError(f"{key}: expected an integer, got {value!r}")
    return value


def _parse_cycle(cdoc, index: int, d: int) -> Cycle:
    where = f"cycles[{index}]"
    if not isinstance(cdoc, dict):
        raise CircuitParseError(f"{where}: expected an object")
    kind = cdoc.get("kind")
    if kind not in (EASY, HARD):
        raise CircuitParseError(f"{where}.kind: expected 'easy' or 'hard', got {kind!r}")
    gates_doc = cdoc.get("gates", [])
    if not isinstance(gates_doc, list):
        raise CircuitParseError(f"{where}.gates: expected a list")
    gates = []
    for j, gdoc in enumerate(gates_doc):
        gwhere = f"{where}.gates[{j}]"
        if not isinstance(gdoc, dict):
            raise CircuitParseError(f"{gwhere}: expected an object")
        qudits = gdoc.get("qudits")
        if not isinstance(qudits, list) or not all(isinstance(q, int) for q in qudits):
            raise CircuitParseError(f"{gwhere}.qudits: expected a list of integers")
        gkind = gdoc.get("kind")
        payload = gdoc.get("payload", {})
        if not isinstance(payload, dict):
            raise CircuitParseError(f"{gwhere}.payload: expected an object")
        try:
            if kind == HARD:
                gate = _parse_hard_gate(gkind, payload, d, gwhere)
            else:
                gate = _parse_easy_gate(gkind, payload, d, gwhere)
        except CircuitParseError:
            raise
        except (ValueError, InvariantViolation) as exc:
            raise CircuitParseError(f"{gwhere}: {exc}") from exc
        gates.append((tuple(qudits), gate))
    try:
        return Cycle(kind, tuple(gates))
    except ValueError as exc:
        raise CircuitParseError(f"{where}: {exc}") from exc


def _parse_hard_gate(gkind, payload: Mapping, d: int, where: str):
    if gkind in _HARD_BUILTINS:
        return _HARD_BUILTINS[gkind](d)
    if not isinstance(gkind, str) or not gkind:
        raise CircuitParseError(f"{where}.kind: expected a gate name string, got {gkind!r}")
    pairs = payload.get("matrix")
    if pairs is None:
        raise CircuitParseError(f"{where}.payload.matrix: custom hard gate needs a matrix")
    size = int(round(np.sqrt(len(pairs))))
    matrix = utils.pairs_to_complex_matrix(pairs, size, size)
    return custom_clifford(gkind, matrix, d)


def _parse_easy_gate(gkind, payload: Mapping, d: int, where: str):
    if gkind == "weyl":
        return WeylGate(WeylLabel.single(d, int(payload["p"]), int(payload["q"])))
    if gkind == "hadamard":
        return HadamardGate(d, bool(payload.get("dagger", False)))
    if gkind == "virtual_diag":
        return VirtualDiagGate(d, tuple(payload["phases"]))
    if gkind == "haar":
        matrix = utils.pairs_to_complex_matrix(payload["matrix"], d, d)
        return HaarUnitaryGate(d, matrix, str(payload.get("seed_tag", "")))
    if gkind == "eigenbasis_rotation":
        return EigenbasisRotationGate(WeylLabel.single(d, int(payload["p"]), int(payload["q"])))
    if gkind == "custom":
        matrix = utils.pairs_to_complex_matrix(payload["matrix"], d, d)
        return CustomGate(d, matrix, str(payload.get("name", "")))
    raise CircuitParseError(f"{where}.kind: unknown easy gate kind {gkind!r}")


def structurally_equal(a: Circuit, b: Circuit, tol: float = 1e-15) -> bool:
    """Structural comparison used by round-trip tests: same cycle layout,
    same gate kinds and qudits, numeric payloads within tol."""
    if (a.n, a.d, len(a.cycles)) != (b.n, b.d, len(b.cycles)):
        return False
    for ca, cb in zip(a.cycles, b.cycles):
        if ca.kind != cb.kind or len(ca.gates) != len(cb.gates):
            return False
        for (qa, ga), (qb, gb) in zip(ca.gates, cb.gates):
            if qa != qb:
                return False
            if ca.kind == HARD:
                if ga.name != gb.name:
                    return False
                if not np.allclose(ga.matrix, gb.matrix, atol=tol, rtol=0):
                    return False
            else:
                if ga.kind != gb.kind:
                    return False
                ma = ga.matrix()
                mb = gb.matrix()
                if ma.shape != mb.shape or not np.allclose(ma, mb, atol=tol, rtol=0):
                    return False
    return True

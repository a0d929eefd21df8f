"""Noise tailoring and mitigation: randomized compiling over the Weyl frame,
noise-amplifying cycle folding, and noiseless-output extrapolation, plus
observable estimators with concentration bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import utils
from .algebra import InvariantViolation, OutcomeDistribution
from .circuit import (
    Circuit,
    CustomGate,
    Cycle,
    EASY,
    HARD,
    cycle_unitary,
    empty_easy_cycle,
    measure_distribution,
    simulate,
)
from .weyl import PhasedWeyl, WeylLabel, clifford_conjugate, _weyl_ndarray

METHOD_BARE = "Bare"
METHOD_RC = "RC"
METHOD_RC_NOX = "RC+NOX"

ORDER_POWER = "order_power"
INVERSE_PAIR = "inverse_pair"


@dataclass(frozen=True)
class RcConfig:
    """Randomized-compiling estimator settings.

    shots = 0 means exact expectation values per randomization (no sampling).
    """

    n_randomizations: int = 20
    shots: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n_randomizations < 1:
            raise ValueError("need at least one randomization")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")


@dataclass(frozen=True)
class FoldSpec:
    """One Hard cycle to fold, by ordinal among the circuit's Hard cycles."""

    cycle_index: int
    n_id: int = 1
    strategy: str = ORDER_POWER

    def __post_init__(self):
        if self.cycle_index < 0:
            raise ValueError("cycle_index must be non-negative")
        if self.n_id < 1:
            raise ValueError("n_id must be at least 1 (the fold factor must exceed 1)")
        if self.strategy not in (ORDER_POWER, INVERSE_PAIR):
            raise ValueError(f"unknown folding strategy {self.strategy!r}")


@dataclass(frozen=True)
class MitigatedEstimate:
    value: float
    std_error: float
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")
        if self.method not in (METHOD_BARE, METHOD_RC, METHOD_RC_NOX):
            raise ValueError(f"unknown estimator method {self.method!r}")


# ---------------------------------------------------------------------------
# randomized compiling


def conjugate_by_cycle(cycle: Cycle, w: PhasedWeyl) -> PhasedWeyl:
    """Image of a register Weyl operator under conjugation by a Hard cycle.

    Gates in one cycle act on disjoint qudits, so they are applied in turn.
    """
    out = w
    for qudits, gate in cycle.gates:
        out = clifford_conjugate(gate, qudits, out)
    return out


def draw_twirl_labels(circuit: Circuit, rng: np.random.Generator) -> tuple:
    """One uniform register Weyl label per Hard cycle."""
    labels = []
    for _pos, _cycle in circuit.hard_cycles():
        p = tuple(int(x) for x in rng.integers(0, circuit.d, size=circuit.n))
        q = tuple(int(x) for x in rng.integers(0, circuit.d, size=circuit.n))
        labels.append(WeylLabel(circuit.d, p, q))
    return tuple(labels)


def randomize(circuit: Circuit, seed=None, labels: Optional[Sequence[WeylLabel]] = None) -> Circuit:
    """Randomized compile: dress every Hard cycle H as Tc . H . T with T a
    uniform register Weyl operator and Tc = H T^H H^H, folding both into the
    neighbouring Easy cycles.  The compiled circuit implements the same map up
    to a global phase (recorded in metadata) and keeps the cycle count.

    labels overrides the random draw with one label per Hard cycle, enabling
    exhaustive averaging.
    """
    hard = circuit.hard_cycles()
    if labels is None:
        rng = utils.child_rng(seed, 10)
        labels = draw_twirl_labels(circuit, rng)
    else:
        labels = tuple(labels)
        if len(labels) != len(hard):
            raise ValueError(f"need {len(hard)} twirl labels, got {len(labels)}")
        for label in labels:
            if (label.d, label.n) != (circuit.d, circuit.n):
                raise ValueError("twirl label does not match the circuit register")
    # pre[e]: twirl applied after easy cycle e; post[e]: correction before it
    pre: dict[int, WeylLabel] = {}
    post: dict[int, PhasedWeyl] = {}
    phase_exps = []
    for (pos, cycle), label in zip(hard, labels):
        twirl = PhasedWeyl(label, 0)
        correction = conjugate_by_cycle(cycle, twirl.inverse())
        pre[pos - 1] = label
        post[pos + 1] = correction
        phase_exps.append(correction.phase_exp)
    new_cycles = []
    for e, cycle in enumerate(circuit.cycles):
        if cycle.kind == HARD or (e not in pre and e not in post):
            new_cycles.append(cycle)
            continue
        gates = {qudits[0]: gate for qudits, gate in cycle.gates}
        merged = []
        for i in range(circuit.n):
            m = None
            right = post.get(e)
            if right is not None:
                p_i, q_i = right.label.site(i)
                if p_i or q_i:
                    m = np.array(_weyl_ndarray(WeylLabel.single(circuit.d, p_i, q_i)))
            if i in gates:
                g = gates[i].matrix()
                m = g if m is None else g @ m
            left = pre.get(e)
            if left is not None:
                p_i, q_i = left.site(i)
                if p_i or q_i:
                    w = _weyl_ndarray(WeylLabel.single(circuit.d, p_i, q_i))
                    m = np.array(w) if m is None else w @ m
            if m is not None:
                merged.append(((i,), CustomGate(circuit.d, m)))
        new_cycles.append(Cycle(EASY, tuple(merged)))
    meta = dict(circuit.metadata)
    meta["rc_twirl_labels"] = [label.index for label in labels]
    meta["rc_correction_phase_exps"] = phase_exps
    return Circuit(circuit.n, circuit.d, tuple(new_cycles), meta)


# ---------------------------------------------------------------------------
# observable estimation


def expectation_value(
    circuit: Circuit,
    observable: np.ndarray,
    noise=None,
    shots: int = 0,
    seed=None,
) -> float:
    """<O> on the circuit's output state.  With shots > 0 the value is
    estimated by sampling in the observable's eigenbasis (ideal readout).
    """
    obs = np.asarray(observable, dtype=complex)
    if np.max(np.abs(obs - obs.conj().T)) > 1e-10:
        raise InvariantViolation("observable must be Hermitian")
    rho = simulate(circuit, noise=noise)
    if shots == 0:
        return float(np.real(np.trace(obs @ rho.data)))
    vals, vecs = np.linalg.eigh(obs)
    probs = np.real(np.einsum("ij,jk,ki->i", vecs.conj().T, rho.data, vecs))
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    rng = utils.child_rng(seed, 20)
    counts = rng.multinomial(shots, probs)
    return float(np.dot(counts, vals) / shots)


def bare_estimate(circuit: Circuit, observable, noise=None, cfg: RcConfig = RcConfig()) -> MitigatedEstimate:
    """Unrandomized single-compilation estimate (the baseline method)."""
    value = expectation_value(
        circuit, observable, noise=noise, shots=cfg.shots,
        seed=utils.child_seed(cfg.seed, 21) if cfg.seed is not None else None)
    return MitigatedEstimate(value, 0.0, METHOD_BARE, {"shots": cfg.shots})


def rc_estimate(
    circuit: Circuit,
    observable,
    noise=None,
    cfg: RcConfig = RcConfig(),
    labels: Optional[Sequence[Sequence[WeylLabel]]] = None,
    seed_path: tuple = (),
) -> MitigatedEstimate:
    """Mean observable estimate over randomized compilations; std_error is the
    sample standard deviation over randomizations divided by sqrt(N).

    labels: explicit twirl labels, one sequence (per Hard cycle) for each
    randomization; overrides cfg.n_randomizations for exhaustive averages.
    """
    if labels is not None:
        draws = [randomize(circuit, labels=ls) for ls in labels]
    else:
        draws = [
            randomize(circuit, seed=utils.child_seed(cfg.seed, 30, *seed_path, i))
            for i in range(cfg.n_randomizations)
        ]
    values = np.empty(len(draws))
    for i, compiled in enumerate(draws):
        sub = None if cfg.seed is None else utils.child_seed(cfg.seed, 31, *seed_path, i)
        values[i] = expectation_value(compiled, observable, noise=noise, shots=cfg.shots, seed=sub)
    std_error = 0.0
    if len(draws) > 1:
        std_error = float(np.std(values, ddof=1) / np.sqrt(len(draws)))
    metadata = {"n_randomizations": len(draws), "shots": cfg.shots,
                "per_randomization": values.tolist()}
    return MitigatedEstimate(float(np.mean(values)), std_error, METHOD_RC, metadata)


def rc_distribution(
    circuit: Circuit,
    noise=None,
    cfg: RcConfig = RcConfig(),
    seed_path: tuple = (),
) -> OutcomeDistribution:
    """Mean outcome distribution over randomized compilations (readout
    confusion from the noise model applies to each run)."""
    total = np.zeros(circuit.dim)
    for i in range(cfg.n_randomizations):
        compiled = randomize(circuit, seed=utils.child_seed(cfg.seed, 30, *seed_path, i))
        sub = None if cfg.seed is None else utils.child_seed(cfg.seed, 31, *seed_path, i)
        result = measure_distribution(compiled, noise=noise, shots=cfg.shots, seed=sub)
        total += result.distribution.probs
    return OutcomeDistribution(circuit.n, circuit.d, total / cfg.n_randomizations)


def hoeffding_bound(epsilon: float, n_randomizations: int) -> float:
    """Confidence that an N-randomization mean sits within epsilon of the
    exhaustive average: 1 - exp(-2 epsilon^2 N).  Independent of d."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if n_randomizations < 1:
        raise ValueError("n_randomizations must be at least 1")
    return 1.0 - math.exp(-2.0 * epsilon * epsilon * n_randomizations)


# ---------------------------------------------------------------------------
# folding


def _cycle_order(cycle: Cycle) -> int:
    order = 1
    for _qudits, gate in cycle.gates:
        order = math.lcm(order, gate.order())
    return order


def _dagger_cycle(cycle: Cycle) -> Cycle:
    return Cycle(HARD, tuple((qudits, gate.dagger()) for qudits, gate in cycle.gates))


def fold_factor(circuit: Circuit, spec: FoldSpec) -> int:
    """alpha: how many noisy applications of the target cycle's signature the
    folded circuit performs in place of one."""
    hard = circuit.hard_cycles()
    if not spec.cycle_index < len(hard):
        raise ValueError(
            f"hard-cycle ordinal {spec.cycle_index} out of range (have {len(hard)})")
    _pos, cycle = hard[spec.cycle_index]
    if spec.strategy == ORDER_POWER:
        return 1 + _cycle_order(cycle) * spec.n_id
    return 1 + 2 * spec.n_id


def fold(circuit: Circuit, spec: FoldSpec) -> Circuit:
    """Amplify the noise attached to one Hard cycle while leaving the logical
    circuit unchanged.

    order_power appends gate-order * n_id extra copies of the cycle (their
    composite is the identity).  inverse_pair appends n_id dagger/copy pairs;
    its amplification bookkeeping assumes the daggered gates carry the same
    noise as the originals.  Inserted cycles are separated by empty Easy
    cycles so each stays independently twirlable.
    """
    hard = circuit.hard_cycles()
    if not spec.cycle_index < len(hard):
        raise ValueError(
            f"hard-cycle ordinal {spec.cycle_index} out of range (have {len(hard)})")
    pos, cycle = hard[spec.cycle_index]
    insert = []
    if spec.strategy == ORDER_POWER:
        for _ in range(_cycle_order(cycle) * spec.n_id):
            insert.extend([empty_easy_cycle(), cycle])
    else:
        for _ in range(spec.n_id):
            insert.extend([empty_easy_cycle(), _dagger_cycle(cycle), empty_easy_cycle(), cycle])
    new_cycles = circuit.cycles[: pos + 1] + tuple(insert) + circuit.cycles[pos + 1:]
    meta = dict(circuit.metadata)
    meta["fold_target"] = spec.cycle_index
    meta["fold_alpha"] = fold_factor(circuit, spec)
    meta["fold_strategy"] = spec.strategy
    return Circuit(circuit.n, circuit.d, new_cycles, meta)


def default_fold_specs(circuit: Circuit, n_id: int = 1, strategy: str = ORDER_POWER) -> tuple:
    """One FoldSpec per Hard cycle."""
    return tuple(
        FoldSpec(j, n_id, strategy) for j in range(len(circuit.hard_cycles())))


def fold_commutation_diagnostic(circuit: Circuit, spec: FoldSpec, noise) -> float:
    """Residual of the noise-commutes-with-the-cycle assumption behind the
    alpha bookkeeping: Frobenius distance between the dressing channel
    composed before vs after the cycle unitary, normalized by dim."""
    hard = circuit.hard_cycles()
    _pos, cycle = hard[spec.cycle_index]
    ch = noise.hard_channel(spec.cycle_index, cycle, circuit.n)
    if ch is None:
        return 0.0
    u = cycle_unitary(cycle, circuit.n, circuit.d)
    dim = circuit.dim
    # compare ch(U . U^H) with U ch(.) U^H on an operator basis via Choi-style sum
    total = 0.0
    for k in range(dim):
        basis_col = np.zeros((dim, dim), dtype=complex)
        basis_col[:, k] = 1.0 / np.sqrt(dim)
        before = ch.apply_matrix(u @ basis_col @ u.conj().T)
        after = u @ ch.apply_matrix(basis_col) @ u.conj().T
        total += float(np.linalg.norm(before - after)) ** 2
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# noiseless-output extrapolation


def nox_combine(base, folded: Sequence[tuple]):
    """base + sum_j (base - value_j) / (alpha_j - 1).

    Exact when each cycle's contribution to the estimate is linear in its
    noise strength; works elementwise for arrays.
    """
    out = np.asarray(base, dtype=float).copy()
    for alpha, value in folded:
        if alpha <= 1:
            raise ValueError(f"fold factor alpha must exceed 1, got {alpha}")
        out = out + (np.asarray(base, dtype=float) - np.asarray(value, dtype=float)) / (alpha - 1)
    if np.ndim(base) == 0:
        return float(out)
    return out


def nox_std_error(base_std: float, folded: Sequence[tuple]) -> float:
    """Quadrature propagation through the extrapolation weights: the base
    estimate carries weight 1 + sum 1/(alpha_j - 1), each copy 1/(alpha_j-1)."""
    weight = 1.0 + sum(1.0 / (alpha - 1) for alpha, _std in folded)
    var = (weight * base_std) ** 2
    for alpha, std in folded:
        var += (std / (alpha - 1)) ** 2
    return float(np.sqrt(var))


def nox_estimate(
    circuit: Circuit,
    observable,
    noise=None,
    cfg: RcConfig = RcConfig(),
    specs: Optional[Sequence[FoldSpec]] = None,
) -> MitigatedEstimate:
    """Randomized-compiled estimate extrapolated to zero added noise, with one
    folded copy per Hard cycle (default) or per given FoldSpec."""
    if specs is None:
        specs = default_fold_specs(circuit)
    base = rc_estimate(circuit, observable, noise=noise, cfg=cfg, seed_path=(0,))
    folded_values = []
    folded_stds = []
    alphas = []
    diagnostics = []
    for spec in specs:
        fcirc = fold(circuit, spec)
        alpha = fold_factor(circuit, spec)
        est = rc_estimate(fcirc, observable, noise=noise, cfg=cfg,
                          seed_path=(1, spec.cycle_index))
        folded_values.append((alpha, est.value))
        folded_stds.append((alpha, est.std_error))
        alphas.append(alpha)
        if noise is not None:
            diagnostics.append(fold_commutation_diagnostic(circuit, spec, noise))
    value = nox_combine(base.value, folded_values)
    std_error = nox_std_error(base.std_error, folded_stds)
    metadata = {
        "n_randomizations": cfg.n_randomizations,
        "shots": cfg.shots,
        "alphas": alphas,
        "n_id": [spec.n_id for spec in specs],
        "strategy": [spec.strategy for spec in specs],
        "base_value": base.value,
        "folded_values": [v for _a, v in folded_values],
        "commutation_residuals": diagnostics,
    }
    return MitigatedEstimate(value, std_error, METHOD_RC_NOX, metadata)


def nox_distribution(
    circuit: Circuit,
    noise=None,
    cfg: RcConfig = RcConfig(),
    specs: Optional[Sequence[FoldSpec]] = None,
    correct=None,
) -> tuple:
    """Outcome distribution extrapolated to zero added noise, outcome by
    outcome (each outcome probability is an indicator-observable expectation).

    correct: optional map applied to every measured distribution before the
    extrapolation (e.g. readout unfolding).  Returns (distribution, base,
    folded list of (alpha, distribution)); the extrapolated vector sums to one
    but can be quasi.
    """
    if specs is None:
        specs = default_fold_specs(circuit)
    base = rc_distribution(circuit, noise=noise, cfg=cfg, seed_path=(0,))
    if correct is not None:
        base = correct(base)
    folded = []
    for spec in specs:
        fcirc = fold(circuit, spec)
        alpha = fold_factor(circuit, spec)
        dist = rc_distribution(fcirc, noise=noise, cfg=cfg, seed_path=(1, spec.cycle_index))
        if correct is not None:
            dist = correct(dist)
        folded.append((alpha, dist))
    probs = nox_combine(base.probs, [(a, dist.probs) for a, dist in folded])
    quasi = bool(np.min(probs) < -1e-9)
    out = OutcomeDistribution(circuit.n, circuit.d, probs, quasi=quasi)
    return out, base, folded

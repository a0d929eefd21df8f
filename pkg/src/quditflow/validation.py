"""Runtime invariant battery for the `validate` subcommand.

These are fast self-checks of the algebra, channels, and estimators; the
full oracle-backed suite lives in the test tree.  Each check returns a
(name, passed, detail) row so the CLI can report and exit nonzero on any
failure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import utils
from .algebra import DensityMatrix, QuantumChannel, chain_channels
from .circuit import ghz_circuit, ghz_state, measure_distribution, parse, serialize, simulate
from .mitigation import RcConfig, hoeffding_bound, nox_combine, randomize
from .noise import (
    ConfusionMatrix,
    coherent_phase_error,
    depolarizing_channel,
    paper_default_noise,
    rcal_correct,
    stochastic_weyl_channel,
)
from .tomography import (
    coherent_fraction,
    decoherent_fidelity,
    fidelity,
    process_fidelity,
    reconstruct,
    transfer_matrix,
    twirled_transfer,
)
from .weyl import (
    PhasedWeyl,
    WeylLabel,
    all_labels,
    clifford_conjugate,
    czdag_gate,
    weyl_commutator_phase,
    weyl_compose,
    weyl_matrix,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rand_label(rng: np.random.Generator, d: int, n: int) -> WeylLabel:
    return WeylLabel(d, tuple(rng.integers(0, d, n)), tuple(rng.integers(0, d, n)))


def check_weyl_algebra(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 101)
    worst = 0.0
    for d in (2, 3, 5):
        tau = np.exp(1j * np.pi / d)
        for _ in range(30):
            a = _rand_label(rng, d, 1)
            b = _rand_label(rng, d, 1)
            ma, mb = weyl_matrix(a).data, weyl_matrix(b).data
            worst = max(worst, float(np.max(np.abs(ma.conj().T @ ma - np.eye(d)))))
            comp = weyl_compose(PhasedWeyl(a), PhasedWeyl(b))
            mc = weyl_matrix(comp.label).data * tau ** comp.phase_exp
            worst = max(worst, float(np.max(np.abs(ma @ mb - mc))))
            c = weyl_commutator_phase(a, b)
            omega = np.exp(2j * np.pi * c / d)
            worst = max(worst, float(np.max(np.abs(ma @ mb - omega * (mb @ ma)))))
    return CheckResult("weyl-algebra", worst < 1e-10, f"max deviation {worst:.2e}")


def check_one_design(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 102)
    worst = 0.0
    for d, n in ((2, 1), (3, 1), (3, 2), (5, 1)):
        dim = d**n
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        avg = np.zeros((dim, dim), dtype=complex)
        for label in all_labels(d, n):
            w = weyl_matrix(label).data
            avg += w @ rho @ w.conj().T
        avg /= d ** (2 * n)
        worst = max(worst, float(np.max(np.abs(avg - np.eye(dim) / dim))))
    return CheckResult("weyl-one-design", worst < 1e-10, f"max deviation {worst:.2e}")


def check_clifford_conjugation(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 103)
    gate = czdag_gate(3)
    u = gate.matrix
    worst = 0.0
    for _ in range(40):
        label = _rand_label(rng, 3, 2)
        out = clifford_conjugate(gate, (0, 1), PhasedWeyl(label))
        lhs = u @ weyl_matrix(label).data @ u.conj().T
        rhs = weyl_matrix(out.label).data * np.exp(1j * np.pi / 3) ** out.phase_exp
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    order = np.linalg.matrix_power(u, 3)
    worst = max(worst, float(np.max(np.abs(order - np.eye(9)))))
    return CheckResult("clifford-conjugation", worst < 1e-10, f"max deviation {worst:.2e}")


def check_channel_cptp(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 104)
    worst = 0.0
    channels = [
        depolarizing_channel(3, 1, 0.1),
        stochastic_weyl_channel({WeylLabel.single(3, 1, 1): 0.2}),
        coherent_phase_error((0.1, -0.05, 0.02, 0.3)),
        chain_channels(depolarizing_channel(3, 2, 0.05),
                       coherent_phase_error((0.1, 0.0, 0.0, 0.0))),
    ]
    for ch in channels:
        tp = sum(k.conj().T @ k for k in ch.kraus)
        worst = max(worst, float(np.max(np.abs(tp - np.eye(ch.dim)))))
        if not ch.is_cp():
            return CheckResult("channel-cptp", False, "Choi matrix not PSD")
    _ = rng
    return CheckResult("channel-cptp", worst < 1e-9, f"max TP deviation {worst:.2e}")


def check_preset_structure(seed: int) -> CheckResult:
    noise = paper_default_noise(n=3)
    circ = ghz_circuit(3, 3)
    dist = measure_distribution(circ, noise=noise).distribution
    s = float(dist.probs.sum())
    ok = abs(s - 1.0) < 1e-9 and noise.readout is not None and len(noise.readout) == 3
    _ = seed
    return CheckResult("preset-structure", ok, f"distribution mass {s:.12f}")


def check_rc_equivalence(seed: int) -> CheckResult:
    worst = 0.0
    ideal = ghz_state(3, 3)
    circ = ghz_circuit(3, 3)
    for i in range(5):
        compiled = randomize(circ, seed=utils.child_seed(seed, 105, i))
        rho = simulate(compiled)
        worst = max(worst, 1.0 - fidelity(rho, ideal))
    return CheckResult("rc-logical-equivalence", worst < 1e-10, f"max infidelity {worst:.2e}")


def check_twirl_diagonalization(seed: int) -> CheckResult:
    ch = chain_channels(
        coherent_phase_error((0.2, -0.1, 0.05, 0.15)),
        depolarizing_channel(3, 2, 0.02),
    )
    tm = transfer_matrix(ch, 3, 2)
    labels = list(all_labels(3, 2))
    twirled = twirled_transfer(tm, labels)
    off = twirled.data - np.diag(np.diag(twirled.data))
    mass = float(np.linalg.norm(off))
    f_before = process_fidelity(tm)
    f_after = process_fidelity(twirled)
    ok = mass < 1e-9 and abs(f_before - f_after) < 1e-9
    _ = seed
    return CheckResult("twirl-diagonalization", ok,
                       f"off-diagonal mass {mass:.2e}, fidelity shift {abs(f_before - f_after):.2e}")


def check_transfer_analytics(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 106)
    u, _ = np.linalg.qr(rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9)))
    tm_u = transfer_matrix(QuantumChannel.from_unitary(u), 3, 2)
    dev_unitary = abs(decoherent_fidelity(tm_u) - 1.0)
    ch = depolarizing_channel(3, 1, 0.1)
    tm = transfer_matrix(ch, 3, 1)
    row0 = float(np.max(np.abs(tm.data[0] - np.eye(9)[0])))
    gap = decoherent_fidelity(tm) - process_fidelity(tm)
    frac = coherent_fraction(tm)
    ok = dev_unitary < 1e-10 and row0 < 1e-10 and gap >= -1e-10 and (frac is not None and frac < 0.02)
    return CheckResult(
        "transfer-analytics", ok,
        f"unitary decoherent deviation {dev_unitary:.2e}, TP row {row0:.2e}, "
        f"stochastic coherent fraction {0.0 if frac is None else frac:.4f}")


def check_tomography_roundtrip(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 107)
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    expectations = {}
    for label in all_labels(3, 2):
        expectations[label] = complex(np.trace(weyl_matrix(label).data @ rho))
    rec = reconstruct(expectations, 2, 3)
    err = float(np.linalg.norm(rec.raw - rho))
    return CheckResult("tomography-roundtrip", err < 1e-9, f"reconstruction error {err:.2e}")


def check_rcal_inverse(seed: int) -> CheckResult:
    rng = utils.child_rng(seed, 108)
    confusions = [ConfusionMatrix.from_fidelities((0.994, 0.979, 0.974)) for _ in range(2)]
    probs = rng.dirichlet(np.ones(9))
    from .algebra import OutcomeDistribution
    from .noise import apply_per_qudit

    corrupted = apply_per_qudit([c.data for c in confusions], probs, 2, 3)
    corrected = rcal_correct(OutcomeDistribution(2, 3, corrupted), confusions)
    err = float(np.max(np.abs(corrected.probs - probs)))
    return CheckResult("rcal-inverse", err < 1e-10, f"round-trip error {err:.2e}")


def check_nox_combination(seed: int) -> CheckResult:
    # linear model E(alpha) = e0 + b*alpha must extrapolate to e0 exactly
    rng = utils.child_rng(seed, 109)
    e0, b = float(rng.normal()), float(rng.normal())
    base = e0 + b * 1.0
    folded = [(4, e0 + b * 4.0)]
    value = nox_combine(base, folded)
    err = abs(value - e0)
    return CheckResult("nox-linear-model", err < 1e-12, f"extrapolation error {err:.2e}")


def check_hoeffding(seed: int) -> CheckResult:
    val = hoeffding_bound(0.1, 200)
    want = 1.0 - np.exp(-4.0)
    err = abs(val - want)
    _ = seed
    return CheckResult("hoeffding-bound", err < 1e-12, f"bound {val:.6f}")


def check_serialization(seed: int) -> CheckResult:
    from .circuit import structurally_equal
    from .experiments import rcs_circuit

    circ = rcs_circuit(3, 2, seed=utils.child_seed(seed, 110))
    ok = structurally_equal(parse(serialize(circ)), circ)
    ghz_ok = structurally_equal(parse(serialize(ghz_circuit(3, 3))), ghz_circuit(3, 3))
    return CheckResult("circuit-serialization", ok and ghz_ok, "round-trip structural match")


def check_rc_config(seed: int) -> CheckResult:
    try:
        RcConfig(0, 0)
        return CheckResult("config-invariants", False, "accepted zero randomizations")
    except ValueError:
        pass
    try:
        ConfusionMatrix(np.array([[0.5, 0.7], [0.4, 0.3]]))
        return CheckResult("config-invariants", False, "accepted non-stochastic confusion")
    except Exception:
        pass
    _ = seed
    return CheckResult("config-invariants", True, "invalid inputs rejected")


ALL_CHECKS = (
    check_weyl_algebra,
    check_one_design,
    check_clifford_conjugation,
    check_channel_cptp,
    check_preset_structure,
    check_rc_equivalence,
    check_twirl_diagonalization,
    check_transfer_analytics,
    check_tomography_roundtrip,
    check_rcal_inverse,
    check_nox_combination,
    check_hoeffding,
    check_serialization,
    check_rc_config,
)


def validate_all(seed: int = 0) -> list:
    results = []
    for check in ALL_CHECKS:
        try:
            results.append(check(seed))
        except Exception as exc:  # a crash is a failure, not an abort
            results.append(CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return results

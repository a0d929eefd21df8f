"""Randomized compiling, cycle folding, and zero-added-noise extrapolation.

The twirl-equivalence oracle builds the twirled channel by direct summation
over all register Weyl labels, independent of the compiler.
"""
import numpy as np
import pytest

import helpers as h
from quditflow.algebra import OutcomeDistribution, QuantumChannel
from quditflow.circuit import (
    Circuit,
    CustomGate,
    Cycle,
    EASY,
    HARD,
    circuit_unitary,
    ghz_circuit,
    ghz_state,
    measure_distribution,
    simulate,
)
from quditflow.mitigation import (
    FoldSpec,
    INVERSE_PAIR,
    MitigatedEstimate,
    ORDER_POWER,
    RcConfig,
    bare_estimate,
    conjugate_by_cycle,
    default_fold_specs,
    draw_twirl_labels,
    fold,
    fold_factor,
    hoeffding_bound,
    nox_combine,
    nox_distribution,
    nox_estimate,
    nox_std_error,
    randomize,
    rc_distribution,
    rc_estimate,
)
from quditflow.noise import NoiseModel, NoiseRule, depolarizing_channel, paper_default_noise
from quditflow.weyl import PhasedWeyl, WeylLabel, all_labels, czdag_gate, weyl_matrix


def random_two_qudit_circuit(rng: np.random.Generator, d: int, hard_count: int) -> Circuit:
    cycles = []
    for _ in range(hard_count):
        gates = tuple(((i,), CustomGate(d, h.random_unitary(rng, d))) for i in range(2))
        cycles.append(Cycle(EASY, gates))
        cycles.append(Cycle(HARD, (((0, 1), czdag_gate(d)),)))
    cycles.append(Cycle(EASY, tuple(
        ((i,), CustomGate(d, h.random_unitary(rng, d))) for i in range(2))))
    return Circuit(2, d, tuple(cycles))


class TestRandomize:
    def test_logical_equivalence(self):
        rng = np.random.default_rng(21)
        for trial in range(20):
            d = (2, 3, 5)[trial % 3]
            circ = random_two_qudit_circuit(rng, d, 1 + trial % 2)
            compiled = randomize(circ, seed=trial)
            u = circuit_unitary(circ)
            v = circuit_unitary(compiled)
            # equal up to a global phase
            k = np.argmax(np.abs(u))
            idx = np.unravel_index(k, u.shape)
            phase = v[idx] / u[idx]
            assert abs(abs(phase) - 1.0) < 1e-10
            assert np.max(np.abs(v - phase * u)) < 1e-10

    def test_structure_preserved(self):
        circ = ghz_circuit(3, 3)
        compiled = randomize(circ, seed=5)
        assert len(compiled.cycles) == len(circ.cycles)
        for old, new in zip(circ.cycles, compiled.cycles):
            assert old.kind == new.kind
            if old.kind == HARD:
                assert new is old

    def test_identity_labels_change_nothing(self):
        circ = ghz_circuit(2, 3)
        ident = WeylLabel.identity(3, 2)
        compiled = randomize(circ, labels=[ident])
        assert np.allclose(circuit_unitary(compiled), circuit_unitary(circ), atol=1e-12)

    def test_metadata_records_draw(self):
        circ = ghz_circuit(3, 3)
        compiled = randomize(circ, seed=9)
        assert len(compiled.metadata["rc_twirl_labels"]) == 2
        assert len(compiled.metadata["rc_correction_phase_exps"]) == 2

    def test_label_count_checked(self):
        circ = ghz_circuit(3, 3)  # two hard cycles
        with pytest.raises(ValueError):
            randomize(circ, labels=[WeylLabel.identity(3, 3)])

    def test_label_register_checked(self):
        circ = ghz_circuit(2, 3)
        with pytest.raises(ValueError):
            randomize(circ, labels=[WeylLabel.identity(2, 2)])

    def test_draw_depends_on_seed(self):
        circ = ghz_circuit(3, 3)
        a = randomize(circ, seed=1).metadata["rc_twirl_labels"]
        b = randomize(circ, seed=1).metadata["rc_twirl_labels"]
        c = randomize(circ, seed=2).metadata["rc_twirl_labels"]
        assert a == b
        assert a != c


class TestConjugateByCycle:
    def test_matches_matrix_conjugation(self):
        rng = np.random.default_rng(22)
        d = 3
        cycle = Cycle(HARD, (((0, 1), czdag_gate(d)),))
        u = h.ref_czdag(d)
        for _ in range(15):
            label = WeylLabel(d, tuple(rng.integers(d, size=2)), tuple(rng.integers(d, size=2)))
            out = conjugate_by_cycle(cycle, PhasedWeyl(label))
            want = u @ h.ref_weyl(label.d, label.p, label.q) @ u.conj().T
            assert np.max(np.abs(out.matrix() - want)) < 1e-10


class TestExhaustiveTwirl:
    def test_average_equals_twirled_channel(self):
        # all 16 labels for d = 2 on one entangling cycle with a biased
        # non-Weyl channel; the oracle twirl is a direct label sum
        d = 2
        rng = np.random.default_rng(23)
        kraus = h.random_kraus(rng, 4, 3)
        noisy = QuantumChannel(tuple(kraus))
        model = NoiseModel(d=d, hard_rules={"czdag": NoiseRule((0, 1), noisy)})
        circ = random_two_qudit_circuit(rng, d, 1)

        labels = list(all_labels(d, 2))
        avg = np.zeros((4, 4), dtype=complex)
        for label in labels:
            compiled = randomize(circ, labels=[label])
            avg += simulate(compiled, noise=model).data
        avg /= len(labels)

        tw_kraus = []
        norm = 1.0 / np.sqrt(len(labels))
        for label in labels:
            w = h.ref_weyl(d, label.p, label.q)
            tw_kraus.extend(norm * w.conj().T @ k @ w for k in kraus)
        tw_model = NoiseModel(d=d, hard_rules={
            "czdag": NoiseRule((0, 1), QuantumChannel(tuple(tw_kraus)))})
        want = simulate(circ, noise=tw_model).data
        assert np.max(np.abs(avg - want)) < 1e-10


class TestEstimators:
    def test_bare_matches_direct_expectation(self):
        circ = ghz_circuit(2, 3)
        obs = np.diag([1.0] + [0.0] * 8)
        est = bare_estimate(circ, obs)
        assert est.method == "Bare"
        assert abs(est.value - 1.0 / 3.0) < 1e-12

    def test_rc_noiseless_is_exact(self):
        circ = ghz_circuit(2, 3)
        obs = ghz_state(2, 3).data
        est = rc_estimate(circ, obs, cfg=RcConfig(n_randomizations=8, seed=3))
        assert abs(est.value - 1.0) < 1e-10
        assert est.std_error < 1e-10

    def test_rc_seed_reproducible(self):
        circ = ghz_circuit(2, 3)
        obs = ghz_state(2, 3).data
        noise = paper_default_noise(n=2, with_readout=False)
        cfg = RcConfig(n_randomizations=4, shots=64, seed=11)
        a = rc_estimate(circ, obs, noise=noise, cfg=cfg)
        b = rc_estimate(circ, obs, noise=noise, cfg=cfg)
        assert a.value == b.value
        assert a.metadata["per_randomization"] == b.metadata["per_randomization"]

    def test_non_hermitian_observable_rejected(self):
        from quditflow.algebra import InvariantViolation
        circ = ghz_circuit(2, 3)
        obs = np.zeros((9, 9))
        obs[0, 1] = 1.0
        with pytest.raises(InvariantViolation):
            bare_estimate(circ, obs)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RcConfig(n_randomizations=0)
        with pytest.raises(ValueError):
            RcConfig(shots=-1)
        with pytest.raises(ValueError):
            MitigatedEstimate(0.5, -0.1, "RC")
        with pytest.raises(ValueError):
            MitigatedEstimate(0.5, 0.1, "magic")


class TestHoeffding:
    def test_frozen_value(self):
        # 1 - exp(-2 * 0.1^2 * 200) = 1 - exp(-4)
        assert abs(hoeffding_bound(0.1, 200) - 0.9816843611112658) < 1e-12

    def test_monotone_in_both_arguments(self):
        assert hoeffding_bound(0.1, 50) < hoeffding_bound(0.1, 200)
        assert hoeffding_bound(0.05, 200) < hoeffding_bound(0.1, 200)

    def test_domain(self):
        with pytest.raises(ValueError):
            hoeffding_bound(0.0, 10)
        with pytest.raises(ValueError):
            hoeffding_bound(1.0, 10)
        with pytest.raises(ValueError):
            hoeffding_bound(0.1, 0)


class TestFolding:
    def test_fold_factor_order_power(self):
        circ = ghz_circuit(2, 3)
        # the entangler has order 3, so one fold round gives alpha = 4
        assert fold_factor(circ, FoldSpec(0, 1)) == 4
        assert fold_factor(circ, FoldSpec(0, 2)) == 7
        assert fold_factor(circ, FoldSpec(0, 1, INVERSE_PAIR)) == 3

    def test_fold_preserves_logic(self):
        rng = np.random.default_rng(24)
        for strategy in (ORDER_POWER, INVERSE_PAIR):
            circ = random_two_qudit_circuit(rng, 3, 2)
            folded = fold(circ, FoldSpec(1, 1, strategy))
            assert np.allclose(circuit_unitary(folded), circuit_unitary(circ), atol=1e-10)

    def test_fold_adds_hard_cycles(self):
        circ = ghz_circuit(2, 3)
        folded = fold(circ, FoldSpec(0, 1))
        assert len(folded.hard_cycles()) == 4
        assert folded.metadata["fold_alpha"] == 4

    def test_fold_amplifies_stochastic_noise(self):
        # depolarizing commutes with everything, so alpha applications
        # compose to the closed-form effective rate
        r = 0.05
        model = NoiseModel(d=3, hard_rules={
            "czdag": NoiseRule((0, 1), depolarizing_channel(3, 2, r))})
        circ = ghz_circuit(2, 3)
        folded = fold(circ, FoldSpec(0, 1))
        got = simulate(folded, noise=model).data
        r_eff = 1.0 - (1.0 - r) ** 4
        ideal = simulate(circ).data
        want = (1 - r_eff) * ideal + r_eff * np.eye(9) / 9
        assert np.max(np.abs(got - want)) < 1e-12

    def test_out_of_range_index(self):
        circ = ghz_circuit(2, 3)
        with pytest.raises(ValueError):
            fold(circ, FoldSpec(1, 1))
        with pytest.raises(ValueError):
            fold_factor(circ, FoldSpec(5, 1))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            FoldSpec(-1, 1)
        with pytest.raises(ValueError):
            FoldSpec(0, 0)
        with pytest.raises(ValueError):
            FoldSpec(0, 1, "triple")

    def test_default_specs_cover_hard_cycles(self):
        circ = ghz_circuit(3, 3)
        specs = default_fold_specs(circ, n_id=2)
        assert [s.cycle_index for s in specs] == [0, 1]
        assert all(s.n_id == 2 for s in specs)


class TestNoxCombine:
    def test_single_fold_closed_form(self):
        assert abs(nox_combine(0.9, [(4, 0.6)]) - 1.0) < 1e-15

    def test_recovers_linear_model_exactly(self):
        # value(alpha_j) = ideal - sum_i c_i - c_j (alpha_j - 1): plugging the
        # synthetic values in must return `ideal` up to rounding
        rng = np.random.default_rng(25)
        for _ in range(20):
            ideal = rng.normal()
            costs = rng.uniform(0.01, 0.1, size=3)
            alphas = rng.integers(2, 7, size=3)
            base = ideal - costs.sum()
            folded = [(int(a), base - c * (a - 1)) for a, c in zip(alphas, costs)]
            got = nox_combine(base, folded)
            assert abs(got - ideal) < 1e-12

    def test_elementwise_on_arrays(self):
        base = np.array([0.9, 0.1])
        out = nox_combine(base, [(4, np.array([0.6, 0.4]))])
        assert np.allclose(out, [1.0, 0.0], atol=1e-15)

    def test_alpha_must_exceed_one(self):
        with pytest.raises(ValueError):
            nox_combine(0.5, [(1, 0.4)])

    def test_std_error_propagation(self):
        # weights: base 1 + 1/3, fold 1/3
        got = nox_std_error(0.03, [(4, 0.06)])
        want = np.sqrt((4.0 / 3.0 * 0.03) ** 2 + (0.06 / 3.0) ** 2)
        assert abs(got - want) < 1e-15


class TestNoxEstimate:
    def test_depolarizing_closed_form(self):
        # stochastic noise is twirl-invariant, so every randomization gives the
        # same exact value and the pipeline reduces to the two-point formula
        r = 0.06
        model = NoiseModel(d=3, hard_rules={
            "czdag": NoiseRule((0, 1), depolarizing_channel(3, 2, r))})
        circ = ghz_circuit(2, 3)
        obs = np.zeros((9, 9))
        obs[0, 0] = 1.0
        est = nox_estimate(circ, obs, noise=model, cfg=RcConfig(n_randomizations=3, seed=0))
        p_base = (1 - r) / 3 + r / 9
        r4 = 1 - (1 - r) ** 4
        p_fold = (1 - r4) / 3 + r4 / 9
        want = p_base + (p_base - p_fold) / 3.0
        assert abs(est.value - want) < 1e-12
        assert est.method == "RC+NOX"
        assert est.metadata["alphas"] == [4]

    def test_noiseless_passthrough(self):
        circ = ghz_circuit(2, 3)
        obs = ghz_state(2, 3).data
        est = nox_estimate(circ, obs, cfg=RcConfig(n_randomizations=4, seed=1))
        assert abs(est.value - 1.0) < 1e-10

    def test_metadata_consistent(self):
        model = paper_default_noise(n=2, with_readout=False)
        circ = ghz_circuit(2, 3)
        obs = ghz_state(2, 3).data
        est = nox_estimate(circ, obs, noise=model, cfg=RcConfig(n_randomizations=4, seed=2))
        base = est.metadata["base_value"]
        folded = list(zip(est.metadata["alphas"], est.metadata["folded_values"]))
        assert abs(est.value - nox_combine(base, folded)) < 1e-12
        assert len(est.metadata["commutation_residuals"]) == 1

    def test_moves_toward_ideal_under_coherent_noise(self):
        model = paper_default_noise(n=2, with_readout=False)
        circ = ghz_circuit(2, 3)
        obs = ghz_state(2, 3).data
        cfg = RcConfig(n_randomizations=12, seed=4)
        rc = rc_estimate(circ, obs, noise=model, cfg=cfg)
        nox = nox_estimate(circ, obs, noise=model, cfg=cfg)
        assert abs(1.0 - nox.value) < abs(1.0 - rc.value)


class TestDistributions:
    def test_rc_distribution_noiseless(self):
        circ = ghz_circuit(2, 3)
        dist = rc_distribution(circ, cfg=RcConfig(n_randomizations=3, seed=6))
        want = np.zeros(9)
        want[[0, 4, 8]] = 1.0 / 3.0
        assert np.allclose(dist.probs, want, atol=1e-10)

    def test_nox_distribution_matches_componentwise_formula(self):
        r = 0.08
        model = NoiseModel(d=3, hard_rules={
            "czdag": NoiseRule((0, 1), depolarizing_channel(3, 2, r))})
        circ = ghz_circuit(2, 3)
        cfg = RcConfig(n_randomizations=2, seed=7)
        out, base, folded = nox_distribution(circ, noise=model, cfg=cfg)
        manual = nox_combine(base.probs, [(a, d.probs) for a, d in folded])
        assert np.allclose(out.probs, manual, atol=1e-12)
        assert abs(out.probs.sum() - 1.0) < 1e-9
        assert out.quasi == bool(out.probs.min() < -1e-9)

    def test_nox_distribution_correction_hook(self):
        # the correct() hook sees base and folded distributions alike
        seen = []

        def spy(dist):
            seen.append(dist)
            return dist

        circ = ghz_circuit(2, 3)
        nox_distribution(circ, cfg=RcConfig(n_randomizations=1, seed=8), correct=spy)
        assert len(seen) == 2  # base plus one folded copy

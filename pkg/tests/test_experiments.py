"""Experiment drivers: small, fast configurations exercising determinism,
noiseless baselines, and the phase-characterization oracle."""
import json

import numpy as np
import pytest

from quditflow.circuit import circuit_unitary
from quditflow.experiments import (
    ExperimentConfig,
    characterize_entangling_phase,
    ghz_experiment,
    n_id_sweep,
    phase_characterization,
    rcal_experiment,
    rcs_circuit,
    rcs_experiment,
    resolve_noise,
    run_experiment,
    tomo_experiment,
    twirl_decay_study,
)
from quditflow.noise import (
    NoiseModel,
    NoiseRule,
    coherent_phase_error,
    paper_default_noise,
)
from quditflow.utils import dumps_canonical


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=0)
        with pytest.raises(ValueError):
            ExperimentConfig(shots=-5)
        with pytest.raises(ValueError):
            ExperimentConfig(n_randomizations=0)
        with pytest.raises(ValueError):
            ExperimentConfig(twirl_grid=(0, 2))
        with pytest.raises(ValueError):
            ExperimentConfig(sweep_points=3)

    def test_echo_excludes_workers(self):
        cfg = ExperimentConfig(workers=4, depths=(1, 2))
        echoed = cfg.echo()
        assert "workers" not in echoed
        assert echoed["depths"] == [1, 2]
        assert echoed["noise"] == "paper-default"

    def test_resolve_noise(self):
        assert resolve_noise(ExperimentConfig(noise="none")) is None
        model = resolve_noise(ExperimentConfig(n=2, noise="paper-default"))
        assert isinstance(model, NoiseModel)
        custom = paper_default_noise(n=2)
        assert resolve_noise(ExperimentConfig(noise=custom)) is custom
        with pytest.raises(ValueError):
            resolve_noise(ExperimentConfig(noise="device-x"))


class TestRcsCircuit:
    def test_structure(self):
        circ = rcs_circuit(2, 3, seed=0)
        assert len(circ.hard_cycles()) == 3
        assert len(circ.cycles) == 7
        assert circ.metadata["depth"] == 3

    def test_three_qudit_pairs_alternate(self):
        circ = rcs_circuit(3, 4, seed=1)
        pairs = [cycle.gates[0][0] for _pos, cycle in circ.hard_cycles()]
        assert pairs == [(0, 1), (1, 2), (0, 1), (1, 2)]

    def test_seed_determinism(self):
        a = circuit_unitary(rcs_circuit(2, 2, seed=7))
        b = circuit_unitary(rcs_circuit(2, 2, seed=7))
        c = circuit_unitary(rcs_circuit(2, 2, seed=8))
        assert np.array_equal(a, b)
        assert not np.allclose(a, c, atol=1e-3)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            rcs_circuit(4, 2)
        with pytest.raises(ValueError):
            rcs_circuit(2, 0)


class TestGhzExperiment:
    def test_noiseless_everything_is_unity(self):
        cfg = ExperimentConfig(kind="ghz", n=2, noise="none", shots=0,
                               n_randomizations=2, seed=3)
        rep = ghz_experiment(cfg)
        for key in ("bare", "rc", "rc_nox"):
            assert abs(rep.results["fidelity"][key] - 1.0) < 1e-9
            assert abs(rep.results["purified_fidelity"][key] - 1.0) < 1e-9
        assert rep.results["infidelity_reduction"]["rc_nox"] == 1.0
        assert rep.results["quasi_setting_count"] == 0
        assert rep.results["settings"] == 81
        assert rep.results["cycle_noise"] == []
        assert len(rep.metrics) == 3

    def test_deterministic_documents(self):
        cfg = ExperimentConfig(kind="ghz", n=2, shots=16, n_randomizations=2, seed=5)
        a = dumps_canonical(ghz_experiment(cfg).to_document())
        b = dumps_canonical(ghz_experiment(cfg).to_document())
        assert a == b

    def test_seed_matters(self):
        base = dict(kind="ghz", n=2, shots=16, n_randomizations=2)
        a = ghz_experiment(ExperimentConfig(seed=1, **base))
        b = ghz_experiment(ExperimentConfig(seed=2, **base))
        assert a.results["fidelity"]["rc"] != b.results["fidelity"]["rc"]


class TestRcsExperiment:
    def test_noiseless_variation_distance_zero(self):
        cfg = ExperimentConfig(kind="rcs", n=2, noise="none", shots=0,
                               n_randomizations=2, instances=2, depths=(1, 2), seed=4)
        rep = rcs_experiment(cfg)
        assert rep.results["depths"] == [1, 2]
        assert rep.results["n_id"] == 3
        for row in rep.metrics:
            assert row["vd_bare"] < 1e-12
            assert row["vd_mitigated"] < 1e-12
            assert row["quasi"] == 0
        assert rep.results["fractional_improvement"] == 0.0
        assert len(rep.metrics) == 4

    def test_deterministic_documents(self):
        cfg = ExperimentConfig(kind="rcs", n=2, shots=8, n_randomizations=2,
                               instances=1, depths=(1,), seed=6)
        a = dumps_canonical(rcs_experiment(cfg).to_document())
        b = dumps_canonical(rcs_experiment(cfg).to_document())
        assert a == b

    def test_noisy_rows_in_range(self):
        cfg = ExperimentConfig(kind="rcs", n=2, shots=0, n_randomizations=2,
                               instances=2, depths=(1,), seed=7)
        rep = rcs_experiment(cfg)
        for row in rep.metrics:
            assert 0.0 <= row["vd_bare"] <= 1.0
            assert 0.0 <= row["vd_mitigated"] <= 1.0
        by_depth = rep.results["by_depth"][0]
        assert set(by_depth) >= {"depth", "mean_vd_bare", "mean_vd_mitigated",
                                 "sem_vd_bare", "sem_vd_mitigated", "improvement"}


class TestNidSweep:
    def test_noiseless_paired_diffs_vanish(self):
        cfg = ExperimentConfig(kind="nid-sweep", n=2, noise="none", shots=0,
                               n_randomizations=2, instances=2, depths=(1,),
                               n_id_list=(1, 2), seed=8)
        rep = n_id_sweep(cfg)
        assert rep.results["n_id_list"] == [1, 2]
        for row in rep.results["paired_diff"]:
            assert abs(row["mean_diff"]) < 1e-12
        assert len(rep.results["summary"]) == 2
        assert {r["n_id"] for r in rep.metrics} == {1, 2}


class TestTwirlStudy:
    def test_small_run_calibration_and_decay(self):
        cfg = ExperimentConfig(kind="twirl-study", dims=(2,), trials=3,
                               twirl_grid=(1, 2), seed=9)
        rep = twirl_decay_study(cfg)
        entry = rep.results["per_dim"][0]
        assert entry["d"] == 2
        assert entry["n"] == 2
        # a single-label twirl is a unitary conjugation: fraction preserved
        assert abs(entry["start_fraction"] - 0.70) < 0.01
        curves = rep.plotdata["decay_curves"]
        assert curves[1]["mean_fraction"] < curves[0]["mean_fraction"]
        assert entry["floor_mean"] < 0.2

    def test_agreement_rows_cover_pairs(self):
        cfg = ExperimentConfig(kind="twirl-study", dims=(2, 5), trials=2,
                               twirl_grid=(1, 2), seed=10)
        rep = twirl_decay_study(cfg)
        assert len(rep.results["agreement"]) == 2  # one dim pair, two N values
        for row in rep.results["agreement"]:
            assert row["agrees"] in (0, 1)


class TestPhaseCharacterization:
    def test_noiseless_matches_ideal_phase(self):
        for control in range(3):
            fit = characterize_entangling_phase(None, control)
            assert abs(fit.delta) < 1e-9
            assert fit.fit_ok
            assert fit.contrast == pytest.approx(1.0, abs=1e-9)
            assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_recovers_injected_lag(self):
        # +0.1 rad lag on |11> shows up for control level 1
        lag = 0.1
        model = NoiseModel(d=3, hard_rules={
            "czdag": NoiseRule((0, 1), coherent_phase_error((lag, 0.0, 0.0, 0.0)))})
        fit = characterize_entangling_phase(model, 1)
        assert fit.delta == pytest.approx(lag, abs=1e-9)
        # the |21> lag belongs to control level 2
        model2 = NoiseModel(d=3, hard_rules={
            "czdag": NoiseRule((0, 1), coherent_phase_error((0.0, 0.0, lag, 0.0)))})
        fit2 = characterize_entangling_phase(model2, 2)
        assert fit2.delta == pytest.approx(lag, abs=1e-9)
        assert characterize_entangling_phase(model2, 1).delta == pytest.approx(0.0, abs=1e-9)

    def test_spectator_sees_nothing_ideally(self):
        fit = characterize_entangling_phase(None, 1, spectator=True)
        assert fit.ideal_theta == 0.0
        assert abs(fit.delta) < 1e-9

    def test_sampled_fit_stays_ok(self):
        fit = characterize_entangling_phase(None, 0, shots=4096, seed=11)
        assert fit.fit_ok
        assert abs(fit.delta) < 0.1

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            characterize_entangling_phase(None, 3)
        with pytest.raises(ValueError):
            characterize_entangling_phase(None, 0, d=2)

    def test_driver_rolls_up(self):
        cfg = ExperimentConfig(kind="phase-char", n=2, noise="none", shots=0,
                               sweep_points=8, seed=12)
        rep = phase_characterization(cfg)
        assert len(rep.metrics) == 3
        assert rep.results["all_fits_ok"]


class TestRcalExperiment:
    def test_exact_mode_recovers_preset(self):
        cfg = ExperimentConfig(kind="rcal", n=3, shots=0, seed=13)
        rep = rcal_experiment(cfg)
        assert rep.results["max_entry_error"] < 1e-15
        assert rep.results["calibration_circuits"] == 3
        diag = {(m["qudit"], m["level"]): m["fidelity_exact"] for m in rep.metrics}
        from quditflow.noise import READOUT_FIDELITIES
        for i in range(3):
            for k in range(3):
                assert diag[(i, k)] == pytest.approx(READOUT_FIDELITIES[i][k], abs=1e-12)


class TestTomoExperiment:
    def test_noiseless_round_trip(self):
        cfg = ExperimentConfig(kind="tomo", n=2, noise="none", shots=0, seed=14)
        rep = tomo_experiment(cfg)
        assert abs(rep.results["fidelity"] - 1.0) < 1e-9
        assert rep.results["settings"] == 81


class TestDispatch:
    def test_unknown_kind(self):
        cfg = ExperimentConfig(kind="ghz")
        object.__setattr__(cfg, "kind", "teleport")
        with pytest.raises(ValueError):
            run_experiment(cfg)

    def test_dispatch_routes(self):
        cfg = ExperimentConfig(kind="rcal", n=2, shots=0, seed=15)
        rep = run_experiment(cfg)
        assert rep.kind == "rcal"

    def test_document_is_json_clean(self):
        cfg = ExperimentConfig(kind="tomo", n=2, noise="none", shots=0, seed=16)
        doc = run_experiment(cfg).to_document()
        parsed = json.loads(dumps_canonical(doc))
        assert parsed["kind"] == "tomo"
        assert parsed["version"] == doc["version"]

"""End-to-end study drivers.

Each driver consumes an ExperimentConfig and returns an ExperimentReport
whose contents are a pure function of (config, seed): all randomness is
drawn along explicit task paths with utils.child_seed, so results do not
depend on the worker count or on execution order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Optional

import numpy as np

from . import utils
from .algebra import (
    DensityMatrix,
    QuantumChannel,
    variation_distance,
)
from .circuit import (
    EASY,
    HARD,
    Circuit,
    CustomGate,
    Cycle,
    HaarUnitaryGate,
    WeylGate,
    ghz_circuit,
    ghz_state,
    measure_distribution,
)
from .mitigation import (
    ORDER_POWER,
    RcConfig,
    default_fold_specs,
    fold_commutation_diagnostic,
    nox_distribution,
)
from .noise import (
    NoiseModel,
    paper_default_noise,
    rcal_circuits,
    rcal_confusion,
    rcal_correct,
)
from .tomography import (
    TransferMatrix,
    coherent_fraction,
    expectation_from_distribution,
    fidelity,
    process_fidelity,
    purify,
    reconstruct,
    setting_circuit,
    state_tomography,
    tomo_settings,
    transfer_matrix,
    twirled_transfer,
)
from .weyl import WeylLabel, all_labels, czdag_gate

REPORT_VERSION = "qf-report/1"

METHOD_KEYS = ("bare", "rc", "rc_nox")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by every driver; kind-specific fields are ignored by
    drivers that do not use them.

    n_id defaults per driver when left as None (1 for the entangled-state
    study, 3 for random-circuit sampling).  noise accepts "paper-default",
    "none", or a NoiseModel instance.  workers only affects scheduling,
    never results, and is not echoed into reports.
    """

    kind: str = "ghz"
    n: int = 3
    d: int = 3
    depths: tuple = ()
    n_randomizations: int = 20
    shots: int = 1024
    n_id: Optional[int] = None
    fold_strategy: str = ORDER_POWER
    noise: object = "paper-default"
    seed: int = 0
    instances: int = 20
    trials: int = 100
    twirl_grid: tuple = (1, 2, 3, 4)
    dims: tuple = (2, 3, 5)
    n_id_list: tuple = (1, 2, 3)
    sweep_points: int = 12
    spectator: bool = False
    rcal_shots: int = 0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.d < 2:
            raise ValueError("need n >= 1 qudits of dimension d >= 2")
        if self.n_randomizations < 1:
            raise ValueError("need at least one randomization")
        if self.shots < 0 or self.rcal_shots < 0:
            raise ValueError("shot counts must be non-negative")
        if self.instances < 1 or self.trials < 1:
            raise ValueError("instances and trials must be positive")
        if self.n_id is not None and self.n_id < 1:
            raise ValueError("n_id must be positive")
        if self.sweep_points < 4:
            raise ValueError("phase sweeps need at least four points")
        if any(int(x) < 1 for x in self.twirl_grid):
            raise ValueError("twirl sample counts must be positive")
        if any(int(x) < 1 for x in self.n_id_list):
            raise ValueError("n_id values must be positive")

    def describe_noise(self) -> str:
        if self.noise is None or self.noise == "none":
            return "none"
        if isinstance(self.noise, str):
            return self.noise
        meta = getattr(self.noise, "metadata", {}) or {}
        name = meta.get("preset") or meta.get("name")
        return str(name) if name else "custom"

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "workers":
                continue
            if f.name == "noise":
                out["noise"] = self.describe_noise()
                continue
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class ExperimentReport:
    """Structured study output.

    metrics rows become metrics.csv; plotdata tables become one CSV each.
    Nothing here depends on wall-clock time or worker count, so serializing
    the same (config, seed) twice yields identical bytes.
    """

    kind: str
    config: dict
    results: dict
    metrics: list
    plotdata: dict
    seed: Optional[int]
    version: str = REPORT_VERSION

    def to_document(self) -> dict:
        return {
            "version": self.version,
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "results": self.results,
            "metrics": list(self.metrics),
            "plotdata": {k: list(v) for k, v in self.plotdata.items()},
        }


def resolve_noise(config: ExperimentConfig, n: Optional[int] = None) -> Optional[NoiseModel]:
    """Turn the config's noise field into a model for an n-qudit register
    (defaults to config.n)."""
    spec = config.noise
    if spec is None or spec == "none":
        return None
    if isinstance(spec, NoiseModel):
        return spec
    if spec == "paper-default":
        return paper_default_noise(n=config.n if n is None else n, d=config.d)
    raise ValueError(f"unknown noise spec {spec!r}")


def _confusions(noise: Optional[NoiseModel], config: ExperimentConfig):
    """Readout-calibration matrices for the run, or None when the model has
    no readout confusion to undo."""
    if noise is None or noise.readout is None:
        return None
    return rcal_confusion(
        noise, config.n, config.d, shots=config.rcal_shots,
        seed=utils.child_seed(config.seed, 9),
    )


def _corrector(confusions) -> Optional[Callable]:
    if confusions is None:
        return None
    return lambda dist: rcal_correct(dist, confusions)


def _resolved_n_id(config: ExperimentConfig, default: int) -> int:
    return default if config.n_id is None else config.n_id


# ---------------------------------------------------------------------------
# entangled-state study


def _noise_cycle_diagnostics(noise: Optional[NoiseModel], circuit: Circuit) -> list:
    """Coherent share of the dressing channel on each distinct Hard cycle."""
    if noise is None:
        return []
    out = []
    seen = set()
    for ordinal, (_pos, cycle) in enumerate(circuit.hard_cycles()):
        ch = noise.hard_channel(ordinal, cycle, circuit.n)
        key = tuple(sorted(cycle.support))
        if ch is None or key in seen:
            continue
        seen.add(key)
        tm = transfer_matrix(ch, circuit.d, circuit.n)
        f_proc = process_fidelity(tm)
        frac = coherent_fraction(tm)
        out.append({
            "support": list(key),
            "process_fidelity": f_proc,
            "coherent_fraction": float("nan") if frac is None else frac,
        })
    return out


def ghz_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Full-state tomography of the entangler chain under three read-outs:
    bare, randomized compiling, and randomized compiling with noiseless
    output extrapolation.

    Per tomography setting the budget is 1 bare run at shots*N (so the bare
    baseline sees the same total shot count) plus N randomizations each for
    the base circuit and one fold per distinct Hard cycle.  Readout
    calibration, when the model has confusion, is undone on every measured
    distribution before estimation.
    """
    noise = resolve_noise(config)
    n, d = config.n, config.d
    base = ghz_circuit(n, d)
    ideal = ghz_state(n, d)
    confusions = _confusions(noise, config)
    correct = _corrector(confusions)
    n_id = _resolved_n_id(config, 1)
    settings = tomo_settings(n, d)
    shots_bare = config.shots * config.n_randomizations

    def run_setting(item):
        idx, setting = item
        circ = setting_circuit(base, setting)
        cfg = RcConfig(config.n_randomizations, config.shots,
                       seed=utils.child_seed(config.seed, 10, idx))
        bare_res = measure_distribution(
            circ, noise=noise, shots=shots_bare,
            seed=utils.child_seed(config.seed, 11, idx))
        bare_dist = bare_res.distribution
        if correct is not None:
            bare_dist = correct(bare_dist)
        specs = default_fold_specs(circ, n_id=n_id, strategy=config.fold_strategy)
        mit_dist, rc_dist_corr, _folded = nox_distribution(
            circ, noise=noise, cfg=cfg, specs=specs, correct=correct)
        return (
            expectation_from_distribution(setting, bare_dist),
            expectation_from_distribution(setting, rc_dist_corr),
            expectation_from_distribution(setting, mit_dist),
            bool(mit_dist.quasi),
        )

    rows = utils.parallel_map(run_setting, list(enumerate(settings)), config.workers)
    per_method = {key: {} for key in METHOD_KEYS}
    quasi_count = 0
    for setting, (e_bare, e_rc, e_nox, quasi) in zip(settings, rows):
        per_method["bare"][setting] = e_bare
        per_method["rc"][setting] = e_rc
        per_method["rc_nox"][setting] = e_nox
        quasi_count += int(quasi)

    results: dict = {
        "fidelity": {},
        "raw_fidelity": {},
        "purity": {},
        "purified_fidelity": {},
        "purify_converged": {},
        "purify_residual": {},
    }
    metrics = []
    for key in METHOD_KEYS:
        rec = reconstruct(per_method[key], n, d)
        f_proj = fidelity(rec.state, ideal)
        f_raw = float(np.real(np.trace(ideal.data @ rec.raw)))
        pur = purify(rec.state)
        trace = float(np.real(np.trace(pur.data)))
        pur_state = DensityMatrix(pur.data / trace) if trace > 0.5 else rec.state
        f_pur = fidelity(pur_state, ideal)
        purity = float(np.real(np.trace(rec.state.data @ rec.state.data)))
        results["fidelity"][key] = f_proj
        results["raw_fidelity"][key] = f_raw
        results["purity"][key] = purity
        results["purified_fidelity"][key] = f_pur
        results["purify_converged"][key] = bool(pur.converged)
        results["purify_residual"][key] = pur.residual
        metrics.append({
            "method": key,
            "fidelity": f_proj,
            "raw_fidelity": f_raw,
            "purity": purity,
            "purified_fidelity": f_pur,
        })

    f = results["fidelity"]
    results["infidelity_reduction"] = {
        "rc": _infidelity_ratio(f["bare"], f["rc"]),
        "rc_nox": _infidelity_ratio(f["bare"], f["rc_nox"]),
    }
    results["quasi_setting_count"] = quasi_count
    results["settings"] = len(settings)
    results["shots_bare_per_setting"] = shots_bare
    results["n_id"] = n_id
    results["cycle_noise"] = _noise_cycle_diagnostics(noise, base)
    if noise is not None:
        specs = default_fold_specs(base, n_id=n_id, strategy=config.fold_strategy)
        results["fold_commutation_residual"] = [
            fold_commutation_diagnostic(base, spec, noise) for spec in specs
        ]
    return ExperimentReport(
        kind="ghz", config=config.echo(), results=results, metrics=metrics,
        plotdata={"ghz_fidelities": metrics}, seed=config.seed,
    )


def _infidelity_ratio(f_bare: float, f_better: float) -> float:
    denom = 1.0 - f_better
    if denom <= 1e-15:
        return float("inf") if 1.0 - f_bare > 1e-15 else 1.0
    return (1.0 - f_bare) / denom


# ---------------------------------------------------------------------------
# random-circuit sampling


def rcs_circuit(n: int, depth: int, seed=None, d: int = 3) -> Circuit:
    """depth repetitions of [Haar-random single-qudit Easy cycle; one
    entangler Hard cycle] closed by a final Haar Easy cycle.

    n = 2 uses the (0, 1) entangler throughout; n = 3 alternates (0, 1) and
    (1, 2) across layers, starting at (0, 1).
    """
    if n not in (2, 3):
        raise ValueError("random-circuit sampling is defined for 2 or 3 qudits")
    if depth < 1:
        raise ValueError("depth must be positive")
    rng = utils.child_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    czd = czdag_gate(d)
    cycles = []
    for layer in range(depth):
        easy = tuple(
            ((q,), HaarUnitaryGate.sample(d, rng, seed_tag=f"layer{layer}-q{q}"))
            for q in range(n)
        )
        cycles.append(Cycle(EASY, easy))
        pair = (0, 1) if (n == 2 or layer % 2 == 0) else (1, 2)
        cycles.append(Cycle(HARD, ((pair, czd),)))
    final = tuple(
        ((q,), HaarUnitaryGate.sample(d, rng, seed_tag=f"final-q{q}")) for q in range(n)
    )
    cycles.append(Cycle(EASY, final))
    return Circuit(n, d, tuple(cycles), {"family": "rcs", "depth": depth})


def _rcs_instance(config: ExperimentConfig, noise, correct, depth: int,
                  instance: int, n_id: int) -> dict:
    circ = rcs_circuit(config.n, depth, seed=utils.child_seed(config.seed, 5, depth, instance),
                       d=config.d)
    ideal = measure_distribution(circ, noise=None, shots=0).distribution
    cfg = RcConfig(config.n_randomizations, config.shots,
                   seed=utils.child_seed(config.seed, 6, depth, instance, n_id))
    specs = default_fold_specs(circ, n_id=n_id, strategy=config.fold_strategy)
    mit, _base, _folded = nox_distribution(circ, noise=noise, cfg=cfg, specs=specs,
                                           correct=correct)
    shots_bare = config.shots * config.n_randomizations
    bare = measure_distribution(
        circ, noise=noise, shots=shots_bare,
        seed=utils.child_seed(config.seed, 7, depth, instance)).distribution
    if correct is not None:
        bare = correct(bare)
    return {
        "depth": depth,
        "instance": instance,
        "n_id": n_id,
        "vd_bare": variation_distance(ideal, bare),
        "vd_mitigated": variation_distance(ideal, mit),
        "quasi": int(mit.quasi),
    }


def rcs_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Variation distance to the ideal output of Haar-random layered
    circuits, bare versus mitigated, over a depth grid.

    The bare baseline is measured at shots*N so both methods spend the same
    total budget.  Mitigated probabilities are assembled outcome by outcome
    from extrapolated indicator expectations; quasi results are flagged and
    their variation distance computed as-is.
    """
    depths = tuple(int(x) for x in config.depths) or ((1, 2, 3, 6) if config.n == 2 else (2, 4, 6))
    noise = resolve_noise(config)
    correct = _corrector(_confusions(noise, config))
    n_id = _resolved_n_id(config, 3)

    tasks = [(depth, inst) for depth in depths for inst in range(config.instances)]
    rows = utils.parallel_map(
        lambda t: _rcs_instance(config, noise, correct, t[0], t[1], n_id),
        tasks, config.workers)

    by_depth = []
    total_bare = []
    total_mit = []
    for depth in depths:
        sub_b = np.array([r["vd_bare"] for r in rows if r["depth"] == depth])
        sub_m = np.array([r["vd_mitigated"] for r in rows if r["depth"] == depth])
        total_bare.extend(sub_b)
        total_mit.extend(sub_m)
        by_depth.append({
            "depth": depth,
            "mean_vd_bare": float(sub_b.mean()),
            "sem_vd_bare": _sem(sub_b),
            "mean_vd_mitigated": float(sub_m.mean()),
            "sem_vd_mitigated": _sem(sub_m),
            "improvement": 1.0 - float(sub_m.mean()) / float(sub_b.mean()) if sub_b.mean() > 0 else 0.0,
        })
    mean_bare = float(np.mean(total_bare))
    mean_mit = float(np.mean(total_mit))
    results = {
        "depths": list(depths),
        "n_id": n_id,
        "by_depth": by_depth,
        "mean_vd_bare": mean_bare,
        "mean_vd_mitigated": mean_mit,
        "fractional_improvement": 1.0 - mean_mit / mean_bare if mean_bare > 0 else 0.0,
        "quasi_count": int(sum(r["quasi"] for r in rows)),
    }
    return ExperimentReport(
        kind="rcs", config=config.echo(), results=results, metrics=rows,
        plotdata={"vd_by_depth": by_depth, "vd_instances": rows}, seed=config.seed,
    )


def _sem(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def n_id_sweep(config: ExperimentConfig) -> ExperimentReport:
    """Mitigated variation distance as a function of the fold count n_id,
    with circuits and bare baselines shared across n_id values so the
    comparison is paired per instance."""
    depths = tuple(int(x) for x in config.depths) or (1, 6)
    noise = resolve_noise(config)
    correct = _corrector(_confusions(noise, config))
    n_ids = tuple(int(x) for x in config.n_id_list)

    tasks = [(depth, inst, n_id)
             for depth in depths for inst in range(config.instances) for n_id in n_ids]
    rows = utils.parallel_map(
        lambda t: _rcs_instance(config, noise, correct, t[0], t[1], t[2]),
        tasks, config.workers)

    summary = []
    pair_stats = []
    for depth in depths:
        for n_id in n_ids:
            sub = np.array([r["vd_mitigated"] for r in rows
                            if r["depth"] == depth and r["n_id"] == n_id])
            summary.append({
                "depth": depth,
                "n_id": n_id,
                "mean_vd_mitigated": float(sub.mean()),
                "sem_vd_mitigated": _sem(sub),
            })
        lo, hi = min(n_ids), max(n_ids)
        a = np.array([r["vd_mitigated"] for r in rows if r["depth"] == depth and r["n_id"] == lo])
        b = np.array([r["vd_mitigated"] for r in rows if r["depth"] == depth and r["n_id"] == hi])
        diff = b - a
        pair_stats.append({
            "depth": depth,
            "n_id_low": lo,
            "n_id_high": hi,
            "mean_diff": float(diff.mean()),
            "sem_diff": _sem(diff),
        })
    results = {
        "depths": list(depths),
        "n_id_list": list(n_ids),
        "summary": summary,
        "paired_diff": pair_stats,
    }
    return ExperimentReport(
        kind="nid-sweep", config=config.echo(), results=results, metrics=rows,
        plotdata={"vd_by_n_id": summary, "vd_instances": rows}, seed=config.seed,
    )


# ---------------------------------------------------------------------------
# twirling decay study


def _random_traceless_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g = (a + a.conj().T) / 2.0
    g -= np.trace(g) / dim * np.eye(dim)
    vals = np.linalg.eigvalsh(g)
    return g / float(np.max(np.abs(vals)))


def _coherent_stochastic_transfer(d: int, n: int, g: np.ndarray, theta: float,
                                  dep_rate: float) -> TransferMatrix:
    """Transfer matrix of (depolarizing after exp(-i theta g)).

    The depolarizing factor acts diagonally in the Weyl basis (identity row
    untouched, every other row scaled by 1 - rate), so only the unitary part
    needs a fresh transfer-matrix build per theta.
    """
    vals, vecs = np.linalg.eigh(g)
    u = (vecs * np.exp(-1j * theta * vals)) @ vecs.conj().T
    tm = transfer_matrix(QuantumChannel.from_unitary(u), d, n)
    data = tm.data.copy()
    data[1:, :] *= 1.0 - dep_rate
    return TransferMatrix(d, n, data)


def _calibrated_trial_transfer(d: int, n: int, rng: np.random.Generator,
                               target_fraction: float, total_infidelity: float,
                               tol: float = 1e-4) -> TransferMatrix:
    """Random noise channel with a bisected coherent fraction.

    The stochastic part is a fixed depolarizing channel; the coherent part
    exp(-i theta G) for a random traceless G is scaled until the coherent
    fraction hits the target.  The depolarizing rate is set so the purely
    stochastic infidelity is (1 - target) * total_infidelity.
    """
    dim_sq = d ** (2 * n)
    stoch_infid = (1.0 - target_fraction) * total_infidelity
    dep_rate = stoch_infid / (1.0 - 1.0 / dim_sq)
    g = _random_traceless_hermitian(d**n, rng)

    def fraction_at(theta: float):
        tm = _coherent_stochastic_transfer(d, n, g, theta, dep_rate)
        return coherent_fraction(tm), tm

    lo, hi = 0.0, 0.05
    frac_hi, tm_hi = fraction_at(hi)
    attempts = 0
    while frac_hi is not None and frac_hi < target_fraction:
        hi *= 2.0
        attempts += 1
        if attempts > 12:
            raise RuntimeError("could not bracket the coherent-fraction target")
        frac_hi, tm_hi = fraction_at(hi)
    for _ in range(60):
        mid = (lo + hi) / 2.0
        frac, tm = fraction_at(mid)
        if frac is None:
            lo = mid
            continue
        if abs(frac - target_fraction) < tol:
            return tm
        if frac < target_fraction:
            lo = mid
        else:
            hi = mid
    return tm


def twirl_decay_study(config: ExperimentConfig) -> ExperimentReport:
    """How fast finite-sample twirling converts coherent errors to
    stochastic ones, across qudit dimensions.

    Per dimension and trial: build a random channel whose coherent fraction
    is 0.70 of a fixed total infidelity (two-qudit register for d = 2, 3,
    single qudit for d = 5), then for each sample count N draw N uniform
    twirl labels and record the coherent fraction of the averaged channel.
    The exhaustive twirl (diagonal of the transfer matrix) gives the floor.
    """
    grid = tuple(int(x) for x in config.twirl_grid)
    dims = tuple(int(x) for x in config.dims)
    target = 0.70
    total_infid = 0.05

    def run_dim(d: int) -> dict:
        n = 2 if d <= 3 else 1
        labels = list(all_labels(d, n))
        fractions = np.zeros((config.trials, len(grid)))
        floors = np.zeros(config.trials)
        for trial in range(config.trials):
            rng = utils.child_rng(config.seed, 40, d, trial)
            tm = _calibrated_trial_transfer(d, n, rng, target, total_infid)
            floor_tm = TransferMatrix(d, n, np.diag(np.diag(tm.data)))
            floors[trial] = coherent_fraction(floor_tm)
            for j, n_samples in enumerate(grid):
                picks = rng.integers(0, len(labels), size=n_samples)
                drawn = [labels[int(p)] for p in picks]
                frac = coherent_fraction(twirled_transfer(tm, drawn))
                fractions[trial, j] = 0.0 if frac is None else frac
        means = fractions.mean(axis=0)
        stds = fractions.std(axis=0, ddof=1) if config.trials > 1 else np.zeros(len(grid))
        sems = stds / math.sqrt(config.trials)
        log_means = np.log(np.maximum(means, 1e-15))
        semilog = utils.linear_fit(list(grid), list(log_means))
        loglog = utils.linear_fit(list(np.log(grid)), list(log_means))
        return {
            "d": d,
            "n": n,
            "means": means,
            "stds": stds,
            "sems": sems,
            "floor_mean": float(floors.mean()),
            "semilog_slope": semilog[0],
            "semilog_r2": semilog[2],
            "loglog_slope": loglog[0],
            "loglog_r2": loglog[2],
        }

    per_dim = utils.parallel_map(run_dim, list(dims), config.workers)

    curves = []
    metrics = []
    for entry in per_dim:
        for j, n_samples in enumerate(grid):
            row = {
                "d": entry["d"],
                "n_samples": n_samples,
                "mean_fraction": float(entry["means"][j]),
                "std_fraction": float(entry["stds"][j]),
                "sem_fraction": float(entry["sems"][j]),
            }
            curves.append(row)
            metrics.append(row)

    agreement = []
    for i in range(len(per_dim)):
        for k in range(i + 1, len(per_dim)):
            a, b = per_dim[i], per_dim[k]
            for j, n_samples in enumerate(grid):
                gap = abs(float(a["means"][j]) - float(b["means"][j]))
                band = 2.0 * math.sqrt(float(a["sems"][j]) ** 2 + float(b["sems"][j]) ** 2)
                agreement.append({
                    "d_a": a["d"], "d_b": b["d"], "n_samples": n_samples,
                    "gap": gap, "two_sigma": band,
                    "agrees": int(gap <= band),
                })

    results = {
        "grid": list(grid),
        "dims": list(dims),
        "target_fraction": target,
        "total_infidelity": total_infid,
        "per_dim": [
            {
                "d": e["d"],
                "n": e["n"],
                "start_fraction": float(e["means"][0]) if grid[0] == 1 else None,
                "monotonic": bool(np.all(np.diff(e["means"]) < 0)),
                "floor_mean": e["floor_mean"],
                "semilog_slope": e["semilog_slope"],
                "semilog_r2": e["semilog_r2"],
                "loglog_slope": e["loglog_slope"],
                "loglog_r2": e["loglog_r2"],
            }
            for e in per_dim
        ],
        "agreement": agreement,
    }
    return ExperimentReport(
        kind="twirl-study", config=config.echo(), results=results, metrics=metrics,
        plotdata={"decay_curves": curves, "agreement": agreement}, seed=config.seed,
    )


# ---------------------------------------------------------------------------
# entangling-phase characterization

_R01 = np.array([
    [1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [0.0, 0.0, math.sqrt(2.0)],
]) / math.sqrt(2.0)


@dataclass(frozen=True)
class PhaseFitResult:
    """Sinusoid fit of a phase-sweep interference fringe.

    delta is the recovered extra entangling phase: the ideal fringe offset
    minus the measured one, so injecting a lag of +x radians on the probed
    level pair reports delta = +x.
    """

    control: int
    theta: float
    ideal_theta: float
    delta: float
    contrast: float
    r_squared: float
    fit_ok: bool
    points: tuple


def _wrap_angle(x: float) -> float:
    return float(math.atan2(math.sin(x), math.cos(x)))


def characterize_entangling_phase(
    noise: Optional[NoiseModel],
    control: int,
    sweep_points: int = 12,
    shots: int = 0,
    seed=None,
    spectator: bool = False,
    d: int = 3,
) -> PhaseFitResult:
    """Ramsey-style fringe scan of the entangler's conditional phase.

    The control qudit is prepared at level `control`; the probe qudit sits
    in a 0/1 superposition, picks up the entangler's conditional phase, and
    is read out through a swept virtual phase followed by the same 0/1
    rotation.  P(probe = 0) traces (1 + C cos(phi - theta)) / 2; theta is
    fit by least squares.  spectator = True probes a third qudit that the
    ideal entangler does not touch (ideal theta 0).

    A fit with R^2 < 0.9 is reported with fit_ok = False, never raised.
    """
    if d != 3:
        raise ValueError("phase characterization is defined for qutrits")
    if control not in range(d):
        raise ValueError(f"control level must be in 0..{d - 1}")
    n = 3 if spectator else 2
    control_qudit = 1 if spectator else 0
    probe = 2 if spectator else 1
    ideal_theta = 0.0 if spectator else _wrap_angle(-2.0 * math.pi * control / d)

    prep = [
        ((control_qudit,), WeylGate(WeylLabel.single(d, 0, control))),
        ((probe,), CustomGate(d, _R01)),
    ]
    phis = [2.0 * math.pi * k / sweep_points for k in range(sweep_points)]
    p0 = np.zeros(sweep_points)
    for k, phi in enumerate(phis):
        analysis = CustomGate(d, _R01 @ np.diag(np.exp(1j * np.array([0.0, -phi, 0.0]))))
        cycles = (
            Cycle(EASY, tuple(prep)),
            Cycle(HARD, (((0, 1), czdag_gate(d)),)),
            Cycle(EASY, (((probe,), analysis),)),
        )
        circ = Circuit(n, d, cycles)
        sub = None if seed is None else utils.child_seed(seed, 60, control, int(spectator), k)
        dist = measure_distribution(circ, noise=noise, shots=shots, seed=sub).distribution
        marg = dist.probs.reshape((d,) * n)
        axes = tuple(a for a in range(n) if a != probe)
        p0[k] = float(marg.sum(axis=axes)[0])

    design = np.stack([np.ones(sweep_points), np.cos(phis), np.sin(phis)], axis=1)
    coef, *_ = np.linalg.lstsq(design, p0, rcond=None)
    resid = p0 - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((p0 - p0.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-300 else (1.0 if ss_res <= 1e-300 else 0.0)
    theta = float(math.atan2(coef[2], coef[1]))
    contrast = 2.0 * float(math.hypot(coef[1], coef[2]))
    delta = _wrap_angle(ideal_theta - theta)
    return PhaseFitResult(
        control=control,
        theta=theta,
        ideal_theta=ideal_theta,
        delta=delta,
        contrast=contrast,
        r_squared=float(r2),
        fit_ok=bool(r2 >= 0.9),
        points=tuple(zip([float(x) for x in phis], [float(y) for y in p0])),
    )


def phase_characterization(config: ExperimentConfig) -> ExperimentReport:
    noise = resolve_noise(config, n=3 if config.spectator else 2)
    metrics = []
    sweeps = []
    for control in range(config.d):
        fit = characterize_entangling_phase(
            noise, control, sweep_points=config.sweep_points, shots=config.shots,
            seed=config.seed, spectator=config.spectator, d=config.d)
        metrics.append({
            "control": control,
            "spectator": int(config.spectator),
            "theta": fit.theta,
            "ideal_theta": fit.ideal_theta,
            "delta": fit.delta,
            "contrast": fit.contrast,
            "r_squared": fit.r_squared,
            "fit_ok": int(fit.fit_ok),
        })
        for phi, p in fit.points:
            sweeps.append({"control": control, "phi": phi, "p0": p})
    results = {
        "spectator": config.spectator,
        "fits": metrics,
        "all_fits_ok": bool(all(m["fit_ok"] for m in metrics)),
    }
    return ExperimentReport(
        kind="phase-char", config=config.echo(), results=results, metrics=metrics,
        plotdata={"phase_fits": metrics, "phase_sweeps": sweeps}, seed=config.seed,
    )


# ---------------------------------------------------------------------------
# readout-calibration and tomography diagnostics


def rcal_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Estimate the per-qudit readout confusion of the configured model and
    compare against its exact confusion matrices."""
    noise = resolve_noise(config)
    exact = rcal_confusion(noise, config.n, config.d, shots=0)
    sampled = rcal_confusion(noise, config.n, config.d, shots=config.shots,
                             seed=utils.child_seed(config.seed, 9)) if config.shots else exact
    metrics = []
    worst = 0.0
    for i, (e, s) in enumerate(zip(exact, sampled)):
        err = float(np.max(np.abs(e.data - s.data)))
        worst = max(worst, err)
        for level in range(config.d):
            metrics.append({
                "qudit": i,
                "level": level,
                "fidelity_exact": float(e.data[level, level]),
                "fidelity_sampled": float(s.data[level, level]),
                "condition_number": e.condition_number,
            })
    results = {
        "max_entry_error": worst,
        "condition_numbers": [e.condition_number for e in exact],
        "levels_per_circuit": config.d,
        "calibration_circuits": len(rcal_circuits(config.n, config.d)),
    }
    return ExperimentReport(
        kind="rcal", config=config.echo(), results=results, metrics=metrics,
        plotdata={"confusion_diagonal": metrics}, seed=config.seed,
    )


def tomo_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Plain state tomography of the entangler chain (no mitigation), as a
    round-trip diagnostic of the estimator."""
    noise = resolve_noise(config)
    confusions = _confusions(noise, config)
    circ = ghz_circuit(config.n, config.d)
    ideal = ghz_state(config.n, config.d)
    res = state_tomography(circ, noise=noise, shots=config.shots,
                           seed=utils.child_seed(config.seed, 8), confusions=confusions)
    f = fidelity(res.state, ideal)
    purity = float(np.real(np.trace(res.state.data @ res.state.data)))
    metrics = [{"fidelity": f, "purity": purity,
                "settings": len(res.expectations), "shots_per_setting": config.shots}]
    results = {"fidelity": f, "purity": purity, "settings": len(res.expectations)}
    return ExperimentReport(
        kind="tomo", config=config.echo(), results=results, metrics=metrics,
        plotdata={"tomo_summary": metrics}, seed=config.seed,
    )


DRIVERS = {
    "ghz": ghz_experiment,
    "rcs": rcs_experiment,
    "twirl-study": twirl_decay_study,
    "nid-sweep": n_id_sweep,
    "phase-char": phase_characterization,
    "rcal": rcal_experiment,
    "tomo": tomo_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.kind not in DRIVERS:
        raise ValueError(f"unknown experiment kind {config.kind!r}")
    return DRIVERS[config.kind](config)

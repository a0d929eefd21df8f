"""Shared plumbing: seed derivation, parallel map, canonical JSON output."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence

import numpy as np

THREADS_ENV = "QUDITFLOW_THREADS"


def child_seed(seed: int | None | np.random.SeedSequence, *path: int) -> np.random.SeedSequence:
    """Derive an independent child seed from a root seed and an index path.

    The same (seed, path) pair always yields the same stream, and distinct
    paths yield statistically independent streams.  Tasks that run in
    parallel must each derive their own child so results do not depend on
    execution order.  Passing an already-derived SeedSequence extends its
    path, so nested drivers can keep branching without collisions.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path)
        )
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))


def child_rng(seed: int | None, *path: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *path))


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        workers = 1
    return max(1, workers)


def parallel_map(fn: Callable[[Any], Any], tasks: Sequence[Any], workers: int | None = None) -> list:
    """Order-preserving map over independent tasks.

    Each task must carry its own derived seed; with that discipline the
    output is identical for any worker count.
    """
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# canonical JSON
#
# Reports and circuit documents must serialize deterministically so repeated
# runs with the same seed are byte-identical.  Floats are written with 17
# significant digits, which round-trips any IEEE double exactly.


def format_float(x: float) -> str:
    if x != x:  # NaN never belongs in an emitted document
        raise ValueError("cannot serialize NaN")
    if x in (float("inf"), float("-inf")):
        raise ValueError("cannot serialize infinity")
    return format(float(x), ".17g")


def _emit(obj: Any, out: list[str]) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, bool):  # pragma: no cover - caught above
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {type(key).__name__}")
            if i:
                out.append(", ")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(": ")
            _emit(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(", ")
            _emit(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps_canonical(obj: Any) -> str:
    """Serialize to JSON with deterministic float formatting (17 sig. digits)."""
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def complex_matrix_to_pairs(m: np.ndarray) -> list[list[float]]:
    """Row-major [re, im] pairs for a complex matrix."""
    flat = np.asarray(m, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def pairs_to_complex_matrix(pairs: Iterable[Sequence[float]], rows: int, cols: int) -> np.ndarray:
    data = list(pairs)
    if len(data) != rows * cols:
        raise ValueError(f"expected {rows * cols} (re, im) pairs, got {len(data)}")
    flat = np.empty(rows * cols, dtype=complex)
    for i, pair in enumerate(data):
        if len(pair) != 2:
            raise ValueError(f"matrix entry {i} is not a (re, im) pair")
        flat[i] = complex(float(pair[0]), float(pair[1]))
    return flat.reshape(rows, cols)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through (x, y); returns (slope, intercept, r_squared).

    r_squared is 1.0 when the residual is zero even if y is constant, so a
    flat but perfectly fit line does not read as a failed fit.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("linear_fit needs two equal-length 1-d samples of size >= 2")
    design = np.stack([xs, np.ones_like(xs)], axis=1)
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), float(r2)


def load_schema(name: str) -> dict:
    """Read a bundled JSON schema by file name."""
    from importlib import resources

    text = resources.files("quditflow").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)

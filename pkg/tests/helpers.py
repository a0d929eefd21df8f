"""Independent oracles for the test suite.

Everything here is built directly from textbook definitions with dense numpy,
deliberately not reusing the package's own algebra, so tests compare two
separate constructions.  Index convention matches the package: qudit 0 is the
most significant digit of a composite basis index.
"""
from __future__ import annotations

import numpy as np


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def tau(d: int) -> complex:
    return np.exp(1j * np.pi / d)


def shift(d: int) -> np.ndarray:
    """X |n> = |n+1 mod d>."""
    m = np.zeros((d, d), dtype=complex)
    for n in range(d):
        m[(n + 1) % d, n] = 1.0
    return m


def clock(d: int) -> np.ndarray:
    """Z = diag(omega^n)."""
    return np.diag(omega(d) ** np.arange(d))


def ref_phase_exp(d: int, p: int, q: int) -> int:
    # canonical phase: tau^{-pq(d+1)} for odd d, tau^{-pq} for d = 2
    if d % 2:
        return (-p * q * (d + 1)) % (2 * d)
    return (-p * q) % (2 * d)


def ref_weyl_site(d: int, p: int, q: int) -> np.ndarray:
    return tau(d) ** ref_phase_exp(d, p, q) \
        * np.linalg.matrix_power(clock(d), p) \
        @ np.linalg.matrix_power(shift(d), q)


def ref_weyl(d: int, ps, qs) -> np.ndarray:
    m = np.eye(1, dtype=complex)
    for p, q in zip(ps, qs):
        m = np.kron(m, ref_weyl_site(d, int(p), int(q)))
    return m


def ref_hadamard(d: int) -> np.ndarray:
    grid = np.outer(np.arange(d), np.arange(d))
    return omega(d) ** grid / np.sqrt(d)


def ref_czdag(d: int) -> np.ndarray:
    j = np.arange(d).repeat(d)
    k = np.tile(np.arange(d), d)
    return np.diag(omega(d) ** ((-j * k) % d))


def embed(op: np.ndarray, sites, n: int, d: int) -> np.ndarray:
    """Lift an operator on `sites` (given tensor-factor order) to n qudits."""
    sites = list(sites)
    full = np.kron(op, np.eye(d ** (n - len(sites)), dtype=complex))
    order = sites + [i for i in range(n) if i not in sites]
    perm = np.argsort(order)
    t = full.reshape((d,) * (2 * n))
    t = np.transpose(t, tuple(perm) + tuple(n + p for p in perm))
    return t.reshape(d**n, d**n)


def apply_unitary(state: np.ndarray, op: np.ndarray, sites, n: int, d: int) -> np.ndarray:
    return embed(op, sites, n, d) @ state


def ref_ghz(n: int, d: int) -> np.ndarray:
    vec = np.zeros(d**n, dtype=complex)
    step = (d**n - 1) // (d - 1)
    vec[::step] = 1.0 / np.sqrt(d)
    return vec


def random_state_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus(rng: np.random.Generator, dim: int, k: int) -> list:
    """Random CPTP channel: Ginibre stack normalized by S^{-1/2}."""
    gs = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)) for _ in range(k)]
    s = sum(g.conj().T @ g for g in gs)
    vals, vecs = np.linalg.eigh(s)
    inv_sqrt = vecs @ np.diag(vals**-0.5) @ vecs.conj().T
    return [g @ inv_sqrt for g in gs]


def apply_kraus(rho: np.ndarray, kraus) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def brute_transfer(apply_rho, weyl_mats, dim: int) -> np.ndarray:
    """R[i, j] = Tr(B_i^H channel(B_j)) over the normalized basis B = W/sqrt(dim)."""
    count = len(weyl_mats)
    r = np.zeros((count, count), dtype=complex)
    outs = [apply_rho(w / np.sqrt(dim)) for w in weyl_mats]
    for i, w in enumerate(weyl_mats):
        bi = w / np.sqrt(dim)
        for j in range(count):
            r[i, j] = np.trace(bi.conj().T @ outs[j])
    return r

"""Random translation-invariant MPS and their one- and two-site expectations."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .core import ExpectationPoint, SeededRng

log = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

DENSE_TRANSFER_MAX_D = 16
INJECTIVITY_GAP = 1e-8


class ResampleError(ValueError):
    """The tensor's transfer operator has no unique fixed point."""


class ScatterAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class UniformMpsTensor:
    """Site tensor ``A[s, i, j]`` of a uniform MPS with physical dimension 2."""

    A: np.ndarray

    @property
    def D(self) -> int:
        return self.A.shape[1]

    def canonical_error(self) -> float:
        gram = np.einsum("sij,sik->jk", self.A.conj(), self.A)
        return float(np.abs(gram - np.eye(self.D)).max())


@dataclass(frozen=True)
class TransferFixedPoint:
    rho_R: np.ndarray
    eigenvalue: float
    gap: float


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a complex Ginibre matrix with phase-fixed R."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_uniform_mps(D: int, rng: SeededRng | np.random.Generator) -> UniformMpsTensor:
    """Isometry made of the first ``D`` columns of a Haar unitary on ``C^2 (x) C^D``."""
    if not 1 <= D <= 64:
        raise ValueError("bond dimension must lie in 1..64")
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    u = haar_unitary(2 * D, gen)
    A = u[:, :D].reshape(2, D, D)
    return UniformMpsTensor(np.ascontiguousarray(A))


def _apply_transfer(A, rho):
    # rho -> sum_s A_s rho A_s^dagger
    return np.einsum("sij,jk,slk->il", A, rho, A.conj())


def _check_gap(evals):
    gap = float(np.abs(evals[0]) - np.abs(evals[1]))
    if gap < INJECTIVITY_GAP:
        raise ResampleError(f"transfer spectrum gap {gap:.2e} below {INJECTIVITY_GAP:g}")


def transfer_fixed_point(mps: UniformMpsTensor) -> TransferFixedPoint:
    """Right fixed point of ``rho -> sum_s A_s rho A_s^dagger``, trace-normalised."""
    A = mps.A
    D = mps.D
    if D == 1:
        lam = float(np.real(np.sum(np.abs(A) ** 2)))
        return TransferFixedPoint(np.ones((1, 1), dtype=complex), lam, 1.0)
    if D <= DENSE_TRANSFER_MAX_D:
        T = np.einsum("sij,slk->iljk", A, A.conj()).reshape(D * D, D * D)
        evals = np.linalg.eigvals(T)
        evals = evals[np.argsort(-np.abs(evals))]
        _check_gap(evals)
        # fixed point from (T - lambda) rho = 0 with Tr(rho) = 1 replacing one row
        sys = T - evals[0] * np.eye(D * D)
        sys[0] = np.eye(D).ravel()
        rhs = np.zeros(D * D, dtype=complex)
        rhs[0] = 1.0
        vec = np.linalg.solve(sys, rhs)
    else:
        op = scipy.sparse.linalg.LinearOperator(
            (D * D, D * D), dtype=complex,
            matvec=lambda v: _apply_transfer(A, v.reshape(D, D)).ravel())
        v0 = np.eye(D, dtype=complex).ravel() / D
        evals, evecs = scipy.sparse.linalg.eigs(op, k=6, which="LM", v0=v0, tol=1e-12,
                                              ncv=min(D * D - 1, 40), maxiter=20000)
        order = np.argsort(-np.abs(evals))
        evals, vec = evals[order], evecs[:, order[0]]
        _check_gap(evals)
    gap = float(np.abs(evals[0]) - np.abs(evals[1]))
    rho = vec.reshape(D, D)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    for _ in range(50):
        new = _apply_transfer(A, rho)
        new = new / np.trace(new)
        new = 0.5 * (new + new.conj().T)
        done = np.abs(new - rho).max() < 1e-14
        rho = new
        if done:
            break
    return TransferFixedPoint(rho, float(np.real(evals[0])), gap)


def mps_expectations(mps: UniformMpsTensor, single_ops, bond_op=None,
                     fixed_point: TransferFixedPoint | None = None,
                     imag_tol: float = 1e-10) -> list[float]:
    """Expectation values of single-site operators followed by one bond operator.

    ``<O> = sum_{s,t} O[s,t] Tr(A_s^dagger A_t rho_R)`` with the left fixed
    point equal to the identity for a left-canonical tensor.
    """
    A = mps.A
    fp = fixed_point or transfer_fixed_point(mps)
    rho = fp.rho_R
    # M[s, t] = Tr(A_s^dagger A_t rho)
    M = np.einsum("sij,tik,kj->st", A.conj(), A, rho)
    out = []
    for op in single_ops:
        out.append(np.sum(np.asarray(op) * M))
    if bond_op is not None:
        op4 = np.asarray(bond_op).reshape(2, 2, 2, 2)
        # two sites: Tr(A_s2^dag A_s1^dag A_t1 A_t2 rho)
        AA = np.einsum("aij,bjk->abik", A, A)
        M2 = np.einsum("abij,cdik,kj->abcd", AA.conj(), AA, rho)
        out.append(np.sum(op4 * M2))
    vals = []
    for v in out:
        if abs(v.imag) > imag_tol:
            raise ValueError(f"expectation value has imaginary part {v.imag:.2e}")
        vals.append(float(np.clip(v.real, -1.0, 1.0)))
    return vals


def default_observables():
    """``(X, Z, Y)`` single-site operators and the ``X (x) X`` bond operator."""
    return [PAULI_X, PAULI_Z, PAULI_Y], np.kron(PAULI_X, PAULI_X)


def scatter_array(count: int, D_min: int, D_max: int, rng: SeededRng,
                  start: int = 0) -> np.ndarray:
    """Rows ``(XX, Z, X, Y, D)`` for sample indices ``start .. start+count-1``.

    Sample ``i`` uses bond dimension ``D_min + i mod (D_max - D_min + 1)`` and
    its own random stream keyed by ``i``, so any partition of the index
    range reproduces the same rows.
    """
    if not 1 <= D_min <= D_max:
        raise ValueError("need 1 <= D_min <= D_max")
    singles, bond = default_observables()
    span = D_max - D_min + 1
    rows = np.empty((count, 5))
    failures = 0
    for row, i in enumerate(range(start, start + count)):
        D = D_min + i % span
        gen = rng.generator(i)
        while True:
            mps = random_uniform_mps(D, gen)
            try:
                x, z, y, xx = mps_expectations(mps, singles, bond)
                break
            except ResampleError:
                failures += 1
                log.info("resampling index %d (seed=%d, stream=%d, D=%d)", i, rng.seed, rng.stream, D)
                if failures > max(10, count // 2):
                    raise ScatterAbort(
                        f"{failures} non-injective draws for {count} samples "
                        f"(seed={rng.seed}, stream={rng.stream}, last index {i}, D={D})")
        rows[row] = (xx, z, x, y, D)
    return rows


def scatter_generate(count: int, D_min: int, D_max: int, rng: SeededRng) -> list[ExpectationPoint]:
    """Random uniform-MPS cloud in ``(XX, Z, X)`` space."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rows = scatter_array(count, D_min, D_max, rng)
    return [ExpectationPoint(r[0], r[1], r[2], ("XX", "Z", "X")) for r in rows]

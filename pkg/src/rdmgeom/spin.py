"""Extreme points of the spin-1/2 sets: two spins, finite chains, product states.

Conventions
-----------
Points are ``(<XX> per bond, <Z> per site, <X> per site)``. A chain of N
sites with periodic boundaries carries one bond per site, so the energy per
site of ``H = -J sum X_i X_{i+1} - Bz sum Z_i - Bx sum X_i`` is
``-J <XX> - Bz <Z> - Bx <X>``; the product-state functional uses the same
normalisation. The two-spin Hamiltonian carries the fields on both spins
with a single bond, i.e. direction ``(J, 2 Bz, 2 Bx)`` in point space.

When the ground space is degenerate the reported point is the average over
it (the symmetric point). Pass ``Bx = +-eps`` to pick a broken branch.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse.linalg
from scipy.stats import qmc

from . import _kernels
from .core import ExpectationPoint, SeededRng, SpinParams

DEGENERACY_TOL = 1e-10
# degenerate ground spaces inside one block are diagonalised densely up to this size
DEGENERATE_DENSE_MAX_DIM = 4096
RESIDUAL_TOL = 1e-10
DENSE_MAX_DIM = 256
BRANCH_EPS = 1e-3

_AXES = ("XX", "Z", "X")

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_I = np.eye(2)


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ChainSpec:
    N: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if not 2 <= int(self.N) <= 22:
            raise ValueError(f"chain length {self.N} outside 2..22")
        object.__setattr__(self, "N", int(self.N))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def n_bonds(self) -> int:
        if self.periodic:
            return self.N if self.N > 2 else 2
        return self.N - 1


@dataclass(frozen=True)
class BlochVector:
    ax: float
    ay: float
    az: float

    def __post_init__(self):
        if self.ax ** 2 + self.ay ** 2 + self.az ** 2 > 1 + 1e-12:
            raise ValueError("Bloch vector outside the unit ball")


@dataclass(frozen=True)
class GroundStateResult:
    energy_per_site: float
    point: ExpectationPoint
    gap: float
    degeneracy: int
    bloch: tuple[BlochVector, BlochVector] | None = None


# --------------------------------------------------------------------------
# two spins

def _two_spin_ops():
    xx = np.kron(_X, _X)
    z = 0.5 * (np.kron(_Z, _I) + np.kron(_I, _Z))
    x = 0.5 * (np.kron(_X, _I) + np.kron(_I, _X))
    return xx, z, x


def _ground_average(evals, evecs, ops, tol=DEGENERACY_TOL):
    g = int(np.count_nonzero(evals <= evals[0] + tol))
    block = evecs[:, :g]
    vals = [float(np.real(np.einsum("ik,ij,jk->", block.conj(), op, block))) / g for op in ops]
    return g, vals


def two_spin_ground(params: SpinParams) -> GroundStateResult:
    """Exact ground state of ``-J XX - Bz (Z1 + Z2) - Bx (X1 + X2)``."""
    xx, z, x = _two_spin_ops()
    H = -params.J * xx - 2 * params.Bz * z - 2 * params.Bx * x
    evals, evecs = np.linalg.eigh(H)
    g, (pxx, pz, px) = _ground_average(evals, evecs, (xx, z, x))
    gap = float(evals[1] - evals[0])
    return GroundStateResult(
        energy_per_site=float(evals[0]) / 2,
        point=ExpectationPoint(pxx, pz, px, _AXES),
        gap=max(gap, 0.0),
        degeneracy=g,
    )


def two_spin_batch(J, Bz, Bx):
    """Vectorised ``two_spin_ground`` points for arrays of parameters.

    Returns an ``(n, 3)`` array; degenerate ground spaces are averaged the
    same way as in the scalar version.
    """
    J, Bz, Bx = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (J, Bz, Bx)))
    xx, z, x = _two_spin_ops()
    H = -J[..., None, None] * xx - 2 * Bz[..., None, None] * z - 2 * Bx[..., None, None] * x
    evals, evecs = np.linalg.eigh(H.reshape(-1, 4, 4))
    ground = evals <= evals[:, :1] + DEGENERACY_TOL
    w = ground / ground.sum(axis=1, keepdims=True)
    out = np.empty((len(evals), 3))
    for col, op in enumerate((xx, z, x)):
        diag = np.einsum("nik,ij,njk->nk", evecs, op, evecs)
        out[:, col] = (diag * w).sum(axis=1)
    return out


# --------------------------------------------------------------------------
# product states

def _bloch(theta):
    return BlochVector(math.sin(theta), 0.0, math.cos(theta))


def mean_field_extreme(params: SpinParams, restarts: int = 32,
                       rng: SeededRng | None = None, maxiter: int = 500,
                       gtol: float = 1e-10) -> GroundStateResult:
    """Minimise the two-site product-state energy by multi-start Newton descent.

    The energy only involves the x and z Bloch components and is linear in
    each vector separately, so the optimum lies on the great circle in the
    xz-plane; each vector is parameterised by one polar angle.
    """
    if restarts < 8:
        raise ValueError("at least 8 restarts are required")
    rng = rng or SeededRng()
    sobol = qmc.Sobol(d=2, scramble=True, seed=rng.generator(0x6D66))
    theta0 = 2 * np.pi * sobol.random(restarts)
    theta, energy, gnorm = _kernels.mf_multistart(params.J, params.Bz, params.Bx,
                                                  theta0, maxiter, gtol)
    best = int(np.argmin(energy))
    e0 = float(energy[best])
    ta, tb = theta[best]
    a, b = _bloch(ta), _bloch(tb)
    point = ExpectationPoint(a.ax * b.ax, 0.5 * (a.az + b.az), 0.5 * (a.ax + b.ax), _AXES)
    if gnorm[best] >= gtol:
        partial = GroundStateResult(e0, point, 0.0, 1, (a, b))
        raise ConvergenceError(
            f"product-state descent stalled at |grad|={gnorm[best]:.3e} for {params}", best=partial)

    tied = energy <= e0 + DEGENERACY_TOL
    sa, ca = np.sin(theta[tied]), np.cos(theta[tied])
    pts = np.column_stack([sa[:, 0] * sa[:, 1], 0.5 * (ca[:, 0] + ca[:, 1]), 0.5 * (sa[:, 0] + sa[:, 1])])
    degeneracy = len(np.unique(np.round(pts, 6), axis=0))
    if params.Bx == 0.0 and abs(point.c) > 1e-9:
        # the +-X branches are both minima; report their equal mixture
        point = point.replace_c(0.0)
        degeneracy = max(degeneracy, 2)
    return GroundStateResult(e0, point, 0.0, degeneracy, (a, b))


def product_energy(params: SpinParams, point) -> float:
    """Per-site energy ``-J a - Bz b - Bx c`` of a point in this normalisation."""
    a, b, c = (point.a, point.b, point.c) if isinstance(point, ExpectationPoint) else point
    return -params.J * a - params.Bz * b - params.Bx * c


# --------------------------------------------------------------------------
# finite chains

@dataclass(frozen=True)
class _Basis:
    states: np.ndarray
    lookup: np.ndarray
    zsum: np.ndarray
    bond_masks: np.ndarray
    site_masks: np.ndarray


@functools.lru_cache(maxsize=32)
def _chain_basis(N: int, periodic: bool, parity: int | None) -> _Basis:
    full = np.arange(1 << N, dtype=np.int64)
    pop = np.zeros_like(full)
    for i in range(N):
        pop += (full >> i) & 1
    if parity is None:
        states = full
    else:
        states = full[(pop & 1) == parity]
    lookup = np.full(1 << N, -1, dtype=np.int64)
    lookup[states] = np.arange(len(states))
    zsum = (N - 2 * pop[states]).astype(float)
    bonds = [(i, (i + 1) % N) for i in range(N if periodic else N - 1)]
    if periodic and N == 2:
        bonds = [(0, 1), (1, 0)]
    bond_masks = np.array([(1 << i) | (1 << j) for i, j in bonds], dtype=np.int64)
    site_masks = np.array([1 << i for i in range(N)], dtype=np.int64)
    return _Basis(states, lookup, zsum, bond_masks, site_masks)


def _lowest(matvec, dim, k, seed, dense_builder, force_dense=False):
    # the dense path returns the whole spectrum so degenerate ground spaces are complete
    if dim <= DENSE_MAX_DIM or force_dense:
        return np.linalg.eigh(dense_builder())
    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(dim)
    k = min(k, dim - 2)
    evals, evecs = scipy.sparse.linalg.eigsh(op, k=k, which="SA", v0=v0, tol=0,
                                             ncv=max(2 * k + 1, 24), maxiter=100 * dim)
    order = np.argsort(evals)
    return evals[order], evecs[:, order]


def _solve_block(basis: _Basis, J, Bz, Bx, k, force_dense=False):
    masks = np.concatenate([basis.bond_masks, basis.site_masks]) if Bx != 0.0 else basis.bond_masks
    coefs = np.concatenate([np.full(len(basis.bond_masks), -J),
                            np.full(len(basis.site_masks), -Bx)]) if Bx != 0.0 else \
        np.full(len(basis.bond_masks), -J)
    diag = -Bz * basis.zsum
    states, lookup = basis.states, basis.lookup

    def matvec(v):
        return _kernels.flip_matvec(np.asarray(v, dtype=float).ravel(), states, lookup, masks, coefs, diag)

    def dense():
        return np.column_stack([matvec(e) for e in np.eye(len(states))])

    evals, evecs = _lowest(matvec, len(states), k, 0x5EED, dense, force_dense)
    for e, v in zip(evals[:k], evecs.T[:k]):
        res = np.linalg.norm(matvec(v) - e * v)
        if res > RESIDUAL_TOL * max(1.0, abs(e)):
            raise ConvergenceError(f"eigensolver residual {res:.2e} exceeds tolerance")
    return evals, evecs


def _observables(basis: _Basis, psi, N, n_bonds):
    states, lookup = basis.states, basis.lookup
    z = float(np.dot(psi * psi, basis.zsum)) / N
    xx = sum(_kernels.flip_overlap(psi, states, lookup, m) for m in basis.bond_masks) / n_bonds
    x = sum(_kernels.flip_overlap(psi, states, lookup, m) for m in basis.site_masks) / N
    return xx, z, x


def chain_ground(spec: ChainSpec, params: SpinParams) -> GroundStateResult:
    """Ground state of the transverse/longitudinal-field Ising chain.

    At ``Bx == 0`` the two spin-flip parity sectors are solved separately,
    so every reported eigenvector is a parity eigenstate and ``<X>`` of the
    (averaged) ground space is zero. A degenerate ground space is averaged
    uniformly; its dimension is exact up to 4096 states per block and a
    lower bound beyond.
    """
    N = spec.N
    J, Bz, Bx = params.J, params.Bz, params.Bx
    if Bx == 0.0:
        blocks = [_chain_basis(N, spec.periodic, p) for p in (0, 1)]
        k = 3
    else:
        blocks = [_chain_basis(N, spec.periodic, None)]
        k = 4
    while True:
        levels, complete = [], True
        for basis in blocks:
            evals, evecs = _solve_block(basis, J, Bz, Bx, k)
            if evals[1] <= evals[0] + DEGENERACY_TOL and len(evals) < len(basis.states) <= DEGENERATE_DENSE_MAX_DIM:
                # Lanczos misses copies of an exactly degenerate level
                evals, evecs = _solve_block(basis, J, Bz, Bx, k, force_dense=True)
            levels.extend((float(e), basis, evecs[:, i]) for i, e in enumerate(evals))
            # a block whose every computed level is degenerate may hide more
            complete &= len(evals) == len(basis.states) or evals[-1] > evals[0] + DEGENERACY_TOL
        if complete or k >= 256:
            break
        k *= 2
    levels.sort(key=lambda t: t[0])
    e0 = levels[0][0]
    ground = [lv for lv in levels if lv[0] <= e0 + DEGENERACY_TOL]
    acc = np.zeros(3)
    for _, basis, psi in ground:
        acc += _observables(basis, psi, N, spec.n_bonds)
    xx, z, x = acc / len(ground)
    gap = levels[1][0] - e0 if len(levels) > 1 else 0.0
    return GroundStateResult(
        energy_per_site=e0 / N,
        point=ExpectationPoint(xx, z, x, _AXES),
        gap=max(gap, 0.0),
        degeneracy=len(ground),
    )


# --------------------------------------------------------------------------
# thermodynamic-limit oracle at Bx = 0 (J = 1)

def pfeuty_energy(h: float) -> float:
    """Ground-state energy per site of the infinite chain ``-sum XX - h sum Z``."""
    if h < 0:
        raise ValueError("h must be non-negative")
    val, _ = scipy.integrate.quad(lambda k: math.sqrt(max(1 + h * h - 2 * h * math.cos(k), 0.0)),
                                  0.0, math.pi, epsabs=1e-12, epsrel=1e-12, limit=400)
    return -val / math.pi


def pfeuty_transverse(h: float) -> float:
    """``<Z> = -de/dh`` by quadrature of the analytic derivative."""
    if h < 0:
        raise ValueError("h must be non-negative")

    def integrand(k):
        r = math.sqrt(max(1 + h * h - 2 * h * math.cos(k), 0.0))
        if r == 0.0:
            return 0.0
        return (h - math.cos(k)) / r

    pts = [min(abs(1 - h), math.pi / 2)] if 0 < abs(1 - h) < 0.5 else None
    val, _ = scipy.integrate.quad(integrand, 0.0, math.pi, epsabs=1e-12, epsrel=1e-12,
                                  limit=400, points=pts)
    return val / math.pi


def spontaneous_magnetization_1d(h: float) -> float:
    return (1 - h * h) ** 0.125 if h < 1 else 0.0


def pfeuty_point(h: float, branch: str = "symmetric") -> ExpectationPoint:
    """Point of the infinite chain at ``J = 1, Bz = h, Bx -> 0``.

    ``branch`` is ``'plus'``, ``'minus'`` or ``'symmetric'``; the broken
    branches sit on the border of the ruled surface.
    """
    if branch not in ("plus", "minus", "symmetric"):
        raise ValueError(f"unknown branch {branch!r}")
    e = pfeuty_energy(h)
    z = pfeuty_transverse(h)
    xx = -e - h * z
    m = spontaneous_magnetization_1d(h)
    x = {"plus": m, "minus": -m, "symmetric": 0.0}[branch] if m > 0 else 0.0
    return ExpectationPoint(xx, z, x, _AXES)


# --------------------------------------------------------------------------
# the classical top-plane point J = -1, Bx = 2, Bz -> 0+

def fibonacci(n: int) -> int:
    """Fibonacci number with ``F_0 = 0, F_1 = 1``."""
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def _top_plane_energies(spec: ChainSpec):
    bond, mag = _kernels.config_sums(spec.N, spec.periodic)
    return bond - 2 * mag, bond, mag


def fibonacci_degeneracy(spec: ChainSpec) -> int:
    """Number of minimum-energy configurations of ``sum x x - 2 sum x``.

    Periodic rings give the Lucas numbers ``F_{N-1} + F_{N+1}``; open chains
    give ``F_N`` (``F_0 = 0``), which is ``F_{N+1}`` when the sequence
    0, 1, 1, 2, ... is indexed from 1.
    """
    if spec.N > 24:
        raise ValueError("enumeration limited to N <= 24")
    energy, _, _ = _top_plane_energies(spec)
    return int(np.count_nonzero(energy == energy.min()))


def top_plane_edge(alpha: float, beta: float, spec: ChainSpec) -> ExpectationPoint:
    """Point selected inside the degenerate top-plane subspace by ``alpha X + beta Z``.

    The perturbation ``alpha sum X_j + beta sum Z_j`` is projected onto the
    ground space of the classical top-plane Hamiltonian (x-basis product
    states); the returned point belongs to its lowest eigenvector(s).
    """
    if alpha == 0 and beta == 0:
        raise ValueError("alpha and beta cannot both vanish")
    if spec.N > 20:
        raise ValueError("top-plane subspace limited to N <= 20")
    energy, bond, mag = _top_plane_energies(spec)
    states = np.flatnonzero(energy == energy.min()).astype(np.int64)
    lookup = np.full(1 << spec.N, -1, dtype=np.int64)
    lookup[states] = np.arange(len(states))
    site_masks = np.array([1 << i for i in range(spec.N)], dtype=np.int64)
    diag = alpha * mag[states].astype(float)
    coefs = np.full(spec.N, float(beta))

    def matvec(v):
        return _kernels.flip_matvec(np.asarray(v, dtype=float).ravel(), states, lookup,
                                    site_masks, coefs, diag)

    dim = len(states)
    evals, evecs = _lowest(matvec, dim, min(4, dim), 0x70B,
                           lambda: np.column_stack([matvec(e) for e in np.eye(dim)]))
    g = int(np.count_nonzero(evals <= evals[0] + DEGENERACY_TOL))
    acc = np.zeros(3)
    for psi in evecs[:, :g].T:
        w = psi * psi
        acc += (float(w @ bond[states]) / spec.n_bonds,
                sum(_kernels.flip_overlap(psi, states, lookup, m) for m in site_masks) / spec.N,
                float(w @ mag[states]) / spec.N)
    xx, z, x = acc / g
    return ExpectationPoint(xx, z, x, _AXES)


# --------------------------------------------------------------------------

def critical_exponent_fit(points) -> float:
    """Least-squares slope of ``log(order_param)`` against ``log(slope_plus_one)``."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 5:
        raise ValueError("need at least 5 (slope_plus_one, order_param) pairs")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("all inputs must be finite and positive")
    slope, _ = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(slope)

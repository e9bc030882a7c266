"""Gibbs states of the square-lattice Ising model on infinite cylinders.

The row-to-row transfer matrix of a periodic row of ``W`` spins is
``T = D^(1/2) V D^(1/2)``: ``V`` is the ``W``-fold tensor power of the
vertical-bond weight ``exp(J z z' / T)`` and ``D`` carries the in-row
bonds and the field. Everything is evaluated with the largest exponents
factored out, so ``ln lambda_max`` stays finite down to ``T ~ 0.05``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.sparse.linalg
import scipy.special

from . import _kernels

T_CRITICAL = 2.0 / math.log(1.0 + math.sqrt(2.0))
DENSE_MAX_WIDTH = 10


@dataclass(frozen=True)
class ClassicalParams:
    J: float
    h: float
    T: float

    def __post_init__(self):
        for name in ("J", "h", "T"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite parameter {name}")
            object.__setattr__(self, name, v)
        if self.T <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class CylinderSpec:
    W: int

    def __post_init__(self):
        if not 2 <= int(self.W) <= 16:
            raise ValueError(f"cylinder width {self.W} outside 2..16")
        object.__setattr__(self, "W", int(self.W))


@dataclass(frozen=True)
class GibbsPoint:
    zz: float
    S: float
    z: float
    F: float
    E: float


@functools.lru_cache(maxsize=16)
def _row_sums(W: int):
    bond, mag = _kernels.config_sums(W, True)
    return bond.astype(float), mag.astype(float)


class _RowTransfer:
    """Scaled transfer operator; ``ln_scale`` is added back to ``ln lambda``."""

    def __init__(self, W: int, p: ClassicalParams):
        self.W = W
        bond, mag = _row_sums(W)
        self.bond, self.mag = bond, mag
        a = (p.J * bond + p.h * mag) / p.T
        amax = float(a.max())
        self.half_diag = np.exp(0.5 * (a - amax))
        K = p.J / p.T
        self.v = np.array([[math.exp(K - abs(K)), math.exp(-K - abs(K))],
                           [math.exp(-K - abs(K)), math.exp(K - abs(K))]])
        self.ln_scale = amax + W * abs(K)
        self.dim = 1 << W

    def matvec(self, x):
        x = np.asarray(x, dtype=float).ravel()
        y = _kernels.kron_apply(self.half_diag * x, self.v, self.W)
        return self.half_diag * y

    def dense(self):
        V = self.v
        for _ in range(self.W - 1):
            V = np.kron(V, self.v)
        return self.half_diag[:, None] * V * self.half_diag[None, :]

    def leading(self, k: int = 1):
        if self.W <= DENSE_MAX_WIDTH:
            evals, evecs = np.linalg.eigh(self.dense())
            return evals[::-1][:k], evecs[:, ::-1][:, :k]
        op = scipy.sparse.linalg.LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=float)
        v0 = np.full(self.dim, 1.0 / math.sqrt(self.dim))
        evals, evecs = scipy.sparse.linalg.eigsh(op, k=max(k, 2), which="LA", v0=v0, tol=1e-14,
                                                 ncv=24, maxiter=100000)
        order = np.argsort(evals)[::-1]
        return evals[order][:k], evecs[:, order][:, :k]


def row_transfer_spectrum(spec: CylinderSpec, params: ClassicalParams):
    """``(ln lambda_max, eigenvector)`` of the symmetric row transfer matrix.

    The eigenvalue is returned as its logarithm because it overflows double
    precision at low temperature; the eigenvector is normalised and
    componentwise non-negative.
    """
    tm = _RowTransfer(spec.W, params)
    lam, vec = _dominant(tm, params)
    return math.log(lam) + tm.ln_scale, vec


def _dominant(tm: _RowTransfer, params: ClassicalParams):
    evals, evecs = tm.leading(1)
    psi = evecs[:, 0]
    psi = psi * np.sign(psi.sum())
    if params.h == 0.0:
        # the Perron vector is even under a global flip; remove any admixture
        # of the near-degenerate odd state at low temperature
        flip = (tm.dim - 1) ^ np.arange(tm.dim)
        psi = 0.5 * (psi + psi[flip])
        psi /= np.linalg.norm(psi)
    lam = float(psi @ tm.matvec(psi))
    if not lam > 0 or np.any(psi < -1e-10):
        raise ArithmeticError("transfer matrix leading eigenpair is not Perron-Frobenius")
    return lam, np.clip(psi, 0.0, None)


def lambda_max(spec: CylinderSpec, params: ClassicalParams) -> float:
    """Dominant eigenvalue itself (may overflow to ``inf`` at very low T)."""
    ln_lam, _ = row_transfer_spectrum(spec, params)
    return math.exp(ln_lam)


def gibbs_observables(spec: CylinderSpec, params: ClassicalParams) -> GibbsPoint:
    W, J, h, T = spec.W, params.J, params.h, params.T
    tm = _RowTransfer(W, params)
    lam, psi = _dominant(tm, params)
    F = -T * (math.log(lam) + tm.ln_scale) / W
    w = psi * psi
    z = float(w @ tm.mag) / W
    zz_row = float(w @ tm.bond) / W
    # vertical correlation <z_i z'_i> = psi Z_i T Z_i psi / lambda, averaged over i
    states = np.arange(tm.dim)
    zz_col = 0.0
    for i in range(W):
        zi = 1.0 - 2.0 * ((states >> i) & 1)
        u = zi * psi
        zz_col += float(u @ tm.matvec(u))
    zz_col /= W * lam
    zz = 0.5 * (zz_row + zz_col)
    E = -2.0 * J * zz - h * z
    S = (E - F) / T
    return GibbsPoint(zz=zz, S=S, z=z, F=F, E=E)


def probe_magnetization(spec: CylinderSpec, J: float, T: float, eps: float = 1e-3) -> float:
    """Order parameter selected by a probe field ``h = eps``.

    On a cylinder of finite width the two leading transfer-matrix states
    are split by tunnelling, which a field of size ``eps`` cannot overcome.
    When they form a doublet (correlation length along the cylinder longer
    than its circumference) the probe is applied inside it: the row
    magnetisation is diagonalised in the span of the two leading
    eigenvectors and the eigenvalue whose sign matches ``eps`` is returned.
    Otherwise the state is non-degenerate and the Perron vector in the
    probe field gives the linear response.
    """
    if eps == 0:
        raise ValueError("probe field must be non-zero")
    tm = _RowTransfer(spec.W, ClassicalParams(J, eps, T))
    lams, vecs = tm.leading(2)
    if lams[1] <= 0 or math.log(lams[0] / lams[1]) * spec.W > 1.0:
        psi = vecs[:, 0]
        return float((psi * psi) @ tm.mag) / spec.W
    m = vecs.T @ (tm.mag[:, None] / spec.W * vecs)
    vals = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(vals[-1] if eps > 0 else vals[0])


def aitken_extrapolate(values) -> float:
    """Aitken delta-squared limit of the last three terms of a sequence."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise ValueError("need at least three terms")
    a, b, c = v[-3:]
    denom = (c - b) - (b - a)
    if abs(denom) < 1e-15:
        return float(c)
    return float(c - (c - b) ** 2 / denom)


# --------------------------------------------------------------------------
# exact results at h = 0

def _onsager_integrand(theta, K):
    c2, s2 = math.cosh(2 * K) ** 2, math.sinh(2 * K)
    a = c2 - s2 * math.cos(theta)
    b = s2
    return math.log(0.5 * (a + math.sqrt(max(a * a - b * b, 0.0))))


def onsager_free_energy(T: float, J: float = 1.0) -> float:
    """Free energy per site of the zero-field square-lattice model.

    The double integral over both lattice momenta is reduced analytically
    in one momentum; the remaining angle is integrated adaptively.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    K = abs(J) / T
    kappa_crit = K > 0 and abs(math.sinh(2 * K) - 1.0) < 1e-3
    pts = [1e-3, 1e-2, 1e-1] if kappa_crit else None
    val, _ = scipy.integrate.quad(_onsager_integrand, 0.0, math.pi, args=(K,),
                                  epsabs=1e-13, epsrel=1e-13, limit=500, points=pts)
    beta_f = -(math.log(2.0) + val / (2 * math.pi))
    return T * beta_f


def onsager_energy(T: float, J: float = 1.0) -> float:
    """Internal energy per site at zero field (complete elliptic integral form)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    K = abs(J) / T
    s, c = math.sinh(2 * K), math.cosh(2 * K)
    t = math.tanh(2 * K)
    kappa = 2 * s / (c * c)
    if kappa >= 1.0:
        # (2 t^2 - 1) K(kappa) -> 0 at the critical point
        return -abs(J) * c / s
    k1 = scipy.special.ellipk(kappa * kappa)
    return -abs(J) * (c / s) * (1 + (2 / math.pi) * (2 * t * t - 1) * k1)


def onsager_magnetization(T: float) -> float:
    """Spontaneous magnetisation for ``J = 1``; zero at and above the critical point."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    if T >= T_CRITICAL:
        return 0.0
    x = 1.0 - math.sinh(2.0 / T) ** -4
    return x ** 0.125 if x > 0 else 0.0

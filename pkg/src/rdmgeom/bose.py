"""Ideal Bose gas in three dimensions with a U(1)-breaking source ``v``.

Units: ``k_B = 1``, ``m = 1``, density ``rho = 1`` unless stated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

MASS = 1.0
DENSITY = 1.0

# below this argument the zeta-series expansion is used instead of the direct sum
_SMALL_X = 1.0
_ZETA_TERMS = 40


@dataclass(frozen=True)
class BoseParams:
    v: float
    T: float

    def __post_init__(self):
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "T", float(self.T))
        if not (math.isfinite(self.v) and math.isfinite(self.T)):
            raise ValueError("non-finite parameters")
        if self.v < 0:
            raise ValueError("source v must be non-negative")
        if self.T <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class BoseState:
    mu: float
    lam: float
    psi: float
    S: float
    Ekin: float
    T: float
    v: float
    sign: int = 1

    @property
    def beta(self) -> float:
        return 1.0 / self.T

    def density_residual(self) -> float:
        x = -self.mu / self.T
        cond = self.psi ** 2 if self.mu == 0 else (self.v / self.mu) ** 2
        return cond + self.lam ** -3 * polylog_F(1.5, x) - DENSITY


def polylog_F(sigma: float, x: float) -> float:
    """``F_sigma(x) = sum_{n>=1} n^-sigma exp(-n x)`` for ``x >= 0``.

    Large ``x``: direct summation with a geometric tail bound. Small ``x``:
    the convergent expansion
    ``Gamma(1-sigma) x^(sigma-1) + sum_k zeta(sigma-k) (-x)^k / k!``
    (valid for non-integer ``sigma`` and ``x < 2 pi``).
    """
    if x < 0 or math.isnan(x):
        raise ValueError(f"F_sigma needs x >= 0, got {x}")
    if x == 0:
        if sigma <= 1:
            raise ValueError("F_sigma(0) diverges for sigma <= 1")
        return float(scipy.special.zeta(sigma))
    if x < _SMALL_X and sigma != int(sigma):
        k = np.arange(_ZETA_TERMS)
        terms = scipy.special.zeta(sigma - k) * (-x) ** k / scipy.special.factorial(k)
        return float(scipy.special.gamma(1 - sigma) * x ** (sigma - 1) + terms.sum())
    q = math.exp(-x)
    total = 0.0
    n = 1
    qn = q
    while True:
        term = n ** -sigma * qn
        total += term
        # remaining terms are below term * q / (1 - q)
        if term * q / (1 - q) < 1e-17 * max(total, 1e-300):
            break
        n += 1
        qn *= q
    return total


def thermal_wavelength(T: float, m: float = MASS) -> float:
    return math.sqrt(2 * math.pi / (m * T))


def bose_tc(rho: float = DENSITY, m: float = MASS) -> float:
    """Critical temperature at ``v = 0``: ``2 pi / (m lambda_c^2)``, ``lambda_c^3 = F_3/2(0) / rho``."""
    if rho <= 0:
        raise ValueError("density must be positive")
    lam_c = (polylog_F(1.5, 0.0) / rho) ** (1 / 3)
    return 2 * math.pi / (m * lam_c ** 2)


def _state(mu, T, v, psi, sign=1):
    lam = thermal_wavelength(T)
    x = -mu / T
    f32 = polylog_F(1.5, x)
    f52 = polylog_F(2.5, x)
    S = 2.5 * lam ** -3 * f52 + x * lam ** -3 * f32
    Ekin = 3.0 / (2.0 * T ** -2 * lam ** 3) * f52
    return BoseState(mu=mu, lam=lam, psi=psi, S=S, Ekin=Ekin, T=T, v=v, sign=sign)


def solve_mu(params: BoseParams) -> BoseState:
    """Chemical potential fixing the density at one for a source ``v > 0``."""
    v, T = params.v, params.T
    if v <= 0:
        raise ValueError("solve_mu needs v > 0; use bose_v0_branch at v = 0")
    lam3 = thermal_wavelength(T) ** -3

    # in terms of y = log(x), x = -mu/T; the constraint decreases monotonically in x
    def g(y):
        x = math.exp(y)
        return (v / (T * x)) ** 2 + lam3 * polylog_F(1.5, x) - DENSITY

    lo, hi = -5.0, 5.0
    while g(lo) < 0:
        lo -= 5.0
        if lo < -700:
            raise ArithmeticError(f"cannot bracket chemical potential for {params}")
    while g(hi) > 0:
        hi += 5.0
        if hi > 700:
            raise ArithmeticError(f"cannot bracket chemical potential for {params}")
    y = scipy.optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    mu = -T * math.exp(y)
    state = _state(mu, T, v, -v / mu)
    res = state.density_residual()
    if abs(res) > 1e-10:
        raise ArithmeticError(f"density residual {res:.2e} for {params}")
    return state


def bose_v0_branch(T: float, branch_psi_sign: int = 1) -> BoseState:
    """The ``v -> 0`` limit; below ``T_c`` the condensate fixes ``mu = 0``.

    ``branch_psi_sign`` (+1 or -1) labels the two ends of the ruled
    segment; ``psi`` itself is stored as the absolute value.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    if branch_psi_sign not in (1, -1):
        raise ValueError("branch sign must be +1 or -1")
    lam3 = thermal_wavelength(T) ** -3
    excess = DENSITY - lam3 * polylog_F(1.5, 0.0)
    if excess > 0:
        return _state(0.0, T, 0.0, math.sqrt(excess), branch_psi_sign)

    def g(y):
        return lam3 * polylog_F(1.5, math.exp(y)) - DENSITY

    hi = 5.0
    while g(hi) > 0:
        hi += 5.0
    if g(-40.0) < 0:
        # at T_c to within rounding
        return _state(0.0, T, 0.0, 0.0, branch_psi_sign)
    y = scipy.optimize.brentq(g, -40.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return _state(-T * math.exp(y), T, 0.0, 0.0, branch_psi_sign)


def rg_flow(params: BoseParams, s: float) -> BoseParams:
    """Exact momentum-shell flow at fixed density: ``beta e^{-2s}``, ``v e^{7s/2}``."""
    return BoseParams(v=params.v * math.exp(3.5 * s), T=params.T * math.exp(2.0 * s))


def bose_point(state: BoseState, signed: bool = False):
    """``(Ekin, S, psi)``; the order parameter carries the branch sign if asked."""
    psi = state.sign * state.psi if signed else state.psi
    return (state.Ekin, state.S, psi)

"""Inner loops, each in a numba and a plain-numpy flavour.

Setting ``RDMGEOM_DISABLE_NUMBA=1`` in the environment (read once at
import) routes every public kernel to its numpy implementation. Both
flavours are always importable as ``<name>_numba`` / ``<name>_numpy`` so
tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("RDMGEOM_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def _njit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# bit-flip operators on a (possibly restricted) computational basis
#
#   out[k] = diag[k] psi[k] + sum_m coef[m] psi[lookup[states[k] ^ masks[m]]]
#
# lookup[s] == -1 marks basis states outside the retained subspace.


@_njit
def _flip_matvec_nb(psi, states, lookup, masks, coefs, diag):
    n = states.shape[0]
    out = np.empty_like(psi)
    for k in range(n):
        acc = diag[k] * psi[k]
        s = states[k]
        for m in range(masks.shape[0]):
            j = lookup[s ^ masks[m]]
            if j >= 0:
                acc += coefs[m] * psi[j]
        out[k] = acc
    return out


def flip_matvec_numpy(psi, states, lookup, masks, coefs, diag):
    out = diag * psi
    for mask, coef in zip(masks, coefs):
        j = lookup[states ^ mask]
        if coef == 0.0:
            continue
        inside = j >= 0
        if inside.all():
            out = out + coef * psi[j]
        else:
            out[inside] += coef * psi[j[inside]]
    return out


def flip_matvec_numba(psi, states, lookup, masks, coefs, diag):
    return _flip_matvec_nb(
        np.ascontiguousarray(psi),
        states,
        lookup,
        np.ascontiguousarray(masks, dtype=np.int64),
        np.ascontiguousarray(coefs, dtype=psi.dtype),
        np.ascontiguousarray(diag, dtype=psi.dtype),
    )


@_njit
def _flip_overlap_nb(psi, states, lookup, mask):
    acc = 0.0
    for k in range(states.shape[0]):
        j = lookup[states[k] ^ mask]
        if j >= 0:
            acc += psi[k] * psi[j]
    return acc


def flip_overlap_numpy(psi, states, lookup, mask):
    """``<psi| F_mask |psi>`` for a real vector and a single bit-flip operator."""
    j = lookup[states ^ mask]
    inside = j >= 0
    return float(np.dot(psi[inside], psi[j[inside]]))


def flip_overlap_numba(psi, states, lookup, mask):
    return float(_flip_overlap_nb(np.ascontiguousarray(psi), states, lookup, np.int64(mask)))


# ---------------------------------------------------------------------------
# classical +-1 configurations encoded as integers (bit 1 -> spin -1)


@_njit
def _config_sums_nb(n_sites, periodic):
    dim = 1 << n_sites
    nb = n_sites if periodic else n_sites - 1
    bond = np.empty(dim, dtype=np.int64)
    mag = np.empty(dim, dtype=np.int64)
    for s in range(dim):
        m = 0
        for i in range(n_sites):
            m += 1 - 2 * ((s >> i) & 1)
        b = 0
        for i in range(nb):
            j = (i + 1) % n_sites
            b += 1 - 2 * (((s >> i) ^ (s >> j)) & 1)
        bond[s] = b
        mag[s] = m
    return bond, mag


def config_sums_numpy(n_sites, periodic):
    """Per-configuration sums ``(sum_j x_j x_{j+1}, sum_j x_j)``."""
    s = np.arange(1 << n_sites, dtype=np.int64)
    mag = np.zeros_like(s)
    bond = np.zeros_like(s)
    nb = n_sites if periodic else n_sites - 1
    for i in range(n_sites):
        mag += 1 - 2 * ((s >> i) & 1)
    for i in range(nb):
        j = (i + 1) % n_sites
        bond += 1 - 2 * (((s >> i) ^ (s >> j)) & 1)
    return bond, mag


def config_sums_numba(n_sites, periodic):
    return _config_sums_nb(int(n_sites), bool(periodic))


# ---------------------------------------------------------------------------
# apply m (x) m (x) ... (x) m (width factors of a 2x2 matrix) to a vector


@_njit
def _kron_apply_nb(vec, m, width):
    out = vec.copy()
    tmp = np.empty_like(vec)
    dim = vec.shape[0]
    for q in range(width):
        stride = 1 << q
        for s in range(dim):
            if (s >> q) & 1:
                continue
            lo = out[s]
            hi = out[s + stride]
            tmp[s] = m[0, 0] * lo + m[0, 1] * hi
            tmp[s + stride] = m[1, 0] * lo + m[1, 1] * hi
        out, tmp = tmp, out
    return out


def kron_apply_numpy(vec, m, width):
    out = vec
    for q in range(width):
        v = out.reshape(1 << (width - q - 1), 2, 1 << q)
        out = np.einsum("ab,ibj->iaj", m, v).reshape(-1)
    return out


def kron_apply_numba(vec, m, width):
    return _kron_apply_nb(np.ascontiguousarray(vec, dtype=np.float64),
                          np.ascontiguousarray(m, dtype=np.float64), int(width))


# ---------------------------------------------------------------------------
# multi-start Newton minimisation of the two-site product-state energy
#
#   e(ta, tb) = -J sin ta sin tb - Bz (cos ta + cos tb)/2 - Bx (sin ta + sin tb)/2
#
# with Bloch vectors a = (sin ta, 0, cos ta), b = (sin tb, 0, cos tb).


@_njit
def _mf_energy_grad_hess(ta, tb, J, Bz, Bx):
    sa, ca = np.sin(ta), np.cos(ta)
    sb, cb = np.sin(tb), np.cos(tb)
    e = -J * sa * sb - 0.5 * Bz * (ca + cb) - 0.5 * Bx * (sa + sb)
    ga = -J * ca * sb + 0.5 * Bz * sa - 0.5 * Bx * ca
    gb = -J * sa * cb + 0.5 * Bz * sb - 0.5 * Bx * cb
    haa = J * sa * sb + 0.5 * Bz * ca + 0.5 * Bx * sa
    hbb = J * sa * sb + 0.5 * Bz * cb + 0.5 * Bx * sb
    hab = -J * ca * cb
    return e, ga, gb, haa, hbb, hab


@_njit
def _mf_multistart_nb(J, Bz, Bx, theta0, maxiter, gtol):
    r = theta0.shape[0]
    theta = theta0.copy()
    energy = np.empty(r)
    gnorm = np.empty(r)
    for k in range(r):
        ta = theta[k, 0]
        tb = theta[k, 1]
        e, ga, gb, haa, hbb, hab = _mf_energy_grad_hess(ta, tb, J, Bz, Bx)
        for _ in range(maxiter):
            g2 = np.sqrt(ga * ga + gb * gb)
            if g2 < gtol:
                break
            det = haa * hbb - hab * hab
            if haa > 0 and det > 0:
                da = -(hbb * ga - hab * gb) / det
                db = -(haa * gb - hab * ga) / det
            else:
                da = -ga
                db = -gb
            step = 1.0
            accepted = False
            for _ls in range(60):
                na = ta + step * da
                nb_ = tb + step * db
                e2, ga2, gb2, haa2, hbb2, hab2 = _mf_energy_grad_hess(na, nb_, J, Bz, Bx)
                armijo = e2 <= e + 1e-4 * step * (ga * da + gb * db)
                # near convergence the energy change drops below roundoff
                flat = (ga2 * ga2 + gb2 * gb2 < ga * ga + gb * gb) and e2 <= e + 1e-13 * (1.0 + abs(e))
                if armijo or flat:
                    ta, tb = na, nb_
                    e, ga, gb, haa, hbb, hab = e2, ga2, gb2, haa2, hbb2, hab2
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        theta[k, 0] = ta
        theta[k, 1] = tb
        energy[k] = e
        gnorm[k] = np.sqrt(ga * ga + gb * gb)
    return theta, energy, gnorm


def _mf_egh_numpy(ta, tb, J, Bz, Bx):
    sa, ca = np.sin(ta), np.cos(ta)
    sb, cb = np.sin(tb), np.cos(tb)
    e = -J * sa * sb - 0.5 * Bz * (ca + cb) - 0.5 * Bx * (sa + sb)
    ga = -J * ca * sb + 0.5 * Bz * sa - 0.5 * Bx * ca
    gb = -J * sa * cb + 0.5 * Bz * sb - 0.5 * Bx * cb
    haa = J * sa * sb + 0.5 * Bz * ca + 0.5 * Bx * sa
    hbb = J * sa * sb + 0.5 * Bz * cb + 0.5 * Bx * sb
    hab = -J * ca * cb
    return e, ga, gb, haa, hbb, hab


def mf_multistart_numpy(J, Bz, Bx, theta0, maxiter, gtol):
    """Vectorised over restarts; same iteration as the compiled kernel."""
    theta = np.array(theta0, dtype=float, copy=True)
    ta, tb = theta[:, 0].copy(), theta[:, 1].copy()
    e, ga, gb, haa, hbb, hab = _mf_egh_numpy(ta, tb, J, Bz, Bx)
    active = np.ones(ta.shape, dtype=bool)
    for _ in range(maxiter):
        active &= np.hypot(ga, gb) >= gtol
        if not active.any():
            break
        det = haa * hbb - hab * hab
        newton = (haa > 0) & (det > 0)
        safe = np.where(newton, det, 1.0)
        da = np.where(newton, -(hbb * ga - hab * gb) / safe, -ga)
        db = np.where(newton, -(haa * gb - hab * ga) / safe, -gb)
        slope = ga * da + gb * db
        step = np.ones_like(ta)
        pending = active.copy()
        for _ls in range(60):
            if not pending.any():
                break
            na, nb_ = ta + step * da, tb + step * db
            e2, ga2, gb2, haa2, hbb2, hab2 = _mf_egh_numpy(na, nb_, J, Bz, Bx)
            armijo = e2 <= e + 1e-4 * step * slope
            flat = (np.hypot(ga2, gb2) < np.hypot(ga, gb)) & (e2 <= e + 1e-13 * (1.0 + np.abs(e)))
            ok = pending & (armijo | flat)
            ta = np.where(ok, na, ta)
            tb = np.where(ok, nb_, tb)
            e = np.where(ok, e2, e)
            ga = np.where(ok, ga2, ga)
            gb = np.where(ok, gb2, gb)
            haa = np.where(ok, haa2, haa)
            hbb = np.where(ok, hbb2, hbb)
            hab = np.where(ok, hab2, hab)
            pending &= ~ok
            step = np.where(pending, step * 0.5, step)
        active &= ~pending
    theta[:, 0], theta[:, 1] = ta, tb
    return theta, e, np.hypot(ga, gb)


def mf_multistart_numba(J, Bz, Bx, theta0, maxiter, gtol):
    return _mf_multistart_nb(float(J), float(Bz), float(Bx),
                             np.ascontiguousarray(theta0, dtype=np.float64),
                             int(maxiter), float(gtol))


# ---------------------------------------------------------------------------
# brute-force supporting planes of a 3D point set (O(n^4), oracle use only)


@_njit
def _support_planes_nb(p, eps):
    n = p.shape[0]
    cap = 64
    planes = np.empty((cap, 4))
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                ux = p[j, 0] - p[i, 0]
                uy = p[j, 1] - p[i, 1]
                uz = p[j, 2] - p[i, 2]
                vx = p[k, 0] - p[i, 0]
                vy = p[k, 1] - p[i, 1]
                vz = p[k, 2] - p[i, 2]
                nx = uy * vz - uz * vy
                ny = uz * vx - ux * vz
                nz = ux * vy - uy * vx
                nn = np.sqrt(nx * nx + ny * ny + nz * nz)
                if nn < 1e-12:
                    continue
                nx /= nn
                ny /= nn
                nz /= nn
                off = nx * p[i, 0] + ny * p[i, 1] + nz * p[i, 2]
                above = False
                below = False
                for q in range(n):
                    d = nx * p[q, 0] + ny * p[q, 1] + nz * p[q, 2] - off
                    if d > eps:
                        above = True
                    elif d < -eps:
                        below = True
                    if above and below:
                        break
                if above and below:
                    continue
                if above:
                    nx, ny, nz, off = -nx, -ny, -nz, -off
                if count == cap:
                    grown = np.empty((2 * cap, 4))
                    grown[:cap] = planes
                    planes = grown
                    cap *= 2
                planes[count, 0] = nx
                planes[count, 1] = ny
                planes[count, 2] = nz
                planes[count, 3] = off
                count += 1
    return planes[:count].copy()


def support_planes_numpy(p, eps):
    """Every plane through three points with all points on one side.

    Returned rows are ``(nx, ny, nz, offset)`` oriented so that
    ``n . x <= offset + eps`` for all input points.
    """
    p = np.asarray(p, dtype=float)
    n = len(p)
    out = []
    for i in range(n):
        for j in range(i + 1, n - 1):
            u = p[j] - p[i]
            v = p[j + 1:] - p[i]
            normals = np.cross(u, v)
            nn = np.linalg.norm(normals, axis=1)
            keep = nn >= 1e-12
            if not keep.any():
                continue
            normals = normals[keep] / nn[keep, None]
            off = normals @ p[i]
            d = normals @ p.T - off[:, None]
            above = (d > eps).any(axis=1)
            below = (d < -eps).any(axis=1)
            ok = ~(above & below)
            flip = np.where(above[ok], -1.0, 1.0)
            out.append(np.column_stack([normals[ok] * flip[:, None], off[ok] * flip]))
    if not out:
        return np.empty((0, 4))
    return np.vstack(out)


def support_planes_numba(p, eps):
    return _support_planes_nb(np.ascontiguousarray(p, dtype=np.float64), float(eps))


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    flip_matvec = flip_matvec_numba
    flip_overlap = flip_overlap_numba
    config_sums = config_sums_numba
    kron_apply = kron_apply_numba
    mf_multistart = mf_multistart_numba
    support_planes = support_planes_numba
else:
    flip_matvec = flip_matvec_numpy
    flip_overlap = flip_overlap_numpy
    config_sums = config_sums_numpy
    kron_apply = kron_apply_numpy
    mf_multistart = mf_multistart_numpy
    support_planes = support_planes_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"

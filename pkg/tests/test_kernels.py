"""The numba and numpy flavours of every kernel agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from rdmgeom import _kernels as K
from rdmgeom.core import SpinParams
from rdmgeom.spin import ChainSpec, chain_ground


@pytest.mark.parametrize("periodic", [True, False])
@pytest.mark.parametrize("n", [2, 3, 7, 10])
def test_config_sums_agree(n, periodic):
    b1, m1 = K.config_sums_numba(n, periodic)
    b2, m2 = K.config_sums_numpy(n, periodic)
    assert np.array_equal(b1, b2) and np.array_equal(m1, m2)
    assert m1[0] == n
    assert b1[0] == (n if periodic else n - 1)  # a two-site ring counts its bond twice


def test_config_sums_brute():
    n = 5
    bond, mag = K.config_sums(n, True)
    for s in range(1 << n):
        x = [1 - 2 * ((s >> i) & 1) for i in range(n)]
        assert mag[s] == sum(x)
        assert bond[s] == sum(x[i] * x[(i + 1) % n] for i in range(n))


def test_flip_matvec_agree(rng):
    n = 6
    states = np.arange(1 << n, dtype=np.int64)
    keep = states[rng.random(len(states)) < 0.7]
    lookup = np.full(1 << n, -1, dtype=np.int64)
    lookup[keep] = np.arange(len(keep))
    masks = np.array([1 << i for i in range(n)] + [3, 5 << 2], dtype=np.int64)
    coefs = rng.normal(size=len(masks))
    diag = rng.normal(size=len(keep))
    psi = rng.normal(size=len(keep))
    a = K.flip_matvec_numba(psi, keep, lookup, masks, coefs, diag)
    b = K.flip_matvec_numpy(psi, keep, lookup, masks, coefs, diag)
    assert np.allclose(a, b, atol=1e-13)
    for m in masks:
        assert K.flip_overlap_numba(psi, keep, lookup, m) == pytest.approx(
            K.flip_overlap_numpy(psi, keep, lookup, m), abs=1e-12)


def test_kron_apply_agree_and_dense(rng):
    w = 5
    m = rng.normal(size=(2, 2))
    v = rng.normal(size=1 << w)
    dense = m
    for _ in range(w - 1):
        dense = np.kron(dense, m)
    assert np.allclose(K.kron_apply_numba(v, m, w), dense @ v)
    assert np.allclose(K.kron_apply_numpy(v, m, w), dense @ v)


@pytest.mark.parametrize("J,Bz,Bx", [(1, 1, 0), (-1, 0.3, 0.2), (0.2, -0.9, 0.5), (0, 0, 1)])
def test_mf_multistart_agree(J, Bz, Bx, rng):
    theta0 = rng.uniform(0, 2 * np.pi, size=(16, 2))
    t1, e1, g1 = K.mf_multistart_numba(J, Bz, Bx, theta0, 500, 1e-10)
    t2, e2, g2 = K.mf_multistart_numpy(J, Bz, Bx, theta0, 500, 1e-10)
    assert np.allclose(e1, e2, atol=1e-12)
    assert (g1 < 1e-10).all() and (g2 < 1e-10).all()
    assert e1.min() == pytest.approx(e2.min(), abs=1e-14)


def test_support_planes_agree(rng):
    P = rng.normal(size=(25, 3))
    a = K.support_planes_numba(P, 1e-12)
    b = K.support_planes_numpy(P, 1e-12)
    key = lambda X: np.array(sorted(map(tuple, np.round(X, 9))))
    assert np.allclose(key(a), key(b))
    assert ((P @ a[:, :3].T - a[:, 3]) <= 1e-9).all()


def test_backend_flag():
    assert K.BACKEND in ("numba", "numpy")
    assert K.USE_NUMBA == (K.BACKEND == "numba")


def test_disable_flag_selects_numpy_backend():
    code = ("from rdmgeom import _kernels; from rdmgeom.spin import *; from rdmgeom.core import SpinParams;"
            "print(_kernels.BACKEND, chain_ground(ChainSpec(10), SpinParams(1, 0.6, 0.02)).energy_per_site)")
    env = dict(os.environ, RDMGEOM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, energy = out.stdout.split()
    assert backend == "numpy"
    ref = chain_ground(ChainSpec(10), SpinParams(1, 0.6, 0.02)).energy_per_site
    assert float(energy) == pytest.approx(ref, abs=1e-12)

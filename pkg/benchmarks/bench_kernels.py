"""Timing of each kernel in its numba and numpy flavour.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both flavours are called on the same inputs, their outputs are compared,
and the best-of-``repeat`` wall time is printed. The first numba call
(compilation) is excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from rdmgeom import _kernels as K
from rdmgeom.spin import _chain_basis


def best_time(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)

    basis = _chain_basis(16, True, None)
    masks = np.concatenate([basis.bond_masks, basis.site_masks])
    coefs = np.concatenate([np.full(16, -1.0), np.full(16, -0.3)])
    diag = -0.7 * basis.zsum
    psi = rng.standard_normal(len(basis.states))
    yield ("flip_matvec N=16", lambda f: f(psi, basis.states, basis.lookup, masks, coefs, diag),
           K.flip_matvec_numba, K.flip_matvec_numpy)
    yield ("flip_overlap N=16", lambda f: f(psi, basis.states, basis.lookup, basis.bond_masks[0]),
           K.flip_overlap_numba, K.flip_overlap_numpy)

    yield ("config_sums W=16", lambda f: f(16, True), K.config_sums_numba, K.config_sums_numpy)

    vec = rng.random(1 << 14)
    m = np.array([[1.0, 0.4], [0.4, 1.0]])
    yield ("kron_apply W=14", lambda f: f(vec, m, 14), K.kron_apply_numba, K.kron_apply_numpy)

    theta0 = rng.uniform(0, 2 * np.pi, size=(64, 2))
    yield ("mf_multistart 64 starts", lambda f: f(1.0, 0.7, 0.05, theta0, 200, 1e-13),
           K.mf_multistart_numba, K.mf_multistart_numpy)

    pts = rng.normal(size=(60, 3))
    yield ("support_planes n=60", lambda f: f(pts, 1e-12), K.support_planes_numba, K.support_planes_numpy)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.allclose(a, b, rtol=1e-9, atol=1e-9))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':28s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}  agree")
    for name, call, nb, py in cases():
        t_nb = best_time(lambda: call(nb), args.repeat)
        t_py = best_time(lambda: call(py), args.repeat)
        ok = same(call(nb), call(py))
        print(f"{name:28s} {1e3 * t_nb:11.3f} {1e3 * t_py:11.3f} {t_py / t_nb:9.1f}  {ok}")


if __name__ == "__main__":
    main()

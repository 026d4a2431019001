"""Compiled inner loops for the fixed-step integrator."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _hpsi(v, s, sb, bi, bj, wb, kq, kf, n, nb, out):
    for i in range(n):
        out[i] = sb[i] * v[n + i]
        out[n + i] = s[i] * v[i] - 1j * kq * v[n + i]
    for b in range(nb):
        f = v[2 * n + b]
        out[n + bi[b]] += wb[b] * f
        out[n + bj[b]] += wb[b] * f
        out[2 * n + b] = wb[b] * (v[n + bi[b]] + v[n + bj[b]]) - 1j * kf * f


@njit(cache=True, nogil=True)
def rk4_chunk(psi, s, sb, bi, bj, wb, kq, kf, dt, sample_every, step0, samples, sample_pos):
    """Advance ``psi`` in place by ``s.shape[0] // 2`` RK4 steps.

    ``s`` and ``sb`` hold the couplings on the half-step grid of this chunk
    (``2 * nsteps + 1`` rows).  Every ``sample_every``-th global step the
    state is copied into ``samples``; returns the next free sample row.
    """
    n = s.shape[1]
    nb = bi.shape[0]
    dim = psi.shape[0]
    nsteps = (s.shape[0] - 1) // 2
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    tmp = np.empty(dim, dtype=np.complex128)
    h2 = 0.5 * dt
    for k in range(nsteps):
        r0 = 2 * k
        _hpsi(psi, s[r0], sb[r0], bi, bj, wb, kq, kf, n, nb, k1)
        for m in range(dim):
            k1[m] = -1j * k1[m]
            tmp[m] = psi[m] + h2 * k1[m]
        _hpsi(tmp, s[r0 + 1], sb[r0 + 1], bi, bj, wb, kq, kf, n, nb, k2)
        for m in range(dim):
            k2[m] = -1j * k2[m]
            tmp[m] = psi[m] + h2 * k2[m]
        _hpsi(tmp, s[r0 + 1], sb[r0 + 1], bi, bj, wb, kq, kf, n, nb, k3)
        for m in range(dim):
            k3[m] = -1j * k3[m]
            tmp[m] = psi[m] + dt * k3[m]
        _hpsi(tmp, s[r0 + 2], sb[r0 + 2], bi, bj, wb, kq, kf, n, nb, k4)
        for m in range(dim):
            psi[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] - 1j * k4[m])
        if (step0 + k + 1) % sample_every == 0:
            samples[sample_pos, :] = psi
            sample_pos += 1
    return sample_pos

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors numpy_backend operation for operation; see that module for the
contract.  Distance expansion and accumulation order are kept identical so
the two backends agree (loss bitwise, synthesis to rounding noise).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, rint, M_PI

cnp.import_array()


def tdoa_loss_points(points, antennas, obs_antenna, obs_reference, measured,
                     double inv_speed):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] pts = \
        np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ant = \
        np.ascontiguousarray(antennas, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] oa = \
        np.ascontiguousarray(obs_antenna, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] orf = \
        np.ascontiguousarray(obs_reference, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] meas = \
        np.ascontiguousarray(measured, dtype=np.float64)

    cdef Py_ssize_t n_points = pts.shape[0]
    cdef Py_ssize_t n_ant = ant.shape[0]
    cdef Py_ssize_t n_obs = meas.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_points)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.empty(n_ant)

    cdef Py_ssize_t p, m, k
    cdef double dx, dy, dz, expected, resid, acc
    for p in range(n_points):
        for m in range(n_ant):
            dx = pts[p, 0] - ant[m, 0]
            dy = pts[p, 1] - ant[m, 1]
            dz = pts[p, 2] - ant[m, 2]
            dist[m] = sqrt(dx * dx + dy * dy + dz * dz)
        acc = 0.0
        for k in range(n_obs):
            expected = (dist[oa[k]] - dist[orf[k]]) * inv_speed
            resid = meas[k] - expected
            acc += resid * resid
        out[p] = acc
    return out


def dirichlet_cir(Py_ssize_t n_fft, centers, gains):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cen = \
        np.ascontiguousarray(centers, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] gn = \
        np.ascontiguousarray(gains, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] h = \
        np.zeros(n_fft, dtype=np.complex128)

    cdef Py_ssize_t j, i
    cdef double c, x, r, num, den, kr, ph, k_re, k_im, g_re, g_im
    cdef double nf = <double> n_fft
    for j in range(cen.shape[0]):
        c = cen[j]
        g_re = gn[j].real
        g_im = gn[j].imag
        for i in range(n_fft):
            x = i - c
            r = x - nf * rint(x / nf)
            if r == 0.0:
                k_re = 1.0
                k_im = 0.0
            else:
                num = sin(M_PI * r)
                den = nf * sin(M_PI * r / nf)
                kr = num / den
                ph = M_PI * r * (nf - 1.0) / nf
                k_re = kr * cos(ph)
                k_im = kr * sin(ph)
            h[i].real = h[i].real + (g_re * k_re - g_im * k_im)
            h[i].imag = h[i].imag + (g_re * k_im + g_im * k_re)
    return h

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same arithmetic as ``_pykernels``.

Column medians are left to numpy, whose vectorised sort is faster than a
per-column compiled one.

Inputs must be NaN-free; ``_kernels`` maps NaN to +inf before calling in.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport asin, erfc, exp, fabs, sin, sqrt

cnp.import_array()

BACKEND = "cython"

cdef double TWOPI = 6.283185307179586
cdef double SQRT1_2 = 0.7071067811865476

cdef double GLX[3][10]
cdef double GLW[3][10]
cdef int GLN[3]

GLN[:] = [3, 6, 10]
GLX[0][:3] = [-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]
GLW[0][:3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904]
GLX[1][:6] = [-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
              -0.5873179542866171, -0.3678314989981802, -0.1252334085114692]
GLW[1][:6] = [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]
GLX[2][:] = [-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
             -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
             -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
             -0.07652652113349733]
GLW[2][:] = [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
             0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
             0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
             0.1527533871307259]


cdef inline double _ndtr(double x) noexcept nogil:
    return 0.5 * erfc(-x * SQRT1_2)


cdef inline Py_ssize_t _count_le(const double *v, Py_ssize_t m, double t) noexcept nogil:
    # number of sorted entries <= t
    cdef Py_ssize_t lo = 0, hi = m, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if v[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline double _median_sorted(const double *v, Py_ssize_t m) noexcept nogil:
    if m % 2:
        return v[m // 2]
    return 0.5 * (v[m // 2 - 1] + v[m // 2])


def vrmol_columns(values, scales, deltas, double kappa_sum, double psi_sum):
    # numpy's vectorised sort beats a per-column std::sort; the counting runs here
    cdef const double[:, ::1] v = np.sort(np.ascontiguousarray(np.asarray(values, dtype=np.float64).T),
                                          axis=1)
    cdef const double[:] s = np.ascontiguousarray(scales, dtype=np.float64).reshape(-1)
    cdef const double[:] dl = np.ascontiguousarray(deltas, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t cols = v.shape[0], m = v.shape[1], K = dl.shape[0]
    cdef Py_ssize_t l, k
    cdef long long total
    cdef double med, corr
    cdef const double *row
    if s.shape[0] != cols:
        raise ValueError("one scale per column is required")
    if m == 0:
        raise ValueError("VRMOL of an empty column")
    out = np.empty(cols)
    cdef double[:] o = out
    with nogil:
        for l in range(cols):
            row = &v[l, 0]
            med = _median_sorted(row, m)
            total = 0
            for k in range(K):
                total += _count_le(row, m, med + s[l] * dl[k])
            corr = s[l] * (<double>total - m * kappa_sum) / (m * psi_sum)
            o[l] = med - corr
    return out


cdef double _bvn(double sh, double sk, double r) noexcept nogil:
    cdef int ng, i, n
    cdef double h = -sh, k = -sk, hk, bvn = 0.0, hs, asr, sn
    cdef double as_, a, bs, c, d, b, xs, rs, val, mx
    if fabs(r) < 0.3:
        ng = 0
    elif fabs(r) < 0.75:
        ng = 1
    else:
        ng = 2
    n = GLN[ng]
    hk = h * k
    if fabs(r) < 0.925:
        hs = (h * h + k * k) / 2
        asr = asin(r)
        for i in range(n):
            sn = sin(asr * (GLX[ng][i] + 1) / 2)
            bvn += GLW[ng][i] * exp((sn * hk - hs) / (1 - sn * sn))
            sn = sin(asr * (-GLX[ng][i] + 1) / 2)
            bvn += GLW[ng][i] * exp((sn * hk - hs) / (1 - sn * sn))
        bvn = bvn * asr / (2 * TWOPI) + _ndtr(-h) * _ndtr(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        if fabs(r) < 1:
            as_ = (1 - r) * (1 + r)
            a = sqrt(as_)
            bs = (h - k) * (h - k)
            c = (4 - hk) / 8
            d = (12 - hk) / 16
            val = a * exp(-(bs / as_ + hk) / 2) * (
                1 - c * (bs - as_) * (1 - d * bs / 5) / 3 + c * d * as_ * as_ / 5)
            if hk > -160:
                b = sqrt(bs)
                val -= (exp(-hk / 2) * sqrt(TWOPI) * _ndtr(-b / a)
                        * b * (1 - c * bs * (1 - d * bs / 5) / 3))
            a = a / 2
            for i in range(n):
                xs = (a * (GLX[ng][i] + 1)) * (a * (GLX[ng][i] + 1))
                rs = sqrt(1 - xs)
                val += a * GLW[ng][i] * (exp(-bs / (2 * xs) - hk / (1 + rs)) / rs
                                         - exp(-(bs / xs + hk) / 2) * (1 + c * xs * (1 + d * xs)))
                xs = as_ * (-GLX[ng][i] + 1) * (-GLX[ng][i] + 1) / 4
                rs = sqrt(1 - xs)
                val += a * GLW[ng][i] * exp(-(bs / xs + hk) / 2) * (
                    exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs - (1 + c * xs * (1 + d * xs)))
            bvn = -val / TWOPI
        if r > 0:
            mx = h if h > k else k
            bvn += _ndtr(-mx)
        if r < 0:
            val = _ndtr(-h) - _ndtr(-k)
            bvn = -bvn + (val if val > 0 else 0.0)
    if bvn < 0:
        return 0.0
    if bvn > 1:
        return 1.0
    return bvn


def bvn_cdf(a, b, r):
    a_, b_, r_ = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                     np.asarray(r, float))
    shape = a_.shape
    cdef const double[:] av = np.ascontiguousarray(a_, dtype=np.float64).reshape(-1)
    cdef const double[:] bv = np.ascontiguousarray(b_, dtype=np.float64).reshape(-1)
    cdef const double[:] rv = np.ascontiguousarray(r_, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    out = np.empty(n)
    cdef double[:] o = out
    with nogil:
        for i in range(n):
            o[i] = _bvn(av[i], bv[i], rv[i])
    return out.reshape(shape)


def orthant_excess(deltas, kappas, rhos):
    cdef const double[:] dl = np.ascontiguousarray(deltas, dtype=np.float64).reshape(-1)
    cdef const double[:] kp = np.ascontiguousarray(kappas, dtype=np.float64).reshape(-1)
    cdef const double[:] rv = np.ascontiguousarray(rhos, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t K = dl.shape[0], n = rv.shape[0], i, k1, k2
    cdef double acc
    out = np.empty(n)
    cdef double[:] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for k1 in range(K):
                for k2 in range(K):
                    acc += _bvn(dl[k1], dl[k2], rv[i]) - kp[k1] * kp[k2]
            o[i] = acc
    return out

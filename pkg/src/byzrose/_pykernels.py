"""Pure numpy kernels; reference behaviour for ``_ckernels``.

Both backends evaluate the same floating-point expressions in the same order,
so they agree bit for bit on the VRMOL kernel.
"""
import numpy as np
from scipy.special import ndtr

BACKEND = "python"

# Gauss-Legendre half-abscissae/weights on [-1, 0] for 6, 12 and 20 points
_GL_X = (
    np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
    np.array([-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
              -0.5873179542866171, -0.3678314989981802, -0.1252334085114692]),
    np.array([-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
              -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
              -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
              -0.07652652113349733]),
)
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
)
_TWOPI = 6.283185307179586
_CHUNK = 1 << 20


def median_columns(values):
    """Column medians; even counts give the midpoint of the central pair."""
    v = np.sort(np.asarray(values, dtype=float), axis=0)
    m = v.shape[0]
    if m % 2:
        return v[m // 2].copy()
    return 0.5 * (v[m // 2 - 1] + v[m // 2])


def vrmol_columns(values, scales, deltas, kappa_sum, psi_sum):
    """VRMOL aggregate of every column of the ``(m, L)`` array ``values``.

    ``scales[l]`` is the sampling standard deviation of one value in column l.
    """
    v = np.sort(np.asarray(values, dtype=float), axis=0)
    m, cols = v.shape
    s = np.asarray(scales, dtype=float).reshape(cols)
    deltas = np.asarray(deltas, dtype=float)
    if m % 2:
        med = v[m // 2].copy()
    else:
        med = 0.5 * (v[m // 2 - 1] + v[m // 2])
    total = np.zeros(cols, dtype=np.int64)
    step = max(1, _CHUNK // max(1, m * deltas.size))
    for start in range(0, cols, step):
        sl = slice(start, start + step)
        thr = med[sl, None] + s[sl, None] * deltas[None, :]
        total[sl] = (v[:, sl, None] <= thr[None, :, :]).sum(axis=(0, 2))
    corr = s * (total - m * kappa_sum) / (m * psi_sum)
    return med - corr


def bvn_cdf(a, b, r):
    """P(X <= a, Y <= b) for a standard bivariate normal with correlation r.

    Drezner-Wesolowsky integration over the correlation parameter as
    refined by Genz, with 6/12/20-point Gauss-Legendre rules.
    """
    a, b, r = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                  np.asarray(r, float))
    shape = a.shape
    a, b, r = a.ravel(), b.ravel(), r.ravel()
    out = np.empty(a.shape)
    ar = np.abs(r)
    groups = (ar < 0.3, (ar >= 0.3) & (ar < 0.75), ar >= 0.75)
    for ng, sel in enumerate(groups):
        if sel.any():
            out[sel] = _bvn_group(a[sel], b[sel], r[sel], _GL_X[ng], _GL_W[ng])
    np.clip(out, 0.0, 1.0, out=out)
    return out.reshape(shape)


def _bvn_group(sh, sk, r, gx, gw):
    h = -sh
    k = -sk
    hk = h * k
    res = np.zeros(h.shape)
    small = np.abs(r) < 0.925
    if small.any():
        hs = (h[small] ** 2 + k[small] ** 2) / 2
        asr = np.arcsin(r[small])
        hks = hk[small]
        acc = np.zeros(hs.shape)
        for xi, wi in zip(gx, gw):
            sn = np.sin(asr * (xi + 1) / 2)
            acc += wi * np.exp((sn * hks - hs) / (1 - sn * sn))
            sn = np.sin(asr * (-xi + 1) / 2)
            acc += wi * np.exp((sn * hks - hs) / (1 - sn * sn))
        res[small] = acc * asr / (2 * _TWOPI) + ndtr(-h[small]) * ndtr(-k[small])
    big = ~small
    if big.any():
        res[big] = _bvn_high(h[big], k[big], r[big], gx, gw)
    return res


def _bvn_high(h, k, r, gx, gw):
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    bvn = np.zeros(h.shape)
    inner = np.abs(r) < 1
    if inner.any():
        hh, kk, hki, ri = h[inner], k[inner], hk[inner], r[inner]
        as_ = (1 - ri) * (1 + ri)
        a = np.sqrt(as_)
        bs = (hh - kk) ** 2
        c = (4 - hki) / 8
        d = (12 - hki) / 16
        val = a * np.exp(-(bs / as_ + hki) / 2) * (
            1 - c * (bs - as_) * (1 - d * bs / 5) / 3 + c * d * as_ * as_ / 5)
        tail = hki > -160
        if tail.any():
            bsq = np.sqrt(bs[tail])
            val[tail] -= (np.exp(-hki[tail] / 2) * np.sqrt(_TWOPI) * ndtr(-bsq / a[tail])
                          * bsq * (1 - c[tail] * bs[tail] * (1 - d[tail] * bs[tail] / 5) / 3))
        a = a / 2
        for xi, wi in zip(gx, gw):
            xs = (a * (xi + 1)) ** 2
            rs = np.sqrt(1 - xs)
            val += a * wi * (np.exp(-bs / (2 * xs) - hki / (1 + rs)) / rs
                             - np.exp(-(bs / xs + hki) / 2) * (1 + c * xs * (1 + d * xs)))
            xs = as_ * (-xi + 1) ** 2 / 4
            rs = np.sqrt(1 - xs)
            val += a * wi * np.exp(-(bs / xs + hki) / 2) * (
                np.exp(-hki * (1 - rs) / (2 * (1 + rs))) / rs - (1 + c * xs * (1 + d * xs)))
        bvn[inner] = -val / _TWOPI
    pos = r > 0
    bvn[pos] += ndtr(-np.maximum(h[pos], k[pos]))
    bvn[neg] = -bvn[neg] + np.maximum(0.0, ndtr(-h[neg]) - ndtr(-k[neg]))
    return bvn


def orthant_excess(deltas, kappas, rhos):
    """For each rho: sum over (k1, k2) of P(xi1 <= D_k1, xi2 <= D_k2; rho) - kappa_k1 kappa_k2."""
    deltas = np.asarray(deltas, dtype=float)
    kappas = np.asarray(kappas, dtype=float)
    rhos = np.asarray(rhos, dtype=float).reshape(-1)
    a, b = np.meshgrid(deltas, deltas, indexing="ij")
    base = np.outer(kappas, kappas)
    out = np.empty(rhos.shape)
    for i, rho in enumerate(rhos):
        out[i] = np.sum(bvn_cdf(a, b, rho) - base)
    return out

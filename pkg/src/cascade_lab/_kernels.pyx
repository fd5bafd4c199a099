# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; ``_fallback`` holds the numpy equivalents."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def toy_rhs(const double complex[::1] b):
    cdef Py_ssize_t n = b.shape[0], j
    cdef double complex left, right, bj
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for j in range(n):
        bj = b[j]
        left = b[j - 1] * b[j - 1] if j > 0 else 0
        right = b[j + 1] * b[j + 1] if j + 1 < n else 0
        o[j] = -1j * bj * bj * bj.conjugate() + 2j * bj.conjugate() * (left + right)
    return out


def cubic_sum(const double complex[::1] a, const long long[:, ::1] terms,
              const double complex[::1] weight, const double[::1] freq, double t,
              Py_ssize_t size):
    """out[o] += w * exp(i*f*t) * a[i1] * conj(a[i2]) * a[i3] for each row (i1, i2, i3, o)."""
    cdef Py_ssize_t k, m = terms.shape[0]
    cdef double complex z, ph
    cdef double f
    out = np.zeros(size, dtype=np.complex128)
    cdef double complex[::1] o = out
    for k in range(m):
        z = weight[k] * a[terms[k, 0]] * a[terms[k, 1]].conjugate() * a[terms[k, 2]]
        f = freq[k]
        if f != 0.0:
            ph = cos(f * t) + 1j * sin(f * t)
            z = z * ph
        o[terms[k, 3]] += z
    return out


cdef inline bint _member(const long long[::1] keys, long long key) nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo < keys.shape[0] and keys[lo] == key


def spreading_partners(const long long[:, ::1] pts, const long long[::1] keys,
                       long long shift, long long lo, long long hi, int limit):
    """Scan the box [lo, hi]^2 and list outside points with more than ``limit``
    distinct outside partners.

    A partner of an outside point n is the fourth vertex m of a rectangle
    {n, m, u, v} with u, v in the set and m outside it.  ``keys`` holds the
    sorted encodings x*shift + y of the set.
    """
    cdef Py_ssize_t p = pts.shape[0], a, b, c, found
    cdef long long x, y, ux, uy, vx, vy, mx, my, dx, dy
    cdef long long px[64]
    cdef long long py[64]
    bad = []
    for x in range(lo, hi + 1):
        for y in range(lo, hi + 1):
            if _member(keys, x * shift + y):
                continue
            found = 0
            for a in range(p):
                ux = pts[a, 0]; uy = pts[a, 1]
                for b in range(p):
                    if a == b:
                        continue
                    vx = pts[b, 0]; vy = pts[b, 1]
                    mx = 0; my = 0
                    dx = vx - ux; dy = vy - uy
                    if (x - ux) * dx + (y - uy) * dy == 0:
                        mx = x + dx; my = y + dy
                    elif a < b and (x - ux) * (x - vx) + (y - uy) * (y - vy) == 0:
                        mx = ux + vx - x; my = uy + vy - y
                    else:
                        continue
                    if _member(keys, mx * shift + my):
                        continue
                    for c in range(found):
                        if px[c] == mx and py[c] == my:
                            break
                    else:
                        if found < 64:
                            px[found] = mx; py[found] = my
                            found += 1
            if found > limit:
                bad.append((x, y, [(px[c], py[c]) for c in range(found)]))
    return bad

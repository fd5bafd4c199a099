"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def toy_rhs(b):
    b = np.asarray(b, dtype=np.complex128)
    sq = b * b
    nb = np.zeros_like(b)
    nb[1:] += sq[:-1]
    nb[:-1] += sq[1:]
    bc = b.conj()
    return -1j * sq * bc + 2j * bc * nb


def cubic_sum(a, terms, weight, freq, t, size):
    """out[o] += w * exp(i*f*t) * a[i1] * conj(a[i2]) * a[i3] for each row (i1, i2, i3, o)."""
    z = weight * a[terms[:, 0]] * a[terms[:, 1]].conj() * a[terms[:, 2]]
    if t != 0.0:
        z = z * np.exp(1j * freq * t)
    out = np.bincount(terms[:, 3], weights=z.real, minlength=size).astype(np.complex128)
    out.imag = np.bincount(terms[:, 3], weights=z.imag, minlength=size)
    return out


def spreading_partners(pts, keys, shift, lo, hi, limit):
    """Box scan for outside points with more than ``limit`` distinct outside partners."""
    pts = np.asarray(pts, dtype=np.int64)
    keyset = set(int(k) for k in keys)
    xs, ys = np.meshgrid(np.arange(lo, hi + 1), np.arange(lo, hi + 1), indexing="ij")
    grid = np.stack([xs.ravel(), ys.ravel()], axis=1)
    inside = np.isin(grid[:, 0] * shift + grid[:, 1], np.asarray(keys, dtype=np.int64))
    grid = grid[~inside]
    partners = [set() for _ in range(len(grid))]
    p = len(pts)
    for a in range(p):
        u = pts[a]
        for b in range(p):
            if a == b:
                continue
            v = pts[b]
            d = v - u
            rel = grid - u
            on_line = rel @ d == 0
            on_circle = np.zeros(len(grid), dtype=bool)
            if a < b:
                on_circle = np.einsum("ij,ij->i", rel, grid - v) == 0
            for idx in np.nonzero(on_line)[0]:
                m = grid[idx] + d
                if int(m[0] * shift + m[1]) not in keyset:
                    partners[idx].add((int(m[0]), int(m[1])))
            for idx in np.nonzero(on_circle)[0]:
                m = u + v - grid[idx]
                if int(m[0] * shift + m[1]) not in keyset:
                    partners[idx].add((int(m[0]), int(m[1])))
    bad = []
    for idx, ps in enumerate(partners):
        if len(ps) > limit:
            bad.append((int(grid[idx, 0]), int(grid[idx, 1]), sorted(ps)))
    return bad

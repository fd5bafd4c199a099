"""Resonant lattice sets: construction, exhaustive verification and Sobolev sums.

Points are integer pairs.  A family is a rectangle whose two parents form
one diagonal in generation j and whose two children form the other
diagonal in generation j+1.  Rectangle membership is tested by the
parallelogram identity (equal diagonal sums) together with equal diagonal
lengths, which is the same as the convolution plus frequency conditions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
from sympy import factorint, integer_nthroot
from sympy.ntheory import sqrt_mod

from . import SCHEMA_VERSION
from ._accel import spreading_partners
from .errors import PlacementExhausted, PreconditionError

Point = tuple


def _pt(n) -> tuple:
    return (int(n[0]), int(n[1]))


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _norm2(a):
    return a[0] * a[0] + a[1] * a[1]


# ---------------------------------------------------------------- number theory

def _gaussian_prime(p: int) -> tuple:
    """(a, b) with a^2 + b^2 = p for a prime p = 1 mod 4 (Hermite-Serret descent)."""
    x = sqrt_mod(-1, p)
    a, b = p, x
    while b * b > p:
        a, b = b, a % b
    c = math.isqrt(p - b * b)
    return (b, c)


def _gmul(z, w):
    return (z[0] * w[0] - z[1] * w[1], z[0] * w[1] + z[1] * w[0])


def _gpow(z, k):
    out = (1, 0)
    for _ in range(k):
        out = _gmul(out, z)
    return out


@lru_cache(maxsize=65536)
def two_square_reps(n: int) -> tuple:
    """All integer pairs (x, y) with x^2 + y^2 = n."""
    if n < 0:
        return ()
    if n == 0:
        return ((0, 0),)
    base = [(1, 0)]
    for p, e in factorint(n).items():
        if p == 2:
            f = _gpow((1, 1), e)
            base = [_gmul(z, f) for z in base]
        elif p % 4 == 3:
            if e % 2:
                return ()
            base = [(z[0] * p ** (e // 2), z[1] * p ** (e // 2)) for z in base]
        else:
            g = _gaussian_prime(p)
            gb = (g[0], -g[1])
            opts = [_gmul(_gpow(g, k), _gpow(gb, e - k)) for k in range(e + 1)]
            base = [_gmul(z, o) for z in base for o in opts]
    out = set()
    for z in base:
        for u in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            out.add(_gmul(z, u))
    return tuple(sorted(out))


def pythagorean_triples(hypotenuse_bound: int):
    """Primitive triples (m^2 - n^2, 2mn, m^2 + n^2) with hypotenuse <= bound."""
    out = []
    m = 2
    while m * m + 1 <= hypotenuse_bound:
        for n in range(1, m):
            if (m - n) % 2 and math.gcd(m, n) == 1 and m * m + n * n <= hypotenuse_bound:
                out.append((m * m - n * n, 2 * m * n, m * m + n * n))
        m += 1
    return sorted(out, key=lambda t: (t[2], t[0]))


# ---------------------------------------------------------------- rectangles

def _canonical(p, q, r, s):
    """Quadruple from diagonals {p, r} and {q, s}, trivial permutations removed."""
    d1, d2 = sorted((p, r)), sorted((q, s))
    d1, d2 = sorted((d1, d2))
    return (d1[0], d2[0], d1[1], d2[1])


def is_resonant_quadruple(n1, n2, n3, n4) -> bool:
    """Convolution and frequency conditions, excluding the trivial n1 = n4 or n3 = n4 cases."""
    if n1 == n4 or n3 == n4:
        return False
    conv = (n1[0] - n2[0] + n3[0], n1[1] - n2[1] + n3[1]) == tuple(n4)
    freq = _norm2(n1) - _norm2(n2) + _norm2(n3) == _norm2(n4)
    return conv and freq


def enumerate_resonant_rectangles(points: Iterable, closure_points: Optional[Iterable] = None) -> list:
    """All non-degenerate rectangles with vertices in the set.

    Each is returned once as (n1, n2, n3, n4) with {n1, n3} and {n2, n4} the
    diagonals, so n1 - n2 + n3 = n4.  With ``closure_points`` the vertices may
    also come from that set, provided at least three lie in ``points``.
    """
    base = {_pt(n) for n in points}
    pool = base | ({_pt(n) for n in closure_points} if closure_points is not None else set())
    pts = sorted(pool)
    groups = {}
    for i, u in enumerate(pts):
        for v in pts[i + 1:]:
            groups.setdefault((u[0] + v[0], u[1] + v[1], _norm2(_sub(u, v))), []).append((u, v))
    out = []
    for pairs in groups.values():
        for (a, c), (b, d) in itertools.combinations(pairs, 2):
            if sum(x in base for x in (a, b, c, d)) >= 3:
                out.append(_canonical(a, b, c, d))
    return sorted(out)


def rectangle_diagonals_ok(q) -> bool:
    """Independent geometric test: the diagonals bisect each other and have equal length."""
    a, b, c, d = q
    mid = (a[0] + c[0] == b[0] + d[0]) and (a[1] + c[1] == b[1] + d[1])
    return mid and _norm2(_sub(a, c)) == _norm2(_sub(b, d)) and a != c and b != d


# ---------------------------------------------------------------- the set

@dataclass(frozen=True)
class Family:
    generation: int  # generation of the parents (1-based)
    parents: tuple
    children: tuple

    @property
    def quadruple(self):
        (a, c), (b, d) = self.parents, self.children
        return (a, b, c, d)


@dataclass
class LambdaSet:
    generations: list
    families: list = field(default_factory=list)

    def __post_init__(self):
        # repeated entries are kept so that verification can report them
        self.generations = [sorted(_pt(n) for n in g) for g in self.generations]
        self.families = [Family(f.generation, tuple(map(_pt, f.parents)), tuple(map(_pt, f.children)))
                         for f in self.families]

    @property
    def n_generations(self) -> int:
        return len(self.generations)

    @property
    def points(self) -> list:
        """Distinct points, generation by generation."""
        return list(dict.fromkeys(n for g in self.generations for n in g))

    def generation_of(self, n) -> int:
        n = _pt(n)
        for j, g in enumerate(self.generations, start=1):
            if n in g:
                return j
        raise KeyError(n)

    def links(self) -> dict:
        """Per point: spouse, sibling, the two parents and the two children (None when absent)."""
        out = {n: {"spouse": None, "sibling": None, "parents": None, "children": None}
               for n in self.points}
        for f in self.families:
            a, c = f.parents
            b, d = f.children
            for x, y in ((a, c), (c, a)):
                if x in out:
                    out[x]["spouse"], out[x]["children"] = y, f.children
            for x, y in ((b, d), (d, b)):
                if x in out:
                    out[x]["sibling"], out[x]["parents"] = y, f.parents
        return out

    def scaled(self, m: int) -> "LambdaSet":
        s = lambda n: (n[0] * m, n[1] * m)
        return LambdaSet([[s(n) for n in g] for g in self.generations],
                         [Family(f.generation, tuple(map(s, f.parents)), tuple(map(s, f.children)))
                          for f in self.families])

    def translated(self, t) -> "LambdaSet":
        s = lambda n: (n[0] + t[0], n[1] + t[1])
        return LambdaSet([[s(n) for n in g] for g in self.generations],
                         [Family(f.generation, tuple(map(s, f.parents)), tuple(map(s, f.children)))
                          for f in self.families])

    def union(self, other: "LambdaSet") -> "LambdaSet":
        n = max(self.n_generations, other.n_generations)
        gens = [list(self.generations[j] if j < self.n_generations else [])
                + list(other.generations[j] if j < other.n_generations else []) for j in range(n)]
        fams = list(dict.fromkeys(self.families + other.families))
        return LambdaSet(gens, fams)

    def max_abs(self) -> int:
        return max((max(abs(n[0]), abs(n[1])) for n in self.points), default=0)

    def to_dict(self) -> dict:
        pts = self.points
        index = {n: i for i, n in enumerate(pts)}
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "lambda_set",
            "generations": [[list(n) for n in g] for g in self.generations],
            # indices refer to the distinct points in generation order
            "families": [{"generation": f.generation,
                          "quadruple": [index.get(n, -1) for n in f.quadruple]} for f in self.families],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LambdaSet":
        gens = [[tuple(n) for n in g] for g in doc["generations"]]
        pts = list(dict.fromkeys(n for g in gens for n in g))
        fams = []
        for f in doc.get("families", []):
            a, b, c, d = (pts[i] for i in f["quadruple"])
            fams.append(Family(int(f["generation"]), (a, c), (b, d)))
        return cls(gens, fams)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def unit_square_family() -> LambdaSet:
    """The smallest two-generation set: parents (0,0),(1,1) and children (1,0),(0,1)."""
    return LambdaSet([[(0, 0), (1, 1)], [(1, 0), (0, 1)]],
                     [Family(1, ((0, 0), (1, 1)), ((1, 0), (0, 1)))])


# ---------------------------------------------------------------- spreading check

def _line_key(d, e):
    g = math.gcd(d[0], d[1])
    a, b, c = d[0] // g, d[1] // g, e
    if c % g:
        return None  # no integer point on the line
    c //= g
    if a < 0 or (a == 0 and b < 0):
        a, b, c = -a, -b, -c
    return (a, b, c)


def _line_points(key, anchor, count=6):
    """A few integer points of a*x + b*y = c nearest to ``anchor``."""
    a, b, c = key
    # particular solution via the extended Euclid algorithm
    g, s, t = _egcd(a, b)
    x0, y0 = s * c, t * c
    dx, dy = -b, a
    k0 = round(((anchor[0] - x0) * dx + (anchor[1] - y0) * dy) / (dx * dx + dy * dy))
    return [(x0 + (k0 + k) * dx, y0 + (k0 + k) * dy) for k in range(-count, count + 1)]


def _egcd(a, b):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, s, t = _egcd(b, a % b)
    return (g, t, s - (a // b) * t)


class _Rules:
    """Rectangle-completion rules of a point set.

    An outside point n on the line through u perpendicular to v - u gets
    partner n + (v - u); an outside point on the circle with diameter uv gets
    partner u + v - n.  These are the fourth vertices of the rectangles that
    contain n and the two vertices u, v of the set.
    """

    def __init__(self, points):
        self.points = [tuple(p) for p in points]
        self.keys = set(self.points)
        p = np.array(self.points, dtype=object).reshape(-1, 2)
        self.size = len(self.points)
        big = max((abs(c) for n in self.points for c in n), default=0)
        self.dtype = np.int64 if big < 10**8 else object
        self.wide = big >= 10**6
        arr = np.array(self.points, dtype=self.dtype).reshape(-1, 2)
        i, j = np.nonzero(~np.eye(self.size, dtype=bool))
        self.line_u, self.line_d = arr[i], arr[j] - arr[i]
        self.line_pairs = np.stack([i, j], axis=1)
        iu, ju = np.triu_indices(self.size, 1)
        self.circ_c = arr[iu] + arr[ju]
        self.circ_r = ((arr[iu] - arr[ju]) ** 2).sum(axis=1)
        self.circ_pairs = np.stack([iu, ju], axis=1)
        del p
        # coincident rules (same locus, same partner) are counted once
        if self.size >= 2:
            e = (self.line_u * self.line_d).sum(axis=1)
            _, keep = np.unique(np.column_stack([self.line_d, e]).astype(object).astype(str), axis=0,
                                return_index=True) if self.dtype is object else \
                np.unique(np.column_stack([self.line_d, e]), axis=0, return_index=True)
            self.line_u, self.line_d = self.line_u[np.sort(keep)], self.line_d[np.sort(keep)]
            _, keep = np.unique(np.column_stack([self.circ_c, self.circ_r]).astype(str) if self.dtype is object
                                else np.column_stack([self.circ_c, self.circ_r]), axis=0, return_index=True)
            self.circ_c, self.circ_r = self.circ_c[np.sort(keep)], self.circ_r[np.sort(keep)]

    def partners(self, cand, min_hits=0):
        """Distinct outside partners for each candidate row.

        Rows lying on at most ``min_hits`` loci are skipped (empty set), which
        is safe whenever only points with more than ``min_hits`` partners matter.
        """
        cand = np.asarray(cand, dtype=self.dtype).reshape(-1, 2)
        out = []
        rows = max(1, 2_000_000 // max(len(self.line_u) + len(self.circ_c), 1))
        for s in range(0, len(cand), rows):
            c = cand[s:s + rows]
            on_line = (((c[:, None, :] - self.line_u[None]) * self.line_d[None]).sum(axis=2) == 0)
            w = 2 * c[:, None, :] - self.circ_c[None]
            on_circ = ((w * w).sum(axis=2) == self.circ_r[None])
            hits = on_line.sum(axis=1) + on_circ.sum(axis=1)
            for k in range(len(c)):
                if hits[k] <= min_hits:
                    out.append(set())
                    continue
                li, ci = np.nonzero(on_line[k])[0], np.nonzero(on_circ[k])[0]
                n = (int(c[k, 0]), int(c[k, 1]))
                ps = {(n[0] + int(self.line_d[r, 0]), n[1] + int(self.line_d[r, 1])) for r in li}
                ps |= {(int(self.circ_c[r, 0]) - n[0], int(self.circ_c[r, 1]) - n[1]) for r in ci}
                out.append({m for m in ps if m not in self.keys})
        return out


def _candidates(rules: _Rules, fresh: Optional[set]):
    """Integer points where two distinct rule loci meet, plus points of overloaded lines."""
    pts = rules.points
    fresh_idx = None if fresh is None else {i for i, n in enumerate(pts) if n in fresh}

    def involves(pair):
        return fresh_idx is None or pair[0] in fresh_idx or pair[1] in fresh_idx

    lines = {}
    for (i, j) in rules.line_pairs:
        u, v = pts[i], pts[j]
        d = _sub(v, u)
        key = _line_key(d, _dot(d, u))
        if key is None:
            continue
        entry = lines.setdefault(key, [set(), False, u])
        entry[0].add(d)
        entry[1] |= involves((i, j))
    cands = set()
    # one line carrying three or more translation rules
    for key, (ds, new, u) in lines.items():
        if new and len(ds) >= 3:
            cands.update(_line_points(key, u))
    # line-line intersections
    keys = list(lines)
    if len(keys) >= 2:
        arr = np.array(keys, dtype=object)
        dt = object if rules.wide else np.int64
        A = arr.astype(dt)
        isnew = np.array([lines[k][1] for k in keys])
        a, b, c = A[:, 0], A[:, 1], A[:, 2]
        for s in np.nonzero(isnew)[0]:
            det = a[s] * b - a * b[s]
            nx = c[s] * b - c * b[s]
            ny = a[s] * c - a * c[s]
            ok = det != 0
            if not np.any(ok):
                continue
            det, nx, ny = det[ok], nx[ok], ny[ok]
            good = (nx % det == 0) & (ny % det == 0)
            for x, y in zip(nx[good] // det[good], ny[good] // det[good]):
                cands.add((int(x), int(y)))
    # integer points on circles (covers line-circle and circle-circle meetings)
    seen = set()
    for (i, j) in rules.circ_pairs:
        if not involves((i, j)):
            continue
        u, v = pts[i], pts[j]
        cen, rho = _add(u, v), _norm2(_sub(u, v))
        if (cen, rho) in seen:
            continue
        seen.add((cen, rho))
        for w in two_square_reps(rho):
            if (w[0] - cen[0]) % 2 == 0 and (w[1] - cen[1]) % 2 == 0:
                cands.add(((cen[0] + w[0]) // 2, (cen[1] + w[1]) // 2))
    return sorted(n for n in cands if n not in rules.keys)


def spreading_violations(points, fresh: Optional[Iterable] = None, limit: int = 2,
                         max_witnesses: int = 10) -> list:
    """Outside points with more than ``limit`` distinct outside rectangle partners.

    Exact: every such point lies where two different lines/circles of the
    rule set meet, or on one line carrying at least three translation rules,
    and those candidates are enumerated with integer arithmetic.  With
    ``fresh`` only violations involving at least one of those points are sought.
    """
    rules = _Rules(points)
    if rules.size < 2:
        return []
    fresh = None if fresh is None else {_pt(n) for n in fresh}
    cands = _candidates(rules, fresh)
    bad = []
    for n, ps in zip(cands, rules.partners(cands, min_hits=limit) if cands else []):
        if len(ps) > limit:
            bad.append((n, sorted(ps)))
            if len(bad) >= max_witnesses:
                break
    return bad


def spreading_box_scan(points, radius: int, limit: int = 2) -> list:
    """Brute-force scan of the box [-radius, radius]^2 (compiled kernel when available)."""
    pts = np.array(sorted({_pt(n) for n in points}), dtype=np.int64).reshape(-1, 2)
    if len(pts) == 0:
        return []
    shift = 4 * (radius + int(np.abs(pts).max()) + 1) + 1
    keys = np.sort(pts[:, 0] * shift + pts[:, 1]).astype(np.int64)
    raw = spreading_partners(np.ascontiguousarray(pts), keys, shift, -radius, radius, limit)
    return sorted(((int(x), int(y)), sorted(map(tuple, ps))) for x, y, ps in raw)


# ---------------------------------------------------------------- verification

@dataclass
class VerificationVerdict:
    closure: bool = True
    spouse_children: bool = True
    sibling_parents: bool = True
    nondegeneracy: bool = True
    faithfulness: bool = True
    no_spreading: bool = True
    witnesses: dict = field(default_factory=dict)

    CONDITIONS = ("closure", "spouse_children", "sibling_parents", "nondegeneracy",
                  "faithfulness", "no_spreading")

    @property
    def ok(self) -> bool:
        return all(getattr(self, c) for c in self.CONDITIONS)

    def flags(self) -> dict:
        return {c: getattr(self, c) for c in self.CONDITIONS}

    def fail(self, cond, witness):
        setattr(self, cond, False)
        self.witnesses.setdefault(cond, []).append(witness)

    def to_dict(self) -> dict:
        def plain(x):
            if isinstance(x, (tuple, list)):
                return [plain(v) for v in x]
            return x
        return {"schema_version": SCHEMA_VERSION, "kind": "verdict", "ok": self.ok, **self.flags(),
                "witnesses": {k: plain(v) for k, v in self.witnesses.items()}}


def geometric_families(lam: LambdaSet):
    """Split the rectangles of the set into families and the rest."""
    gen = {}
    dup = []
    for j, g in enumerate(lam.generations, start=1):
        for n in g:
            if n in gen:
                dup.append((n, gen[n], j))
            gen.setdefault(n, j)
    fams, other = [], []
    for q in enumerate_resonant_rectangles(gen):
        a, b, c, d = q
        ga, gc, gb, gd = gen[a], gen[c], gen[b], gen[d]
        if ga == gc and gb == gd and abs(ga - gb) == 1:
            if ga < gb:
                fams.append(Family(ga, (a, c), (b, d)))
            else:
                fams.append(Family(gb, (b, d), (a, c)))
        else:
            other.append(q)
    return fams, other, dup, gen


def _right_triples(points, keys, limit=10):
    """Right-angle triples whose completing vertex is missing."""
    arr = np.array(points, dtype=np.int64 if max((abs(c) for n in points for c in n), default=0) < 10**8 else object)
    bad = []
    for k, v in enumerate(points):
        rel = arr - arr[k]
        dots = rel @ rel.T
        i, j = np.nonzero(np.triu(dots == 0, 1))
        for a, b in zip(i, j):
            if a == k or b == k:
                continue
            u, w = points[a], points[b]
            m = (u[0] + w[0] - v[0], u[1] + w[1] - v[1])
            if m not in keys:
                bad.append((u, v, w, m))
                if len(bad) >= limit:
                    return bad
    return bad


def verify_lambda(lam: LambdaSet, closure_radius: Optional[int] = None, box_scan: bool = False) -> VerificationVerdict:
    """Check conditions 1-6 exhaustively; failures carry concrete witnesses.

    The no-spreading condition is decided by the exact candidate enumeration
    of :func:`spreading_violations`.  With ``box_scan`` the brute-force scan of
    the box of half-width ``closure_radius`` (default 3 max|n|) is run as well.
    """
    v = VerificationVerdict()
    fams, other, dup, gen = geometric_families(lam)
    pts = sorted(gen)
    n_gen = lam.n_generations
    for n, first, again in dup:
        v.fail("spouse_children", ("listed twice", n, first, again))
    # closure
    for t in _right_triples(pts, set(pts)):
        v.fail("closure", t)
    # faithfulness
    for q in other:
        v.fail("faithfulness", q)
    # families: existence and uniqueness
    as_parent, as_child = {}, {}
    for f in fams:
        for x in f.parents:
            as_parent.setdefault(x, []).append(f)
        for x in f.children:
            as_child.setdefault(x, []).append(f)
    for n in pts:
        j = gen[n]
        if j < n_gen and len(as_parent.get(n, [])) != 1:
            v.fail("spouse_children", (n, len(as_parent.get(n, []))))
        if j > 1 and len(as_child.get(n, [])) != 1:
            v.fail("sibling_parents", (n, len(as_child.get(n, []))))
    # sibling differs from spouse
    for n in pts:
        if len(as_parent.get(n, [])) == 1 and len(as_child.get(n, [])) == 1:
            fp, fc = as_parent[n][0], as_child[n][0]
            spouse = fp.parents[1] if fp.parents[0] == n else fp.parents[0]
            sibling = fc.children[1] if fc.children[0] == n else fc.children[0]
            if spouse == sibling:
                v.fail("nondegeneracy", (n, spouse))
    for n, ps in spreading_violations(pts):
        v.fail("no_spreading", (n, ps))
    if box_scan and pts:
        r = closure_radius if closure_radius is not None else 3 * max(max(abs(c) for c in n) for n in pts)
        exact = {n for n, _ in v.witnesses.get("no_spreading", [])}
        for n, ps in spreading_box_scan(pts, r):
            if n not in exact:
                v.fail("no_spreading", (n, ps))
    return v


# ---------------------------------------------------------------- construction

class _Placer:
    """Incremental placement keeping the partial set closed, faithful and non-spreading."""

    def __init__(self, radius):
        self.radius = radius
        self.points = []
        self.keys = set()
        self.pair_keys = {}

    def _fits(self, n):
        return max(abs(n[0]), abs(n[1])) <= self.radius

    def admissible(self, new, allowed_rect=None) -> bool:
        new = [_pt(n) for n in new]
        if len(set(new)) != len(new) or any(n in self.keys or not self._fits(n) for n in new):
            return False
        pts = self.points + new
        keys = self.keys | set(new)
        # rectangles: a new pair may only match the pair it is allowed to match
        seen = {}
        for i, q in enumerate(new):
            for x in self.points + new[:i]:
                k = (q[0] + x[0], q[1] + x[1], _norm2(_sub(q, x)))
                pair = frozenset((q, x))
                for other in self.pair_keys.get(k, []) + seen.get(k, []):
                    if allowed_rect is None or {pair, other} != allowed_rect:
                        return False
                seen.setdefault(k, []).append(pair)
        # closure for triples touching a new point
        arr = np.array(pts, dtype=np.int64)
        for q in new:
            rel = arr - np.array(q)
            # right angle at the new point
            dots = rel @ rel.T
            i, j = np.nonzero(np.triu(dots == 0, 1))
            for a, b in zip(i, j):
                if pts[a] == q or pts[b] == q:
                    continue
                if _sub(_add(pts[a], pts[b]), q) not in keys:
                    return False
            # right angle at an old vertex with q at one end
            for k, x in enumerate(pts):
                if x == q:
                    continue
                r = arr - np.array(x)
                hit = np.nonzero(r @ np.array(_sub(q, x)) == 0)[0]
                for h in hit:
                    y = pts[h]
                    if y in (x, q):
                        continue
                    if _sub(_add(q, y), x) not in keys:
                        return False
        return not spreading_violations(pts, fresh=new, max_witnesses=1)

    def add(self, new):
        for q in map(_pt, new):
            for x in self.points:
                k = (q[0] + x[0], q[1] + x[1], _norm2(_sub(q, x)))
                self.pair_keys.setdefault(k, []).append(frozenset((q, x)))
            self.points.append(q)
            self.keys.add(q)


def _child_options(a, c):
    """Children pairs on the circle with diameter ac at integer points (Pythagorean rotations)."""
    z = _sub(a, c)
    s = _add(a, c)
    out = []
    for w in two_square_reps(_norm2(z)):
        if w == z or w == (-z[0], -z[1]):
            continue
        if (s[0] + w[0]) % 2 or (s[1] + w[1]) % 2:
            continue
        b = ((s[0] + w[0]) // 2, (s[1] + w[1]) // 2)
        d = ((s[0] - w[0]) // 2, (s[1] - w[1]) // 2)
        if b < d:
            out.append((b, d))
    return out


def _angle(u, v):
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0 or nv == 0:
        return 0.0
    return math.acos(max(-1.0, min(1.0, _dot(u, v) / (nu * nv))))


class _Retry(Exception):
    pass


def _matchings(items):
    if not items:
        yield []
        return
    first = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1:]
        for m in _matchings(rest):
            yield [(first, items[k])] + m


def _pair_up(rng, points, sibling, big, profile, greedy=True):
    """Spouse pairing for one generation; siblings are never paired."""
    if profile == "spreading" and big and not greedy:
        bigs = [n for n in points if n in big]
        smalls = [n for n in points if n not in big]
        if len(bigs) % 2:
            smalls.sort(key=lambda n: -_norm2(n))
            bigs.append(smalls.pop(0))
        return _random_matching(rng, bigs, sibling) + _random_matching(rng, smalls, sibling)
    if profile == "spreading" and big:
        bigs = [n for n in points if n in big]
        smalls = [n for n in points if n not in big]
        if len(bigs) % 2:
            # the odd big point marries a small one
            smalls_sorted = sorted(smalls, key=lambda n: -_norm2(n))
            smalls = smalls_sorted
            bigs.append(smalls.pop(0))
        best, best_score = None, -1.0
        options = _matchings(bigs) if len(bigs) <= 10 else [list(zip(bigs[::2], bigs[1::2]))]
        for m in options:
            if any(sibling.get(x) == y for x, y in m):
                continue
            score = sum(math.sin(_angle(x, y)) for x, y in m)
            if score > best_score:
                best, best_score = m, score
        if best is None:
            raise _Retry
        order = list(rng.permutation(len(smalls)))
        rest = _random_matching(rng, [smalls[i] for i in order], sibling)
        return best + rest
    order = list(rng.permutation(len(points)))
    return _random_matching(rng, [points[i] for i in order], sibling)


def _random_matching(rng, pts, sibling, tries=200):
    for _ in range(tries):
        pts = [pts[i] for i in rng.permutation(len(pts))]
        pairs = list(zip(pts[::2], pts[1::2]))
        if all(sibling.get(x) != y for x, y in pairs):
            return pairs
    raise _Retry


def _first_generation(placer, rng, size, scale, profile):
    if size == 2 and profile == "plain":
        pts = [(0, 0), (scale, scale)]
        if placer.admissible(pts):
            placer.add(pts)
            return pts
        raise _Retry
    chosen = []
    span = 4 + size
    for _ in range(400 * size):
        if len(chosen) == size:
            break
        if profile == "spreading":
            ang = 2 * math.pi * (len(chosen) + rng.uniform(-0.2, 0.2)) / size
            r = span
            n = (scale * round(r * math.cos(ang)), scale * round(r * math.sin(ang)))
        else:
            x, y = rng.integers(-span, span + 1, size=2)
            n = (scale * int(x), scale * int(y))
        if placer.admissible([n]):
            placer.add([n])
            chosen.append(n)
    if len(chosen) < size:
        raise _Retry
    return chosen


def _snapshot(placer):
    copy = _Placer(placer.radius)
    copy.points = list(placer.points)
    copy.keys = set(placer.keys)
    copy.pair_keys = {k: list(v) for k, v in placer.pair_keys.items()}
    return copy


def _place_generation(placer, j, parents, big, rng, gen_size, profile):
    """Children of every parent pair, or None when some family has no admissible spot."""
    children, families, sibling, next_big = [], [], {}, set()
    for a, c in parents:
        opts = _child_options(a, c)
        if profile == "spreading":
            if j < 3:
                opts.sort(key=lambda bd: -min(_norm2(bd[0]), _norm2(bd[1])))
            elif a in big and c in big:
                # largest big child, but keep the small child away from the origin
                def rank(bd):
                    hi, lo = sorted((_norm2(bd[0]), _norm2(bd[1])), reverse=True)
                    return (lo < 0.02 * hi, -hi)
                opts.sort(key=rank)
            else:
                opts = [opts[i] for i in rng.permutation(len(opts))]
        elif gen_size == 2:
            opts.sort(key=lambda bd: (_dot(_sub(bd[0], bd[1]), _sub(a, c)) != 0, bd))
        else:
            opts = [opts[i] for i in rng.permutation(len(opts))]
        for b, d in opts:
            if placer.admissible([b, d], {frozenset((a, c)), frozenset((b, d))}):
                placer.add([b, d])
                families.append(Family(j, (a, c), (b, d)))
                children += [b, d]
                sibling[b], sibling[d] = d, b
                if profile == "spreading":
                    if j < 3:
                        next_big |= {b, d}
                    elif a in big and c in big:
                        next_big.add(max((b, d), key=_norm2))
                break
        else:
            return None
    return children, families, sibling, next_big


_SCALES = (1, 5, 13, 25, 65, 85, 325, 1105)


class _Stuck(Exception):
    def __init__(self, generation):
        self.generation = generation


def _place(n_generations, gen_size, radius, rng, profile, tries, scale):
    placer = _Placer(radius)
    first = _first_generation(placer, rng, gen_size, scale, profile)
    gens, families, sibling = [first], [], {}
    big = set(first) if profile == "spreading" else set()
    for j in range(1, n_generations):
        done = None
        for attempt in range(tries):
            try:
                if j == 1:
                    parents = _random_matching(rng, list(gens[-1]), {})
                else:
                    pool = big if j >= 3 else set(gens[-1])
                    parents = _pair_up(rng, gens[-1], sibling, pool, profile, greedy=attempt == 0)
            except _Retry:
                continue
            trial = _snapshot(placer)
            done = _place_generation(trial, j, parents, big, rng, gen_size, profile)
            if done is not None:
                placer = trial
                break
        if done is None:
            raise _Stuck(j + 1)
        children, fams, sib, next_big = done
        gens.append(children)
        families += fams
        sibling.update(sib)
        big = next_big
    return LambdaSet(gens, families)


def build_lambda(n_generations: int, gen_size: int = 4, radius: int = 10**4, seed: int = 0,
                 profile: str = "plain", tries: int = 6, restarts: int = 3) -> LambdaSet:
    """Place generations one family at a time on integer points.

    Children of a family sit at the ends of another integer diameter of the
    circle through the parents.  Candidates are rejected unless the partial set
    stays closed, faithful and free of spreading points.  When a generation
    cannot be completed after a few re-pairings the placement restarts, and
    after a few restarts the first generation is placed on a coarser grid so
    that more integer diameters are available.  (Rescaling a finished partial
    set is not an option: the no-spreading condition on Z^2 is not invariant
    under dilation.)  ``profile="spreading"`` steers choices so that the larger
    child of two large parents keeps growing.
    """
    if n_generations < 2:
        raise PreconditionError("need at least two generations")
    if gen_size < 2 or gen_size % 2:
        raise PreconditionError("generation size must be a positive even number")
    if gen_size == 2 and n_generations > 2:
        raise PreconditionError("with two points per generation the sibling would have to be the spouse")
    if profile not in ("plain", "spreading"):
        raise PreconditionError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    reached = 1
    for scale in _SCALES:
        for _ in range(restarts):
            try:
                lam = _place(n_generations, gen_size, radius, rng, profile, tries, scale)
            except _Stuck as exc:
                reached = max(reached, exc.generation)
                continue
            except _Retry:
                continue
            if verify_lambda(lam).ok:  # guaranteed by the incremental checks
                return lam
    raise PlacementExhausted(reached)


# ---------------------------------------------------------------- injections

INJECTIONS = {
    "duplicate_point": "spouse_children",
    "extra_rectangle": "faithfulness",
    "third_external_rectangle": "no_spreading",
}


def _perp(v):
    g = math.gcd(v[0], v[1]) or 1
    return (-v[1] // g, v[0] // g)


def _injection_candidates(lam: LambdaSet, kind: str):
    big = 4 * lam.max_abs() + 7
    if kind == "duplicate_point":
        return
    if kind == "extra_rectangle":
        links = lam.links()
        for g in lam.generations:
            for x, y in itertools.combinations(g, 2):
                if links[x]["spouse"] == y or links[x]["sibling"] == y:
                    continue
                p = _perp(_sub(y, x))
                for k in range(1, 40):
                    m = (big // max(abs(p[0]), abs(p[1]), 1)) + k
                    yield (p[0] * m, p[1] * m), lam
    elif kind == "third_external_rectangle":
        pts = lam.points
        rules = _Rules(pts)
        two = [n for n, ps in zip(_candidates(rules, None), rules.partners(_candidates(rules, None)))
               if len(ps) == 2]
        for n0 in two[:40]:
            for u, v in itertools.permutations(pts, 2):
                d = _sub(v, u)
                # shift the set so that n0 lies on the translated line through u+t
                g = math.gcd(d[0], d[1])
                rhs = _dot(_sub(n0, u), d)
                if rhs % g:
                    continue
                key = (d[0] // g, d[1] // g, rhs // g)
                base = _line_points(key, (big, big), count=0)[0]
                step = (-key[1], key[0])
                for k in (3, 5, 8):
                    yield (base[0] + k * step[0] * big, base[1] + k * step[1] * big), lam
    else:
        raise PreconditionError(f"unknown violation kind {kind!r}")


def inject_violation(lam: LambdaSet, kind: str, max_candidates: int = 400):
    """Union of the set with a translated copy that breaks exactly one condition.

    Returns (new set, translation); the translation is the first candidate,
    in a deterministic order, for which only the targeted verdict flips.  A
    duplicate point is injected by listing a point of the first generation
    twice (translation (0, 0)).
    """
    target = INJECTIONS.get(kind)
    if target is None:
        raise PreconditionError(f"unknown violation kind {kind!r}")
    if kind == "duplicate_point":
        # list one point a second time: it now carries two spouse/children records
        gens = [list(g) for g in lam.generations]
        n = gens[0][0]
        gens[0].append(n)
        return LambdaSet(gens, lam.families), (0, 0)
    for count, (t, piece) in enumerate(_injection_candidates(lam, kind)):
        if count >= max_candidates:
            break
        if t == (0, 0):
            continue
        new = lam.union(piece.translated(t))
        verdict = verify_lambda(new)
        flags = verdict.flags()
        if not flags[target] and all(v for k, v in flags.items() if k != target):
            return new, t
    raise PlacementExhausted(0)


# ---------------------------------------------------------------- Sobolev sums

def sobolev_sums(lam: LambdaSet, s: float):
    """S_j = sum over generation j of |n|^(2s), and the ratio S_{N-1}/S_3."""
    sums = [float(sum(float(_norm2(n)) ** s for n in g)) for g in lam.generations]
    ratio = sums[-2] / sums[2] if len(sums) >= 4 and sums[2] > 0 else None
    return sums, ratio


def _power_bounds(x: int, s: Fraction, digits: int):
    """Integer bounds lo <= 10^digits * x^s <= hi for integer x >= 0 and rational s."""
    p, q = s.numerator, s.denominator
    root, exact = integer_nthroot(10 ** (digits * q) * x ** p, q)
    return int(root), int(root) + (0 if exact else 1)


def growth_bound_holds(lam: LambdaSet, s, factor: Fraction = Fraction(1, 2), digits: int = 30) -> bool:
    """Exact test of S_{N-1}/S_3 >= factor * 2^((s-1)(N-4)).

    Both sums are bracketed with integer roots and the comparison is made in
    rational arithmetic, raising the precision until the answer is certain.
    """
    s = Fraction(s).limit_denominator(1000)
    n = lam.n_generations
    if n < 4:
        raise PreconditionError("growth ratio needs at least four generations")
    e = (s - 1) * (n - 4)
    for _ in range(6):
        top = [_power_bounds(_norm2(x), s, digits) for x in lam.generations[n - 2]]
        bot = [_power_bounds(_norm2(x), s, digits) for x in lam.generations[2]]
        lo = Fraction(sum(t[0] for t in top), max(sum(b[1] for b in bot), 1))
        hi = Fraction(sum(t[1] for t in top), max(sum(b[0] for b in bot), 1))
        # compare r >= factor * 2^e  <=>  (r / factor)^q >= 2^p  with e = p/q
        p, q = e.numerator, e.denominator
        def ge(r):
            lhs = (r / factor) ** q
            return lhs >= 2 ** p if p >= 0 else lhs * 2 ** (-p) >= 1
        if ge(lo):
            return True
        if not ge(hi):
            return False
        digits *= 2
    return ge(lo)

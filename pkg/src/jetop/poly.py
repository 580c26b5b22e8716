"""Sparse multivariate polynomials over Q.

A monomial is a tuple of ``(var_id, exponent)`` pairs sorted by ``var_id``;
a polynomial maps monomials to nonzero ``gmpy2.mpq`` coefficients. Instances
are treated as immutable once built.
"""

from __future__ import annotations

import heapq
from functools import lru_cache

from gmpy2 import mpq

from .symbols import var_of

ONE_MONO: tuple = ()
Q0 = mpq(0)
Q1 = mpq(1)


def mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def mono_div(a: tuple, b: tuple):
    """Return ``a / b`` or None when ``b`` does not divide ``a``."""
    if not b:
        return a
    da = dict(a)
    for v, e in b:
        have = da.get(v, 0)
        if have < e:
            return None
        if have == e:
            del da[v]
        else:
            da[v] = have - e
    return tuple(sorted(da.items()))


def _lex_key(m: tuple) -> tuple:
    return tuple((-v, e) for v, e in m)


_END = ((1 << 62, 0),)


def _heap_key(m: tuple) -> tuple:
    # smallest heap key = largest _lex_key
    return tuple((v, -e) for v, e in m) + _END


def mono_sort_key(m: tuple) -> tuple:
    """Deterministic graded order independent of interning history."""
    deg = sum(e for _, e in m)
    return (deg, tuple(sorted(((var_of(v).sort_key, e) for v, e in m), reverse=True)))


def print_key(m: tuple) -> tuple:
    deg = sum(e for _, e in m)
    return (-deg, tuple(sorted((var_of(v).sort_key, -e) for v, e in m)))


_P = (1 << 61) - 1
_zero_points: dict = {}


@lru_cache(maxsize=1 << 16)
def _modp(c) -> int:
    return int(c.numerator) % _P * pow(int(c.denominator) % _P, -1, _P) % _P


@lru_cache(maxsize=None)
def _base(v: int) -> int:
    # fixed pseudo-random coordinate per variable
    return (v * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) % _P


def _zero_point(f: "Poly"):
    if f in _zero_points:
        return _zero_points[f]
    pt = None
    for v, e in sorted(f.degrees().items()):
        if e != 1:
            continue
        a = b = 0
        for m, c in f.terms.items():
            t = _modp(c)
            lin = False
            for w, k in m:
                if w == v:
                    lin = True
                else:
                    t = t * pow(_base(w), k, _P) % _P
            if lin:
                a += t
            else:
                b += t
        a %= _P
        if a:
            pt = {v: (-b) * pow(a, -1, _P) % _P}
            break
    _zero_points[f] = pt
    return pt


class Poly:
    __slots__ = ("terms", "_hash", "_vars", "_degs")

    def __init__(self, terms: dict | None = None):
        self.terms = terms if terms is not None else {}
        self._hash = None
        self._vars = None
        self._degs = None

    # construction -----------------------------------------------------
    @staticmethod
    def const(c) -> "Poly":
        c = mpq(c)
        return Poly({ONE_MONO: c}) if c else Poly()

    @staticmethod
    def var(vid: int) -> "Poly":
        return Poly({((vid, 1),): Q1})

    # predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and ONE_MONO in self.terms)

    def const_value(self):
        return self.terms.get(ONE_MONO, Q0)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __len__(self) -> int:
        return len(self.terms)

    def vars(self) -> frozenset:
        if self._vars is None:
            s = set()
            for m in self.terms:
                for v, _ in m:
                    s.add(v)
            self._vars = frozenset(s)
        return self._vars

    def degrees(self) -> dict:
        if self._degs is None:
            d: dict = {}
            for m in self.terms:
                for v, e in m:
                    if e > d.get(v, 0):
                        d[v] = e
            self._degs = d
        return self._degs

    def degree_in(self, vid: int) -> int:
        return self.degrees().get(vid, 0)

    def total_degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    # arithmetic -------------------------------------------------------
    def __add__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        if not self.terms:
            return other
        if len(other.terms) > len(self.terms):
            self, other = other, self
        t = dict(self.terms)
        for m, c in other.terms.items():
            v = t.get(m)
            if v is None:
                t[m] = c
            else:
                v = v + c
                if v:
                    t[m] = v
                else:
                    del t[m]
        return Poly(t)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        t = dict(self.terms)
        for m, c in other.terms.items():
            v = t.get(m)
            if v is None:
                t[m] = -c
            else:
                v = v - c
                if v:
                    t[m] = v
                else:
                    del t[m]
        return Poly(t)

    def scale(self, c) -> "Poly":
        if not c:
            return Poly()
        if c == 1:
            return self
        return Poly({m: v * c for m, v in self.terms.items()})

    def mul_term(self, mono: tuple, c) -> "Poly":
        return Poly({mono_mul(m, mono): v * c for m, v in self.terms.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        a, b = self.terms, other.terms
        if not a or not b:
            return Poly()
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            (mb, cb), = b.items()
            if not mb:
                return self.scale(cb) if a is self.terms else other.scale(cb)
            return Poly({mono_mul(m, mb): c * cb for m, c in a.items()})
        t: dict = {}
        for mb, cb in b.items():
            for ma, ca in a.items():
                m = mono_mul(ma, mb)
                v = t.get(m)
                if v is None:
                    t[m] = ca * cb
                else:
                    v = v + ca * cb
                    if v:
                        t[m] = v
                    else:
                        del t[m]
        return Poly(t)

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative polynomial power")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def diff(self, vid: int) -> "Poly":
        t: dict = {}
        for m, c in self.terms.items():
            for k, (v, e) in enumerate(m):
                if v == vid:
                    nm = m[:k] + ((v, e - 1),) + m[k + 1:] if e > 1 else m[:k] + m[k + 1:]
                    t[nm] = c * e
                    break
        return Poly(t)

    # division ---------------------------------------------------------
    def leading(self):
        m = max(self.terms, key=_lex_key)
        return m, self.terms[m]

    def exquo(self, f: "Poly"):
        """Exact quotient ``self / f`` or None if ``f`` does not divide."""
        if not self.terms:
            return Poly()
        ft = f.terms
        if len(ft) == 1:
            (fm, fc), = ft.items()
            out = {}
            for m, c in self.terms.items():
                q = mono_div(m, fm)
                if q is None:
                    return None
                out[q] = c / fc
            return Poly(out)
        sd, fdg = self.degrees(), f.degrees()
        for v, e in fdg.items():
            if sd.get(v, 0) < e:
                return None
        if not self._may_vanish_on(f):
            return None
        lm, lc = f.leading()
        others = [(m, c) for m, c in ft.items() if m != lm]
        r = dict(self.terms)
        heap = [(_heap_key(m), m) for m in r]
        heapq.heapify(heap)
        q = {}
        while r:
            _, m = heapq.heappop(heap)
            if m not in r:
                continue
            qm = mono_div(m, lm)
            if qm is None:
                return None
            qc = r.pop(m) / lc
            q[qm] = qc
            for fm, fc in others:
                mm = mono_mul(qm, fm)
                old = r.get(mm)
                v = (Q0 if old is None else old) - qc * fc
                if v:
                    r[mm] = v
                    if old is None:
                        heapq.heappush(heap, (_heap_key(mm), mm))
                else:
                    r.pop(mm, None)
        return Poly(q)

    def _may_vanish_on(self, f: "Poly") -> bool:
        """False only if ``self`` is provably nonzero somewhere on ``f = 0``.

        Uses one point of ``f = 0`` modulo a large prime, found by solving
        ``f`` for a variable in which it is linear.
        """
        pt = _zero_point(f)
        if pt is None:
            return True
        return self.eval_mod(pt) == 0

    def eval_mod(self, point: dict) -> int:
        total = 0
        powers: dict = {}
        for m, c in self.terms.items():
            t = _modp(c)
            for ve in m:
                x = powers.get(ve)
                if x is None:
                    v, e = ve
                    x = powers[ve] = pow(point[v] if v in point else _base(v), e, _P)
                t = t * x % _P
            total += t
        return total % _P

    # misc -------------------------------------------------------------
    def canonical_leading(self):
        m = max(self.terms, key=mono_sort_key)
        return m, self.terms[m]

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda mc: print_key(mc[0]))

    def content_key(self) -> tuple:
        """Permutation-free key for deterministic ordering of factors."""
        return tuple((mono_sort_key(m), (int(c.numerator), int(c.denominator))) for m, c in self.sorted_terms())

    def split(self, pred) -> dict:
        """Group terms by the sub-monomial of vars where ``pred(var_id)``.

        Returns ``{selected_mono: Poly of remaining factors}``.
        """
        out: dict = {}
        for m, c in self.terms.items():
            sel = tuple(p for p in m if pred(p[0]))
            rest = tuple(p for p in m if not pred(p[0]))
            d = out.setdefault(sel, {})
            d[rest] = d.get(rest, Q0) + c
        return {k: Poly({m: c for m, c in v.items() if c}) for k, v in out.items()}

    def eval(self, values) -> tuple[float, float]:
        """Float value and largest absolute term magnitude."""
        total = 0.0
        scale = 0.0
        for m, c in self.terms.items():
            t = float(c)
            for v, e in m:
                t *= values(v) ** e
            total += t
            if abs(t) > scale:
                scale = abs(t)
        return total, scale

    def __repr__(self) -> str:
        return f"Poly({len(self.terms)} terms)"

"""Factorization of polynomials into normalized irreducibles.

Multivariate factorization over Q is delegated to sympy's sparse polynomial
rings; everything else in the kernel is native.
"""

from __future__ import annotations

from functools import lru_cache

from gmpy2 import mpq
from sympy import QQ
from sympy.polys.rings import ring

from .poly import Poly, Q1


def normalize(f: Poly) -> tuple[object, Poly]:
    """Split ``f`` as ``c * g`` with ``g`` monic under the canonical order."""
    _, lc = f.canonical_leading()
    if lc == 1:
        return Q1, f
    return lc, f.scale(1 / lc)


@lru_cache(maxsize=None)
def _ring(ids: tuple[int, ...]):
    R, *_ = ring(",".join(f"v{i}" for i in ids), QQ)
    return R


def _to_sympy(p: Poly, ids: tuple[int, ...]):
    pos = {v: k for k, v in enumerate(ids)}
    n = len(ids)
    R = _ring(ids)
    d = {}
    for m, c in p.terms.items():
        e = [0] * n
        for v, k in m:
            e[pos[v]] = k
        d[tuple(e)] = QQ(int(c.numerator), int(c.denominator))
    return R.from_dict(d)


def _from_sympy(sp, ids: tuple[int, ...]) -> Poly:
    t = {}
    for e, c in sp.terms():
        m = tuple((ids[k], x) for k, x in enumerate(e) if x)
        t[m] = mpq(int(c.numerator), int(c.denominator))
    return Poly(t)


_cache: dict[Poly, tuple] = {}


def factor(p: Poly) -> tuple[object, list[tuple[Poly, int]]]:
    """Return ``(c, [(g, e), ...])`` with ``p = c * prod(g**e)``.

    Every ``g`` is irreducible and monic under the canonical monomial order,
    so the factor list is unique.
    """
    hit = _cache.get(p)
    if hit is not None:
        return hit
    if p.is_zero():
        raise ZeroDivisionError("cannot factor the zero polynomial")
    if p.is_const():
        out = (p.const_value(), [])
    elif p.is_monomial():
        (m, c), = p.terms.items()
        out = (c, [(Poly.var(v), e) for v, e in m])
    elif p.total_degree() == 1:
        c, g = normalize(p)
        out = (c, [(g, 1)])
    else:
        ids = tuple(sorted(p.vars()))
        cont, facs = _to_sympy(p, ids).factor_list()
        c = mpq(int(cont.numerator), int(cont.denominator))
        gs = []
        for f, e in facs:
            k, g = normalize(_from_sympy(f, ids))
            c *= k ** e
            gs.append((g, e))
        out = (c, gs)
    _cache[p] = out
    return out

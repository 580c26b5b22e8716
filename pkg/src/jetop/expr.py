"""Exact rational expressions in canonical form.

An :class:`Expression` is ``num / prod(f_i ** k_i)`` where ``num`` is an
expanded polynomial and every ``f_i`` is a distinct monic irreducible
polynomial that does not divide ``num``. With the factors kept sorted this
representation is unique, so structural equality decides algebraic equality.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

from gmpy2 import mpq

from .factoring import factor
from .poly import Poly
from .symbols import Kind, Var, var_of

_key_cache: dict[Poly, tuple] = {}


def _fkey(f: Poly) -> tuple:
    k = _key_cache.get(f)
    if k is None:
        k = f.content_key()
        _key_cache[f] = k
    return k


class GuardedDenominator(ArithmeticError):
    """A denominator evaluated too close to zero."""


def _cancel(num: Poly, den: dict) -> "Expression":
    if num.is_zero():
        return ZERO
    out = []
    for f, k in den.items():
        while k:
            q = num.exquo(f)
            if q is None:
                break
            num = q
            k -= 1
        if k:
            out.append((f, k))
    out.sort(key=lambda fk: _fkey(fk[0]))
    return Expression._raw(num, tuple(out))


def _den_poly(den, skip=None) -> Poly:
    p = Poly.const(1)
    for f, k in den:
        if skip is not None and f == skip:
            continue
        p = p * f ** k
    return p


def _as_expr(x) -> "Expression":
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, Rational)) or type(x).__name__ == "mpq":
        if isinstance(x, Fraction):
            x = mpq(x.numerator, x.denominator)
        return Expression._raw(Poly.const(x), ())
    if isinstance(x, Var):
        return Expression.var(x)
    return NotImplemented


class Expression:
    __slots__ = ("num", "den", "_hash")

    def __init__(self, value=0):
        e = _as_expr(value)
        if e is NotImplemented:
            raise TypeError(f"cannot build an Expression from {value!r}")
        self.num, self.den, self._hash = e.num, e.den, None

    @classmethod
    def _raw(cls, num: Poly, den: tuple) -> "Expression":
        e = object.__new__(cls)
        e.num = num
        e.den = den
        e._hash = None
        return e

    @staticmethod
    def var(v: Var) -> "Expression":
        return Expression._raw(Poly.var(v.id), ())

    @staticmethod
    def const(c) -> "Expression":
        return Expression._raw(Poly.const(c), ())

    @staticmethod
    def from_poly(p: Poly) -> "Expression":
        return Expression._raw(p, ())

    # predicates ---------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self) -> bool:
        return not self.num.is_zero()

    def is_const(self) -> bool:
        return not self.den and self.num.is_const()

    def const_value(self):
        if not self.is_const():
            raise ValueError("expression is not a rational constant")
        return self.num.const_value()

    def is_polynomial(self) -> bool:
        return not self.den

    def __eq__(self, other) -> bool:
        o = _as_expr(other)
        if o is NotImplemented:
            return False
        return self.num == o.num and self.den == o.den

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def var_ids(self) -> frozenset:
        s = set(self.num.vars())
        for f, _ in self.den:
            s |= f.vars()
        return frozenset(s)

    def free_vars(self) -> list[Var]:
        return sorted((var_of(v) for v in self.var_ids()), key=lambda v: v.sort_key)

    def size(self) -> int:
        return len(self.num) + sum(len(f) for f, _ in self.den)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = _as_expr(other)
        if o is NotImplemented:
            return o
        if o.num.is_zero():
            return self
        if self.num.is_zero():
            return o
        if not self.den and not o.den:
            return Expression._raw(self.num + o.num, ())
        if self.den == o.den:
            return _cancel(self.num + o.num, dict(self.den))
        da, db = dict(self.den), dict(o.den)
        lcm = dict(da)
        for f, k in db.items():
            if k > lcm.get(f, 0):
                lcm[f] = k
        na, nb = self.num, o.num
        for f, k in lcm.items():
            if k > da.get(f, 0):
                na = na * f ** (k - da.get(f, 0))
            if k > db.get(f, 0):
                nb = nb * f ** (k - db.get(f, 0))
        return _cancel(na + nb, lcm)

    __radd__ = __add__

    def __neg__(self):
        return Expression._raw(-self.num, self.den)

    def __sub__(self, other):
        o = _as_expr(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = _as_expr(other)
        if o is NotImplemented:
            return o
        if self.num.is_zero() or o.num.is_zero():
            return ZERO
        if not self.den and not o.den:
            return Expression._raw(self.num * o.num, ())
        na, nb = self.num, o.num
        da, db = dict(self.den), dict(o.den)
        for f in list(da):
            while da[f]:
                q = nb.exquo(f)
                if q is None:
                    break
                nb = q
                da[f] -= 1
        for f in list(db):
            while db[f]:
                q = na.exquo(f)
                if q is None:
                    break
                na = q
                db[f] -= 1
        den = {f: k for f, k in da.items() if k}
        for f, k in db.items():
            if k:
                den[f] = den.get(f, 0) + k
        out = sorted(den.items(), key=lambda fk: _fkey(fk[0]))
        return Expression._raw(na * nb, tuple(out))

    __rmul__ = __mul__

    def inverse(self) -> "Expression":
        if self.num.is_zero():
            raise ZeroDivisionError("division by the zero expression")
        c, facs = factor(self.num)
        num = _den_poly(self.den).scale(1 / c)
        den = sorted(facs, key=lambda fk: _fkey(fk[0]))
        return Expression._raw(num, tuple(den))

    def __truediv__(self, other):
        o = _as_expr(other)
        if o is NotImplemented:
            return o
        if o.is_const():
            c = o.num.const_value()
            if not c:
                raise ZeroDivisionError("division by the zero expression")
            return Expression._raw(self.num.scale(1 / c), self.den)
        return self * o.inverse()

    def __rtruediv__(self, other):
        return _as_expr(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0:
            return ONE
        return Expression._raw(self.num ** n, tuple((f, k * n) for f, k in self.den))

    # calculus -----------------------------------------------------------
    def diff(self, v: Var | int) -> "Expression":
        """Partial derivative, all jet coordinates independent."""
        vid = v if isinstance(v, int) else v.id
        one = Expression.const(1)
        return self.derive(lambda w: one if w == vid else None)

    def derive(self, dvar) -> "Expression":
        """Apply the derivation sending variable id ``w`` to ``dvar(w)``.

        ``dvar`` returns an Expression or None for zero.
        """
        dn = _poly_derivation(self.num, dvar)
        if not self.den:
            return dn
        inv_den = Expression._raw(Poly.const(1), self.den)
        res = dn * inv_den
        s = ZERO
        for f, k in self.den:
            df = _poly_derivation(f, dvar)
            if df.is_zero():
                continue
            s = s + df * k * Expression._raw(Poly.const(1), ((f, 1),))
        if s.is_zero():
            return res
        return res - self * s

    def subs(self, mapping: dict) -> "Expression":
        """Simultaneous substitution; keys are Var or var ids."""
        if not mapping:
            return self
        m = {(k if isinstance(k, int) else k.id): _as_expr(v) for k, v in mapping.items()}
        if not (self.var_ids() & m.keys()):
            return self
        res = _poly_subs(self.num, m)
        for f, k in self.den:
            if f.vars() & m.keys():
                res = res * _poly_subs(f, m) ** (-k)
            else:
                res = res * Expression._raw(Poly.const(1), ((f, k),))
        return res

    def coefficients(self, v: Var | int) -> dict[int, "Expression"]:
        """Coefficients of powers of ``v``; ``v`` must not occur in the denominator."""
        vid = v if isinstance(v, int) else v.id
        for f, _ in self.den:
            if vid in f.vars():
                raise ValueError(f"{var_of(vid)} occurs in a denominator")
        groups: dict[int, dict] = {}
        for mono, c in self.num.terms.items():
            e = 0
            rest = mono
            for k, (w, x) in enumerate(mono):
                if w == vid:
                    e = x
                    rest = mono[:k] + mono[k + 1:]
                    break
            groups.setdefault(e, {})[rest] = c
        out = {}
        for e, t in groups.items():
            out[e] = _cancel(Poly(t), dict(self.den))
        return out

    def degree(self, v: Var | int) -> int:
        vid = v if isinstance(v, int) else v.id
        return self.num.degree_in(vid)

    def evaluate(self, values, guard: float = 0.0) -> tuple[float, float]:
        """Float value and intermediate-term scale at ``values(var_id)``."""
        n, scale = self.num.eval(values)
        d = 1.0
        for f, k in self.den:
            fv, _ = f.eval(values)
            if abs(fv) <= guard:
                raise GuardedDenominator(f"denominator factor near zero ({fv:g})")
            d *= fv ** k
        return n / d, scale / abs(d)

    # printing -----------------------------------------------------------
    def to_text(self) -> str:
        num = _poly_text(self.num)
        if not self.den:
            return num
        if len(self.num) > 1:
            num = f"({num})"
        parts = []
        for f, k in self.den:
            s = _poly_text(f)
            if len(f) > 1 or not _is_atom_text(f):
                s = f"({s})"
            if k > 1:
                s = f"{s}^{k}"
            parts.append(s)
        den = "*".join(parts)
        if len(parts) > 1:
            den = f"({den})"
        return f"{num}/{den}"

    __str__ = to_text

    def __repr__(self) -> str:
        return f"Expression({self.to_text()!r})"


def _is_atom_text(f: Poly) -> bool:
    if not f.is_monomial():
        return False
    (m, c), = f.terms.items()
    return c == 1 and len(m) == 1 and m[0][1] == 1


def _mono_text(m: tuple) -> str:
    parts = []
    for v, e in sorted(m, key=lambda ve: var_of(ve[0]).sort_key):
        s = var_of(v).text()
        parts.append(f"{s}^{e}" if e > 1 else s)
    return "*".join(parts)


def _poly_text(p: Poly) -> str:
    if p.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(p.sorted_terms()):
        neg = c < 0
        a = -c if neg else c
        if not m:
            body = str(a)
        elif a == 1:
            body = _mono_text(m)
        else:
            body = f"{a}*{_mono_text(m)}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def _poly_derivation(p: Poly, dvar) -> Expression:
    pairs = []
    for v in p.vars():
        dv = dvar(v)
        if dv is None or dv.num.is_zero():
            continue
        pairs.append((p.diff(v), dv))
    if not pairs:
        return ZERO
    if all(not dv.den for _, dv in pairs):
        acc = Poly()
        for part, dv in pairs:
            acc = acc + part * dv.num
        return Expression._raw(acc, ())
    lcm: dict = {}
    for _, dv in pairs:
        for f, k in dv.den:
            if k > lcm.get(f, 0):
                lcm[f] = k
    acc = Poly()
    for part, dv in pairs:
        term = part * dv.num
        have = dict(dv.den)
        for f, k in lcm.items():
            if k > have.get(f, 0):
                term = term * f ** (k - have.get(f, 0))
        acc = acc + term
    return _cancel(acc, lcm)


def _poly_subs(p: Poly, m: dict) -> Expression:
    rel = [v for v in p.vars() if v in m]
    if not rel:
        return Expression._raw(p, ())
    degs = p.degrees()
    lcm: dict = {}
    den_poly = {}
    for v in rel:
        e = m[v]
        den_poly[v] = _den_poly(e.den)
        for f, k in e.den:
            lcm[f] = lcm.get(f, 0) + k * degs[v]
    pw_num: dict = {}
    pw_den: dict = {}

    def power(cache, base, v, n):
        key = (v, n)
        r = cache.get(key)
        if r is None:
            r = base ** n
            cache[key] = r
        return r

    relset = set(rel)
    acc = Poly()
    for mono, c in p.terms.items():
        kept = tuple(ve for ve in mono if ve[0] not in relset)
        exps = dict(ve for ve in mono if ve[0] in relset)
        term = Poly({kept: c})
        for v in rel:
            e = exps.get(v, 0)
            if e:
                term = term * power(pw_num, m[v].num, v, e)
            if m[v].den and degs[v] - e:
                term = term * power(pw_den, den_poly[v], v, degs[v] - e)
        acc = acc + term
    if not lcm:
        return Expression._raw(acc, ())
    return _cancel(acc, lcm)


ZERO = Expression._raw(Poly(), ())
ONE = Expression._raw(Poly.const(1), ())


def simplify(e: Expression) -> Expression:
    """Canonical rational normal form.

    Expressions are canonical on construction, so this is the identity; it
    exists so callers can state intent.
    """
    return e


def diff(e: Expression, v: Var) -> Expression:
    return e.diff(v)


def substitute(e: Expression, bindings: dict) -> Expression:
    return e.subs(bindings)


def as_expression(x) -> Expression:
    e = _as_expr(x)
    if e is NotImplemented:
        raise TypeError(f"cannot convert {x!r} to an Expression")
    return e


def is_local_var(v: Var) -> bool:
    return v.kind != Kind.NONLOCAL


def esum(terms) -> Expression:
    """Sum of many expressions with a single cancellation at the end."""
    groups: dict = {}
    for t in terms:
        t = as_expression(t)
        if t.num.is_zero():
            continue
        g = groups.get(t.den)
        groups[t.den] = t.num if g is None else g + t.num
    if not groups:
        return ZERO
    if len(groups) == 1:
        (den, num), = groups.items()
        return Expression._raw(num, ()) if not den else _cancel(num, dict(den))
    lcm: dict = {}
    for den in groups:
        for f, k in den:
            if k > lcm.get(f, 0):
                lcm[f] = k
    total = Poly()
    for den, num in groups.items():
        d = dict(den)
        for f, k in lcm.items():
            if k > d.get(f, 0):
                num = num * f ** (k - d.get(f, 0))
        total = total + num
    return _cancel(total, lcm)

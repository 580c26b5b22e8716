"""Jet-space calculus relative to a PDE system and an optional covering.

A :class:`PDESystem` carries its equations together with one solved leading
derivative per equation. A :class:`Context` packages a system (or just a list
of independent variables) with a covering and provides memoised total
derivatives and normal forms on the solution manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

from . import symbols as S
from .dsl import SymbolTable
from .expr import ONE, ZERO, Expression, as_expression
from .operators import TDOperator, adjoint, apply_to
from .symbols import Kind, Var, var_of


class InvalidOrientation(ValueError):
    pass


class UndefinedDerivative(ValueError):
    """A nonlocal derivative that no relation or free slot provides."""


def _contains(big: tuple, small: tuple) -> bool:
    return all(b >= s for b, s in zip(big, small))


@dataclass
class PDESystem:
    name: str
    table: SymbolTable
    equations: list[Expression]
    leads: list[Var]
    constraints: list[Expression] = field(default_factory=list)
    solved: list[Expression] = field(default_factory=list)
    const_rules: dict = field(default_factory=dict)
    ranking: tuple = ()
    raw_equations: list = field(default_factory=list)

    @property
    def independents(self) -> tuple:
        return tuple(self.table.independents)

    @property
    def dependents(self) -> tuple:
        return tuple(self.table.dependents)

    @property
    def orientation(self) -> dict:
        return dict(zip(self.leads, self.solved))


def solve_constraints(constraints, constants) -> dict:
    """Eliminate one constant per polynomial relation, in declaration order."""
    rules: dict = {}
    for c in constraints:
        c = c.subs(rules) if rules else c
        if c.is_zero():
            continue
        for name in constants:
            v = S.const(name)
            if v.id in rules or v.id not in c.num.vars():
                continue
            if any(v.id in f.vars() for f, _ in c.den) or c.degree(v) != 1:
                continue
            co = c.coefficients(v)
            val = -co.get(0, ZERO) / co[1]
            rules = {k: e.subs({v.id: val}) for k, e in rules.items()}
            rules[v.id] = val
            break
        else:
            raise InvalidOrientation(f"cannot solve constraint {c} for a declared constant")
    return rules


def _rank(v: Var, priority: tuple, deps: tuple) -> tuple:
    return (v.order, v.counts(priority), -deps.index(v.name))


def make_system(name, table: SymbolTable, equations, leads, constraints=()) -> PDESystem:
    """Build a system and validate its orientation.

    Each lead must occur linearly in its equation, the solved right side must
    not contain it or its derivatives, and some ranking of the independent
    variables must make the lead strictly maximal among the jets of its
    equation. The first such ranking is recorded.
    """
    if len(equations) != len(leads):
        raise InvalidOrientation("each equation needs exactly one solved derivative")
    rules = solve_constraints(list(constraints), table.constants)
    deps = tuple(table.dependents)
    eqs = [e.subs(rules) if rules else e for e in equations]
    solved = []
    for F, lead in zip(eqs, leads):
        if lead.kind != Kind.JET or lead.name not in deps:
            raise InvalidOrientation(f"{lead} is not a jet of a dependent variable")
        if lead.id not in F.num.vars():
            raise InvalidOrientation(f"{lead} does not occur in its equation")
        if any(lead.id in f.vars() for f, _ in F.den) or F.degree(lead) != 1:
            raise InvalidOrientation(f"equation is not linear in {lead}")
        co = F.coefficients(lead)
        rhs = -co.get(0, ZERO) / co[1]
        for w in rhs.free_vars():
            if w.kind == Kind.JET and w.name == lead.name and _contains(w.counts(table.independents), lead.counts(table.independents)):
                raise InvalidOrientation(f"solved expression for {lead} contains {w}")
        solved.append(rhs)
    indeps = tuple(table.independents)
    ranking = None
    for perm in permutations(indeps):
        ok = True
        for F, lead in zip(eqs, leads):
            top = _rank(lead, perm, deps)
            for w in F.free_vars():
                if w.kind == Kind.JET and w != lead and _rank(w, perm, deps) >= top:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            ranking = perm
            break
    if ranking is None:
        raise InvalidOrientation("no ranking makes every solved derivative maximal in its equation")
    return PDESystem(name, table, eqs, list(leads), list(constraints), solved, rules, ranking, list(equations))


class Context:
    """Normal-form context: a system, a covering, or just free jets.

    ``covering`` is any object with a ``variables`` mapping from nonlocal
    name to an object exposing ``relations`` (direction -> Expression).
    """

    MAX_DEPTH = 400

    def __init__(self, system: PDESystem | None = None, covering=None, indeps=None):
        self.system = system
        self.covering = covering
        if indeps is None:
            if system is None:
                raise ValueError("a context needs a system or a list of independents")
            indeps = system.independents
        self.indeps = tuple(indeps)
        self._jet: dict = {}
        self._dv: dict = {}
        self._dpow: dict = {}
        self._nf: dict = {}
        self._depth = 0
        self._deps = set(system.dependents) if system else set()
        self._leads = [(l.name, l.counts(self.indeps), i) for i, l in enumerate(system.leads)] if system else []

    @classmethod
    def free(cls, indeps=("x", "y", "z", "t")) -> "Context":
        return cls(None, None, indeps)

    def with_covering(self, covering) -> "Context":
        return Context(self.system, covering, self.indeps)

    # reduction --------------------------------------------------------
    def _nonlocal(self, name):
        if self.covering is None:
            return None
        return self.covering.variables.get(name)

    def reducible(self, v: Var) -> bool:
        if v.kind == Kind.JET:
            if v.name not in self._deps:
                return False
            c = v.counts(self.indeps)
            return any(n == v.name and _contains(c, lc) for n, lc, _ in self._leads)
        if v.kind == Kind.NONLOCAL:
            nl = self._nonlocal(v.name)
            return nl is not None and any(d in nl.relations for d in v.index)
        if v.kind == Kind.CONST and self.system is not None:
            return v.id in self.system.const_rules
        return False

    def jet_nf(self, v: Var) -> Expression:
        hit = self._jet.get(v.id)
        if hit is not None:
            return hit
        if not self.reducible(v):
            out = Expression.var(v)
            self._jet[v.id] = out
            return out
        self._depth += 1
        try:
            if self._depth > self.MAX_DEPTH:
                raise InvalidOrientation(f"normal form of {v} does not terminate")
            out = self._reduce(v)
        finally:
            self._depth -= 1
        self._jet[v.id] = out
        return out

    def _reduce(self, v: Var) -> Expression:
        if v.kind == Kind.CONST:
            return self.nf(self.system.const_rules[v.id])
        if v.kind == Kind.JET:
            c = v.counts(self.indeps)
            for name, lc, i in self._leads:
                if name == v.name and _contains(c, lc):
                    if c == lc:
                        return self.nf(self.system.solved[i])
                    for k, d in enumerate(self.indeps):
                        if c[k] > lc[k]:
                            return self.D(self.jet_nf(v.dropped(d)), d)
        nl = self._nonlocal(v.name)
        for d in self.indeps:
            if d in v.index and d in nl.relations:
                rel = self.nf(as_expression(nl.relations[d]))
                rest = list(v.index)
                rest.remove(d)
                for k in rest:
                    rel = self.D(rel, k)
                return rel
        raise UndefinedDerivative(f"no relation for {v}")

    def nf(self, e) -> Expression:
        e = as_expression(e)
        hit = self._nf.get(e)
        if hit is not None:
            return hit
        m = {}
        for vid in e.var_ids():
            v = var_of(vid)
            if self.reducible(v):
                m[vid] = self.jet_nf(v)
        out = e.subs(m) if m else e
        self._nf[e] = out
        self._nf[out] = out
        return out

    # total derivatives ---------------------------------------------------
    def _dvar(self, vid: int, d: str):
        key = (vid, d)
        if key in self._dv:
            return self._dv[key]
        v = var_of(vid)
        if v.kind == Kind.INDEP:
            out = ONE if v.name == d else None
        elif v.is_jet:
            out = self.jet_nf(v.shifted(d))
        else:
            out = None
        self._dv[key] = out
        return out

    def D(self, e, d: str) -> Expression:
        """Total derivative in direction ``d``, in normal form."""
        if d not in self.indeps:
            raise ValueError(f"{d!r} is not an independent variable")
        e = self.nf(e)
        return e.derive(lambda vid: self._dvar(vid, d))

    def Dpow(self, e, counts: tuple) -> Expression:
        e = as_expression(e)
        key = (e, counts)
        hit = self._dpow.get(key)
        if hit is not None:
            return hit
        out = e
        for d, n in zip(self.indeps, counts):
            for _ in range(n):
                out = self.D(out, d)
        self._dpow[key] = out
        return out

    def Dseq(self, e, dirs) -> Expression:
        for d in dirs:
            e = self.D(e, d)
        return e


# free functions ------------------------------------------------------------


def total_derivative(e, d: str, ctx: Context) -> Expression:
    return ctx.D(e, d)


def normal_form(e, ctx: Context) -> Expression:
    return ctx.nf(e)


def _dependents(ctx: Context, deps=None) -> tuple:
    if deps is not None:
        return tuple(deps)
    if ctx.system is not None:
        return ctx.system.dependents
    return ("u",)


def linearize(f, ctx: Context, deps=None) -> TDOperator:
    """The operator of linearization of the vector ``f``."""
    if isinstance(f, (Expression, int)):
        f = [f]
    f = [as_expression(x) for x in f]
    deps = _dependents(ctx, deps)
    terms: dict = {}
    for i, fi in enumerate(f):
        for v in fi.free_vars():
            if v.kind == Kind.NONLOCAL:
                raise ValueError(f"cannot linearize a nonlocal expression (contains {v})")
            if v.kind != Kind.JET or v.name not in deps:
                continue
            c = ctx.nf(fi.diff(v))
            if c.is_zero():
                continue
            k = v.counts(ctx.indeps)
            m = terms.setdefault(k, [[ZERO] * len(deps) for _ in f])
            m[i][deps.index(v.name)] = m[i][deps.index(v.name)] + c
    return TDOperator(ctx.indeps, len(f), len(deps), {k: tuple(tuple(r) for r in m) for k, m in terms.items()})


def directional_derivative(f, U, ctx: Context, deps=None) -> Expression:
    """Evolutionary derivation of ``f`` along ``U``, by the chain rule."""
    f = as_expression(f)
    U = [as_expression(x) for x in U]
    deps = _dependents(ctx, deps)

    def dvar(vid):
        v = var_of(vid)
        if v.kind == Kind.JET and v.name in deps:
            return ctx.Dpow(U[deps.index(v.name)], v.counts(ctx.indeps))
        return None

    return ctx.nf(f.derive(dvar))


def lambda_coefficients(e: Expression) -> dict:
    """Numerator coefficients by powers of the spectral parameter."""
    lam = S.spectral()
    num = Expression.from_poly(e.num)
    return {k: c for k, c in num.coefficients(lam).items() if not c.is_zero()}


@dataclass
class InvarianceResult:
    passed: bool
    residuals: list
    by_lambda: list

    def __bool__(self) -> bool:
        return self.passed


def check_invariance(candidate, ctx: Context, mode: str = "symmetry") -> InvarianceResult:
    """Test ``l_F(U) = 0`` (symmetry) or ``l_F^+(g) = 0`` (cosymmetry)."""
    if ctx.system is None:
        raise ValueError("invariance needs a system")
    if isinstance(candidate, (Expression, int)):
        candidate = [candidate]
    cand = [ctx.nf(as_expression(c)) for c in candidate]
    lF = linearize(ctx.system.equations, ctx)
    if mode == "symmetry":
        op = lF
    elif mode == "cosymmetry":
        op = adjoint(lF, ctx)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if len(cand) != op.cols:
        raise ValueError(f"candidate has {len(cand)} components, expected {op.cols}")
    res = [ctx.nf(r) for r in apply_to(op, cand, ctx)]
    split = [lambda_coefficients(r) for r in res]
    return InvarianceResult(all(r.is_zero() for r in res), res, split)

"""Interned variables of the extended jet space.

Every quantity an expression may depend on is a :class:`Var`. Variables are
interned into small integers so that polynomial monomials can be stored as
tuples of ``(var_id, exponent)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class Kind(IntEnum):
    """Variable kinds, in canonical print/sort order."""

    INDEP = 0
    CONST = 1
    SPECTRAL = 2
    JET = 3
    NONLOCAL = 4
    UNKNOWN = 5


SPECTRAL_NAME = "lambda"

# Conventional directions first, then alphabetical.
_PREFERRED = ("x", "y", "z", "t")


def index_key(name: str) -> tuple[int, str]:
    try:
        return (_PREFERRED.index(name), "")
    except ValueError:
        return (len(_PREFERRED), name)


def canonical_index(names) -> tuple[str, ...]:
    return tuple(sorted(names, key=index_key))


@dataclass(frozen=True)
class Var:
    kind: Kind
    name: str
    index: tuple[str, ...] = ()
    id: int = field(default=-1, compare=False, hash=False, repr=False)

    @property
    def order(self) -> int:
        return len(self.index)

    @property
    def is_jet(self) -> bool:
        return self.kind in (Kind.JET, Kind.NONLOCAL)

    @property
    def is_constant(self) -> bool:
        """True for quantities annihilated by every total derivative."""
        return self.kind in (Kind.CONST, Kind.SPECTRAL, Kind.UNKNOWN)

    @property
    def sort_key(self) -> tuple:
        return (int(self.kind), self.name, len(self.index), tuple(index_key(i) for i in self.index))

    def counts(self, indeps: tuple[str, ...]) -> tuple[int, ...]:
        return tuple(self.index.count(d) for d in indeps)

    def shifted(self, direction: str) -> "Var":
        return jet(self.name, self.index + (direction,), nonlocal_=self.kind == Kind.NONLOCAL)

    def dropped(self, direction: str) -> "Var":
        idx = list(self.index)
        idx.remove(direction)
        return jet(self.name, idx, nonlocal_=self.kind == Kind.NONLOCAL)

    def text(self) -> str:
        if self.kind == Kind.SPECTRAL:
            return SPECTRAL_NAME
        if self.is_jet and self.index:
            return f"{self.name}[{','.join(self.index)}]"
        return self.name

    def __str__(self) -> str:
        return self.text()


_by_key: dict[tuple, Var] = {}
_by_id: list[Var] = []


def intern(kind: Kind, name: str, index: tuple[str, ...] = ()) -> Var:
    key = (kind, name, index)
    v = _by_key.get(key)
    if v is None:
        v = Var(kind, name, index, len(_by_id))
        _by_key[key] = v
        _by_id.append(v)
    return v


def var_of(vid: int) -> Var:
    return _by_id[vid]


def indep(name: str) -> Var:
    return intern(Kind.INDEP, name)


def const(name: str) -> Var:
    return intern(Kind.CONST, name)


def spectral() -> Var:
    return intern(Kind.SPECTRAL, SPECTRAL_NAME)


def unknown(name: str) -> Var:
    return intern(Kind.UNKNOWN, name)


def jet(name: str, index=(), nonlocal_: bool = False) -> Var:
    kind = Kind.NONLOCAL if nonlocal_ else Kind.JET
    return intern(kind, name, canonical_index(index))


_fresh_counter = [0]


def fresh_unknowns(prefix: str, n: int) -> list[Var]:
    """Return ``n`` never-before-used unknown coefficient symbols."""
    out = []
    for _ in range(n):
        _fresh_counter[0] += 1
        out.append(unknown(f"_{prefix}{_fresh_counter[0]}"))
    return out

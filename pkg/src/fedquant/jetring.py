"""Exact truncated multivariate power series (jets) over the rationals.

A :class:`Jet` is a Taylor expansion at the origin in ``num_vars`` variables,
kept up to total degree ``order``.  Coefficients are ``gmpy2.mpq`` rationals.

Differentiation loses information in the top degree, so every jet also carries
a ``prec`` (``prec <= order``): the coefficients are exact modulo monomials of
total degree ``> prec``, and nothing above ``prec`` is stored.  Arithmetic
combines precisions by taking the minimum; :func:`jet_diff` lowers it by one.
Two jets must agree on ``num_vars`` and on the declared ``order`` to be
combined.
"""
from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

__all__ = [
    "Rational",
    "Jet",
    "JetError",
    "DimensionMismatchError",
    "NonUnitError",
    "DegenerateFormError",
    "rational",
    "jet_diff",
    "jet_invert",
    "jet_matrix_inverse",
    "matmul",
    "monomials",
    "grlex_key",
]

Rational = type(mpq(0))
Exponent = tuple[int, ...]


class JetError(ValueError):
    pass


class DimensionMismatchError(JetError):
    pass


class NonUnitError(JetError):
    pass


class DegenerateFormError(JetError):
    pass


def rational(value) -> Rational:
    """Coerce ``int``, ``Fraction``, ``mpq`` or a ``"p/q"`` string."""
    if isinstance(value, str):
        return mpq(value.strip())
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return mpq(int(value.numerator), int(value.denominator))
    return mpq(value)


def grlex_key(exp: Sequence[int]):
    """Graded-lexicographic sort key (low degree first)."""
    return (sum(exp), tuple(-e for e in exp))


def monomials(num_vars: int, degree: int) -> list[Exponent]:
    """All exponent vectors of the given total degree, in grlex order."""
    out = []
    for combo in combinations_with_replacement(range(num_vars), degree):
        exp = [0] * num_vars
        for v in combo:
            exp[v] += 1
        out.append(tuple(exp))
    out.sort(key=grlex_key)
    return out


class Jet:
    """Truncated power series with exact rational coefficients.

    Parameters
    ----------
    num_vars : int
        Number of base coordinates.
    order : int
        Declared truncation order (maximal retained total degree).
    terms : mapping, optional
        ``{exponent tuple: coefficient}``.  Zero coefficients and monomials of
        degree above ``prec`` are dropped.
    prec : int, optional
        Degree up to which the coefficients are known exactly.  Defaults to
        ``order``.
    """

    __slots__ = ("num_vars", "order", "prec", "terms")

    def __init__(self, num_vars: int, order: int,
                 terms: Mapping[Exponent, object] | None = None,
                 prec: int | None = None):
        if prec is None:
            prec = order
        if prec > order:
            prec = order
        self.num_vars = num_vars
        self.order = order
        self.prec = prec
        clean = {}
        if terms:
            for exp, c in terms.items():
                if len(exp) != num_vars:
                    raise DimensionMismatchError(
                        f"exponent {exp} has length {len(exp)}, expected {num_vars}")
                if sum(exp) > prec:
                    continue
                c = rational(c)
                if c:
                    clean[tuple(exp)] = c
        self.terms = clean

    @classmethod
    def _raw(cls, num_vars, order, prec, terms):
        # trusted constructor: terms already clean
        obj = cls.__new__(cls)
        obj.num_vars = num_vars
        obj.order = order
        obj.prec = prec
        obj.terms = terms
        return obj

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, num_vars: int, order: int, prec: int | None = None) -> "Jet":
        return cls._raw(num_vars, order, order if prec is None else min(prec, order), {})

    @classmethod
    def constant(cls, value, num_vars: int, order: int) -> "Jet":
        return cls(num_vars, order, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, k: int, num_vars: int, order: int) -> "Jet":
        """The coordinate function ``x^(k+1)`` (``k`` is 0-based)."""
        if not 0 <= k < num_vars:
            raise IndexError(f"variable index {k} out of range")
        exp = [0] * num_vars
        exp[k] = 1
        return cls(num_vars, order, {tuple(exp): 1})

    def like(self, terms=None, prec=None) -> "Jet":
        return Jet(self.num_vars, self.order, terms,
                   self.prec if prec is None else prec)

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Rational:
        return self.terms.get((0,) * self.num_vars, mpq(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def items(self):
        """Terms in graded-lexicographic order."""
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def truncate(self, prec: int) -> "Jet":
        prec = min(prec, self.prec)
        return Jet._raw(self.num_vars, self.order, prec,
                        {e: c for e, c in self.terms.items() if sum(e) <= prec})

    def agrees(self, other: "Jet", prec: int | None = None) -> bool:
        """Equality modulo degree above ``min(prec, self.prec, other.prec)``."""
        p = min(self.prec, other.prec)
        if prec is not None:
            p = min(p, prec)
        return self.truncate(p).terms == other.truncate(p).terms

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "Jet"):
        if self.num_vars != other.num_vars or self.order != other.order:
            raise DimensionMismatchError(
                f"jets over ({self.num_vars} vars, order {self.order}) and "
                f"({other.num_vars} vars, order {other.order}) cannot be combined")

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            return other
        return Jet._raw(self.num_vars, self.order, self.order,
                        {(0,) * self.num_vars: rational(other)} if other else {})

    def __add__(self, other) -> "Jet":
        other = self._coerce(other)
        p = min(self.prec, other.prec)
        out = {e: c for e, c in self.terms.items() if sum(e) <= p} \
            if p < self.prec else dict(self.terms)
        for e, c in other.terms.items():
            if p < other.prec and sum(e) > p:
                continue
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Jet._raw(self.num_vars, self.order, p, out)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet._raw(self.num_vars, self.order, self.prec,
                        {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Jet":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return self._coerce(other) - self

    def scale(self, factor) -> "Jet":
        factor = rational(factor)
        if not factor:
            return Jet._raw(self.num_vars, self.order, self.prec, {})
        return Jet._raw(self.num_vars, self.order, self.prec,
                        {e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self.scale(other)
        self._check(other)
        p = min(self.prec, other.prec)
        a, b = self.terms, other.terms
        if not a or not b:
            return Jet._raw(self.num_vars, self.order, p, {})
        zero = (0,) * self.num_vars
        if len(b) == 1 and zero in b:
            return self.truncate(p).scale(b[zero])
        if len(a) == 1 and zero in a:
            return other.truncate(p).scale(a[zero])
        bl = sorted(((sum(e), e, c) for e, c in b.items()), key=lambda t: t[0])
        out: dict = {}
        get = out.get
        for ea, ca in a.items():
            da = sum(ea)
            room = p - da
            if room < 0:
                continue
            for db, eb, cb in bl:
                if db > room:
                    break
                e = tuple([x + y for x, y in zip(ea, eb)])
                out[e] = get(e, 0) + ca * cb
        return Jet._raw(self.num_vars, self.order, p,
                        {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Jet":
        if n < 0:
            return jet_invert(self) ** (-n)
        result = Jet.constant(1, self.num_vars, self.order).truncate(self.prec)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Jet):
            return (self.num_vars == other.num_vars and self.order == other.order
                    and self.terms == other.terms)
        try:
            return self.terms == self._coerce(other).terms
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.num_vars, self.order, frozenset(self.terms.items())))

    def diff(self, k: int) -> "Jet":
        return jet_diff(self, k)

    def evaluate_at_origin(self) -> Rational:
        return self.constant_term()

    # -- rendering --------------------------------------------------------
    def render(self, names: Sequence[str] | None = None) -> str:
        """Text form such as ``1 - x1 + 1/2*x1^2``."""
        if names is None:
            names = [f"x{k + 1}" for k in range(self.num_vars)]
        if not self.terms:
            return "0"
        parts = []
        for exp, c in self.items():
            mono = "*".join(
                names[k] if n == 1 else f"{names[k]}^{n}"
                for k, n in enumerate(exp) if n)
            mag = abs(c)
            if mono:
                body = mono if mag == 1 else f"{_fmt_q(mag)}*{mono}"
            else:
                body = _fmt_q(mag)
            parts.append(("-" if c < 0 else "+", body))
        head_sign, head = parts[0]
        text = ("-" if head_sign == "-" else "") + head
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"Jet({self.render()!r}, vars={self.num_vars}, order={self.order}, prec={self.prec})"

    def to_json(self) -> list:
        return [{"exponents": list(e), "value": _fmt_q(c)} for e, c in self.items()]

    @classmethod
    def from_json(cls, data: Iterable, num_vars: int, order: int,
                  prec: int | None = None) -> "Jet":
        return cls(num_vars, order,
                   {tuple(t["exponents"]): mpq(t["value"]) for t in data}, prec)


def _fmt_q(q) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def jet_diff(a: Jet, k: int) -> Jet:
    """Formal partial derivative in the (0-based) coordinate ``k``.

    The declared order is kept; ``prec`` drops by one since the top degree of
    the result would need a term of degree ``prec + 1``.
    """
    if not 0 <= k < a.num_vars:
        raise IndexError(f"coordinate index {k} out of range for {a.num_vars} variables")
    out = {}
    for exp, c in a.terms.items():
        n = exp[k]
        if n:
            e = list(exp)
            e[k] = n - 1
            out[tuple(e)] = c * n
    p = max(a.prec - 1, -1)
    return Jet._raw(a.num_vars, a.order, p,
                    {e: c for e, c in out.items() if sum(e) <= p})


def jet_invert(a: Jet) -> Jet:
    c0 = a.constant_term()
    if not c0:
        raise NonUnitError("jet has zero constant term and is not invertible")
    inv0 = 1 / c0
    # a = c0 (1 + u); 1/a = inv0 * sum (-u)^k
    u = (a.scale(inv0) - 1)
    result = Jet.constant(1, a.num_vars, a.order).truncate(a.prec)
    power = result
    for _ in range(a.prec):
        power = -(power * u)
        if power.is_zero():
            break
        result = result + power
    return result.scale(inv0)


def matmul(A: Sequence[Sequence[Jet]], B: Sequence[Sequence[Jet]]) -> list[list[Jet]]:
    n, m, p = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = A[i][0] * B[0][j]
            for k in range(1, m):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


def jet_matrix_inverse(A: Sequence[Sequence[Jet]]) -> list[list[Jet]]:
    """Inverse of a square matrix of jets by Gauss-Jordan elimination.

    Pivots are chosen among entries with nonzero constant term, which exist
    exactly when the matrix of constant terms is invertible.
    """
    n = len(A)
    if any(len(row) != n for row in A):
        raise DimensionMismatchError("matrix is not square")
    proto = A[0][0]
    one = Jet.constant(1, proto.num_vars, proto.order)
    zero = Jet.zero(proto.num_vars, proto.order)
    M = [list(row) + [one if i == j else zero for j in range(n)]
         for i, row in enumerate(A)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col].constant_term()), None)
        if pivot is None:
            raise DegenerateFormError("constant-term matrix is singular")
        M[col], M[pivot] = M[pivot], M[col]
        inv = jet_invert(M[col][col])
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and not M[r][col].is_zero():
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [row[n:] for row in M]

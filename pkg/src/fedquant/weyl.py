"""Weyl-algebra valued differential forms over the jet ring.

An element is a finite sum of terms

    coefficient(x) * i^p * t^k * e^alpha * dx^{j1} ^ ... ^ dx^{jq}

with ``p`` in {0, 1} (``i^2 = -1`` is folded into the coefficient sign),
``alpha`` an exponent vector of commuting fiber generators and
``j1 < ... < jq``.  The total Weyl degree of a term is ``2k + |alpha|``; terms
above the context's ``max_degree`` are discarded on construction.

The fiberwise product is the Moyal-Vey product

    a o b = exp(-(i t / 2) w^{kl} d/de^k (x) d/de^l) a b

where ``w^{kl}`` is the (jet-valued) Poisson tensor held by the context.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import NamedTuple, Sequence

from gmpy2 import mpq

from .jetring import Jet, grlex_key, jet_diff, rational

__all__ = [
    "TermKey",
    "WeylContext",
    "WeylElement",
    "GradingView",
    "ContextMismatchError",
    "NotDivisibleError",
    "MissingSymplecticDataError",
    "moyal_product",
    "moyal_central",
    "commutator",
    "ad",
    "scale_by_i_over_t",
    "delta",
    "delta_star",
    "delta_inverse",
    "central_part",
    "exterior_d",
    "fiber_derivative",
    "wedge_left",
    "grade",
    "random_element",
    "random_jet",
    "wedge_sign",
]


class ContextMismatchError(ValueError):
    pass


class NotDivisibleError(ValueError):
    pass


class MissingSymplecticDataError(ValueError):
    pass


class TermKey(NamedTuple):
    t_power: int
    i_power: int
    e_exponents: tuple
    form_indices: tuple

    @property
    def degree(self) -> int:
        return 2 * self.t_power + sum(self.e_exponents)

    @property
    def e_degree(self) -> int:
        return sum(self.e_exponents)

    @property
    def form_degree(self) -> int:
        return len(self.form_indices)


def canonical_key(key: TermKey):
    e = key.e_exponents
    return (key.degree, key.t_power, grlex_key(e), key.form_indices, key.i_power)


@lru_cache(maxsize=None)
def wedge_sign(fa: tuple, fb: tuple):
    """Sign and sorted indices of ``dx^fa ^ dx^fb``; ``(0, None)`` on overlap."""
    if not fa or not fb:
        return 1, fa + fb
    if set(fa) & set(fb):
        return 0, None
    inversions = sum(1 for x in fa for y in fb if x > y)
    return (-1 if inversions & 1 else 1), tuple(sorted(fa + fb))


def _i_normalize(power: int):
    """``i^power`` as ``(sign, flag)`` with ``flag`` in {0, 1}."""
    power %= 4
    return (-1 if power >= 2 else 1), power & 1


@dataclass(eq=False, frozen=True)
class WeylContext:
    """Shared descriptor for a family of Weyl elements.

    ``poisson`` is the matrix ``w^{kl}`` (inverse of ``omega``); both are
    optional but the Moyal product needs ``poisson``.
    """

    dim: int
    jet_order: int
    max_degree: int
    poisson: Sequence[Sequence[Jet]] | None = None
    omega: Sequence[Sequence[Jet]] | None = None
    _pairs: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        if self.poisson is not None:
            pairs = tuple((k, l) for k in range(self.dim) for l in range(self.dim)
                          if not self.poisson[k][l].is_zero())
            object.__setattr__(self, "_pairs", pairs)

    def __eq__(self, other):
        if not isinstance(other, WeylContext):
            return NotImplemented
        return (self.dim == other.dim and self.jet_order == other.jet_order
                and self.max_degree == other.max_degree
                and self.poisson is other.poisson and self.omega is other.omega)

    def __hash__(self):
        return hash((self.dim, self.jet_order, self.max_degree, id(self.poisson)))

    def with_max_degree(self, n: int) -> "WeylContext":
        return WeylContext(self.dim, self.jet_order, n, self.poisson, self.omega)

    @property
    def poisson_prec(self) -> int:
        if self.poisson is None:
            return self.jet_order
        return min(x.prec for row in self.poisson for x in row)

    @property
    def constant_poisson(self) -> bool:
        return self.poisson is not None and all(
            x.is_constant() for row in self.poisson for x in row)

    def jet(self, value=0) -> Jet:
        if isinstance(value, Jet):
            return value
        return Jet.constant(value, self.dim, self.jet_order)


class WeylElement:
    """A Weyl-algebra valued form; see the module docstring.

    Elements are treated as immutable.  ``prec`` is the jet precision shared
    by every coefficient (see :mod:`fedquant.jetring`).
    """

    __slots__ = ("ctx", "terms", "prec")

    def __init__(self, ctx: WeylContext, terms: dict | None = None,
                 prec: int | None = None):
        self.ctx = ctx
        self.prec = ctx.jet_order if prec is None else min(prec, ctx.jet_order)
        clean = {}
        if terms:
            for key, c in terms.items():
                if not isinstance(key, TermKey):
                    key = TermKey(*key)
                if key.degree > ctx.max_degree:
                    continue
                c = ctx.jet(c) if not isinstance(c, Jet) else c
                if c.prec > self.prec:
                    c = c.truncate(self.prec)
                if c.terms:
                    clean[key] = c
        self.terms = clean

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, ctx: WeylContext, prec: int | None = None) -> "WeylElement":
        return cls(ctx, None, prec)

    @classmethod
    def monomial(cls, ctx: WeylContext, coefficient=1, t_power: int = 0,
                 i_power: int = 0, e_exponents: Sequence[int] | None = None,
                 form_indices: Sequence[int] = ()) -> "WeylElement":
        if e_exponents is None:
            e_exponents = (0,) * ctx.dim
        sign, flag = _i_normalize(i_power)
        forms = tuple(form_indices)
        sorted_forms = tuple(sorted(forms))
        if len(set(forms)) != len(forms):
            return cls.zero(ctx)
        perm_sign = _perm_sign(forms)
        c = ctx.jet(coefficient) * (sign * perm_sign)
        key = TermKey(t_power, flag, tuple(e_exponents), sorted_forms)
        return cls(ctx, {key: c}, c.prec)

    @classmethod
    def scalar(cls, ctx: WeylContext, coefficient=1) -> "WeylElement":
        return cls.monomial(ctx, coefficient)

    @classmethod
    def generator(cls, ctx: WeylContext, k: int, coefficient=1) -> "WeylElement":
        """``e^(k+1)`` (0-based ``k``)."""
        e = [0] * ctx.dim
        e[k] = 1
        return cls.monomial(ctx, coefficient, e_exponents=e)

    @classmethod
    def dx(cls, ctx: WeylContext, l: int, coefficient=1) -> "WeylElement":
        return cls.monomial(ctx, coefficient, form_indices=(l,))

    @classmethod
    def t(cls, ctx: WeylContext, power: int = 1) -> "WeylElement":
        return cls.monomial(ctx, 1, t_power=power)

    def _new(self, terms, prec=None) -> "WeylElement":
        return WeylElement(self.ctx, terms, self.prec if prec is None else prec)

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def items(self):
        return sorted(self.terms.items(), key=lambda kv: canonical_key(kv[0]))

    def degrees(self) -> set:
        return {k.degree for k in self.terms}

    def form_degrees(self) -> set:
        return {k.form_degree for k in self.terms}

    def homogeneous(self, degree: int) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items() if k.degree == degree})

    def up_to_degree(self, degree: int) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items() if k.degree <= degree})

    def form_part(self, q: int) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items() if k.form_degree == q})

    def truncate(self, prec: int) -> "WeylElement":
        return self._new(self.terms, min(prec, self.prec))

    def agrees(self, other: "WeylElement", prec: int | None = None) -> bool:
        """Exact equality modulo jet degrees above the common precision."""
        p = min(self.prec, other.prec)
        if prec is not None:
            p = min(p, prec)
        return (self - other).truncate(p).is_zero()

    def with_context(self, ctx: WeylContext) -> "WeylElement":
        return WeylElement(ctx, self.terms, self.prec)

    # -- linear structure -------------------------------------------------
    def _check(self, other: "WeylElement"):
        if self.ctx is not other.ctx and self.ctx != other.ctx:
            raise ContextMismatchError("Weyl elements live in different contexts")

    def __add__(self, other) -> "WeylElement":
        if not isinstance(other, WeylElement):
            if other == 0:
                return self
            other = WeylElement.scalar(self.ctx, other)
        self._check(other)
        p = min(self.prec, other.prec)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k)
            out[k] = c if s is None else s + c
        return WeylElement(self.ctx, out, p)

    __radd__ = __add__

    def __neg__(self) -> "WeylElement":
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "WeylElement":
        return self + (-other)

    def __rsub__(self, other) -> "WeylElement":
        return (-self) + other

    def scale(self, factor) -> "WeylElement":
        if isinstance(factor, Jet):
            return self._new({k: c * factor for k, c in self.terms.items()},
                             min(self.prec, factor.prec))
        factor = rational(factor)
        return self._new({k: c.scale(factor) for k, c in self.terms.items()})

    def times_i(self, power: int = 1) -> "WeylElement":
        out = {}
        for k, c in self.terms.items():
            sign, flag = _i_normalize(k.i_power + power)
            out[k._replace(i_power=flag)] = c if sign > 0 else -c
        return self._new(out)

    def __mul__(self, other):
        if isinstance(other, WeylElement):
            return moyal_product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        if isinstance(other, WeylElement):
            return self.ctx == other.ctx and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    __hash__ = None

    # -- rendering --------------------------------------------------------
    def render(self, names: Sequence[str] | None = None) -> str:
        """Canonical text; ``names`` label the coefficient variables."""
        if not self.terms:
            return "0"
        parts = []
        for key, c in self.items():
            coef = c.render(names)
            if len(c.terms) > 1 or coef.startswith("-") or "/" in coef:
                coef = f"({coef})"
            factors = [] if coef == "1" and _has_factors(key) else [coef]
            if key.i_power:
                factors.append("i")
            if key.t_power:
                factors.append("t" if key.t_power == 1 else f"t^{key.t_power}")
            for k, n in enumerate(key.e_exponents):
                if n:
                    factors.append(f"e{k + 1}" if n == 1 else f"e{k + 1}^{n}")
            if key.form_indices:
                factors.append("^".join(f"dx{j + 1}" for j in key.form_indices))
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"WeylElement({self.render()!r})"

    def to_json(self) -> dict:
        return {
            "dim": self.ctx.dim,
            "jet_order": self.ctx.jet_order,
            "max_degree": self.ctx.max_degree,
            "prec": self.prec,
            "terms": [
                {
                    "t_power": k.t_power,
                    "i_power": k.i_power,
                    "e_exponents": list(k.e_exponents),
                    "form_indices": [j + 1 for j in k.form_indices],
                    "coefficient": c.to_json(),
                }
                for k, c in self.items()
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict, ctx: WeylContext | None = None) -> "WeylElement":
        if ctx is None:
            ctx = WeylContext(data["dim"], data["jet_order"], data["max_degree"])
        prec = data.get("prec", ctx.jet_order)
        terms = {}
        for t in data["terms"]:
            key = TermKey(t["t_power"], t["i_power"], tuple(t["e_exponents"]),
                          tuple(j - 1 for j in t["form_indices"]))
            terms[key] = Jet.from_json(t["coefficient"], ctx.dim, ctx.jet_order, prec)
        return cls(ctx, terms, prec)


def _has_factors(key: TermKey) -> bool:
    return bool(key.i_power or key.t_power or any(key.e_exponents) or key.form_indices)


def _perm_sign(seq: Sequence[int]) -> int:
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv & 1 else 1


@dataclass
class GradingView:
    by_degree: dict
    by_form_degree: dict

    def total(self, ctx: WeylContext) -> WeylElement:
        acc = WeylElement.zero(ctx)
        for part in self.by_degree.values():
            acc = acc + part
        return acc


# ---------------------------------------------------------------------------
# Moyal product
# ---------------------------------------------------------------------------

@lru_cache(maxsize=200_000)
def _contractions(alpha: tuple, beta: tuple, pairs: tuple, odd_only: bool,
                  full_only: bool):
    """Contraction patterns of ``e^alpha`` against ``e^beta``.

    Returns tuples ``(factor, m, mu, new_e)`` where ``mu`` counts how often each
    ordered pair ``(k, l)`` in ``pairs`` is contracted, ``m = |mu|`` and
    ``factor = (-1/2)^m / mu! * alpha!/(alpha-kappa)! * beta!/(beta-lambda)!``.
    """
    dim = len(alpha)
    out = []
    npairs = len(pairs)
    ra, rb = list(alpha), list(beta)
    mu = [0] * npairs

    def rec(p):
        if p == npairs:
            m = sum(mu)
            if odd_only and not m & 1:
                return
            if full_only and (any(ra) or any(rb)):
                return
            f = mpq(1)
            for c in mu:
                if c > 1:
                    f /= factorial(c)
            for k in range(dim):
                if ra[k] != alpha[k]:
                    f *= factorial(alpha[k]) // factorial(ra[k])
                if rb[k] != beta[k]:
                    f *= factorial(beta[k]) // factorial(rb[k])
            f *= mpq(-1, 2) ** m
            new_e = tuple(x + y for x, y in zip(ra, rb))
            out.append((f, m, tuple(mu), new_e))
            return
        k, l = pairs[p]
        cap = min(ra[k], rb[l])
        for c in range(cap + 1):
            mu[p] = c
            ra[k] -= c
            rb[l] -= c
            rec(p + 1)
            ra[k] += c
            rb[l] += c
        mu[p] = 0

    rec(0)
    return tuple(out)


def _poisson_monomial(ctx: WeylContext, mu: tuple, cache: dict) -> Jet | None:
    """``prod (w^{kl})^mu_kl``; ``None`` stands for the constant 1."""
    if not any(mu):
        return None
    hit = cache.get(mu)
    if hit is not None:
        return hit
    acc = None
    for (k, l), c in zip(ctx._pairs, mu):
        for _ in range(c):
            w = ctx.poisson[k][l]
            acc = w if acc is None else acc * w
    cache[mu] = acc
    return acc


def _moyal(a: WeylElement, b: WeylElement, odd_only=False, full_only=False,
           weight=1, extra_degree=0) -> WeylElement:
    a._check(b)
    ctx = a.ctx
    if ctx.poisson is None:
        raise MissingSymplecticDataError("Moyal product needs the Poisson tensor")
    prec = min(a.prec, b.prec, ctx.poisson_prec)
    N = ctx.max_degree + extra_degree
    pairs = ctx._pairs
    wcache: dict = {}
    out: dict = {}
    bl = [(kb, cb, kb.degree) for kb, cb in b.terms.items()]
    for ka, ca in a.terms.items():
        da = ka.degree
        if full_only and ka.form_indices:
            continue
        for kb, cb, db in bl:
            if da + db > N:
                continue
            if full_only:
                if kb.form_indices or ka.e_degree != kb.e_degree:
                    continue
            sign_w, forms = wedge_sign(ka.form_indices, kb.form_indices)
            if not sign_w:
                continue
            patterns = _contractions(ka.e_exponents, kb.e_exponents, pairs,
                                     odd_only, full_only)
            if not patterns:
                continue
            cab = ca * cb
            if cab.is_zero():
                continue
            t0 = ka.t_power + kb.t_power
            i0 = ka.i_power + kb.i_power
            for f, m, mu, new_e in patterns:
                wj = _poisson_monomial(ctx, mu, wcache)
                coeff = cab if wj is None else cab * wj
                s, flag = _i_normalize(i0 + m)
                coeff = coeff.scale(f * (s * sign_w * weight))
                key = TermKey(t0 + m, flag, new_e, forms)
                prev = out.get(key)
                out[key] = coeff if prev is None else prev + coeff
    if extra_degree:
        return WeylElement(ctx.with_max_degree(N), out, prec)
    return WeylElement(ctx, out, prec)


def moyal_product(a: WeylElement, b: WeylElement) -> WeylElement:
    """Fiberwise Moyal-Vey product, with forms multiplied by wedge."""
    return _moyal(a, b)


def moyal_central(a: WeylElement, b: WeylElement) -> WeylElement:
    """The part of ``a o b`` free of fiber generators and forms.

    Only fully contracted term pairs contribute, which makes fiber evaluation of
    a product far cheaper than forming the whole product.
    """
    return _moyal(a, b, full_only=True)


def commutator(a: WeylElement, b: WeylElement) -> WeylElement:
    """Graded commutator ``a o b - (-1)^{pq} b o a``.

    Swapping the arguments of the m-th Moyal term costs ``(-1)^m``, so the
    bracket is twice the odd part of ``a o b``.
    """
    return _moyal(a, b, odd_only=True, weight=2)


def scale_by_i_over_t(a: WeylElement) -> WeylElement:
    out = {}
    for k, c in a.terms.items():
        if k.t_power == 0:
            raise NotDivisibleError(f"term {k} carries no factor of t")
        sign, flag = _i_normalize(k.i_power + 1)
        out[k._replace(t_power=k.t_power - 1, i_power=flag)] = c if sign > 0 else -c
    return a._new(out)


def ad(v: WeylElement, a: WeylElement) -> WeylElement:
    """``(i/t) [v, a]``.

    The bracket is formed two degrees above the truncation order so that
    dividing by ``t`` does not lose the top degree.
    """
    br = _moyal(v, a, odd_only=True, weight=2, extra_degree=2)
    return scale_by_i_over_t(br).with_context(v.ctx)


# ---------------------------------------------------------------------------
# Koszul operators
# ---------------------------------------------------------------------------

def _accumulate(out: dict, key: TermKey, coeff: Jet):
    prev = out.get(key)
    out[key] = coeff if prev is None else prev + coeff


def delta(a: WeylElement) -> WeylElement:
    """``dx^l ^ d/de^l``: lowers the Weyl degree by one."""
    out: dict = {}
    for k, c in a.terms.items():
        for l, n in enumerate(k.e_exponents):
            if not n:
                continue
            s, forms = wedge_sign((l,), k.form_indices)
            if not s:
                continue
            e = list(k.e_exponents)
            e[l] -= 1
            _accumulate(out, k._replace(e_exponents=tuple(e), form_indices=forms),
                        c.scale(n * s))
    return a._new(out)


def delta_star(a: WeylElement) -> WeylElement:
    """``e^l i(d/dx^l)``, contracting form slots with alternating signs."""
    out: dict = {}
    for k, c in a.terms.items():
        f = k.form_indices
        for pos, j in enumerate(f):
            e = list(k.e_exponents)
            e[j] += 1
            key = k._replace(e_exponents=tuple(e), form_indices=f[:pos] + f[pos + 1:])
            _accumulate(out, key, -c if pos & 1 else c)
    return a._new(out)


def delta_inverse(a: WeylElement) -> WeylElement:
    """Normalized homotopy: ``delta_star / (m + n)`` on bidegree ``(m, n)``."""
    out: dict = {}
    for k, c in a.terms.items():
        f = k.form_indices
        if not f:
            continue
        w = mpq(1, k.e_degree + len(f))
        for pos, j in enumerate(f):
            e = list(k.e_exponents)
            e[j] += 1
            key = k._replace(e_exponents=tuple(e), form_indices=f[:pos] + f[pos + 1:])
            _accumulate(out, key, c.scale(-w if pos & 1 else w))
    return a._new(out)


def central_part(a: WeylElement) -> WeylElement:
    """Terms without fiber generators and without forms."""
    return a._new({k: c for k, c in a.terms.items()
                   if not k.form_indices and not any(k.e_exponents)})


def exterior_d(a: WeylElement) -> WeylElement:
    out: dict = {}
    for k, c in a.terms.items():
        for l in range(a.ctx.dim):
            s, forms = wedge_sign((l,), k.form_indices)
            if not s:
                continue
            dc = jet_diff(c, l)
            if dc.is_zero():
                continue
            _accumulate(out, k._replace(form_indices=forms), dc if s > 0 else -dc)
    return a._new(out, a.prec - 1)


def fiber_derivative(a: WeylElement, k: int) -> WeylElement:
    """``d/de^k`` (no form attached)."""
    out: dict = {}
    for key, c in a.terms.items():
        n = key.e_exponents[k]
        if n:
            e = list(key.e_exponents)
            e[k] -= 1
            _accumulate(out, key._replace(e_exponents=tuple(e)), c.scale(n))
    return a._new(out)


def wedge_left(l: int, a: WeylElement) -> WeylElement:
    """``dx^l ^ a``."""
    out: dict = {}
    for k, c in a.terms.items():
        s, forms = wedge_sign((l,), k.form_indices)
        if s:
            _accumulate(out, k._replace(form_indices=forms), c if s > 0 else -c)
    return a._new(out)


def grade(a: WeylElement) -> GradingView:
    by_deg: dict = {}
    by_form: dict = {}
    for k, c in a.terms.items():
        by_deg.setdefault(k.degree, {})[k] = c
        by_form.setdefault(k.form_degree, {})[k] = c
    return GradingView(
        {g: a._new(t) for g, t in sorted(by_deg.items())},
        {q: a._new(t) for q, t in sorted(by_form.items())},
    )


def random_element(ctx: WeylContext, rng, n_terms: int = 4, max_form: int | None = None,
                   coeff_degree: int = 2, max_e: int | None = None,
                   max_coeff: int = 3) -> WeylElement:
    """Random element for property tests (``rng`` is a ``random.Random``)."""
    if max_form is None:
        max_form = ctx.dim
    acc = WeylElement.zero(ctx)
    for _ in range(n_terms):
        deg_budget = ctx.max_degree if max_e is None else max_e
        tp = rng.randint(0, deg_budget // 2)
        room = deg_budget - 2 * tp
        e = [0] * ctx.dim
        for _ in range(rng.randint(0, max(room, 0))):
            e[rng.randrange(ctx.dim)] += 1
        q = rng.randint(0, min(max_form, ctx.dim))
        forms = tuple(sorted(rng.sample(range(ctx.dim), q)))
        coeff = random_jet(ctx.dim, ctx.jet_order, rng, coeff_degree, max_coeff)
        acc = acc + WeylElement.monomial(ctx, coeff, tp, rng.randint(0, 1), e, forms)
    return acc


def random_jet(num_vars: int, order: int, rng, degree: int = 2,
               max_coeff: int = 3, n_terms: int = 3) -> Jet:
    terms = {}
    for _ in range(n_terms):
        exp = [0] * num_vars
        for _ in range(rng.randint(0, min(degree, order))):
            exp[rng.randrange(num_vars)] += 1
        num = rng.randint(-max_coeff, max_coeff)
        den = rng.randint(1, 3)
        terms[tuple(exp)] = terms.get(tuple(exp), 0) + mpq(num, den)
    return Jet(num_vars, order, terms)

"""Fedosov connection, flat sections and the star product.

The connection is ``D = -delta + nabla + (i/t)[rho, .]`` with ``rho`` a Weyl
valued 1-form of Weyl degree >= 3, normalized by ``delta_star(rho) = 0`` and
determined degree by degree from

    rho = delta_inverse(R + nabla rho + (i/t) rho o rho)

where ``R`` is the Weyl curvature of the symplectic connection.  A function
series ``a`` is lifted to the unique flat section ``A`` with central part ``a``
and ``delta_star(A - a) = 0``; the star product is fiber evaluation of
``Q(a) o Q(b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct
from math import factorial
from typing import Sequence

from gmpy2 import mpq

from .geometry import (Connection, SymplecticStructure, lift_nabla,
                       omega_element, weyl_curvature)
from .jetring import Jet, jet_diff
from .weyl import (TermKey, WeylContext, WeylElement, ad, central_part,
                   delta, delta_inverse, moyal_central)

__all__ = [
    "FedosovConnection",
    "CoefficientSeries",
    "FlatSection",
    "CurvatureReport",
    "CocycleError",
    "InsufficientJetOrderError",
    "UnsupportedError",
    "METHODS",
    "build_fedosov",
    "iterate_rho",
    "apply_D",
    "check_flatness",
    "quantize",
    "evaluate",
    "star_product",
    "moyal_reference",
    "omega_form",
]


class CocycleError(RuntimeError):
    def __init__(self, degree: int):
        self.degree = degree
        super().__init__(f"level source in degree {degree} is not delta-closed")


class InsufficientJetOrderError(ValueError):
    pass


class UnsupportedError(ValueError):
    pass


# ---------------------------------------------------------------------------
# coefficient series
# ---------------------------------------------------------------------------

@dataclass
class CoefficientSeries:
    """``sum_k t^k (real[k] + i imag[k])``; inputs are usually real."""

    real: tuple
    imag: tuple

    def __post_init__(self):
        self.real = tuple(self.real)
        self.imag = tuple(self.imag)
        if len(self.real) != len(self.imag):
            raise ValueError("real and imaginary parts differ in length")

    @classmethod
    def from_jets(cls, jets: Sequence[Jet], imag: Sequence[Jet] | None = None):
        jets = list(jets)
        if imag is None:
            imag = [Jet.zero(j.num_vars, j.order, j.prec) for j in jets]
        return cls(tuple(jets), tuple(imag))

    @property
    def order(self) -> int:
        return len(self.real) - 1

    @property
    def num_vars(self) -> int:
        return self.real[0].num_vars

    @property
    def jet_order(self) -> int:
        return self.real[0].order

    @property
    def prec(self) -> int:
        return min(j.prec for j in self.real + self.imag)

    def coefficient(self, k: int) -> tuple:
        return self.real[k], self.imag[k]

    def truncated(self, K: int) -> "CoefficientSeries":
        return CoefficientSeries(self.real[:K + 1], self.imag[:K + 1])

    def _zip(self, other, op):
        n = max(len(self.real), len(other.real))
        zero = Jet.zero(self.num_vars, self.jet_order)

        def get(seq, k):
            return seq[k] if k < len(seq) else zero
        return CoefficientSeries(
            tuple(op(get(self.real, k), get(other.real, k)) for k in range(n)),
            tuple(op(get(self.imag, k), get(other.imag, k)) for k in range(n)))

    def __add__(self, other):
        return self._zip(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._zip(other, lambda x, y: x - y)

    def scale(self, factor):
        return CoefficientSeries(tuple(j.scale(factor) for j in self.real),
                                 tuple(j.scale(factor) for j in self.imag))

    def times_i_over_t(self) -> "CoefficientSeries":
        """``(i/t) * self``; the ``t^0`` coefficient must vanish."""
        if not (self.real[0].is_zero() and self.imag[0].is_zero()):
            raise ValueError("series has a nonzero t^0 coefficient")
        return CoefficientSeries(tuple(-j for j in self.imag[1:]), self.real[1:])

    def truncate_prec(self, prec: int) -> "CoefficientSeries":
        return CoefficientSeries(tuple(j.truncate(prec) for j in self.real),
                                 tuple(j.truncate(prec) for j in self.imag))

    def agrees(self, other: "CoefficientSeries", prec: int | None = None) -> bool:
        """Coefficientwise equality modulo each pair's common precision."""
        if len(self.real) != len(other.real):
            return False
        pairs = list(zip(self.real, other.real)) + list(zip(self.imag, other.imag))
        return all(x.agrees(y, prec) for x, y in pairs)

    def __eq__(self, other):
        if not isinstance(other, CoefficientSeries):
            return NotImplemented
        return self.real == other.real and self.imag == other.imag

    def render(self, names: Sequence[str] | None = None) -> list[str]:
        lines = []
        for k, (re, im) in enumerate(zip(self.real, self.imag)):
            if im.is_zero():
                text = re.render(names)
            elif re.is_zero():
                text = f"i*({im.render(names)})"
            else:
                text = f"{re.render(names)} + i*({im.render(names)})"
            lines.append(f"c{k} = {text}")
        return lines

    def to_json(self) -> list:
        return [{"k": k, "prec": min(re.prec, im.prec), "real": re.to_json(),
                 "imag": im.to_json()}
                for k, (re, im) in enumerate(zip(self.real, self.imag))]


def _embed(a: CoefficientSeries, ctx: WeylContext) -> list:
    """Central pieces ``t^k a_k`` indexed by Weyl degree ``2k``."""
    zero_e = (0,) * ctx.dim
    out = {}
    for k, (re, im) in enumerate(zip(a.real, a.imag)):
        terms = {}
        if not re.is_zero():
            terms[TermKey(k, 0, zero_e, ())] = re
        if not im.is_zero():
            terms[TermKey(k, 1, zero_e, ())] = im
        out[2 * k] = WeylElement(ctx, terms, min(re.prec, im.prec))
    return out


# ---------------------------------------------------------------------------
# Fedosov connection
# ---------------------------------------------------------------------------

@dataclass
class FedosovConnection:
    connection: Connection
    structure: SymplecticStructure
    order: int
    ctx: WeylContext
    curvature: WeylElement
    components: dict
    sources: dict = field(default_factory=dict)

    @property
    def rho(self) -> WeylElement:
        acc = WeylElement.zero(self.ctx)
        for g in sorted(self.components):
            acc = acc + self.components[g]
        return acc

    def component(self, g: int, ctx: WeylContext | None = None) -> WeylElement:
        c = self.components.get(g)
        if c is None:
            c = WeylElement.zero(self.ctx)
        return c if ctx is None else c.with_context(ctx)

    def without_component(self, g: int) -> "FedosovConnection":
        comps = {h: c for h, c in self.components.items() if h != g}
        return FedosovConnection(self.connection, self.structure, self.order,
                                 self.ctx, self.curvature, comps, self.sources)


def _half_square(parts: dict, s: int) -> WeylElement | None:
    """``(i/t) sum_{h+h'=s} rho_h o rho_h'`` for odd forms, via brackets."""
    acc = None
    for h in sorted(parts):
        h2 = s - h
        if h2 < h or h2 not in parts:
            continue
        br = ad(parts[h], parts[h2])
        if h2 == h:
            br = br.scale(mpq(1, 2))
        acc = br if acc is None else acc + br
    return acc


METHODS = ("fixed-point", "levels")


def _check_method(method: str):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _level_sources(C: Connection, R: WeylElement, comps: dict, N: int) -> dict:
    """``R + nabla rho + (i/t) rho o rho`` split by Weyl degree ``2..N-1``."""
    sources = {}
    for g in range(2, N):
        src = R if g == 2 else lift_nabla(C, comps[g], check=False)
        quad = _half_square(comps, g + 2)
        if quad is not None:
            src = src + quad
        sources[g] = src
    return sources


def build_fedosov(C: Connection, N: int, S: SymplecticStructure | None = None,
                  check_cocycle: bool = True, method: str = "levels") -> FedosovConnection:
    """Flat connection with ``rho`` known through Weyl degree ``N``.

    ``method="levels"`` solves one Weyl degree at a time and keeps a separate
    jet precision per degree; ``method="fixed-point"`` iterates the
    whole-element equation (see :func:`iterate_rho`), whose single element
    precision is that of the worst degree.  The values agree wherever both are
    known.  With ``check_cocycle`` every level
    source is verified to be ``delta``-closed, the solvability condition of
    the recursion.
    """
    _check_method(method)
    S = S or C.structure
    C.require_symplectic()
    if N < 3:
        raise ValueError("truncation order must be at least 3")
    ctx = S.context(N)
    R = weyl_curvature(C, ctx).element
    if method == "fixed-point":
        rho = _fixed_point(C, R, ctx, WeylElement.zero(ctx), N - 2)
        comps = {g: rho.homogeneous(g) for g in range(3, N + 1)}
        sources = _level_sources(C, R, comps, N)
    else:
        comps = {}
        sources = {}
        for g in range(2, N):
            src = R if g == 2 else lift_nabla(C, comps[g], check=False)
            quad = _half_square(comps, g + 2)
            if quad is not None:
                src = src + quad
            sources[g] = src
            comps[g + 1] = delta_inverse(src)
    if check_cocycle:
        for g, src in sources.items():
            if not delta(src).is_zero():
                raise CocycleError(g)
    return FedosovConnection(C, S, N, ctx, R, comps, sources)


def _fixed_point(C: Connection, R: WeylElement, ctx: WeylContext, rho: WeylElement,
                 sweeps: int) -> WeylElement:
    for _ in range(sweeps):
        rhs = R + lift_nabla(C, rho, check=False)
        if not rho.is_zero():
            rhs = rhs + ad(rho, rho).scale(mpq(1, 2))
        rho = delta_inverse(rhs)
    return rho


def iterate_rho(C: Connection, N: int, initial: WeylElement | None = None,
                iterations: int | None = None) -> WeylElement:
    """Whole-element fixed point ``rho <- delta^-1(R + nabla rho + (i/t) rho o rho)``.

    Each sweep settles one more Weyl degree, so ``N - 2`` sweeps reach the
    fixed point from any start whose components have degree >= 3.
    """
    ctx = C.structure.context(N)
    R = weyl_curvature(C, ctx).element
    rho = WeylElement.zero(ctx) if initial is None else initial.with_context(ctx)
    return _fixed_point(C, R, ctx, rho, N - 2 if iterations is None else iterations)


def apply_D(F: FedosovConnection, a: WeylElement) -> WeylElement:
    """``D a = -delta a + nabla a + (i/t)[rho, a]``."""
    ctx = a.ctx
    out = lift_nabla(F.connection, a, check=False) - delta(a)
    for g in sorted(F.components):
        rho = F.components[g]
        if rho.is_zero():
            continue
        out = out + ad(rho.with_context(ctx), a)
    return out


def omega_form(S: SymplecticStructure, ctx: WeylContext) -> WeylElement:
    """The central 2-form ``sum_{k<l} w_{kl} dx^k ^ dx^l``."""
    acc = WeylElement.zero(ctx)
    for k in range(S.dim):
        for l in range(k + 1, S.dim):
            if not S.omega_lower[k][l].is_zero():
                acc = acc + WeylElement.monomial(ctx, S.omega_lower[k][l],
                                                 form_indices=(k, l))
    return acc


@dataclass
class CurvatureReport:
    omega_central: WeylElement
    noncentral_residual: WeylElement
    residuals: dict
    operator_residuals: dict
    omega_matches: bool

    @property
    def flat(self) -> bool:
        return (self.noncentral_residual.is_zero()
                and all(r.is_zero() for r in self.operator_residuals.values()))

    @property
    def first_bad_degree(self) -> int | None:
        bad = [g for g, r in self.residuals.items() if not r.is_zero()]
        return min(bad) if bad else None


def _spanning_monomials(ctx: WeylContext, max_e: int = 2) -> dict:
    gens = {"1": WeylElement.scalar(ctx)}
    for j in range(ctx.dim):
        x = Jet.variable(j, ctx.dim, ctx.jet_order)
        gens[f"x{j + 1}"] = WeylElement.scalar(ctx, x)
        gens[f"e{j + 1}"] = WeylElement.generator(ctx, j)
    if max_e >= 2:
        for j in range(ctx.dim):
            for k in range(j, ctx.dim):
                e = [0] * ctx.dim
                e[j] += 1
                e[k] += 1
                gens[f"e{j + 1}*e{k + 1}"] = WeylElement.monomial(ctx, 1, e_exponents=e)
    return gens


def check_flatness(F: FedosovConnection) -> CurvatureReport:
    """Weyl curvature of ``D`` and ``D^2`` on a spanning set of monomials.

    ``Omega = (i/t) g0 o g0 + nabla g0 + R + nabla rho - delta rho + (i/t) rho o rho``
    with ``g0 = w_{kl} e^k dx^l``.  Flatness means ``Omega`` is central; the
    central part is ``-omega`` for the normalized recursion.
    """
    ctx, N, C, S = F.ctx, F.order, F.connection, F.structure
    g0 = omega_element(S, ctx)
    rho = F.rho
    omega_curv = ad(g0, g0).scale(mpq(1, 2))
    Om = omega_curv + lift_nabla(C, g0, check=False) + F.curvature
    if not rho.is_zero():
        Om = Om + lift_nabla(C, rho, check=False) - delta(rho)
        Om = Om + ad(rho, rho).scale(mpq(1, 2))
    Om = Om.up_to_degree(N - 1)
    central = Om._new({k: c for k, c in Om.terms.items() if not any(k.e_exponents)})
    residual = Om - central
    residuals = {g: residual.homogeneous(g) for g in range(N)}
    omega_central = -central
    matches = omega_central.agrees(omega_form(S, ctx))
    op_res = {}
    for name, a in _spanning_monomials(ctx).items():
        d = max(a.degrees(), default=0)
        dd = apply_D(F, apply_D(F, a)).up_to_degree(d + N - 3)
        op_res[name] = dd
    return CurvatureReport(omega_central, residual, residuals, op_res, matches)


# ---------------------------------------------------------------------------
# flat sections and the star product
# ---------------------------------------------------------------------------

@dataclass
class FlatSection:
    element: WeylElement
    components: dict
    source: CoefficientSeries
    order: int


def quantize(F: FedosovConnection, a: CoefficientSeries,
             order: int | None = None, method: str = "levels") -> FlatSection:
    """Flat section with central part ``a`` and ``delta_star(A - a) = 0``.

    Degree ``g`` of ``D A = 0`` reads
    ``delta A_g = nabla A_{g-1} + sum_h (i/t)[rho_h, A_{g+1-h}]``,
    solved by ``A_g = delta^-1(...) + t^{g/2} a_{g/2}``.  The
    ``"fixed-point"`` method instead iterates
    ``A <- a + delta^-1(nabla A + (i/t)[rho, A])`` on the whole element; the
    result is identical, the level solver is just cheaper.
    """
    _check_method(method)
    N = F.order if order is None else order
    if N > F.order:
        raise ValueError(f"Fedosov connection only built to degree {F.order}")
    if a.prec < N:
        raise InsufficientJetOrderError(
            f"coefficients known to jet degree {a.prec}, need at least {N}")
    ctx = F.structure.context(N)
    C = F.connection
    central = _embed(a, ctx)
    rhos = {g: F.component(g, ctx) for g in F.components if g <= N}
    if method == "fixed-point":
        base = WeylElement.zero(ctx)
        for piece in central.values():
            base = base + piece
        total = base
        for _ in range(N):
            src = lift_nabla(C, total, check=False)
            for rho in rhos.values():
                if not rho.is_zero():
                    src = src + ad(rho, total)
            total = base + delta_inverse(src)
        A = {g: total.homogeneous(g) for g in range(N + 1)}
        return FlatSection(total, A, a, N)
    A = {0: central.get(0, WeylElement.zero(ctx))}
    for g in range(1, N + 1):
        src = lift_nabla(C, A[g - 1], check=False)
        for h, rho in rhos.items():
            j = g + 1 - h
            if j < 1 or rho.is_zero() or A[j].is_zero():
                continue
            src = src + ad(rho, A[j])
        comp = delta_inverse(src)
        if g in central:
            comp = comp + central[g]
        A[g] = comp
    total = WeylElement.zero(ctx)
    for g in range(N + 1):
        total = total + A[g]
    return FlatSection(total, A, a, N)


def evaluate(A, K: int | None = None) -> CoefficientSeries:
    """Fiber evaluation at ``e = 0``: the central terms grouped by ``t`` power.

    The ``t^k`` coefficient of a :class:`FlatSection` is read from its Weyl
    degree ``2k`` component and keeps that component's precision.
    """
    elem = A.element if isinstance(A, FlatSection) else A
    ctx = elem.ctx
    if K is None:
        K = ctx.max_degree // 2
    out_re, out_im = [], []
    for k in range(K + 1):
        if isinstance(A, FlatSection):
            piece = A.components.get(2 * k, WeylElement.zero(ctx))
        else:
            piece = elem.homogeneous(2 * k)
        re = im = Jet.zero(ctx.dim, ctx.jet_order, piece.prec)
        for key, c in central_part(piece).terms.items():
            if key.i_power:
                im = im + c
            else:
                re = re + c
        out_re.append(re)
        out_im.append(im)
    return CoefficientSeries(tuple(out_re), tuple(out_im))


def _central_product(A: FlatSection, B: FlatSection, K: int) -> CoefficientSeries:
    ctx = A.element.ctx
    nv, jo = ctx.dim, ctx.jet_order
    re: list = [None] * (K + 1)
    im: list = [None] * (K + 1)
    precs = [jo] * (K + 1)
    for g, Ag in A.components.items():
        for h, Bh in B.components.items():
            if (g + h) & 1 or g + h > 2 * K:
                continue
            k = (g + h) // 2
            prod = moyal_central(Ag, Bh)
            precs[k] = min(precs[k], prod.prec)
            for key, c in prod.terms.items():
                if key.i_power:
                    im[key.t_power] = c if im[key.t_power] is None else im[key.t_power] + c
                else:
                    re[key.t_power] = c if re[key.t_power] is None else re[key.t_power] + c
    out_re, out_im = [], []
    for k in range(K + 1):
        z = Jet.zero(nv, jo, precs[k])
        out_re.append((re[k] or z).truncate(precs[k]))
        out_im.append((im[k] or z).truncate(precs[k]))
    return CoefficientSeries(tuple(out_re), tuple(out_im))


def _as_series(a, K: int) -> CoefficientSeries:
    if isinstance(a, Jet):
        a = CoefficientSeries.from_jets([a])
    if len(a.real) < K + 1:
        zero = Jet.zero(a.num_vars, a.jet_order)
        pad = (zero,) * (K + 1 - len(a.real))
        a = CoefficientSeries(a.real + pad, a.imag + pad)
    return a.truncated(K)


def star_product(F: FedosovConnection, a, b, K: int,
                 internal_order: int | None = None) -> CoefficientSeries:
    """``a * b = Q^{-1}(Q(a) o Q(b))`` through ``t^K``.

    The default internal truncation is ``N = 2K``: the t^K coefficient of the
    fiber evaluation comes from products of total Weyl degree ``2K``.
    """
    a, b = _as_series(a, K), _as_series(b, K)
    N = 2 * K if internal_order is None else internal_order
    if a.jet_order != b.jet_order or a.num_vars != b.num_vars:
        raise ValueError("series live over different jet rings")
    if a.jet_order < 2 * K + 2:
        raise InsufficientJetOrderError(
            f"jet order {a.jet_order} is below 2K+2 = {2 * K + 2}")
    if F.ctx.jet_order != a.jet_order:
        raise ValueError("series and connection use different jet orders")
    A = quantize(F, a, N)
    B = quantize(F, b, N)
    return _central_product(A, B, K)


# ---------------------------------------------------------------------------
# closed-form reference for constant omega
# ---------------------------------------------------------------------------

def _cmul(x, y):
    (ar, ai), (br, bi) = x, y
    return ar * br - ai * bi, ar * bi + ai * br


def moyal_reference(a, b, S: SymplecticStructure, K: int) -> CoefficientSeries:
    """Moyal product of function series for a constant Poisson tensor.

    ``sum_m (1/m!) (-i t/2)^m w^{k1 l1}..w^{km lm} d_{k1..km} a d_{l1..lm} b``
    applied to every pair ``t^i a_i``, ``t^j b_j``.  Independent of the Weyl
    machinery; used as an oracle.
    """
    if not S.is_constant():
        raise UnsupportedError("closed form needs a constant symplectic form")
    a, b = _as_series(a, K), _as_series(b, K)
    n = S.dim
    pairs = [(k, l, S.omega_upper[k][l].constant_term()) for k in range(n) for l in range(n)
             if S.omega_upper[k][l].constant_term()]
    zero = Jet.zero(n, a.jet_order)
    out = [[zero, zero] for _ in range(K + 1)]
    precs = [a.jet_order] * (K + 1)

    def deriv(j, idx):
        for k in idx:
            j = jet_diff(j, k)
        return j

    for i in range(K + 1):
        for j in range(K + 1 - i):
            ai, bj = a.coefficient(i), b.coefficient(j)
            for m in range(K + 1 - i - j):
                k = i + j + m
                # (-i/2)^m / m!
                unit = [(mpq(1), mpq(0)), (mpq(0), mpq(-1)), (mpq(-1), mpq(0)),
                        (mpq(0), mpq(1))][m % 4]
                w = mpq(1, 2 ** m * factorial(m))
                acc_r, acc_i = None, None
                for seq in iproduct(pairs, repeat=m):
                    coef = mpq(1)
                    for _, _, c in seq:
                        coef *= c
                    ks = [p[0] for p in seq]
                    ls = [p[1] for p in seq]
                    da = (deriv(ai[0], ks), deriv(ai[1], ks))
                    db = (deriv(bj[0], ls), deriv(bj[1], ls))
                    pr, pi = _cmul(da, db)
                    pr, pi = pr.scale(coef), pi.scale(coef)
                    acc_r = pr if acc_r is None else acc_r + pr
                    acc_i = pi if acc_i is None else acc_i + pi
                if acc_r is None:
                    # no contraction pattern: the derivatives still cost precision
                    p = min(ai[0].prec, ai[1].prec, bj[0].prec, bj[1].prec) - m
                    acc_r = acc_i = Jet.zero(n, a.jet_order, p)
                cr, ci = _cmul((acc_r.scale(w), acc_i.scale(w)), unit)
                out[k][0] = out[k][0] + cr
                out[k][1] = out[k][1] + ci
                precs[k] = min(precs[k], cr.prec, ci.prec)
    return CoefficientSeries(tuple(o[0].truncate(p) for o, p in zip(out, precs)),
                             tuple(o[1].truncate(p) for o, p in zip(out, precs)))

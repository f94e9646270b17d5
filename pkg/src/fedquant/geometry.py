"""Symplectic forms and linear connections in a single coordinate chart.

Conventions (all indices 0-based in code, 1-based in rendered output):

* ``omega[k][l] = omega(d_k, d_l)``, a full antisymmetric matrix.
* ``poisson = omega^{-1}`` as matrices, so ``{a, b} = w^{kl} d_k a d_l b``.
* ``gamma[k][i][j]`` is ``Gamma^k_{ij}`` with ``nabla_{d_i} d_j = Gamma^k_{ij} d_k``.
* ``curvature[k][l][i][j]`` is ``R^k_{lij}``, the ``d_k`` component of
  ``R(d_i, d_j) d_l``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import mpq

from .jetring import DegenerateFormError, Jet, jet_diff, jet_matrix_inverse
from .weyl import (TermKey, WeylContext, WeylElement, _accumulate, ad,
                   wedge_sign)

__all__ = [
    "SymplecticStructure",
    "Connection",
    "WeylCurvature",
    "SymplecticValidationError",
    "InvalidConnectionError",
    "symplectic_violations",
    "validate_symplectic",
    "poisson_bracket",
    "musical_flat",
    "musical_sharp",
    "torsion",
    "nabla_omega",
    "symplectize",
    "curvature_tensor",
    "lift_nabla",
    "weyl_curvature",
    "nabla_squared",
    "curvature_action",
    "omega_element",
    "christoffel_element",
    "darboux",
]


class SymplecticValidationError(ValueError):
    """Raised with every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidConnectionError(ValueError):
    pass


def _zero_like(j: Jet) -> Jet:
    return Jet.zero(j.num_vars, j.order)


def symplectic_violations(omega: Sequence[Sequence[Jet]]) -> list[str]:
    n = len(omega)
    out = []
    if n == 0 or n % 2 or any(len(row) != n for row in omega):
        return [f"omega must be a square matrix of even size, got {n} rows"]
    for k in range(n):
        for l in range(k, n):
            if not (omega[k][l] + omega[l][k]).is_zero():
                out.append(f"omega[{k + 1}][{l + 1}] != -omega[{l + 1}][{k + 1}]")
    if out:
        return out
    try:
        jet_matrix_inverse([[x.truncate(0) for x in row] for row in omega])
    except DegenerateFormError:
        out.append("omega is degenerate at the basepoint")
    for j in range(n):
        for k in range(j + 1, n):
            for l in range(k + 1, n):
                cyc = (jet_diff(omega[k][l], j) + jet_diff(omega[l][j], k)
                       + jet_diff(omega[j][k], l))
                if not cyc.is_zero():
                    out.append(f"omega is not closed: (d omega)_{{{j + 1}{k + 1}{l + 1}}} = {cyc}")
    return out


@dataclass(eq=False)
class SymplecticStructure:
    """Validated symplectic form with its Poisson tensor."""

    omega_lower: list
    omega_upper: list
    dim: int = field(init=False)
    jet_order: int = field(init=False)

    def __post_init__(self):
        self.dim = len(self.omega_lower)
        self.jet_order = self.omega_lower[0][0].order

    def context(self, max_degree: int) -> WeylContext:
        return WeylContext(self.dim, self.jet_order, max_degree,
                           self.omega_upper, self.omega_lower)

    def zero(self) -> Jet:
        return Jet.zero(self.dim, self.jet_order)

    def is_constant(self) -> bool:
        return all(x.is_constant() for row in self.omega_lower for x in row)


def validate_symplectic(omega_lower: Sequence[Sequence[Jet]]) -> SymplecticStructure:
    problems = symplectic_violations(omega_lower)
    if problems:
        raise SymplecticValidationError(problems)
    omega_lower = [list(row) for row in omega_lower]
    return SymplecticStructure(omega_lower, jet_matrix_inverse(omega_lower))


def darboux(n: int, jet_order: int) -> SymplecticStructure:
    """Standard form ``sum dx^i ^ dx^{i+n}`` on R^{2n}."""
    dim = 2 * n
    rows = [[Jet.zero(dim, jet_order) for _ in range(dim)] for _ in range(dim)]
    for i in range(n):
        rows[i][i + n] = Jet.constant(1, dim, jet_order)
        rows[i + n][i] = Jet.constant(-1, dim, jet_order)
    return validate_symplectic(rows)


def poisson_bracket(a: Jet, b: Jet, S: SymplecticStructure) -> Jet:
    acc = None
    da = [jet_diff(a, k) for k in range(S.dim)]
    db = [jet_diff(b, l) for l in range(S.dim)]
    for k in range(S.dim):
        for l in range(S.dim):
            w = S.omega_upper[k][l]
            if w.is_zero():
                continue
            term = w * da[k] * db[l]
            acc = term if acc is None else acc + term
    if acc is None:
        acc = (a * 0).truncate(min(a.prec, b.prec) - 1)
    return acc


def musical_flat(u: Sequence[Jet], S: SymplecticStructure) -> list[Jet]:
    """``(u^flat)_l = u^k omega_{kl}``."""
    return [sum((u[k] * S.omega_lower[k][l] for k in range(S.dim)), S.zero())
            for l in range(S.dim)]


def musical_sharp(alpha: Sequence[Jet], S: SymplecticStructure) -> list[Jet]:
    """Inverse of :func:`musical_flat`: ``u^k = alpha_l w^{lk}``."""
    return [sum((alpha[l] * S.omega_upper[l][k] for l in range(S.dim)), S.zero())
            for k in range(S.dim)]


def _tensor(dim, rank, fill):
    if rank == 1:
        return [fill() for _ in range(dim)]
    return [_tensor(dim, rank - 1, fill) for _ in range(dim)]


def torsion(C: "Connection") -> list:
    """``T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji}``."""
    g = C.gamma_upper
    n = len(g)
    return [[[g[k][i][j] - g[k][j][i] for j in range(n)] for i in range(n)] for k in range(n)]


def nabla_omega(C: "Connection", S: SymplecticStructure | None = None) -> list:
    """``(nabla_i omega)_{jk} = d_i w_{jk} - G^l_{ij} w_{lk} - G^l_{ik} w_{jl}``."""
    S = S or C.structure
    g, w, n = C.gamma_upper, S.omega_lower, S.dim
    out = _tensor(n, 3, S.zero)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                acc = jet_diff(w[j][k], i)
                for l in range(n):
                    acc = acc - g[l][i][j] * w[l][k] - g[l][i][k] * w[j][l]
                out[i][j][k] = acc
    return out


def curvature_tensor(C: "Connection") -> list:
    """``R^k_{lij} = d_i G^k_{jl} - d_j G^k_{il} + G^k_{im} G^m_{jl} - G^k_{jm} G^m_{il}``."""
    g = C.gamma_upper
    n = len(g)
    out = _tensor(n, 4, lambda: Jet.zero(g[0][0][0].num_vars, g[0][0][0].order))
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    acc = jet_diff(g[k][j][l], i) - jet_diff(g[k][i][l], j)
                    for m in range(n):
                        acc = acc + g[k][i][m] * g[m][j][l] - g[k][j][m] * g[m][i][l]
                    out[k][l][i][j] = acc
    return out


def _all_zero(t) -> bool:
    if isinstance(t, Jet):
        return t.is_zero()
    return all(_all_zero(x) for x in t)


class Connection:
    """Christoffel symbols ``Gamma^k_{ij}`` plus eagerly derived tensors.

    Arbitrary (torsioned, non-symplectic) connections are accepted; use
    :attr:`torsion_free` and :attr:`preserves_omega` to inspect them.
    """

    def __init__(self, structure: SymplecticStructure, gamma_upper=None):
        n = structure.dim
        if gamma_upper is None:
            gamma_upper = _tensor(n, 3, structure.zero)
        self.structure = structure
        self.gamma_upper = [[[gamma_upper[k][i][j] for j in range(n)]
                             for i in range(n)] for k in range(n)]
        w = structure.omega_lower
        self.gamma_lower = [[[sum((w[k][l] * self.gamma_upper[l][i][j] for l in range(n)),
                                  structure.zero())
                              for j in range(n)] for i in range(n)] for k in range(n)]
        self.torsion = torsion(self)
        self.nabla_omega = nabla_omega(self, structure)
        self.curvature = curvature_tensor(self)
        self.torsion_free = _all_zero(self.torsion)
        self.preserves_omega = _all_zero(self.nabla_omega)

    @classmethod
    def trivial(cls, structure: SymplecticStructure) -> "Connection":
        return cls(structure)

    @property
    def dim(self) -> int:
        return self.structure.dim

    @property
    def is_symplectic(self) -> bool:
        return self.torsion_free and self.preserves_omega

    def christoffel_map(self) -> dict[str, Jet]:
        """Nonzero symbols keyed by 1-based ``"k,i,j"``."""
        n = self.dim
        return {f"{k + 1},{i + 1},{j + 1}": self.gamma_upper[k][i][j]
                for k in range(n) for i in range(n) for j in range(n)
                if not self.gamma_upper[k][i][j].is_zero()}

    def require_symplectic(self):
        if not self.torsion_free:
            raise InvalidConnectionError("connection has torsion")
        if not self.preserves_omega:
            raise InvalidConnectionError("connection does not preserve omega")


def symplectize(C: Connection, S: SymplecticStructure | None = None) -> Connection:
    """Torsion-free symplectic connection obtained from an arbitrary one.

    Step one adds ``S^k_{ij} = 1/2 (nabla_i omega)_{jl} w^{lk}``, giving a
    connection that preserves omega.  Step two removes its torsion ``T`` while
    keeping omega parallel: the correction ``A^m_{ij} = a_{k,ij} w^{km}`` with
    ``a_{k,ij} = -1/3 (tau_{k,ij} + tau_{j,ik})`` and ``tau_{k,ij} = T^l_{ij} w_{lk}``.
    Its antisymmetric part is exactly ``-T/2``; the symmetric remainder is what
    keeps omega parallel.  Closedness of omega is what makes this solvable.
    """
    S = S or C.structure
    n, w, wu = S.dim, S.omega_lower, S.omega_upper
    half, third = mpq(1, 2), mpq(-1, 3)
    nw = C.nabla_omega
    g1 = _tensor(n, 3, S.zero)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                acc = C.gamma_upper[k][i][j]
                for l in range(n):
                    acc = acc + (nw[i][j][l] * wu[l][k]).scale(half)
                g1[k][i][j] = acc
    T = [[[g1[k][i][j] - g1[k][j][i] for j in range(n)] for i in range(n)] for k in range(n)]
    tau = [[[sum((T[l][i][j] * w[l][k] for l in range(n)), S.zero())
             for j in range(n)] for i in range(n)] for k in range(n)]
    g2 = _tensor(n, 3, S.zero)
    for m in range(n):
        for i in range(n):
            for j in range(n):
                acc = g1[m][i][j]
                for k in range(n):
                    a = (tau[k][i][j] + tau[j][i][k]).scale(third)
                    acc = acc + a * wu[k][m]
                g2[m][i][j] = acc
    return Connection(S, g2)


# ---------------------------------------------------------------------------
# Lifts to the Weyl bundle
# ---------------------------------------------------------------------------

def omega_element(S: SymplecticStructure, ctx: WeylContext) -> WeylElement:
    """``w_{kl} e^k dx^l``; its ``(i/t)`` bracket is ``-delta``."""
    acc = WeylElement.zero(ctx)
    for k in range(S.dim):
        e = [0] * S.dim
        e[k] = 1
        for l in range(S.dim):
            if not S.omega_lower[k][l].is_zero():
                acc = acc + WeylElement.monomial(ctx, S.omega_lower[k][l],
                                                 e_exponents=e, form_indices=(l,))
    return acc


def christoffel_element(C: Connection, ctx: WeylContext) -> WeylElement:
    """``1/2 Gamma_{ljk} e^j e^k dx^l`` with ``Gamma_{ljk} = w_{lm} Gamma^m_{jk}``.

    In Darboux coordinates ``nabla = d + (i/t)[this, .]``.
    """
    acc = WeylElement.zero(ctx)
    n = C.dim
    for l in range(n):
        for j in range(n):
            for k in range(n):
                c = C.gamma_lower[l][j][k]
                if c.is_zero():
                    continue
                e = [0] * n
                e[j] += 1
                e[k] += 1
                acc = acc + WeylElement.monomial(ctx, c.scale(mpq(1, 2)),
                                                 e_exponents=e, form_indices=(l,))
    return acc


def lift_nabla(C: Connection, a: WeylElement, check: bool = True) -> WeylElement:
    """Covariant derivative on Weyl-valued forms.

    ``nabla a = dx^l ^ (d_l a - Gamma^k_{lj} e^j d a/d e^k)``; the generators
    ``e^k`` transform like the coordinate covectors ``dx^k``.  This is a
    derivation of the (point-dependent) Moyal product exactly when the
    connection preserves omega.
    """
    if check:
        C.require_symplectic()
    n = C.dim
    g = C.gamma_upper
    gp = min(x.prec for a1 in g for a2 in a1 for x in a2)
    out: dict = {}
    for key, c in a.terms.items():
        for l in range(n):
            s, forms = wedge_sign((l,), key.form_indices)
            if not s:
                continue
            dc = jet_diff(c, l)
            if not dc.is_zero():
                _accumulate(out, key._replace(form_indices=forms), dc if s > 0 else -dc)
            for k, ek in enumerate(key.e_exponents):
                if not ek:
                    continue
                for j in range(n):
                    gk = g[k][l][j]
                    if gk.is_zero():
                        continue
                    e = list(key.e_exponents)
                    e[k] -= 1
                    e[j] += 1
                    coeff = (gk * c).scale(-ek * s)
                    _accumulate(out, TermKey(key.t_power, key.i_power, tuple(e), forms), coeff)
    return WeylElement(a.ctx, out, min(a.prec - 1, gp))


@dataclass
class WeylCurvature:
    element: WeylElement


def weyl_curvature(C: Connection, ctx: WeylContext, check: bool = True) -> WeylCurvature:
    """``R = 1/4 w_{bm} R^m_{akl} e^a e^b dx^k ^ dx^l`` with ``(i/t)[R, .] = nabla^2``."""
    if check:
        C.require_symplectic()
    n = C.dim
    w = C.structure.omega_lower
    R = C.curvature
    zero = C.structure.zero()
    out: dict = {}
    quarter = mpq(1, 4)
    for a in range(n):
        for b in range(n):
            e = [0] * n
            e[a] += 1
            e[b] += 1
            e = tuple(e)
            for k in range(n):
                for l in range(n):
                    if k == l:
                        continue
                    acc = zero
                    for m in range(n):
                        if not w[b][m].is_zero() and not R[m][a][k][l].is_zero():
                            acc = acc + w[b][m] * R[m][a][k][l]
                    if acc.is_zero():
                        continue
                    s, forms = wedge_sign((k,), (l,))
                    _accumulate(out, TermKey(0, 0, e, forms), acc.scale(quarter * s))
    prec = min([ctx.jet_order] + [x.prec for x in out.values()])
    return WeylCurvature(WeylElement(ctx, out, prec))


def nabla_squared(C: Connection, a: WeylElement) -> WeylElement:
    return lift_nabla(C, lift_nabla(C, a))


def curvature_action(R: WeylCurvature, a: WeylElement) -> WeylElement:
    return ad(R.element, a)

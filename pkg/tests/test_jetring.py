import random

import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from fedquant.jetring import (DegenerateFormError, DimensionMismatchError, Jet,
                              NonUnitError, grlex_key, jet_diff, jet_invert,
                              jet_matrix_inverse, matmul, monomials)
from fedquant.weyl import random_jet

import oracles as O


def x(k, n=2, J=4):
    return Jet.variable(k, n, J)


def one(n=2, J=4):
    return Jet.constant(1, n, J)


def test_product_truncates_at_order():
    a = Jet.constant(1, 2, 1) + Jet.variable(0, 2, 1)
    b = Jet.constant(1, 2, 1) - Jet.variable(0, 2, 1)
    assert a * b == Jet.constant(1, 2, 1)


def test_product_exact_below_order():
    a = one(J=2) + x(0, J=2)
    b = one(J=2) - x(0, J=2)
    assert a * b == one(J=2) - x(0, J=2) ** 2


def test_sum():
    assert (x(0) + x(1)) + (x(0) - x(1)) == x(0).scale(2)


def test_mismatch_raises():
    with pytest.raises(DimensionMismatchError):
        Jet.variable(0, 2, 3) + Jet.variable(0, 2, 4)
    with pytest.raises(DimensionMismatchError):
        Jet.variable(0, 2, 3) * Jet.variable(0, 4, 3)


def test_coefficients_are_reduced_rationals():
    j = Jet(1, 2, {(1,): mpq(4, 6), (2,): 0})
    assert j.terms == {(1,): mpq(2, 3)}
    assert j.constant_term() == 0


class TestDiff:
    def test_examples(self):
        assert jet_diff(x(0) * x(1), 0) == x(1)
        assert jet_diff(Jet.constant(5, 2, 4), 1).is_zero()
        assert jet_diff(x(0) ** 3, 0) == x(0) ** 2 * 3

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            jet_diff(x(0), 2)

    def test_precision_drops(self):
        d = jet_diff(x(0) ** 4, 0)
        assert d.order == 4 and d.prec == 3
        assert d == x(0) ** 3 * 4


class TestInvert:
    def test_geometric_series(self):
        # 1/(1+x) = 1 - x + x^2 - ...
        got = jet_invert(Jet.constant(1, 1, 2) + Jet.variable(0, 1, 2))
        assert got == Jet(1, 2, {(0,): 1, (1,): -1, (2,): 1})
        assert got == O.to_jet(1 / (1 + O.xs(1)[0]), O.xs(1), 2)

    def test_constant(self):
        assert jet_invert(Jet.constant(2, 2, 3)) == Jet.constant(mpq(1, 2), 2, 3)

    def test_non_unit(self):
        with pytest.raises(NonUnitError):
            jet_invert(x(0))

    @pytest.mark.parametrize("J", range(1, 7))
    def test_random_units(self, J):
        rng = random.Random(J)
        for _ in range(200):
            a = random_jet(2, J, rng, degree=J)
            if not a.constant_term():
                a = a + 1
            assert a * jet_invert(a) == Jet.constant(1, 2, J)


class TestMatrixInverse:
    def test_constant_symplectic(self):
        A = [[Jet.constant(0, 2, 2), Jet.constant(1, 2, 2)],
             [Jet.constant(-1, 2, 2), Jet.constant(0, 2, 2)]]
        inv = jet_matrix_inverse(A)
        assert inv == [[Jet.constant(0, 2, 2), Jet.constant(-1, 2, 2)],
                       [Jet.constant(1, 2, 2), Jet.constant(0, 2, 2)]]

    def test_point_dependent(self):
        J = 2
        u = Jet.constant(1, 2, J) + Jet.variable(0, 2, J)
        z = Jet.zero(2, J)
        inv = jet_matrix_inverse([[z, u], [-u, z]])
        geo = Jet(2, J, {(0, 0): 1, (1, 0): -1, (2, 0): 1})
        assert inv == [[z, -geo], [geo, z]]
        prod = matmul([[z, u], [-u, z]], inv)
        assert prod == [[Jet.constant(1, 2, J), z], [z, Jet.constant(1, 2, J)]]

    def test_identity(self):
        I2 = [[Jet.constant(int(i == j), 2, 3) for j in range(2)] for i in range(2)]
        assert jet_matrix_inverse(I2) == I2

    def test_singular(self):
        z = Jet.zero(2, 2)
        with pytest.raises(DegenerateFormError):
            jet_matrix_inverse([[z, x(0, J=2)], [-x(0, J=2), z]])


def test_monomials_are_grlex_sorted():
    ms = monomials(2, 2)
    assert ms == sorted(ms, key=grlex_key)
    assert ms == [(2, 0), (1, 1), (0, 2)]


def test_render_and_json_round_trip():
    j = Jet(1, 3, {(0,): 1, (1,): -1, (2,): mpq(1, 2)})
    assert j.render() == "1 - x1 + 1/2*x1^2"
    assert Jet.from_json(j.to_json(), 1, 3) == j


# -- properties --------------------------------------------------------------

def jets(n=2, J=4):
    return st.builds(lambda seed: random_jet(n, J, random.Random(seed), degree=J),
                     st.integers(0, 10 ** 9))


@given(jets(), jets(), jets())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a + b == b + a
    assert (a - a).is_zero()


@given(jets(J=5))
def test_mixed_partials_commute(a):
    assert jet_diff(jet_diff(a, 0), 1) == jet_diff(jet_diff(a, 1), 0)


@given(jets(J=5), jets(J=5), st.integers(0, 5))
def test_truncation_coherence(a, b, p):
    assert (a.truncate(p) * b.truncate(p)).terms == (a * b).truncate(p).terms


@given(jets(J=4), jets(J=4))
def test_product_matches_sympy(a, b):
    xs = O.xs(2)
    ref = O.to_jet(O.from_jet(a, xs) * O.from_jet(b, xs), xs, 4)
    assert a * b == ref

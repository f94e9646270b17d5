import random

import pytest
from gmpy2 import mpq

from fedquant.geometry import (Connection, InvalidConnectionError,
                               SymplecticValidationError, christoffel_element,
                               curvature_tensor, darboux, lift_nabla, musical_flat,
                               musical_sharp, nabla_omega, nabla_squared,
                               poisson_bracket, symplectize, torsion,
                               validate_symplectic, weyl_curvature)
from fedquant.jetring import Jet
from fedquant.weyl import (WeylElement, ad, delta, exterior_d, random_element,
                           random_jet)

import oracles as O
from conftest import closed_form_structure, curved_manifold, curved_structure


def const(v, n=2, J=4):
    return Jet.constant(v, n, J)


def random_connection(S, rng, degree=2):
    n = S.dim
    g = [[[random_jet(n, S.jet_order, rng, degree=degree, n_terms=2) for _ in range(n)]
          for _ in range(n)] for _ in range(n)]
    return Connection(S, g)


def all_zero(t):
    if isinstance(t, Jet):
        return t.is_zero()
    return all(all_zero(x) for x in t)


class TestValidate:
    def test_darboux(self):
        S = validate_symplectic([[const(0), const(1)], [const(-1), const(0)]])
        assert S.omega_upper == [[const(0), const(-1)], [const(1), const(0)]]

    def test_point_dependent_dim2(self):
        S = curved_structure(4)
        assert S.dim == 2

    def test_degenerate(self):
        x1 = Jet.variable(0, 2, 4)
        with pytest.raises(SymplecticValidationError) as info:
            validate_symplectic([[const(0), x1], [-x1, const(0)]])
        assert info.value.violations == ["omega is degenerate at the basepoint"]

    def test_not_antisymmetric(self):
        with pytest.raises(SymplecticValidationError) as info:
            validate_symplectic([[const(0), const(1)], [const(1), const(0)]])
        assert "omega[1][2] != -omega[2][1]" in info.value.violations

    def test_not_closed(self):
        S0 = darboux(2, 3)
        w = [row[:] for row in S0.omega_lower]
        x1 = Jet.variable(0, 4, 3)
        w[1][2], w[2][1] = w[1][2] + x1, w[2][1] - x1
        with pytest.raises(SymplecticValidationError) as info:
            validate_symplectic(w)
        assert any("not closed" in v and "123" in v for v in info.value.violations)

    def test_potential_family_is_closed(self):
        rng = random.Random(0)
        for _ in range(5):
            closed_form_structure(rng)


class TestPoisson:
    def test_coordinates(self):
        S = darboux(1, 4)
        x1, x2 = Jet.variable(0, 2, 4), Jet.variable(1, 2, 4)
        assert poisson_bracket(x1, x2, S) == S.omega_upper[0][1]

    def test_antisymmetric_and_jacobi(self):
        S = curved_structure(6)
        rng = random.Random(1)
        for _ in range(20):
            a, b, c = (random_jet(2, 6, rng, degree=3) for _ in range(3))
            assert poisson_bracket(a, a, S).is_zero()
            jac = (poisson_bracket(poisson_bracket(a, b, S), c, S)
                   + poisson_bracket(poisson_bracket(b, c, S), a, S)
                   + poisson_bracket(poisson_bracket(c, a, S), b, S))
            assert jac.is_zero()

    def test_matches_sympy(self):
        S = curved_structure(5)
        x = O.xs(2)
        om = [[0, 1 + x[0]], [-1 - x[0], 0]]
        rng = random.Random(2)
        for _ in range(5):
            a, b = random_jet(2, 5, rng, degree=3), random_jet(2, 5, rng, degree=3)
            ref = O.poisson(O.from_jet(a, x), O.from_jet(b, x), om, x)
            assert poisson_bracket(a, b, S).agrees(O.to_jet(ref, x, 5))


class TestMusical:
    def test_flat_of_basis_vector(self):
        S = darboux(1, 4)
        assert musical_flat([const(1), const(0)], S) == [const(0), const(1)]
        assert musical_flat([const(0), const(0)], S) == [const(0), const(0)]

    def test_round_trip(self):
        S = curved_structure(4)
        rng = random.Random(3)
        for _ in range(20):
            u = [random_jet(2, 4, rng) for _ in range(2)]
            assert musical_sharp(musical_flat(u, S), S) == u
            assert musical_flat(musical_sharp(u, S), S) == u


class TestTensors:
    def test_torsion_examples(self):
        S = darboux(1, 3)
        assert all_zero(torsion(Connection.trivial(S)))
        z = S.zero()
        g = [[[z, z], [z, z]], [[z, z], [z, z]]]
        g[0][0][1] = Jet.constant(1, 2, 3)
        T = torsion(Connection(S, g))
        assert T[0][0][1] == Jet.constant(1, 2, 3)
        assert T[0][1][0] == Jet.constant(-1, 2, 3)

    def test_nabla_omega_example(self):
        S = curved_structure(4)
        nw = nabla_omega(Connection.trivial(S), S)
        assert nw[0][0][1] == const(1)
        assert not Connection.trivial(S).preserves_omega

    def test_curvature_trivial(self):
        assert all_zero(curvature_tensor(Connection.trivial(darboux(1, 3))))

    def test_curvature_constant_gamma_matches_sympy(self):
        S = darboux(1, 3)
        rng = random.Random(4)
        x = O.xs(2)
        for _ in range(3):
            C = random_connection(S, rng, degree=0)
            G = [[[O.from_jet(C.gamma_upper[k][i][j], x) for j in range(2)] for i in range(2)]
                 for k in range(2)]
            ref = O.curvature(G, x)
            for (k, l, i, j), v in ref.items():
                assert C.curvature[k][l][i][j] == O.to_jet(v, x, 3)

    def test_curvature_antisymmetric(self):
        S = curved_structure(4)
        C = random_connection(S, random.Random(5))
        R = C.curvature
        for k in range(2):
            for l in range(2):
                for i in range(2):
                    for j in range(2):
                        assert R[k][l][i][j] == -R[k][l][j][i]


class TestSymplectize:
    def test_darboux_trivial_unchanged(self):
        S = darboux(1, 4)
        assert symplectize(Connection.trivial(S)).gamma_upper == Connection.trivial(S).gamma_upper

    def test_curved_values(self):
        # frozen from the symbolic oracle: G^1_11 = (2/3)/(1+x1), G^2_12 = G^2_21 = (1/3)/(1+x1)
        _, C = curved_manifold(5)
        x = O.xs(2)
        expect = {"1,1,1": mpq(2, 3), "2,1,2": mpq(1, 3), "2,2,1": mpq(1, 3)}
        table = C.christoffel_map()
        assert sorted(table) == sorted(expect)
        for key, c in expect.items():
            assert table[key].agrees(O.to_jet(c / (1 + x[0]), x, 5))

    def test_curved_matches_symbolic_formula(self):
        _, C = curved_manifold(6)
        x = O.xs(2)
        G0 = [[[0] * 2 for _ in range(2)] for _ in range(2)]
        Gs = O.symplectize(G0, [[0, 1 + x[0]], [-1 - x[0], 0]], x)
        om = [[0, 1 + x[0]], [-1 - x[0], 0]]
        assert all(v == 0 for v in sum(sum(O.torsion(Gs, 2), []), []))
        assert all(v == 0 for v in sum(sum(O.nabla_omega(Gs, om, x), []), []))
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    assert C.gamma_upper[k][i][j].agrees(O.to_jet(Gs[k][i][j], x, 6))

    @pytest.mark.parametrize("maker", ["darboux2", "darboux4", "curved", "potential4"])
    def test_random_connections(self, maker):
        rng = random.Random(hash(maker) & 0xFFFF)
        S = {"darboux2": lambda: darboux(1, 4), "darboux4": lambda: darboux(2, 3),
             "curved": lambda: curved_structure(4),
             "potential4": lambda: closed_form_structure(rng, J=3)}[maker]()
        for _ in range(5):
            C = symplectize(random_connection(S, rng), S)
            assert C.torsion_free and C.preserves_omega
            assert symplectize(C, S).gamma_upper == C.gamma_upper

    def test_lowered_difference_totally_symmetric(self):
        S = curved_structure(4)
        rng = random.Random(6)
        A = symplectize(random_connection(S, rng), S)
        B = symplectize(random_connection(S, rng), S)
        n = S.dim
        d = [[[A.gamma_lower[k][i][j] - B.gamma_lower[k][i][j] for j in range(n)]
              for i in range(n)] for k in range(n)]
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    assert d[k][i][j] == d[i][k][j] == d[j][i][k]

    def test_lowered_symmetry_on_darboux(self):
        S = darboux(2, 3)
        C = symplectize(random_connection(S, random.Random(7)), S)
        n = S.dim
        g = C.gamma_lower
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    assert g[k][i][j] == g[i][k][j] == g[j][i][k]

    def test_lowered_identity_for_point_dependent_omega(self):
        # d_i w_jk = G_jik - G_kij for any symplectic connection
        from fedquant.jetring import jet_diff
        S, C = curved_manifold(5)
        g, w = C.gamma_lower, S.omega_lower
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    assert jet_diff(w[j][k], i).agrees(g[j][i][k] - g[k][i][j])


class TestLiftNabla:
    def test_flat_is_d(self):
        S = darboux(1, 4)
        ctx = S.context(4)
        C = Connection.trivial(S)
        a = WeylElement.scalar(ctx, Jet.variable(0, 2, 4))
        assert lift_nabla(C, a) == WeylElement.dx(ctx, 0)

    def test_rejects_invalid(self):
        S = curved_structure(4)
        with pytest.raises(InvalidConnectionError):
            lift_nabla(Connection.trivial(S), WeylElement.zero(S.context(3)))

    def test_bracket_form_in_darboux_chart(self):
        S = darboux(1, 5)
        ctx = S.context(5)
        C = symplectize(random_connection(S, random.Random(8)), S)
        G = christoffel_element(C, ctx)
        rng = random.Random(9)
        for _ in range(30):
            a = random_element(ctx, rng, max_form=1)
            assert lift_nabla(C, a).agrees(exterior_d(a) + ad(G, a))

    def test_commutes_with_delta(self):
        S, C = curved_manifold(6)
        ctx = S.context(5)
        rng = random.Random(10)
        for _ in range(100):
            a = random_element(ctx, rng, max_form=1)
            lhs = delta(lift_nabla(C, a)) + lift_nabla(C, delta(a))
            assert lhs.is_zero()

    def test_torsion_breaks_delta_commutation(self):
        S = darboux(1, 4)
        ctx = S.context(4)
        z = S.zero()
        g = [[[z, z], [z, z]], [[z, z], [z, z]]]
        g[0][0][1] = Jet.constant(1, 2, 4)
        C = Connection(S, g)
        a = WeylElement.generator(ctx, 0)
        lhs = delta(lift_nabla(C, a, check=False)) + lift_nabla(C, delta(a), check=False)
        assert not lhs.is_zero()

    def test_leibniz(self):
        S, C = curved_manifold(6)
        ctx = S.context(5)
        rng = random.Random(11)
        for _ in range(30):
            a = random_element(ctx, rng, max_form=1, n_terms=3)
            b = random_element(ctx, rng, max_form=1, n_terms=3)
            lhs = lift_nabla(C, a * b)
            rhs = lift_nabla(C, a) * b
            for q in a.form_degrees():
                rhs = rhs + (a.form_part(q) * lift_nabla(C, b)).scale((-1) ** q)
            assert lhs.agrees(rhs)

    def test_preserves_weyl_degree(self):
        S, C = curved_manifold(5)
        ctx = S.context(5)
        rng = random.Random(12)
        for _ in range(20):
            a = random_element(ctx, rng).homogeneous(3)
            assert lift_nabla(C, a).degrees() <= {3}


class TestWeylCurvature:
    def test_trivial(self):
        S = darboux(1, 3)
        assert weyl_curvature(Connection.trivial(S), S.context(4)).element.is_zero()

    def test_curved_value(self):
        # frozen from the symbolic oracle: R = -(2/9)/(1+x1) e1^2 dx1^dx2
        S, C = curved_manifold(5)
        ctx = S.context(4)
        R = weyl_curvature(C, ctx).element
        x = O.xs(2)
        coeff = O.to_jet(-O.sp.Rational(2, 9) / (1 + x[0]), x, 5)
        expected = WeylElement.monomial(ctx, coeff, e_exponents=(2, 0), form_indices=(0, 1))
        assert R.agrees(expected)
        assert R.form_degrees() == {2} and R.degrees() == {2}

    def test_generates_nabla_squared(self):
        S, C = curved_manifold(7)
        ctx = S.context(5)
        R = weyl_curvature(C, ctx).element
        for j in range(2):
            ej = WeylElement.generator(ctx, j)
            assert ad(R, ej).agrees(nabla_squared(C, ej))
        rng = random.Random(13)
        for _ in range(20):
            a = random_element(ctx, rng, max_form=0)
            assert ad(R, a).agrees(nabla_squared(C, a))

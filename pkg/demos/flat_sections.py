"""Flat sections degree by degree.

Every function series ``a`` lifts to a unique flat section ``A`` with
central part ``a``.  On the flat plane the lift is the Taylor expansion in
the fiber variables; on the curved plane the Christoffel symbols enter from
degree two.

    python demos/flat_sections.py
"""
from fedquant import (CoefficientSeries, Connection, apply_D, build_fedosov, darboux,
                      evaluate, parse_jet, quantize, symplectize, validate_symplectic)

COORDS = ["x1", "x2"]
J = 8


def lift(F, src, order=4):
    a = CoefficientSeries.from_jets([parse_jet(src, COORDS, J)])
    A = quantize(F, a, order)
    for g, comp in sorted(A.components.items()):
        print(f"  degree {g}: {comp.truncate(4).render(COORDS)}")
    residual = apply_D(F, A.element).up_to_degree(order - 1)
    print("  D A = 0:", residual.is_zero(), "   evaluates back:", evaluate(A, 0).agrees(a))


def main():
    S = darboux(1, J)
    print("flat plane, a = x1^2*x2")
    lift(build_fedosov(Connection.trivial(S), 6, S), "x1^2*x2")

    rows = [["0", "1 + x1"], ["-1 - x1", "0"]]
    S = validate_symplectic([[parse_jet(s, COORDS, J) for s in r] for r in rows])
    F = build_fedosov(symplectize(Connection(S), S), 6, S)
    print("\ncurved plane, a = x1^2*x2 (coefficients shown to fourth order)")
    lift(F, "x1^2*x2")


if __name__ == "__main__":
    main()

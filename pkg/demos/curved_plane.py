"""A point-dependent symplectic form.

``omega = (1 + x1) dx1 ^ dx2`` has no flat symplectic connection in these
coordinates, so the trivial connection is corrected first.  The Fedosov
connection then picks up nonzero ``rho`` components, and the star product
acquires curvature corrections from ``t^2`` on.

    python demos/curved_plane.py
"""
import random

from fedquant import (CoefficientSeries, Connection, build_fedosov, check_flatness,
                      parse_jet, star_product, symplectize, validate_symplectic)
from fedquant.weyl import random_jet

COORDS = ["x1", "x2"]
# nested products at K = 3 spend 2K jet degrees on the inner factor
J = 12


def series(src):
    return CoefficientSeries.from_jets([parse_jet(src, COORDS, J)])


def main():
    rows = [["0", "1 + x1"], ["-1 - x1", "0"]]
    S = validate_symplectic([[parse_jet(s, COORDS, J) for s in r] for r in rows])
    C = symplectize(Connection(S), S)
    print("symplectized Christoffel symbols (low orders):")
    for key, jet in C.christoffel_map().items():
        print(f"  {key} = {jet.truncate(3).render(COORDS)} + ...")

    F = build_fedosov(C, 8, S)
    for g in range(3, 6):
        print(f"degree {g}: rho = {F.component(g).truncate(2).render(COORDS)} + ...")

    rep = check_flatness(F)
    print("flat:", rep.flat, "  central curvature is omega:", rep.omega_matches)

    F = build_fedosov(C, 6, S)
    c = star_product(F, series("x1^2"), series("x2^2"), 2)
    print("\n(x1^2) * (x2^2):")
    for line in c.truncate_prec(5).render(COORDS):
        print("   ", line, "+ ...")

    rng = random.Random(0)
    a, b, d = (CoefficientSeries.from_jets([random_jet(2, J, rng, degree=3)])
               for _ in range(3))
    left = star_product(F, star_product(F, a, b, 3), d, 3)
    right = star_product(F, a, star_product(F, b, d, 3), 3)
    print("\nassociative through t^3 on a random triple:", left.agrees(right))


if __name__ == "__main__":
    main()

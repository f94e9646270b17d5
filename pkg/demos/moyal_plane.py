"""Star products on the flat plane.

With constant omega and the trivial connection the Fedosov connection is
``d - delta`` and the star product is the Moyal product.  This script prints
a few products and compares them with the closed form.

    python demos/moyal_plane.py
"""
from fedquant import (CoefficientSeries, Connection, build_fedosov, darboux,
                      moyal_reference, parse_jet, star_product)

COORDS = ["x1", "x2"]
K = 3
J = 2 * K + 2


def series(src):
    return CoefficientSeries.from_jets([parse_jet(src, COORDS, J)])


def main():
    S = darboux(1, J)
    F = build_fedosov(Connection.trivial(S), 2 * K, S)
    print("rho vanishes:", F.rho.is_zero())

    for f, g in [("x1", "x2"), ("x2", "x1"), ("x1^2", "x2^2"), ("x1^3 + x2", "x1*x2^2")]:
        c = star_product(F, series(f), series(g), K)
        same = c.agrees(moyal_reference(series(f), series(g), S, K))
        print(f"\n({f}) * ({g})   [matches closed form: {same}]")
        for line in c.render(COORDS):
            print("   ", line)


if __name__ == "__main__":
    main()

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from fedquant.expr import parse_jet  # noqa: E402
from fedquant.geometry import Connection, darboux, symplectize, validate_symplectic  # noqa: E402
from fedquant.jetring import jet_diff  # noqa: E402
from fedquant.weyl import random_jet  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


def curved_structure(J):
    """``omega = (1 + x1) dx1 ^ dx2`` on R^2."""
    c = ["x1", "x2"]
    rows = [["0", "1 + x1"], ["-1 - x1", "0"]]
    return validate_symplectic([[parse_jet(s, c, J) for s in r] for r in rows])


def curved_manifold(J):
    S = curved_structure(J)
    return S, symplectize(Connection(S), S)


def darboux_manifold(n, J):
    S = darboux(n, J)
    return S, Connection.trivial(S)


def closed_form_structure(rng, n_half=2, J=4):
    """``omega = omega_0 + d theta`` for a random polynomial 1-form ``theta``.

    ``d theta`` vanishes at the origin, so ``omega(0)`` stays nondegenerate;
    draws are repeated until ``omega`` is genuinely point dependent.
    """
    S0 = darboux(n_half, J)
    n = S0.dim
    while True:
        theta = [random_jet(n, J, rng, degree=3, n_terms=4) for _ in range(n)]
        theta = [th.like({e: c for e, c in th.terms.items() if sum(e) >= 2})
                 for th in theta]
        w = [[S0.omega_lower[k][l] + jet_diff(theta[l], k) - jet_diff(theta[k], l)
              for l in range(n)] for k in range(n)]
        S = validate_symplectic(w)
        if not S.is_constant():
            return S


@pytest.fixture
def data_dir():
    return DATA

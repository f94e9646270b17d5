"""Command-line driver: manifold spec files in, canonical renderings out.

Exit codes: 0 success, 1 validation failure, 2 parse or usage error,
3 cocycle failure inside the connection recursion.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Sequence, TextIO

from .expr import ParseError, lower, parse_expression
from .fedosov import (CocycleError, CoefficientSeries, InsufficientJetOrderError,
                      build_fedosov, moyal_reference, quantize, star_product)
from .geometry import (Connection, InvalidConnectionError, SymplecticStructure,
                       darboux, symplectic_violations, symplectize, validate_symplectic)

__all__ = ["ManifoldSpec", "LoadedSpec", "SpecError", "read_spec", "load_spec",
           "run_command", "main"]

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_COCYCLE = 0, 1, 2, 3

PRESETS = ("darboux",)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")
_KEY = re.compile(r"\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\Z")
DEFAULT_JET_ORDER = 6


class SpecError(ValueError):
    """All problems found in a spec file; ``code`` is the exit status."""

    def __init__(self, failures: list[str], code: int = EXIT_USAGE):
        self.failures = failures
        self.code = code
        super().__init__("; ".join(failures))


@dataclass
class ManifoldSpec:
    dimension: int
    coordinates: list
    omega: list
    jet_order: int | None = None
    christoffel: dict | None = None
    preset: str | None = None


@dataclass
class LoadedSpec:
    spec: ManifoldSpec
    structure: SymplecticStructure
    connection: Connection
    christoffel_given: bool
    notes: list = field(default_factory=list)

    @property
    def coordinates(self) -> list:
        return self.spec.coordinates


def _darboux_strings(dim: int) -> list:
    n = dim // 2
    rows = [["0"] * dim for _ in range(dim)]
    for i in range(n):
        rows[i][i + n] = "1"
        rows[i + n][i] = "-1"
    return rows


def read_spec(data) -> ManifoldSpec:
    """Check the JSON shape and expand presets; expressions stay unparsed."""
    if not isinstance(data, dict):
        raise SpecError(["spec must be a JSON object"])
    fails = []
    known = {"dimension", "coordinates", "jet_order", "omega", "christoffel", "preset"}
    for key in sorted(set(data) - known):
        fails.append(f"unknown field {key!r}")
    dim = data.get("dimension")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim <= 0 or dim % 2:
        fails.append(f"dimension must be an even positive integer, got {dim!r}")
        dim = None
    preset = data.get("preset")
    omega = data.get("omega")
    if preset is not None:
        if preset not in PRESETS:
            fails.append(f"unknown preset {preset!r}")
        elif omega is not None:
            fails.append("give either a preset or omega, not both")
        elif dim is not None:
            omega = _darboux_strings(dim)
    coords = data.get("coordinates")
    if coords is None and dim is not None:
        coords = [f"x{k + 1}" for k in range(dim)]
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        fails.append("coordinates must be a list of strings")
        coords = None
    elif dim is not None:
        if len(coords) != dim:
            fails.append(f"expected {dim} coordinates, got {len(coords)}")
        if len(set(coords)) != len(coords):
            fails.append("coordinates must be distinct")
        for c in coords:
            if not _IDENT.match(c):
                fails.append(f"coordinate {c!r} is not an identifier")
    jet_order = data.get("jet_order")
    if jet_order is not None and (not isinstance(jet_order, int) or isinstance(jet_order, bool)
                                  or jet_order < 1):
        fails.append(f"jet_order must be a positive integer, got {jet_order!r}")
    if omega is None:
        fails.append("missing omega (or a preset)")
    elif dim is not None:
        if (not isinstance(omega, list) or len(omega) != dim
                or any(not isinstance(r, list) or len(r) != dim for r in omega)):
            fails.append(f"omega must be a {dim}x{dim} array")
        else:
            for k, row in enumerate(omega):
                for l, x in enumerate(row):
                    if not isinstance(x, (str, int)) or isinstance(x, bool):
                        fails.append(f"omega[{k + 1}][{l + 1}] must be an expression string")
    chris = data.get("christoffel")
    if chris is not None:
        if not isinstance(chris, dict):
            fails.append("christoffel must be an object mapping \"k,i,j\" to expressions")
        else:
            for key, val in chris.items():
                m = _KEY.match(key)
                if not m or (dim is not None and not all(1 <= int(g) <= dim for g in m.groups())):
                    fails.append(f"bad christoffel index {key!r}")
                if not isinstance(val, (str, int)) or isinstance(val, bool):
                    fails.append(f"christoffel[{key}] must be an expression string")
    if fails:
        raise SpecError(fails)
    return ManifoldSpec(dim, list(coords), [[str(x) for x in r] for r in omega], jet_order,
                        None if chris is None else {k: str(v) for k, v in chris.items()},
                        preset)


def load_spec(source, jet_order: int | None = None) -> LoadedSpec:
    """Read, parse and validate a spec.

    ``source`` is a path or an already decoded JSON object.  Every failure is
    collected before raising :class:`SpecError`.
    """
    if isinstance(source, dict):
        data = source
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise SpecError([f"cannot read {source}: {exc.strerror}"]) from exc
        except json.JSONDecodeError as exc:
            raise SpecError([f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                             f"{exc.msg}"]) from exc
    spec = read_spec(data)
    J = jet_order or spec.jet_order or DEFAULT_JET_ORDER
    coords = spec.coordinates
    fails = []

    def jet_of(where, src):
        try:
            return lower(parse_expression(src, coords), coords, J)
        except ParseError as exc:
            fails.append(f"{where}: {exc}")
            return None

    omega = [[jet_of(f"omega[{k + 1}][{l + 1}]", x) for l, x in enumerate(row)]
             for k, row in enumerate(spec.omega)]
    gamma = {}
    for key, src in (spec.christoffel or {}).items():
        k, i, j = (int(g) - 1 for g in _KEY.match(key).groups())
        gamma[k, i, j] = jet_of(f"christoffel[{key}]", src)
    if fails:
        raise SpecError(fails)
    violations = symplectic_violations(omega)
    if violations:
        raise SpecError(violations, EXIT_INVALID)
    S = validate_symplectic(omega)
    n = S.dim
    if spec.christoffel is None:
        C = Connection.trivial(S)
    else:
        upper = [[[gamma.get((k, i, j), S.zero()) for j in range(n)] for i in range(n)]
                 for k in range(n)]
        C = Connection(S, upper)
    notes = []
    if not C.torsion_free:
        notes.append("connection has torsion")
    if not C.preserves_omega:
        notes.append("connection does not preserve omega")
    return LoadedSpec(spec, S, C, spec.christoffel is not None, notes)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _series_json(series: CoefficientSeries, coords, K: int, J: int) -> dict:
    return {"order": K, "jet_order": J, "coordinates": list(coords),
            "coefficients": series.to_json()}


def _parse_series(text: str, coords, J: int, what: str) -> CoefficientSeries:
    jets = []
    for k, piece in enumerate(text.split(",")):
        try:
            jets.append(lower(parse_expression(piece, coords), coords, J))
        except ParseError as exc:
            label = what if "," not in text else f"{what} term {k}"
            raise SpecError([f"{label}: {exc}"]) from exc
    return CoefficientSeries.from_jets(jets)


def _resolve_connection(loaded: LoadedSpec, want_symplectize: bool) -> Connection:
    C = loaded.connection
    if want_symplectize:
        return symplectize(C, loaded.structure)
    if not C.is_symplectic:
        raise SpecError([*loaded.notes,
                         "a torsion-free symplectic connection is required; "
                         "run `symplectize` or pass --symplectize"], EXIT_INVALID)
    return C


def _jet_order(args, spec_default: int | None, fallback: int) -> int:
    return args.jet_order or spec_default or fallback


def _peek_spec_jet_order(path) -> int | None:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    J = data.get("jet_order") if isinstance(data, dict) else None
    return J if isinstance(J, int) and not isinstance(J, bool) and J > 0 else None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_check(args, out: TextIO, err: TextIO) -> int:
    try:
        loaded = load_spec(args.spec, args.jet_order)
    except SpecError as exc:
        if exc.code == EXIT_INVALID and args.json:
            out.write(_dump({"omega_valid": False, "violations": exc.failures}) + "\n")
        raise
    C = loaded.connection
    if args.symplectize:
        C = symplectize(C, loaded.structure)
    report = {
        "dimension": loaded.structure.dim,
        "coordinates": loaded.coordinates,
        "jet_order": loaded.structure.jet_order,
        "omega_valid": True,
        "violations": [],
        "christoffel_given": loaded.christoffel_given,
        "symplectized": bool(args.symplectize),
        "torsion_free": C.torsion_free,
        "preserves_omega": C.preserves_omega,
    }
    if args.json:
        out.write(_dump(report) + "\n")
        return EXIT_OK
    yn = {True: "yes", False: "no"}
    out.write(f"dimension: {report['dimension']}\n")
    out.write(f"coordinates: {', '.join(report['coordinates'])}\n")
    out.write(f"jet_order: {report['jet_order']}\n")
    out.write("omega: valid\n")
    source = "given" if loaded.christoffel_given else "trivial (Gamma = 0)"
    if args.symplectize:
        source += ", symplectized"
    out.write(f"connection: {source}\n")
    out.write(f"torsion_free: {yn[C.torsion_free]}\n")
    out.write(f"preserves_omega: {yn[C.preserves_omega]}\n")
    if not C.is_symplectic:
        out.write("note: run `symplectize` or pass --symplectize before building a "
                  "Fedosov connection\n")
    return EXIT_OK


def cmd_symplectize(args, out, err) -> int:
    loaded = load_spec(args.spec, args.jet_order)
    C = symplectize(loaded.connection, loaded.structure)
    coords = loaded.coordinates
    table = {k: j.render(coords) for k, j in C.christoffel_map().items()}
    if args.json:
        out.write(_dump({"christoffel": table}) + "\n")
    elif not table:
        out.write("christoffel: all zero\n")
    else:
        for k, v in table.items():
            out.write(f"{k} = {v}\n")
    return EXIT_OK


def cmd_connection(args, out, err) -> int:
    N = args.order
    if N < 3:
        raise SpecError(["--order must be at least 3"])
    J = _jet_order(args, _peek_spec_jet_order(args.spec), N + 2)
    loaded = load_spec(args.spec, J)
    C = _resolve_connection(loaded, args.symplectize)
    F = build_fedosov(C, N, loaded.structure)
    coords = loaded.coordinates
    if args.json:
        comps = {str(g): F.component(g).to_json() for g in range(3, N + 1)}
        out.write(_dump({"order": N, "jet_order": J, "coordinates": coords,
                         "rho": comps}) + "\n")
    else:
        for g in range(3, N + 1):
            out.write(f"degree {g}: rho = {F.component(g).render(coords)}\n")
    return EXIT_OK


def _check_star_order(K: int, J: int):
    if K < 0:
        raise SpecError(["--order must be non-negative"])
    if J < 2 * K + 2:
        raise InsufficientJetOrderError(f"jet order {J} is below 2K+2 = {2 * K + 2}")


def cmd_flat_section(args, out, err) -> int:
    K = args.order
    J = _jet_order(args, _peek_spec_jet_order(args.spec), 2 * K + 2)
    _check_star_order(K, J)
    loaded = load_spec(args.spec, J)
    coords = loaded.coordinates
    a = _parse_series(args.f, coords, J, "-f")
    C = _resolve_connection(loaded, args.symplectize)
    N = max(2 * K, 3)
    F = build_fedosov(C, N, loaded.structure)
    A = quantize(F, a, 2 * K)
    if args.json:
        comps = {str(g): A.components[g].to_json() for g in sorted(A.components)}
        out.write(_dump({"order": K, "jet_order": J, "coordinates": coords,
                         "components": comps}) + "\n")
    else:
        for g in sorted(A.components):
            out.write(f"degree {g}: A = {A.components[g].render(coords)}\n")
    return EXIT_OK


def cmd_star(args, out, err) -> int:
    K = args.order
    J = _jet_order(args, _peek_spec_jet_order(args.spec), 2 * K + 2)
    _check_star_order(K, J)
    loaded = load_spec(args.spec, J)
    coords = loaded.coordinates
    a = _parse_series(args.f, coords, J, "-f")
    b = _parse_series(args.g, coords, J, "-g")
    C = _resolve_connection(loaded, args.symplectize)
    F = build_fedosov(C, max(2 * K, 3), loaded.structure)
    c = star_product(F, a, b, K)
    _write_series(args, out, c, coords, K, J)
    return EXIT_OK


def cmd_moyal(args, out, err) -> int:
    K = args.order
    dim = args.dim
    if dim <= 0 or dim % 2:
        raise SpecError([f"--dim must be an even positive integer, got {dim}"])
    J = args.jet_order or 2 * K + 2
    _check_star_order(K, J)
    coords = [f"x{k + 1}" for k in range(dim)]
    S = darboux(dim // 2, J)
    a = _parse_series(args.f, coords, J, "-f")
    b = _parse_series(args.g, coords, J, "-g")
    c = moyal_reference(a, b, S, K)
    _write_series(args, out, c, coords, K, J)
    return EXIT_OK


def _write_series(args, out, c: CoefficientSeries, coords, K: int, J: int):
    if args.json:
        out.write(_dump(_series_json(c, coords, K, J)) + "\n")
    else:
        for line in c.render(coords):
            out.write(line + "\n")


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so :func:`run_command` can map exit codes."""

    def error(self, message):
        raise SpecError([f"{self.prog}: {message}"])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--jet-order", type=int, metavar="J",
                        help="Taylor order of all coefficients (default 2K+2)")
    common.add_argument("--symplectize", action="store_true",
                        help="replace the connection by its symplectization first")

    p = _Parser(prog="fedquant", description="Fedosov star products on jets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("check", parents=[common], help="validate a manifold spec")
    s.add_argument("spec")
    s.set_defaults(run=cmd_check)

    s = sub.add_parser("symplectize", parents=[common],
                       help="print a torsion-free symplectic connection")
    s.add_argument("spec")
    s.set_defaults(run=cmd_symplectize)

    s = sub.add_parser("connection", parents=[common], help="dump rho by Weyl degree")
    s.add_argument("spec")
    s.add_argument("--order", type=int, required=True, metavar="N")
    s.set_defaults(run=cmd_connection)

    s = sub.add_parser("flat-section", parents=[common],
                       help="dump the flat section of a function series by degree")
    s.add_argument("spec")
    s.add_argument("--order", type=int, required=True, metavar="K")
    s.add_argument("-f", required=True, metavar="EXPR[,EXPR...]")
    s.set_defaults(run=cmd_flat_section)

    s = sub.add_parser("star", parents=[common], help="star product through t^K")
    s.add_argument("spec")
    s.add_argument("--order", type=int, required=True, metavar="K")
    s.add_argument("-f", required=True, metavar="EXPR")
    s.add_argument("-g", required=True, metavar="EXPR")
    s.set_defaults(run=cmd_star)

    s = sub.add_parser("moyal", parents=[common],
                       help="closed-form Moyal product on flat R^2n")
    s.add_argument("--order", type=int, required=True, metavar="K")
    s.add_argument("--dim", type=int, required=True, metavar="2n")
    s.add_argument("-f", required=True, metavar="EXPR")
    s.add_argument("-g", required=True, metavar="EXPR")
    s.set_defaults(run=cmd_moyal)
    return p


def _error_prefix(stream: TextIO) -> str:
    isatty = getattr(stream, "isatty", lambda: False)()
    if isatty and not os.environ.get("NO_COLOR"):
        return "\x1b[31merror:\x1b[0m "
    return "error: "


def run_command(argv: Sequence[str], out: TextIO | None = None,
                err: TextIO | None = None) -> int:
    """Run one invocation and return its exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    prefix = _error_prefix(err)
    try:
        args = build_parser().parse_args(list(argv))
        return args.run(args, out, err)
    except SystemExit as exc:
        # --help and friends
        return int(exc.code or 0)
    except SpecError as exc:
        for msg in exc.failures:
            err.write(prefix + msg + "\n")
        return exc.code
    except (InsufficientJetOrderError, InvalidConnectionError) as exc:
        err.write(prefix + str(exc) + "\n")
        return EXIT_INVALID
    except CocycleError as exc:
        err.write(prefix + str(exc) + "\n")
        return EXIT_COCYCLE


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

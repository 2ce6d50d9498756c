"""Command-line front end: parse a run specification, dispatch, serialize.

All numeric inputs are decimal strings converted at the configured working
precision; nothing round-trips through a 64-bit float.  Output is CSV or JSON
with numbers printed at the working digit count, so identical runs produce
byte-identical files.

Exit codes: 0 success, 1 usage error, 2 domain error (pole hit, no feasible
point, center not below bound), 3 unwritable output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from mpmath import mp, mpf

from . import emm, oppq, problems, reconstruct
from .numerics import MomentBoundsError, PrecScalar, to_mpf, workdps
from .problems import Branch, Family, ProblemSpec, Representation

ENV_DIGITS = "MOMENT_BOUNDS_DIGITS"

REPRESENTATIONS = {
    "psi": Representation.PSI_TILDE,
    "phi-sigma0": Representation.PHI_SIGMA0,
    "phi-sigma3": Representation.PHI_SIGMA3,
    "psi2": Representation.PSI_SQUARED,
}


class IOFailure(MomentBoundsError):
    pass


def _fmt(x, digits: int) -> str:
    """Decimal string with `digits` significant figures, lowercase exponent."""
    if isinstance(x, PrecScalar):
        x = x.value
    if isinstance(x, (int, str)):
        return str(x)
    with mp.workdps(digits + 5):
        return mp.nstr(x, digits)


def serialize(record: dict, fmt: str, digits: int) -> bytes:
    """CSV: one header row naming columns, then rows.  JSON: one object with
    inputs / outputs / provenance."""
    if fmt == "json":
        def conv(v):
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, (PrecScalar, mpf)):
                return _fmt(v, digits)
            return v

        return (json.dumps(conv(record), indent=2, sort_keys=True) + "\n").encode()
    header = record["outputs"]["columns"]
    lines = [",".join(header)]
    for row in record["outputs"]["rows"]:
        lines.append(",".join(_fmt(v, digits) for v in row))
    return ("\n".join(lines) + "\n").encode()


def _write(data: bytes, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(data.decode())
        return
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def _spec_from(args, representation=None, branch=None) -> ProblemSpec:
    family = Family.WALLED_CQ if getattr(args, "family", "spiked") == "walled" else Family.SPIKED_AQ
    if family is Family.WALLED_CQ:
        return ProblemSpec(family, args.b, branch=branch or Branch.PHYSICAL, digits=args.digits)
    return ProblemSpec(
        family, args.b, gamma=args.gamma, representation=representation, digits=args.digits
    )


def _emit(args, inputs: dict, columns: list, rows: list, started: float):
    provenance = {
        "tool": "moment-bounds",
        "digits": args.digits,
    }
    if getattr(args, "timing", False):
        provenance["wall_clock_s"] = round(time.monotonic() - started, 3)
    record = {"inputs": inputs, "outputs": {"columns": columns, "rows": rows},
              "provenance": provenance}
    _write(serialize(record, args.format, args.digits), args.out)


def _window(args) -> tuple:
    lo, hi = args.window.split(",")
    return lo.strip(), hi.strip()


def _common_inputs(args, **extra) -> dict:
    base = {"command": args.command, "digits": args.digits, "format": args.format}
    for key in ("b", "gamma", "N", "pmax", "window", "state", "grid", "branch", "bu",
                "representation", "n", "family", "mode", "E", "eta", "terms"):
        if hasattr(args, key) and getattr(args, key) is not None:
            base[key] = getattr(args, key)
    base.update(extra)
    return base


# -- subcommand handlers -----------------------------------------------------


def _cmd_exact(args) -> int:
    started = time.monotonic()
    rows = []
    for n in range(args.n + 1):
        e = problems.exact_spectrum_gamma(args.gamma, n, args.digits)
        rows.append([n, e])
    _emit(args, _common_inputs(args), ["n", "E"], rows, started)
    return 0


def _cmd_emm(args) -> int:
    started = time.monotonic()
    rep = REPRESENTATIONS[args.representation]
    spec = _spec_from(args, representation=rep)
    window = _window(args)
    runner = emm.emm_progressive if args.progressive else emm.emm_energy_interval
    interval = runner(
        spec, args.pmax, window, state=args.state, digits=args.digits,
        grid=args.grid, seed=args.seed,
    )
    rows = [[args.b, args.state, interval.E_L, interval.E_U, args.pmax, args.digits]]
    _emit(args, _common_inputs(args), ["b", "state", "E_L", "E_U", "pmax", "digits"], rows, started)
    return 0


def _cmd_oppq_am(args) -> int:
    started = time.monotonic()
    spec = _spec_from(args)
    roots = oppq.am_secular_roots(
        spec, args.N, _window(args), digits=args.digits, grid=args.grid
    )
    rows = [[args.b, k, r, args.N, args.digits] for k, r in enumerate(roots)]
    _emit(args, _common_inputs(args), ["b", "index", "E", "N", "digits"], rows, started)
    return 0


def _cmd_oppq_bm(args) -> int:
    started = time.monotonic()
    spec = _spec_from(args)
    minima = oppq.bm_local_minima(spec, args.N, _window(args), digits=args.digits, grid=args.grid)
    rows = []
    with workdps(args.digits):
        for k, (x, f) in enumerate(minima):
            rows.append([args.b, k, x, mp.log10(f.value), args.N, args.digits])
    _emit(args, _common_inputs(args), ["b", "state", "E_min", "log10_lambda", "N", "digits"],
          rows, started)
    return 0


def _cmd_bounds(args) -> int:
    started = time.monotonic()
    spec = _spec_from(args)
    window = _window(args)
    orders = sorted(int(x) for x in args.N.split(","))
    top = orders[-1]
    if args.bu is not None:
        bu = to_mpf(args.bu, args.digits)
    else:
        bu = oppq.calibrate_bu(spec, window, state=args.state, N=top, grid=args.grid).value
    rows = []
    center = None
    for N in orders:
        ws = oppq.OppqWorkspace(spec, N, max(args.digits, oppq.default_digits(N)))
        minima = oppq.bm_local_minima(spec, N, window, workspace=ws, grid=args.grid)
        if args.state >= len(minima):
            raise emm.NoFeasiblePoint(f"state {args.state} not resolved at N={N}")
        center = minima[args.state][0]
        lo, hi = oppq.bm_bounds(spec, N, bu, center, workspace=ws)
        rows.append([args.b, args.state, lo, hi, N, bu, args.digits])
    _emit(args, _common_inputs(args, bu_used=_fmt(bu, 12)),
          ["b", "state", "E_L", "E_U", "N", "B_U", "digits"], rows, started)
    return 0


def _cmd_walled(args) -> int:
    started = time.monotonic()
    branch = Branch.PHYSICAL if args.branch == "physical" else Branch.UNPHYSICAL
    spec = ProblemSpec(Family.WALLED_CQ, args.b, branch=branch, digits=args.digits)
    roots = oppq.am_secular_roots(spec, args.N, _window(args), digits=args.digits, grid=args.grid)
    rows = [[args.b, k, r, args.N, args.digits] for k, r in enumerate(roots)]
    _emit(args, _common_inputs(args), ["b", "index", "E", "N", "digits"], rows, started)
    return 0


def _cmd_reconstruct(args) -> int:
    started = time.monotonic()
    if args.family == "walled":
        branch = Branch.PHYSICAL if args.branch == "physical" else Branch.UNPHYSICAL
        spec = ProblemSpec(Family.WALLED_CQ, args.b, branch=branch, digits=args.digits)
    else:
        spec = _spec_from(args)
    ws = oppq.OppqWorkspace(spec, args.N, args.digits)
    if args.E is not None:
        energy = to_mpf(args.E, args.digits)
    else:
        roots = oppq.am_secular_roots(spec, args.N, _window(args), workspace=ws, grid=args.grid)
        if args.state >= len(roots):
            raise emm.NoFeasiblePoint(f"state {args.state} not found in the window")
        energy = roots[args.state].value
    u = reconstruct.missing_moment_vector(spec, energy, args.N, mode=args.mode, workspace=ws)
    with workdps(args.digits):
        top = spec.b.value + 10
        grid = [top * k / (args.points - 1) for k in range(args.points)]
    samples = reconstruct.wavefunction_samples(
        spec, energy, u, N=min(args.terms, args.N), grid=grid, workspace=ws
    )
    rows = [
        [x, v, reconstruct.potential_value(spec, x)]
        for x, v in zip(samples.grid, samples.values)
    ]
    _emit(args, _common_inputs(args, E_used=_fmt(energy, min(args.digits, 30))),
          ["chi", "psi", "potential"], rows, started)
    return 0


def _cmd_denseness(args) -> int:
    started = time.monotonic()
    with workdps(args.digits):
        if args.xmax is not None:
            top = to_mpf(args.xmax, args.digits)
        else:
            nmax = max(2 * (args.terms - 1), 2 * args.eta + 1)
            top = mp.sqrt(2 * nmax + 1) + 5
        grid = [top * k / (args.points - 1) for k in range(args.points)]
        samples, err = reconstruct.denseness_demo(args.eta, args.terms, grid=grid, digits=args.digits)
    rows = [[x, v] for x, v in zip(samples.grid, samples.values)]
    _emit(args, _common_inputs(args, l2_error=_fmt(err, 12)), ["x", "partial_sum"], rows, started)
    return 0


def _cmd_sweep(args) -> int:
    started = time.monotonic()
    b_values = [s.strip() for s in args.b_list.split(",")]
    rows = []
    for b in b_values:
        spec = ProblemSpec(Family.SPIKED_AQ, b, gamma=args.gamma, digits=args.digits)
        roots = oppq.am_secular_roots(spec, args.N, _window(args), digits=args.digits, grid=args.grid)
        for k, r in enumerate(roots[: args.states]):
            rows.append([b, k, r, args.N])
    rows.sort(key=lambda r: (float(mpf(r[0])), r[1], r[3]))
    _emit(args, _common_inputs(args, b_list=args.b_list),
          ["b", "state", "E", "N"], rows, started)
    return 0


# -- parser -------------------------------------------------------------------


def _add_common(p, *, digits_default=None):
    p.add_argument("--digits", type=int, default=None,
                   help="decimal working precision (flag beats MOMENT_BOUNDS_DIGITS beats default)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock in JSON provenance (breaks byte-determinism)")
    p.set_defaults(_digits_default=digits_default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="moment-bounds",
        description="Eigenvalue brackets and approximants for singular half-line oscillators",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="closed-form spectra")
    p.add_argument("--family", choices=("spiked",), default="spiked")
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--n", type=int, required=True, help="highest level to print")
    _add_common(p, digits_default=50)

    p = sub.add_parser("emm", help="Hankel-positivity bracket for one state")
    p.add_argument("--b", required=True)
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--representation", choices=sorted(REPRESENTATIONS), default="phi-sigma3")
    p.add_argument("--pmax", type=int, required=True)
    p.add_argument("--window", required=True, help="lo,hi energy window")
    p.add_argument("--state", type=int, default=0)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--seed", default=None, help="energy seed known to be inside the bracket")
    p.add_argument("--no-progressive", dest="progressive", action="store_false",
                   help="single-order bracket (default ramps the order)")
    _add_common(p)

    p = sub.add_parser("oppq-am", help="secular-determinant roots")
    p.add_argument("--b", required=True)
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--window", default="0,8")
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("oppq-bm", help="nested-eigenvalue local minima")
    p.add_argument("--b", required=True)
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--window", default="0,8")
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("bounds", help="B_U level-set brackets at ascending N")
    p.add_argument("--b", required=True)
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--N", required=True, help="comma list of orders, e.g. 10,50,100,150")
    p.add_argument("--bu", default=None, help="coarse upper bound (decimal); calibrated when absent")
    p.add_argument("--state", type=int, default=0)
    p.add_argument("--window", default="0,8")
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("walled", help="walled-oscillator spectra")
    p.add_argument("--b", required=True)
    p.add_argument("--branch", choices=("physical", "unphysical"), default="physical")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--window", default="0,12")
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("reconstruct", help="wavefunction samples chi,psi,potential")
    p.add_argument("--family", choices=("spiked", "walled"), default="spiked")
    p.add_argument("--b", required=True)
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--branch", choices=("physical", "unphysical"), default="physical")
    p.add_argument("--N", type=int, default=60)
    p.add_argument("--terms", type=int, default=40, help="expansion coefficients kept")
    p.add_argument("--E", default=None, help="energy estimate (else located from --state)")
    p.add_argument("--state", type=int, default=0)
    p.add_argument("--mode", choices=("am", "bm"), default="am")
    p.add_argument("--window", default="0,12")
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--points", type=int, default=2001)
    _add_common(p)

    p = sub.add_parser("denseness", help="odd state from even states on the half line")
    p.add_argument("--eta", type=int, default=15)
    p.add_argument("--terms", type=int, default=100)
    p.add_argument("--xmax", default=None)
    p.add_argument("--points", type=int, default=801)
    _add_common(p, digits_default=40)

    p = sub.add_parser("sweep", help="AM spectra over a list of b values")
    p.add_argument("--b-list", required=True, help="comma list of wall offsets")
    p.add_argument("--gamma", default="0.75")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--window", default="0,8")
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    return ap


HANDLERS = {
    "exact": _cmd_exact,
    "emm": _cmd_emm,
    "oppq-am": _cmd_oppq_am,
    "oppq-bm": _cmd_oppq_bm,
    "bounds": _cmd_bounds,
    "walled": _cmd_walled,
    "reconstruct": _cmd_reconstruct,
    "denseness": _cmd_denseness,
    "sweep": _cmd_sweep,
}

BOUNDING_COMMANDS = {"emm", "oppq-am", "oppq-bm", "bounds", "walled"}


def _resolve_digits(args) -> None:
    if args.digits is None:
        env = os.environ.get(ENV_DIGITS)
        if env is not None:
            args.digits = int(env)
    if args.digits is None:
        args.digits = getattr(args, "_digits_default", None)
    if args.digits is None:
        if hasattr(args, "N") and args.N is not None:
            if isinstance(args.N, str):
                args.digits = oppq.default_digits(max(int(x) for x in args.N.split(",")))
            else:
                args.digits = oppq.default_digits(args.N)
        elif hasattr(args, "pmax"):
            args.digits = max(40, 2 * args.pmax)
        else:
            args.digits = 50
    if args.command in BOUNDING_COMMANDS and args.digits < 32:
        raise SystemExit("digits must be >= 32 for bounding commands")


def run(argv: list[str]) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        _resolve_digits(args)
        return HANDLERS[args.command](args)
    except IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MomentBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Wavefunction recovery from projection expansions, and the half-line
denseness demonstration for the even oscillator states.

Reconstruction truncates the expansion at a modest number of coefficients
(40 by default); the small-chi exponent and the node structure of the result
are the useful diagnostics, both exercised in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp, mpf, fdot

from .numerics import (
    MomentBoundsError,
    PrecScalar,
    smallest_eigenvalue_rows_rel,
    to_mpf,
    workdps,
)
from .problems import Family, ProblemSpec
from .oppq import OppqWorkspace


class DegenerateNullspace(MomentBoundsError):
    def __init__(self, directions):
        super().__init__("two near-null directions: state estimate is ambiguous at this N")
        self.directions = directions


@dataclass
class WaveSamples:
    """Wavefunction samples on an ascending grid, unit trapezoid L2 norm."""

    grid: list
    values: list
    spec: ProblemSpec
    E: object
    n_terms: int
    normalization: object

    def node_count(self, rel_floor="1e-6") -> int:
        """Sign changes of the sampled wavefunction away from the zero floor."""
        with workdps(50):
            floor = to_mpf(rel_floor, 50) * max(abs(v) for v in self.values)
            signs = [v for v in self.values if abs(v) > floor]
            flips = 0
            for a, b in zip(signs, signs[1:]):
                if (a > 0) != (b > 0):
                    flips += 1
            return flips


def _adjugate_null_vector(rows, digits: int):
    """Unit null vector of a (near-)singular k x k matrix via its adjugate.

    adj(A) A = det(A) I, so for rank k-1 every nonzero adjugate column spans
    the null space.  Raises DegenerateNullspace when the adjugate itself is
    negligible (rank <= k-2): two independent null directions exist.
    """
    k = len(rows)
    with workdps(digits):
        scale = max(abs(x) for r in rows for x in r)
        if scale == 0:
            raise DegenerateNullspace((None, None))
        A = [[x / scale for x in r] for r in rows]

        def det_n(M):
            n = len(M)
            if n == 1:
                return M[0][0]
            if n == 2:
                return M[0][0] * M[1][1] - M[0][1] * M[1][0]
            det = mp.zero
            sgn = 1
            for c in range(n):
                sub = [[M[r][cc] for cc in range(n) if cc != c] for r in range(1, n)]
                det += sgn * M[0][c] * det_n(sub)
                sgn = -sgn
            return det

        # adj(A)[i][j] = (-1)^(i+j) * minor with row j and column i removed
        cols = []
        norms = []
        for j in range(k):
            col = []
            for i in range(k):
                sub = [[A[r][c] for c in range(k) if c != i] for r in range(k) if r != j]
                col.append((-1) ** (i + j) * det_n(sub))
            cols.append(col)
            norms.append(mp.sqrt(fdot(col, col)))
        best = max(range(k), key=lambda j: norms[j])
        if norms[best] == 0:
            raise DegenerateNullspace((None, None))
        # degenerate when a second, independent adjugate direction is comparable
        v = [x / norms[best] for x in cols[best]]
        for j in range(k):
            if j == best or norms[j] < norms[best] * mpf("1e-8"):
                continue
            w = [x / norms[j] for x in cols[j]]
            overlap = abs(fdot(v, w))
            if overlap < mpf("0.9"):
                raise DegenerateNullspace((tuple(v), tuple(w)))
        for x in v:
            if x != 0:
                if x < 0:
                    v = [-y for y in v]
                break
        return v


def missing_moment_vector(
    spec: ProblemSpec,
    E,
    N: int,
    mode: str = "am",
    digits: int | None = None,
    workspace: OppqWorkspace | None = None,
) -> tuple:
    """Unit missing-moment tuple of an accepted energy estimate.

    mode 'am': null vector of the tail secular matrix; mode 'bm': eigenvector
    of the dyad sum at its smallest eigenvalue.  The sign is fixed so the
    first nonzero component is positive.
    """
    ws = workspace or OppqWorkspace(spec, N, digits)
    digits = ws.digits
    k = len(ws.slots)
    with workdps(digits):
        e = to_mpf(E, digits)
        if mode == "am":
            if ws.spec.family is Family.SPIKED_AQ:
                n_hi, n_lo = ws.N, ws.N - k + 1
            else:
                n_hi, n_lo = ws.N + 1, ws.N - 1
            rows = ws.lambda_rows(e, n_lo, n_hi)
            mat = []
            for r in reversed(rows):
                s = max(abs(x) for x in r)
                mat.append([x / s for x in r] if s > 0 else list(r))
            v = _adjugate_null_vector(mat, digits)
        elif mode == "bm":
            P = ws.dyad_matrix(e)
            lam = smallest_eigenvalue_rows_rel(P, max(digits - 15, 30), digits)
            shifted = [
                [P[i][j] - (lam if i == j else mp.zero) for j in range(i + 1)] for i in range(k)
            ]
            full = [[shifted[max(i, j)][min(i, j)] for j in range(k)] for i in range(k)]
            v = _adjugate_null_vector(full, digits)
        else:
            raise MomentBoundsError(f"unknown mode {mode!r}: use 'am' or 'bm'")
        return tuple(PrecScalar(x, digits) for x in v)


def potential_value(spec: ProblemSpec, chi):
    """Potential in the half-line coordinate: (gamma/chi^2 + (chi-b)^2)/2 for
    the spiked family, (chi-b)^2/2 for the walled one."""
    digits = spec.digits
    with workdps(digits):
        x = to_mpf(chi, digits)
        b = spec.b.value
        if spec.family is Family.SPIKED_AQ:
            if x == 0:
                return mp.inf
            return (spec.gamma.value / (x * x) + (x - b) ** 2) / 2
        return (x - b) ** 2 / 2


def wavefunction_samples(
    spec: ProblemSpec,
    E,
    u,
    N: int = 40,
    grid=None,
    digits: int | None = None,
    workspace: OppqWorkspace | None = None,
) -> WaveSamples:
    """Reconstruct Psi on a grid from the first N+1 projection coefficients.

    c_n = Lambda^(n) . u; the spiked configuration is rebuilt as
    chi^alpha exp(-(chi-b)^2/2) * sum c_n P_n(chi) (the chi^2 factor and the
    weight singularity combine analytically, so chi = 0 is exact), the walled
    one as exp(-chi^2/2 + b chi) * sum c_n P_n(chi).  Samples are normalized
    to unit trapezoid L2 on the emitted grid.
    """
    ws = workspace or OppqWorkspace(spec, N, digits)
    digits = ws.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        uv = [to_mpf(x, digits) for x in u]
        rows = ws.lambda_rows(e, 0, N)
        coeffs = [fdot(r, uv) for r in rows]
        if grid is None:
            top = ws.spec.b.value + 10
            grid_v = [top * k / 2000 for k in range(2001)]
        else:
            grid_v = [to_mpf(x, digits) for x in grid]
        b = ws.spec.b.value
        spiked = ws.spec.family is Family.SPIKED_AQ
        alpha = ws.spec.alpha.value if spiked else None
        vals = []
        for x in grid_v:
            acc = mp.zero
            for n in range(N + 1):
                acc += coeffs[n] * ws.basis.poly_value(n, x)
            if spiked:
                vals.append((x ** alpha if x > 0 else mp.zero) * mp.exp(-((x - b) ** 2) / 2) * acc)
            else:
                vals.append(mp.exp(-x * x / 2 + b * x) * acc)
        # trapezoid L2 normalization
        norm2 = mp.zero
        for i in range(len(grid_v) - 1):
            h = grid_v[i + 1] - grid_v[i]
            norm2 += h * (vals[i] ** 2 + vals[i + 1] ** 2) / 2
        norm = mp.sqrt(norm2)
        if norm > 0:
            vals = [v / norm for v in vals]
    return WaveSamples(grid_v, vals, ws.spec, PrecScalar(e, digits), N, PrecScalar(norm, digits))


# ---------------------------------------------------------------------------
# half-line denseness of the even oscillator states
# ---------------------------------------------------------------------------


def hermite_scaled(nmax: int, x, digits: int) -> list:
    """H_0..H_nmax at x, normalized so <H_n|exp(-x^2)|H_n> = 2 on the real line.

    These are sqrt(2) times the orthonormal Hermite polynomials; even/odd
    members then have unit L2 norm on the half line against exp(-x^2).
    """
    with workdps(digits):
        xx = to_mpf(x, digits)
        out = [mp.sqrt(2) / mp.pi ** mpf("0.25")]
        if nmax >= 1:
            out.append(mp.sqrt(2) * xx * out[0])
        for n in range(1, nmax):
            out.append(
                xx * out[n] * mp.sqrt(mpf(2) / (n + 1)) - out[n - 1] * mp.sqrt(mpf(n) / (n + 1))
            )
        return out


def denseness_demo(
    target_eta: int,
    n_terms: int,
    grid=None,
    digits: int = 40,
) -> tuple[WaveSamples, PrecScalar]:
    """Expand the odd state O_eta over even states E_eta on the half line.

    The expansion basis carries unit half-line norm; the target keeps the
    conventional 1/sqrt(2) oscillator normalization.  d_eta =
    <H_(2 eta) e^(-x^2/2) | O_target> by quadrature; returns the n_terms-term
    partial sum sampled on the grid and its L2 grid error against the exact
    target.  The error decreasing with n_terms is the denseness statement
    made quantitative.
    """
    with workdps(digits):
        nmax = max(2 * (n_terms - 1), 2 * target_eta + 1)
        xmax = mp.sqrt(2 * nmax + 1) + 5
        tscale = 1 / mp.sqrt(2)
        coeffs = []
        for eta in range(n_terms):

            def f(x, _eta=eta):
                H = hermite_scaled(max(2 * _eta, 2 * target_eta + 1), x, digits)
                return H[2 * _eta] * tscale * H[2 * target_eta + 1] * mp.exp(-x * x)

            pts = [mpf(k) * xmax / 6 for k in range(7)]
            coeffs.append(mp.quad(f, pts))
        if grid is None:
            grid_v = [xmax * k / 800 for k in range(801)]
        else:
            grid_v = [to_mpf(x, digits) for x in grid]
        vals = []
        errs2 = mp.zero
        exact_vals = []
        for x in grid_v:
            H = hermite_scaled(nmax + 1, x, digits)
            partial = fdot(coeffs, [H[2 * eta] for eta in range(n_terms)]) * mp.exp(-x * x / 2)
            vals.append(partial)
            exact_vals.append(tscale * H[2 * target_eta + 1] * mp.exp(-x * x / 2))
        l2 = mp.zero
        for i in range(len(grid_v) - 1):
            h = grid_v[i + 1] - grid_v[i]
            d0 = (vals[i] - exact_vals[i]) ** 2
            d1 = (vals[i + 1] - exact_vals[i + 1]) ** 2
            l2 += h * (d0 + d1) / 2
        err = mp.sqrt(l2)
    samples = WaveSamples(grid_v, vals, None, None, n_terms, PrecScalar(1, digits))
    return samples, PrecScalar(err, digits)


def halfline_overlap(n1: int, n2: int, digits: int = 40) -> PrecScalar:
    """<H_n1 e^(-x^2/2) | H_n2 e^(-x^2/2)> on the half line (scaled Hermites)."""
    with workdps(digits):
        nmax = max(n1, n2)
        xmax = mp.sqrt(2 * nmax + 1) + 5

        def f(x):
            H = hermite_scaled(nmax, x, digits)
            return H[n1] * H[n2] * mp.exp(-x * x)

        pts = [mpf(k) * xmax / 6 for k in range(7)]
        return PrecScalar(mp.quad(f, pts), digits)

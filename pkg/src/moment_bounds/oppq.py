"""Weighted-polynomial projection quantization.

The wavefunction configuration is expanded in P_n(chi) R(chi) with P_n
orthonormal under the positive reference weight R.  The projection
coefficients c_n are exact linear functions of the missing moments through the
generator table, c_n = Lambda^(n) . u, which supports two estimators:

* secular roots of the tail determinant Det(Lambda^(N-l1)_(l2)) ("AM"), and
* the smallest eigenvalue lambda_N(E) of the dyad sum P_N(E) = sum of
  Lambda^(n) Lambda^(n)^T, whose nested sub-level sets bracket each discrete
  state ("BM").
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from mpmath import mp, mpf, fdot

from .numerics import (
    MomentBoundsError,
    PrecScalar,
    bracketed_minimum,
    bracketed_roots,
    cholesky_rows,
    smallest_eigenvalue_rows,
    smallest_eigenvalue_rows_rel,
    to_mpf,
    workdps,
)
from .problems import (
    Family,
    MERTable,
    ProblemSpec,
    WeightMoments,
    mer_psi,
    scan_poles,
    walled_mer,
    weight_moments_spiked,
    weight_moments_walled,
)

log = logging.getLogger(__name__)


class WeightMomentsInsufficientPrecision(MomentBoundsError):
    pass


class CenterNotBelowBound(MomentBoundsError):
    pass


class NoFeasiblePoint(MomentBoundsError):
    pass


def default_digits(N: int) -> int:
    """Working precision for basis order N: Hankel conditioning costs about
    four digits per order."""
    return max(100, 4 * N + 20)


@dataclass
class OrthoBasis:
    """Triangular coefficient table xi[n][j] of orthonormal polynomials."""

    N: int
    weight: WeightMoments
    xi: list
    digits: int

    def poly_value(self, n: int, x):
        """P_n(x) by Horner on the stored coefficients."""
        with workdps(self.digits):
            acc = mp.zero
            for c in reversed(self.xi[n]):
                acc = acc * x + c
            return acc


@dataclass
class LambdaTable:
    """Projection rows Lambda^(n) for one energy, n = 0..N."""

    E: object
    N: int
    slots: tuple
    entries: list
    digits: int


@dataclass
class BoundRun:
    """Accumulated bounding data for one tracked state."""

    state_index: int
    minima: list = field(default_factory=list)    # (N, E_min, lambda_min)
    bu: object = None
    brackets: list = field(default_factory=list)  # (N, E_L, E_U)


def build_orthobasis(weight: WeightMoments, N: int) -> OrthoBasis:
    """Orthonormal polynomials of the weight from a Cholesky factorization of
    its Hankel moment matrix; column n solves C[transpose] xi = e_n.

    Raises WeightMomentsInsufficientPrecision when the Hankel matrix stops
    being numerically positive definite, which is the standard failure mode at
    large N: raise the working digits of the weight moments.
    """
    digits = weight.digits
    if len(weight.values) < 2 * N + 1:
        raise WeightMomentsInsufficientPrecision(
            f"need {2 * N + 1} weight moments for basis order {N}, have {len(weight.values)}"
        )
    with workdps(digits):
        n1 = N + 1
        rows = [[weight.values[i + j] for j in range(i + 1)] for i in range(n1)]
        L, bad = cholesky_rows(rows)
        if L is None:
            raise WeightMomentsInsufficientPrecision(
                f"weight Hankel lost positive definiteness at order {bad}; "
                f"raise digits above {digits}"
            )
        xi = []
        for n in range(n1):
            col = [mp.zero] * (n + 1)
            col[n] = 1 / L[n][n]
            for i in range(n - 1, -1, -1):
                # back-substitution in C^T: row i couples to entries i+1..n
                s = fdot([L[k][i] for k in range(i + 1, n + 1)], col[i + 1 : n + 1])
                col[i] = -s / L[i][i]
            xi.append(col)
    return OrthoBasis(N, weight, xi, digits)


def spiked_weight_for(spec: ProblemSpec, N: int, digits: int | None = None) -> WeightMoments:
    """Reference weight matched to the spec: chi^(alpha-2) Gaussian for the
    spiked family, plain shifted Gaussian for the walled family."""
    digits = spec.digits if digits is None else digits
    if spec.family is Family.SPIKED_AQ:
        return weight_moments_spiked(spec.b, spec.alpha, 2 * N + 2, digits)
    return weight_moments_walled(spec.b, 2 * N + 2, digits)


def mer_for(spec: ProblemSpec, E, pmax: int) -> MERTable:
    """Generator used by the projection: chi^-2 Psi for spiked, Psi for walled."""
    if spec.family is Family.SPIKED_AQ:
        return mer_psi(spec, E, pmax)
    return walled_mer(spec, E, pmax)


class OppqWorkspace:
    """Caches the weight moments and orthonormal basis for repeated energy scans."""

    def __init__(self, spec: ProblemSpec, N: int, digits: int | None = None):
        self.spec = spec
        self.N = N
        self.digits = spec.digits if digits is None else digits
        if spec.digits != self.digits:
            # rebuild the spec at the working precision so the MER matches
            self.spec = ProblemSpec(
                family=spec.family,
                b=spec.b.str() if isinstance(spec.b, PrecScalar) else spec.b,
                gamma=spec.gamma.str() if isinstance(spec.gamma, PrecScalar) else spec.gamma,
                representation=spec.representation if spec.family is Family.SPIKED_AQ else None,
                branch=spec.branch,
                digits=self.digits,
            )
        self.weight = spiked_weight_for(self.spec, N + 1, self.digits)
        self.basis = build_orthobasis(self.weight, N + 1)
        self.slots = (0, 1, 2, 3) if spec.family is Family.SPIKED_AQ else (-1, 0, 1)

    # -- Lambda assembly ---------------------------------------------------
    def lambda_rows(self, E, n_lo: int, n_hi: int) -> list:
        """Rows Lambda^(n) for n in [n_lo, n_hi]."""
        mer = mer_for(self.spec, E, n_hi)
        off = mer._offset
        with workdps(self.digits):
            cols = [[mer.rows[j + off][l] for j in range(n_hi + 1)] for l in range(len(self.slots))]
            out = []
            for n in range(n_lo, n_hi + 1):
                xi = self.basis.xi[n]
                out.append(tuple(fdot(xi, col[: n + 1]) for col in cols))
            return out

    def lambda_table(self, E) -> LambdaTable:
        return LambdaTable(E, self.N, self.slots, self.lambda_rows(E, 0, self.N), self.digits)

    # -- AM secular determinant ---------------------------------------------
    def am_det(self, E):
        """Row-rescaled tail determinant; positive row scaling keeps the sign."""
        k = len(self.slots)
        if self.spec.family is Family.SPIKED_AQ:
            n_hi, n_lo = self.N, self.N - k + 1
        else:
            # walled tail rows span orders N-1, N, N+1 (slot offsets -1..1)
            n_hi, n_lo = self.N + 1, self.N - 1
        rows = self.lambda_rows(E, n_lo, n_hi)
        with workdps(self.digits):
            mat = []
            for r in reversed(rows):  # order N - l1 with l1 ascending over slots
                s = max(abs(x) for x in r)
                mat.append([x / s for x in r] if s > 0 else list(r))
            return _det_small(mat)

    # -- BM dyad sum ---------------------------------------------------------
    def dyad_matrix(self, E, N: int | None = None) -> list:
        N = self.N if N is None else N
        rows = self.lambda_rows(E, 0, N)
        k = len(self.slots)
        with workdps(self.digits):
            P = [[mp.zero] * (i + 1) for i in range(k)]
            for r in rows:
                for i in range(k):
                    ri = r[i]
                    Pi = P[i]
                    for j in range(i + 1):
                        Pi[j] += ri * r[j]
            return P

    def lambda_min(self, E, N: int | None = None, rel_digits: int | None = None, tol=None):
        """Smallest dyad-sum eigenvalue; resolved to a relative width because
        the matrix entries dwarf the eigenvalue at large N."""
        P = self.dyad_matrix(E, N)
        with workdps(self.digits):
            if tol is not None:
                return smallest_eigenvalue_rows(P, to_mpf(tol, self.digits), self.digits)
            if rel_digits is None:
                rel_digits = max(self.digits - 15, 30)
            return smallest_eigenvalue_rows_rel(P, rel_digits, self.digits)


def _det_small(mat: list):
    """Determinant by fraction-free Gaussian elimination with partial pivoting."""
    n = len(mat)
    a = [row[:] for row in mat]
    det = mp.one
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(a[r][c]))
        if a[piv][c] == 0:
            return mp.zero
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if f != 0:
                for cc in range(c + 1, n):
                    a[r][cc] -= f * a[c][cc]
    return det


def lambda_table(spec: ProblemSpec, E, N: int, workspace: OppqWorkspace | None = None) -> LambdaTable:
    """Projection coefficient table Lambda_ell^(n)(E) for n = 0..N."""
    ws = workspace or OppqWorkspace(spec, N)
    return ws.lambda_table(E)


def am_secular_roots(
    spec: ProblemSpec,
    N: int,
    window: tuple,
    digits: int | None = None,
    grid: int | None = None,
    workspace: OppqWorkspace | None = None,
    diagnostics: dict | None = None,
) -> list[PrecScalar]:
    """Ascending real roots of the tail secular determinant over the window.

    Sign-change scanning drops complex pairs; near-zero dips of |Det| without
    a sign change are counted in diagnostics['suspected_complex_pairs'] and
    logged, since they usually mean a conjugate pair that a larger N splits.
    """
    ws = workspace or OppqWorkspace(spec, N, digits)
    digits = ws.digits
    k = len(ws.slots)
    if N <= 2 * (k - 1) + 2:
        raise MomentBoundsError(f"need N > {2 * (k - 1) + 2} for the {k}x{k} secular tail")
    with workdps(digits):
        lo = to_mpf(window[0], digits)
        hi = to_mpf(window[1], digits)
        if grid is None:
            grid = max(int(400 * float(hi - lo)), 40)
        poles = scan_poles(ws.spec, N)
        step = (hi - lo) / grid
        grid_points = {lo + k * step for k in range(grid + 1)}
        vals: dict = {}

        def f(E):
            d = ws.am_det(E)
            if E in grid_points:
                vals[E] = d
            return d

        roots = bracketed_roots(f, (lo, hi), grid, digits, poles=poles)
        # diagnose dips of |det| to ~0 with no sign change (suspected complex pair)
        suspected = 0
        scan = sorted(vals.items())
        for i in range(1, len(scan) - 1):
            d0, d1, d2 = abs(scan[i - 1][1]), abs(scan[i][1]), abs(scan[i + 1][1])
            same_sign = (scan[i - 1][1] > 0) == (scan[i][1] > 0) == (scan[i + 1][1] > 0)
            if same_sign and d1 < d0 * mpf("1e-6") and d1 < d2 * mpf("1e-6"):
                suspected += 1
        if suspected:
            log.warning(
                "%d near-zero |Det| dip(s) without sign change: suspected complex pair -- raise N",
                suspected,
            )
        if diagnostics is not None:
            diagnostics["suspected_complex_pairs"] = suspected
    return roots


def bm_lambda_min(
    spec: ProblemSpec,
    E,
    N: int,
    digits: int | None = None,
    workspace: OppqWorkspace | None = None,
    tol=None,
) -> PrecScalar:
    """Smallest eigenvalue of the dyad sum P_N(E) over unit missing-moment tuples."""
    ws = workspace or OppqWorkspace(spec, N, digits)
    return PrecScalar(ws.lambda_min(E, N, tol=tol), ws.digits)


def bm_local_minima(
    spec: ProblemSpec,
    N: int,
    window: tuple,
    digits: int | None = None,
    grid: int | None = None,
    workspace: OppqWorkspace | None = None,
    xtol=None,
) -> list[tuple[PrecScalar, PrecScalar]]:
    """Interior local minima of lambda_N(E) over the window, ascending in E.

    Each grid dip is refined by bracketed golden-section/parabolic descent;
    one minimum emerges per discrete state as N grows.
    """
    ws = workspace or OppqWorkspace(spec, N, digits)
    digits = ws.digits
    with workdps(digits):
        lo = to_mpf(window[0], digits)
        hi = to_mpf(window[1], digits)
        if grid is None:
            grid = max(int(400 * float(hi - lo)), 24)

        # scan at coarse relative eigen resolution, refine at full precision
        def f_coarse(E):
            return ws.lambda_min(E, N, rel_digits=30)

        def f_full(E):
            return ws.lambda_min(E, N)

        step = (hi - lo) / grid
        xs = [lo + k * step for k in range(grid + 1)]
        fs = [f_coarse(x) for x in xs]
        out = []
        for i in range(1, grid):
            if fs[i] < fs[i - 1] and fs[i] < fs[i + 1]:
                xstar, fstar = bracketed_minimum(
                    f_full, (xs[i - 1], xs[i], xs[i + 1]), digits, xtol=xtol
                )
                out.append((xstar, fstar))
        out.sort(key=lambda t: t[0].value)
        return out


def bm_bounds(
    spec: ProblemSpec,
    N: int,
    bu,
    center,
    digits: int | None = None,
    workspace: OppqWorkspace | None = None,
    xtol=None,
) -> tuple[PrecScalar, PrecScalar]:
    """Level-crossing bracket: the two solutions of lambda_N(E) = B_U around
    `center`, reported outward so that E_L < E* < E_U is preserved."""
    ws = workspace or OppqWorkspace(spec, N, digits)
    digits = ws.digits
    with workdps(digits):
        bu_v = to_mpf(bu, digits)
        c = to_mpf(center, digits)
        if xtol is None:
            xtol = mpf(10) ** (-min(digits // 2, 30))
        else:
            xtol = to_mpf(xtol, digits)

        def g(E):
            # the crossing comparison only needs lambda to modest relative depth
            return ws.lambda_min(E, N, rel_digits=45) - bu_v

        g_c = g(c)
        if not g_c < 0:
            raise CenterNotBelowBound(
                "lambda_N(center) >= B_U: raise B_U or N, or recenter on the state"
            )
        out = []
        for direction in (-1, 1):
            step = max(abs(c), mp.one) * mpf("0.05")
            inner = c
            outer = c + direction * step
            g_out = g(outer)
            tries = 0
            while g_out < 0:
                inner = outer
                step *= 2
                outer = outer + direction * step
                g_out = g(outer)
                tries += 1
                if tries > 80:
                    raise CenterNotBelowBound("no crossing found: B_U above the whole branch?")
            while abs(outer - inner) > xtol:
                mid = (inner + outer) / 2
                if g(mid) < 0:
                    inner = mid
                else:
                    outer = mid
            out.append(outer)
        return PrecScalar(out[0], digits), PrecScalar(out[1], digits)


def calibrate_bu(
    spec: ProblemSpec,
    window: tuple,
    state: int = 0,
    n_cal: int | None = None,
    N: int | None = None,
    digits: int | None = None,
    grid: int | None = None,
) -> PrecScalar:
    """Default coarse upper bound B_U: the state's minimum value at a small
    calibration order, nudged up by a factor 10^0.05.

    The minima values increase monotonically in N toward the limit, so any
    value above the limit works; the calibration order only affects how tight
    the resulting brackets are.
    """
    if n_cal is None:
        n_cal = max(30, int(2 * (N or 100) ** 0.5))
    digits = default_digits(n_cal) if digits is None else digits
    ws = OppqWorkspace(spec, n_cal, digits)
    minima = bm_local_minima(spec, n_cal, window, workspace=ws, grid=grid)
    if state >= len(minima):
        raise NoFeasiblePoint(
            f"calibration at N={n_cal} resolves only {len(minima)} minima; raise n_cal"
        )
    with workdps(digits):
        val = minima[state][1].value * mpf(10) ** mpf("0.05")
        return PrecScalar(val, digits)

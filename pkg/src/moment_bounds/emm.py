"""Eigenvalue bracketing from Hankel positivity of moment sequences.

An energy E is feasible at order pmax when some unit missing-moment tuple u
makes both shifted Hankel matrices of the generated moment sequence positive
definite.  The feasible set in E is an interval that shrinks onto the
eigenvalue as the order grows; bisecting its endpoints yields certified
brackets.

Deciding feasibility for m_s >= 1 is a tiny semidefinite feasibility problem
(u has at most four components).  It is solved by the ellipsoid method with
separating hyperplanes read off failed Cholesky pivots: every cut is exact,
"feasible" answers carry a positive-definite witness, and "infeasible" means
no ball of radius 10^(-digits/2) of unit vectors remains unrefuted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from mpmath import mp, mpf, fdot

from .numerics import (
    MomentBoundsError,
    PrecScalar,
    cholesky_rows,
    hankel,
    to_mpf,
    workdps,
)
from .problems import (
    MERTable,
    ProblemSpec,
    Representation,
    mer_psi,
    phi_mer_ms1,
    phi_moments_ms0,
    psisq_mer,
    scan_poles,
)


class NoFeasiblePoint(MomentBoundsError):
    pass


@dataclass
class FeasibilityReport:
    E: PrecScalar
    feasible: bool
    order: int
    witness: tuple | None = None
    failing_matrix: tuple | None = None  # (shift, size) for deterministic failures
    stalled: bool = False                # iteration budget exhausted before certification


@dataclass
class EnergyInterval:
    E_L: PrecScalar
    E_U: PrecScalar
    method: str
    order: int
    state_index: int = 0

    @property
    def width(self) -> PrecScalar:
        return self.E_U - self.E_L

    def contains(self, x) -> bool:
        v = to_mpf(x, self.E_L.digits)
        return self.E_L.value <= v <= self.E_U.value


MS_BY_REPRESENTATION = {
    Representation.PHI_SIGMA3: 0,
    Representation.PHI_SIGMA0: 1,
    Representation.PSI_TILDE: 3,
    Representation.PSI_SQUARED: 3,
}


def hh_size(pmax: int, shift: int) -> int:
    """Hankel size used at order pmax: floor((pmax - shift)/2) + 1."""
    return (pmax - shift) // 2 + 1


def stieltjes_feasible(moments, size: int, digits: int | None = None) -> bool:
    """Stieltjes condition at one size: Hankel(shift 0) and Hankel(shift 1)
    both Cholesky-positive (after symmetric diagonal rescaling)."""
    if digits is None:
        digits = max((m.digits for m in moments if isinstance(m, PrecScalar)), default=30)
    for shift in (0, 1):
        h = hankel(moments, shift, size, digits)
        if _rescaled_bad_pivot(h.rows, digits) is not None:
            return False
    return True


def _rescaled_bad_pivot(rows, digits: int, eps=None):
    """First failing pivot index of D H D (D from diagonal entries), or None."""
    with workdps(digits):
        n = len(rows)
        d = []
        for i in range(n):
            x = rows[i][i]
            if not x > 0:
                return i
            d.append(1 / mp.sqrt(x))
        scaled = [[rows[i][j] * d[i] * d[j] for j in range(i + 1)] for i in range(n)]
        L, bad = cholesky_rows(scaled, threshold=eps)
        return bad


# ---------------------------------------------------------------------------
# the m_s >= 1 feasibility oracle
# ---------------------------------------------------------------------------


class HHOracle:
    """Feasibility of {u != 0 : both Hankel pencils H(u) positive definite}.

    The pencil blocks are linear in u, so the feasible set is a convex cone;
    its section by the unit ball is decided by the ellipsoid method.  A failed
    Cholesky at pivot k yields x with x' H(u) x <= 0, hence the valid cut
    c . u >= 0 with c_l = x' H_l x, violated at the query point.

    The oracle is stateful: the last certified witness is tried first, which
    makes feasible queries near a previous one essentially free.
    """

    def __init__(self, nmiss: int, digits: int, max_iter: int = 20000):
        self.nmiss = nmiss
        self.digits = digits
        self.max_iter = max_iter
        self.witness: list | None = None
        self.stalled = False

    # -- block assembly ----------------------------------------------------
    def blocks(self, mer: MERTable, pmax: int) -> list:
        """Diagonally rescaled Hankel pencil blocks for both shifts."""
        nm = self.nmiss
        off = mer._offset
        with workdps(self.digits):
            out = []
            for shift in (0, 1):
                size = hh_size(pmax, shift)
                Hl = [
                    [[mer.rows[i + j + shift + off][l] for j in range(size)] for i in range(size)]
                    for l in range(nm)
                ]
                d = []
                for i in range(size):
                    m_ = max(abs(Hl[l][i][i]) for l in range(nm))
                    d.append(1 / mp.sqrt(m_) if m_ > 0 else mp.one)
                out.append(
                    [
                        [[Hl[l][i][j] * d[i] * d[j] for j in range(size)] for i in range(size)]
                        for l in range(nm)
                    ]
                )
            return out

    def _pencil_at(self, Hs, u, eps=None):
        """(lower rows of H(u), first bad pivot index or None)."""
        nm = self.nmiss
        size = len(Hs[0])
        rows = [[fdot([Hs[l][i][j] for l in range(nm)], u) for j in range(i + 1)] for i in range(size)]
        L, bad = cholesky_rows(rows, threshold=eps)
        return rows, bad

    def _cut_at(self, Hs_list, u, eps):
        """None when u certifies both blocks; otherwise a separating cut c."""
        nm = self.nmiss
        for Hs in Hs_list:
            size = len(Hs[0])
            rows, bad = self._pencil_at(Hs, u, eps)
            if bad is None:
                continue
            # certificate x with x' H(u) x <= eps-margin: rebuild the partial factor
            L = [[mp.zero] * (i + 1) for i in range(bad + 1)]
            for i in range(bad + 1):
                for j in range(i):
                    L[i][j] = (rows[i][j] - fdot(L[i][:j], L[j][:j])) / L[j][j]
                if i < bad:
                    L[i][i] = mp.sqrt(rows[i][i] - fdot(L[i][:i], L[i][:i]))
            x = [mp.zero] * size
            x[bad] = mp.one
            for k in range(bad - 1, -1, -1):
                x[k] = -fdot([L[j][k] for j in range(k + 1, bad + 1)], x[k + 1 : bad + 1]) / L[k][k]
            cut = []
            for l in range(nm):
                Hl = Hs[l]
                cut.append(fdot(x, [fdot(Hl[i][:], x) for i in range(size)]))
            return cut
        return None

    def decide(self, mer: MERTable, pmax: int) -> tuple[bool, list | None]:
        """(feasible, witness).  Infeasible answers mean: no ball of unit
        directions of radius 10^(-digits/2) survives the cut sequence.

        Every central cut scales det(shape) by the fixed factor
        (n^2/(n^2-1))^n (1 - 2/(n+1)), so the volume criterion translates to
        an exact iteration budget: once the ellipsoid volume drops below that
        of a stop-radius ball, no feasible cap of that radius can remain.
        """
        self.stalled = False
        nm = self.nmiss
        with workdps(self.digits):
            eps = mpf(10) ** (-(self.digits // 2))
            Hs_list = self.blocks(mer, pmax)
            if self.witness is not None:
                if self._cut_at(Hs_list, self.witness, eps) is None:
                    return True, list(self.witness)
            # ellipsoid over the unit ball in u-space
            n = nm
            nn = mpf(n)
            center = [mp.zero] * n
            shape = [[mp.one if i == j else mp.zero for j in range(n)] for i in range(n)]
            coef = nn * nn / (nn * nn - 1)
            logdet_step = float(n * mp.log(coef) + mp.log(1 - 2 / (nn + 1)))
            needed = int(2 * n * float(mp.log(eps)) / logdet_step) + 8
            budget = min(needed, self.max_iter)
            for _ in range(budget):
                # the center probe is always a valid cut point: the certificate
                # satisfies c . center = x' H(center) x <= eps by construction
                cut = self._cut_at(Hs_list, center, eps)
                if cut is None:
                    norm = mp.sqrt(fdot(center, center))
                    self.witness = [x / norm for x in center]
                    return True, list(self.witness)
                g = [-x for x in cut]
                Pg = [fdot(shape[i], g) for i in range(n)]
                gPg = fdot(g, Pg)
                if not gPg > 0:
                    return False, None
                root = mp.sqrt(gPg)
                bvec = [x / root for x in Pg]
                center = [center[i] - bvec[i] / (nn + 1) for i in range(n)]
                for i in range(n):
                    si = shape[i]
                    for j in range(n):
                        si[j] = coef * (si[j] - 2 / (nn + 1) * bvec[i] * bvec[j])
            if budget == self.max_iter and needed > self.max_iter:
                self.stalled = True
            return False, None


def _sweep_witness_ms1(oracle: HHOracle, Hs_list, digits: int):
    """Angle sweep for the two-component case: 2048 directions in float64 on
    the rescaled blocks, golden refinement, then exact certification."""
    mats = []
    for Hs in Hs_list:
        size = len(Hs[0])
        mats.append(
            [np.array([[float(Hs[l][i][j]) for j in range(size)] for i in range(size)]) for l in range(2)]
        )

    def val(theta: float) -> float:
        c, s = math.cos(theta), math.sin(theta)
        return min(float(np.linalg.eigvalsh(c * M[0] + s * M[1])[0]) for M in mats)

    npts = 2048
    best_k = max(range(npts), key=lambda k: val(2 * math.pi * k / npts))
    a = 2 * math.pi * (best_k - 1) / npts
    b = 2 * math.pi * (best_k + 1) / npts
    invphi = (math.sqrt(5) - 1) / 2
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = val(x1), val(x2)
    for _ in range(80):
        if f1 > f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = val(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = val(x2)
    theta = (a + b) / 2
    with workdps(digits):
        t = mpf(repr(theta))
        return [mp.cos(t), mp.sin(t)]


def feasible_fixed_E(
    spec: ProblemSpec,
    E,
    pmax: int,
    digits: int | None = None,
    oracle: HHOracle | None = None,
) -> FeasibilityReport:
    """Hankel-Hadamard feasibility of one energy at one order.

    m_s = 0: the ladder is deterministic, so the Stieltjes test applies as is.
    m_s >= 1: existence of a unit missing-moment tuple, decided by HHOracle
    (the angle sweep pre-seeds the two-component case).
    """
    digits = spec.digits if digits is None else digits
    rep = spec.representation
    ms = MS_BY_REPRESENTATION[rep] if rep in MS_BY_REPRESENTATION else 2
    e_ps = PrecScalar(to_mpf(E, digits), digits)

    if ms == 0:
        tau = phi_moments_ms0(spec, E, pmax)
        with workdps(digits):
            for shift in (0, 1):
                size = hh_size(pmax, shift)
                rows = [[tau[i + j + shift] for j in range(i + 1)] for i in range(size)]
                bad = _rescaled_bad_pivot(rows, digits)
                if bad is not None:
                    return FeasibilityReport(e_ps, False, pmax, failing_matrix=(shift, size))
        return FeasibilityReport(e_ps, True, pmax)

    if rep is Representation.PHI_SIGMA0:
        mer = phi_mer_ms1(spec, E, pmax)
    elif rep is Representation.PSI_SQUARED:
        mer = psisq_mer(spec, E, pmax)
    else:
        mer = mer_psi(spec, E, pmax)

    orc = oracle or HHOracle(ms + 1, digits)
    with workdps(digits):
        if ms == 1 and orc.witness is None:
            Hs_list = orc.blocks(mer, pmax)
            cand = _sweep_witness_ms1(orc, Hs_list, digits)
            if orc._cut_at(Hs_list, cand, mpf(10) ** (-(digits // 2))) is None:
                orc.witness = cand
                return FeasibilityReport(e_ps, True, pmax, witness=tuple(cand))
        ok, wit = orc.decide(mer, pmax)
    return FeasibilityReport(
        e_ps, ok, pmax, witness=tuple(wit) if wit else None, stalled=orc.stalled
    )


def emm_energy_interval(
    spec: ProblemSpec,
    pmax: int,
    window: tuple,
    state: int = 0,
    digits: int | None = None,
    grid: int | None = None,
    resolution=None,
    oracle: HHOracle | None = None,
    seed=None,
) -> EnergyInterval:
    """Bracket one feasible component: grid-scan for a feasible seed, then
    bisect outward to both feasibility boundaries.

    The window must contain exactly one feasible component (the targeted
    state's).  Reported endpoints are the outermost infeasible abscissae, so
    the true eigenvalue lies strictly inside.
    """
    digits = spec.digits if digits is None else digits
    rep = spec.representation
    ms = MS_BY_REPRESENTATION[rep] if rep in MS_BY_REPRESENTATION else 2
    if oracle is None and ms >= 1:
        oracle = HHOracle(ms + 1, digits)

    def feasible(E) -> bool:
        try:
            return feasible_fixed_E(spec, E, pmax, digits=digits, oracle=oracle).feasible
        except MomentBoundsError:
            return False

    with workdps(digits):
        lo = to_mpf(window[0], digits)
        hi = to_mpf(window[1], digits)
        res = mpf(10) ** (-(digits // 2)) if resolution is None else to_mpf(resolution, digits)
        poles = [to_mpf(p, digits) for p in scan_poles(spec, pmax)]
        skip = mpf("1e-6")
        found = None
        if seed is not None:
            s = to_mpf(seed, digits)
            if lo < s < hi and feasible(s):
                found = s
        if found is None:
            if grid is None:
                grid = max(int(400 * float(hi - lo)), 40)
            step = (hi - lo) / grid
            for k in range(grid + 1):
                x = lo + k * step
                if any(abs(x - p) < skip for p in poles):
                    continue
                if feasible(x):
                    found = x
                    break
        if found is None:
            raise NoFeasiblePoint(
                f"no feasible energy on ({float(lo)}, {float(hi)}) at order {pmax}: "
                "raise pmax, refine the window, or pass a seed"
            )
        wit = list(oracle.witness) if oracle is not None and oracle.witness else None
        bounds = []
        for outer0, direction in ((lo, -1), (hi, 1)):
            inner, outer = found, outer0
            if oracle is not None and wit is not None:
                oracle.witness = list(wit)
            while abs(inner - outer) > res:
                mid = (inner + outer) / 2
                if feasible(mid):
                    inner = mid
                else:
                    outer = mid
            bounds.append(outer)
    return EnergyInterval(
        PrecScalar(bounds[0], digits),
        PrecScalar(bounds[1], digits),
        method=f"emm-{rep.value if rep else spec.family.value}",
        order=pmax,
        state_index=state,
    )


def emm_progressive(
    spec: ProblemSpec,
    pmax: int,
    window: tuple,
    state: int = 0,
    digits: int | None = None,
    grid: int | None = None,
    resolution=None,
    seed=None,
) -> EnergyInterval:
    """Order ladder: bracket at a low order, then re-bracket at increasing
    orders inside the previous interval (feasible sets are nested, so the
    target component never escapes).  Needed because high-order feasible sets
    are far narrower than any practical scan grid."""
    digits = spec.digits if digits is None else digits
    rep = spec.representation
    ms = MS_BY_REPRESENTATION[rep] if rep in MS_BY_REPRESENTATION else 2
    oracle = HHOracle(ms + 1, digits) if ms >= 1 else None
    start = max(ms + 2, 2)
    order_step = 1 if ms == 0 else 2
    with workdps(digits):
        lo = to_mpf(window[0], digits)
        hi = to_mpf(window[1], digits)
        res_final = mpf(10) ** (-(digits // 2)) if resolution is None else to_mpf(resolution, digits)

        if seed is not None and ms >= 1:
            # ramp the witness up the order ladder at the seed; if it stays
            # feasible all the way, only the final order needs bisection
            s = to_mpf(seed, digits)
            ramped = True
            for order in list(range(start, pmax, order_step)) + [pmax]:
                if not feasible_fixed_E(spec, s, order, digits=digits, oracle=oracle).feasible:
                    ramped = False
                    break
            if ramped:
                return emm_energy_interval(
                    spec, pmax, (lo, hi), state=state, digits=digits, grid=grid,
                    resolution=res_final, oracle=oracle, seed=s,
                )
            oracle = HHOracle(ms + 1, digits)

        interval = None
        orders = list(range(start, pmax, order_step)) + [pmax]
        res_floor = mpf(10) ** (-(digits // 2))
        for order in orders:
            # intermediate brackets must stay tight regardless of the caller's
            # reporting resolution: the next order's component can be far
            # narrower than a loosely resolved bracket
            res = res_final if order == pmax else max(res_floor, (hi - lo) * mpf("1e-4"))
            attempt_grid = grid
            for _ in range(3):
                try:
                    interval = emm_energy_interval(
                        spec,
                        order,
                        (lo, hi),
                        state=state,
                        digits=digits,
                        grid=attempt_grid,
                        resolution=res,
                        oracle=oracle,
                        seed=seed,
                    )
                    break
                except NoFeasiblePoint:
                    # narrower component than the scan resolved: refine the grid
                    attempt_grid = 10 * (attempt_grid or max(int(400 * float(hi - lo)), 40))
            else:
                raise NoFeasiblePoint(
                    f"lost the feasible component at order {order} inside "
                    f"({float(lo)}, {float(hi)})"
                )
            pad = (interval.E_U.value - interval.E_L.value) * mpf("0.02") + res
            lo = interval.E_L.value - pad
            hi = interval.E_U.value + pad
            seed = (interval.E_L.value + interval.E_U.value) / 2
        return EnergyInterval(interval.E_L, interval.E_U, interval.method, pmax, state)

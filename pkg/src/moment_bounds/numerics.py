"""Precision-parameterized scalar arithmetic and the small dense kernels built on it.

Everything here works at a caller-chosen decimal working precision (``digits``)
on top of mpmath.  The heavy users (Hankel matrices of rapidly growing moment
sequences) lose roughly four digits per basis order to cancellation, so the
usual working precision is in the hundreds of digits.  All routines are pure
functions of their inputs.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from mpmath import mp, mpf, fdot

MIN_DIGITS = 16
# extra scratch digits used inside kernels so that results are good at `digits`
GUARD_DPS = 10


class MomentBoundsError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(MomentBoundsError):
    def __init__(self, index: int):
        super().__init__(f"non-positive pivot at index {index}")
        self.index = index


class InvalidMatrix(MomentBoundsError):
    pass


class InvalidTolerance(MomentBoundsError):
    pass


class InvalidWindow(MomentBoundsError):
    pass


class NotAMinimumBracket(MomentBoundsError):
    pass


class NonIntegrableSingularity(MomentBoundsError):
    pass


class IndexOutOfRange(MomentBoundsError):
    pass


def workdps(digits: int):
    """mpmath context at the working precision for `digits` plus guard digits."""
    return mp.workdps(int(digits) + GUARD_DPS)


def to_mpf(x, digits: int):
    """Convert x to mpf at the given precision.

    Strings and integers convert exactly (no float64 round-trip); PrecScalar
    unwraps to its carried value.
    """
    if isinstance(x, PrecScalar):
        return x.value
    with workdps(digits):
        return mpf(x)


class PrecScalar:
    """A real number carried together with its decimal working precision.

    Arithmetic between two PrecScalars runs at the larger of the two digit
    settings; mixing with plain numbers/strings converts them exactly first.
    """

    __slots__ = ("value", "digits")

    def __init__(self, value, digits: int = MIN_DIGITS):
        digits = int(digits)
        if digits < MIN_DIGITS:
            raise InvalidTolerance(f"digits must be >= {MIN_DIGITS}, got {digits}")
        self.digits = digits
        if isinstance(value, PrecScalar):
            value = value.value
        with workdps(digits):
            self.value = mpf(value)

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other) -> tuple:
        if isinstance(other, PrecScalar):
            return other.value, max(self.digits, other.digits)
        return to_mpf(other, self.digits), self.digits

    def _binop(self, other, op):
        o, d = self._coerce(other)
        with workdps(d):
            return PrecScalar(op(self.value, o), d)

    def __add__(self, other):
        return self._binop(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binop(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binop(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binop(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binop(other, lambda a, b: b / a)

    def __neg__(self):
        return PrecScalar(-self.value, self.digits)

    def __abs__(self):
        return PrecScalar(abs(self.value), self.digits)

    def sqrt(self):
        with workdps(self.digits):
            return PrecScalar(mp.sqrt(self.value), self.digits)

    def exp(self):
        with workdps(self.digits):
            return PrecScalar(mp.exp(self.value), self.digits)

    def ln(self):
        with workdps(self.digits):
            return PrecScalar(mp.log(self.value), self.digits)

    # -- comparisons (exact on the carried values) -----------------------
    def _cmp_val(self, other):
        return other.value if isinstance(other, PrecScalar) else to_mpf(other, self.digits)

    def __eq__(self, other):
        return self.value == self._cmp_val(other)

    def __lt__(self, other):
        return self.value < self._cmp_val(other)

    def __le__(self, other):
        return self.value <= self._cmp_val(other)

    def __gt__(self, other):
        return self.value > self._cmp_val(other)

    def __ge__(self, other):
        return self.value >= self._cmp_val(other)

    def __hash__(self):
        return hash(self.value)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        with workdps(self.digits):
            return f"PrecScalar({mp.nstr(self.value, min(self.digits, 25))}, digits={self.digits})"

    def str(self, n: int | None = None) -> str:
        """Decimal string with n significant figures (default: all carried digits)."""
        n = self.digits if n is None else n
        with mp.workdps(n + 5):
            return mp.nstr(self.value, n)


class SymMatrix:
    """Dense symmetric matrix stored as the lower triangle of mpf entries."""

    __slots__ = ("dimension", "rows", "digits")

    def __init__(self, rows: list, digits: int):
        if not rows:
            raise InvalidMatrix("dimension must be >= 1")
        self.dimension = len(rows)
        for i, r in enumerate(rows):
            if len(r) != i + 1:
                raise InvalidMatrix("rows must form a lower triangle")
        self.rows = rows
        self.digits = int(digits)

    @classmethod
    def from_fn(cls, n: int, fn: Callable[[int, int], object], digits: int) -> "SymMatrix":
        with workdps(digits):
            rows = [[mpf(fn(i, j)) for j in range(i + 1)] for i in range(n)]
        return cls(rows, digits)

    @classmethod
    def identity(cls, n: int, digits: int = MIN_DIGITS) -> "SymMatrix":
        return cls([[mp.one if i == j else mp.zero for j in range(i + 1)] for i in range(n)], digits)

    @classmethod
    def diagonal(cls, entries: Sequence, digits: int = MIN_DIGITS) -> "SymMatrix":
        with workdps(digits):
            vals = [mpf(e.value if isinstance(e, PrecScalar) else e) for e in entries]
        return cls([[vals[i] if i == j else mp.zero for j in range(i + 1)] for i in range(len(vals))], digits)

    def entry(self, i: int, j: int):
        if j > i:
            i, j = j, i
        return self.rows[i][j]

    def scalar_entry(self, i: int, j: int) -> PrecScalar:
        return PrecScalar(self.entry(i, j), self.digits)

    def max_abs(self):
        return max(abs(x) for r in self.rows for x in r)

    def check_finite(self):
        for r in self.rows:
            for x in r:
                if not mp.isfinite(x):
                    raise InvalidMatrix("non-finite matrix entry")


def cholesky_rows(rows: list, threshold=None) -> tuple[list | None, int | None]:
    """Cholesky of a lower-triangular row list.  Returns (L, None) on success or
    (None, i) at the first pivot index whose value is not above `threshold`
    (default: zero).  Must run inside a workdps context."""
    n = len(rows)
    thr = mp.zero if threshold is None else threshold
    L = [[mp.zero] * (i + 1) for i in range(n)]
    for i in range(n):
        Li = L[i]
        ri = rows[i]
        for j in range(i):
            Li[j] = (ri[j] - fdot(Li[:j], L[j][:j])) / L[j][j]
        s = ri[i] - fdot(Li[:i], Li[:i])
        if s <= thr:
            return None, i
        Li[i] = mp.sqrt(s)
    return L, None


def cholesky(m: SymMatrix) -> SymMatrix:
    """Lower-triangular L with L L^T = m.  Raises NotPositiveDefinite(index) at
    the first non-positive pivot."""
    m.check_finite()
    with workdps(m.digits):
        L, bad = cholesky_rows(m.rows)
    if L is None:
        raise NotPositiveDefinite(bad)
    return SymMatrix(L, m.digits)


def try_cholesky(m: SymMatrix) -> tuple[SymMatrix | None, int | None]:
    """Non-raising variant of cholesky: (L, None) or (None, first bad pivot index)."""
    m.check_finite()
    with workdps(m.digits):
        L, bad = cholesky_rows(m.rows)
    return (SymMatrix(L, m.digits) if L is not None else None), bad


def gershgorin_bounds(m: SymMatrix) -> tuple:
    """(lower, upper) bounds on the spectrum from Gershgorin discs."""
    with workdps(m.digits):
        lo = None
        hi = None
        n = m.dimension
        for i in range(n):
            center = m.entry(i, i)
            radius = mp.zero
            for j in range(n):
                if j != i:
                    radius += abs(m.entry(i, j))
            lo = center - radius if lo is None else min(lo, center - radius)
            hi = center + radius if hi is None else max(hi, center + radius)
        return lo, hi


def smallest_eigenvalue_rows(rows: list, tol, digits: int):
    """Raw-row variant of smallest_eigenvalue; runs its own workdps context."""
    n = len(rows)
    with workdps(digits):
        lo = None
        hi = None
        for i in range(n):
            center = rows[i][i]
            radius = mp.zero
            for j in range(n):
                radius += abs(rows[i][j]) if j < i else (abs(rows[j][i]) if j > i else mp.zero)
            lo = center - radius if lo is None else min(lo, center - radius)
            hi = center if hi is None else min(hi, center)

        def pd_shifted(s):
            shifted = [[rows[i][j] - (s if i == j else mp.zero) for j in range(i + 1)] for i in range(n)]
            L, _ = cholesky_rows(shifted)
            return L is not None

        # lo is PD-side by construction; guard against equality artifacts
        while not pd_shifted(lo):
            lo -= max(abs(lo), mp.one)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if pd_shifted(mid):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def smallest_eigenvalue_rows_rel(rows: list, rel_digits: int, digits: int):
    """Smallest eigenvalue to a RELATIVE width 10^(-rel_digits), with an
    absolute floor at the round-off level of the matrix scale.

    Needed where matrix entries dwarf the eigenvalue itself (dyad sums of
    rapidly growing projection rows), so a fixed absolute tolerance would
    either stop the bisection immediately or never."""
    n = len(rows)
    with workdps(digits):
        scale = max(abs(rows[i][j]) for i in range(n) for j in range(i + 1))
        floor = scale * mpf(10) ** (-(digits + 5))
        rel = mpf(10) ** (-rel_digits)
        lo = None
        hi = None
        for i in range(n):
            center = rows[i][i]
            radius = mp.zero
            for j in range(n):
                radius += abs(rows[i][j]) if j < i else (abs(rows[j][i]) if j > i else mp.zero)
            lo = center - radius if lo is None else min(lo, center - radius)
            hi = center if hi is None else min(hi, center)

        def pd_shifted(s):
            shifted = [[rows[i][j] - (s if i == j else mp.zero) for j in range(i + 1)] for i in range(n)]
            L, _ = cholesky_rows(shifted)
            return L is not None

        while not pd_shifted(lo):
            lo -= max(abs(lo), mp.one)
        while True:
            mid = (lo + hi) / 2
            width = hi - lo
            if width <= max(rel * abs(mid), floor):
                return mid
            if pd_shifted(mid):
                lo = mid
            else:
                hi = mid


def smallest_eigenvalue(m: SymMatrix, tol: PrecScalar) -> PrecScalar:
    """Smallest eigenvalue of a symmetric matrix to within +-tol.

    Bisection on the shift s: m - s*I is positive definite exactly when
    s < lambda_min, with Cholesky as the definiteness test and the initial
    bracket from Gershgorin bounds.
    """
    tval = tol.value if isinstance(tol, PrecScalar) else to_mpf(tol, m.digits)
    if not tval > 0:
        raise InvalidTolerance("tol must be > 0")
    m.check_finite()
    return PrecScalar(smallest_eigenvalue_rows(m.rows, tval, m.digits), m.digits)


def hankel(moments: Sequence, shift: int, size: int, digits: int | None = None) -> SymMatrix:
    """Hankel matrix entry(i,j) = moments[i+j+shift] (0-indexed)."""
    if size < 1:
        raise InvalidMatrix("size must be >= 1")
    need = 2 * (size - 1) + shift + 1
    if len(moments) < need:
        raise IndexOutOfRange(f"need {need} moments for shift={shift}, size={size}; got {len(moments)}")
    if digits is None:
        digits = max((m.digits for m in moments if isinstance(m, PrecScalar)), default=MIN_DIGITS)
    vals = [to_mpf(m, digits) for m in moments]
    return SymMatrix([[vals[i + j + shift] for j in range(i + 1)] for i in range(size)], digits)


def _brent_root(f, a, b, fa, fb, xtol):
    """Bracket-preserving Brent refinement of a sign change on [a, b]."""
    c, fc = a, fa
    d = e = b - a
    while True:
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = xtol / 2
        mid = (c - b) / 2
        if abs(mid) <= tol or fb == 0:
            return b
        if abs(e) < tol or abs(fa) <= abs(fb):
            d = e = mid
        else:
            s = fb / fa
            if a == c:
                p = 2 * mid * s
                q = 1 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2 * mid * q * (q - r) - (b - a) * (r - 1))
                q = (q - 1) * (r - 1) * (s - 1)
            if p > 0:
                q = -q
            p = abs(p)
            if 2 * p < min(3 * mid * q - abs(tol * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = e = mid
        a, fa = b, fb
        b = b + (d if abs(d) > tol else (tol if mid > 0 else -tol))
        fb = f(b)
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a


def bracketed_roots(
    f: Callable,
    window: tuple,
    grid: int,
    digits: int,
    poles: Iterable = (),
    pole_skip=None,
    xtol=None,
) -> list[PrecScalar]:
    """Sign-change scan over a uniform grid followed by bracketed refinement.

    f takes and returns mpf.  Grid points inside `pole_skip` of a registered
    pole abscissa are skipped.  Even-multiplicity roots produce no sign change
    and are not returned.  Roots are refined to `xtol` (default 10^(6-digits))
    and returned ascending.
    """
    lo = to_mpf(window[0], digits)
    hi = to_mpf(window[1], digits)
    if not lo < hi:
        raise InvalidWindow(f"need lo < hi, got ({lo}, {hi})")
    if grid < 2:
        raise InvalidWindow("grid must be >= 2")
    with workdps(digits):
        skip = mpf("1e-6") if pole_skip is None else to_mpf(pole_skip, digits)
        tol = mpf(10) ** (6 - digits) if xtol is None else to_mpf(xtol, digits)
        pole_vals = [to_mpf(p, digits) for p in poles]
        step = (hi - lo) / grid
        roots = []
        prev_x = None
        prev_f = None
        pending_zero = None  # exact grid zero awaiting a sign check on both sides
        for k in range(grid + 1):
            x = lo + k * step
            if any(abs(x - p) < skip for p in pole_vals):
                prev_x = prev_f = pending_zero = None
                continue
            fx = f(x)
            if not mp.isfinite(fx):
                prev_x = prev_f = pending_zero = None
                continue
            after_zero = False
            if pending_zero is not None:
                zx, before = pending_zero
                # sign change across the exact zero means odd multiplicity
                if fx != 0 and before is not None and (fx > 0) != (before > 0):
                    roots.append(zx)
                pending_zero = None
                after_zero = True
            if fx == 0:
                pending_zero = (x, prev_f)
            elif not after_zero and prev_f is not None and fx * prev_f < 0:
                roots.append(_brent_root(f, prev_x, x, prev_f, fx, tol))
            if fx != 0:
                prev_x, prev_f = x, fx
            else:
                prev_x = x
        roots.sort()
        return [PrecScalar(r, digits) for r in roots]


def bracketed_minimum(f: Callable, triple: tuple, digits: int, xtol=None) -> tuple[PrecScalar, PrecScalar]:
    """Refine a bracketed local minimum a < b < c with f(b) < f(a), f(b) < f(c).

    Golden-section steps with parabolic acceleration (Brent), to abscissa
    accuracy `xtol` (default 10^(-digits/2)).  Returns (x*, f(x*)).
    """
    with workdps(digits):
        a = to_mpf(triple[0], digits)
        b = to_mpf(triple[1], digits)
        c = to_mpf(triple[2], digits)
        if not (a < b < c):
            raise NotAMinimumBracket(f"need a < b < c, got ({a}, {b}, {c})")
        fa, fb, fc = f(a), f(b), f(c)
        if not (fb < fa and fb < fc):
            raise NotAMinimumBracket("need f(b) < f(a) and f(b) < f(c)")
        tol = mpf(10) ** (-(digits // 2)) if xtol is None else to_mpf(xtol, digits)
        cgold = (3 - mp.sqrt(5)) / 2
        x = w = v = b
        fx = fw = fv = fb
        d = e = mp.zero
        lo, hi = a, c
        for _ in range(10000):
            m_ = (lo + hi) / 2
            tol1 = tol / 2 + mp.mpf("1e-30") * abs(x)
            if abs(x - m_) <= 2 * tol1 - (hi - lo) / 2:
                break
            use_golden = True
            if abs(e) > tol1:
                r = (x - w) * (fx - fv)
                q = (x - v) * (fx - fw)
                p = (x - v) * q - (x - w) * r
                q = 2 * (q - r)
                if q > 0:
                    p = -p
                q = abs(q)
                etemp = e
                e = d
                if not (abs(p) >= abs(q * etemp) / 2 or p <= q * (lo - x) or p >= q * (hi - x)):
                    d = p / q
                    u = x + d
                    if u - lo < 2 * tol1 or hi - u < 2 * tol1:
                        d = tol1 if m_ > x else -tol1
                    use_golden = False
            if use_golden:
                e = (hi - x) if x < m_ else (lo - x)
                d = cgold * e
            u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
            fu = f(u)
            if fu <= fx:
                if u >= x:
                    lo = x
                else:
                    hi = x
                v, w, x = w, x, u
                fv, fw, fx = fw, fx, fu
            else:
                if u < x:
                    lo = u
                else:
                    hi = u
                if fu <= fw or w == x:
                    v, w = w, u
                    fv, fw = fw, fu
                elif fu <= fv or v == x or v == w:
                    v, fv = u, fu
        return PrecScalar(x, digits), PrecScalar(fx, digits)


def guard_digit_audit(compute: Callable, digits: int, extra: int = 20):
    """Recompute at digits + extra and report how many leading digits agree.

    The bounds produced here are exact statements in exact arithmetic; this
    audit is the stand-in for directed rounding: rerun the same pure
    computation with guard digits and count the stable digits.
    Returns (value_at_higher_precision, agreed_digits).
    """
    base = compute(digits)
    high = compute(digits + extra)
    b = base.value if isinstance(base, PrecScalar) else base
    h = high.value if isinstance(high, PrecScalar) else high
    with workdps(digits + extra):
        if b == h:
            return high, digits + extra
        denom = max(abs(h), mpf(10) ** (-(digits + extra)))
        rel = abs(b - h) / denom
        agreed = int(-mp.log10(rel)) if rel > 0 else digits + extra
        return high, max(agreed, 0)


def singular_integral(f: Callable, origin_power, decay_center, digits: int) -> PrecScalar:
    """Half-line integral of f(chi) ~ chi^origin_power * analytic near 0 with
    Gaussian decay exp(-(chi-b)^2/2) around `decay_center` at infinity.

    The substitution chi = t^2 regularizes the origin; the tail is truncated
    where the Gaussian envelope falls below 10^(-digits-5).
    """
    with workdps(digits):
        power = to_mpf(origin_power, digits)
        if not power > -1:
            raise NonIntegrableSingularity(f"origin power {power} <= -1")
        b = to_mpf(decay_center, digits)
        # envelope < 10^-(digits+5) once (t^2-b)^2/2 > (digits+5) ln 10
        cut = mp.sqrt(2 * (digits + 5) * mp.log(10))
        tmax = mp.sqrt(b + cut + 2)

        def g(t):
            return 2 * t * f(t * t)

        pts = [mp.zero]
        peak = mp.sqrt(b) if b > 1 else mp.one
        if peak < tmax:
            pts.append(peak)
        pts.append(tmax)
        val = mp.quad(g, pts)
        return PrecScalar(val, digits)

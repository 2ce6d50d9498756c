import random

import pytest
from mpmath import mp, mpf, gamma

from moment_bounds.numerics import (
    InvalidTolerance,
    InvalidWindow,
    NonIntegrableSingularity,
    NotAMinimumBracket,
    NotPositiveDefinite,
    IndexOutOfRange,
    PrecScalar,
    SymMatrix,
    bracketed_minimum,
    bracketed_roots,
    cholesky,
    hankel,
    singular_integral,
    smallest_eigenvalue,
    try_cholesky,
    workdps,
)

from conftest import rel_err


DIGITS = 40


def test_precscalar_arithmetic_promotes_digits():
    a = PrecScalar("0.1", 30)
    b = PrecScalar("0.2", 60)
    c = a + b
    assert c.digits == 60
    assert rel_err(c.value, "0.3") < mpf("1e-29")


def test_precscalar_exact_decimal_parse():
    x = PrecScalar("1.4292927197475", 50)
    assert x.str(14) == "1.4292927197475"


def test_precscalar_rejects_low_digits():
    with pytest.raises(InvalidTolerance):
        PrecScalar("1", 8)


def test_precscalar_functions():
    x = PrecScalar(2, 50)
    with workdps(50):
        assert rel_err(x.sqrt().value, mp.sqrt(2)) < mpf("1e-48")
    assert rel_err(x.exp().ln().value, 2) < mpf("1e-48")


# -- cholesky -----------------------------------------------------------------


def test_cholesky_identity():
    m = SymMatrix.identity(3, DIGITS)
    L = cholesky(m)
    for i in range(3):
        for j in range(i + 1):
            assert L.entry(i, j) == (1 if i == j else 0)


def test_cholesky_2x2_hand_factorization():
    m = SymMatrix.from_fn(2, lambda i, j: 2 if i == j else 1, DIGITS)
    L = cholesky(m)
    with workdps(DIGITS):
        assert rel_err(L.entry(0, 0), mp.sqrt(2)) < mpf("1e-38")
        assert rel_err(L.entry(1, 0), 1 / mp.sqrt(2)) < mpf("1e-38")
        assert rel_err(L.entry(1, 1), mp.sqrt(mpf(3) / 2)) < mpf("1e-38")
        # multiply back (L holds the lower triangle; upper is implicitly zero)
        for i in range(2):
            for j in range(2):
                s = sum(L.entry(i, k) * L.entry(j, k) for k in range(min(i, j) + 1))
                assert rel_err(s, m.entry(i, j)) < mpf("1e-38")


def test_cholesky_factorial_hankel():
    # moments p! of exp(-chi) on the half line: a valid Stieltjes sequence
    with workdps(DIGITS):
        moments = [mp.factorial(p) for p in range(6)]
    m = hankel(moments, 0, 3, DIGITS)
    L = cholesky(m)
    assert all(L.entry(i, i) > 0 for i in range(3))
    # brute-force determinant of [[1,1,2],[1,2,6],[2,6,24]] is positive
    with workdps(DIGITS):
        a = [[mpf(x) for x in row] for row in ([1, 1, 2], [1, 2, 6], [2, 6, 24])]
        det = (
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        )
        assert det > 0
        prod = (L.entry(0, 0) * L.entry(1, 1) * L.entry(2, 2)) ** 2
        assert rel_err(prod, det) < mpf("1e-36")


def test_cholesky_reports_failure_index():
    m = SymMatrix.from_fn(2, lambda i, j: 1, DIGITS)  # singular rank-1
    with pytest.raises(NotPositiveDefinite) as exc:
        cholesky(m)
    assert exc.value.index == 1
    L, bad = try_cholesky(m)
    assert L is None and bad == 1


def _random_sym(n, rng, digits=DIGITS, indefinite=False):
    with workdps(digits):
        a = [[mpf(rng.uniform(-1, 1)) for _ in range(n)] for _ in range(n)]
        # gram matrix is PSD; add diagonal to make PD, or subtract to break it
        g = [[sum(a[i][k] * a[j][k] for k in range(n)) for j in range(n)] for i in range(n)]
        shift = mpf("0.1") if not indefinite else -max(g[i][i] for i in range(n)) / 2
        return SymMatrix([[g[i][j] + (shift if i == j else 0) for j in range(i + 1)] for i in range(n)], digits)


def test_reconstruction_residual_invariant():
    rng = random.Random(7)
    for _ in range(10):
        n = rng.randint(1, 8)
        m = _random_sym(n, rng)
        L = cholesky(m)
        with workdps(DIGITS):
            worst = mp.zero
            scale = m.max_abs()
            for i in range(n):
                for j in range(i + 1):
                    s = sum(L.entry(i, k) * L.entry(j, k) for k in range(min(i, j) + 1))
                    worst = max(worst, abs(s - m.entry(i, j)))
            assert worst / scale < mpf(10) ** (-DIGITS + 4)


def test_cholesky_iff_positive_smallest_eigenvalue():
    rng = random.Random(123)
    tol = PrecScalar("1e-30", DIGITS)
    for k in range(50):
        n = rng.randint(1, 7)
        m = _random_sym(n, rng, indefinite=(k % 2 == 1))
        ok = try_cholesky(m)[0] is not None
        lam = smallest_eigenvalue(m, tol)
        assert ok == (lam.value > 0)


# -- smallest eigenvalue ------------------------------------------------------


def test_smallest_eigenvalue_diagonal():
    m = SymMatrix.diagonal([1, 2, 3], DIGITS)
    lam = smallest_eigenvalue(m, PrecScalar("1e-30", DIGITS))
    assert rel_err(lam.value, 1) < mpf("1e-28")


def test_smallest_eigenvalue_2x2():
    m = SymMatrix.from_fn(2, lambda i, j: 2 if i == j else 1, DIGITS)
    lam = smallest_eigenvalue(m, PrecScalar("1e-30", DIGITS))
    assert rel_err(lam.value, 1) < mpf("1e-28")


def test_smallest_eigenvalue_1x1():
    m = SymMatrix.from_fn(1, lambda i, j: "0.37", DIGITS)
    lam = smallest_eigenvalue(m, PrecScalar("1e-30", DIGITS))
    assert rel_err(lam.value, "0.37") < mpf("1e-28")


def test_smallest_eigenvalue_below_diagonal():
    rng = random.Random(5)
    tol = PrecScalar("1e-25", DIGITS)
    for _ in range(10):
        m = _random_sym(rng.randint(2, 6), rng)
        lam = smallest_eigenvalue(m, tol)
        for i in range(m.dimension):
            assert lam.value <= m.entry(i, i) + mpf("1e-24")


def test_smallest_eigenvalue_rejects_bad_tol():
    m = SymMatrix.identity(2, DIGITS)
    with pytest.raises(InvalidTolerance):
        smallest_eigenvalue(m, PrecScalar(0, DIGITS))


# -- hankel -------------------------------------------------------------------


def test_hankel_indexing():
    h = hankel([1, 1, 2], 0, 2, DIGITS)
    assert [[h.entry(i, j) for j in range(2)] for i in range(2)] == [[1, 1], [1, 2]]
    h = hankel([1, 1, 2, 6], 1, 2, DIGITS)
    assert [[h.entry(i, j) for j in range(2)] for i in range(2)] == [[1, 2], [2, 6]]


def test_hankel_insufficient_moments():
    with pytest.raises(IndexOutOfRange):
        hankel([1, 2], 1, 2, DIGITS)


# -- root and minimum search --------------------------------------------------


def test_bracketed_roots_linear():
    roots = bracketed_roots(lambda e: e - 2, (0, 8), 100, DIGITS)
    assert len(roots) == 1
    assert rel_err(roots[0].value, 2) < mpf("1e-30")


def test_bracketed_roots_quadratic():
    roots = bracketed_roots(lambda e: (e - 2) * (e - 4), (0, 8), 100, DIGITS)
    assert [round(float(r.value), 6) for r in roots] == [2.0, 4.0]


def test_bracketed_roots_residual_scale():
    f = lambda e: mp.sin(e) - mpf(1) / 3
    roots = bracketed_roots(f, (0, 3), 50, DIGITS)
    assert len(roots) == 2
    for r in roots:
        with workdps(DIGITS):
            assert abs(f(r.value)) < mpf(10) ** (-(DIGITS // 2))


def test_bracketed_roots_skips_even_multiplicity():
    roots = bracketed_roots(lambda e: (e - 2) ** 2, (0, 8), 100, DIGITS)
    assert roots == []


def test_bracketed_roots_window_validation():
    with pytest.raises(InvalidWindow):
        bracketed_roots(lambda e: e, (3, 3), 10, DIGITS)


def test_bracketed_minimum_parabola():
    x, fx = bracketed_minimum(lambda t: (t - 1) ** 2, (0, mpf("0.9"), 2), DIGITS)
    assert abs(x.value - 1) < mpf(10) ** (-(DIGITS // 2) + 2)
    assert fx.value < mpf("1e-35")


def test_bracketed_minimum_cosh():
    x, fx = bracketed_minimum(lambda t: mp.cosh(t - 3), (2, mpf("2.5"), 4), DIGITS)
    assert abs(x.value - 3) < mpf(10) ** (-(DIGITS // 2) + 2)
    assert rel_err(fx.value, 1) < mpf("1e-30")


def test_bracketed_minimum_validates_bracket():
    with pytest.raises(NotAMinimumBracket):
        bracketed_minimum(lambda t: t, (0, 1, 2), DIGITS)


# -- singular integral ----------------------------------------------------------


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4])
def test_singular_integral_halfline_gaussian_powers(p):
    val = singular_integral(lambda c: c**p * mp.exp(-c * c / 2), p, 0, DIGITS)
    with workdps(DIGITS):
        exact = 2 ** ((mpf(p) - 1) / 2) * gamma((mpf(p) + 1) / 2)
        assert rel_err(val.value, exact) < mpf(10) ** (-DIGITS + 6)


def test_singular_integral_inverse_sqrt():
    val = singular_integral(
        lambda c: c ** mpf("-0.5") * mp.exp(-c * c / 2), mpf("-0.5"), 0, DIGITS
    )
    with workdps(DIGITS):
        exact = 2 ** mpf("-0.75") * gamma(mpf("0.25"))
        assert rel_err(val.value, exact) < mpf(10) ** (-DIGITS + 5)
        assert abs(float(val.value) - 2.15581) < 1e-4


def test_singular_integral_sqrt():
    val = singular_integral(
        lambda c: c ** mpf("0.5") * mp.exp(-c * c / 2), mpf("0.5"), 0, DIGITS
    )
    with workdps(DIGITS):
        exact = 2 ** mpf("-0.25") * gamma(mpf("0.75"))
        assert rel_err(val.value, exact) < mpf(10) ** (-DIGITS + 5)
        assert abs(float(val.value) - 1.03045) < 1e-4


def test_singular_integral_rejects_nonintegrable():
    with pytest.raises(NonIntegrableSingularity):
        singular_integral(lambda c: 1 / c, -1, 0, DIGITS)


def test_guard_digit_audit_confirms_stable_quadrature():
    from moment_bounds.numerics import guard_digit_audit

    def compute(d):
        return singular_integral(lambda c: mp.exp(-c * c / 2), 0, 0, d)

    _, agreed = guard_digit_audit(compute, 30)
    assert agreed >= 30

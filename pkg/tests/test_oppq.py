import pytest
from mpmath import mp, mpf, fdot

from moment_bounds.numerics import MomentBoundsError, bracketed_roots, workdps
from moment_bounds.oppq import (
    CenterNotBelowBound,
    OppqWorkspace,
    WeightMomentsInsufficientPrecision,
    am_secular_roots,
    bm_bounds,
    bm_lambda_min,
    bm_local_minima,
    build_orthobasis,
    calibrate_bu,
    default_digits,
    lambda_table,
)
from moment_bounds.problems import (
    Branch,
    Family,
    ProblemSpec,
    Representation,
    WeightKind,
    WeightMoments,
    exact_spectrum_gamma,
    weight_moments_spiked,
)
from moment_bounds.numerics import PrecScalar

from conftest import ground_state_moments_b0, rel_err

DIGITS = 100


def spiked(b, digits=DIGITS, gamma_c="0.75"):
    return ProblemSpec(Family.SPIKED_AQ, b, gamma=gamma_c, digits=digits)


def walled(b, branch=Branch.PHYSICAL, digits=DIGITS):
    return ProblemSpec(Family.WALLED_CQ, b, branch=branch, digits=digits)


@pytest.fixture(scope="module")
def ws_b05():
    return OppqWorkspace(spiked("0.5"), 20, DIGITS)


# -- orthonormal basis ---------------------------------------------------------


def test_orthobasis_laguerre_weight():
    digits = 40
    with workdps(digits):
        vals = [mp.factorial(p) for p in range(9)]
    weight = WeightMoments(PrecScalar(0, digits), WeightKind.SPIKED, PrecScalar(2, digits), vals, digits)
    basis = build_orthobasis(weight, 4)
    with workdps(digits):
        # P0 = 1 and P1 = chi - 1 (unit-norm Laguerre with positive leading term)
        assert rel_err(basis.xi[0][0], 1) < mpf("1e-30")
        assert rel_err(basis.xi[1][1], 1) < mpf("1e-30")
        assert rel_err(basis.xi[1][0], -1) < mpf("1e-30")


def test_orthobasis_constant_normalization():
    w = weight_moments_spiked("0", "1.5", 10, 40)
    basis = build_orthobasis(w, 4)
    with workdps(40):
        assert rel_err(basis.xi[0][0], 1 / mp.sqrt(w.values[0])) < mpf("1e-30")


def test_orthobasis_orthonormality_residual():
    digits = 60
    w = weight_moments_spiked("0.7", "1.5", 2 * 10 + 2, digits)
    basis = build_orthobasis(w, 10)
    with workdps(digits):
        worst = mp.zero
        for m in range(11):
            for n in range(m + 1):
                s = mp.zero
                for i, ci in enumerate(basis.xi[m]):
                    for j, cj in enumerate(basis.xi[n]):
                        s += ci * cj * w.values[i + j]
                target = mp.one if m == n else mp.zero
                worst = max(worst, abs(s - target))
        assert worst < mpf(10) ** (-digits + 6)


def test_orthobasis_leading_coefficients_positive():
    w = weight_moments_spiked("1.2", "1.5", 18, 60)
    basis = build_orthobasis(w, 8)
    assert all(basis.xi[n][n] > 0 for n in range(9))


def test_orthobasis_insufficient_moments_error():
    w = weight_moments_spiked("0", "1.5", 6, 40)
    with pytest.raises(WeightMomentsInsufficientPrecision):
        build_orthobasis(w, 10)


def test_orthobasis_insufficient_precision_error():
    # 16-digit arithmetic cannot hold a Hankel of order 30 positive definite
    w = weight_moments_spiked("0", "1.5", 62, 16)
    with pytest.raises(WeightMomentsInsufficientPrecision) as exc:
        build_orthobasis(w, 30)
    assert "digits" in str(exc.value)


# -- lambda tables ---------------------------------------------------------------


def test_lambda_annihilates_exact_ground_state(ws_b05):
    digits = DIGITS
    ws = OppqWorkspace(spiked("0"), 14, digits)
    tbl = lambda_table(spiked("0"), 2, 12, workspace=ws)
    with workdps(digits):
        u = ground_state_moments_b0(4, dps=digits + 10)[:4]
        norm = mp.sqrt(fdot(u, u))
        u = [x / norm for x in u]
        for n in range(3, 13):
            row = tbl.entries[n]
            c_n = fdot(row, u)
            scale = max(abs(x) for x in row)
            assert abs(c_n) <= scale * mpf(10) ** (-digits + 10)
        # c_0 does not vanish: the state is the weight itself
        assert abs(fdot(tbl.entries[0], u)) > mpf("0.1")


def test_lambda_init_block_contraction(ws_b05):
    tbl = ws_b05.lambda_table("1.3")
    with workdps(DIGITS):
        for n in range(4):
            for l in range(4):
                expect = ws_b05.basis.xi[n][l] if l <= n else mp.zero
                assert abs(tbl.entries[n][l] - expect) == 0


def test_walled_secular_root_at_first_odd_state():
    # b=0 physical: levels 1.5, 3.5, ...; the wall kills the even states
    spec = walled("0", digits=180)
    roots = am_secular_roots(spec, 40, ("0.3", "6"), digits=180, grid=240)
    vals = [float(r.value) for r in roots]
    assert any(abs(v - 1.5) < 1e-8 for v in vals)
    assert any(abs(v - 3.5) < 1e-7 for v in vals)
    assert not any(abs(v - 0.5) < 1e-3 for v in vals)
    assert not any(abs(v - 2.5) < 1e-3 for v in vals)


def test_walled_branch_distinction_b1():
    # the first odd oscillator state H1 e^(-x^2/2) has zero derivative at
    # x = +-1, so E = 1.5 sits in the unphysical spectrum at b = 1 exactly
    spec_u = walled("1", Branch.UNPHYSICAL, digits=180)
    roots_u = am_secular_roots(spec_u, 40, ("0.2", "2.5"), digits=180, grid=240)
    assert any(abs(float(r.value) - 1.5) < 1e-8 for r in roots_u)
    spec_p = walled("1", Branch.PHYSICAL, digits=180)
    roots_p = am_secular_roots(spec_p, 40, ("0.2", "2.5"), digits=180, grid=240)
    assert all(abs(float(r.value) - 1.5) > 0.3 for r in roots_p)


# -- AM secular roots ---------------------------------------------------------------


def test_am_exact_b0_structure_small_n():
    # tail determinant factors (E-2)(E-4)(E-7.4633...) at basis order 6
    ws = OppqWorkspace(spiked("0", digits=80), 6, 80)
    with workdps(80):
        roots = bracketed_roots(lambda E: ws.am_det(E), ("0.5", "9"), 340, 80)
    vals = [float(r.value) for r in roots]
    assert abs(vals[0] - 2) < 1e-20
    assert abs(vals[1] - 4) < 1e-20
    assert abs(vals[2] - 7.463360) < 1e-4


def test_am_rejects_small_n():
    with pytest.raises(MomentBoundsError):
        am_secular_roots(spiked("0.5"), 8, ("0", "4"), digits=60)


def test_am_b05_ground_estimate():
    roots = am_secular_roots(spiked("0.5", digits=120), 20, ("1.2", "1.6"), digits=120, grid=80)
    assert len(roots) == 1
    assert rel_err(roots[0].value, "1.4292927197") < mpf("1e-7")


def test_am_exact_factorization_and_gamma_generalization():
    # |Det| vanishes at E = 2k for k <= (N-4)/2 at b = 0
    digits = 120
    ws = OppqWorkspace(spiked("0", digits=digits), 12, digits)
    with workdps(digits):
        for k in (1, 2, 3, 4):
            d = ws.am_det(mpf(2 * k))
            assert abs(d) < mpf(10) ** (-(digits // 2))
    # generalized centrifugal strengths: roots sit at alpha + 2n + 1/2
    for gamma_c in ("2", "3.75", "6"):
        digits = 140
        spec = spiked("0", digits=digits, gamma_c=gamma_c)
        roots = am_secular_roots(spec, 14, ("0.5", "8"), digits=digits, grid=600)
        vals = sorted(float(r.value) for r in roots)
        for n in range(2):
            expect = float(exact_spectrum_gamma(gamma_c, n, 50).value)
            assert any(abs(v - expect) < 1e-10 for v in vals)


# -- BM machinery ---------------------------------------------------------------------


def test_bm_lambda_table6_values(ws_b05):
    spec = spiked("0.5")
    lam10 = bm_lambda_min(spec, "1.5150470", 10, workspace=OppqWorkspace(spec, 10, DIGITS))
    with workdps(30):
        assert abs(mp.log10(lam10.value) + mpf("0.84559280")) < mpf("1e-6")
    lam20 = bm_lambda_min(spec, "1.4292967", 20, workspace=ws_b05)
    with workdps(30):
        assert abs(mp.log10(lam20.value) + mpf("0.79738248")) < mpf("1e-6")


def test_bm_lambda_monotone_in_n(ws_b05):
    with workdps(DIGITS):
        for e in ("1.1", "1.5", "3.3"):
            lam_lo = ws_b05.lambda_min(mpf(e), 14)
            lam_hi = ws_b05.lambda_min(mpf(e), 15)
            assert lam_hi >= lam_lo


def test_bm_nestedness_strict_majority(ws_b05):
    with workdps(DIGITS):
        strict = 0
        total = 0
        for k in range(25):
            e = mpf("0.4") + k * mpf("0.3")
            lo = ws_b05.lambda_min(e, 12)
            hi = ws_b05.lambda_min(e, 13)
            total += 1
            assert hi >= lo
            if hi > lo:
                strict += 1
        assert strict >= int(0.9 * total)


def test_bm_minima_value_monotonicity():
    spec = spiked("0.5")
    prev = None
    for n in (10, 11, 12, 13, 14):
        ws = OppqWorkspace(spec, n, DIGITS)
        minima = bm_local_minima(spec, n, ("1.2", "1.9"), workspace=ws, grid=40)
        assert minima, f"no minimum resolved at N={n}"
        val = minima[0][1].value
        if prev is not None:
            assert val > prev
        prev = val


def test_bm_minima_match_table6_small_n():
    spec = spiked("0.5")
    ws = OppqWorkspace(spec, 12, DIGITS)
    minima = bm_local_minima(spec, 12, ("1.0", "6.0"), workspace=ws, grid=160)
    vals = [float(x.value) for x, _ in minima]
    for expect in (1.4156228, 3.1875626, 5.1889348):
        assert any(abs(v - expect) < 2e-6 for v in vals)


def test_bm_bounds_nested_for_fixed_bu():
    spec = spiked("0.5")
    with workdps(DIGITS):
        bu = mpf(10) ** mpf("-0.79738")
    b10 = bm_bounds(spec, 10, bu, "1.515", workspace=OppqWorkspace(spec, 10, DIGITS), xtol="1e-10")
    b12 = bm_bounds(spec, 12, bu, "1.4156", workspace=OppqWorkspace(spec, 12, DIGITS), xtol="1e-10")
    assert b10[0].value < b12[0].value < b12[1].value < b10[1].value


def test_bm_bounds_rejects_center_above_bu():
    spec = spiked("0.5")
    ws = OppqWorkspace(spec, 10, DIGITS)
    with pytest.raises(CenterNotBelowBound):
        bm_bounds(spec, 10, "1e-3", "1.515", workspace=ws)


def test_am_inside_bm_bracket():
    spec = spiked("0.5", digits=140)
    ws = OppqWorkspace(spec, 30, 140)
    root = am_secular_roots(spec, 30, ("1.2", "1.6"), workspace=ws, grid=80)[0]
    with workdps(140):
        bu = mpf(10) ** mpf("-0.79738")
    lo, hi = bm_bounds(spec, 30, bu, root.value, workspace=ws, xtol="1e-10")
    assert lo.value < root.value < hi.value


def test_calibrate_bu_above_minima():
    spec = spiked("0.5")
    bu = calibrate_bu(spec, ("1.2", "1.9"), state=0, n_cal=12, grid=40)
    ws = OppqWorkspace(spec, 12, DIGITS)
    minima = bm_local_minima(spec, 12, ("1.2", "1.9"), workspace=ws, grid=40)
    assert bu.value > minima[0][1].value


def test_default_digits_formula():
    assert default_digits(10) == 100
    assert default_digits(100) == 420
    assert default_digits(350) == 1420

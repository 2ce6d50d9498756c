import numpy as np
import pytest
from mpmath import mp, mpf, gamma


def mpf_at(x, dps=50):
    with mp.workdps(dps):
        return mpf(x)


def rel_err(a, b, dps=50):
    with mp.workdps(dps):
        a = mpf(a) if not hasattr(a, "_mpf_") else a
        b = mpf(b) if not hasattr(b, "_mpf_") else b
        return abs(a - b) / max(abs(b), mpf("1e-300"))


def ground_state_moments_b0(pmax, dps=60):
    """Closed-form moments of chi^(-1/2) exp(-chi^2/2): the exact b=0 ground
    state in the chi^-2 Psi configuration (equals the reference weight)."""
    with mp.workdps(dps):
        return [2 ** ((2 * mpf(p) - 3) / 4) * gamma((2 * mpf(p) + 1) / 4) for p in range(pmax + 1)]


def fmt_round_dir(x, sig, direction):
    """x printed at `sig` significant figures rounded toward -inf ('down') or
    +inf ('up'); bound endpoints print outward, like the tables they match."""
    assert direction in ("down", "up")
    with mp.workdps(sig + 25):
        v = mpf(x) if not hasattr(x, "_mpf_") else x
        if v == 0:
            return "0.0"
        exp10 = mp.floor(mp.log10(abs(v)))
        quantum = mp.power(10, exp10 - sig + 1)
        scaled = v / quantum
        scaled = mp.floor(scaled) if direction == "down" else mp.ceil(scaled)
        out = scaled * quantum
        return mp.nstr(out, sig)


@pytest.fixture(scope="session")
def shooting_solver():
    """Double-precision shooting oracle for the spiked oscillator ground state.

    Entirely independent of the moment machinery: integrates the radial ODE
    outward from a Frobenius start chi^alpha (1 + a2 chi^2 + a3 chi^3) and
    bisects the energy on the sign of the far-field value.
    """
    from scipy.integrate import solve_ivp
    from scipy.optimize import brentq

    def solve(b, gamma_c=0.75, e_lo=0.2, e_hi=2.0, chi_end=None):
        # the far-field sign flips at every eigenvalue: (e_lo, e_hi) must
        # bracket exactly one level
        if chi_end is None:
            chi_end = b + 9.0
        alpha = 0.5 * (1 + np.sqrt(1 + 4 * gamma_c))

        def rhs(chi, y, E):
            return [y[1], (gamma_c / chi**2 + (chi - b) ** 2 - 2 * E) * y[0]]

        def endpoint(E):
            chi0 = 1e-6
            a2 = (b * b - 2 * E) / (2 * (2 * alpha + 1))
            a3 = -2 * b / (3 * (2 * alpha + 2))
            f0 = 1 + a2 * chi0**2 + a3 * chi0**3
            fp0 = 2 * a2 * chi0 + 3 * a3 * chi0**2
            psi0 = chi0**alpha * f0
            dpsi0 = alpha * chi0 ** (alpha - 1) * f0 + chi0**alpha * fp0
            sol = solve_ivp(
                rhs, [chi0, chi_end], [psi0, dpsi0], args=(E,), rtol=1e-11, atol=1e-280
            )
            return sol.y[0, -1]

        return brentq(endpoint, e_lo, e_hi, xtol=1e-9)

    return solve

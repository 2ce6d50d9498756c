"""Problem families and their moment-equation representations.

Two families are wired: the singular half-line oscillator with a centrifugal
gamma/chi^2 term and a shifted quadratic well ("spiked", domain chi > 0), and
the harmonic oscillator cut off by an infinite wall ("walled", canonical
quantization on (-b, inf) mapped to chi = x + b > 0).

Each representation yields a linear generator: every power moment is a known,
energy-dependent linear combination of a handful of "missing" moments.  The
tables built here hold those combinations row by row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from mpmath import mp, mpf, fdot

from .numerics import (
    MIN_DIGITS,
    MomentBoundsError,
    PrecScalar,
    singular_integral,
    to_mpf,
    workdps,
)


class Family(enum.Enum):
    SPIKED_AQ = "spiked"
    WALLED_CQ = "walled"


class Representation(enum.Enum):
    PSI_TILDE = "psi"          # moments of chi^-2 Psi, m_s = 3
    PHI_SIGMA0 = "phi-sigma0"  # Gaussian-damped Psi, sigma = 0 ladder, m_s = 1
    PHI_SIGMA3 = "phi-sigma3"  # Gaussian-damped Psi, sigma = 3 ladder, m_s = 0
    PSI_SQUARED = "psi2"       # probability density, m_s = 3


class Branch(enum.Enum):
    PHYSICAL = "physical"      # wavefunction vanishes at the wall
    UNPHYSICAL = "unphysical"  # derivative vanishes at the wall


class OrderTooSmall(MomentBoundsError):
    pass


class OutOfDomain(MomentBoundsError):
    pass


class NonIntegrableWeight(MomentBoundsError):
    pass


class PoleAtEnergy(MomentBoundsError):
    def __init__(self, q: int, energy):
        super().__init__(f"recursion denominator vanishes at step q={q} for E={energy}")
        self.q = q
        self.energy = energy


@dataclass(frozen=True)
class ProblemSpec:
    """One concrete eigenproblem: family, wall offset b, centrifugal strength."""

    family: Family
    b: object
    gamma: object = None
    representation: Representation | None = None
    branch: Branch | None = None
    digits: int = 100

    def __post_init__(self):
        object.__setattr__(self, "b", PrecScalar(self.b, self.digits))
        gamma = self.gamma if self.gamma is not None else "0.75"
        object.__setattr__(self, "gamma", PrecScalar(gamma, self.digits))
        if self.b.value < 0:
            raise OutOfDomain("wall offset b must be >= 0")
        if self.family is Family.SPIKED_AQ:
            if not self.gamma.value > 0:
                raise OutOfDomain("gamma must be > 0")
            if self.representation is None:
                object.__setattr__(self, "representation", Representation.PSI_TILDE)
            if self.branch is not None:
                raise OutOfDomain("branch applies only to the walled family")
        else:
            if self.branch is None:
                object.__setattr__(self, "branch", Branch.PHYSICAL)
            if self.representation is not None:
                raise OutOfDomain("representation selects spiked configurations only")

    @property
    def alpha(self) -> PrecScalar:
        """Indicial exponent at the origin: alpha(alpha-1) = gamma, alpha > 1."""
        with workdps(self.digits):
            return PrecScalar((1 + mp.sqrt(1 + 4 * self.gamma.value)) / 2, self.digits)

    @property
    def beta(self) -> PrecScalar:
        return PrecScalar(-2 * self.b.value, self.digits)

    def lambda_shift(self, E) -> PrecScalar:
        """Rescaled spectral parameter 2E - b^2."""
        with workdps(self.digits):
            e = to_mpf(E, self.digits)
            return PrecScalar(2 * e - self.b.value ** 2, self.digits)


@dataclass
class MERTable:
    """Generator table: moment(p) = sum over slots of coeff(p, ell) * missing(ell).

    rows[k] holds the coefficients of moment index p = k - offset, where
    offset = 1 exactly when a boundary slot (ell = -1) is present.
    """

    missing_order: int
    slots: tuple
    max_p: int
    rows: list
    digits: int
    poles: tuple = ()
    boundary_slot: bool = False

    @property
    def _offset(self) -> int:
        return 1 if self.boundary_slot else 0

    def coeff(self, p: int, ell: int):
        return self.rows[p + self._offset][self.slots.index(ell)]

    def row(self, p: int) -> tuple:
        return self.rows[p + self._offset]

    def generate(self, missing: Sequence) -> list:
        """All moments 0..max_p for a concrete missing-moment tuple."""
        vals = [to_mpf(x, self.digits) for x in missing]
        if len(vals) != len(self.slots):
            raise OutOfDomain(f"expected {len(self.slots)} missing moments")
        with workdps(self.digits):
            return [fdot(self.rows[k], vals) for k in range(self._offset, len(self.rows))]


class WeightKind(enum.Enum):
    SPIKED = "spiked"
    WALLED = "walled"


@dataclass
class WeightMoments:
    """Stieltjes power moments of a positive reference weight."""

    b: PrecScalar
    kind: WeightKind
    alpha: PrecScalar
    values: list
    digits: int

    def __len__(self):
        return len(self.values)

    def value(self, p: int):
        return self.values[p]


def exact_spectrum_spiked_b0(n: int) -> PrecScalar:
    """Exact spiked-oscillator levels at b = 0 (gamma = 3/4): E_n = 2(n+1)."""
    if n < 0:
        raise OutOfDomain("n must be >= 0")
    return PrecScalar(2 * (n + 1), MIN_DIGITS)


def exact_spectrum_gamma(gamma, n: int, digits: int = 50) -> PrecScalar:
    """Exact levels of the gamma/chi^2 + chi^2 oscillator: alpha + 2n + 1/2."""
    with workdps(digits):
        g = to_mpf(gamma, digits)
        if not g > 0:
            raise OutOfDomain("gamma must be > 0")
        alpha = (1 + mp.sqrt(1 + 4 * g)) / 2
        return PrecScalar(alpha + 2 * n + mpf(1) / 2, digits)


def _require(spec: ProblemSpec, family: Family, rep: Representation | None = None):
    if spec.family is not family:
        raise OutOfDomain(f"operation requires the {family.value} family")
    if rep is not None and spec.representation is not rep:
        raise OutOfDomain(f"operation requires representation {rep.value}")


def _require_gamma_34(spec: ProblemSpec):
    with workdps(spec.digits):
        if spec.gamma.value != mpf(3) / 4:
            raise OutOfDomain("this representation is derived for gamma = 3/4 only")


def mer_psi(spec: ProblemSpec, E, pmax: int) -> MERTable:
    """m_s = 3 generator for the moments u(p) of chi^-2 Psi (spiked family).

    u(p+4) = -beta u(p+3) + (2E - b^2) u(p+2) + (p(p-1) - gamma) u(p).
    """
    _require(spec, Family.SPIKED_AQ)
    if pmax < 4:
        raise OrderTooSmall("pmax must be >= 4 for the m_s = 3 ladder")
    digits = spec.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        b = spec.b.value
        g = spec.gamma.value
        beta = -2 * b
        lam = 2 * e - b * b
        rows = [tuple(mp.one if i == l else mp.zero for l in range(4)) for i in range(4)]
        for p in range(pmax - 3):
            c0 = p * (p - 1) - g
            r3, r2, r0 = rows[p + 3], rows[p + 2], rows[p]
            rows.append(tuple(-beta * r3[l] + lam * r2[l] + c0 * r0[l] for l in range(4)))
    return MERTable(3, (0, 1, 2, 3), pmax, rows, digits)


def phi_sigma3_poles(spec: ProblemSpec, qmax: int) -> tuple:
    """Energy abscissae where the sigma = 3 ladder denominators vanish.

    At b = 0 the odd sub-chain is identically zero, so only the odd integers
    E = 3, 5, ... reachable by the even sub-chain are genuine poles; E = 2 is
    then a regular (in fact, the exactly solvable) point.
    """
    _require(spec, Family.SPIKED_AQ)
    if spec.b.value == 0:
        return tuple(q + 2 for q in range(1, qmax) if q % 2 == 1)
    return tuple(q + 2 for q in range(0, qmax))


def phi_moments_ms0(spec: ProblemSpec, E, qmax: int) -> list:
    """Deterministic sigma = 3 moment ladder tau(0..qmax), tau(0) = 1.

    tau(1) (2E - 4) = -3 b tau(0); tau(q+1) = [q(q+2) tau(q-1)
    + 2b(q+3/2) tau(q)] / (4 + 2q - 2E).  Zero missing moments: the whole
    sequence is fixed by E.  Raises PoleAtEnergy inside the pole guard.

    At b = 0 the numerators of all odd-index moments vanish identically; the
    0/0 at (b=0, E=2) leaves tau(1) as a genuine free moment.  It is seeded
    with the determinate value 2/sqrt(pi) (the odd/even moment ratio of the
    exactly solvable ground state), the one choice that keeps every Hankel
    order positive definite, so E = 2 stays feasible at all pmax.
    """
    _require(spec, Family.SPIKED_AQ, Representation.PHI_SIGMA3)
    _require_gamma_34(spec)
    if qmax < 1:
        raise OrderTooSmall("qmax must be >= 1")
    digits = spec.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        b = spec.b.value
        guard = mpf(10) ** (-(digits // 2)) * max(mp.one, abs(e))
        tau = [mp.one]
        den = 2 * e - 4
        num = -3 * b
        if abs(den) < guard:
            if num == 0:
                tau.append(2 / mp.sqrt(mp.pi))  # determinate seed at the solvable point
            else:
                raise PoleAtEnergy(0, e)
        else:
            tau.append(num / den)
        for q in range(1, qmax):
            den = 4 + 2 * q - 2 * e
            num = q * (q + 2) * tau[q - 1] + 2 * b * (q + mpf(3) / 2) * tau[q]
            if abs(den) < guard:
                if num == 0:
                    tau.append(mp.zero)
                else:
                    raise PoleAtEnergy(q, e)
            else:
                tau.append(num / den)
        return tau


def phi_ms1_poles(spec: ProblemSpec, qmax: int) -> tuple:
    _require(spec, Family.SPIKED_AQ)
    with workdps(spec.digits):
        return tuple(q + mpf(1) / 2 for q in range(0, max(qmax - 1, 0)))


def phi_mer_ms1(spec: ProblemSpec, E, qmax: int) -> MERTable:
    """m_s = 1 generator for the sigma = 0 ladder (spiked family, gamma = 3/4).

    u(q+2) = [(3/4 - q(q-1)) u(q) - 2bq u(q+1)] / (2E - 1 - 2q), missing
    moments u(0), u(1).  Pole abscissae E = q + 1/2 are recorded on the table.
    """
    _require(spec, Family.SPIKED_AQ, Representation.PHI_SIGMA0)
    _require_gamma_34(spec)
    if qmax < 2:
        raise OrderTooSmall("qmax must be >= 2 for the m_s = 1 ladder")
    digits = spec.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        b = spec.b.value
        guard = mpf(10) ** (-(digits // 2)) * max(mp.one, abs(e))
        rows = [(mp.one, mp.zero), (mp.zero, mp.one)]
        for q in range(qmax - 1):
            den = 2 * e - 1 - 2 * q
            if abs(den) < guard:
                raise PoleAtEnergy(q, e)
            c0 = (mpf(3) / 4 - q * (q - 1)) / den
            c1 = -2 * b * q / den
            rq, rq1 = rows[q], rows[q + 1]
            rows.append(tuple(c0 * rq[l] + c1 * rq1[l] for l in range(2)))
    return MERTable(1, (0, 1), qmax, rows, digits, poles=phi_ms1_poles(spec, qmax))


def psisq_mer(spec: ProblemSpec, E, pmax: int) -> MERTable:
    """m_s = 3 generator for the moments u(p) of chi^-3 Psi^2 (spiked, gamma=3/4).

    4(1+p) u(p+4) = 4b(1+2p) u(p+3) + (8E - 4b^2) p u(p+2)
                     + (p-1)(p(p-2) - 3) u(p).
    """
    _require(spec, Family.SPIKED_AQ, Representation.PSI_SQUARED)
    _require_gamma_34(spec)
    if pmax < 4:
        raise OrderTooSmall("pmax must be >= 4 for the m_s = 3 ladder")
    digits = spec.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        b = spec.b.value
        rows = [tuple(mp.one if i == l else mp.zero for l in range(4)) for i in range(4)]
        for p in range(pmax - 3):
            c3 = 4 * b * (1 + 2 * p)
            c2 = (8 * e - 4 * b * b) * p
            c0 = (p - 1) * (p * (p - 2) - 3)
            den = 4 * (1 + p)
            r3, r2, r0 = rows[p + 3], rows[p + 2], rows[p]
            rows.append(tuple((c3 * r3[l] + c2 * r2[l] + c0 * r0[l]) / den for l in range(4)))
    return MERTable(3, (0, 1, 2, 3), pmax, rows, digits)


def walled_mer(spec: ProblemSpec, E, pmax: int) -> MERTable:
    """Walled-oscillator generator with boundary slot, slots ell in {-1, 0, 1}.

    v(p+2) = 2b v(p+1) + (2E - b^2) v(p) + p(p-1) v(p-2) + boundary term,
    where the boundary term is -delta_{p,0} v_{-1} on the physical branch
    (v_{-1} = Psi'(0)) and +delta_{p,1} v_{-1} on the unphysical branch
    (v_{-1} = Psi(0)).
    """
    _require(spec, Family.WALLED_CQ)
    if pmax < 2:
        raise OrderTooSmall("pmax must be >= 2")
    digits = spec.digits
    with workdps(digits):
        e = to_mpf(E, digits)
        b = spec.b.value
        calE = 2 * e - b * b
        physical = spec.branch is Branch.PHYSICAL
        # rows for p = -1 (boundary bookkeeping), 0, 1
        rows = [
            (mp.one, mp.zero, mp.zero),
            (mp.zero, mp.one, mp.zero),
            (mp.zero, mp.zero, mp.one),
        ]
        for p in range(pmax - 1):
            r1 = rows[p + 2]  # v(p+1)
            r0 = rows[p + 1]  # v(p)
            new = [2 * b * r1[l] + calE * r0[l] for l in range(3)]
            if p >= 2:
                rm2 = rows[p - 1]
                c = p * (p - 1)
                for l in range(3):
                    new[l] += c * rm2[l]
            if physical and p == 0:
                new[0] -= 1
            if (not physical) and p == 1:
                new[0] += 1
            rows.append(tuple(new))
    return MERTable(2, (-1, 0, 1), pmax, rows, digits, boundary_slot=True)


def weight_moments_spiked(b, alpha, pmax: int, digits: int) -> WeightMoments:
    """Moments of chi^(alpha-2) exp(-(chi-b)^2/2): two quadrature seeds plus
    the ladder omega(p+2) = (p + alpha - 1) omega(p) + b omega(p+1)."""
    with workdps(digits):
        bb = to_mpf(b, digits)
        al = to_mpf(alpha, digits)
        if not al > 1:
            raise NonIntegrableWeight("need alpha > 1 so chi^(alpha-2) is integrable at 0")
        vals = []
        for p in (0, 1):
            power = p + al - 2

            def f(chi, _pw=power):
                return chi ** _pw * mp.exp(-((chi - bb) ** 2) / 2)

            vals.append(singular_integral(f, power, bb, digits).value)
        for p in range(max(pmax - 1, 0)):
            vals.append((p + al - 1) * vals[p] + bb * vals[p + 1])
        del vals[pmax + 1:]
    return WeightMoments(PrecScalar(bb, digits), WeightKind.SPIKED, PrecScalar(al, digits), vals, digits)


def weight_moments_walled(b, pmax: int, digits: int) -> WeightMoments:
    """Moments of exp(-chi^2/2 + b chi): quadrature seed for w(0), then
    w(p+1) = delta_{p,0} + b w(p) + p w(p-1)."""
    with workdps(digits):
        bb = to_mpf(b, digits)

        def f(chi):
            return mp.exp(-chi * chi / 2 + bb * chi)

        w0 = singular_integral(f, 0, bb, digits).value
        vals = [w0]
        for p in range(pmax):
            nxt = (mp.one if p == 0 else mp.zero) + bb * vals[p]
            if p >= 1:
                nxt += p * vals[p - 1]
            vals.append(nxt)
    # alpha slot is the origin exponent + 2 by analogy; the walled weight is regular
    return WeightMoments(PrecScalar(bb, digits), WeightKind.WALLED, PrecScalar(2, digits), vals, digits)


def scan_poles(spec: ProblemSpec, pmax: int) -> tuple:
    """Pole abscissae to exclude from energy scans for spec's representation."""
    if spec.family is Family.WALLED_CQ:
        return ()
    rep = spec.representation
    if rep is Representation.PHI_SIGMA3:
        return phi_sigma3_poles(spec, pmax)
    if rep is Representation.PHI_SIGMA0:
        return phi_ms1_poles(spec, pmax)
    return ()

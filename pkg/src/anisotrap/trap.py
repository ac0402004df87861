"""Paul-trap parameters, laser-coupling geometry and validity checks.

Inputs are SI (volts, metres, kilograms, rad/s). Everything downstream uses
hbar = 1, so energies and frequencies share the unit rad/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

from scipy.constants import e as E_CHARGE
from scipy.constants import hbar as HBAR
from scipy.optimize import brentq

from anisotrap.errors import PhysicsError

Q_WARN = 0.4


@dataclass(frozen=True)
class TrapDrive:
    U: float
    V: float
    Omega_rf: float
    r0: float
    mass: float
    charge_e: float = E_CHARGE

    def __post_init__(self):
        for name in ("Omega_rf", "r0", "mass", "charge_e"):
            if not getattr(self, name) > 0:
                raise PhysicsError(f"TrapDrive.{name} must be positive")
        # V = 0 is allowed as the degenerate no-confinement limit
        if self.V < 0:
            raise PhysicsError("TrapDrive.V must be non-negative")


def stability_params(d: TrapDrive) -> dict:
    """Mathieu parameters ``a_z, a_r, q_z, q_r`` of the quadrupole drive."""
    denom = d.mass * d.r0**2 * d.Omega_rf**2
    a_z = -8.0 * d.charge_e * d.U / denom
    q_z = -4.0 * d.charge_e * d.V / denom
    return {"a_z": a_z, "a_r": -a_z / 2.0, "q_z": q_z, "q_r": -q_z / 2.0}


def _radicands(d: TrapDrive) -> tuple[float, float]:
    p = stability_params(d)
    return p["a_r"] + p["q_r"] ** 2 / 2.0, p["a_z"] + p["q_z"] ** 2 / 2.0


def secular_frequencies(d: TrapDrive) -> dict:
    """Pseudopotential secular frequencies.

    Returns ``omega_r``, ``omega_z`` and ``q_warning`` (``|q_z| > 0.4``, where the
    lowest-order pseudopotential starts to degrade).
    """
    rr, rz = _radicands(d)
    for axis, val in (("r", rr), ("z", rz)):
        if val <= 0:
            raise PhysicsError(
                f"no real secular frequency along {axis}: a + q^2/2 = {val:.3e} <= 0"
            )
    q_z = stability_params(d)["q_z"]
    q_warning = abs(q_z) > Q_WARN
    if q_warning:
        warnings.warn(f"|q_z| = {abs(q_z):.3f} > {Q_WARN}: pseudopotential approximation degrading")
    half = d.Omega_rf / 2.0
    return {"omega_r": math.sqrt(rr) * half, "omega_z": math.sqrt(rz) * half, "q_warning": q_warning}


def isotropy_voltage(d: TrapDrive) -> dict:
    """Static voltage making the secular motion isotropic.

    ``U_literal`` is ``e V^2 / (m r0^2 Omega^2)``; ``U_numeric`` is the bisection
    root of ``omega_r(U) = omega_z(U)``. Both are returned with their relative
    gap, which is not assumed to vanish.
    """
    denom = d.mass * d.r0**2 * d.Omega_rf**2
    U_literal = d.charge_e * d.V**2 / denom
    if d.V == 0:
        return {"U_literal": U_literal, "U_numeric": 0.0, "relative_gap": 0.0}

    def gap(U):
        rr, rz = _radicands(replace(d, U=U))
        return rr - rz

    # gap is linear in U with slope 12 e/denom; bracket generously around the root
    scale = 4.0 * abs(U_literal) + 1e-300
    lo, hi = -scale, scale
    if gap(lo) * gap(hi) > 0:
        raise PhysicsError("no isotropy crossing inside the search bracket")
    U_num = brentq(gap, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    rel = abs(U_num - U_literal) / abs(U_literal) if U_literal else 0.0
    return {"U_literal": U_literal, "U_numeric": U_num, "relative_gap": rel}


@dataclass(frozen=True)
class CouplingGeometry:
    """Secular frequencies, laser direction and the derived coupling constants.

    Build with :func:`coupling_geometry` rather than directly.
    """

    nu_a: float
    nu_b: float
    alpha: float
    k: float
    rabi_Omega: float
    mass: float
    lambda_form: str = "standard"
    dx: float = field(init=False)
    dz: float = field(init=False)
    eta_x: float = field(init=False)
    eta_z: float = field(init=False)
    theta: float = field(init=False)
    lam: float = field(init=False)
    delta_res: float = field(init=False)
    dnu: float = field(init=False)
    nu_bar: float = field(init=False)

    def __post_init__(self):
        for name in ("nu_a", "nu_b", "k", "rabi_Omega", "mass"):
            if not getattr(self, name) > 0:
                raise PhysicsError(f"{name} must be positive")
        if not 0.0 < self.alpha < math.pi / 2:
            raise PhysicsError(
                f"alpha = {self.alpha!r} must lie strictly inside (0, pi/2); "
                "at the endpoints only one mode is driven and the loop is degenerate"
            )
        if self.lambda_form not in ("standard", "literal"):
            raise PhysicsError(f"unknown lambda_form {self.lambda_form!r}")
        dx = math.sqrt(HBAR / (2.0 * self.mass * self.nu_a))
        dz = math.sqrt(HBAR / (2.0 * self.mass * self.nu_b))
        eta_x = self.k * dx * math.cos(self.alpha)
        eta_z = self.k * dz * math.sin(self.alpha)
        eta2 = eta_x**2 + eta_z**2
        if self.lambda_form == "standard":
            lam = 0.5 * self.rabi_Omega * math.exp(-eta2 / 2.0) * eta2
        else:
            # literal form: positive exponent, bracket in metres^2 (not dimensionless)
            w2 = (dx * math.cos(self.alpha)) ** 2 + (dz * math.sin(self.alpha)) ** 2
            lam = 0.5 * self.rabi_Omega * math.exp(self.k**2 * w2) * w2
        set_ = object.__setattr__
        set_(self, "dx", dx)
        set_(self, "dz", dz)
        set_(self, "eta_x", eta_x)
        set_(self, "eta_z", eta_z)
        set_(self, "theta", math.atan2(eta_z, eta_x))
        set_(self, "lam", lam)
        set_(self, "delta_res", self.nu_a + self.nu_b)
        set_(self, "dnu", self.nu_a - self.nu_b)
        set_(self, "nu_bar", 0.5 * (self.nu_a + self.nu_b))

    def to_dict(self) -> dict:
        return asdict(self)


def coupling_geometry(nu_a, nu_b, alpha, k, rabi_Omega, mass, lambda_form="standard") -> CouplingGeometry:
    return CouplingGeometry(nu_a, nu_b, alpha, k, rabi_Omega, mass, lambda_form)


def alpha_for_theta(theta: float, nu_a: float, nu_b: float, mass: float) -> float:
    """Laser angle that produces mixing angle ``theta``: tan(alpha) = (dx/dz) tan(theta)."""
    if not 0.0 < theta < math.pi / 2:
        raise PhysicsError("theta must lie strictly inside (0, pi/2)")
    # dx/dz = sqrt(nu_b/nu_a); hbar and mass cancel
    return math.atan(math.sqrt(nu_b / nu_a) * math.tan(theta))


def geometry_for_ratio(
    nu_a: float,
    dnu_over_lambda: float,
    k: float,
    rabi_Omega: float,
    mass: float,
    *,
    theta: float | None = None,
    alpha: float | None = None,
    lambda_form: str = "standard",
) -> CouplingGeometry:
    """Solve for ``nu_b`` so that ``(nu_a - nu_b) / lambda`` equals ``dnu_over_lambda``.

    Exactly one of ``theta`` and ``alpha`` is required; ``theta`` is re-targeted
    at every trial ``nu_b`` since the widths depend on it.
    """
    if (theta is None) == (alpha is None):
        raise PhysicsError("give exactly one of theta, alpha")

    def build(nu_b):
        al = alpha if alpha is not None else alpha_for_theta(theta, nu_a, nu_b, mass)
        return CouplingGeometry(nu_a, nu_b, al, k, rabi_Omega, mass, lambda_form)

    if dnu_over_lambda == 0:
        return build(nu_a)

    def f(nu_b):
        g = build(nu_b)
        return g.dnu - dnu_over_lambda * g.lam

    if dnu_over_lambda > 0:
        lo, hi = 0.5 * nu_a, nu_a
    else:
        lo, hi = nu_a, 2.0 * nu_a
    if f(lo) * f(hi) > 0:
        raise PhysicsError("dnu_over_lambda is not reachable with nu_b in [nu_a/2, 2 nu_a]")
    nu_b = brentq(f, lo, hi, xtol=1e-14 * nu_a, rtol=1e-15, maxiter=200)
    return build(nu_b)


@dataclass(frozen=True)
class ValidityThresholds:
    """Operational cut-offs for the "much smaller than" conditions."""

    lamb_dicke_max: float = 0.3
    weak_drive_factor: float = 10.0
    anisotropy_factor: float = 10.0
    adiabatic_max: float = 0.1
    coherence_lambda_fraction: float = 10.0


def feasibility_report(g, thresholds: ValidityThresholds = ValidityThresholds()) -> dict:
    """Adiabaticity and cycle-vs-coherence arithmetic; needs only ``lam`` and ``dnu``."""
    th = thresholds
    ratio = (g.dnu / g.lam) ** 2
    isotropic = g.dnu == 0
    T = math.inf if isotropic else 4.0 * math.pi / abs(g.dnu)
    tau = th.coherence_lambda_fraction / g.lam
    t_over_tau = T / tau
    return {
        "adiabatic_ratio": ratio,
        "adiabatic_ok": ratio < th.adiabatic_max,
        "dnu_max": g.lam * math.sqrt(th.adiabatic_max),
        "isotropic": isotropic,
        "cycle_period": T,
        "coherence_time_estimate": tau,
        "cycle_vs_coherence": t_over_tau,
        "decoherence_marginal": (not isotropic) and t_over_tau > 1.0,
    }


def validity_report(g: CouplingGeometry, thresholds: ValidityThresholds = ValidityThresholds()) -> dict:
    """Flat report of the approximations behind the effective model plus
    :func:`feasibility_report`. An isotropic trap reports an infinite cycle
    with ``isotropic = True`` rather than raising."""
    th = thresholds
    nu_min = min(g.nu_a, g.nu_b)
    out = {
        "eta_x": g.eta_x,
        "eta_z": g.eta_z,
        "lamb_dicke_ok": abs(g.eta_x) < th.lamb_dicke_max and abs(g.eta_z) < th.lamb_dicke_max,
        "weak_drive_ok": g.rabi_Omega < nu_min / th.weak_drive_factor,
        "small_anisotropy_ok": abs(g.dnu) < nu_min / th.anisotropy_factor,
    }
    out.update(feasibility_report(g, th))
    return out

@dataclass(frozen=True)
class EffectiveModel:
    """The four numbers the interaction-picture dynamics depend on.

    Duck-type compatible with :class:`CouplingGeometry` wherever only
    ``lam``, ``theta``, ``dnu`` and the secular frequencies are read, which is
    convenient for dimensionless (lambda = 1) studies.
    """

    lam: float
    dnu: float
    theta: float
    nu_bar: float = 0.0

    @property
    def nu_a(self) -> float:
        return self.nu_bar + self.dnu / 2.0

    @property
    def nu_b(self) -> float:
        return self.nu_bar - self.dnu / 2.0

    def to_dict(self) -> dict:
        return asdict(self)


def effective_model(g) -> EffectiveModel:
    return EffectiveModel(lam=g.lam, dnu=g.dnu, theta=g.theta, nu_bar=g.nu_bar)

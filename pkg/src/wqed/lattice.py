"""Parameter model and closed-form physics of the emitter array.

Everything here is analytic: the dark-state dispersion of the infinite
array, boundary coefficients of the finite array, the resonant momentum
``k_omega`` and second-order (in ``eta``) estimates of self-energy,
quasiparticle residue, effective mass and modulation amplitude.

Units: hbar = 1, energies in the same unit as ``gamma0``, momenta in 1/d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DivergentDispersion, NoBracket, ValidationError

POLE_TOL = 1e-9
LAMB_DICKE_LIMIT = 0.3
DEFAULT_ALPHA = 4.0


class LambDickeWarning(UserWarning):
    pass


class DomainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ArrayParams:
    """Physical parameters of a finite array of N vibrating emitters.

    Sites sit at ``z_m = m * spacing`` for ``m = 1..N``.
    """

    n_sites: int
    gamma0: float
    omega: float
    phi: float
    eta: float = 0.0
    spacing: float = 1.0
    lamb_dicke_warning: bool = field(init=False, compare=False)

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise ValidationError("n_sites", f"must be an integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if self.n_sites < 2:
            raise ValidationError("n_sites", "must be >= 2")
        for name in ("gamma0", "omega", "spacing"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be finite and > 0, got {value!r}")
        if not (0.0 < self.phi < 2 * math.pi):
            raise ValidationError("phi", f"must lie in (0, 2pi), got {self.phi!r}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValidationError("eta", f"must be finite and >= 0, got {self.eta!r}")
        flag = self.eta >= LAMB_DICKE_LIMIT
        object.__setattr__(self, "lamb_dicke_warning", flag)
        if flag:
            warnings.warn(
                f"eta={self.eta} >= {LAMB_DICKE_LIMIT}: second-order Lamb-Dicke expansion is unreliable",
                LambDickeWarning,
                stacklevel=3,
            )

    @property
    def k0(self) -> float:
        return self.phi / self.spacing

    @property
    def positions(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.n_sites + 1)

    def replace(self, **changes) -> "ArrayParams":
        values = {
            "n_sites": self.n_sites,
            "gamma0": self.gamma0,
            "omega": self.omega,
            "phi": self.phi,
            "eta": self.eta,
            "spacing": self.spacing,
        }
        values.update(changes)
        return ArrayParams(**values)

    def as_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "gamma0": self.gamma0,
            "omega": self.omega,
            "phi": self.phi,
            "eta": self.eta,
            "spacing": self.spacing,
        }


@dataclass(frozen=True)
class BoundaryCoeffs:
    g: complex
    h: complex
    k: complex


@dataclass(frozen=True)
class SelfEnergy:
    sigma2: complex
    sigma_sr: complex
    sigma_d: complex
    domain_warning: bool = False

    @property
    def total(self) -> complex:
        return self.sigma2 + self.sigma_sr + self.sigma_d


@dataclass(frozen=True)
class AnalyticEstimates:
    k_omega: float
    beta: float
    mass_ratio: float
    mass_ratio_refined: float
    z_factor: float
    alpha: float = DEFAULT_ALPHA
    v_modulus: float = 0.0
    v_phase: float = -math.pi / 2

    @property
    def v(self) -> complex:
        return self.v_modulus * complex(math.cos(self.v_phase), math.sin(self.v_phase))


def _pole_distance(x) -> np.ndarray:
    """Distance of the phase ``x`` (radians) to the nearest multiple of 2pi."""
    x = np.asarray(x)
    r = np.remainder(x.real, 2 * np.pi)
    return np.hypot(np.minimum(r, 2 * np.pi - r), x.imag)


def _check_poles(k, params: ArrayParams) -> None:
    d = params.spacing
    near = np.minimum(_pole_distance((k - params.k0) * d), _pole_distance((k + params.k0) * d))
    if np.any(near < POLE_TOL):
        raise DivergentDispersion(f"k={k!r} is within {POLE_TOL} of +-k0={params.k0}")


def dispersion_dark(k, params: ArrayParams):
    """Dark-state energy ``(Gamma0/4)[cot((k0+k)d/2) + cot((k0-k)d/2)]``.

    Accepts scalars or arrays (real or complex ``k``).
    """
    _check_poles(k, params)
    d, k0 = params.spacing, params.k0
    k = np.asarray(k)
    out = 0.25 * params.gamma0 * (1 / np.tan((k0 + k) * d / 2) + 1 / np.tan((k0 - k) * d / 2))
    return out[()] if out.ndim == 0 else out


def superradiant_eigenvalue(params: ArrayParams) -> complex:
    # the cot(0) self-term is dropped; its weight lives in the -i N Gamma0 / 4 part
    real = 0.25 * params.gamma0 / math.tan(params.phi)
    return complex(real, -params.n_sites * params.gamma0 / 4)


def boundary_coeffs(k, params: ArrayParams) -> BoundaryCoeffs:
    _check_poles(k, params)
    d, k0 = params.spacing, params.k0
    z1, zn = d, params.n_sites * d
    g = np.exp(1j * (k - k0) * z1) / (1 - np.exp(1j * (k - k0) * d))
    h = np.exp(1j * (k + k0) * zn) / (np.exp(-1j * (k + k0) * d) - 1)
    return BoundaryCoeffs(complex(g), complex(h), k)


def quantization_residual(k, params: ArrayParams) -> float:
    """Relative mismatch of ``g_k h_{-k} = g_{-k} h_k``; zero at eigen-wavenumbers."""
    plus = boundary_coeffs(k, params)
    minus = boundary_coeffs(-k, params)
    lhs = plus.g * minus.h
    rhs = minus.g * plus.h
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs))


def solve_k_omega(params: ArrayParams, k_ref: float | None = None) -> float:
    """Resonant momentum: the root of ``eps(k_ref) = Omega + eps(k)`` on the lower branch.

    Bisection on ``(k0 + 1e-6/d, pi/d)``, where the dispersion is monotone.
    """
    d = params.spacing
    if k_ref is None:
        k_ref = math.pi / d
    target = dispersion_dark(k_ref, params) - params.omega

    def f(k):
        return dispersion_dark(k, params) - target

    lo, hi = params.k0 + 1e-6 / d, math.pi / d
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0 < f_hi or f_hi < 0 < f_lo):
        raise NoBracket(
            f"eps(k) - eps(k_ref) + Omega does not change sign on ({lo:.3g}, {hi:.3g}): "
            f"{f_lo:.3e}, {f_hi:.3e}"
        )
    return optimize.bisect(f, lo, hi, xtol=1e-15, rtol=1e-10 * 0.5, maxiter=400)


def self_energy(k: float, energy: float, params: ArrayParams, alpha: float = DEFAULT_ALPHA) -> SelfEnergy:
    """Second-order polariton self-energy near the zone edge (|k| ~ pi/d, phi << 1)."""
    domain_warning = params.phi > 0.1
    if domain_warning:
        warnings.warn(f"phi={params.phi} > 0.1: small-phi asymptotics unreliable", DomainWarning, stacklevel=2)
    eta2, g0, om = params.eta**2, params.gamma0, params.omega
    eps_k = dispersion_dark(k, params)
    sigma2 = -0.5j * g0 * eta2 - eta2 * eps_k
    sigma_sr = 0.5j * eta2 * g0
    im_d = -0.25 * eta2 * g0 * math.sqrt(g0 / (om * params.phi))
    kd = abs(k) * params.spacing
    re_d = -(eta2 * g0**2 / 16) * ((math.pi - kd) ** 2 / om + alpha / (om - energy))
    return SelfEnergy(complex(sigma2), complex(sigma_sr), complex(re_d, im_d), domain_warning)


def analytic_estimates(params: ArrayParams, alpha: float = DEFAULT_ALPHA) -> AnalyticEstimates:
    if params.phi > 0.1:
        warnings.warn(f"phi={params.phi} > 0.1: small-phi estimates unreliable", DomainWarning, stacklevel=2)
    g0, om, phi, eta2 = params.gamma0, params.omega, params.phi, params.eta**2
    k_omega = solve_k_omega(params)
    mass_ratio = 1.0 / (1.0 + eta2 * g0 / (phi * om))
    refined = 1.0 / (1.0 + (g0 / (phi * om) - alpha * g0**2 / (16 * om**2) - 1.0) * eta2)
    z_factor = 1.0 / (1.0 + alpha * g0**2 * eta2 / (16 * om**2))
    v_modulus = 0.25 * eta2 * g0 * math.sqrt(g0 / (om * phi))
    return AnalyticEstimates(
        k_omega=k_omega,
        beta=k_omega * params.spacing / math.pi,
        mass_ratio=mass_ratio,
        mass_ratio_refined=refined,
        z_factor=z_factor,
        alpha=alpha,
        v_modulus=v_modulus,
    )


def swt_validity_ratio(params: ArrayParams) -> float:
    """``N eta^2 phi^-1 (Gamma0/Omega)^3``; the SW decoupling needs this << 1."""
    return params.n_sites * params.eta**2 / params.phi * (params.gamma0 / params.omega) ** 3


def alpha_quadrature(params: ArrayParams, energy: float | None = None) -> float:
    """Principal-value integral behind the constant ``alpha`` of Re Sigma_d.

    Returns ``-PV int dq/2pi f_-(q)^2 / (1 + eps_q / (Omega - E))`` on [-pi, pi]
    with d = 1, evaluated with Cauchy-weighted adaptive quadrature around the two
    simple poles on (0, pi) (the integrand is even). The sign is chosen so the
    result plugs straight into :func:`self_energy`.
    """
    phi, om = params.phi, params.omega
    unit = params.replace(spacing=1.0)
    if energy is None:
        energy = float(dispersion_dark(math.pi, unit))
    a = om - energy

    def f_minus(q):
        return 1 / math.tan((q - phi) / 2) + 1 / math.tan((q + phi) / 2)

    def integrand(q):
        return f_minus(q) ** 2 * a / (a + dispersion_dark(q, unit))

    k_res = optimize.brentq(lambda q: a + dispersion_dark(q, unit), phi + 1e-7, math.pi)
    mid = 0.5 * (phi + k_res)
    total = 0.0
    for lo, hi, pole in ((0.0, mid, phi), (mid, math.pi, k_res)):
        val, _ = integrate.quad(lambda q, p=pole: integrand(q) * (q - p), lo, hi, weight="cauchy", wvar=pole, limit=500)
        total += val
    return -2 * total / (2 * math.pi)

"""Schrieffer-Wolff elimination of the one-phonon sector.

Works in the complex-orthogonal eigenbasis of H0 (``v_i^T v_j = delta_ij``),
builds the first-order coupling in that basis for every phonon momentum, and
accumulates the second-order correction

    Delta = (1/2N) sum_q [(G_q o DA) G_{-q} - G_{-q} (G_q o DB)],
    DA[a,b] = 1/(-Omega + e_a - e_b),  DB[a,b] = 1/(Omega + e_a - e_b),

with ``G_q = V^T C_q V``. The effective polariton Hamiltonian in the site basis
is ``(1-eta^2) H0 - i eta^2 Gamma0/2 + V Delta V^T``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DegenerateBasis, DivergentDispersion, NumericError, ResidualExceeded, StripeNotFound
from .hamiltonians import ComplexMatrix, Modulation, build_h0, h0_entries, site_coupling
from .lattice import ArrayParams, dispersion_dark, solve_k_omega, swt_validity_ratio

BIORTHO_TOL = 1e-8
FULL_TENSOR_MAX_N = 64


class NearResonance(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class EigenBasis:
    values: np.ndarray
    vectors: np.ndarray
    momentum_labels: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.values)

    def biorthogonality_error(self) -> float:
        v = self.vectors
        return float(np.max(np.abs(v.T @ v - np.eye(self.dim))))


class CouplingTensor:
    """Lazy ``g[a, b, j]`` on the phonon grid ``q_j = 2 pi j / (N d)``.

    ``slice(j)`` returns the symmetric N x N matrix for one momentum; the
    full rank-3 array is only materialized on request for small N.
    """

    def __init__(self, params: ArrayParams, basis: EigenBasis, eta: float | None = None):
        self.params = params
        self.basis = basis
        n = params.n_sites
        self._w = site_coupling(params, eta) @ basis.vectors
        self._phase = 2 * np.pi * np.outer(np.arange(n), np.arange(1, n + 1)) / n

    @property
    def n(self) -> int:
        return self.params.n_sites

    def slice(self, j: int) -> np.ndarray:
        e = np.exp(1j * self._phase[j % self.n])
        p = (e[:, None] * self.basis.vectors).T @ self._w
        return p + p.T

    @property
    def entries(self) -> np.ndarray:
        if self.n > FULL_TENSOR_MAX_N:
            raise MemoryError(f"full coupling tensor refused for N={self.n} > {FULL_TENSOR_MAX_N}; use slice()")
        return np.stack([self.slice(j) for j in range(self.n)], axis=2)


@dataclass(frozen=True, eq=False)
class SwtResult:
    delta: ComplexMatrix
    h_prime: ComplexMatrix
    validity_ratio: float
    basis: EigenBasis
    delta_unit: np.ndarray
    near_resonance: bool = False


@dataclass(frozen=True, eq=False)
class ExtractedModulation:
    v_k: np.ndarray
    theta_k: np.ndarray
    delta_eps_k: np.ndarray
    k: np.ndarray
    offset: int
    collapsed: Modulation
    stripe_contrast: float


def _momentum_grid(n: int, spacing: float = 1.0) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / (n * spacing)


def _dft(n: int) -> np.ndarray:
    """Unitary DFT on sites ``m = 1..N``: column j is the Bloch wave ``e^{i k_j m}/sqrt(N)``."""
    return np.exp(1j * np.outer(np.arange(1, n + 1), _momentum_grid(n))) / math.sqrt(n)


def h0_eigenbasis(h0: ComplexMatrix, tol: float = 1e-8, spacing: float = 1.0) -> EigenBasis:
    a = np.asarray(h0)
    n = a.shape[0]
    w, v = np.linalg.eig(a)
    order = np.lexsort((w.imag, w.real))
    w, v = w[order], v[:, order]
    norm2 = np.sum(v * v, axis=0)
    bad = np.flatnonzero(np.abs(norm2) < 1e-10)
    if bad.size:
        raise DegenerateBasis(int(bad[0]), complex(norm2[bad[0]]))
    v = v / np.sqrt(norm2)
    # sign is free after v^T v = 1; make the largest component have Re > 0
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(n)]
    v = v * np.where(lead.real < 0, -1.0, 1.0)
    scale = np.linalg.norm(a)
    resid = np.linalg.norm(a @ v - v * w, axis=0)
    if scale > 0 and resid.max() > tol * scale:
        raise ResidualExceeded(float(resid.max()), tol * scale)
    gram = np.abs(v.T @ v - np.eye(n))
    if gram.max() > BIORTHO_TOL:
        worst = int(np.argmax(gram.max(axis=0)))
        raise DegenerateBasis(worst, complex(norm2[worst]))
    overlap = np.abs(_dft(n).conj().T @ v)
    k = _momentum_grid(n, spacing)
    k = np.where(k > np.pi / spacing, k - 2 * np.pi / spacing, k)
    labels = np.abs(k[np.argmax(overlap, axis=0)])
    return EigenBasis(w, v, labels)


def eigen_wavenumber(value: complex, k_guess: float, params: ArrayParams) -> complex:
    """Complex ``k`` with ``eps(k) = value`` on the analytic dispersion, by Newton from ``k_guess``.

    The guess is first snapped to the nearest open-chain standing wave
    ``pi j / ((N+1) d)``; this keeps it off the flat zone edge k = pi/d.
    """
    d, k0, g0, n = params.spacing, params.k0, params.gamma0, params.n_sites
    j = min(max(round(abs(k_guess) * (n + 1) * d / math.pi), 1), n)
    k_guess = math.copysign(math.pi * j / ((n + 1) * d), k_guess)

    def f(k):
        return dispersion_dark(k, params) - value

    def fprime(k):
        return g0 * d / 8 * (1 / np.sin((k0 - k) * d / 2) ** 2 - 1 / np.sin((k0 + k) * d / 2) ** 2)

    with np.errstate(all="ignore"):
        try:
            k = complex(optimize.newton(f, complex(k_guess), fprime=fprime, tol=1e-13, maxiter=100))
        except (RuntimeError, DivergentDispersion) as exc:
            raise NumericError(f"no eigen-wavenumber near {k_guess:.6g} for value {value:.6g}: {exc}") from None
    if not cmath.isfinite(k):
        raise NumericError(f"no eigen-wavenumber near {k_guess:.6g} for value {value:.6g}")
    return k


def coupling_tensor(params: ArrayParams, basis: EigenBasis) -> CouplingTensor:
    return CouplingTensor(params, basis)


def swt_delta_unit(params: ArrayParams, basis: EigenBasis) -> tuple[np.ndarray, bool]:
    """Delta at eta = 1 in the H0 eigenbasis, plus a near-resonance flag.

    Delta is exactly quadratic in eta, so callers scale by eta^2.
    """
    n, om = params.n_sites, params.omega
    w = basis.values
    gap = w[:, None] - w[None, :]
    near = bool(np.min(np.abs(gap - om)) < 1e-6 * om or np.min(np.abs(gap + om)) < 1e-6 * om)
    if near:
        warnings.warn("energy denominator within 1e-6 Omega of zero; Delta unreliable", NearResonance, stacklevel=3)
    da = 1.0 / (-om + gap)
    db = 1.0 / (om + gap)
    tensor = CouplingTensor(params, basis, eta=1.0)
    delta = np.zeros((n, n), dtype=complex)
    # G_0 vanishes; pair q with -q so each slice is built once
    for j in range(1, n // 2 + 1):
        jm = n - j
        gp = tensor.slice(j)
        if jm == j:
            delta += (gp * da) @ gp - gp @ (gp * db)
            continue
        gm = tensor.slice(jm)
        delta += (gp * da) @ gm - gm @ (gp * db)
        delta += (gm * da) @ gp - gp @ (gm * db)
    return delta / (2 * n), near


def swt_hamiltonian(
    params: ArrayParams,
    basis: EigenBasis | None = None,
    delta_unit: np.ndarray | None = None,
) -> SwtResult:
    """Second-order effective polariton Hamiltonian.

    ``basis`` and ``delta_unit`` may be passed to reuse work across an eta
    sweep; both depend on (N, Gamma0, Omega, phi) only.
    """
    h0 = h0_entries(params)
    if basis is None:
        basis = h0_eigenbasis(build_h0(params), spacing=params.spacing)
    near = False
    if delta_unit is None:
        delta_unit, near = swt_delta_unit(params, basis)
    eta2 = params.eta**2
    delta = eta2 * delta_unit
    v = basis.vectors
    correction = v @ delta @ v.T
    # Delta is symmetric, so this only removes rounding noise of the two products
    correction = 0.5 * (correction + correction.T)
    h_prime = (1 - eta2) * h0 - 0.5j * eta2 * params.gamma0 * np.eye(params.n_sites) + correction
    label = f"swt N={params.n_sites} eta={params.eta!r}"
    return SwtResult(
        delta=ComplexMatrix(delta, f"delta {label}"),
        h_prime=ComplexMatrix(h_prime, f"h_prime {label}"),
        validity_ratio=swt_validity_ratio(params),
        basis=basis,
        delta_unit=delta_unit,
        near_resonance=near,
    )


def _kernel(x: float, n: int) -> complex:
    """``mean_{m=1..N} e^{i 2 pi x m}``."""
    m = np.arange(1, n + 1)
    return complex(np.mean(np.exp(2j * np.pi * x * m)))


def pi_index(n: int) -> int:
    # nearest grid index to k = pi/d; for odd N the two candidates tie, take the lower
    return n // 2 if n % 2 == 0 else (n - 1) // 2


def extract_from_site_matrix(site: np.ndarray, beta: float, n: int, stripe_factor: float = 3.0) -> ExtractedModulation:
    """Fit ``V_k cos(2 pi beta m + theta_k)`` to the momentum stripes of a site-basis matrix.

    With ``r = round(N beta)`` the stripe entries are
    ``M1 = D[j, j+r] = a K(beta + r/N) + b K(-beta + r/N)`` and
    ``M2 = D[j+r, j] = a K(beta - r/N) + b K(-beta - r/N)``, where K is the
    finite-N Dirichlet kernel and a, b are the amplitudes of ``e^{+-i 2 pi beta m}``.
    Solving this 2x2 system gives ``V = 2 sqrt(a b)``, ``theta = arg(a/b)/2``. When
    ``N beta`` is an integer it reduces to ``V = 2 sqrt(M1 M2)``, ``theta = arg(M2/M1)/2``.
    """
    f = _dft(n)
    dk = f.conj().T @ site @ f
    r = int(round(n * beta))
    j = np.arange(n)
    jr = (j + r) % n
    m1 = dk[j, jr]
    m2 = dk[jr, j]

    mag = np.abs(dk)
    offsets = (j[None, :] - j[:, None]) % n
    on_stripe = (offsets == r % n) | (offsets == (-r) % n)
    off_stripe = ~on_stripe & (offsets != 0)
    stripe = float(np.mean(mag[on_stripe]))
    floor = float(np.median(mag[off_stripe])) if off_stripe.any() else 0.0
    if r % n == 0 or not stripe > stripe_factor * floor:
        raise StripeNotFound(f"mean |Delta| on offset {r} is {stripe:.3e}, off-stripe median {floor:.3e}")

    kern = np.array(
        [
            [_kernel(beta + r / n, n), _kernel(-beta + r / n, n)],
            [_kernel(beta - r / n, n), _kernel(-beta - r / n, n)],
        ]
    )
    ab = np.linalg.solve(kern, np.vstack([m1, m2]))
    a, b = ab
    theta = np.angle(a / b) / 2
    theta = np.where(theta <= -np.pi / 2, theta + np.pi, theta)
    # the root's sign is tied to theta: take the one that reproduces a, b
    v = 2 * np.sqrt(a * b)
    miss = np.abs(v * np.exp(1j * theta) / 2 - a) + np.abs(v * np.exp(-1j * theta) / 2 - b)
    miss_flip = np.abs(-v * np.exp(1j * theta) / 2 - a) + np.abs(-v * np.exp(-1j * theta) / 2 - b)
    v = np.where(miss_flip < miss, -v, v)

    # resolve (V, theta) ~ (-V, theta + pi) by continuity, walking out from k = pi
    start = pi_index(n)
    for step in (1, -1):
        prev = start
        idx = start + step
        while 0 <= idx < n:
            if abs(v[idx] - v[prev]) > abs(v[idx] + v[prev]):
                v[idx] = -v[idx]
                theta[idx] += np.pi
            prev = idx
            idx += step
    theta = np.mod(theta, 2 * np.pi)
    collapsed = Modulation(complex(v[start]), beta, float(theta[start]))
    return ExtractedModulation(
        v_k=v,
        theta_k=theta,
        delta_eps_k=np.diagonal(dk).copy(),
        k=_momentum_grid(n),
        offset=r,
        collapsed=collapsed,
        stripe_contrast=stripe / floor if floor > 0 else math.inf,
    )


def extract_modulation(result: SwtResult, params: ArrayParams, beta: float | None = None) -> ExtractedModulation:
    if beta is None:
        beta = solve_k_omega(params) * params.spacing / math.pi
    v = result.basis.vectors
    site = v @ np.asarray(result.delta) @ v.T
    out = extract_from_site_matrix(site, beta, params.n_sites)
    k = out.k / params.spacing
    return ExtractedModulation(out.v_k, out.theta_k, out.delta_eps_k, k, out.offset, out.collapsed, out.stripe_contrast)

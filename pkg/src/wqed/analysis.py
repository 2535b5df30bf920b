"""Localization, spacing, multifractal, edge-state and gap-label diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, NotNormalized, TooFewLevels, ValidationError
from .spectral import BandSegmentation, Spectrum

NORM_TOL = 1e-10


def _check_norm(state) -> np.ndarray:
    psi = np.asarray(state)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > NORM_TOL:
        raise NotNormalized(f"state has norm {norm!r}")
    return psi


def ipr(state) -> float:
    psi = _check_norm(state)
    return float(np.sum(np.abs(psi) ** 4))


def boundary_weight(state, depth: int) -> float:
    psi = _check_norm(state)
    n = len(psi)
    if not (1 <= depth <= n // 2):
        raise ValidationError("depth", f"must lie in 1..{n // 2}, got {depth}")
    p = np.abs(psi) ** 2
    return float(min(1.0, np.sum(p[:depth]) + np.sum(p[-depth:])))


@dataclass(frozen=True, eq=False)
class SpacingSeries:
    e_o: np.ndarray
    o_e: np.ndarray
    energies: np.ndarray


def level_spacings(energies) -> SpacingSeries:
    """Even-odd ``E_2n - E_2n-1`` and odd-even ``E_2n+1 - E_2n`` spacings (1-based E)."""
    e = np.sort(np.asarray(energies, dtype=float))
    if len(e) < 3:
        raise TooFewLevels(f"need >= 3 energies, got {len(e)}")
    e_o = e[1::2] - e[0::2][: len(e) // 2]
    o_e = e[2::2] - e[1::2][: (len(e) - 1) // 2]
    return SpacingSeries(e_o, o_e, e)


def coefficient_of_variation(x) -> float:
    x = np.asarray(x, dtype=float)
    mean = float(np.mean(x))
    return float(np.std(x) / mean) if mean > 0 else math.inf


@dataclass(frozen=True, eq=False)
class MultifractalResult:
    q: float
    alpha_q: float
    f_alpha: float
    tau_q: float
    d_q: float
    fit_r2: float
    box_sizes: np.ndarray


def default_box_sizes(n: int) -> np.ndarray:
    top = int(math.floor(math.log2(n))) - 2
    return np.array(sorted({n // 2**s for s in range(1, top + 1)} - {0}), dtype=int)


def box_measure(weights: np.ndarray, size: int) -> np.ndarray:
    """Box probabilities for boxes of ``size`` sites; the trailing partial box is dropped."""
    nb = len(weights) // size
    mu = weights[: nb * size].reshape(nb, size).sum(axis=1)
    return mu / mu.sum()


def box_moments(state, size: int, q: float) -> tuple[float, float]:
    """``(sum mu(q) ln mu(q), sum mu(q) ln mu)`` with ``mu(q) = mu^q / sum mu^q``."""
    mu = box_measure(np.abs(np.asarray(state)) ** 2, size)
    mu = mu[mu > 0]
    muq = mu**q / np.sum(mu**q)
    return float(np.sum(muq * np.log(muq))), float(np.sum(muq * np.log(mu)))


def _slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def fractal_dimensions(state, q: float = 2.0, box_sizes=None) -> MultifractalResult:
    psi = _check_norm(state)
    if q == 1:
        raise ValidationError("q", "q = 1 needs the information-dimension limit; not supported")
    n = len(psi)
    sizes = default_box_sizes(n) if box_sizes is None else np.asarray(box_sizes, dtype=int)
    sizes = np.unique(sizes[(sizes >= 1) & (sizes <= n)])
    if len(sizes) < 3:
        raise DegenerateFit(f"need >= 3 valid box sizes, got {sizes.tolist()}")
    moments = np.array([box_moments(psi, int(s), q) for s in sizes])
    x = np.log(sizes / n)
    f_alpha, r2_f = _slope(x, moments[:, 0])
    alpha_q, r2_a = _slope(x, moments[:, 1])
    tau = q * alpha_q - f_alpha
    return MultifractalResult(q, alpha_q, f_alpha, tau, tau / (q - 1), min(r2_f, r2_a), sizes)


def mean_band_d2(spec: Spectrum, band, box_sizes=None) -> float:
    """Mean D_2 over the spectrum indices in ``band``."""
    band = list(band)
    if not band:
        raise ValidationError("band", "empty band")
    return float(np.mean([fractal_dimensions(spec.vectors[:, i], 2.0, box_sizes).d_q for i in band]))


@dataclass(frozen=True)
class GapLabel:
    rho: float
    mu: int
    nu: int
    residual: float


def gap_label(rho: float, beta: float, nu_max: int = 10, tol: float = 1e-3) -> GapLabel | None:
    """Solve ``rho = mu + nu beta`` over nonzero ``|nu| <= nu_max``.

    Among solutions with residual < tol the smallest ``|nu|`` wins, then the
    smallest residual, then positive ``nu``.
    """
    if nu_max < 1:
        raise ValidationError("nu_max", f"must be >= 1, got {nu_max}")
    best = None
    for nu in range(-nu_max, nu_max + 1):
        if nu == 0:
            continue
        mu = math.floor(rho - nu * beta + 0.5)
        res = abs(rho - mu - nu * beta)
        if res >= tol:
            continue
        key = (abs(nu), res, -nu)
        if best is None or key < best[0]:
            best = (key, GapLabel(rho, mu, nu, res))
    return None if best is None else best[1]


@dataclass(frozen=True)
class EdgeStateRecord:
    index: int
    energy: float
    ipr: float
    boundary_weight: float
    side: str
    partner: int | None = None


def edge_side(state, depth: int) -> str:
    p = np.abs(np.asarray(state)) ** 2
    left, right = float(np.sum(p[:depth])), float(np.sum(p[-depth:]))
    total = left + right
    if right < 0.1 * total:
        return "left"
    if left < 0.1 * total:
        return "right"
    return "both"


def edge_like(spec: Spectrum, indices, depth: int | None = None, bw_min: float = 0.5, ipr_factor: float = 3.0):
    """Mask over ``indices``: boundary weight > bw_min and IPR > ipr_factor/N."""
    n = spec.vectors.shape[0]
    depth = math.ceil(0.05 * n) if depth is None else depth
    out = np.zeros(len(indices), dtype=bool)
    for pos, i in enumerate(indices):
        v = spec.vectors[:, i]
        out[pos] = boundary_weight(v, depth) > bw_min and ipr(v) > ipr_factor / n
    return out


def detect_edge_states(
    spec: Spectrum,
    seg: BandSegmentation,
    indices=None,
    depth: int | None = None,
    bw_min: float = 0.5,
    ipr_factor: float = 3.0,
    pair_tol: float = 1e-6,
) -> list[EdgeStateRecord]:
    """Edge states lying strictly inside the gaps of ``seg``.

    ``indices`` maps positions of the segmented (ascending) energy array to
    spectrum indices; default is the identity. Two in-gap states pair when
    their energies differ by less than ``pair_tol`` and their sides differ. A
    near-degenerate pair that both read "both" is the even/odd hybrid of a
    left/right pair in a mirror-symmetric array and pairs as well.
    """
    n = spec.vectors.shape[0]
    if indices is None:
        indices = np.arange(len(spec))
    indices = np.asarray(indices)
    depth = math.ceil(0.05 * n) if depth is None else depth
    energies = spec.values.real[indices]
    records: list[EdgeStateRecord] = []
    for gap in seg.gaps:
        lo, hi = energies[gap.lower], energies[gap.upper]
        for pos in range(len(indices)):
            if not lo < energies[pos] < hi:
                continue
            i = int(indices[pos])
            v = spec.vectors[:, i]
            bw, pr = boundary_weight(v, depth), ipr(v)
            if bw > bw_min and pr > ipr_factor / n:
                records.append(EdgeStateRecord(i, float(energies[pos]), pr, bw, edge_side(v, depth)))
    return _pair(records, pair_tol)


def _pair(records: list[EdgeStateRecord], tol: float) -> list[EdgeStateRecord]:
    partner: dict[int, int] = {}
    candidates = []
    for a in range(len(records)):
        for b in range(a + 1, len(records)):
            ra, rb = records[a], records[b]
            gap_e = abs(ra.energy - rb.energy)
            sides_ok = ra.side != rb.side or ra.side == rb.side == "both"
            if gap_e < tol and sides_ok:
                candidates.append((gap_e, a, b))
    for _, a, b in sorted(candidates):
        if a in partner or b in partner:
            continue
        partner[a], partner[b] = b, a
    return [
        EdgeStateRecord(r.index, r.energy, r.ipr, r.boundary_weight, r.side, records[partner[k]].index if k in partner else None)
        for k, r in enumerate(records)
    ]


def implied_band_count(seg: BandSegmentation) -> float:
    """Band count implied by the resolved gaps: ``1 / median filling step``.

    Each band of a q-band spectrum holds 1/q of the states, so neighbouring
    gaps differ in filling by 1/q even when only part of the spectrum is
    resolved. NaN with fewer than two gaps.
    """
    rhos = np.sort([g.rho for g in seg.gaps])
    if len(rhos) < 2:
        return math.nan
    return float(1.0 / np.median(np.diff(rhos)))

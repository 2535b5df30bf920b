"""Verified dense non-Hermitian eigendecomposition, subradiant selection and
band/gap segmentation of real spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import ConvergenceFailure, DimensionOverflow, EmptySelection, ResidualExceeded, ValidationError

DEFAULT_EIG_CAP = 20_000


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    source_label: str = ""
    matrix_norm: float = 0.0

    def __len__(self) -> int:
        return len(self.values)

    @property
    def decay(self) -> np.ndarray:
        return -self.values.imag


def eigendecompose(m, tol: float = 1e-8, dim_cap: int = DEFAULT_EIG_CAP, label: str | None = None) -> Spectrum:
    """Full eigensystem of a dense complex matrix with in-process residual check.

    Ordering is ascending real part, ties by ascending imaginary part. Vectors
    have unit 2-norm with the largest-magnitude component real and positive.
    """
    a = np.array(m, dtype=complex, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix", f"must be square, got shape {a.shape}")
    n = a.shape[0]
    if n > dim_cap:
        raise DimensionOverflow(f"dimension {n} exceeds eigensolver cap {dim_cap}")
    if label is None:
        label = getattr(m, "label", "")
    w, _, vr, info = lapack.zgeev(a, compute_vl=0, compute_vr=1)
    if info > 0:
        raise ConvergenceFailure(int(info))
    if info < 0:
        raise ValidationError("matrix", f"zgeev rejected argument {-info}")
    order = np.lexsort((w.imag, w.real))
    w, vr = w[order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    lead = vr[np.argmax(np.abs(vr), axis=0), np.arange(n)]
    vr = vr * (np.abs(lead) / lead)
    vr[np.argmax(np.abs(vr), axis=0), np.arange(n)] = np.abs(lead)
    norm = float(np.linalg.norm(a))
    resid = np.linalg.norm(a @ vr - vr * w, axis=0)
    bound = tol * norm
    if n and resid.max() > bound:
        raise ResidualExceeded(float(resid.max()), bound)
    return Spectrum(w, vr, resid, label, norm)


@dataclass(frozen=True, eq=False)
class SubradiantSet:
    indices: np.ndarray
    criterion: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.indices)


def select_subradiant(spec: Spectrum, count: int | None = None, gamma_cut: float | None = None) -> SubradiantSet:
    """Pick the "most subradiant" states.

    count only: the ``count`` states of smallest decay.
    gamma_cut only: every state with decay < gamma_cut.
    both ("top"): among states with decay < gamma_cut, the ``count`` with the
    highest real energy. This keeps a contiguous upper part of the subradiant
    branch when the decay varies non-monotonically across it.
    The result is sorted by ascending real part.
    """
    decay = spec.decay
    if count is None and gamma_cut is None:
        raise ValidationError("criterion", "give count, gamma_cut or both")
    if count is not None and count < 1:
        raise ValidationError("count", f"must be >= 1, got {count}")
    if gamma_cut is None:
        picked = np.argsort(decay, kind="stable")[:count]
        kind = "count"
    else:
        picked = np.flatnonzero(decay < gamma_cut)
        kind = "threshold"
        if count is not None:
            by_energy = picked[np.lexsort((spec.values.imag[picked], spec.values.real[picked]))]
            picked = by_energy[len(by_energy) - count :] if count < len(by_energy) else by_energy
            kind = "top"
    if len(picked) == 0:
        raise EmptySelection(f"no state passes criterion count={count} gamma_cut={gamma_cut}")
    vals = spec.values[picked]
    picked = picked[np.lexsort((vals.imag, vals.real))]
    return SubradiantSet(picked, {"kind": kind, "count": count, "gamma_cut": gamma_cut})


@dataclass(frozen=True)
class Gap:
    lower: int  # last index of the band below (into the segmented array)
    upper: int  # first index of the band above
    width: float
    midpoint: float
    rho: float
    inside: tuple = ()  # in-gap states set aside by segment_bulk


@dataclass(frozen=True)
class BandSegmentation:
    bands: list
    gaps: list
    spacing_scale: float
    n_total: int
    offset: int = 0

    @property
    def n_bands(self) -> int:
        return len(self.bands)


def gap_thresholds(
    energies: np.ndarray, gap_factor: float = 5.0, window: int | None = 10, floor: float | None = None
) -> np.ndarray:
    """Per-spacing gap threshold: max(gap_factor * local median, floor * global median).

    ``floor`` defaults to ``gap_factor``.

    The local median is taken over up to ``window`` neighbouring spacings on each
    side (the spacing itself excluded). ``window=None`` gives the plain
    global-median rule.
    """
    sp = np.diff(energies)
    med = float(np.median(sp)) if len(sp) else 0.0
    floor = gap_factor if floor is None else floor
    if window is None or len(sp) < 2:
        return np.full(len(sp), gap_factor * med)
    local = np.empty(len(sp))
    for i in range(len(sp)):
        around = np.concatenate([sp[max(0, i - window) : i], sp[i + 1 : i + 1 + window]])
        local[i] = np.median(around)
    return np.maximum(gap_factor * local, floor * med)


def segment_bands(
    energies,
    gap_factor: float = 5.0,
    n_total: int | None = None,
    window: int | None = 10,
    offset: int = 0,
    floor: float | None = None,
) -> BandSegmentation:
    """Split an ascending real spectrum into bands at anomalously large spacings.

    ``offset`` counts states below the segmented window (e.g. the part of the
    spectrum not in the subradiant selection); filling is
    ``rho = (offset + states below the gap) / n_total``.
    """
    e = np.asarray(energies, dtype=float)
    if gap_factor <= 1:
        raise ValidationError("gap_factor", f"must be > 1, got {gap_factor}")
    if np.any(np.diff(e) < 0):
        raise ValidationError("energies", "must be sorted ascending")
    n_total = len(e) + offset if n_total is None else n_total
    if len(e) < 2:
        return BandSegmentation([(0, len(e))], [], 0.0, n_total, offset)
    sp = np.diff(e)
    cut = np.flatnonzero(sp > gap_thresholds(e, gap_factor, window, floor))
    starts = [0] + [int(c) + 1 for c in cut]
    stops = [int(c) + 1 for c in cut] + [len(e)]
    bands = list(zip(starts, stops))
    gaps = [
        Gap(int(c), int(c) + 1, float(sp[c]), float(0.5 * (e[c] + e[c + 1])), (offset + int(c) + 1) / n_total)
        for c in cut
    ]
    return BandSegmentation(bands, gaps, float(np.median(sp)), n_total, offset)


def segment_bulk(
    energies,
    flagged,
    gap_factor: float = 5.0,
    n_total: int | None = None,
    window: int | None = 10,
    offset: int = 0,
    floor: float | None = None,
) -> BandSegmentation:
    """Segment only the unflagged states, then place flagged ones (e.g. edge modes) back.

    Flagged states falling strictly inside a bulk gap are listed in that gap's
    ``inside`` and count half towards its filling, so a gap holding one in-gap
    pair gets the filling of its midpoint. Flagged states inside bands (or
    outside the bulk range) join the band they sit in. Indices refer to the
    full ascending ``energies`` array.
    """
    e = np.asarray(energies, dtype=float)
    flagged = np.asarray(flagged, dtype=bool)
    n_total = len(e) + offset if n_total is None else n_total
    bulk = np.flatnonzero(~flagged)
    if len(bulk) < 2:
        return segment_bands(e, gap_factor, n_total, window, offset, floor)
    inner = segment_bands(e[bulk], gap_factor, n_total, window, offset, floor)
    gaps = []
    for g in inner.gaps:
        lower, upper = int(bulk[g.lower]), int(bulk[g.upper])
        inside = tuple(range(lower + 1, upper))
        rho = (offset + upper - 0.5 * len(inside)) / n_total
        gaps.append(Gap(lower, upper, float(e[upper] - e[lower]), float(0.5 * (e[lower] + e[upper])), rho, inside))
    starts = [0] + [g.upper for g in gaps]
    stops = [g.lower + 1 for g in gaps] + [len(e)]
    return BandSegmentation(list(zip(starts, stops)), gaps, inner.spacing_scale, n_total, offset)

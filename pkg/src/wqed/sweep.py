"""Task orchestration: single runs, parameter sweeps and their result tables."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import (
    coefficient_of_variation,
    detect_edge_states,
    edge_like,
    fractal_dimensions,
    gap_label,
    implied_band_count,
    ipr,
    boundary_weight,
    level_spacings,
    mean_band_d2,
)
from .config import DEFAULT_ETA_OVER_PHI, DEFAULT_Q, RunConfig
from .errors import NumericError, StripeNotFound, ValidationError
from .hamiltonians import (
    Modulation,
    TruncationPolicy,
    build_full,
    build_h0,
    build_heff,
    load_matrix,
    physical_thetas,
)
from .lattice import ArrayParams, analytic_estimates, solve_k_omega, swt_validity_ratio
from .output import ResultTable
from .spectral import BandSegmentation, Spectrum, eigendecompose, segment_bands, segment_bulk, select_subradiant
from .swt import extract_modulation, h0_eigenbasis, swt_delta_unit, swt_hamiltonian

SPECTRUM_COLUMNS = [
    ("index", ""),
    ("re_energy", "gamma0 units"),
    ("im_energy", "gamma0 units"),
    ("decay", "gamma0 units"),
    ("ipr", ""),
    ("boundary_weight", ""),
    ("band_id", ""),
    ("is_edge", ""),
]


class SweepFailed(NumericError):
    """A sweep point failed; ``tables`` holds the rows computed before it plus a marker row."""

    def __init__(self, message: str, tables: list):
        super().__init__(message)
        self.tables = tables


@dataclass
class SpectrumAnalysis:
    spec: Spectrum
    indices: np.ndarray  # selected spectrum indices, ascending real part
    seg: BandSegmentation
    edges: list
    labels: list  # GapLabel or None per gap

    def band_of(self) -> dict:
        """Spectrum index -> band id (bands numbered from the bottom)."""
        out = {}
        for b, (lo, hi) in enumerate(self.seg.bands):
            for pos in range(lo, hi):
                out[int(self.indices[pos])] = b
        return out


def analyze_spectrum(spec: Spectrum, cfg: RunConfig, beta: float | None = None, bulk: bool = True) -> SpectrumAnalysis:
    """Subradiant selection, band segmentation, edge detection and gap labels.

    ``bulk`` segments the spectrum with edge-like states set aside (they sit
    in the gaps they close); otherwise all selected states are segmented alike.
    """
    n_total = len(spec)
    th = cfg.thresholds
    count = min(cfg.subradiant_count(), n_total)
    sel = select_subradiant(spec, count=count, gamma_cut=cfg.gamma_cut())
    idx = sel.indices
    energies = spec.values.real[idx]
    offset = int(np.sum(spec.values.real < energies[0]))
    depth = min(cfg.edge_depth(), spec.vectors.shape[0] // 2)
    flags = edge_like(spec, idx, depth, th.edge_bw_min, th.edge_ipr_factor)
    if bulk:
        seg = segment_bulk(energies, flags, th.gap_factor, n_total, th.gap_window, offset, th.gap_floor)
    else:
        seg = segment_bands(energies, th.gap_factor, n_total, th.gap_window, offset, th.gap_floor)
    edges = detect_edge_states(
        spec, seg, idx, depth, th.edge_bw_min, th.edge_ipr_factor, th.pair_tol_ratio * cfg.params.gamma0
    )
    labels = [None] * len(seg.gaps)
    if beta is not None:
        labels = [gap_label(g.rho, beta, th.nu_max, cfg.label_tol()) for g in seg.gaps]
    return SpectrumAnalysis(spec, idx, seg, edges, labels)


def spectrum_table(name: str, result: SpectrumAnalysis, depth: int) -> ResultTable:
    spec = result.spec
    bands = result.band_of()
    edge_ids = {r.index for r in result.edges}
    table = ResultTable(name, list(SPECTRUM_COLUMNS))
    for i, z in enumerate(spec.values):
        v = spec.vectors[:, i]
        bw = boundary_weight(v, depth) if len(v) >= 2 else 1.0
        table.add(i, z.real, z.imag, -z.imag, ipr(v), bw, bands.get(i, -1), i in edge_ids)
    return table


def bands_table(name: str, result: SpectrumAnalysis, box_sizes=None) -> ResultTable:
    table = ResultTable(
        name,
        [("band_id", ""), ("start_rank", ""), ("stop_rank", ""), ("size", ""), ("e_lo", "gamma0 units"),
         ("e_hi", "gamma0 units"), ("mean_d2", "")],
    )
    e = result.spec.values.real[result.indices]
    for b, (lo, hi) in enumerate(result.seg.bands):
        d2 = mean_band_d2(result.spec, result.indices[lo:hi], box_sizes)
        table.add(b, lo, hi, hi - lo, e[lo], e[hi - 1], d2)
    return table


def gaps_table(name: str, result: SpectrumAnalysis, beta: float | None) -> ResultTable:
    table = ResultTable(
        name,
        [("gap_id", ""), ("rho", ""), ("width", "gamma0 units"), ("midpoint", "gamma0 units"), ("mu", ""),
         ("nu", ""), ("residual", ""), ("n_edge", ""), ("n_pairs", "")],
        metadata={"beta": beta},
    )
    e = result.spec.values.real[result.indices]
    for k, (g, lab) in enumerate(zip(result.seg.gaps, result.labels)):
        inside = [r for r in result.edges if e[g.lower] < r.energy < e[g.upper]]
        pairs = sum(1 for r in inside if r.partner is not None) // 2
        table.add(
            k, g.rho, g.width, g.midpoint,
            None if lab is None else lab.mu, None if lab is None else lab.nu,
            None if lab is None else lab.residual, len(inside), pairs,
        )
    return table


def edges_table(name: str, result: SpectrumAnalysis) -> ResultTable:
    table = ResultTable(
        name,
        [("index", ""), ("energy", "gamma0 units"), ("ipr", ""), ("boundary_weight", ""), ("side", ""),
         ("partner", "")],
    )
    for r in result.edges:
        table.add(r.index, r.energy, r.ipr, r.boundary_weight, r.side, r.partner)
    return table


def subradiant_table(name: str, spec: Spectrum, count: int, weights=None) -> ResultTable:
    """The ``count`` states of smallest decay (optionally among zero-phonon dominated ones)."""
    cols = [("rank", ""), ("index", ""), ("re_energy", "gamma0 units"), ("im_energy", "gamma0 units"),
            ("decay", "gamma0 units")]
    if weights is not None:
        cols.append(("zero_phonon_weight", ""))
    table = ResultTable(name, cols)
    pool = np.arange(len(spec)) if weights is None else np.flatnonzero(weights > 0.5)
    order = pool[np.argsort(spec.decay[pool], kind="stable")][:count]
    for rank, i in enumerate(order):
        row = [rank, int(i), spec.values[i].real, spec.values[i].imag, spec.decay[i]]
        if weights is not None:
            row.append(float(weights[i]))
        table.add(*row)
    return table


def summary_table(name: str, items: list) -> ResultTable:
    table = ResultTable(name, [("quantity", ""), ("value", ""), ("unit", "")])
    for key, value, unit in items:
        table.add(key, value, unit)
    return table


def resolve_modulation(cfg: RunConfig, params: ArrayParams | None = None) -> tuple[Modulation, dict]:
    params = cfg.params if params is None else params
    spec = cfg.modulation
    info: dict = {"modulation_source": spec.source}
    if spec.source == "explicit":
        mod = Modulation(spec.v, spec.beta, spec.theta)
    elif spec.source == "analytic":
        est = analytic_estimates(params, cfg.thresholds.alpha)
        beta = est.beta if spec.beta is None else spec.beta
        theta = physical_thetas(params, beta)[0] if spec.theta is None else spec.theta
        mod = Modulation(est.v, beta, theta)
    else:
        result = swt_hamiltonian(params)
        beta = solve_k_omega(params) * params.spacing / math.pi if spec.beta is None else spec.beta
        ext = extract_modulation(result, params, beta)
        theta = ext.collapsed.theta if spec.theta is None else spec.theta
        mod = Modulation(ext.collapsed.v, beta, theta)
        info["validity_ratio"] = result.validity_ratio
    return mod, info


def _spectrum(matrix, cfg: RunConfig) -> Spectrum:
    return eigendecompose(matrix, cfg.thresholds.eig_tol, cfg.thresholds.dim_cap)


def _depth(cfg: RunConfig) -> int:
    return min(cfg.edge_depth(), cfg.params.n_sites // 2)


def _map(fn, items, threads: int) -> list:
    """Evaluate ``fn`` over ``items`` in order; exceptions are returned, not raised."""

    def safe(x):
        try:
            return fn(x)
        except NumericError as exc:
            return exc

    if threads <= 1:
        return [safe(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(safe, items))


def _failure(table: ResultTable, grid_column: str, value, exc: Exception) -> None:
    row = [None] * len(table.columns)
    names = [c[0] for c in table.columns]
    row[names.index(grid_column)] = value
    row[-1] = f"failed: {type(exc).__name__}: {exc}"
    table.rows.append(tuple(row))


# --- tasks ---------------------------------------------------------------


def task_h0_spectrum(cfg: RunConfig, threads: int) -> list:
    spec = _spectrum(build_h0(cfg.params), cfg)
    result = analyze_spectrum(spec, cfg)
    p = cfg.params
    tables = [spectrum_table("spectrum", result, _depth(cfg))]
    total = complex(np.sum(spec.values))
    tables.append(
        summary_table(
            "summary",
            [
                ("trace_re", total.real, "gamma0 units"),
                ("trace_im", total.imag, "gamma0 units"),
                ("expected_trace_im", -p.n_sites * p.gamma0 / 2, "gamma0 units"),
                ("decay_sum", float(np.sum(spec.decay)), "gamma0 units"),
                ("min_decay", float(spec.decay.min()), "gamma0 units"),
                ("max_residual", float(spec.residuals.max()), ""),
            ],
        )
    )
    return tables


def task_full_ed(cfg: RunConfig, threads: int) -> list:
    p = cfg.params
    matrix = build_full(p, TruncationPolicy(1, True), cfg.thresholds.dim_cap)
    spec = _spectrum(matrix, cfg)
    weights = np.sum(np.abs(spec.vectors[: p.n_sites]) ** 2, axis=0)
    table = ResultTable(
        "spectrum_full",
        [("index", ""), ("re_energy", "gamma0 units"), ("im_energy", "gamma0 units"), ("decay", "gamma0 units"),
         ("zero_phonon_weight", "")],
    )
    for i, z in enumerate(spec.values):
        table.add(i, z.real, z.imag, -z.imag, float(weights[i]))
    count = min(cfg.subradiant_count(), p.n_sites)
    return [table, subradiant_table("subradiant_full", spec, count, weights)]


def task_swt(cfg: RunConfig, threads: int) -> list:
    p = cfg.params
    result = swt_hamiltonian(p)
    spec = _spectrum(result.h_prime, cfg)
    meta = {"validity_ratio": result.validity_ratio, "near_resonance": result.near_resonance}
    beta = solve_k_omega(p) * p.spacing / math.pi
    analysis = analyze_spectrum(spec, cfg, beta)
    tables = [
        spectrum_table("spectrum_swt", analysis, _depth(cfg)),
        subradiant_table("subradiant_swt", spec, min(cfg.subradiant_count(), p.n_sites)),
    ]
    mod_table = ResultTable(
        "modulation",
        [("k", "1/d"), ("v_re", "gamma0 units"), ("v_im", "gamma0 units"), ("theta", "rad"),
         ("delta_eps_re", "gamma0 units"), ("delta_eps_im", "gamma0 units")],
    )
    items = [("validity_ratio", result.validity_ratio, ""), ("beta", beta, ""),
             ("v_analytic_modulus", analytic_estimates(p, cfg.thresholds.alpha).v_modulus, "gamma0 units")]
    try:
        ext = extract_modulation(result, p, beta)
    except StripeNotFound as exc:
        items.append(("stripe_found", 0, ""))
        meta["stripe_error"] = str(exc)
    else:
        for j in range(p.n_sites):
            mod_table.add(ext.k[j], ext.v_k[j].real, ext.v_k[j].imag, ext.theta_k[j], ext.delta_eps_k[j].real,
                          ext.delta_eps_k[j].imag)
        c = ext.collapsed
        items += [("stripe_found", 1, ""), ("stripe_offset", ext.offset, ""), ("stripe_contrast", ext.stripe_contrast, ""),
                  ("v_re", c.v.real, "gamma0 units"), ("v_im", c.v.imag, "gamma0 units"),
                  ("v_modulus", abs(c.v), "gamma0 units"), ("theta", c.theta, "rad")]
    tables += [mod_table, summary_table("summary", items)]
    for t in tables:
        t.metadata.update(meta)
    return tables


def _heff_analysis(cfg: RunConfig):
    mod, info = resolve_modulation(cfg)
    spec = _spectrum(build_heff(cfg.params, mod), cfg)
    return mod, info, analyze_spectrum(spec, cfg, mod.beta)


def _mod_items(mod: Modulation, info: dict) -> list:
    return [("v_re", mod.v.real, "gamma0 units"), ("v_im", mod.v.imag, "gamma0 units"), ("beta", mod.beta, ""),
            ("theta", mod.theta, "rad"), ("modulation_source", info["modulation_source"], "")]


def task_heff(cfg: RunConfig, threads: int) -> list:
    mod, info, result = _heff_analysis(cfg)
    return [
        spectrum_table("spectrum_heff", result, _depth(cfg)),
        bands_table("bands", result, cfg.thresholds.box_sizes),
        gaps_table("gaps", result, mod.beta),
        edges_table("edges", result),
        summary_table("summary", _mod_items(mod, info)),
    ]


def task_labels(cfg: RunConfig, threads: int) -> list:
    mod, info, result = _heff_analysis(cfg)
    return [gaps_table("gaps", result, mod.beta), summary_table("summary", _mod_items(mod, info))]


def eta_grid(cfg: RunConfig) -> tuple:
    return cfg.grids.get("eta_over_phi", DEFAULT_ETA_OVER_PHI)


def task_sweep_eta(cfg: RunConfig, threads: int) -> list:
    p = cfg.params
    base = p.replace(eta=0.0)
    basis = h0_eigenbasis(build_h0(base), spacing=p.spacing)
    unit, near = swt_delta_unit(base, basis)
    beta = solve_k_omega(p) * p.spacing / math.pi
    grid = eta_grid(cfg)

    def point(ratio):
        params = p.replace(eta=ratio * p.phi)
        result = swt_hamiltonian(params, basis, unit)
        spec = _spectrum(result.h_prime, cfg)
        # plain segmentation: band membership of every selected state matters for D2
        return params, analyze_spectrum(spec, cfg, beta, bulk=False)

    spectra = ResultTable(
        "sweep_eta_spectra",
        [("eta_over_phi", ""), ("eta", ""), ("rank", ""), ("index", ""), ("re_energy", "gamma0 units"),
         ("im_energy", "gamma0 units"), ("band_id", ""), ("is_edge", ""), ("status", "")],
    )
    bands = ResultTable(
        "sweep_eta_bands",
        [("eta_over_phi", ""), ("band_from_top", ""), ("size", ""), ("e_lo", "gamma0 units"),
         ("e_hi", "gamma0 units"), ("mean_d2", ""), ("status", "")],
    )
    spacing = ResultTable(
        "sweep_eta_spacings",
        [("eta_over_phi", ""), ("n_levels", ""), ("cv_e_o", ""), ("cv_o_e", ""), ("status", "")],
    )
    tables = [spectra, bands, spacing]
    for t in tables:
        t.metadata.update({"beta": beta, "near_resonance": near})
    for ratio, out in zip(grid, _map(point, grid, threads)):
        if isinstance(out, Exception):
            for t in tables:
                _failure(t, "eta_over_phi", ratio, out)
            raise SweepFailed(f"eta/phi={ratio}: {out}", tables)
        params, res = out
        bmap = res.band_of()
        edge_ids = {r.index for r in res.edges}
        for rank, i in enumerate(res.indices):
            z = res.spec.values[i]
            spectra.add(ratio, params.eta, rank, int(i), z.real, z.imag, bmap.get(int(i), -1), int(i) in edge_ids, "ok")
        e = res.spec.values.real[res.indices]
        for top, (lo, hi) in enumerate(reversed(res.seg.bands)):
            d2 = mean_band_d2(res.spec, res.indices[lo:hi], cfg.thresholds.box_sizes)
            bands.add(ratio, top, hi - lo, e[lo], e[hi - 1], d2, "ok")
        s = level_spacings(e)
        spacing.add(ratio, len(e), coefficient_of_variation(s.e_o), coefficient_of_variation(s.o_e), "ok")
    return tables


def theta_grid(cfg: RunConfig, mod_beta: float) -> list:
    grid = list(cfg.grids.get("theta", ()))
    if not grid:
        n = cfg.thresholds.theta_points
        grid = [2 * math.pi * j / n for j in range(n)]
    flags = [False] * len(grid)
    if cfg.thresholds.include_physical_thetas:
        phys = physical_thetas(cfg.params, mod_beta)
        grid += list(phys)
        flags += [True, True]
    return list(zip(grid, flags))


def task_sweep_theta(cfg: RunConfig, threads: int) -> list:
    p = cfg.params
    mod, info = resolve_modulation(cfg)
    points = theta_grid(cfg, mod.beta)
    phys = physical_thetas(p, mod.beta)
    depth = _depth(cfg)

    def point(item):
        theta, _ = item
        spec = _spectrum(build_heff(p, Modulation(mod.v, mod.beta, theta)), cfg)
        return analyze_spectrum(spec, cfg, mod.beta)

    spectra = ResultTable(
        "sweep_theta_spectra",
        [("theta", "rad"), ("is_physical", ""), ("index", ""), ("re_energy", "gamma0 units"),
         ("im_energy", "gamma0 units"), ("band_id", ""), ("is_edge", ""), ("side", ""), ("status", "")],
    )
    gaps = ResultTable(
        "sweep_theta_gaps",
        [("theta", "rad"), ("gap_id", ""), ("rho", ""), ("nu", ""), ("e_lo", "gamma0 units"),
         ("e_hi", "gamma0 units"), ("n_edge", ""), ("edge_positions", ""), ("status", "")],
    )
    tables = [spectra, gaps]
    meta = {"beta": mod.beta, "v_re": mod.v.real, "v_im": mod.v.imag, "physical_thetas": list(phys), **info}
    for t in tables:
        t.metadata.update(meta)
    for (theta, physical), out in zip(points, _map(point, points, threads)):
        if isinstance(out, Exception):
            for t in tables:
                _failure(t, "theta", theta, out)
            raise SweepFailed(f"theta={theta}: {out}", tables)
        bmap = out.band_of()
        side = {r.index: r.side for r in out.edges}
        for i, z in enumerate(out.spec.values):
            spectra.add(theta, physical, i, z.real, z.imag, bmap.get(i, -1), i in side, side.get(i), "ok")
        e = out.spec.values.real[out.indices]
        for k, (g, lab) in enumerate(zip(out.seg.gaps, out.labels)):
            lo, hi = e[g.lower], e[g.upper]
            inside = [r for r in out.edges if lo < r.energy < hi]
            pos = " ".join(f"{(r.energy - lo) / (hi - lo):.6f}" for r in inside)
            gaps.add(theta, k, g.rho, None if lab is None else lab.nu, lo, hi, len(inside), pos, "ok")
    return tables


def beta_grid(cfg: RunConfig) -> list:
    grid = list(cfg.grids.get("beta", ()))
    if not grid:
        n, top = cfg.thresholds.beta_points, cfg.thresholds.beta_max
        grid = [top * (j + 1) / n for j in range(n)]
    return grid


def task_sweep_beta(cfg: RunConfig, threads: int) -> list:
    p = cfg.params
    spec_mod = cfg.modulation
    if spec_mod.source != "explicit":
        raise ValidationError("modulation", "sweep-beta needs an explicit modulation (v and theta)")
    grid = beta_grid(cfg)

    def point(beta):
        spec = _spectrum(build_heff(p, Modulation(spec_mod.v, beta, spec_mod.theta)), cfg)
        return analyze_spectrum(spec, cfg, beta)

    spectra = ResultTable(
        "sweep_beta_spectra",
        [("beta", ""), ("index", ""), ("re_energy", "gamma0 units"), ("im_energy", "gamma0 units"),
         ("band_id", ""), ("status", "")],
    )
    counts = ResultTable(
        "sweep_beta_bands",
        [("beta", ""), ("n_bands_resolved", ""), ("n_gaps", ""), ("implied_band_count", ""),
         ("inverse_beta_rounded", ""), ("status", "")],
    )
    tables = [spectra, counts]
    for beta, out in zip(grid, _map(point, grid, threads)):
        if isinstance(out, Exception):
            for t in tables:
                _failure(t, "beta", beta, out)
            raise SweepFailed(f"beta={beta}: {out}", tables)
        bmap = out.band_of()
        for i, z in enumerate(out.spec.values):
            spectra.add(beta, i, z.real, z.imag, bmap.get(i, -1), "ok")
        counts.add(beta, out.seg.n_bands, len(out.seg.gaps), implied_band_count(out.seg), round(1 / beta), "ok")
    return tables


def task_analyze(cfg: RunConfig, threads: int) -> list:
    if cfg.matrix is not None:
        matrix = load_matrix(cfg.matrix)
        if matrix.dim != cfg.params.n_sites:
            raise ValidationError("matrix", f"dimension {matrix.dim} does not match params.n_sites={cfg.params.n_sites}")
        source = cfg.matrix
    else:
        mod, _ = resolve_modulation(cfg)
        matrix = build_heff(cfg.params, mod)
        source = "heff"
    spec = _spectrum(matrix, cfg)
    result = analyze_spectrum(spec, cfg)
    depth = _depth(cfg)
    bmap = result.band_of()
    states = ResultTable(
        "states",
        [("rank", ""), ("index", ""), ("re_energy", "gamma0 units"), ("im_energy", "gamma0 units"),
         ("ipr", ""), ("boundary_weight", ""), ("d2", ""), ("band_id", "")],
        metadata={"source": source},
    )
    multi = ResultTable(
        "multifractal",
        [("index", ""), ("q", ""), ("alpha_q", ""), ("f_alpha", ""), ("tau_q", ""), ("d_q", ""), ("fit_r2", "")],
    )
    qs = cfg.grids.get("q", DEFAULT_Q)
    box = cfg.thresholds.box_sizes
    for rank, i in enumerate(result.indices):
        v = spec.vectors[:, i]
        d2 = fractal_dimensions(v, 2.0, box).d_q
        states.add(rank, int(i), spec.values[i].real, spec.values[i].imag, ipr(v), boundary_weight(v, depth), d2,
                   bmap.get(int(i), -1))
        for q in qs:
            r = fractal_dimensions(v, q, box)
            multi.add(int(i), q, r.alpha_q, r.f_alpha, r.tau_q, r.d_q, r.fit_r2)
    e = spec.values.real[result.indices]
    s = level_spacings(e)
    spacings = ResultTable("spacings", [("n", ""), ("e_o", "gamma0 units"), ("o_e", "gamma0 units")])
    for n in range(len(s.e_o)):
        spacings.add(n + 1, s.e_o[n], s.o_e[n] if n < len(s.o_e) else None)
    summary = summary_table(
        "summary",
        [("cv_e_o", coefficient_of_variation(s.e_o), ""), ("cv_o_e", coefficient_of_variation(s.o_e), ""),
         ("n_bands", result.seg.n_bands, "")],
    )
    return [states, multi, spacings, summary]


TASK_FUNCS = {
    "h0-spectrum": task_h0_spectrum,
    "full-ed": task_full_ed,
    "swt": task_swt,
    "heff": task_heff,
    "sweep-eta": task_sweep_eta,
    "sweep-theta": task_sweep_theta,
    "sweep-beta": task_sweep_beta,
    "analyze": task_analyze,
    "labels": task_labels,
}


def run_task(cfg: RunConfig, threads: int = 1) -> list:
    """Run ``cfg.task`` and return its result tables (metadata echo not yet attached)."""
    start = time.perf_counter()
    tables = TASK_FUNCS[cfg.task](cfg, threads)
    common = {"validity_ratio": swt_validity_ratio(cfg.params), "lamb_dicke_warning": cfg.params.lamb_dicke_warning}
    for t in tables:
        for key, value in common.items():
            t.metadata.setdefault(key, value)
        if cfg.record_timing:
            t.metadata["timing_s"] = time.perf_counter() - start
    return tables


# --- cross-checks used by the acceptance suite ---------------------------------


def d2_crossings(eta_values, band_d2: dict, level: float = 0.7, n_bands: int = 3) -> list:
    """eta at which the mean D2 of each of the top ``n_bands`` first drops below ``level``.

    ``band_d2[eta]`` lists band means from the top. When fewer bands are
    resolved at some eta, the missing ones take the lowest resolved band's
    value (they are still part of it). Linear interpolation between grid
    points; None if a band never crosses.
    """
    out = []
    for b in range(n_bands):
        series = []
        for eta in eta_values:
            vals = band_d2[eta]
            series.append(vals[b] if b < len(vals) else vals[-1])
        cross = None
        for k in range(1, len(series)):
            y0, y1 = series[k - 1], series[k]
            if y0 >= level > y1:
                x0, x1 = eta_values[k - 1], eta_values[k]
                cross = x0 + (x1 - x0) * (y0 - level) / (y0 - y1)
                break
        if cross is None and series and series[0] < level:
            cross = eta_values[0]
        out.append(cross)
    return out


def ipr_size_scaling(make_matrix, sizes, cfg_for, top_band: bool = True) -> float:
    """D2 from the finite-size scaling ``<IPR> ~ N^-D2`` over several array sizes.

    ``make_matrix(n)`` builds the matrix at size n; ``cfg_for(n)`` returns the
    RunConfig used for selection. Averages the IPR over the highest band
    (or the whole subradiant selection) and fits a log-log slope.
    """
    logs_n, logs_i = [], []
    for n in sizes:
        cfg = cfg_for(n)
        spec = _spectrum(make_matrix(n), cfg)
        res = analyze_spectrum(spec, cfg)
        lo, hi = res.seg.bands[-1] if top_band else (0, len(res.indices))
        vals = [ipr(spec.vectors[:, i]) for i in res.indices[lo:hi]]
        logs_n.append(math.log(n))
        logs_i.append(math.log(float(np.mean(vals))))
    slope = np.polyfit(logs_n, logs_i, 1)[0]
    return float(-slope)

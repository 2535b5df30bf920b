"""Acceptance criteria 1-9, each reported as one PASS/FAIL line in the terminal summary."""

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import record_criterion
from oracles import box_moments_brute
from wqed.analysis import box_moments, fractal_dimensions
from wqed.cli import main
from wqed.config import config_from_dict
from wqed.hamiltonians import Modulation, build_full, build_h0, build_heff
from wqed.lattice import ArrayParams, analytic_estimates, solve_k_omega
from wqed.spectral import eigendecompose
from wqed.sweep import d2_crossings, run_task
from wqed.swt import extract_modulation, swt_hamiltonian

GOLDEN = Path(__file__).parent / "golden" / "full_ed_n12.json"
SMALL = ArrayParams(12, 1.0, 1.0, math.pi / 50, math.pi / 50)
BASE240 = {"n_sites": 240, "gamma0": 0.1, "omega": 1.0, "phi": 0.03, "eta": 0.03}


def _verdict(number, checks: dict, elapsed: float, limit: float):
    checks = {**checks, f"runtime<{limit:g}s": elapsed < limit}
    ok = all(checks.values())
    detail = ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in checks.items()) + f" ({elapsed:.1f}s)"
    record_criterion(number, ok, detail)
    failed = [k for k, v in checks.items() if not v]
    assert not failed, f"criterion {number} failed: {failed}"


def _near_degenerate_top_pair(z):
    """The two least-decaying values sit much closer to each other than to the rest."""
    rest = np.abs(z[2:, None] - z[None, :2]).min()
    return abs(z[0] - z[1]) < 0.1 * rest


def test_criterion_1_swt_vs_full_ed():
    start = time.perf_counter()
    golden = json.loads(GOLDEN.read_text())
    ref = np.array([complex(r[0], r[1]) for r in golden["subradiant"]])
    spec = eigendecompose(swt_hamiltonian(SMALL).h_prime)
    got = spec.values[np.argsort(spec.decay, kind="stable")[:6]]
    # the golden file is checked against a fresh full diagonalization as well
    full = eigendecompose(build_full(SMALL))
    elapsed = time.perf_counter() - start
    # compared as sets: decays of ranks 3-5 are within 1e-3 of each other and their order is not meaningful
    rows, cols = linear_sum_assignment(np.abs(got[:, None] - ref[None, :]))
    rel = np.abs(got[rows].real - ref[cols].real) / np.abs(ref[cols].real)
    fresh = np.min(np.abs(full.values[:, None] - ref[None, :]), axis=0)
    checks = {
        "golden_reproduced": bool(np.all(fresh < 1e-10)),
        f"re_rel_err<0.1(max {rel.max():.3f})": bool(np.all(rel < 0.1)),
        "pair_in_swt": _near_degenerate_top_pair(got),
        "pair_in_full": _near_degenerate_top_pair(ref),
    }
    _verdict(1, checks, elapsed, 10)


def test_criterion_2_trace_and_decay_sum():
    start = time.perf_counter()
    checks = {}
    for n in (2, 12, 240, 600):
        p = ArrayParams(n, 0.1, 1.0, 0.03)
        spec = eigendecompose(build_h0(p))
        tol = 1e-10 * n * p.gamma0
        total = complex(np.sum(spec.values))
        checks[f"trace_N{n}"] = abs(total - (-0.5j * n * p.gamma0)) < tol
        checks[f"decay_sum_N{n}"] = abs(np.sum(spec.decay) - n * p.gamma0 / 2) < tol
        checks[f"decays_nonneg_N{n}"] = bool(np.all(spec.decay >= -1e-10 * p.gamma0))
    _verdict(2, checks, time.perf_counter() - start, 60)


def test_criterion_3_resonant_momentum():
    start = time.perf_counter()
    checks = {}
    for phi in (0.01, 0.03, 0.06):
        for ratio in (0.05, 0.1):
            p = ArrayParams(240, ratio, 1.0, phi)
            k = solve_k_omega(p)
            approx = math.sqrt(phi * ratio)
            err = abs(k - approx) / approx
            checks[f"phi={phi},g/o={ratio}:{err:.3f}"] = err < 0.15
    _verdict(3, checks, time.perf_counter() - start, 1)


@pytest.fixture(scope="module")
def base240_extraction():
    start = time.perf_counter()
    p = ArrayParams(**BASE240)
    result = swt_hamiltonian(p)
    beta = solve_k_omega(p) / math.pi
    ext = extract_modulation(result, p, beta)
    return p, beta, ext, time.perf_counter() - start


def test_criterion_4_emergent_quasiperiodicity(base240_extraction):
    p, beta, ext, swt_time = base240_extraction
    analytic = analytic_estimates(p).v_modulus
    cfg = config_from_dict(
        {"task": "heff", "params": BASE240,
         "modulation": {"source": "explicit", "v": [ext.collapsed.v.real, ext.collapsed.v.imag], "beta": beta,
                        "theta": ext.collapsed.theta}}
    )
    bands = run_task(cfg)[1]
    ratio = abs(ext.collapsed.v) / analytic
    checks = {
        f"stripe_offset={ext.offset}": ext.offset == round(p.n_sites * beta),
        f"analytic_V={analytic:.4g}": abs(analytic - 4.108e-5) < 5e-4 * 4.108e-5,
        f"|V|/analytic={ratio:.3f}": 0.5 <= ratio <= 2,
        f"bands={len(bands.rows)}": len(bands.rows) >= 3,
    }
    _verdict(4, checks, swt_time, 300)


def test_criterion_5_edge_pairs_and_labels(base240_extraction):
    p, beta, ext, _ = base240_extraction
    start = time.perf_counter()
    v = [ext.collapsed.v.real, ext.collapsed.v.imag]
    base = {"params": BASE240, "modulation": {"source": "explicit", "v": v, "beta": beta, "theta": ext.collapsed.theta}}
    gaps = run_task(config_from_dict({**base, "task": "labels"}))[0]
    cols = [c[0] for c in gaps.columns]
    rows = [dict(zip(cols, r)) for r in gaps.rows]
    nus = [r["nu"] for r in rows]
    one_pair = [r["n_pairs"] == 1 for r in rows]
    labelled = all(r["nu"] is not None and r["residual"] < 2 / p.n_sites for r in rows)
    steps = [abs(a - b) for a, b in zip(nus, nus[1:])] if labelled else []

    sweep = config_from_dict({**base, "task": "sweep-theta"})
    theta_gaps = run_task(sweep)[1]
    cols = [c[0] for c in theta_gaps.columns]
    spans = {}
    for r in theta_gaps.rows:
        r = dict(zip(cols, r))
        if r["nu"] is None or not r["edge_positions"]:
            continue
        pos = [float(x) for x in r["edge_positions"].split()]
        lo, hi = spans.get(r["nu"], (1.0, 0.0))
        spans[r["nu"]] = (min(lo, *pos), max(hi, *pos))
    traversed = [nu for nu in nus if nu in spans and spans[nu][1] - spans[nu][0] > 0.5]
    checks = {
        f"one_pair_per_gap({sum(one_pair)}/{len(rows)})": all(one_pair) and bool(rows),
        f"labels_residual<2/N(nu={nus})": labelled,
        "neighbour_dnu=1": bool(steps) and all(s == 1 for s in steps),
        f"theta_traversal({len(traversed)}/{len(nus)})": len(traversed) == len(nus),
    }
    _verdict(5, checks, time.perf_counter() - start, 600)


def test_criterion_6_butterfly_band_counts():
    start = time.perf_counter()
    cfg = config_from_dict(
        {"task": "sweep-beta", "params": {"n_sites": 200, "gamma0": 1.0, "omega": 1.0, "phi": 0.059},
         "modulation": {"source": "explicit", "v": 0.02, "theta": 0.0}}
    )
    counts = run_task(cfg)[1]
    grid = np.array(counts.column("beta"))
    implied = np.array(counts.column("implied_band_count"), dtype=float)
    checks = {f"grid_points={len(grid)}": len(grid) == 200 and grid.max() == 0.25 and grid.min() > 0}
    for target in (1 / 20, 1 / 15, 1 / 10):
        j = int(np.argmin(np.abs(grid - target)))
        b = grid[j]
        checks[f"beta={b:.5f}:count={implied[j]:.2f}"] = abs(implied[j] - round(1 / b)) <= 1
    _verdict(6, checks, time.perf_counter() - start, 600)


def test_criterion_7_ergodic_multifractal():
    start = time.perf_counter()
    grid = [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
    cfg = config_from_dict(
        {"task": "sweep-eta", "params": {"n_sites": 600, "gamma0": 0.1, "omega": 1.0, "phi": 0.03},
         "grids": {"eta_over_phi": grid}}
    )
    _, bands, spacings = run_task(cfg)
    band_d2 = {x: [] for x in grid}
    for ratio, top, *_, d2, _status in bands.rows:
        band_d2[ratio].append(d2)
    cv = {r[0]: (r[2], r[3]) for r in spacings.rows}
    cross = d2_crossings(grid, band_d2)
    lo, hi = band_d2[0.1][0], band_d2[1.5][0]
    ordered = all(c is not None for c in cross) and cross == sorted(cross)
    checks = {
        f"D2(0.1)={lo:.3f}>0.8": lo > 0.8,
        f"cv(0.1)={max(cv[0.1]):.2f}<1": max(cv[0.1]) < 1,
        f"D2(1.5)={hi:.3f}<0.6": hi < 0.6,
        f"cv(1.5)={min(cv[1.5]):.2f}>1": min(cv[1.5]) > 1,
        f"crossings={[None if c is None else round(c, 3) for c in cross]}": ordered,
    }
    _verdict(7, checks, time.perf_counter() - start, 900)


def test_criterion_8_multifractal_sanity():
    start = time.perf_counter()
    n = 1024
    uniform = np.full(n, 1 / math.sqrt(n))
    single = np.zeros(n)
    single[5] = 1
    sparse = np.zeros(n)
    sparse[:: int(math.isqrt(n))] = 1
    sparse /= np.linalg.norm(sparse)
    d_u = fractal_dimensions(uniform).d_q
    d_s = fractal_dimensions(single).d_q
    d_r = fractal_dimensions(sparse).d_q
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(5):
        v = rng.normal(size=128) + 1j * rng.normal(size=128)
        v /= np.linalg.norm(v)
        for size in (1, 2, 4, 8, 16, 32, 64, 128):
            for q in (0.0, 0.5, 2.0, 3.0):
                a, b = box_moments(v, size, q), box_moments_brute(v, size, q)
                worst = max(worst, abs(a[0] - b[0]), abs(a[1] - b[1]))
    checks = {
        f"uniform={d_u:.3f}": abs(d_u - 1) <= 0.05,
        f"single={d_s:.3f}": abs(d_s) <= 0.05,
        f"sqrtN={d_r:.3f}": abs(d_r - 0.5) <= 0.1,
        f"moments_err={worst:.1e}": worst <= 1e-12,
    }
    _verdict(8, checks, time.perf_counter() - start, 5)


def _digests(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.iterdir())}


def test_criterion_9_kernel_contract(tmp_path):
    start = time.perf_counter()
    mats = {
        "h0_600": build_h0(ArrayParams(600, 0.1, 1.0, 0.03)),
        "heff_600": build_heff(ArrayParams(600, 1.0, 1.0, 0.059), Modulation(0.02, math.sqrt(26) - 5, 0.3)),
        "full_156": build_full(SMALL),
    }
    checks = {}
    for name, m in mats.items():
        spec = eigendecompose(m)
        bound = 1e-8 * np.linalg.norm(np.asarray(m))
        checks[f"residual_{name}"] = bool(spec.residuals.max() <= bound)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {**BASE240, "n_sites": 60}}))
    for task in ("h0-spectrum", "full-ed"):
        cfg.write_text(json.dumps({"params": {**BASE240, "n_sites": 12 if task == "full-ed" else 60}}))
        outs = []
        for k in range(2):
            out = tmp_path / f"{task}_{k}"
            assert main([task, "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(_digests(out))
        checks[f"rerun_identical_{task}"] = outs[0] == outs[1]
    _verdict(9, checks, time.perf_counter() - start, 120)

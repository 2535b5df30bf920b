import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from wqed.analysis import edge_like
from wqed.errors import DimensionOverflow, EmptySelection, ResidualExceeded, ValidationError
from wqed.hamiltonians import Modulation, build_h0, build_heff
from wqed.lattice import ArrayParams
from wqed.spectral import (
    Spectrum,
    eigendecompose,
    gap_thresholds,
    segment_bands,
    segment_bulk,
    select_subradiant,
)


def _fake_spectrum(values):
    values = np.asarray(values, dtype=complex)
    n = len(values)
    return Spectrum(values, np.eye(n, dtype=complex), np.zeros(n))


def test_eig_trivial_cases():
    s = eigendecompose(np.array([[2 - 1j]]))
    assert s.values[0] == 2 - 1j and s.vectors[0, 0] == 1
    s = eigendecompose(np.diag([1 + 2j, -3]))
    assert np.array_equal(s.values, [-3, 1 + 2j])


def test_eig_two_site_closed_form():
    phi = 0.03
    s = eigendecompose(build_h0(ArrayParams(2, 1.0, 1.0, phi)))
    exact = -0.5j * (1 + np.array([1, -1]) * np.exp(1j * phi))
    exact = exact[np.lexsort((exact.imag, exact.real))]
    assert np.allclose(s.values, exact, atol=1e-12, rtol=0)


def test_eig_contract():
    m = np.asarray(build_heff(ArrayParams(150, 1.0, 1.0, 0.059), Modulation(0.02, 0.1, 0.3)))
    s = eigendecompose(m)
    assert np.all(s.residuals <= 1e-8 * np.linalg.norm(m))
    assert np.allclose(np.linalg.norm(s.vectors, axis=0), 1, atol=1e-12)
    lead = s.vectors[np.argmax(np.abs(s.vectors), axis=0), np.arange(150)]
    assert np.all(lead.imag == 0) and np.all(lead.real > 0)
    assert np.all(np.diff(s.values.real) >= 0)
    assert s.matrix_norm == pytest.approx(np.linalg.norm(m))


def test_eig_errors():
    with pytest.raises(ValidationError):
        eigendecompose(np.zeros((2, 3)))
    with pytest.raises(DimensionOverflow):
        eigendecompose(np.eye(5), dim_cap=4)
    with pytest.raises(ResidualExceeded):
        eigendecompose(np.random.default_rng(0).normal(size=(20, 20)), tol=1e-20)


def test_eig_deterministic():
    m = np.asarray(build_h0(ArrayParams(60, 0.1, 1.0, 0.03)))
    a, b = eigendecompose(m), eigendecompose(m)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.vectors, b.vectors)


@given(st.integers(3, 30), st.randoms(use_true_random=False))
def test_eig_permutation_invariant(n, rnd):
    m = np.asarray(build_heff(ArrayParams(n, 1.0, 1.0, 0.3), Modulation(0.2, 0.37, 0.1)))
    perm = list(range(n))
    rnd.shuffle(perm)
    pm = m[np.ix_(perm, perm)]
    assert np.allclose(eigendecompose(pm).values, eigendecompose(m).values, atol=1e-10, rtol=0)


def test_select_count_and_threshold():
    s = _fake_spectrum([-0.01j, -5j, -0.02j])
    sel = select_subradiant(s, count=2)
    assert sorted(sel.indices.tolist()) == [0, 2]
    assert sel.criterion["kind"] == "count"
    assert len(select_subradiant(s, gamma_cut=math.inf)) == 3
    with pytest.raises(EmptySelection):
        select_subradiant(s, gamma_cut=1e-5)
    with pytest.raises(ValidationError):
        select_subradiant(s)


def test_select_top_rule():
    s = _fake_spectrum([0 - 0.001j, 1 - 0.002j, 2 - 0.5j, 3 - 0.003j, 4 - 0.9j])
    sel = select_subradiant(s, count=2, gamma_cut=0.01)
    assert sel.indices.tolist() == [1, 3]
    assert sel.criterion["kind"] == "top"


@given(hnp.arrays(float, st.integers(1, 40), elements=st.floats(0, 10)), st.floats(0.01, 10))
def test_threshold_invariant(decays, cut):
    s = _fake_spectrum(np.arange(len(decays)) - 1j * decays)
    try:
        sel = select_subradiant(s, gamma_cut=cut)
    except EmptySelection:
        assert np.all(decays >= cut)
        return
    inside = np.zeros(len(decays), bool)
    inside[sel.indices] = True
    assert np.all(decays[inside] < cut) and np.all(decays[~inside] >= cut)
    assert np.all(np.diff(s.values.real[sel.indices]) >= 0)


def test_n240_selection_excludes_superradiant():
    p = ArrayParams(240, 0.1, 1.0, 0.03)
    s = eigendecompose(build_h0(p))
    sel = select_subradiant(s, count=120)
    assert s.decay[sel.indices].max() < p.gamma0
    assert s.decay.max() > p.gamma0


def test_segment_examples():
    seg = segment_bands(np.array([0, 0.01, 0.02, 1.0, 1.01]), 5)
    assert seg.bands == [(0, 3), (3, 5)]
    assert len(seg.gaps) == 1 and seg.gaps[0].rho == pytest.approx(3 / 5)
    assert seg.gaps[0].width == pytest.approx(0.98)
    seg = segment_bands(np.linspace(0, 1, 50), 5)
    assert seg.n_bands == 1 and not seg.gaps


def test_segment_validation():
    with pytest.raises(ValidationError):
        segment_bands(np.array([1.0, 0.0]))
    with pytest.raises(ValidationError):
        segment_bands(np.array([0.0, 1.0]), gap_factor=1.0)


# multiples of 1/8 with power-of-two scales and integer shifts keep the arithmetic exact
energy_arrays = hnp.arrays(float, st.integers(2, 60), elements=st.integers(-400, 400).map(lambda x: x / 8)).map(np.sort)


@given(energy_arrays, st.integers(-3, 3), st.sampled_from([0.25, 0.5, 2.0, 8.0]))
def test_segment_shift_scale_invariant(e, shift, scale):
    a = segment_bands(e, 5)
    b = segment_bands(scale * e + shift, 5)
    assert a.bands == b.bands
    assert [g.rho for g in a.gaps] == [g.rho for g in b.gaps]
    assert np.allclose([scale * g.width for g in a.gaps], [g.width for g in b.gaps], rtol=1e-9)


@given(energy_arrays, st.floats(1.5, 10), st.sampled_from([None, 3, 10]))
def test_segment_partition_and_thresholds(e, factor, window):
    seg = segment_bands(e, factor, window=window, floor=1.0)
    covered = [i for lo, hi in seg.bands for i in range(lo, hi)]
    assert covered == list(range(len(e)))
    thr = gap_thresholds(e, factor, window, 1.0)
    med = np.median(np.diff(e))
    for g in seg.gaps:
        assert g.width > thr[g.lower]
        assert g.width > med
        if window is None:
            assert g.width > factor * med


def test_segment_bulk_places_edge_states():
    bulk = [0.0, 0.01, 0.02, 0.03, 1.0, 1.01, 1.02, 1.03]
    e = np.sort(bulk + [0.5, 0.5001])
    flagged = np.isin(e, [0.5, 0.5001])
    seg = segment_bulk(e, flagged, 5, n_total=10)
    assert seg.n_bands == 2 and len(seg.gaps) == 1
    gap = seg.gaps[0]
    assert gap.inside == (4, 5)
    assert gap.rho == pytest.approx(5 / 10)
    plain = segment_bands(e, 5, n_total=10)
    assert plain.n_bands > 2


def test_heff_s2_has_bands():
    p = ArrayParams(200, 1.0, 1.0, 0.059)
    s = eigendecompose(build_heff(p, Modulation(0.02, math.sqrt(26) - 5, 0.0)))
    idx = select_subradiant(s, count=100, gamma_cut=0.1).indices
    e = s.values.real[idx]
    offset = int(np.sum(s.values.real < e[0]))
    seg = segment_bulk(e, edge_like(s, idx), 5, 200, offset=offset, floor=1.0)
    assert seg.n_bands >= 3

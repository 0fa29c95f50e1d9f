"""Electrode layout, mode overlap, and resonance-splitting tests."""

from __future__ import annotations

import math

import numpy as np
import pytest

from resokit.errors import GeometryError
from resokit.mbvd import KT2_PREFACTOR
from resokit.transduce import (
    PRUNE_REL,
    DeviceGeometry,
    build_layout,
    mode_couplings,
    spectrum_to_mbvd,
    split_study,
    strain_overlaps,
    strain_overlaps_numeric,
)

LAM = 1.8e-6


def dlvr(n=5, c=0.5):
    return DeviceGeometry(wavelength=LAM, topology="dlvr", n_elements=n, coverage=c)


def lvr(n=5, c=0.5):
    return DeviceGeometry(wavelength=LAM, topology="lvr", n_elements=n, coverage=c)


# ------------------------------------------------------------------ layout

def test_lvr_layout_geometry():
    lay = build_layout(lvr(5))
    # N electrodes on an (N-1) half-wavelength plate
    assert lay.plate_width == pytest.approx(2.0 * LAM, rel=1e-12)
    assert len(lay.electrodes) == 5
    inner = lay.electrodes[1:-1]
    for e in inner:
        assert e.width == pytest.approx(0.5 * 0.5 * LAM, rel=1e-12)
    # edge electrodes are half width, flush against the plate boundary
    first, last = lay.electrodes[0], lay.electrodes[-1]
    assert first.width == pytest.approx(0.25 * 0.5 * LAM, rel=1e-12)
    assert last.width == pytest.approx(first.width, rel=1e-12)
    assert first.center - first.width / 2.0 == pytest.approx(0.0, abs=1e-18)
    assert last.center + last.width / 2.0 == pytest.approx(lay.plate_width, rel=1e-12)
    # inner centers sit on the half-wavelength grid
    for k, e in enumerate(inner, start=1):
        assert e.center == pytest.approx(k * LAM / 2.0, rel=1e-12)


def test_dlvr_layout_geometry():
    lay = build_layout(dlvr(5))
    # N half-wavelengths of plate; all electrodes full width
    assert lay.plate_width == pytest.approx(2.5 * LAM, rel=1e-12)
    assert len(lay.electrodes) == 5
    for e in lay.electrodes:
        assert e.width == pytest.approx(0.5 * 0.5 * LAM, rel=1e-12)
    # outermost centers a quarter wavelength in from the edges
    assert lay.electrodes[0].center == pytest.approx(LAM / 4.0, rel=1e-12)
    assert lay.electrodes[-1].center == pytest.approx(lay.plate_width - LAM / 4.0, rel=1e-12)
    # uniform half-wavelength pitch
    centers = [e.center for e in lay.electrodes]
    np.testing.assert_allclose(np.diff(centers), LAM / 2.0, rtol=1e-12)


def test_layout_polarity_alternates():
    for geom in (lvr(6), dlvr(6)):
        pol = [e.polarity for e in build_layout(geom).electrodes]
        assert pol[0] == 1
        assert all(a == -b for a, b in zip(pol, pol[1:]))


def test_layout_coverage_scales_width():
    wide = build_layout(dlvr(5, c=0.8)).electrodes[0].width
    slim = build_layout(dlvr(5, c=0.2)).electrodes[0].width
    assert wide == pytest.approx(0.8 * 0.5 * LAM, rel=1e-12)
    assert slim == pytest.approx(0.2 * 0.5 * LAM, rel=1e-12)


def test_geometry_validation():
    with pytest.raises(GeometryError):
        build_layout(DeviceGeometry(wavelength=-1e-6))
    with pytest.raises(GeometryError):
        build_layout(DeviceGeometry(wavelength=LAM, coverage=0.0))
    with pytest.raises(GeometryError):
        build_layout(DeviceGeometry(wavelength=LAM, coverage=1.2))
    with pytest.raises(GeometryError):
        build_layout(DeviceGeometry(wavelength=LAM, n_elements=1))
    with pytest.raises(GeometryError):
        build_layout(DeviceGeometry(wavelength=LAM, topology="idt"))


# ---------------------------------------------------------------- overlaps

def test_dlvr_overlaps_pinned():
    # N=5, c=0.5: independently derived via the gap-field integral
    lay = build_layout(dlvr(5, c=0.5))
    s = strain_overlaps(lay, [2, 4, 6, 8])
    assert s[0] == pytest.approx(-0.449027977, rel=1e-8)
    assert s[1] == pytest.approx(-3.618033989, rel=1e-8)
    assert s[2] == pytest.approx(4.979796567, rel=1e-8)
    assert s[3] == pytest.approx(1.381966011, rel=1e-8)


def test_dlvr_parity_zeros():
    # modes with n + N even see cancelling gap contributions; the sum
    # collapses to rounding noise around 1e-15 against a dominant ~5
    lay = build_layout(dlvr(5))
    s = strain_overlaps(lay, [1, 3, 5, 7, 9])
    assert np.max(np.abs(s)) < 1e-12


def test_overlaps_closed_form_matches_quadrature():
    lay = build_layout(dlvr(5, c=0.5))
    idx = list(range(1, 11))
    s_closed = strain_overlaps(lay, idx)
    s_num = strain_overlaps_numeric(lay, idx, points_per_gap=10000)
    assert np.max(np.abs(s_closed - s_num)) / np.max(np.abs(s_num)) < 1e-8


def test_overlaps_quadrature_other_coverage():
    lay = build_layout(dlvr(7, c=0.35))
    idx = list(range(1, 15))
    s_closed = strain_overlaps(lay, idx)
    s_num = strain_overlaps_numeric(lay, idx, points_per_gap=10000)
    assert np.max(np.abs(s_closed - s_num)) / np.max(np.abs(s_num)) < 1e-8


def test_lvr_overlaps_single_mode():
    lay = build_layout(lvr(5))
    idx = list(range(1, 11))
    s = strain_overlaps(lay, idx)
    mags = np.abs(s)
    assert np.argmax(mags) == idx.index(4)
    others = np.delete(mags, idx.index(4))
    assert np.max(others) < 1e-9 * mags.max()


def test_delta_field_model_keeps_parity():
    lay = build_layout(dlvr(5))
    s = strain_overlaps(lay, [1, 3, 5, 7, 9], field_model="delta")
    assert np.max(np.abs(s)) < 1e-12
    s_even = strain_overlaps(lay, [4, 6], field_model="delta")
    assert np.min(np.abs(s_even)) > 0.1


def test_overlaps_reject_bad_mode_index():
    lay = build_layout(dlvr(5))
    with pytest.raises(ValueError):
        strain_overlaps(lay, [0])
    with pytest.raises(ValueError):
        strain_overlaps(lay, [-2])


# ---------------------------------------------------------------- spectrum

def test_mode_couplings_dlvr_pinned():
    spec = mode_couplings(build_layout(dlvr(5, c=0.5)), v_p=5382.0, n_max=10)
    by_n = {m.n: m for m in spec.modes}
    assert sorted(by_n) == [2, 4, 6, 8]
    assert by_n[2].eta == pytest.approx(0.005040653, rel=1e-6)
    assert by_n[4].eta == pytest.approx(0.327254249, rel=1e-6)
    assert by_n[6].eta == pytest.approx(0.619959347, rel=1e-6)
    assert by_n[8].eta == pytest.approx(0.047745751, rel=1e-6)
    assert sum(m.eta for m in spec.modes) == pytest.approx(1.0, rel=1e-12)


def test_mode_frequencies_and_nodes():
    lay = build_layout(dlvr(5, c=0.5))
    spec = mode_couplings(lay, v_p=5382.0, n_max=10)
    for m in spec.modes:
        assert m.nodes == m.n
        assert m.f_n == pytest.approx(m.n * 5382.0 / (2.0 * lay.plate_width), rel=1e-12)
        assert m.k_x == pytest.approx(m.n * math.pi / lay.plate_width, rel=1e-12)


def test_mode_couplings_lvr_is_ideal():
    spec = mode_couplings(build_layout(lvr(5)), v_p=5382.0, n_max=10)
    assert len(spec.modes) == 1
    assert spec.modes[0].n == 4
    assert spec.modes[0].eta == pytest.approx(1.0, rel=1e-12)
    # the retained mode sits at the designed wavelength: f = v_p / lambda
    assert spec.modes[0].f_n == pytest.approx(5382.0 / LAM, rel=1e-12)


def test_mode_couplings_prunes_negligible():
    spec = mode_couplings(build_layout(dlvr(5)), v_p=5382.0, n_max=10)
    for m in spec.modes:
        assert m.eta > PRUNE_REL


def test_mode_couplings_validates_n_max():
    lay = build_layout(dlvr(5))
    with pytest.raises(ValueError):
        mode_couplings(lay, v_p=5382.0, n_max=0)
    with pytest.raises(ValueError):
        mode_couplings(lay, v_p=-1.0, n_max=10)


# ------------------------------------------------------------ model export

def test_spectrum_to_mbvd_partitions_coupling():
    spec = mode_couplings(build_layout(dlvr(5)), v_p=5382.0, n_max=10)
    m = spectrum_to_mbvd(spec, c0=100e-15, kt2_total=0.20, q_assumed=500.0)
    assert m.c0 == 100e-15
    assert len(m.branches) == len(spec.modes)
    # branch kt2 (capacitance form) adds back up to the total
    total = sum(KT2_PREFACTOR * b.cm / (m.c0 + b.cm) for b in m.branches)
    assert total == pytest.approx(0.20, rel=1e-9)
    # branch order follows mode frequency
    fs = [b.fs for b in m.branches]
    assert fs == sorted(fs)
    for b, mode in zip(m.branches, spec.modes):
        assert b.fs == pytest.approx(mode.f_n, rel=1e-9)


def test_spectrum_to_mbvd_respects_q():
    spec = mode_couplings(build_layout(dlvr(5)), v_p=5382.0, n_max=10)
    m = spectrum_to_mbvd(spec, c0=100e-15, kt2_total=0.20, q_assumed=750.0)
    for b in m.branches:
        assert b.qm == pytest.approx(750.0, rel=1e-9)


# ------------------------------------------------------------- split study

def test_split_study_dlvr_offset_is_reciprocal_n():
    geoms = [dlvr(n) for n in (5, 10, 20, 40, 80)]
    recs = split_study(geoms, v_p=5382.0)
    assert [r.n_elements for r in recs] == [5, 10, 20, 40, 80]
    for r in recs:
        assert r.offset == pytest.approx(1.0 / r.n_elements, rel=1e-12)
        assert r.design_frequency == pytest.approx(5382.0 / LAM, rel=1e-12)


def test_split_study_dominant_pair_straddles_design():
    recs = split_study([dlvr(5)], v_p=5382.0)
    modes = sorted(recs[0].modes, key=lambda m: m.eta, reverse=True)[:2]
    f_lo, f_hi = sorted(m.f_n for m in modes)
    f_d = recs[0].design_frequency
    assert f_lo < f_d < f_hi
    assert (f_d - f_lo) == pytest.approx(f_hi - f_d, rel=1e-9)


def test_split_study_lvr_no_split():
    recs = split_study([lvr(5), lvr(10)], v_p=5382.0)
    for r in recs:
        assert r.offset == pytest.approx(0.0, abs=1e-12)


def test_split_study_convergence():
    recs = split_study([dlvr(n) for n in (5, 10, 20, 40, 80)], v_p=5382.0)
    offs = [r.offset for r in recs]
    assert all(b < a for a, b in zip(offs, offs[1:]))
    for a, b in zip(offs, offs[1:]):
        assert a / b == pytest.approx(2.0, rel=1e-9)

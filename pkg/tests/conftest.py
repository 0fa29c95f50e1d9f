"""Shared fixtures: golden two-port files built from known models."""

from __future__ import annotations

import numpy as np
import pytest

from resokit import ComplexTrace
from resokit.mbvd import synthesize_admittance
from resokit.netparams import series_element_network, write_touchstone, y_to_s


def noisy_trace(model, grid, noise_db=None, seed=0):
    """Synthesize Y(f) and optionally add complex white noise.

    noise_db is relative to the median |Y| of the clean trace.
    """
    trace = synthesize_admittance(model, grid)
    if noise_db is None:
        return trace
    rng = np.random.default_rng(seed)
    scale = np.median(np.abs(trace.values)) * 10.0 ** (noise_db / 20.0)
    noise = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    return ComplexTrace(freqs=trace.freqs, values=trace.values + scale * noise / np.sqrt(2.0))


def golden_text(model, grid, fmt="RI", unit="GHz", noise_db=None, seed=0):
    """Touchstone text for a model embedded as a series two-port element."""
    trace = noisy_trace(model, grid, noise_db=noise_db, seed=seed)
    return write_touchstone(y_to_s(series_element_network(trace)), fmt=fmt, unit=unit)


@pytest.fixture
def golden_s2p(tmp_path):
    """Writer returning the path of a synthetic .s2p with a known model inside."""

    def make(model, grid, fmt="RI", unit="GHz", name="golden.s2p", noise_db=None, seed=0):
        path = tmp_path / name
        path.write_text(golden_text(model, grid, fmt=fmt, unit=unit, noise_db=noise_db, seed=seed))
        return path

    return make

"""1D electrode-sampling transduction model for laterally vibrating plates.

A free-edge plate of width W carries contour modes u_n(x) = cos(n pi x / W)
at f_n = n v_p / (2 W). The interdigitated electrodes excite each mode in
proportion to the overlap of the lateral drive field with the mode strain
du_n/dx. The drive field lives in the gaps between adjacent fingers and
alternates sign with the finger polarity, so the overlap reduces to a signed
sum of closed-form cosine differences, one per gap. This reproduces the
boundary-condition physics of the two electrode configurations without FEA:
the edge-anchored layout samples its design mode perfectly, while the
degenerate layout suppresses the design-index mode by parity and splits the
response onto the two neighbouring modes.

Frequencies assume a dispersionless phase velocity: correct to leading
order, and the splitting/parity/convergence structure is velocity
independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .designkit import DeviceGeometry
from .errors import DegenerateCouplingError, GeometryError
from .mbvd import MbvdModel, branch_from_metrics

PRUNE_REL = 1e-12
FIELD_MODELS = ("tophat", "delta")

_OVERLAP_TOL = 1e-12


@dataclass(frozen=True)
class Electrode:
    """One finger: centre and width in metres, polarity +1 or -1."""

    center: float
    width: float
    polarity: int

    def __post_init__(self) -> None:
        if self.width <= 0.0:
            raise GeometryError("electrode width must be positive")
        if self.polarity not in (-1, 1):
            raise GeometryError(f"polarity must be +1 or -1, got {self.polarity}")

    @property
    def left(self) -> float:
        return self.center - 0.5 * self.width

    @property
    def right(self) -> float:
        return self.center + 0.5 * self.width


@dataclass(frozen=True)
class FieldGap:
    """Lateral-field region between two adjacent fingers.

    ``sign`` follows the polarity of the finger on the left: the in-plane
    field points from the positive finger to the negative one.
    """

    left: float
    right: float
    sign: int

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def center(self) -> float:
        return 0.5 * (self.left + self.right)


@dataclass(frozen=True)
class ElectrodeLayout:
    """Realized finger pattern on a plate of width ``plate_width``."""

    topology: str
    wavelength: float
    coverage: float
    plate_width: float
    electrodes: tuple[Electrode, ...]

    def __post_init__(self) -> None:
        if len(self.electrodes) < 2:
            raise GeometryError("layout needs at least two electrodes")
        tol = _OVERLAP_TOL * self.plate_width
        prev = None
        for i, el in enumerate(self.electrodes):
            if el.left < -tol or el.right > self.plate_width + tol:
                raise GeometryError(f"electrode {i} extends outside the plate")
            if prev is not None:
                if el.left <= prev.right + tol:
                    raise GeometryError(f"electrodes {i - 1} and {i} overlap or touch")
                if el.polarity == prev.polarity:
                    raise GeometryError("electrode polarities must alternate")
            prev = el

    @property
    def n_electrodes(self) -> int:
        return len(self.electrodes)

    @property
    def design_index(self) -> int:
        """Mode index whose wavelength matches the finger pitch."""
        n = self.n_electrodes
        return n - 1 if self.topology == "lvr" else n

    def field_gaps(self) -> tuple[FieldGap, ...]:
        gaps = []
        for a, b in zip(self.electrodes, self.electrodes[1:]):
            gaps.append(FieldGap(left=a.right, right=b.left, sign=a.polarity))
        return tuple(gaps)


def build_layout(geom: DeviceGeometry) -> ElectrodeLayout:
    """Place the fingers for either topology.

    lvr: plate width (N-1)*lambda/2; interior fingers of width c*lambda/2
    centred on x = i*lambda/2, plus half-width fingers (c*lambda/4) flush
    with each plate edge so the stress-free boundary bisects a notional full
    finger.

    dlvr: plate width N*lambda/2; N full-width fingers with the outermost
    centres lambda/4 in from each edge, adjacent centres lambda/2 apart.

    Polarity alternates, positive first, in both.
    """
    lam = geom.wavelength
    c = geom.coverage
    n = geom.n_elements
    full = 0.5 * c * lam
    electrodes: list[Electrode] = []
    if geom.topology == "lvr":
        plate = 0.5 * (n - 1) * lam
        for i in range(n):
            pol = 1 if i % 2 == 0 else -1
            if i == 0:
                electrodes.append(Electrode(center=0.125 * c * lam, width=0.5 * full, polarity=pol))
            elif i == n - 1:
                electrodes.append(Electrode(center=plate - 0.125 * c * lam, width=0.5 * full, polarity=pol))
            else:
                electrodes.append(Electrode(center=0.5 * i * lam, width=full, polarity=pol))
    else:
        plate = 0.5 * n * lam
        for i in range(n):
            pol = 1 if i % 2 == 0 else -1
            electrodes.append(Electrode(center=0.25 * lam + 0.5 * i * lam, width=full, polarity=pol))
    return ElectrodeLayout(
        topology=geom.topology, wavelength=lam, coverage=c,
        plate_width=plate, electrodes=tuple(electrodes))


def _indices_array(indices: Sequence[int]) -> np.ndarray:
    idx = np.asarray(indices, dtype=int).reshape(-1)
    if idx.size == 0:
        raise ValueError("no mode indices given")
    if np.any(idx < 1):
        raise ValueError("mode indices start at 1")
    return idx


def strain_overlaps(
    layout: ElectrodeLayout,
    indices: Sequence[int],
    field_model: str = "tophat",
) -> np.ndarray:
    """Signed overlap of the gap drive field with du_n/dx, closed form.

    For the top-hat field each gap contributes sign * (cos(n pi b / W) -
    cos(n pi a / W)); the delta variant samples the strain at the gap
    centre and scales by the gap width (the narrow-gap limit of the same
    integral).
    """
    if field_model not in FIELD_MODELS:
        raise ValueError(f"field_model must be one of {FIELD_MODELS}")
    idx = _indices_array(indices)
    w = layout.plate_width
    out = np.zeros(idx.size)
    for gap in layout.field_gaps():
        if field_model == "tophat":
            contrib = np.cos(idx * np.pi * gap.right / w) - np.cos(idx * np.pi * gap.left / w)
        else:
            contrib = -gap.width * (idx * np.pi / w) * np.sin(idx * np.pi * gap.center / w)
        out += gap.sign * contrib
    return out


def strain_overlaps_numeric(
    layout: ElectrodeLayout,
    indices: Sequence[int],
    points_per_gap: int = 10_000,
) -> np.ndarray:
    """Brute-force check of strain_overlaps: per-gap trapezoid quadrature
    of du_n/dx with ``points_per_gap`` samples. Top-hat field only."""
    if points_per_gap < 2:
        raise ValueError("need at least 2 quadrature points per gap")
    idx = _indices_array(indices)
    w = layout.plate_width
    out = np.zeros(idx.size)
    for gap in layout.field_gaps():
        x = np.linspace(gap.left, gap.right, points_per_gap)
        # du_n/dx = -(n pi / W) sin(n pi x / W), one row per mode index
        integrand = -(idx[:, None] * np.pi / w) * np.sin(idx[:, None] * np.pi * x[None, :] / w)
        out += gap.sign * trapezoid(integrand, x, axis=1)
    return out


@dataclass(frozen=True)
class ModeCoupling:
    """One retained plate mode: index, wavenumber, frequency, normalized
    coupling weight, displacement-node count (equal to the index)."""

    n: int
    k_x: float
    f_n: float
    eta: float
    nodes: int


@dataclass(frozen=True)
class ModeSpectrum:
    modes: tuple[ModeCoupling, ...]

    def __post_init__(self) -> None:
        if not self.modes:
            raise ValueError("spectrum must retain at least one mode")
        freqs = [m.f_n for m in self.modes]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("mode frequencies must increase with index")
        total = sum(m.eta for m in self.modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode weights must sum to 1, got {total!r}")

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.f_n for m in self.modes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.eta for m in self.modes])

    def dominant_modes(self, count: int = 2) -> tuple[ModeCoupling, ...]:
        """Up to ``count`` largest-weight modes, ordered by frequency."""
        ranked = sorted(self.modes, key=lambda m: (-m.eta, m.n))[:count]
        return tuple(sorted(ranked, key=lambda m: m.f_n))


def mode_couplings(
    layout: ElectrodeLayout,
    v_p: float,
    n_max: int,
    field_model: str = "tophat",
) -> ModeSpectrum:
    """Coupling spectrum of the first ``n_max`` plate modes.

    eta_n is the squared strain overlap, normalized to sum 1. Modes below
    PRUNE_REL of the strongest weight are dropped and the remainder
    renormalized; the pruned tail always carries negligible weight, so the
    retained sum exceeds 0.999 before renormalization.
    """
    if v_p <= 0.0:
        raise ValueError("phase velocity must be positive")
    if n_max < 2 * layout.design_index:
        raise ValueError(
            f"n_max={n_max} too small; need at least twice the design index "
            f"({layout.design_index}) to capture the coupled neighbourhood")
    idx = np.arange(1, n_max + 1)
    s = strain_overlaps(layout, idx, field_model)
    raw = s * s
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateCouplingError("no plate mode couples to this electrode configuration")
    eta = raw / total
    keep = eta >= PRUNE_REL * eta.max()
    eta_kept = eta[keep] / eta[keep].sum()
    w = layout.plate_width
    modes = tuple(
        ModeCoupling(n=int(n), k_x=float(n * np.pi / w),
                     f_n=float(0.5 * n * v_p / w), eta=float(e), nodes=int(n))
        for n, e in zip(idx[keep], eta_kept))
    return ModeSpectrum(modes=modes)


def spectrum_to_mbvd(
    spectrum: ModeSpectrum,
    c0: float,
    kt2_total: float,
    q_assumed: float,
) -> MbvdModel:
    """Lumped-circuit realization of a mode spectrum.

    Each retained mode becomes one motional branch at its own frequency,
    carrying the per-mode share eta_n * kt2_total of the total coupling.
    Modes too weak to map onto a physical branch are dropped. Loss
    elements beyond the per-branch q are left at zero.
    """
    if not 0.0 < kt2_total < 1.0:
        raise ValueError(f"kt2_total must lie in (0, 1), got {kt2_total}")
    branches = []
    for m in spectrum.modes:
        try:
            branches.append(branch_from_metrics(m.f_n, q_assumed, m.eta * kt2_total, c0))
        except DegenerateCouplingError:
            continue
    if not branches:
        raise DegenerateCouplingError("every mode fell below the representable coupling floor")
    return MbvdModel(c0=c0, r0=0.0, rs=0.0, branches=tuple(branches))


@dataclass(frozen=True)
class SplitRecord:
    """Convergence-study row: the dominant mode pair for one element count."""

    n_elements: int
    design_frequency: float
    modes: tuple[ModeCoupling, ...]
    offset: float

    def as_dict(self) -> dict:
        return {
            "n_elements": self.n_elements,
            "design_frequency_hz": self.design_frequency,
            "modes": [
                {"n": m.n, "f_hz": m.f_n, "eta": m.eta, "nodes": m.nodes}
                for m in self.modes
            ],
            "offset": self.offset,
        }


def split_study(
    geoms: Sequence[DeviceGeometry],
    v_p: float,
    n_max: int | None = None,
    field_model: str = "tophat",
) -> list[SplitRecord]:
    """Mode-splitting convergence across an element-count sweep.

    For each geometry: build the layout, compute the coupling spectrum, and
    record the two dominant modes together with the fractional offset of the
    strongest mode from the design frequency v_p/lambda. ``n_max`` defaults
    to twice the design index per geometry.
    """
    if not geoms:
        raise ValueError("empty geometry sweep")
    counts = [g.n_elements for g in geoms]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("element counts must be strictly ascending")
    records = []
    for geom in geoms:
        layout = build_layout(geom)
        local_max = n_max if n_max is not None else 2 * layout.design_index
        spectrum = mode_couplings(layout, v_p, local_max, field_model)
        f_design = v_p / geom.wavelength
        dominant = spectrum.dominant_modes(2)
        top = max(dominant, key=lambda m: m.eta)
        records.append(SplitRecord(
            n_elements=geom.n_elements,
            design_frequency=f_design,
            modes=dominant,
            offset=abs(top.f_n - f_design) / f_design))
    return records

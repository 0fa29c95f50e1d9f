"""Modified Butterworth-Van Dyke equivalent circuit.

The model is a static branch (C0 in series with R0) in parallel with one
series RLC branch per acoustic mode, all behind a lead resistance Rs:

    Y(w) = 1 / (rs + 1 / (Y_static + sum_k Y_branch_k))
    Y_static   = 1 / (r0 + 1/(j w c0))
    Y_branch_k = 1 / (rm_k + j w lm_k + 1/(j w cm_k))

Closed-form relations tie the electrical elements to resonator metrics:
series resonance fs = 1/(2 pi sqrt(lm cm)), parallel resonance
fp = fs sqrt(1 + cm/c0_eff), coupling kt2 = (pi^2/8)(fp^2 - fs^2)/fp^2,
and mechanical quality qm = 2 pi fs lm / rm.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCouplingError
from .netparams import ComplexTrace

TWO_PI = 2.0 * math.pi
KT2_PREFACTOR = math.pi**2 / 8.0

# Motional capacitance floor; couplings mapping below this are rejected
# as degenerate rather than silently producing absurd element values.
CM_FLOOR = 1e-21

# Phase-slope quality factors above this are reported as +inf (lossless).
Q_SENTINEL = 1e6


class Kt2Convention(enum.Enum):
    """Electromechanical coupling definitions.

    FP2 is the reporting contract everywhere in this package; the others
    exist for comparison against literature that uses them.
    """

    FP2 = "fp2"  # (pi^2/8) (fp^2 - fs^2) / fp^2
    FS2 = "fs2"  # (pi^2/8) (fp^2 - fs^2) / fs^2
    CAP = "cap"  # (pi^2/8) cm / (c0 + cm)


@dataclass(frozen=True)
class MotionalBranch:
    """One series RLC branch: rm (ohm), lm (H), cm (F)."""

    rm: float
    lm: float
    cm: float

    def __post_init__(self):
        if not self.rm >= 0:
            raise ValueError(f"rm must be >= 0, got {self.rm!r}")
        if not self.lm > 0:
            raise ValueError(f"lm must be > 0, got {self.lm!r}")
        if not self.cm > 0:
            raise ValueError(f"cm must be > 0, got {self.cm!r}")

    @property
    def fs(self) -> float:
        """Series resonance frequency in Hz."""
        return 1.0 / (TWO_PI * math.sqrt(self.lm * self.cm))

    @property
    def qm(self) -> float:
        """Mechanical quality factor; +inf for a lossless branch."""
        if self.rm == 0:
            return math.inf
        return TWO_PI * self.fs * self.lm / self.rm


@dataclass(frozen=True)
class MbvdModel:
    """Full equivalent circuit: static branch, lead loss, motional branches.

    Branches are kept sorted by series resonance frequency; the dominant
    branch is the one with the largest motional capacitance.
    """

    c0: float
    r0: float = 0.0
    rs: float = 0.0
    branches: tuple[MotionalBranch, ...] = ()

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be > 0, got {self.c0!r}")
        if not self.r0 >= 0:
            raise ValueError(f"r0 must be >= 0, got {self.r0!r}")
        if not self.rs >= 0:
            raise ValueError(f"rs must be >= 0, got {self.rs!r}")
        branches = tuple(self.branches)
        fs = [b.fs for b in branches]
        if any(b <= a for a, b in zip(fs, fs[1:])):
            raise ValueError("branch series resonances must be strictly increasing")
        object.__setattr__(self, "branches", branches)

    @property
    def dominant_index(self) -> int:
        """Index of the largest-cm branch; requires at least one branch."""
        if not self.branches:
            raise ValueError("model has no motional branches")
        return max(range(len(self.branches)), key=lambda i: self.branches[i].cm)


def _branch_arrays(model: MbvdModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rm = np.array([b.rm for b in model.branches])
    lm = np.array([b.lm for b in model.branches])
    cm = np.array([b.cm for b in model.branches])
    return rm, lm, cm


def admittance_arrays(
    freqs: np.ndarray,
    c0: float,
    r0: float,
    rs: float,
    rm: np.ndarray,
    lm: np.ndarray,
    cm: np.ndarray,
) -> np.ndarray:
    """Evaluate the circuit admittance from raw element arrays.

    Shared by the model-facing synthesizer and the fit engine so both see
    bitwise identical values.
    """
    w = TWO_PI * np.asarray(freqs, dtype=float)
    jw = 1j * w
    with np.errstate(divide="ignore", invalid="ignore"):
        y = 1.0 / (r0 + 1.0 / (jw * c0))
        if rm.size:
            zb = rm[None, :] + 1j * (
                w[:, None] * lm[None, :] - 1.0 / (w[:, None] * cm[None, :])
            )
            y = y + np.sum(1.0 / zb, axis=1)
        if rs != 0.0:
            y = 1.0 / (rs + 1.0 / y)
    return y


def synthesize_admittance(model: MbvdModel, freqs: np.ndarray) -> ComplexTrace:
    """Evaluate the model admittance on a frequency grid (Hz).

    Passive for all non-negative resistances: Re(Y) >= 0 everywhere.
    """
    freqs = np.asarray(freqs, dtype=float).reshape(-1)
    if freqs.size and freqs[0] <= 0:
        raise ValueError("frequencies must be positive")
    rm, lm, cm = _branch_arrays(model)
    values = admittance_arrays(freqs, model.c0, model.r0, model.rs, rm, lm, cm)
    return ComplexTrace(freqs=freqs, values=values)


def branch_from_metrics(fs: float, qm: float, kt2: float, c0: float) -> MotionalBranch:
    """Invert (fs, qm, kt2, c0) to a motional branch.

    Uses r = kt2 * 8/pi^2, cm = c0 r/(1-r), lm = 1/((2 pi fs)^2 cm),
    rm = 2 pi fs lm / qm.  Couplings at or above the physical ceiling and
    capacitances below the 1e-21 F floor are rejected.
    """
    if not fs > 0:
        raise ValueError(f"fs must be > 0, got {fs!r}")
    if not qm > 0:
        raise ValueError(f"qm must be > 0, got {qm!r}")
    if not c0 > 0:
        raise ValueError(f"c0 must be > 0, got {c0!r}")
    if not 0.0 < kt2 < 1.0:
        raise ValueError(f"kt2 must lie in (0, 1), got {kt2!r}")
    r = kt2 * 8.0 / math.pi**2
    if r >= 1.0:
        raise ValueError(f"kt2 {kt2!r} maps to capacitance ratio >= 1 (non-physical)")
    cm = c0 * r / (1.0 - r)
    if cm < CM_FLOOR:
        raise DegenerateCouplingError(
            f"cm {cm:.3g} F below {CM_FLOOR:.0e} F floor (coupling too small)"
        )
    lm = 1.0 / ((TWO_PI * fs) ** 2 * cm)
    rm = TWO_PI * fs * lm / qm
    return MotionalBranch(rm=rm, lm=lm, cm=cm)


def kt2_from_frequencies(
    fs: float,
    fp: float,
    convention: Kt2Convention = Kt2Convention.FP2,
    cm: float | None = None,
    c0: float | None = None,
) -> float:
    """Coupling coefficient from the resonance pair (or capacitances for CAP)."""
    if convention is Kt2Convention.FP2:
        return KT2_PREFACTOR * (fp**2 - fs**2) / fp**2
    if convention is Kt2Convention.FS2:
        return KT2_PREFACTOR * (fp**2 - fs**2) / fs**2
    if cm is None or c0 is None:
        raise ValueError("CAP convention needs cm and c0")
    return KT2_PREFACTOR * cm / (c0 + cm)


def _fp_closed(model: MbvdModel, k: int, fs_list: list[float]) -> float:
    """Closed-form antiresonance of branch k against the stiffened static arm."""
    fs_k = fs_list[k]
    # Off-resonant branches above fs_k still look capacitive there and
    # stiffen the static branch.
    c0_eff = model.c0 + sum(b.cm for j, b in enumerate(model.branches) if fs_list[j] > fs_k)
    return fs_k * math.sqrt(1.0 + model.branches[k].cm / c0_eff)


def _fp_search(
    model: MbvdModel, k: int, fs_list: list[float], f_cap: float | None = None
) -> float | None:
    """Numeric antiresonance of branch k: first upward zero of Im(Y) above fs_k.

    Returns None when no crossing exists in the scan window (overdamped
    branch, or window clipped by f_cap).
    """
    rm, lm, cm = _branch_arrays(model)
    fs_k = fs_list[k]
    fp_closed = _fp_closed(model, k, fs_list)
    hi = fp_closed + 6.0 * (fp_closed - fs_k)
    nxt = [f for f in fs_list if f > fs_k]
    if nxt:
        hi = min(hi, min(nxt) * (1.0 - 1e-3))
    if f_cap is not None:
        hi = min(hi, f_cap)
    lo = fs_k * (1.0 + 1e-9)
    if hi <= lo:
        return None

    def im_y(f: float) -> float:
        return float(
            admittance_arrays(np.array([f]), model.c0, model.r0, model.rs, rm, lm, cm).imag[0]
        )

    grid = np.linspace(lo, hi, 4001)
    vals = admittance_arrays(grid, model.c0, model.r0, model.rs, rm, lm, cm).imag
    sign = np.sign(vals)
    idx = np.nonzero((sign[:-1] < 0) & (sign[1:] > 0))[0]
    if idx.size == 0:
        # Exact zeros on grid points count as crossings.
        zero = np.nonzero(vals == 0.0)[0]
        if zero.size:
            return float(grid[zero[0]])
        return None
    a, b = grid[idx[0]], grid[idx[0] + 1]
    return float(brentq(im_y, a, b, xtol=1e-6, rtol=1e-14, maxiter=200))


FP_CROSSCHECK_RTOL = 1e-3


def resonance_frequencies(model: MbvdModel) -> list[tuple[float, float | None]]:
    """Per-branch (fs, fp) pairs, sorted by fs.

    fs is closed form.  fp is the closed form fs*sqrt(1 + cm/c0_eff),
    reported only when a numeric upward zero crossing of Im(Y) exists
    above fs; a branch too damped to produce a crossing gets None.  The
    lossy crossing itself sits below the closed form by roughly
    (1+r)/(r*(2+r)*Q^2) with r = cm/c0_eff, negligible except at very
    low Q.
    """
    if not model.branches:
        raise ValueError("model has no motional branches")
    fs_list = [b.fs for b in model.branches]
    out: list[tuple[float, float | None]] = []
    for k in range(len(fs_list)):
        fp_num = _fp_search(model, k, fs_list)
        fp = _fp_closed(model, k, fs_list) if fp_num is not None else None
        out.append((fs_list[k], fp))
    return out


@dataclass(frozen=True)
class ResonatorMetrics:
    """Scalar figures of merit for one device.

    fp-derived fields (fp, qp, kt2, fom) are None when the antiresonance
    was absent or fell outside the analysis grid; flags records why.
    qs/qp of +inf mark a lossless model (phase-slope Q above the 1e6
    sentinel).  fom = qs * kt2 by construction.
    """

    fs: float
    fp: float | None
    qs: float
    qp: float | None
    qm: float
    kt2: float | None
    c0: float
    fom: float | None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.fs > 0:
            raise ValueError(f"fs must be > 0, got {self.fs!r}")
        if self.fp is not None and not self.fp > self.fs:
            raise ValueError("fp must exceed fs when present")

    def as_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            if math.isinf(x):
                return "inf"
            return float(x)

        return {
            "fs_hz": num(self.fs),
            "fp_hz": num(self.fp),
            "q_s": num(self.qs),
            "q_p": num(self.qp),
            "q_m": num(self.qm),
            "kt2": num(self.kt2),
            "c0_f": num(self.c0),
            "fom": num(self.fom),
            "flags": list(self.flags),
        }


def _dense_local_grid(f0: float, q_guess: float, lo: float, hi: float) -> np.ndarray:
    """Even-count grid straddling f0, sized to resolve a Q of q_guess.

    Even count keeps the exact resonance point off the grid so lossless
    models never evaluate at a pole.  The five-point phase slope reads
    low by about (17/15)(2 q h / f0)^2 on an arctangent phase profile of
    quality q sampled at spacing h, so the window is kept to f0/q total
    half-width: 400 points then put the bias near 1e-4, below rendering
    precision even for figure-of-merit integers.
    """
    q = min(max(q_guess, 20.0), Q_SENTINEL)
    half = f0 * 1.0 / q
    a = max(f0 - half, lo, f0 * 1e-6)
    b = min(f0 + half, hi)
    if not b > a:
        a, b = lo, hi
    return np.linspace(a, b, 400)


def metrics_from_model(model: MbvdModel, grid: np.ndarray) -> ResonatorMetrics:
    """Report metrics of the dominant branch evaluated against a grid span.

    Q_s and Q_p come from the phase slope of the model's own densely
    resynthesized admittance / impedance around fs and fp, so they are
    grid-noise free.  The passed grid fixes the admissible analysis span:
    an fp beyond it leaves the fp-derived fields None and sets a flag.
    """
    from .extract import q_from_phase_slope  # local import avoids a cycle

    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size < 2:
        raise ValueError("grid must contain at least two frequencies")
    if not model.branches:
        raise ValueError("model has no motional branches")
    f_lo, f_hi = float(grid[0]), float(grid[-1])

    dom = model.dominant_index
    fs_list = [b.fs for b in model.branches]
    fs = fs_list[dom]
    fp_num = _fp_search(model, dom, fs_list)
    fp_closed = _fp_closed(model, dom, fs_list)

    flags: list[str] = []
    dom_branch = model.branches[dom]
    qm = dom_branch.qm
    q_guess = qm if math.isfinite(qm) else Q_SENTINEL

    rm, lm, cm = _branch_arrays(model)
    g_s = _dense_local_grid(fs, q_guess, f_lo, f_hi)
    y_s = admittance_arrays(g_s, model.c0, model.r0, model.rs, rm, lm, cm)
    qs = q_from_phase_slope(ComplexTrace(freqs=g_s, values=y_s), fs)
    if qs > Q_SENTINEL:
        qs = math.inf

    if fp_num is None:
        flags.append("fp-absent")
    elif fp_closed > f_hi:
        flags.append("fp-unbracketed")
    elif abs(fp_num - fp_closed) > FP_CROSSCHECK_RTOL * fp_closed:
        # Lossy zero crossing drifts off the closed form at very low Q;
        # the closed form stays the reported value.
        flags.append("fp-crosscheck")
    if fp_num is None or fp_closed > f_hi:
        return ResonatorMetrics(
            fs=fs, fp=None, qs=qs, qp=None, qm=qm, kt2=None, c0=model.c0,
            fom=None, flags=tuple(flags),
        )
    fp = fp_closed

    kt2 = kt2_from_frequencies(fs, fp)
    g_p = _dense_local_grid(fp, q_guess, f_lo, f_hi)
    y_p = admittance_arrays(g_p, model.c0, model.r0, model.rs, rm, lm, cm)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_p = 1.0 / y_p
    qp = q_from_phase_slope(ComplexTrace(freqs=g_p, values=z_p), fp)
    if qp > Q_SENTINEL:
        qp = math.inf
    fom = qs * kt2
    return ResonatorMetrics(
        fs=fs, fp=fp, qs=qs, qp=qp, qm=qm, kt2=kt2, c0=model.c0,
        fom=fom, flags=tuple(flags),
    )


def model_to_dict(model: MbvdModel) -> dict:
    """JSON-ready dict with SI units and a topology tag."""
    return {
        "topology": "mbvd/1",
        "c0_f": model.c0,
        "r0_ohm": model.r0,
        "rs_ohm": model.rs,
        "branches": [
            {"rm_ohm": b.rm, "lm_h": b.lm, "cm_f": b.cm} for b in model.branches
        ],
    }


def model_from_dict(d: dict) -> MbvdModel:
    tag = d.get("topology")
    if tag != "mbvd/1":
        raise ValueError(f"unsupported model topology tag {tag!r}")
    branches = tuple(
        MotionalBranch(rm=float(b["rm_ohm"]), lm=float(b["lm_h"]), cm=float(b["cm_f"]))
        for b in d.get("branches", ())
    )
    branches = tuple(sorted(branches, key=lambda b: b.fs))
    return MbvdModel(
        c0=float(d["c0_f"]),
        r0=float(d.get("r0_ohm", 0.0)),
        rs=float(d.get("rs_ohm", 0.0)),
        branches=branches,
    )

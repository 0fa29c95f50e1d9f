"""Touchstone ingestion and exact two-port network algebra.

Parses Touchstone v1.0 ``.s2p`` text into a frequency-indexed stack of 2x2
S matrices, converts between S and Y with the closed-form bilinear map, and
extracts the one-port device admittance from a two-port measurement.
All matrices are numpy arrays of shape (npoints, 2, 2); frequencies are Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import SingularNetworkError, TouchstoneError

_UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_FORMATS = ("ri", "ma", "db")
_REJECTED_TYPES = ("y", "z", "h", "g")

# Relative determinant floor below which (I + S) or (I + z0 Y) is treated
# as singular instead of inverted.
DET_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class NetworkRecord:
    """Frequency grid plus per-point 2x2 complex network matrices.

    Attributes
    ----------
    freqs : ndarray
        Frequencies in Hz, strictly increasing, all positive.
    matrices : ndarray
        Complex array of shape (npoints, 2, 2); entry [i, j, k] is the
        (j+1, k+1) matrix element at freqs[i].
    kind : str
        "S" for scattering parameters, "Y" for admittance.
    z0 : float
        Reference impedance in ohm (applies to S; retained through Y).
    """

    freqs: np.ndarray
    matrices: np.ndarray
    kind: str
    z0: float = 50.0

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float).reshape(-1)
        matrices = np.asarray(self.matrices, dtype=complex).reshape(freqs.size, 2, 2)
        if self.kind not in ("S", "Y"):
            raise ValueError(f"kind must be 'S' or 'Y', got {self.kind!r}")
        if not self.z0 > 0:
            raise ValueError(f"z0 must be positive, got {self.z0!r}")
        if freqs.size:
            if freqs[0] <= 0:
                raise ValueError("frequencies must be positive")
            if np.any(np.diff(freqs) <= 0):
                raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "matrices", matrices)

    @property
    def npoints(self) -> int:
        return self.freqs.size


@dataclass(frozen=True)
class ComplexTrace:
    """A scalar complex quantity sampled on a strictly increasing Hz grid."""

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=complex).reshape(freqs.shape)
        if freqs.size:
            if freqs[0] <= 0:
                raise ValueError("frequencies must be positive")
            if np.any(np.diff(freqs) <= 0):
                raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    @property
    def npoints(self) -> int:
        return self.freqs.size


@dataclass(frozen=True)
class _OptionLine:
    scale: float = 1e9
    fmt: str = "ma"
    z0: float = 50.0


def _parse_option_line(text: str, lineno: int) -> _OptionLine:
    tokens = text[1:].split()
    scale = None
    fmt = None
    z0 = None
    saw_type = False
    i = 0
    while i < len(tokens):
        tok = tokens[i].lower()
        if tok in _UNIT_SCALE:
            if scale is not None:
                raise TouchstoneError("duplicate frequency unit in option line", lineno)
            scale = _UNIT_SCALE[tok]
        elif tok in _FORMATS:
            if fmt is not None:
                raise TouchstoneError("duplicate format in option line", lineno)
            fmt = tok
        elif tok == "s":
            if saw_type:
                raise TouchstoneError("duplicate parameter type in option line", lineno)
            saw_type = True
        elif tok in _REJECTED_TYPES:
            raise TouchstoneError(
                f"unsupported parameter type {tok.upper()!r} (only S accepted)", lineno
            )
        elif tok == "r":
            if z0 is not None or i + 1 >= len(tokens):
                raise TouchstoneError("malformed reference impedance in option line", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(
                    f"malformed reference impedance {tokens[i + 1]!r}", lineno
                ) from None
            if not z0 > 0:
                raise TouchstoneError("reference impedance must be positive", lineno)
            i += 1
        else:
            raise TouchstoneError(f"unrecognized option token {tokens[i]!r}", lineno)
        i += 1
    return _OptionLine(
        scale=1e9 if scale is None else scale,
        fmt="ma" if fmt is None else fmt,
        z0=50.0 if z0 is None else z0,
    )


def _pair_to_complex(fmt: str, a: float, b: float) -> complex:
    if fmt == "ri":
        return complex(a, b)
    if fmt == "ma":
        return a * complex(math.cos(math.radians(b)), math.sin(math.radians(b)))
    # db: magnitude in dB20, angle in degrees
    mag = 10.0 ** (a / 20.0)
    return mag * complex(math.cos(math.radians(b)), math.sin(math.radians(b)))


def parse_touchstone(source: str | Iterable[str]) -> NetworkRecord:
    """Parse Touchstone v1.0 two-port text into a NetworkRecord of kind "S".

    Accepts the full option-line vocabulary (Hz/kHz/MHz/GHz, RI/MA/DB,
    R z0), ``!`` comments, blank lines, and rows wrapped across physical
    lines.  A missing option line means ``# GHZ S MA R 50``.  Anything
    that is not a well-formed two-port file raises TouchstoneError with
    the offending line number.

    Parameters
    ----------
    source : str or iterable of str
        Full file text, or an iterable of lines.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [str(s) for s in source]

    option: _OptionLine | None = None
    rows: list[tuple[int, list[float]]] = []
    buffer: list[float] = []
    buffer_line = 0
    line_token_counts: list[tuple[int, int]] = []

    for lineno, raw in enumerate(lines, start=1):
        bang = raw.find("!")
        if bang >= 0:
            raw = raw[:bang]
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            if rows or buffer:
                raise TouchstoneError("option line after data", lineno)
            if option is not None:
                raise TouchstoneError("duplicate option line", lineno)
            option = _parse_option_line(text, lineno)
            continue
        tokens = text.split()
        values = []
        for tok in tokens:
            try:
                values.append(float(tok))
            except ValueError:
                raise TouchstoneError(f"non-numeric token {tok!r}", lineno) from None
        line_token_counts.append((lineno, len(values)))
        if not buffer:
            buffer_line = lineno
            if len(values) > 9:
                raise TouchstoneError(
                    f"{len(values)} columns in one row; only 2-port data (9 columns) supported",
                    lineno,
                )
        buffer.extend(values)
        if len(buffer) == 9:
            rows.append((buffer_line, buffer.copy()))
            buffer.clear()
        elif len(buffer) > 9:
            raise TouchstoneError(
                f"row starting here accumulates {len(buffer)} columns, expected 9", buffer_line
            )

    all_three = len(line_token_counts) >= 2 and all(c == 3 for _, c in line_token_counts)
    if buffer:
        if all(c == 3 for _, c in line_token_counts):
            raise TouchstoneError(
                "rows have 3 columns (1-port data); only 2-port supported",
                line_token_counts[0][0],
            )
        raise TouchstoneError(
            f"incomplete final row ({len(buffer)} of 9 columns)", buffer_line
        )
    if all_three:
        raise TouchstoneError(
            "rows have 3 columns (1-port data); only 2-port supported",
            line_token_counts[0][0],
        )
    if not rows:
        raise TouchstoneError("no data rows found")

    if option is None:
        option = _OptionLine()

    freqs = np.empty(len(rows))
    mats = np.empty((len(rows), 2, 2), dtype=complex)
    prev = -math.inf
    for i, (lineno, row) in enumerate(rows):
        f = row[0] * option.scale
        if f <= prev:
            raise TouchstoneError(
                f"frequency {f:.6g} Hz is not above the previous point", lineno
            )
        prev = f
        freqs[i] = f
        # v1.0 two-port column order: S11 S21 S12 S22
        s11 = _pair_to_complex(option.fmt, row[1], row[2])
        s21 = _pair_to_complex(option.fmt, row[3], row[4])
        s12 = _pair_to_complex(option.fmt, row[5], row[6])
        s22 = _pair_to_complex(option.fmt, row[7], row[8])
        mats[i, 0, 0] = s11
        mats[i, 0, 1] = s12
        mats[i, 1, 0] = s21
        mats[i, 1, 1] = s22

    return NetworkRecord(freqs=freqs, matrices=mats, kind="S", z0=option.z0)


def write_touchstone(net: NetworkRecord, fmt: str = "RI", unit: str = "GHz") -> str:
    """Render an S-kind NetworkRecord as Touchstone v1.0 two-port text.

    Values are printed with 17 significant digits so a parse round trip
    reproduces the matrices to floating-point precision (RI) or within
    1e-12 relative (MA/DB).
    """
    if net.kind != "S":
        raise ValueError("write_touchstone requires an S-kind record; convert first")
    fmt_l = fmt.lower()
    if fmt_l not in _FORMATS:
        raise ValueError(f"format must be one of RI/MA/DB, got {fmt!r}")
    unit_l = unit.lower()
    if unit_l not in _UNIT_SCALE:
        raise ValueError(f"unit must be one of Hz/kHz/MHz/GHz, got {unit!r}")
    scale = _UNIT_SCALE[unit_l]

    def pair(v: complex) -> tuple[float, float]:
        if fmt_l == "ri":
            return v.real, v.imag
        mag = abs(v)
        ang = math.degrees(math.atan2(v.imag, v.real))
        if fmt_l == "ma":
            return mag, ang
        return 20.0 * math.log10(max(mag, 1e-300)), ang

    out = [f"! 2-port S-parameters, {fmt_l.upper()} format",
           f"# {unit_l.upper()} S {fmt_l.upper()} R {net.z0:.17g}"]
    for i in range(net.npoints):
        m = net.matrices[i]
        cells = [net.freqs[i] / scale]
        for v in (m[0, 0], m[1, 0], m[0, 1], m[1, 1]):
            cells.extend(pair(v))
        out.append(" ".join(f"{c:.17e}" for c in cells))
    return "\n".join(out) + "\n"


def _det_and_rel(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    scale = np.sum(np.abs(a) ** 2, axis=(1, 2)) / 2.0
    rel = np.abs(det) / np.maximum(scale, 1e-300)
    return det, rel


def _inv2(a: np.ndarray, det: np.ndarray) -> np.ndarray:
    inv = np.empty_like(a)
    inv[:, 0, 0] = a[:, 1, 1]
    inv[:, 1, 1] = a[:, 0, 0]
    inv[:, 0, 1] = -a[:, 0, 1]
    inv[:, 1, 0] = -a[:, 1, 0]
    return inv / det[:, None, None]


def s_to_y(net: NetworkRecord) -> NetworkRecord:
    """Convert S to Y: Y = (1/z0) (I - S) (I + S)^-1.

    Raises SingularNetworkError at the first frequency where (I + S) is
    singular below the relative determinant floor.
    """
    if net.kind != "S":
        raise ValueError("s_to_y requires an S-kind record")
    eye = np.eye(2, dtype=complex)
    a = eye[None, :, :] + net.matrices
    det, rel = _det_and_rel(a)
    bad = np.nonzero(rel < DET_REL_FLOOR)[0]
    if bad.size:
        raise SingularNetworkError("(I + S) is singular", float(net.freqs[bad[0]]))
    y = (eye[None, :, :] - net.matrices) @ _inv2(a, det) / net.z0
    return NetworkRecord(freqs=net.freqs, matrices=y, kind="Y", z0=net.z0)


def y_to_s(net: NetworkRecord) -> NetworkRecord:
    """Convert Y to S: S = (I - z0 Y) (I + z0 Y)^-1."""
    if net.kind != "Y":
        raise ValueError("y_to_s requires a Y-kind record")
    eye = np.eye(2, dtype=complex)
    zy = net.z0 * net.matrices
    a = eye[None, :, :] + zy
    det, rel = _det_and_rel(a)
    bad = np.nonzero(rel < DET_REL_FLOOR)[0]
    if bad.size:
        raise SingularNetworkError("(I + z0 Y) is singular", float(net.freqs[bad[0]]))
    s = (eye[None, :, :] - zy) @ _inv2(a, det)
    return NetworkRecord(freqs=net.freqs, matrices=s, kind="S", z0=net.z0)


def extract_y21(net: NetworkRecord) -> ComplexTrace:
    """Pull the raw Y21 trace from a Y-kind record."""
    if net.kind != "Y":
        raise ValueError("extract_y21 requires a Y-kind record")
    return ComplexTrace(freqs=net.freqs, values=net.matrices[:, 1, 0])


def device_admittance(net: NetworkRecord, embedding: str = "series") -> ComplexTrace:
    """Collapse a two-port Y record to the one-port device admittance.

    "series" treats the device as a series element between the two ports
    (Y_dev = -Y21, the default for through-connected resonators); "shunt"
    treats it as a shunt element at port 1 (Y_dev = Y11 + Y21).
    """
    if net.kind != "Y":
        raise ValueError("device_admittance requires a Y-kind record")
    if embedding == "series":
        values = -net.matrices[:, 1, 0]
    elif embedding == "shunt":
        values = net.matrices[:, 0, 0] + net.matrices[:, 1, 0]
    else:
        raise ValueError(f"embedding must be 'series' or 'shunt', got {embedding!r}")
    return ComplexTrace(freqs=net.freqs, values=values)


def series_element_network(trace: ComplexTrace, z0: float = 50.0) -> NetworkRecord:
    """Embed a one-port admittance as the series element of a two-port Y record.

    The inverse of the "series" convention in device_admittance: the
    resulting record has Y21 = -Y_dev, so analysis of the written file
    recovers the input trace exactly.
    """
    y = trace.values
    mats = np.empty((trace.npoints, 2, 2), dtype=complex)
    mats[:, 0, 0] = y
    mats[:, 1, 1] = y
    mats[:, 0, 1] = -y
    mats[:, 1, 0] = -y
    return NetworkRecord(freqs=trace.freqs, matrices=mats, kind="Y", z0=z0)


def to_canonical_dict(net: NetworkRecord) -> dict:
    """Serialize a record to the canonical JSON-ready dict (Hz, re/im pairs)."""
    return {
        "kind": net.kind,
        "z0_ohm": net.z0,
        "freqs_hz": [float(f) for f in net.freqs],
        "matrices": [
            [[[float(v.real), float(v.imag)] for v in row] for row in m]
            for m in net.matrices
        ],
    }


def from_canonical_dict(d: dict) -> NetworkRecord:
    freqs = np.asarray(d["freqs_hz"], dtype=float)
    raw = np.asarray(d["matrices"], dtype=float)
    mats = raw[..., 0] + 1j * raw[..., 1]
    return NetworkRecord(freqs=freqs, matrices=mats, kind=d["kind"], z0=float(d["z0_ohm"]))

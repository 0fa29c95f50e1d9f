"""Command-line front end: measurement files in, tables and plots out.

Subcommands
    fit      extract an equivalent circuit and metrics from one .s2p file
    batch    run fit across every .s2p in a directory, aggregate a table
    synth    synthesize a .s2p from a model JSON (the golden-file generator)
    modes    electrode-sampling mode spectrum, admittance and N sweeps
    design   plan a multi-frequency bank from target frequencies
    convert  rewrite a Touchstone file in another format/unit

All quantities on the command line are SI; display units appear only in
rendered tables. Identical inputs and flags produce byte-identical outputs
(no timestamps, stable float formatting, sorted JSON keys). Every command
writes a ``*_manifest.json`` recording inputs, options and outputs.

Exit codes: 0 success, 1 partial batch/plan failure, 2 input error,
3 fit non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .designkit import DeviceGeometry, ProcessRules, calibrate_velocity, plan_bank, render_table
from .errors import EstimationError, FitError, ToolkitError
from .extract import detect_resonances, initial_guess
from .fitkernel import WEIGHTINGS, FitOptions, FitResult, fit, fit_multistart, select_branch_count
from .mbvd import (
    MbvdModel,
    ResonatorMetrics,
    metrics_from_model,
    model_from_dict,
    model_to_dict,
    synthesize_admittance,
)
from .netparams import (
    ComplexTrace,
    NetworkRecord,
    device_admittance,
    parse_touchstone,
    s_to_y,
    series_element_network,
    write_touchstone,
    y_to_s,
)
from .refdata import velocity_observations
from .svgplot import Series, line_plot, stem_series
from .transduce import build_layout, mode_couplings, spectrum_to_mbvd, split_study

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INPUT = 2
EXIT_NOCONV = 3


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class OutputWriter:
    """Writes named outputs into one directory and remembers their order."""

    def __init__(self, outdir: str):
        self.outdir = Path(outdir)
        self.written: list[str] = []

    def write_text(self, name: str, text: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / name
        path.write_text(text)
        self.written.append(name)
        return path

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, _dump_json(obj))


def _write_manifest(command: str, inputs: Sequence[str], args: argparse.Namespace,
                    out: OutputWriter, prefix: str) -> None:
    options = {}
    for key, value in sorted(vars(args).items()):
        if key in ("handler", "command"):
            continue
        if isinstance(value, (str, int, float, bool)) or value is None:
            options[key] = value
        else:
            options[key] = str(value)
    name = f"{prefix}_manifest.json"
    manifest = {
        "command": command,
        "inputs": list(inputs),
        "options": options,
        "outputs": out.written + [name],
    }
    out.write_text(name, _dump_json(manifest))


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise ToolkitError(f"cannot read {path}: {exc}") from exc


def _load_json(path: Path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ToolkitError(f"{path}: invalid JSON ({exc})") from exc


def _load_device_trace(path: Path, shunt: bool) -> tuple[NetworkRecord, ComplexTrace]:
    net = parse_touchstone(_read_text(path))
    ynet = s_to_y(net)
    return net, device_admittance(ynet, "shunt" if shunt else "series")


def _candidates_doc(candidates) -> list[dict]:
    return [{
        "fs_est_hz": c.fs_est,
        "fp_est_hz": c.fp_est,
        "prominence_db": c.prominence_db,
        "span": list(c.span),
    } for c in candidates]


def _fit_trace(trace: ComplexTrace, args: argparse.Namespace) -> tuple[FitResult, list]:
    candidates = detect_resonances(trace, threshold_db=args.threshold_db)
    if not candidates:
        raise EstimationError("no resonant peaks found above the prominence threshold")
    options = FitOptions(weighting=args.weighting)
    if args.branches is None:
        return select_branch_count(trace, candidates, options), candidates
    k = args.branches
    if k < 1:
        raise ValueError("--branches must be >= 1")
    if k > len(candidates):
        raise EstimationError(f"only {len(candidates)} candidate resonances for --branches {k}")
    ranked = sorted(candidates, key=lambda c: (-c.prominence_db, c.fs_est))[:k]
    subset = sorted(ranked, key=lambda c: c.fs_est)
    seed = initial_guess(trace, subset, exclude=[c.span for c in candidates])
    if args.restarts > 0:
        return fit_multistart(trace, seed, options, restarts=args.restarts), candidates
    return fit(trace, seed, options), candidates


def _db20(values: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(values), 1e-300))


def _admittance_csv(freqs: np.ndarray, measured: np.ndarray | None,
                    fitted: np.ndarray | None) -> str:
    cols = ["freq_Hz"]
    if measured is not None:
        cols += ["ReY_S", "ImY_S"]
    if fitted is not None:
        cols += ["ReYfit_S", "ImYfit_S"]
    lines = [",".join(cols)]
    for i, f in enumerate(freqs):
        cells = [repr(float(f))]
        if measured is not None:
            cells += [repr(float(measured[i].real)), repr(float(measured[i].imag))]
        if fitted is not None:
            cells += [repr(float(fitted[i].real)), repr(float(fitted[i].imag))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _fit_outputs(out: OutputWriter, prefix: str, source_name: str, trace: ComplexTrace,
                 result: FitResult, metrics: ResonatorMetrics, args: argparse.Namespace) -> None:
    out.write_json(f"{prefix}_model.json", model_to_dict(result.model))
    out.write_json(f"{prefix}_metrics.json", {
        "source": source_name,
        "embedding": "shunt" if args.shunt else "series",
        "metrics": metrics.as_dict(),
        "fit": {
            "converged": result.converged,
            "cost": result.cost,
            "iterations": result.iterations,
            "n_branches": len(result.model.branches),
            "residual_rms": result.residual_rms,
            "weighting": args.weighting,
        },
    })
    if args.trace_fit:
        out.write_json(f"{prefix}_fit_trace.json", {"cost_trace": list(result.cost_trace)})
    fitted = synthesize_admittance(result.model, trace.freqs)
    out.write_text(f"{prefix}_fit.csv", _admittance_csv(trace.freqs, trace.values, fitted.values))
    svg = line_plot(
        [Series("measured", trace.freqs, _db20(trace.values)),
         Series("fitted", trace.freqs, _db20(fitted.values))],
        xlabel="frequency [Hz]", ylabel="|Y| [dB S]", title=source_name)
    out.write_text(f"{prefix}_fit.svg", svg)
    report = render_table([(None, metrics)], labels=[prefix])
    out.write_text(f"{prefix}_table.md", report.markdown)


def _cmd_fit(args: argparse.Namespace) -> int:
    path = Path(args.input)
    prefix = args.prefix or path.stem
    out = OutputWriter(args.outdir)
    net, trace = _load_device_trace(path, args.shunt)
    result, candidates = _fit_trace(trace, args)
    if args.emit_candidates:
        out.write_json(f"{prefix}_candidates.json", _candidates_doc(candidates))
    metrics = metrics_from_model(result.model, trace.freqs)
    _fit_outputs(out, prefix, path.name, trace, result, metrics, args)
    _write_manifest("fit", [str(path)], args, out, prefix)
    return EXIT_OK if result.converged else EXIT_NOCONV


def _cmd_batch(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ToolkitError(f"not a directory: {directory}")
    files = sorted(directory.glob("*.s2p"))
    if not files:
        raise ToolkitError(f"no .s2p files in {directory}")
    prefix = args.prefix or "batch"
    out = OutputWriter(args.outdir)

    rows: list[tuple[None, ResonatorMetrics]] = []
    labels: list[str] = []
    row_docs: list[dict] = []
    failures: list[dict] = []
    for path in files:
        try:
            net, trace = _load_device_trace(path, args.shunt)
            result, _ = _fit_trace(trace, args)
            if not result.converged:
                raise FitError("fit did not converge", iteration=result.iterations)
            metrics = metrics_from_model(result.model, trace.freqs)
        except (ToolkitError, ValueError) as exc:
            failures.append({"file": path.name, "error": str(exc)})
            continue
        rows.append((None, metrics))
        labels.append(path.stem)
        row_docs.append({"file": path.name, "metrics": metrics.as_dict()})

    if rows:
        report = render_table(rows, labels=labels)
        out.write_text(f"{prefix}_batch.md", report.markdown)
        out.write_text(f"{prefix}_batch.csv", report.csv)
    out.write_json(f"{prefix}_batch.json", {"rows": row_docs, "failures": failures})
    _write_manifest("batch", [str(directory)], args, out, prefix)
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_grid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be lo:hi:n, got {spec!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not 0.0 < lo < hi:
        raise ValueError("grid needs 0 < lo < hi")
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(lo, hi, n)


def _cmd_synth(args: argparse.Namespace) -> int:
    model_path = Path(args.model)
    model = model_from_dict(_load_json(model_path))
    grid = _parse_grid(args.grid)
    trace = synthesize_admittance(model, grid)
    net = series_element_network(trace, z0=args.z0)
    text = write_touchstone(y_to_s(net), fmt=args.fmt, unit=args.unit)
    prefix = args.prefix or model_path.stem
    out = OutputWriter(args.outdir)
    out.write_text(args.output or f"{prefix}.s2p", text)
    _write_manifest("synth", [str(model_path)], args, out, prefix)
    return EXIT_OK


def _spectrum_csv(n_elements: int, spectrum, extra: dict | None = None) -> list[str]:
    lines = []
    for m in spectrum.modes:
        cells = [str(n_elements), str(m.n), repr(m.f_n), repr(m.eta), str(m.nodes)]
        if extra is not None:
            cells += [repr(extra["f_design"]), repr(extra["offset"])]
        lines.append(",".join(cells))
    return lines


def _cmd_modes(args: argparse.Namespace) -> int:
    geom = DeviceGeometry(
        wavelength=args.wavelength, topology=args.topology,
        n_elements=args.n, coverage=args.coverage)
    layout = build_layout(geom)
    field_model = "delta" if args.delta_electrodes else "tophat"
    n_max = args.n_max if args.n_max is not None else 2 * layout.design_index
    spectrum = mode_couplings(layout, args.vp, n_max, field_model)
    prefix = args.prefix or f"modes_{geom.topology}_n{geom.n_elements}"
    out = OutputWriter(args.outdir)

    out.write_text(f"{prefix}_spectrum.csv",
                   "\n".join(["N,n,f_n_Hz,eta_n,nodes"]
                             + _spectrum_csv(geom.n_elements, spectrum)) + "\n")
    out.write_text(f"{prefix}_spectrum.svg", line_plot(
        [stem_series("eta_n", spectrum.frequencies, spectrum.weights)],
        xlabel="frequency [Hz]", ylabel="coupling weight",
        title=f"{geom.topology} N={geom.n_elements}"))

    model = spectrum_to_mbvd(spectrum, c0=args.c0, kt2_total=args.kt2, q_assumed=args.q)
    dominant = spectrum.dominant_modes(2)
    lo = 0.80 * min(m.f_n for m in dominant)
    hi = 1.25 * max(m.f_n for m in dominant)
    grid = np.linspace(lo, hi, args.grid_points)
    ytrace = synthesize_admittance(model, grid)
    out.write_text(f"{prefix}_admittance.csv", _admittance_csv(grid, ytrace.values, None))
    out.write_text(f"{prefix}_admittance.svg", line_plot(
        [Series("model |Y|", grid, _db20(ytrace.values))],
        xlabel="frequency [Hz]", ylabel="|Y| [dB S]",
        title=f"{geom.topology} N={geom.n_elements}"))

    if args.sweep_n:
        a, b, step = (int(p) for p in args.sweep_n.split(":"))
        if a < 2 or step < 1 or b < a:
            raise ValueError(f"bad sweep {args.sweep_n!r}; want a:b:step with a >= 2")
        geoms = [DeviceGeometry(wavelength=geom.wavelength, topology=geom.topology,
                                n_elements=n, coverage=geom.coverage)
                 for n in range(a, b + 1, step)]
        records = split_study(geoms, args.vp, n_max=args.n_max, field_model=field_model)
        header = "N,n,f_n_Hz,eta_n,nodes,f_design_Hz,offset"
        lines = [header]
        for rec in records:
            for m in rec.modes:
                lines.append(",".join([
                    str(rec.n_elements), str(m.n), repr(m.f_n), repr(m.eta),
                    str(m.nodes), repr(rec.design_frequency), repr(rec.offset)]))
        out.write_text(f"{prefix}_sweep.csv", "\n".join(lines) + "\n")
        out.write_json(f"{prefix}_sweep.json", [rec.as_dict() for rec in records])
        counts = np.array([rec.n_elements for rec in records], dtype=float)
        offsets = np.array([rec.offset for rec in records])
        logy = bool(np.all(offsets > 0.0))
        out.write_text(f"{prefix}_sweep.svg", line_plot(
            [Series("dominant-mode offset", counts, offsets)],
            xlabel="electrode count N", ylabel="fractional offset",
            title=f"{geom.topology} convergence", logy=logy))

    _write_manifest("modes", [], args, out, prefix)
    return EXIT_OK


def _cmd_design(args: argparse.Namespace) -> int:
    targets_path = Path(args.targets)
    doc = _load_json(targets_path)
    targets = doc.get("targets_hz") if isinstance(doc, dict) else doc
    if (not isinstance(targets, list) or not targets
            or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in targets)):
        raise ToolkitError(f"{targets_path}: expected a non-empty list of target frequencies (Hz)")

    rules = ProcessRules()
    velocity_map: dict = {}
    inputs = [str(targets_path)]
    if args.config:
        cfg_path = Path(args.config)
        cfg = _load_json(cfg_path)
        inputs.append(str(cfg_path))
        if "rules" in cfg:
            rules = ProcessRules.from_dict(cfg["rules"])
        velocity_map = cfg.get("velocity", {})

    if args.vp is not None:
        v_p = args.vp
    elif args.mode in velocity_map:
        v_p = float(velocity_map[args.mode])
    else:
        # fall back to the bundled survey; the median is robust to its outliers
        v_p, _ = calibrate_velocity(velocity_observations(mode=args.mode))

    policy = args.topology_policy
    try:
        policy = float(policy)
    except ValueError:
        pass
    entries = plan_bank([float(t) for t in targets], v_p, rules, policy,
                        n_elements=args.n, coverage=args.coverage, mode=args.mode)

    prefix = args.prefix or targets_path.stem
    out = OutputWriter(args.outdir)
    csv_lines = ["targets_Hz,wavelength_nm,topology,status,findings"]
    doc_entries = []
    for e in entries:
        findings = "; ".join(f.message for f in e.findings)
        status = "ok" if e.ok else "error"
        csv_lines.append(",".join([
            "|".join(repr(t) for t in e.targets),
            f"{e.wavelength * 1e9:.0f}",
            e.geometry.topology if e.geometry is not None else "-",
            status,
            f'"{e.error or findings}"' if (e.error or findings) else "",
        ]))
        doc_entries.append({
            "targets_hz": list(e.targets),
            "wavelength_m": e.wavelength,
            "topology": e.geometry.topology if e.geometry is not None else None,
            "n_elements": e.geometry.n_elements if e.geometry is not None else None,
            "coverage": e.geometry.coverage if e.geometry is not None else None,
            "findings": [{"code": f.code, "message": f.message,
                          "value": f.value, "limit": f.limit} for f in e.findings],
            "error": e.error,
        })
    out.write_text(f"{prefix}_plan.csv", "\n".join(csv_lines) + "\n")
    out.write_json(f"{prefix}_plan.json", {"v_p": v_p, "entries": doc_entries})
    _write_manifest("design", inputs, args, out, prefix)
    return EXIT_PARTIAL if any(not e.ok for e in entries) else EXIT_OK


def _cmd_convert(args: argparse.Namespace) -> int:
    path = Path(args.input)
    net = parse_touchstone(_read_text(path))
    text = write_touchstone(net, fmt=args.fmt, unit=args.unit)
    prefix = args.prefix or path.stem
    out = OutputWriter(args.outdir)
    out.write_text(args.output or f"{prefix}_{args.fmt.lower()}.s2p", text)
    _write_manifest("convert", [str(path)], args, out, prefix)
    return EXIT_OK


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--outdir", default=".", help="directory for all outputs (default: cwd)")
    p.add_argument("--prefix", default=None, help="output filename prefix (default: derived from input)")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shunt", action="store_true",
                   help="device is embedded shunt-to-ground (default: series through)")
    p.add_argument("--weighting", choices=WEIGHTINGS, default="complex")
    p.add_argument("--branches", type=int, default=None,
                   help="fix the motional branch count (default: automatic selection)")
    p.add_argument("--restarts", type=int, default=0,
                   help="extra perturbed fits with --branches; best cost wins")
    p.add_argument("--threshold-db", type=float, default=3.0,
                   help="peak prominence threshold for resonance detection")
    p.add_argument("--trace-fit", action="store_true",
                   help="dump the per-iteration cost trace as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resokit",
        description="Resonator admittance fitting, transduction modelling and bank planning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one .s2p measurement")
    p.add_argument("input", help="Touchstone .s2p file")
    _add_fit_flags(p)
    p.add_argument("--emit-candidates", action="store_true",
                   help="dump the detected resonance candidates as JSON")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("batch", help="fit every .s2p in a directory")
    p.add_argument("directory")
    _add_fit_flags(p)
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_batch)

    p = sub.add_parser("synth", help="synthesize a .s2p from a model JSON")
    p.add_argument("model", help="model JSON (as written by fit)")
    p.add_argument("--grid", required=True, help="frequency grid lo:hi:n in Hz")
    p.add_argument("--z0", type=float, default=50.0)
    p.add_argument("--fmt", choices=("RI", "MA", "DB"), default="RI")
    p.add_argument("--unit", default="GHz", help="frequency unit of the output file")
    p.add_argument("-o", "--output", default=None, help="output filename (within --outdir)")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("modes", help="electrode-sampling mode spectrum and admittance")
    p.add_argument("--topology", choices=("lvr", "dlvr"), required=True)
    p.add_argument("--n", type=int, required=True, help="electrode count N")
    p.add_argument("--lambda", dest="wavelength", type=float, required=True,
                   help="design wavelength in metres")
    p.add_argument("--c", dest="coverage", type=float, default=0.5, help="metal coverage fraction")
    p.add_argument("--vp", type=float, required=True, help="phase velocity in m/s")
    p.add_argument("--n-max", type=int, default=None,
                   help="highest mode index (default: twice the design index)")
    p.add_argument("--delta-electrodes", action="store_true",
                   help="sample the field at gap centres instead of finite-width gaps")
    p.add_argument("--c0", type=float, default=100e-15, help="static capacitance for synthesis [F]")
    p.add_argument("--kt2", type=float, default=0.20, help="total coupling for synthesis")
    p.add_argument("--q", type=float, default=500.0, help="per-branch Q for synthesis")
    p.add_argument("--grid-points", type=int, default=2001)
    p.add_argument("--sweep-n", default=None, metavar="A:B:STEP",
                   help="also run the element-count convergence study")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_modes)

    p = sub.add_parser("design", help="plan a multi-frequency bank")
    p.add_argument("targets", help="JSON file: list of target frequencies in Hz")
    p.add_argument("--config", default=None,
                   help="JSON config with process rules and calibrated velocities")
    p.add_argument("--vp", type=float, default=None,
                   help="phase velocity override in m/s (default: calibrate from bundled survey)")
    p.add_argument("--mode", choices=("S0", "SH0"), default="S0")
    p.add_argument("--topology-policy", default="auto",
                   help='"lvr", "dlvr", "auto", or a frequency threshold in Hz')
    p.add_argument("--n", type=int, default=20, help="electrode count per device")
    p.add_argument("--coverage", type=float, default=0.5)
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_design)

    p = sub.add_parser("convert", help="rewrite a Touchstone file in another format")
    p.add_argument("input")
    p.add_argument("--fmt", choices=("RI", "MA", "DB"), default="RI")
    p.add_argument("--unit", default="GHz")
    p.add_argument("-o", "--output", default=None, help="output filename (within --outdir)")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_convert)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (ToolkitError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(run())

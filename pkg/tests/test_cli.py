"""End-to-end command line tests run in-process through cli.run."""

from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from resokit import cli
from resokit.fitkernel import FitResult
from resokit.mbvd import metrics_from_model, model_to_dict
from resokit.netparams import device_admittance, parse_touchstone, s_to_y
from resokit.refdata import display_model, roundtrip_model, synthesis_grid

from conftest import golden_text


def write_golden(path, label="L", fmt="RI", noise_db=-80.0, seed=3):
    model = roundtrip_model(label)
    grid = synthesis_grid(label)
    path.write_text(golden_text(model, grid, fmt=fmt, unit="GHz",
                                noise_db=noise_db, seed=seed))
    return model, grid


# ----------------------------------------------------------------------- fit

def test_fit_outputs_and_metrics(tmp_path):
    src = tmp_path / "rowL.s2p"
    model, grid = write_golden(src)
    outdir = tmp_path / "out"
    rc = cli.run(["fit", str(src), "--outdir", str(outdir), "--emit-candidates"])
    assert rc == 0

    names = {p.name for p in outdir.iterdir()}
    assert names == {
        "rowL_candidates.json", "rowL_model.json", "rowL_metrics.json",
        "rowL_fit.csv", "rowL_fit.svg", "rowL_table.md", "rowL_manifest.json",
    }

    doc = json.loads((outdir / "rowL_metrics.json").read_text())
    assert set(doc) == {"embedding", "fit", "metrics", "source"}
    assert doc["source"] == "rowL.s2p"
    assert doc["embedding"] == "series"
    assert doc["fit"]["converged"] is True
    assert doc["fit"]["n_branches"] == 1
    assert doc["fit"]["weighting"] == "complex"

    truth = metrics_from_model(model, grid)
    got = doc["metrics"]
    assert got["fs_hz"] == pytest.approx(truth.fs, rel=1e-4)
    assert got["kt2"] == pytest.approx(truth.kt2, rel=0.02)
    assert got["q_m"] == pytest.approx(truth.qm, rel=0.05)
    assert got["c0_f"] == pytest.approx(truth.c0, rel=0.01)

    cands = json.loads((outdir / "rowL_candidates.json").read_text())
    assert len(cands) == 1
    assert set(cands[0]) == {"fs_est_hz", "fp_est_hz", "prominence_db", "span"}
    assert cands[0]["fs_est_hz"] == pytest.approx(truth.fs, rel=2e-3)

    manifest = json.loads((outdir / "rowL_manifest.json").read_text())
    assert manifest["command"] == "fit"
    assert manifest["inputs"] == [str(src)]
    assert manifest["outputs"][-1] == "rowL_manifest.json"
    assert set(manifest["outputs"]) == names
    assert manifest["options"]["weighting"] == "complex"

    # fit csv carries measured and fitted columns over the same grid
    lines = (outdir / "rowL_fit.csv").read_text().splitlines()
    assert lines[0] == "freq_Hz,ReY_S,ImY_S,ReYfit_S,ImYfit_S"
    assert len(lines) == 1 + grid.size


def test_fit_missing_file(tmp_path):
    rc = cli.run(["fit", str(tmp_path / "nope.s2p"), "--outdir", str(tmp_path)])
    assert rc == 2


def test_fit_corrupt_file(tmp_path):
    src = tmp_path / "bad.s2p"
    src.write_text("# GHZ S RI R 50\n1.0 bogus 0 0 0 0 0 0 0\n")
    rc = cli.run(["fit", str(src), "--outdir", str(tmp_path / "o")])
    assert rc == 2


def test_fit_nonconvergence_exit_code(tmp_path, monkeypatch):
    src = tmp_path / "rowL.s2p"
    write_golden(src)
    stuck = FitResult(model=display_model("L"), cost=1.0, iterations=40,
                      converged=False, covariance=None, residual_rms=1.0,
                      cost_trace=(1.0,))
    monkeypatch.setattr(cli, "select_branch_count", lambda *a, **k: stuck)
    rc = cli.run(["fit", str(src), "--outdir", str(tmp_path / "o")])
    assert rc == 3


def test_fit_prefix_override(tmp_path):
    src = tmp_path / "rowL.s2p"
    write_golden(src)
    outdir = tmp_path / "o"
    rc = cli.run(["fit", str(src), "--outdir", str(outdir), "--prefix", "dev"])
    assert rc == 0
    assert (outdir / "dev_model.json").exists()
    assert not (outdir / "rowL_model.json").exists()


# --------------------------------------------------------------------- batch

def test_batch_partial_failure(tmp_path):
    d = tmp_path / "meas"
    d.mkdir()
    write_golden(d / "a.s2p", label="L")
    write_golden(d / "b.s2p", label="P")
    (d / "c.s2p").write_text("# GHZ S RI R 50\nnot numbers\n")
    outdir = tmp_path / "out"
    rc = cli.run(["batch", str(d), "--outdir", str(outdir)])
    assert rc == 1

    doc = json.loads((outdir / "batch_batch.json").read_text())
    assert [r["file"] for r in doc["rows"]] == ["a.s2p", "b.s2p"]
    assert len(doc["failures"]) == 1
    assert doc["failures"][0]["file"] == "c.s2p"
    assert "line" in doc["failures"][0]["error"]

    md = (outdir / "batch_batch.md").read_text().splitlines()
    assert md[0].startswith("| device |")
    assert len(md) == 4
    assert (outdir / "batch_batch.csv").exists()
    assert (outdir / "batch_manifest.json").exists()


def test_batch_all_good(tmp_path):
    d = tmp_path / "meas"
    d.mkdir()
    write_golden(d / "a.s2p", label="L")
    rc = cli.run(["batch", str(d), "--outdir", str(tmp_path / "o")])
    assert rc == 0


def test_batch_rejects_non_directory(tmp_path):
    f = tmp_path / "a.s2p"
    write_golden(f)
    assert cli.run(["batch", str(f)]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.run(["batch", str(empty)]) == 2


# --------------------------------------------------------------------- synth

def test_synth_writes_touchstone(tmp_path):
    model = display_model("P")
    mj = tmp_path / "modelP.json"
    mj.write_text(json.dumps(model_to_dict(model)))
    outdir = tmp_path / "o"
    rc = cli.run(["synth", str(mj), "--outdir", str(outdir),
                  "--grid", "1.6e9:3.9e9:501", "--fmt", "MA"])
    assert rc == 0
    net = parse_touchstone((outdir / "modelP.s2p").read_text())
    assert net.freqs.size == 501
    assert net.freqs[0] == pytest.approx(1.6e9)
    assert net.freqs[-1] == pytest.approx(3.9e9)
    # the file reproduces the model's through admittance
    y = device_admittance(s_to_y(net), "series")
    from resokit.mbvd import synthesize_admittance
    ref = synthesize_admittance(model, net.freqs)
    assert np.max(np.abs(y.values - ref.values)) < 1e-9 * np.max(np.abs(ref.values))


def test_synth_bad_grid(tmp_path):
    mj = tmp_path / "m.json"
    mj.write_text(json.dumps(model_to_dict(display_model("L"))))
    assert cli.run(["synth", str(mj), "--grid", "2e9:1e9:100"]) == 2
    assert cli.run(["synth", str(mj), "--grid", "1e9:2e9"]) == 2


# --------------------------------------------------------------------- modes

def test_modes_outputs(tmp_path):
    outdir = tmp_path / "o"
    rc = cli.run(["modes", "--outdir", str(outdir), "--topology", "dlvr",
                  "--n", "5", "--lambda", "1.8e-6", "--vp", "3426"])
    assert rc == 0
    names = {p.name for p in outdir.iterdir()}
    assert names == {
        "modes_dlvr_n5_spectrum.csv", "modes_dlvr_n5_spectrum.svg",
        "modes_dlvr_n5_admittance.csv", "modes_dlvr_n5_admittance.svg",
        "modes_dlvr_n5_manifest.json",
    }
    lines = (outdir / "modes_dlvr_n5_spectrum.csv").read_text().splitlines()
    assert lines[0] == "N,n,f_n_Hz,eta_n,nodes"
    rows = [ln.split(",") for ln in lines[1:]]
    nodes = [int(r[4]) for r in rows]
    etas = {int(r[4]): float(r[3]) for r in rows}
    # even sampled modes around the design point; 4 and 6 dominate
    assert set(nodes) <= {2, 4, 6, 8}
    assert etas[4] + etas[6] > 0.9
    assert all(int(r[0]) == 5 for r in rows)


def test_modes_sweep(tmp_path):
    outdir = tmp_path / "o"
    rc = cli.run(["modes", "--outdir", str(outdir), "--topology", "dlvr",
                  "--n", "5", "--lambda", "1.8e-6", "--vp", "3426",
                  "--sweep-n", "5:20:5"])
    assert rc == 0
    lines = (outdir / "modes_dlvr_n5_sweep.csv").read_text().splitlines()
    assert lines[0] == "N,n,f_n_Hz,eta_n,nodes,f_design_Hz,offset"
    doc = json.loads((outdir / "modes_dlvr_n5_sweep.json").read_text())
    counts = [rec["n_elements"] for rec in doc]
    offsets = [rec["offset"] for rec in doc]
    assert counts == [5, 10, 15, 20]
    assert all(a > b for a, b in zip(offsets, offsets[1:]))
    # electrode sampling puts the dominant pair exactly 1/N off design
    for rec in doc:
        assert rec["offset"] * rec["n_elements"] == pytest.approx(1.0, rel=1e-12)
    assert (outdir / "modes_dlvr_n5_sweep.svg").exists()


def test_modes_bad_sweep_spec(tmp_path):
    rc = cli.run(["modes", "--outdir", str(tmp_path), "--topology", "dlvr",
                  "--n", "5", "--lambda", "1.8e-6", "--vp", "3426",
                  "--sweep-n", "1:20:5"])
    assert rc == 2


def test_modes_bad_geometry(tmp_path):
    rc = cli.run(["modes", "--outdir", str(tmp_path), "--topology", "dlvr",
                  "--n", "1", "--lambda", "1.8e-6", "--vp", "3426"])
    assert rc == 2


# -------------------------------------------------------------------- design

def test_design_plan(tmp_path):
    tj = tmp_path / "targets.json"
    tj.write_text(json.dumps([3.0e9, 4.5e9, 6.1e9]))
    outdir = tmp_path / "o"
    rc = cli.run(["design", str(tj), "--outdir", str(outdir), "--vp", "5382"])
    assert rc == 0
    lines = (outdir / "targets_plan.csv").read_text().splitlines()
    assert lines[0] == "targets_Hz,wavelength_nm,topology,status,findings"
    assert lines[1] == "3000000000.0,1794,lvr,ok,"
    doc = json.loads((outdir / "targets_plan.json").read_text())
    assert doc["v_p"] == 5382.0
    assert len(doc["entries"]) == 3
    e = doc["entries"][0]
    assert set(e) == {"targets_hz", "wavelength_m", "topology", "n_elements",
                      "coverage", "findings", "error"}
    assert e["topology"] == "lvr"
    assert e["error"] is None


def test_design_partial_on_out_of_range_target(tmp_path):
    tj = tmp_path / "targets.json"
    tj.write_text(json.dumps({"targets_hz": [3.0e9, 15.4e9]}))
    outdir = tmp_path / "o"
    rc = cli.run(["design", str(tj), "--outdir", str(outdir), "--vp", "5382"])
    assert rc == 1
    doc = json.loads((outdir / "targets_plan.json").read_text())
    bad = doc["entries"][1]
    assert bad["topology"] is None
    assert "349" in bad["error"]


def test_design_fallback_velocity_from_survey(tmp_path):
    # no --vp: the planner calibrates from the bundled survey (median 5508)
    tj = tmp_path / "t.json"
    tj.write_text(json.dumps([4.0e9]))
    outdir = tmp_path / "o"
    rc = cli.run(["design", str(tj), "--outdir", str(outdir), "--mode", "S0"])
    assert rc == 0
    doc = json.loads((outdir / "t_plan.json").read_text())
    assert doc["v_p"] == 5508.0


def test_design_rejects_bad_targets(tmp_path):
    tj = tmp_path / "t.json"
    tj.write_text(json.dumps([]))
    assert cli.run(["design", str(tj), "--vp", "5382"]) == 2
    tj.write_text(json.dumps(["3e9"]))
    assert cli.run(["design", str(tj), "--vp", "5382"]) == 2
    tj.write_text("{broken")
    assert cli.run(["design", str(tj), "--vp", "5382"]) == 2


# ------------------------------------------------------------------- convert

def test_convert_formats_agree(tmp_path):
    src = tmp_path / "rowP.s2p"
    write_golden(src, label="P", fmt="RI", noise_db=None)
    outdir = tmp_path / "o"
    rc = cli.run(["convert", str(src), "--outdir", str(outdir), "--fmt", "MA"])
    assert rc == 0
    a = parse_touchstone(src.read_text())
    b = parse_touchstone((outdir / "rowP_ma.s2p").read_text())
    assert np.max(np.abs(a.matrices - b.matrices)) < 1e-9
    rc = cli.run(["convert", str(src), "--outdir", str(outdir), "--fmt", "DB",
                  "-o", "deci.s2p"])
    assert rc == 0
    c = parse_touchstone((outdir / "deci.s2p").read_text())
    assert np.max(np.abs(a.matrices - c.matrices)) < 1e-9


# --------------------------------------------------------------------- misc

def test_unknown_subcommand_exits_via_argparse():
    with pytest.raises(SystemExit) as exc:
        cli.run(["frobnicate"])
    assert exc.value.code == 2


def test_cli_is_deterministic(tmp_path):
    src = tmp_path / "rowL.s2p"
    write_golden(src)
    digests = []
    for sub in ("r1", "r2"):
        outdir = tmp_path / sub
        proc = subprocess.run(
            [sys.executable, "-m", "resokit", "fit", str(src),
             "--outdir", str(outdir), "--prefix", "dev", "--emit-candidates"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        blob = hashlib.sha256()
        for p in sorted(outdir.iterdir()):
            if p.name.endswith("_manifest.json"):
                continue  # manifest embeds the outdir path
            blob.update(p.name.encode())
            blob.update(p.read_bytes())
        digests.append(blob.hexdigest())
    assert digests[0] == digests[1]

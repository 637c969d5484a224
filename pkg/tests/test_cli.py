import hashlib
import json
import math
from importlib import resources

import pytest

from lgtwave.cli import main, strip_header
from lgtwave.model import BasisState, Group, LatticeSpec, satisfies_gauss


def _hashes(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_basis_matches_golden_bytes(capsys):
    golden = resources.files("lgtwave.data").joinpath("z2_n6.csv").read_text()
    assert main(["basis", "--no-header"]) == 0
    assert capsys.readouterr().out == golden
    assert main(["basis", "--group", "u1", "--epsilon", "1.0"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# tool: ")
    assert strip_header(out) == resources.files("lgtwave.data").joinpath("u1_n6_cutoff1.csv").read_text()


def test_small_basis_agrees_with_brute_force(capsys):
    assert main(["basis", "--n-sites", "2", "--no-header"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    spec = LatticeSpec(Group.Z2, 2)
    brute = [(o, l) for o in ((0, 1), (1, 0)) for l in ((1, 1), (1, -1), (-1, 1), (-1, -1))
             if satisfies_gauss(spec, BasisState(o, l))]
    # link qubit 0 encodes E = +1
    parsed = {((int(r[1]), int(r[3])), (1 - 2 * int(r[2]), 1 - 2 * int(r[4]))) for r in (x.split(",") for x in rows)}
    assert len(rows) == len(parsed) == 4
    assert parsed == set(brute)


def test_bad_spec_exits_nonzero(capsys):
    assert main(["basis", "--n-sites", "5"]) == 2
    assert "error" in capsys.readouterr().err


def test_sampling_needs_seed(tmp_path):
    with pytest.raises(SystemExit):
        main(["pipeline", "--out", str(tmp_path)])


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_sites = 2\nm_f = 0.5\nsigma = pi/6\nseed = 3\n")
    assert main(["basis", "--config", str(cfg), "--n-sites", "6"]) == 0
    out = capsys.readouterr().out
    conf = json.loads(next(l for l in out.splitlines() if l.startswith("# config:"))[len("# config: "):])
    assert conf["n_sites"] == 6 and conf["m_f"] == 0.5 and conf["seed"] == 3
    assert abs(conf["sigma"] - math.pi / 6) < 1e-15
    cfg.write_text("bogus = 1\n")
    with pytest.raises(SystemExit):
        main(["basis", "--config", str(cfg)])


def test_predicted_counts(capsys):
    assert main(["circuit", "--mode", "predict", "--no-header"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows == ["mode,n_qubits,cnot", "gs,12,36", "full,13,1176", "one_meson_truncated,13,312"]
    assert main(["circuit", "--mode", "predict", "--n-sites", "4"]) == 1


def test_spectrum_reports_classification(capsys):
    assert main(["spectrum"]) == 0
    out = capsys.readouterr().out
    assert '"mesonic"' in out
    assert "-5.3248" in out


def test_circuit_export(tmp_path):
    assert main(["circuit", "--mode", "gs", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "gs.json").read_text())
    assert meta["cnot_total"] == 36
    qasm = (tmp_path / "gs.qasm").read_text()
    assert qasm.startswith("OPENQASM 2.0;\n// tool: ")


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    argv = ["pipeline", "--seed", "7", "--out", str(out), "--n-resamples", "2000"]
    assert main(argv) == 0
    first = _hashes(out)
    assert main(argv) == 0
    return out, first, _hashes(out)


def test_pipeline_is_idempotent(pipeline_run):
    _, first, second = pipeline_run
    assert first == second
    assert {"ground_state.json", "ground_state.qasm", "ansatz_params.csv", "cmn.csv", "circuit.qasm",
            "circuit.json", "shots.csv", "probabilities.csv", "density.csv", "report.json"} <= set(first)


def test_pipeline_report(pipeline_run):
    out, _, _ = pipeline_run
    rep = json.loads((out / "report.json").read_text())
    assert rep["cnot"]["circuit"] == rep["cnot"]["predicted"] == 272 + 36
    assert rep["fidelity"]["trunc"] > 0.97
    assert rep["fidelity"]["ideal"] > rep["fidelity"]["trunc"]
    assert rep["shots"]["physical"] == 500 > rep["shots"]["ancilla1"]
    assert rep["header"]["seed"] == 7
    shots = (out / "shots.csv").read_text()
    assert shots.startswith("# ") and "shot_index,bitstring" in shots


def test_analyze_reads_pipeline_shots(pipeline_run, capsys):
    out, _, _ = pipeline_run
    assert main(["analyze", str(out / "shots.csv"), "--seed", "1", "--n-resamples", "500"]) == 0
    text = capsys.readouterr().out
    assert "label,probability,stderr" in text and "site,chi,stderr" in text


def test_small_sweep(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--m-f-grid", "1", "--epsilon-grid=-0.3,-2"]) == 0
    rows = strip_header((tmp_path / "heatmap.csv").read_text()).splitlines()
    assert rows[0] == "m_f,epsilon,k,fidelity,classification"
    assert len(rows) == 1 + 2 * 3
    assert all(float(r.split(",")[3]) > 0.95 for r in rows[1:])

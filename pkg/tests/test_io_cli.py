import json
import subprocess
import sys

import numpy as np
import pytest

from gqs import io as gio
from gqs.cli import main
from gqs.errors import SchemaError
from gqs.gstate import DeltaMixture, GridDensity, SampleEnsemble, density_matrix
from gqs.hybrid import HybridDecomposition
from gqs.thermo import BipartitePureState

V = gio.FORMAT_VERSION
Q2 = {
    "version": V,
    "kind": "delta",
    "atoms": [
        {"weight": 0.864, "point": [[0.657, 0], [0.418, 0.627]]},
        {"weight": 0.136, "coords": {"p": [0.432], "nu": [4.124]}},
    ],
}
H = {"matrix": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}
POVM = {"effects": [{"matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}, {"matrix": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}]}


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rho_of(out):
    return gio.matrix_from_json(json.loads(out)["rho"])


# --- state files -------------------------------------------------------------


def test_load_kinds():
    assert isinstance(gio.load_state(Q2), DeltaMixture)
    grid = {"version": V, "kind": "grid", "dim": 2, "bins_p": 8, "bins_phase": 8, "generator": {"name": "uniform"}}
    assert isinstance(gio.load_state(grid), GridDensity)
    samples = {"version": V, "kind": "samples", "dim": 3, "generator": {"name": "fs_uniform", "n": 10, "seed": 1}}
    assert isinstance(gio.load_state(samples), SampleEnsemble)
    hybrid = {"version": V, "kind": "hybrid", "box": {"x0": 0, "x1": 1, "y0": 0, "y1": 1, "shape": [4, 4]}}
    assert isinstance(gio.load_state(hybrid), HybridDecomposition)
    bip = {"version": V, "kind": "bipartite", "d_s": 2, "psi": [[0.5, 0], [0.5, 0], [0.5, 0], [0.5, 0]]}
    assert isinstance(gio.load_state(bip), BipartitePureState)


@pytest.mark.parametrize(
    "doc",
    [
        {"kind": "delta", "atoms": []},
        {"version": "gqs-0", "kind": "delta", "atoms": [{"weight": 1, "point": [[1, 0], [0, 0]]}]},
        {"version": V, "kind": "teapot"},
        {"version": V, "kind": "delta", "atoms": [{"weight": -1, "point": [[1, 0], [0, 0]]}]},
        {"version": V, "kind": "grid", "dim": 2, "bins_p": 4, "bins_phase": 4},
    ],
)
def test_schema_errors(doc):
    with pytest.raises(SchemaError):
        gio.load_state(doc)


def test_geometric_state_json_roundtrip():
    state = gio.load_state(Q2)
    back = gio.load_state(gio.geometric_state_to_json(state))
    np.testing.assert_allclose(density_matrix(back).matrix, density_matrix(state).matrix, atol=1e-15)


# --- commands ----------------------------------------------------------------


def test_rho_reference_file(capsys, files):
    code, out, err = run(capsys, "rho", files("q2.json", Q2))
    assert code == 0
    rho = rho_of(out)
    np.testing.assert_allclose(rho, [[0.45, 0.2 - 0.3j], [0.2 + 0.3j, 0.55]], atol=2e-3)
    manifest = json.loads(err.split("manifest: ", 1)[1])
    assert manifest["command"] == "rho" and manifest["seed"] == 0


def test_rho_basis_atom(capsys, files):
    doc = {"version": V, "kind": "delta", "atoms": [{"weight": 1, "point": [[1, 0], [0, 0]]}]}
    code, out, _ = run(capsys, "rho", files("a.json", doc))
    np.testing.assert_allclose(rho_of(out), np.diag([1, 0]), atol=1e-15)


def test_rho_canonical_file(capsys, files):
    doc = {"version": V, "kind": "canonical", "hamiltonian": H, "beta": 1, "grid": 256}
    code, out, _ = run(capsys, "rho", files("c.json", doc))
    assert code == 0
    np.testing.assert_allclose(rho_of(out), np.diag([0.58198, 0.41802]), atol=1e-3)


def test_povm_command(capsys, files):
    code, out, _ = run(capsys, "povm", files("q2.json", Q2), "--povm", files("p.json", POVM))
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["probabilities"], [0.45, 0.55], atol=2e-3)


def test_histogram_commands(capsys, files):
    code, out, _ = run(capsys, "histogram", files("q2.json", Q2), "--bins", "20")
    lines = out.splitlines()
    assert lines[0] == "p_lo,p_hi,nu_lo,nu_hi,mass"
    mass = np.array([float(l.split(",")[-1]) for l in lines[1:]]).reshape(20, 20)
    assert sorted(mass.sum(axis=1)[mass.sum(axis=1) > 0]) == pytest.approx([0.136, 0.864])

    q1 = {
        "version": V, "kind": "grid", "dim": 2, "bins_p": 128, "bins_phase": 128,
        "generator": {"name": "rho_gaussian", "rho": {"matrix": [[[0.45, 0], [0.2, -0.3]], [[0.2, 0.3], [0.55, 0]]]}},
    }
    _, out, _ = run(capsys, "histogram", files("q1.json", q1), "--bins", "20")
    mass = np.array([float(l.split(",")[-1]) for l in out.splitlines()[1:]]).reshape(20, 20)
    assert np.all(mass.sum(axis=1) > 0)

    uni = {"version": V, "kind": "samples", "dim": 2, "generator": {"name": "fs_uniform", "n": 20000, "seed": 3}}
    _, out, _ = run(capsys, "histogram", files("u.json", uni), "--bins", "10")
    mass = np.array([float(l.split(",")[-1]) for l in out.splitlines()[1:]])
    assert np.all(np.abs(mass - 0.01) < 0.003)


def test_canonical_command(capsys, files, tmp_path):
    out_path = tmp_path / "c.json"
    code, _, _ = run(capsys, "canonical", "--hamiltonian", files("h.json", H), "--beta", "1", "--output", str(out_path))
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report["population_gap"][1] == pytest.approx(0.149, abs=1e-3)
    assert (tmp_path / "c.json.manifest.json").exists()


def test_hybrid_commands(capsys, files):
    box = files("b.json", {"version": V, "kind": "hybrid", "box": {"x0": 0, "x1": 1, "y0": 0, "y1": 1, "shape": [32, 32]}})
    assert run(capsys, "hybrid", "decompose", box)[0] == 0
    _, out, _ = run(capsys, "hybrid", "reduce", box)
    np.testing.assert_allclose(rho_of(out), np.eye(2) / 2, atol=1e-3)
    _, out, _ = run(capsys, "hybrid", "pushforward", box, "--samples", "100", "--seed", "2")
    assert len(json.loads(out)["points"]) == 100
    _, out, _ = run(capsys, "hybrid", "bounds", "--n", "6", "--d", "2")
    assert json.loads(out)["m_prod"] == 3.0


def test_thermo_commands(capsys, files, tmp_path):
    bell = files("bell.json", {"psi": [[0.7071067811865476, 0], [0, 0], [0, 0], [0.7071067811865476, 0]], "d_s": 2})
    hist = tmp_path / "h.csv"
    code, out, _ = run(capsys, "thermo", "reduce", "--state", bell, "--histogram", str(hist))
    assert code == 0
    doc = json.loads(out)
    assert [e["weight"] for e in doc["ensemble"]["entries"]] == pytest.approx([0.5, 0.5])
    assert hist.read_text().startswith("p_lo,")
    _, out, _ = run(capsys, "thermo", "scaling", "--de", "2,16", "--seeds", "5")
    rows = json.loads(out)["rows"]
    assert [r["d_e"] for r in rows] == [2, 16]


def test_verify_commands(capsys, files):
    code, out, _ = run(capsys, "verify", "--list")
    assert code == 0 and "example.rho_00" in out
    code, out, _ = run(capsys, "verify", "--q1-bins", "128")
    assert code == 0
    bad = {"matrix": [[[0.46, 0], [0.2, -0.3]], [[0.2, 0.3], [0.54, 0]]]}
    code, out, _ = run(capsys, "verify", "--rho", files("bad.json", bad), "--q1-bins", "64")
    assert code == 1
    assert "FAIL example.rho_00" in out


# --- errors ------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv, code",
    [
        (["rho", "missing.json"], 2),
        (["nonsense"], 2),
        (["canonical", "--beta", "1"], 2),
        (["thermo", "scaling", "--de", "2,x"], 2),
        (["hybrid", "bounds", "--n", "0", "--d", "2"], 3),
    ],
)
def test_error_paths(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error:")


def test_invalid_state_and_povm(capsys, files):
    bad_norm = {"version": V, "kind": "bipartite", "psi": [[[1, 0], [1, 0]]]}
    assert run(capsys, "thermo", "reduce", "--state", files("b.json", bad_norm))[0] == 3
    povm = {"effects": [{"matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}, {"matrix": [[[0, 0], [0, 0]], [[0, 0], [0.9, 0]]]}]}
    code, _, err = run(capsys, "povm", files("q2.json", Q2), "--povm", files("p.json", povm))
    assert code == 3 and "identity" in err
    code, _, err = run(capsys, "rho", files("bad.json", {"version": V, "kind": "delta"}))
    assert code == 2 and err.startswith("error:")


def test_replay(capsys, files, tmp_path):
    a = tmp_path / "a.json"
    run(capsys, "thermo", "scaling", "--de", "2,8", "--seeds", "4", "--seed", "9", "--output", str(a))
    b = tmp_path / "b.json"
    assert run(capsys, "replay", str(a) + ".manifest.json", "--output", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    m = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert m["output_sha256"] == json.loads((tmp_path / "b.json.manifest.json").read_text())["output_sha256"]


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "gqs.cli", "hybrid", "bounds", "--n", "2", "--d", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["m_full"] == 1.0

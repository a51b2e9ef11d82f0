import json
import subprocess
import sys

import numpy as np
import pytest

from dsforge import cli, io_formats
from dsforge.errors import InternalError
from dsforge.meshio import MeshFile, voxel_mesh, write_mesh


@pytest.fixture(scope="module")
def meshes(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    out = {}
    for shape in ("solid-torus-in-box", "hopf-link-in-box", "sphere-in-box"):
        path = d / f"{shape}.msh"
        assert cli.main(["genmesh", "--shape", shape, "--refine", "1", "--out", str(path)]) == 0
        out[shape] = path
    return out


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_genmesh_report_and_tetgen(tmp_path, capsys):
    code, out, _ = run(["genmesh", "--shape", "trefoil-tube-in-box", "--refine", "1",
                        "--out", tmp_path / "k.node", "--report", "-"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["tetrahedra"] == 7986
    assert (tmp_path / "k.node").exists() and (tmp_path / "k.ele").exists()


def test_compute_verify_torus(meshes, tmp_path, capsys):
    g = tmp_path / "g.json"
    code, out, _ = run(["compute", "--mesh", meshes["solid-torus-in-box"], "--conductor-regions", "1",
                        "--verify", "--out", g], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["lanes"] == 2 and rep["betti1"] == 1
    assert all(rep["verification"].values())
    assert all(v >= 0 for v in rep["timings_ms"].values())
    doc = json.loads(g.read_text())
    assert [r["component"] for r in doc["lanes"]] == [0, 0]
    assert all(isinstance(c, int) for r in doc["lanes"] for pair in r["support"] for c in pair)


def test_missing_file_exit_code(tmp_path, capsys):
    code, _, err = run(["compute", "--mesh", tmp_path / "none.msh", "--conductor-regions", "1"], capsys)
    assert code == 1
    assert "cannot read mesh file" in err


def test_unknown_tag_exit_code(meshes, capsys):
    code, _, err = run(["compute", "--mesh", meshes["solid-torus-in-box"], "--conductor-regions", "9"], capsys)
    assert code == 1 and "not present" in err


def test_internal_error_exit_code(meshes, capsys, monkeypatch):
    def boom(*a, **k):
        raise InternalError("synthetic")
    monkeypatch.setattr(cli, "run_ds", boom)
    code, _, err = run(["compute", "--mesh", meshes["solid-torus-in-box"], "--conductor-regions", "1"], capsys)
    assert code == 3 and "internal error" in err


def test_true_basis_on_hopf(meshes, tmp_path, capsys):
    g = tmp_path / "hopf.json"
    code, out, _ = run(["compute", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1",
                        "--true-basis", "--out", g], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["verification"]["true_basis_unimodular"]
    doc = json.loads(g.read_text())
    assert doc["basis"]["rank"] == 2 and len(doc["basis"]["generators"]) == 2
    assert np.array(doc["basis"]["combination"]).shape == (2, 4)
    # the oracle accepts the file, including the basis section
    code, out, _ = run(["oracle", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1",
                        "--check", g], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and rep["basis_unimodular"]


def test_comma_separated_regions(meshes, capsys):
    code, out, _ = run(["compute", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1,2"], capsys)
    assert code == 0 and json.loads(out)["lanes"] == 0


def test_binary_round_trip(meshes, tmp_path, capsys):
    j, b = tmp_path / "g.json", tmp_path / "g.dsh"
    base = ["compute", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1"]
    assert run(base + ["--out", j], capsys)[0] == 0
    assert run(base + ["--out", b, "--binary"], capsys)[0] == 0
    assert b.read_bytes()[:4] == b"DSH1"
    assert io_formats.read_generators(b) == io_formats.read_generators(j)
    code, out, _ = run(["oracle", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1",
                        "--check", b], capsys)
    assert code == 0 and json.loads(out)["span"]["pass"]


def test_binary_rejects_trailing_bytes():
    with pytest.raises(ValueError):
        io_formats.decode_binary(io_formats.encode_binary([]) + b"x")


def test_determinism_across_runs_and_threads(meshes, tmp_path, capsys, monkeypatch):
    base = ["compute", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1"]
    outs = []
    for i, extra in enumerate([[], [], ["--threads", "1"], ["--threads", "4"]]):
        path = tmp_path / f"g{i}.json"
        assert run(base + extra + ["--out", path], capsys)[0] == 0
        outs.append(path.read_bytes())
    monkeypatch.setenv("DSFORGE_THREADS", "3")
    path = tmp_path / "env.json"
    assert run(base + ["--threads", "1", "--out", path], capsys)[0] == 0
    outs.append(path.read_bytes())
    assert all(o == outs[0] for o in outs)


def test_debug_surface(meshes, tmp_path, capsys):
    dbg = tmp_path / "dbg.json"
    code, _, _ = run(["compute", "--mesh", meshes["hopf-link-in-box"], "--conductor-regions", "1",
                      "--debug-surface", dbg], capsys)
    assert code == 0
    doc = json.loads(dbg.read_text())
    assert [c["genus"] for c in doc["components"]] == [1, 1]
    assert all(len(c["leftover"]) == 2 for c in doc["components"])


def test_oracle_cap_notice(meshes, capsys, caplog):
    code, out, _ = run(["compute", "--mesh", meshes["solid-torus-in-box"], "--conductor-regions", "1",
                          "--oracle", "--oracle-cap", "100"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert "span" not in rep["verification"] and "oracle" not in rep
    assert any("oracle disabled" in w for w in rep["warnings"])
    assert any("oracle disabled" in r.getMessage() for r in caplog.records)


def test_oracle_detects_incomplete_generators(meshes, tmp_path, capsys):
    g = tmp_path / "g.json"
    mesh = meshes["solid-torus-in-box"]
    assert run(["compute", "--mesh", mesh, "--conductor-regions", "1", "--out", g], capsys)[0] == 0
    code, out, _ = run(["oracle", "--mesh", mesh, "--conductor-regions", "1", "--check", g], capsys)
    assert code == 0
    doc = json.loads(g.read_text())
    rep = json.loads(out)
    keep = [j for j in range(2) if not any(row[j] for row in rep["span"]["pairing"])]
    doc["lanes"] = [doc["lanes"][j] for j in keep]  # only the trivial lane is left
    g.write_text(json.dumps(doc))
    code, out, _ = run(["oracle", "--mesh", mesh, "--conductor-regions", "1", "--check", g], capsys)
    assert code == 2 and not json.loads(out)["pass"]


def test_non_ball_domain_warning(tmp_path, capsys):
    tags = np.full((5, 5, 5), 2)
    tags[1, 1, 1] = 1
    m = voxel_mesh(tags)
    hole = np.repeat(np.arange(125).reshape(5, 5, 5).transpose(2, 1, 0).ravel() == 62, 6)  # voxel (2,2,2)
    m = MeshFile(m.coord_num, m.coord_den, m.tets[~hole], m.regions[~hole])
    path = tmp_path / "cavity.msh"
    write_mesh(m, path)
    code, out, _ = run(["compute", "--mesh", path, "--conductor-regions", "1", "--verify"], capsys)
    rep = json.loads(out)
    assert rep["oracle"]["betti_K"][2] == 1
    assert any("not a topological ball" in w for w in rep["warnings"])


def test_bench(capsys):
    code, out, _ = run(["bench", "--shape", "solid-torus-in-box", "--refine-min", "1", "--refine-max", "1",
                        "--repeats", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and "exponent" not in rep and len(rep["runs"]) == 1
    code, out, _ = run(["bench", "--refine-min", "1", "--refine-max", "2", "--repeats", "2"], capsys)
    rep = json.loads(out)
    assert code == 0 and "exponent" in rep
    cells = [r["cells"] for r in rep["runs"]]
    assert cells == sorted(cells)
    code, out, _ = run(["bench", "--refine-min", "1", "--refine-max", "2", "--repeats", "1", "--ci",
                        "--max-exponent", "-5"], capsys)
    assert code == 2 and json.loads(out)["pass"] is False


def test_console_script_entry_point(meshes):
    proc = subprocess.run([sys.executable, "-m", "dsforge.cli", "compute", "--mesh", str(meshes["sphere-in-box"]),
                           "--conductor-regions", "1", "--verify"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["lanes"] == 0

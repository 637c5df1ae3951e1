import json
import subprocess
import sys

import numpy as np
import pytest

from flexlat import formats
from flexlat.builders import miura_ori, star_subdivide, star_subdivide_realization, triangulated_plane
from flexlat.cli import main
from flexlat.realization import all_edge_lengths

from conftest import A, B, DIAG12, MIURA, lattice_cloud


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def miura_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("miura")
    assert run("build", "miura", "--out", d) == 0
    assert run("trace", d / "miura.json", "--steps", 50, "--out", d / "trace") == 0
    return d


def test_build_examples(tmp_path):
    assert run("build", "plane", "--out", tmp_path) == 0
    assert run("build", "grid", "--sublattice", "2,0,0,2", "--fold-angle", 0.5,
               "--fold-family", "b", "--out", tmp_path) == 0
    assert {p.name for p in tmp_path.iterdir()} == {"plane.json", "grid.json", "manifest_build.json"}
    c, r, meta, _ = formats.read_surface(tmp_path / "grid.json")
    assert c.n_orbits == 4 and meta["fold"]["family"] == "b"
    assert meta["flat_lengths_max_deviation"] < 1e-9
    assert run("validate", tmp_path / "grid.json") == 0


def test_build_rejects_bad_input(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("build", "torus", "--out", tmp_path)
    assert exc.value.code == 2
    assert run("build", "miura", "--alpha", 2.0, "--out", tmp_path) == 2
    # odd number of fold lines per period
    assert run("build", "plane", "--fold-angle", 0.3, "--out", tmp_path) == 2


def test_trace_miura(miura_run):
    out = miura_run / "trace"
    m = load(out / "manifest_trace.json")
    assert m["results"]["flex_dimension"] == 1
    assert m["outputs"] == ["branch0_bwd.csv", "branch0_fwd.csv"]
    assert m["inputs"][0]["sha256"] == formats.sha256_file(miura_run / "miura.json")
    for name in m["outputs"]:
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "t,g11,g12,g22,residual_norm"
        assert len(lines) == 52
        t, g = formats.read_path_csv(out / name)
        assert np.abs(g[:, 1]).max() < 1e-9
        assert np.all(np.abs(np.array([MIURA.hyperbola(x, z) for x, _, z in g])) < 1e-8)


def test_trace_rigid_plane(tmp_path):
    assert run("build", "plane", "--out", tmp_path) == 0
    assert run("trace", tmp_path / "plane.json", "--out", tmp_path) == 0
    assert (tmp_path / "branch0_fwd.csv").read_text() == "t,g11,g12,g22,residual_norm\n"
    m = load(tmp_path / "manifest_trace.json")
    assert m["results"]["flex_dimension"] == 0
    assert m["results"]["branches"]["branch0_fwd.csv"]["stop_reason"] == "rigid"


def test_trace_input_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert run("trace", tmp_path / "bad.json", "--out", tmp_path) == 2
    assert run("trace", tmp_path / "missing.json", "--out", tmp_path) == 2
    c, r = miura_ori(MIURA)
    formats.write_surface(tmp_path / "m.json", c, r)
    assert run("trace", tmp_path / "m.json", "--seed-branch", "7", "--out", tmp_path) == 2
    assert run("trace", tmp_path / "m.json", "--step-size", -1, "--out", tmp_path) == 2


def test_trace_unrealizable_lengths(tmp_path):
    c, r = triangulated_plane(A, B)
    L = all_edge_lengths(c, r)
    L = {e: (10.0 if e.shift == (1, -1) else v) for e, v in L.items()}
    formats.write_surface(tmp_path / "s.json", c, r, lengths=L)
    assert run("trace", tmp_path / "s.json", "--out", tmp_path) == 3


def test_analyze_miura(miura_run):
    out = miura_run / "an"
    csvs = sorted((miura_run / "trace").glob("*.csv"))
    assert run("analyze", *csvs, "--out", out) == 0
    rep = load(out / "dimension_report.json")
    assert len(rep["clusters"]) == 1
    assert rep["clusters"][0]["local_dimension"] == 1
    assert rep["clusters"][0]["relations"] == 2
    assert rep["max_relation_residual"] < 1e-6
    rels = load(out / "relations.json")
    assert rels["clusters"][0]["monomial_order"] == "gradedlex-XYZ"
    assert (out / "gram_scatter.svg").read_text().startswith("<svg")
    assert sorted(load(out / "manifest_analyze.json")["outputs"]) == [
        "dimension_report.json", "gram_scatter.svg", "relations.json"]


def test_analyze_alarm_on_surface_cloud(tmp_path):
    pts = lattice_cloud()
    rows = ["t,g11,g12,g22,residual_norm"]
    rows += [",".join(formats.fmt_float(x) for x in (i, *p, 0.0)) for i, p in enumerate(pts)]
    (tmp_path / "cloud.csv").write_text("\n".join(rows) + "\n")
    assert run("analyze", tmp_path / "cloud.csv", "--radius", 0.08, "--out", tmp_path) == 4
    assert load(tmp_path / "dimension_report.json")["alarm"] is True


def test_analyze_input_errors(tmp_path):
    assert run("analyze", "--out", tmp_path) == 2
    (tmp_path / "empty.csv").write_text("t,g11,g12,g22,residual_norm\n")
    assert run("analyze", tmp_path / "empty.csv", "--out", tmp_path) == 2
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    assert run("analyze", tmp_path / "junk.csv", "--out", tmp_path) == 2


def test_reduce_folded_plane(tmp_path):
    assert run("build", "plane", "--sublattice", "1,0,0,2", "--fold-angle", 0.4,
               "--out", tmp_path) == 0
    assert run("reduce", tmp_path / "plane.json", "--out", tmp_path) == 0
    res = load(tmp_path / "reduction.json")
    assert res["base_case"]["q"] == 2
    ip = res["inner_products"]
    assert ip["lam_lam"] == pytest.approx(ip["oracle_lam_lam"], abs=1e-9)
    assert ip["lam_mu"] == pytest.approx(ip["oracle_lam_mu"], abs=1e-9)


def test_reduce_collapses_subdivision(tmp_path):
    c, r = triangulated_plane(A, B, DIAG12)
    t = sorted(c.triangles)[0]
    formats.write_surface(tmp_path / "s.json", star_subdivide(c, t),
                          star_subdivide_realization(r, t, lift=0.1))
    assert run("reduce", tmp_path / "s.json", "--out", tmp_path) == 0
    moves = load(tmp_path / "reduction.json")["trace"]["moves"]
    assert any(m["move"] == "collapse" for m in moves)


def test_reduce_invalid_complex(tmp_path):
    c, r = triangulated_plane(A, B)
    d = formats.surface_to_dict(c, r)
    d["complex"]["triangles"] = d["complex"]["triangles"][:1]
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert run("reduce", tmp_path / "bad.json", "--out", tmp_path) == 2
    assert run("validate", tmp_path / "bad.json") == 2


def test_outputs_are_byte_identical_across_runs(tmp_path, monkeypatch):
    def everything(d, threads):
        monkeypatch.setenv("FLEXLAT_THREADS", threads)
        assert run("build", "miura", "--out", d) == 0
        assert run("trace", d / "miura.json", "--steps", 20, "--coords", "--out", d) == 0
        assert run("analyze", d / "branch0_fwd.csv", d / "branch0_bwd.csv", "--out", d) == 0
        return {p.name: p.read_bytes() for p in d.iterdir()}

    first = everything(tmp_path / "one", "4")
    second = everything(tmp_path / "two", "1")
    # manifests record input paths, which differ between the two directories
    strip = {k: v for k, v in first.items() if not k.startswith("manifest")}
    assert strip == {k: v for k, v in second.items() if not k.startswith("manifest")}
    for k in first:
        if k.startswith("manifest"):
            a, b = json.loads(first[k]), json.loads(second[k])
            for m in (a, b):
                for i in m["inputs"]:
                    i.pop("path")
            assert a == b


def test_module_entry_point(tmp_path):
    done = subprocess.run([sys.executable, "-m", "flexlat", "build", "plane", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert done.returncode == 0
    assert (tmp_path / "plane.json").exists()

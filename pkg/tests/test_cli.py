import json

import numpy as np
import pytest

from paretoc.cli import main
from paretoc.complex_io import (
    complex_from_dict,
    complex_to_dict,
    dumps,
    load_complex,
    load_mesh,
    save_complex,
    save_mesh,
)
from paretoc.continuation import analyze
from paretoc.problems import registry_get
from paretoc.tessellation import kuhn_tessellation


@pytest.fixture(scope="module")
def triv_complex():
    p = registry_get("triv")
    return analyze(p, kuhn_tessellation(p.domain_box, [15, 15]), order=2)


# ---------------------------------------------------------------------------
# complex file round trips
# ---------------------------------------------------------------------------


def test_roundtrip_exact(triv_complex, tmp_path):
    path = tmp_path / "c.json"
    save_complex(path, triv_complex)
    loaded = load_complex(path)
    assert loaded.n == triv_complex.n and loaded.m == triv_complex.m
    assert np.array_equal(loaded.positions, triv_complex.positions)
    assert np.array_equal(loaded.u_values, triv_complex.u_values)
    assert [(s[0], s[1]) for s in loaded.simplices] == [
        (s[0], s[1]) for s in triv_complex.simplices
    ]
    assert loaded.markers == triv_complex.markers
    # serialize(parse(serialize(c))) is byte-identical
    first = dumps(complex_to_dict(triv_complex))
    second = dumps(complex_to_dict(complex_from_dict(json.loads(first))))
    assert first == second


def test_lambda_sigma_roundtrip(triv_complex, tmp_path):
    path = tmp_path / "c.json"
    save_complex(path, triv_complex)
    loaded = load_complex(path)
    nan_a = np.isnan(triv_complex.lam)
    nan_b = np.isnan(loaded.lam)
    assert np.array_equal(nan_a, nan_b)
    assert np.array_equal(triv_complex.lam[~nan_a], loaded.lam[~nan_b])


def test_mesh_roundtrip(tmp_path):
    t = kuhn_tessellation([[0.0, 1.0], [0.0, 1.0]], [3, 3])
    path = tmp_path / "mesh.json"
    save_mesh(path, t.nodes.points, t.cells)
    pts, cells, d, emb = load_mesh(path)
    assert np.array_equal(pts, t.nodes.points)
    assert [tuple(c) for c in cells] == list(t.cells)
    assert (d, emb) == (2, 2)


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------


def test_cli_run_and_distance(tmp_path, capsys):
    out = tmp_path / "triv.json"
    assert main(["run", "--problem", "triv", "--grid", "15x15", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "stable" in text and "markers" in text
    assert main(["distance", str(out), str(out)]) == 0
    line = capsys.readouterr().out
    assert "hausdorff=" in line
    h = float(line.split()[0].split("=")[1])
    assert h < 1e-12


def test_cli_byte_identical_reruns(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    args = ["run", "--problem", "triv", "--grid", "random:60:seed=5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_run_constrained(tmp_path, capsys):
    out = tmp_path / "sphere.json"
    assert main(["run", "--problem", "sphere_proj", "--subdiv", "0", "--out", str(out)]) == 0
    cx = load_complex(out)
    assert len(cx.components()) == 1


def test_cli_iterate_history(tmp_path):
    outdir = tmp_path / "iters"
    rc = main([
        "iterate", "--problem", "triv", "--grid", "13x12",
        "--scheme", "polyline", "--iterations", "2", "--out-dir", str(outdir),
    ])
    assert rc == 0
    hist = (outdir / "history.csv").read_text().strip().splitlines()
    assert hist[0] == "iteration,nodes,max_minor,mean_minor,hausdorff_to_ref"
    assert len(hist) == 3
    assert (outdir / "complex_iter_00.json").exists()
    assert (outdir / "complex_iter_02.json").exists()


def test_cli_iterate_zero_iterations(tmp_path):
    outdir = tmp_path / "it0"
    rc = main([
        "iterate", "--problem", "triv", "--grid", "13x12",
        "--scheme", "polyline", "--iterations", "0", "--out-dir", str(outdir),
    ])
    assert rc == 0
    assert (outdir / "complex_iter_00.json").exists()


def test_cli_plot_data(tmp_path):
    out = tmp_path / "triv.json"
    main(["run", "--problem", "triv", "--grid", "15x15", "--out", str(out)])
    plots = tmp_path / "plots"
    assert main(["plot-data", "--file", str(out), "--space", "output",
                 "--out-dir", str(plots)]) == 0
    stable = plots / "plot_output_critical_stable.csv"
    assert stable.exists()
    header = stable.read_text().splitlines()[0]
    assert header == "component_id,vertex_index,x0,x1,u0,u1,stratum"
    assert (plots / "markers.csv").exists()


def test_cli_plot_data_stable_only(tmp_path):
    out = tmp_path / "triv.json"
    main(["run", "--problem", "triv", "--grid", "15x15", "--out", str(out)])
    plots = tmp_path / "plots2"
    assert main(["plot-data", "--file", str(out), "--out-dir", str(plots),
                 "--stable-only"]) == 0
    names = sorted(f.name for f in plots.iterdir())
    assert names == ["markers.csv", "plot_input_critical_stable.csv"]


def test_cli_exit_codes(capsys, tmp_path):
    assert main(["run", "--problem", "unknown_problem"]) == 2
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    assert main(["run"]) == 1  # missing --problem
    assert main(["check-derivatives", "--problem", "sms"]) == 0
    assert main(["list-problems"]) == 0
    capsys.readouterr()


def test_cli_grid_specs(tmp_path):
    assert main(["run", "--problem", "triv", "--grid", "h:0.5"]) == 0
    assert main(["run", "--problem", "triv", "--grid", "9x9x9"]) == 2  # wrong axes


def test_cli_manifold_mesh_input(tmp_path):
    from paretoc.constrained import icosphere

    mesh = icosphere(1)
    mpath = tmp_path / "sphere_mesh.json"
    save_mesh(mpath, mesh.points, mesh.cells, manifold_dim=2)
    out = tmp_path / "out.json"
    rc = main(["run", "--problem", "sphere_proj",
               "--manifold-mesh", str(mpath), "--out", str(out)])
    assert rc == 0
    cx = load_complex(out)
    assert not cx.is_empty()


def test_cli_plot_data_empty_complex(tmp_path, capsys):
    from paretoc.continuation import ParetoComplex

    empty = ParetoComplex(
        n=2, m=2, positions=np.zeros((0, 2)), u_values=np.zeros((0, 2)),
        lam=np.zeros((0, 2)), sigma=None, keys=[], simplices=[], markers=[],
    )
    path = tmp_path / "empty.json"
    save_complex(path, empty)
    plots = tmp_path / "plots"
    assert main(["plot-data", "--file", str(path), "--out-dir", str(plots)]) == 0
    err = capsys.readouterr().err
    assert "empty complex" in err
    assert (plots / "markers.csv").exists()

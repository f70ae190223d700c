import json

import pytest

from gstkit import io
from gstkit.cli import main, run_command


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["design", "--max-L", "4", "--out", str(d / "design")]) == 0
    assert main(["simulate", "--catalog", str(d / "design" / "catalog.txt"), "--depolarizing", "1e-3",
                 "--shots", "50", "--seed", "7", "--out", str(d / "sim1" / "data.txt")]) == 0
    return d


def test_design_outputs(workdir):
    names = {p.name for p in (workdir / "design").iterdir()}
    assert {"catalog.txt", "germs.json", "target.json", "manifest.json"} <= names
    seqs, design = io.read_catalog_file(workdir / "design" / "catalog.txt")
    assert design[1] == (1, 2, 4)
    assert all(s.provenance is not None for s in seqs)


def test_simulate_deterministic(workdir):
    out2 = workdir / "sim2" / "data.txt"
    assert main(["simulate", "--catalog", str(workdir / "design" / "catalog.txt"), "--depolarizing", "1e-3",
                 "--shots", "50", "--seed", "7", "--out", str(out2)]) == 0
    assert (workdir / "sim1" / "data.txt").read_bytes() == out2.read_bytes()
    m = json.loads((workdir / "sim1" / "manifest.json").read_text())
    assert m["command"] == "simulate" and m["seed"] == 7


def test_simulate_from_gateset_file(workdir):
    out = workdir / "sim3"
    assert main(["simulate", "--gateset", str(workdir / "design" / "target.json"), "--catalog",
                 str(workdir / "design" / "catalog.txt"), "--shots", "10", "--out", str(out) + "/"]) == 0
    ds = io.read_dataset(out / "dataset.txt")
    assert ds.shots[0] == 10


def test_fit_and_report(workdir):
    est = workdir / "est"
    cat = str(workdir / "design" / "catalog.txt")
    assert main(["fit", "--dataset", str(workdir / "sim1" / "data.txt"), "--catalog", cat,
                 "--target", str(workdir / "design" / "target.json"), "--max-L", "4", "--out", str(est)]) == 0
    assert (est / "final_mle.json").exists() and (est / "manifest.json").exists()
    rep = workdir / "report"
    assert main(["report", "--bundle", str(est), "--dataset", str(workdir / "sim1" / "data.txt"), "--catalog", cat,
                 "--max-L", "4", "--rb", "--sequences", "5", "--shots", "20", "--out", str(rep)]) == 0
    names = {p.name for p in rep.iterdir()}
    expected = {"report.csv", "errorbars.csv", "violation_grid.csv", "violation_grid.svg", "violation_summary.csv",
                "diamond_vs_L.svg", "rb_data.csv", "rb_fit.json", "rb_decay.svg", "manifest.json"}
    assert expected <= names
    rows = io.read_csv(rep / "report.csv")
    assert [r["gate"] for r in rows] == ["Gi", "Gx", "Gy"]
    assert all(r["verdict_6.7e-4"] in ("pass", "fail", "indeterminate") for r in rows)
    assert (rep / "violation_grid.svg").read_text().lstrip().startswith("<?xml")


def test_rb_composite(workdir):
    out = workdir / "rb"
    assert main(["rb", "--composite-theta", "1e-2", "--sequences", "3", "--shots", "20", "--out", str(out)]) == 0
    fit = json.loads((out / "rb_fit.json").read_text())
    assert set(fit) == {"gates", "cliffords"}


def test_germsearch(workdir):
    out = workdir / "germs"
    assert main(["germsearch", "--max-germ-length", "3", "--out", str(out) + "/"]) == 0
    germs = io.read_sequence_list(out / "germs.json")
    assert 1 <= len(germs) <= 11


def test_exit_code_input_error(workdir, capsys):
    code = main(["fit", "--dataset", str(workdir / "missing.txt"), "--out", str(workdir / "x")])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error [") and "missing.txt" in err


def test_exit_code_bad_arguments():
    assert main(["nonsense"]) == 2
    assert main(["design"]) == 2


def test_exit_code_numerical(workdir, capsys):
    # Data without LGST sequences parses but the pipeline fails and leaves a marker.
    (workdir / "bad.txt").write_text("# gst-dataset v1\nGxGxGx 10 5\nGyGyGy 10 5\nGxGyGx 10 5\n")
    code = main(["fit", "--dataset", str(workdir / "bad.txt"), "--max-L", "1", "--out", str(workdir / "bad_est")])
    assert code == 3
    assert (workdir / "bad_est" / "FAILED").exists()
    assert "LGST" in capsys.readouterr().err


def test_parse_error_exit(workdir, capsys):
    (workdir / "parse.txt").write_text("# gst-dataset v1\nGx(Gy 10 5\n")
    assert main(["fit", "--dataset", str(workdir / "parse.txt"), "--out", str(workdir / "p")]) == 2
    assert "position" in capsys.readouterr().err


def test_run_command_alias(workdir):
    assert run_command(["design", "--max-L", "1", "--out", str(workdir / "d1")]) == 0

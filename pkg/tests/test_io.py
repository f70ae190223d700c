import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import near_target
from gstkit import io
from gstkit.design import build_catalog, default_fiducials, default_germs
from gstkit.errors import InputError, ParseError
from gstkit.estimation import FitConfig, run_pipeline
from gstkit.simulate import exact_dataset, simulate_dataset


def test_gateset_round_trip(tmp_path, rng):
    gs = near_target(rng)
    m = np.eye(4)
    m[1:] += 0.01 * rng.normal(size=(3, 4))
    io.write_gateset(tmp_path / "g.json", gs, m)
    back = io.read_gateset(tmp_path / "g.json")
    assert back.allclose(gs, atol=0)
    assert np.array_equal(io.read_gauge(tmp_path / "g.json"), m)
    assert json.loads((tmp_path / "g.json").read_text())["basis"] == "pp-normalized"


def test_gateset_schema_errors(tmp_path, target):
    d = io.gateset_to_dict(target)
    d["basis"] = "gell-mann"
    (tmp_path / "bad.json").write_text(json.dumps({k: np.asarray(v).tolist() if k != "gates" else {} for k, v in d.items()}))
    with pytest.raises(InputError, match="basis"):
        io.read_gateset(tmp_path / "bad.json")
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(InputError, match="valid JSON"):
        io.read_gateset(tmp_path / "junk.json")
    with pytest.raises(InputError, match="no such file"):
        io.read_gateset(tmp_path / "missing.json")


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trip(x):
    assert float(io.fmt_float(x)) == x


def test_non_finite_rejected():
    with pytest.raises(InputError):
        io.fmt_float(float("nan"))


def test_catalog_round_trip_with_provenance(tmp_path):
    fid, germs, sch = default_fiducials(), default_germs(), (1, 2, 4, 8)
    cat = build_catalog(fid, germs, sch)
    io.write_catalog(tmp_path / "c.txt", cat, germs, sch, fid)
    seqs, design = io.read_catalog_file(tmp_path / "c.txt")
    assert seqs == cat.sequences
    assert [s.provenance for s in seqs] == [s.provenance for s in cat.sequences]
    assert design[1] == sch and list(design[0]) == list(germs)
    assert (tmp_path / "c.txt").read_text().splitlines()[0] == "# gst-catalog v1"


def test_catalog_without_header(tmp_path):
    cat = build_catalog(schedule=(1, 2))
    io.write_catalog(tmp_path / "c.txt", cat.sequences[:10])
    seqs, design = io.read_catalog_file(tmp_path / "c.txt")
    assert design is None and seqs == cat.sequences[:10]


def test_catalog_parse_error_position(tmp_path):
    (tmp_path / "c.txt").write_text("# gst-catalog v1\nGxGy\nGx(Gy\n")
    with pytest.raises(ParseError, match="c.txt:3"):
        io.read_catalog(tmp_path / "c.txt")


def test_dataset_round_trip(tmp_path, rng):
    gs = near_target(rng)
    cat = build_catalog(schedule=(1, 2, 4))
    for ds in (simulate_dataset(gs, cat.sequences, 50, seed=1), exact_dataset(gs, cat.sequences, 50)):
        io.write_dataset(tmp_path / "d.txt", ds)
        back = io.read_dataset(tmp_path / "d.txt", cat.sequences)
        assert back.equals(ds)
        assert all(b.provenance == s.provenance for b, s in zip(back.sequences, cat.sequences))
    lines = (tmp_path / "d.txt").read_text().splitlines()
    assert lines[0] == "# gst-dataset v1"
    assert lines[1].split()[0] == "{}"


def test_dataset_format_errors(tmp_path):
    (tmp_path / "a.txt").write_text("GxGy 10 3\n")
    with pytest.raises(InputError, match="gst-dataset"):
        io.read_dataset(tmp_path / "a.txt")
    (tmp_path / "b.txt").write_text("# gst-dataset v1\nGxGy 10\n")
    with pytest.raises(InputError, match="b.txt:2"):
        io.read_dataset(tmp_path / "b.txt")
    (tmp_path / "c.txt").write_text("# gst-dataset v1\nGxGy 10 eleven\n")
    with pytest.raises(InputError, match="bad number"):
        io.read_dataset(tmp_path / "c.txt")
    (tmp_path / "d.txt").write_text("# gst-dataset v1\nGxGy 10 11\n")
    with pytest.raises(InputError, match=r"\[0, N\]"):
        io.read_dataset(tmp_path / "d.txt")


def test_sequence_list_round_trip(tmp_path):
    germs = list(default_germs())
    io.write_sequence_list(tmp_path / "g.json", germs)
    assert io.read_sequence_list(tmp_path / "g.json") == germs


def test_config_hash_stable():
    a = io.config_hash({"b": 1, "a": [1, 2.5]})
    b = io.config_hash({"a": [1, 2.5], "b": 1})
    assert a == b and len(a) == 64
    assert a != io.config_hash({"a": [1, 2.5], "b": 2})


def test_csv_round_trip(tmp_path):
    rows = [("Gx", 1.0000000000000002e-4, 3), ("Gy", 0.1, 4)]
    io.write_csv(tmp_path / "t.csv", ("gate", "value", "n"), rows)
    back = io.read_csv(tmp_path / "t.csv")
    assert [float(r["value"]) for r in back] == [1.0000000000000002e-4, 0.1]
    assert back[0]["gate"] == "Gx" and back[1]["n"] == "4"


def test_manifest_fields(tmp_path):
    (tmp_path / "in.txt").write_text("x")
    io.write_manifest(tmp_path, "fit", {"dataset": tmp_path / "in.txt", "target": None}, {"max_L": 8}, 3)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["command"] == "fit" and m["seed"] == 3
    assert m["config_hash"] == io.config_hash({"max_L": 8})
    assert set(m["inputs"]) == {"dataset"}
    assert m["tool_version"]


def test_bundle_round_trip(tmp_path, target):
    truth = near_target(np.random.default_rng(2))
    cfg = FitConfig(max_length=4)
    cat = build_catalog(schedule=cfg.schedule)
    b = run_pipeline(simulate_dataset(truth, cat.sequences, 50, seed=1), target, cfg=cfg, catalog=cat)
    io.write_bundle(tmp_path / "est", b)
    names = {p.name for p in (tmp_path / "est").iterdir()}
    assert {"iteration_1.json", "iteration_2.json", "iteration_4.json", "final_mle.json", "trace.csv"} <= names
    back = io.read_bundle(tmp_path / "est")
    assert back["final"].allclose(b.final, atol=0)
    assert np.array_equal(back["gauge"], b.gauge)
    assert all(back["iterations"][L].allclose(g, atol=0) for L, g in b.iterations.items())
    assert set(back["trace"][0]) == {"stage", "iteration", "objective", "gradient_norm"}
    assert len(back["trace"]) == sum(len(s.lm.trace) for s in b.stages)
    assert "FAILED" not in names

"""Readers and writers for gate sets, catalogs, datasets, bundles and reports.

Every writer round-trips with its reader exactly.  Floats are written with
17 significant digits, which is enough to restore an IEEE double bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .dataset import DataSet
from .design import FiducialSet, SequenceCatalog, assign_provenance, build_catalog
from .errors import InputError, ParseError
from .gateset import GateSet
from .sequences import GateSequence, format_sequence, parse_sequence

DATASET_HEADER = "# gst-dataset v1"
CATALOG_HEADER = "# gst-catalog v1"
BASIS_NAME = "pp-normalized"


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"cannot serialise non-finite value {x}")
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with fixed 17-digit floats and sorted-free (insertion) key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"no such file {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


# -- gate sets ------------------------------------------------------------------


def gateset_to_dict(gs: GateSet, gauge: np.ndarray | None = None) -> dict:
    d = {
        "basis": BASIS_NAME,
        "rho": gs.rho,
        "effect": gs.effect,
        "gates": {k: v for k, v in gs.gates.items()},
    }
    if gauge is not None:
        d["gauge"] = np.asarray(gauge)
    return d


def gateset_from_dict(d: dict) -> GateSet:
    if not isinstance(d, dict) or d.get("basis") != BASIS_NAME:
        raise InputError(f"gate set must declare basis {BASIS_NAME!r}")
    try:
        rho = np.array(d["rho"], dtype=float)
        eff = np.array(d["effect"], dtype=float)
        gates = {str(k): np.array(v, dtype=float) for k, v in d["gates"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed gate set: {exc}") from exc
    if rho.shape != (4,) or eff.shape != (4,) or any(g.shape != (4, 4) for g in gates.values()):
        raise InputError("gate set arrays have the wrong shape")
    return GateSet(rho, eff, gates)


def write_gateset(path, gs: GateSet, gauge: np.ndarray | None = None) -> Path:
    return _write(path, dumps(gateset_to_dict(gs, gauge)) + "\n")


def read_gateset(path) -> GateSet:
    return gateset_from_dict(_read_json(path))


def read_gauge(path) -> np.ndarray | None:
    d = _read_json(path)
    return None if "gauge" not in d else np.array(d["gauge"], dtype=float)


# -- sequence lists -------------------------------------------------------------


def write_sequence_list(path, seqs: Iterable[GateSequence]) -> Path:
    return _write(path, dumps([format_sequence(s) for s in seqs]) + "\n")


def read_sequence_list(path) -> list[GateSequence]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise InputError(f"{path} must hold a JSON list of sequence strings")
    return [parse_sequence(str(t)) for t in data]


def write_catalog(path, catalog: SequenceCatalog | Sequence[GateSequence], germs=None, schedule=None, fiducials: FiducialSet | None = None) -> Path:
    """One sequence per line.  When the design is known it goes in header comments so provenance can be rebuilt."""
    seqs = catalog.sequences if isinstance(catalog, SequenceCatalog) else list(catalog)
    lines = [CATALOG_HEADER]
    if germs is not None and schedule is not None and fiducials is not None:
        lines.append("# germs: " + " ".join(format_sequence(g) for g in germs))
        lines.append("# schedule: " + " ".join(str(int(L)) for L in schedule))
        lines.append("# prep: " + " ".join(format_sequence(f) for f in fiducials.prep))
        lines.append("# meas: " + " ".join(format_sequence(f) for f in fiducials.meas))
    lines += [format_sequence(s) for s in seqs]
    return _write(path, "\n".join(lines) + "\n")


def _design_from_header(header: dict):
    if not {"germs", "schedule", "prep", "meas"} <= header.keys():
        return None
    germs = [parse_sequence(t) for t in header["germs"].split()]
    schedule = tuple(int(t) for t in header["schedule"].split())
    fid = FiducialSet(tuple(parse_sequence(t) for t in header["prep"].split()), tuple(parse_sequence(t) for t in header["meas"].split()))
    return germs, schedule, fid


def read_catalog_file(path) -> tuple[list[GateSequence], tuple | None]:
    """Sequences (with provenance when the header carries the design) and the design triple, if any."""
    header, seqs = {}, []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        raise InputError(f"no such file {path}") from exc
    for ln, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if sep:
                header[key.strip()] = val.strip()
            continue
        try:
            seqs.append(parse_sequence(line))
        except ParseError as exc:
            raise ParseError(f"{path}:{ln}: {exc}", exc.text, exc.position) from exc
    design = _design_from_header(header)
    if design is not None:
        germs, schedule, fid = design
        labels = sorted({lbl for s in seqs for lbl in s.labels} | {"Gi", "Gx", "Gy"})
        cat = build_catalog(fid, germs, schedule, tuple(labels))
        seqs = assign_provenance(seqs, cat)
    return seqs, design


def read_catalog(path) -> list[GateSequence]:
    return read_catalog_file(path)[0]


# -- datasets -------------------------------------------------------------------


def _fmt_count(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 2**53 else fmt_float(x)


def write_dataset(path, ds: DataSet) -> Path:
    lines = [DATASET_HEADER]
    for s, n, c in zip(ds.sequences, ds.shots, ds.counts):
        lines.append(f"{format_sequence(s)} {_fmt_count(n)} {_fmt_count(c)}")
    return _write(path, "\n".join(lines) + "\n")


def read_dataset(path, catalog: Sequence[GateSequence] | None = None) -> DataSet:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        raise InputError(f"no such file {path}") from exc
    if not lines or lines[0].strip() != DATASET_HEADER:
        raise InputError(f"{path} does not start with {DATASET_HEADER!r}")
    seqs, shots, counts = [], [], []
    for ln, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InputError(f"{path}:{ln}: expected '<sequence> <N> <n_bright>'")
        try:
            seqs.append(parse_sequence(parts[0]))
            shots.append(float(parts[1]))
            counts.append(float(parts[2]))
        except ParseError as exc:
            raise ParseError(f"{path}:{ln}: {exc}", exc.text, exc.position) from exc
        except ValueError as exc:
            raise InputError(f"{path}:{ln}: bad number: {exc}") from exc
    if catalog is not None:
        prov = {s: s for s in catalog}
        seqs = [prov.get(s, s) for s in seqs]
    return DataSet(seqs, np.array(shots), np.array(counts))


# -- bundles, manifests, reports --------------------------------------------------


def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, inputs: dict, config: dict, seed: int | None) -> Path:
    manifest = {
        "command": command,
        "inputs": {k: {"path": str(v), "sha256": file_digest(v)} for k, v in inputs.items() if v is not None},
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    return _write(Path(out_dir) / "manifest.json", json.dumps(manifest, indent=2, default=str) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_bundle(out_dir, bundle) -> Path:
    """``iteration_<L>.json`` per stage, ``final_mle.json`` (gauge-optimised, with gauge), ``trace.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if bundle.lgst is not None:
        write_gateset(out / "lgst.json", bundle.lgst)
    for L, gs in bundle.iterations.items():
        write_gateset(out / f"iteration_{L}.json", gs)
    if bundle.final is not None:
        write_gateset(out / "final_mle.json", bundle.final, bundle.gauge)
    if bundle.mle is not None:
        write_gateset(out / "mle_raw.json", bundle.mle)
    rows = []
    for st in bundle.stages:
        for it, val, gn in st.lm.trace:
            rows.append((st.name, it, float(val), float(gn)))
    write_csv(out / "trace.csv", ("stage", "iteration", "objective", "gradient_norm"), rows)
    if bundle.failed:
        _write(out / "FAILED", bundle.failed + "\n")
    return out


def read_bundle(out_dir) -> dict:
    out = Path(out_dir)
    its = {}
    for p in out.glob("iteration_*.json"):
        its[int(p.stem.split("_")[1])] = read_gateset(p)
    final = out / "final_mle.json"
    return {
        "iterations": dict(sorted(its.items())),
        "final": read_gateset(final) if final.exists() else None,
        "gauge": read_gauge(final) if final.exists() else None,
        "trace": read_csv(out / "trace.csv") if (out / "trace.csv").exists() else [],
    }

"""
Reading and writing instance, sample and report files.

Formats are documented in INSTANCE_FORMAT.md and UC_FORMAT.md. Every write
goes through a temp file in the target directory followed by os.replace.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile

import numpy as np
import pandas as pd

from errors import ModelError, SampleOutsideSupportError, SchemaError
from models import BoxSet, FirstStageSpace, Instance, PolicyStructure, RecourseData, SampleSet

INSTANCE_FORMAT = "drlp-instance"


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="-" + os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonable(value):
    """numpy-aware conversion; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(jsonable(payload), indent=2) + "\n")


def read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as e:
        raise SchemaError(f"{path}: file not found") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return doc


def write_table(path: str, records: list[dict]) -> pd.DataFrame:
    frame = pd.DataFrame.from_records(records)
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))
    return frame


# --- Instance documents ---

def structure_to_dict(structure: PolicyStructure) -> dict:
    return {
        "n2": structure.n2,
        "m": structure.m,
        "parameter_count": structure.parameter_count,
        "terms": [list(t) for t in structure.terms],
    }


def structure_from_dict(doc: dict) -> PolicyStructure:
    return PolicyStructure(int(doc["n2"]), int(doc["m"]), int(doc["parameter_count"]),
                           tuple(tuple(t) for t in doc["terms"]))


def instance_to_dict(instance: Instance, structure: PolicyStructure | None = None) -> dict:
    fs, rc = instance.first_stage, instance.recourse
    doc = {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "dimensions": {
            "n_binary": fs.n_binary,
            "n_continuous": fs.n_continuous,
            "n2": instance.n2,
            "m": instance.m,
            "L": instance.L,
            "N": instance.N,
        },
        "c1": instance.c1,
        "c2": instance.c2,
        "first_stage": {"G": fs.G, "g": fs.g},
        "recourse": {"A1": rc.A1, "A2": rc.A2, "A3": rc.A3, "b": rc.b},
        "support": {"lower": instance.support.lower, "upper": instance.support.upper},
        "samples": instance.samples.points,
        "epsilon": instance.epsilon,
    }
    if structure is not None:
        doc["policy_structure"] = structure_to_dict(structure)
    return jsonable(doc)


def _field(doc: dict, key: str, source: str):
    if key not in doc:
        raise SchemaError(f"{source}: missing field '{key}'")
    return doc[key]


def instance_from_dict(doc: dict, source: str = "instance") -> tuple[Instance, PolicyStructure | None]:
    if doc.get("format", INSTANCE_FORMAT) != INSTANCE_FORMAT:
        raise SchemaError(f"{source}: format '{doc.get('format')}' is not '{INSTANCE_FORMAT}'")
    dims = _field(doc, "dimensions", source)
    first = _field(doc, "first_stage", source)
    recourse = _field(doc, "recourse", source)
    support = _field(doc, "support", source)
    try:
        n_binary = int(_field(dims, "n_binary", f"{source}.dimensions"))
        n_continuous = int(_field(dims, "n_continuous", f"{source}.dimensions"))
        width = n_binary + n_continuous
        G = np.array(_field(first, "G", f"{source}.first_stage"), dtype=float)
        if G.size == 0:
            G = G.reshape(0, width)
        fs = FirstStageSpace(n_binary, n_continuous, G, _field(first, "g", f"{source}.first_stage"))
        rc = RecourseData(*(_field(recourse, key, f"{source}.recourse") for key in ("A1", "A2", "A3", "b")))
        box = BoxSet(_field(support, "lower", f"{source}.support"), _field(support, "upper", f"{source}.support"))
        samples = SampleSet(_field(doc, "samples", source), box)
        instance = Instance(
            c1=_field(doc, "c1", source),
            c2=_field(doc, "c2", source),
            first_stage=fs,
            recourse=rc,
            support=box,
            samples=samples,
            epsilon=_field(doc, "epsilon", source),
        )
        for key in ("n2", "m", "L", "N"):
            if key in dims and int(dims[key]) != getattr(instance, key):
                raise ModelError(f"dimensions.{key}: declared {dims[key]}, data has {getattr(instance, key)}")
        structure = None
        if doc.get("policy_structure") is not None:
            structure = structure_from_dict(doc["policy_structure"])
            structure.check(instance)
    except SampleOutsideSupportError:
        raise
    except (ModelError, TypeError, ValueError) as e:
        raise SchemaError(f"{source}: {e}") from e
    return instance, structure


def load_instance(path: str) -> tuple[Instance, PolicyStructure | None]:
    return instance_from_dict(read_json(path), source=path)


def dump_instance(path: str, instance: Instance, structure: PolicyStructure | None = None) -> None:
    write_json(path, instance_to_dict(instance, structure))


# --- Sample files: one row per sample, m comma-separated columns ---

def load_samples(path: str, support: BoxSet, clamp: bool = False, column_label=None) -> SampleSet:
    """Read a sample file; ``column_label(j)`` names coordinate j in diagnostics."""
    rows, lines = [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, record in enumerate(csv.reader(fh), 1):
                if not record or all(not cell.strip() for cell in record) or record[0].lstrip().startswith("#"):
                    continue
                if len(record) != support.dim:
                    raise SchemaError(f"{path}: row {lineno}: expected {support.dim} columns, got {len(record)}")
                try:
                    rows.append([float(cell) for cell in record])
                except ValueError as e:
                    raise SchemaError(f"{path}: row {lineno}: non-numeric value ({e})") from e
                lines.append(lineno)
    except FileNotFoundError as e:
        raise SchemaError(f"{path}: file not found") from e
    if not rows:
        raise SchemaError(f"{path}: no sample rows")
    try:
        return SampleSet.ingest(np.array(rows), support, clamp=clamp)
    except SampleOutsideSupportError as e:
        i, j = e.details["sample"], e.details["coordinate"]
        label = f" ({column_label(j)})" if column_label else ""
        raise SampleOutsideSupportError(
            f"{path}: row {lines[i]}, column {j}{label}: value {rows[i][j]} outside "
            f"[{support.lower[j]}, {support.upper[j]}]",
            sample=i, coordinate=j,
        ) from e


def dump_samples(path: str, samples: SampleSet | np.ndarray) -> None:
    points = samples.points if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    text = "".join(",".join(format(float(v), ".17g") for v in row) + "\n" for row in points)
    atomic_write_text(path, text)

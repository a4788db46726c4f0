"""JSON documents exchanged by the CLI: staves.json and gt.json."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Sequence, Tuple

import jsonschema
import numpy as np

from .tracker import STATUS_CODES, STATUS_NAMES, ReconstructedStaff

_INT_ROWS = {"type": "array", "items": {"type": "integer"}}
_STATUS_RUNS = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [{"enum": sorted(STATUS_CODES)}, {"type": "integer", "minimum": 1}],
        "minItems": 2,
        "maxItems": 2,
    },
}
_IMAGE = {
    "type": "object",
    "required": ["rows", "cols"],
    "properties": {"rows": {"type": "integer", "minimum": 1}, "cols": {"type": "integer", "minimum": 1}},
}

STAVES_SCHEMA = {
    "type": "object",
    "required": ["image", "staves"],
    "properties": {
        "image": _IMAGE,
        "params_echo": {"type": "object"},
        "staves": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["col_range", "mean_sep", "thickness", "lines"],
                "properties": {
                    "col_range": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
                    "mean_sep": {"type": "number", "exclusiveMinimum": 0},
                    "thickness": {"type": "integer", "minimum": 1},
                    "lines": {"type": "array", "items": _INT_ROWS, "minItems": 4, "maxItems": 4},
                    "status_runs": {"type": "array", "items": _STATUS_RUNS, "minItems": 4, "maxItems": 4},
                },
            },
        },
    },
}

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
GT_SCHEMA = {
    "type": "object",
    "required": ["staves"],
    "properties": {
        "image": _IMAGE,
        "staves": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["lines"],
                "properties": {
                    "lines": {
                        "type": "array",
                        "minItems": 4,
                        "maxItems": 4,
                        "items": {"type": "array", "minItems": 2, "items": _POINT},
                    }
                },
            },
        },
    },
}


class SchemaError(ValueError):
    """Document does not match its schema; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _validate(doc, schema) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path).lstrip(".")
        raise SchemaError(err.message, path)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc})") from exc


def encode_status(status: Sequence[int]) -> List[list]:
    runs: List[list] = []
    for code in np.asarray(status).tolist():
        name = STATUS_NAMES[int(code)]
        if runs and runs[-1][0] == name:
            runs[-1][1] += 1
        else:
            runs.append([name, 1])
    return runs


def decode_status(runs) -> np.ndarray:
    out: List[int] = []
    for name, n in runs:
        out.extend([STATUS_CODES[name]] * n)
    return np.array(out, dtype=np.int8)


def staves_document(staves: Sequence[ReconstructedStaff], shape: Tuple[int, int], params: dict) -> dict:
    doc = {"image": {"rows": int(shape[0]), "cols": int(shape[1])}, "params_echo": params, "staves": []}
    for s in staves:
        entry = {
            "col_range": [int(s.col_range[0]), int(s.col_range[1])],
            "mean_sep": float(s.mean_sep),
            "thickness": int(s.thickness),
            "lines": [np.asarray(line).astype(int).tolist() for line in s.lines],
        }
        if s.status is not None:
            entry["status_runs"] = [encode_status(st) for st in s.status]
        doc["staves"].append(entry)
    return doc


def dump(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def parse_staves(doc: dict) -> Tuple[Tuple[int, int], List[ReconstructedStaff]]:
    _validate(doc, STAVES_SCHEMA)
    shape = (doc["image"]["rows"], doc["image"]["cols"])
    staves = []
    for k, entry in enumerate(doc["staves"]):
        m0, m1 = entry["col_range"]
        width = m1 - m0 + 1
        if width < 1 or m1 >= shape[1]:
            raise SchemaError(f"column range {entry['col_range']} invalid for width {shape[1]}", f"staves[{k}].col_range")
        for i, line in enumerate(entry["lines"]):
            if len(line) != width:
                raise SchemaError(f"expected {width} rows, got {len(line)}", f"staves[{k}].lines[{i}]")
        status = None
        if "status_runs" in entry:
            decoded = [decode_status(r) for r in entry["status_runs"]]
            for i, st in enumerate(decoded):
                if len(st) != width:
                    raise SchemaError("status runs do not cover the column range", f"staves[{k}].status_runs[{i}]")
            status = np.stack(decoded)
        staves.append(ReconstructedStaff((m0, m1), np.array(entry["lines"], dtype=np.int64), entry["thickness"],
                                         entry["mean_sep"], status))
    return shape, staves


def parse_ground_truth(doc: dict):
    """Returns (optional image shape, control points per staff per line)."""
    _validate(doc, GT_SCHEMA)
    shape = (doc["image"]["rows"], doc["image"]["cols"]) if "image" in doc else None
    staves = []
    for k, entry in enumerate(doc["staves"]):
        lines = []
        for i, points in enumerate(entry["lines"]):
            cols = [p[0] for p in points]
            if any(b <= a for a, b in zip(cols, cols[1:])):
                raise SchemaError("control point columns must be strictly increasing", f"staves[{k}].lines[{i}]")
            lines.append([(float(c), float(r)) for c, r in points])
        staves.append(lines)
    return shape, staves

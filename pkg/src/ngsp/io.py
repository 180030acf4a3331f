"""Run configs (JSON) and field files (CSV, raw float64 + JSON sidecar)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import ReferenceSpec
from .grid import Grid
from .solve import METHODS, ValueField
from .speed import PROBLEM_NAMES, ConfigurationError, ProblemSpec

MIN_SIZE = 11

_number = {"type": "number"}
_point = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "method", "size"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object", "additionalProperties": _number},
                "target": {"oneOf": [_point, {"type": "array", "items": _point, "minItems": 1}]},
                "domain": {"type": "array", "items": _number, "minItems": 4, "maxItems": 4},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "method": {"enum": list(METHODS)},
        "size": {"type": "integer", "minimum": MIN_SIZE},
        "bootstrap_fraction": {"type": "number", "minimum": 0},
        "levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": MIN_SIZE}, "minItems": 1},
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["exact", "oum"]},
                "size": {"type": "integer", "minimum": MIN_SIZE},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "string"} for k in ("csv", "raw", "svg", "table")},
        },
    },
}


@dataclass
class RunConfig:
    problem: ProblemSpec
    method: str
    size: int
    bootstrap_fraction: float = 0.05
    levels: list[float] = dc_field(default_factory=list)
    sizes: list[int] = dc_field(default_factory=lambda: [101, 201, 401])
    reference: ReferenceSpec = dc_field(default_factory=ReferenceSpec)
    outputs: dict[str, str] = dc_field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        x0, x1, y0, y1 = self.problem.domain
        return Grid(self.size, self.size, x0, x1, y0, y1)


def parse_config(data: dict) -> RunConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config {where}: {exc.message}") from None

    p = data["problem"]
    if p["name"] not in PROBLEM_NAMES:
        raise ConfigurationError(f"unknown problem {p['name']!r}")
    target = p.get("target", [[0.0, 0.0]])
    if not isinstance(target[0], list):
        target = [target]
    spec = ProblemSpec(
        p["name"], dict(p.get("params", {})),
        tuple(tuple(float(c) for c in t) for t in target),
        tuple(float(c) for c in p.get("domain", (-0.5, 0.5, -0.5, 0.5))),
        float(p.get("scale", 1.0)),
    )
    levels = [float(v) for v in data.get("levels", [])]
    if levels != sorted(levels):
        raise ConfigurationError("levels must be sorted ascending")
    ref = data.get("reference")
    if ref is None:
        reference = ReferenceSpec("exact" if spec.name in ("hjb1", "isotropic") else "oum")
    else:
        reference = ReferenceSpec(ref["kind"], ref.get("size", 401))
    cfg = RunConfig(spec, data["method"], data["size"], float(data.get("bootstrap_fraction", 0.05)),
                    levels, list(data.get("sizes", [101, 201, 401])), reference,
                    dict(data.get("outputs", {})))
    cfg.grid  # validates domain and spacing
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    return parse_config(data)


# -- field files ------------------------------------------------------------

def field_header(vf: ValueField) -> dict:
    g = vf.grid
    return {
        "problem": vf.problem, "method": vf.method, "n_x": g.n_x, "n_y": g.n_y, "dx": g.dx,
        "x_min": g.x_min, "x_max": g.x_max, "y_min": g.y_min, "y_max": g.y_max,
        "version": __version__,
    }


def write_csv(vf: ValueField, path) -> None:
    """'#'-prefixed header then n_y rows of n_x values at 9 significant digits.

    Wall time is left out so repeated runs produce identical files.
    """
    lines = [f"# {k}: {v}" for k, v in field_header(vf).items()]
    for row in vf.values:
        lines.append(",".join(format(v, ".9g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _coerce(v: str):
    for t in (int, float):
        try:
            return t(v)
        except ValueError:
            pass
    return v


def read_csv(path) -> ValueField:
    header, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            header[k.strip()] = _coerce(v.strip())
        elif line.strip():
            rows.append([float(c) for c in line.split(",")])
    values = np.array(rows)
    if values.shape != (header["n_y"], header["n_x"]):
        raise ValueError(f"payload {values.shape} does not match header size")
    grid = Grid(header["n_x"], header["n_y"], header["x_min"], header["x_max"],
                header["y_min"], header["y_max"])
    return ValueField(grid, values, header["problem"], header["method"])


def write_raw(vf: ValueField, path) -> Path:
    """Little-endian float64 payload plus a ``.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(vf.values, dtype="<f8").tobytes())
    meta = {**field_header(vf), "wall_seconds": vf.wall_seconds, "dtype": "<f8",
            "layout": "row-major"}
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return sidecar


def read_raw(path) -> ValueField:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    values = np.frombuffer(path.read_bytes(), dtype="<f8")
    if values.size != meta["n_x"] * meta["n_y"]:
        raise ValueError("raw payload length does not match sidecar")
    grid = Grid(meta["n_x"], meta["n_y"], meta["x_min"], meta["x_max"], meta["y_min"], meta["y_max"])
    return ValueField(grid, values.reshape(grid.shape).copy(), meta["problem"], meta["method"],
                      meta.get("wall_seconds", 0.0))


def write_table(reports, path) -> None:
    lines = ["N,E_inf,E_1,E_2,cpu_seconds"]
    lines += [f"{r.n_x},{r.e_inf:.6e},{r.e_1:.6e},{r.e_2:.6e},{r.cpu_seconds:.4f}" for r in reports]
    Path(path).write_text("\n".join(lines) + "\n")


def format_table(reports) -> str:
    out = [f"{'N':>6} {'E_inf':>12} {'E_1':>12} {'E_2':>12} {'CPU s':>9}"]
    out += [f"{r.n_x:>6} {r.e_inf:>12.6f} {r.e_1:>12.6f} {r.e_2:>12.6f} {r.cpu_seconds:>9.3f}"
            for r in reports]
    return "\n".join(out)

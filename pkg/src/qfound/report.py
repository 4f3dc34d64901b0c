"""Command reports: plain data that serializes losslessly to JSON and
renders as readable text."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass

import numpy as np

FAILING = ("fail", "infeasible", "unsat")


def plain(obj):
    """Convert results into JSON-ready values (lists, dicts, floats, str)."""
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if np.allclose(obj.imag, 0):
                return plain(obj.real)
            return {"re": plain(obj.real), "im": plain(obj.imag)}
        return [plain(v) for v in obj.tolist()] if obj.ndim else plain(obj.item())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    name = getattr(obj, "name", None)
    if isinstance(name, str) and name:
        return name
    if hasattr(obj, "matrix"):
        return {"matrix": plain(obj.matrix)}
    if hasattr(obj, "weights"):
        return {"weights": plain(dict(obj.weights))}
    if is_dataclass(obj):
        return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
    return repr(obj)


@dataclass
class Entry:
    name: str
    status: str
    residual: float = 0.0
    witness: object = None
    note: str = ""

    def __post_init__(self):
        self.residual = float(self.residual)
        self.witness = plain(self.witness)


@dataclass
class Report:
    command: str
    model: str
    options: dict
    entries: list
    data: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    version: str = ""

    def __post_init__(self):
        self.options = plain(self.options)
        self.data = plain(self.data)
        self.tolerances = plain(self.tolerances)
        self.entries = [e if isinstance(e, Entry) else Entry(**e) for e in self.entries]

    @property
    def exit_code(self) -> int:
        return 1 if any(e.status in FAILING for e in self.entries) else 0

    @property
    def status(self) -> str:
        return "fail" if self.exit_code else "pass"

    def to_data(self) -> dict:
        return {"command": self.command, "model": self.model, "options": self.options,
                "entries": [asdict(e) for e in self.entries], "data": self.data, "seed": self.seed,
                "tolerances": self.tolerances, "version": self.version, "status": self.status}

    def emit(self, fmt: str = "text") -> str:
        if fmt == "data":
            return json.dumps(self.to_data(), indent=2, sort_keys=True) + "\n"
        return render_text(self)


def parse_report(text: str) -> Report:
    d = json.loads(text)
    d.pop("status", None)
    return Report(**d)


def render_text(r: Report) -> str:
    opts = " ".join(f"--{k} {v}" for k, v in sorted(r.options.items()) if v is not None)
    lines = [f"qf {r.command} {r.model} {opts}".rstrip(),
             f"version {r.version}  seed {r.seed}  status {r.status}"]
    width = max((len(e.name) for e in r.entries), default=4)
    for e in r.entries:
        line = f"  {e.name:<{width}}  {e.status:<20}  {e.residual:.3e}"
        if e.note:
            line += f"  {e.note}"
        lines.append(line)
        if e.witness is not None and e.status not in ("pass", "feasible", "sat"):
            lines.append(f"  {'':<{width}}  witness: {json.dumps(e.witness, sort_keys=True)}")
    for key in sorted(r.data):
        lines.append(f"{key}:")
        val = r.data[key]
        if isinstance(val, list):
            lines.extend(f"  {json.dumps(v, sort_keys=True)}" for v in val)
        else:
            lines.append(f"  {json.dumps(val, sort_keys=True)}")
    lines.append("tolerances: " + ", ".join(f"{k}={v:g}" for k, v in sorted(r.tolerances.items())))
    return "\n".join(lines) + "\n"

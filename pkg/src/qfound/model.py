"""JSON model files: parsing, validation and system construction.

A Hilbert model looks like::

    {"format_version": 1, "kind": "hilbert", "dimension": 2,
     "observables": [{"name": "sz", "diag": [1, -1]},
                     {"name": "sy", "re": [[0, 0], [0, 0]], "im": [[0, -1], [1, 0]]}],
     "states": [{"name": "zero", "vector": [1, 0]}],
     "scenarios": [{"name": "s", "contexts": [["sz"]]}]}

Table models replace matrices by spectra, per-state distributions and an
explicit update table.  Optional blocks: ``scenarios``, ``behaviors``,
``transition_tables`` and ``audit``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contextuality import Behavior, Scenario
from .errors import ParseError, QFError, SchemaError
from .hilbert import DensityState, HermitianObservable, build_hilbert_system
from .numkernel import is_hermitian
from .table import TableSystem

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    kind: str
    dimension: int
    observables: list                      # hilbert: (name, matrix); table: (name, spectrum)
    states: list                           # hilbert: (name, matrix); table: (name, {obs: probs})
    scenarios: dict = field(default_factory=dict)
    behaviors: dict = field(default_factory=dict)
    transition_tables: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)
    updates: dict = field(default_factory=dict)
    mixed: str = "mixed"
    pure: list | None = None
    path: str = ""
    format_version: int = FORMAT_VERSION

    def build_system(self):
        try:
            if self.kind == "hilbert":
                return build_hilbert_system(self.dimension, self.observables,
                                            [DensityState(n, m) for n, m in self.states])
            return TableSystem(self.dimension, dict(self.observables), dict(self.states), self.updates,
                               mixed=self.mixed, pure=self.pure)
        except SchemaError:
            raise
        except QFError as exc:
            raise SchemaError(str(exc), "model") from None

    def scenario(self, name: str, sys) -> Scenario:
        if name not in self.scenarios:
            raise SchemaError(f"no scenario named {name!r}", "scenarios")
        return Scenario.from_system(sys, self.scenarios[name], name)

    def behavior(self, name: str) -> Behavior:
        if name not in self.behaviors:
            raise SchemaError(f"no behavior named {name!r}", "behaviors")
        spec = self.behaviors[name]
        sc = Scenario(spec["observables"], spec["contexts"], name)
        try:
            return Behavior.from_arrays(sc, spec["tables"])
        except ValueError as exc:
            raise SchemaError(str(exc), f"behaviors.{name}") from None


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing field {key!r}", where)
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"expected {kind.__name__ if isinstance(kind, type) else kind}", f"{where}.{key}")
    return val


def _matrix(block, n, where):
    try:
        if "diag" in block:
            d = np.asarray(block["diag"], dtype=float)
            if d.shape != (n,):
                raise SchemaError(f"diagonal must have {n} entries", f"{where}.diag")
            return np.diag(d).astype(complex)
        re = np.asarray(_require(block, "re", where), dtype=float)
        im = np.asarray(block.get("im", np.zeros((n, n))), dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("matrix entries must be numbers", where) from None
    if re.shape != (n, n) or im.shape != (n, n):
        raise SchemaError(f"matrix must be {n}x{n}", where)
    return re + 1j * im


def _state_matrix(block, n, where):
    if "vector" in block:
        try:
            v = np.asarray(block["vector"], dtype=float) + 1j * np.asarray(block.get("vector_im", 0.0), dtype=float)
        except (TypeError, ValueError):
            raise SchemaError("vector entries must be numbers", where) from None
        if v.shape != (n,):
            raise SchemaError(f"vector must have {n} entries", f"{where}.vector")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise SchemaError("zero vector", f"{where}.vector")
        v = v / norm
        return np.outer(v, v.conj())
    return _matrix(block, n, where)


def _names(items, where):
    seen = set()
    for k, it in enumerate(items):
        name = _require(it, "name", f"{where}[{k}]", str)
        if name in seen:
            raise SchemaError(f"duplicate name {name!r}", where)
        seen.add(name)
    return [it["name"] for it in items]


def load_model(data: dict, path: str = "") -> ModelFile:
    """Validate a decoded model document."""
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object", "")
    version = _require(data, "format_version", "", int)
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version}", "format_version")
    kind = data.get("kind", "hilbert")
    if kind not in ("hilbert", "table"):
        raise SchemaError(f"unknown kind {kind!r}", "kind")
    n = _require(data, "dimension", "", int)
    if n < 1:
        raise SchemaError("dimension must be positive", "dimension")
    obs_items = _require(data, "observables", "", list)
    state_items = data.get("states", [])
    if not isinstance(state_items, list):
        raise SchemaError("expected a list", "states")
    names = _names(obs_items, "observables")
    snames = _names(state_items, "states")
    observables, states = [], []
    updates, mixed, pure = {}, data.get("mixed", "mixed"), data.get("pure")
    if kind == "hilbert":
        for k, (name, it) in enumerate(zip(names, obs_items)):
            m = _matrix(it, n, f"observables[{k}]")
            if not is_hermitian(m):
                raise SchemaError(f"observable not Hermitian: {name!r}", f"observables[{k}]")
            observables.append((name, m))
        for k, (name, it) in enumerate(zip(snames, state_items)):
            m = _state_matrix(it, n, f"states[{k}]")
            try:
                DensityState(name, m).validate()
            except QFError as exc:
                raise SchemaError(str(exc), f"states[{k}]") from None
            states.append((name, m))
    else:
        for k, (name, it) in enumerate(zip(names, obs_items)):
            observables.append((name, [float(v) for v in _require(it, "spectrum", f"observables[{k}]", list)]))
        for k, (name, it) in enumerate(zip(snames, state_items)):
            dists = _require(it, "distributions", f"states[{k}]", dict)
            states.append((name, {o: [float(p) for p in ps] for o, ps in dists.items()}))
        for k, it in enumerate(data.get("updates", [])):
            where = f"updates[{k}]"
            key = (_require(it, "state", where, str), _require(it, "observable", where, str),
                   _require(it, "index", where, int))
            if key in updates:
                raise SchemaError(f"duplicate update {key}", "updates")
            target = _require(it, "target", where)
            updates[key] = target if isinstance(target, str) else {str(a): float(w) for a, w in target.items()}
    scenarios = {}
    for k, it in enumerate(data.get("scenarios", [])):
        name = _require(it, "name", f"scenarios[{k}]", str)
        if name in scenarios:
            raise SchemaError(f"duplicate name {name!r}", "scenarios")
        ctxs = _require(it, "contexts", f"scenarios[{k}]", list)
        for c in ctxs:
            for o in c:
                if o not in names:
                    raise SchemaError(f"unknown observable {o!r}", f"scenarios[{k}].contexts")
        scenarios[name] = [list(c) for c in ctxs]
    behaviors = {}
    for k, it in enumerate(data.get("behaviors", [])):
        where = f"behaviors[{k}]"
        name = _require(it, "name", where, str)
        if name in behaviors:
            raise SchemaError(f"duplicate name {name!r}", "behaviors")
        behaviors[name] = {"observables": _require(it, "observables", where, dict),
                           "contexts": _require(it, "contexts", where, list),
                           "tables": _require(it, "tables", where, list)}
    tables = []
    for k, it in enumerate(data.get("transition_tables", [])):
        where = f"transition_tables[{k}]"
        handles = _require(it, "handles", where, list)
        basis = _require(it, "basis", where, list)
        for h in handles + basis:
            if h not in names:
                raise SchemaError(f"unknown observable {h!r}", where)
        tables.append({"name": it.get("name", f"table{k}"), "handles": handles, "basis": basis})
    audit = data.get("audit", {})
    if not isinstance(audit, dict):
        raise SchemaError("expected an object", "audit")
    model = ModelFile(kind, n, observables, states, scenarios, behaviors, tables, audit, updates,
                      mixed, pure, path, version)
    for name in model.behaviors:
        model.behavior(name)
    return model


def parse_model_text(text: str, path: str = "") -> ModelFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return load_model(data, path)


def parse_model_file(path) -> ModelFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"no such file: {path}") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc.reason}") from None
    return parse_model_text(text, str(path))

"""``qf`` command line: load a model file, run one analysis, print a report.

Exit codes: 0 when every entry passes (feasible, satisfiable), 1 when some
entry fails, 2 on bad input.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .auditor import AuditConfig, audit_system
from .commutative import spectral_decomposition
from .config import DEFAULT_TOLERANCES
from .contextuality import (behavior_from_system, derive_valuation_problem, exclusivity_local_orthogonality_check,
                            joint_distribution_feasible, nondisturbance_check, random_lo_family,
                            valuation_search)
from .errors import QFError, UsageError
from .model import ModelFile, parse_model_file
from .report import Entry, Report
from .system import sequential_distribution
from .transition import (ProjectionAssignment, check_transition_postulate, transition_table, vector_assignment,
                         verify_embedding)

COMMANDS = ("audit", "spectral", "simulate", "embed", "context", "valuation")


def resolve_seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("QF_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"QF_SEED must be an integer, got {env!r}") from None


def _need(args, attr, cmd):
    val = getattr(args, attr)
    if val is None:
        raise UsageError(f"{cmd} needs --{attr}")
    return val


# ---------------------------------------------------------------------------
# command handlers: (model, system, args, seed) -> (entries, data, tolerances)
# ---------------------------------------------------------------------------

def run_audit(model: ModelFile, sys_, args, seed):
    cfg = AuditConfig(**{k: v for k, v in model.audit.items() if k in ("probe_mixtures", "max_sequence", "samples",
                                                                         "bases", "handles")})
    cfg.seed = seed
    if args.tol is not None:
        cfg.tol = args.tol
    rep = audit_system(sys_, cfg)
    entries = []
    for r in rep.results:
        note = f"{r.checks} checks" + (f"; {r.note}" if r.note else "")
        entries.append(Entry(r.postulate, r.status, r.residual, r.witness, note))
    return entries, {"probe_count": rep.probe_count}, {"audit": cfg.tol}


def run_spectral(model, sys_, args, seed):
    tol = args.tol if args.tol is not None else DEFAULT_TOLERANCES["algebra"]
    names = [args.observable] if args.observable else list(sys_.declared_observables)
    entries, listing = [], []
    for name in names:
        d = spectral_decomposition(sys_, name)
        entries.append(Entry(name, "pass" if d.residual <= tol else "fail", d.residual))
        listing.append({"observable": name, "eigenvalues": d.eigenvalues, "multiplicities": d.multiplicities,
                        "projections": d.projections})
    return entries, {"spectral": listing}, {"algebra": tol}


def run_simulate(model, sys_, args, seed):
    state = _need(args, "state", "simulate")
    seq = args.sequence.split(",") if args.sequence else ([args.observable] if args.observable else None)
    if not seq:
        raise UsageError("simulate needs --sequence or --observable")
    table = sequential_distribution(sys_, state, seq)
    rows = [[list(vals), p] for vals, p in table.items()]
    total = table.total
    tol = args.tol if args.tol is not None else 1e-12
    ok = abs(total - 1.0) <= tol or sys_.is_null(state)
    entries = [Entry("normalization", "pass" if ok else "fail", abs(total - 1.0))]
    return entries, {"observables": seq, "state": state, "table": rows}, {"normalization": tol}


def _embedding_inputs(model, sys_):
    if model.transition_tables:
        t = model.transition_tables[0]
        return t["handles"], t["basis"]
    nondeg = [o for o in sys_.declared_observables if sys_.is_nondegenerate(o)]
    handles = []
    for o in nondeg:
        handles += [sys_.indicator(o, [v]) for v in sys_.spectrum(o)]
    handles = list(dict.fromkeys(handles))
    return handles, handles[: sys_.dimension]


def run_embed(model, sys_, args, seed):
    tol = args.tol if args.tol is not None else DEFAULT_TOLERANCES["audit"]
    handles, basis = _embedding_inputs(model, sys_)
    table = transition_table(sys_, handles)
    rep = check_transition_postulate(table, [basis], tol)
    entries = [Entry("transition_symmetry", "pass" if rep.symmetric else "fail", rep.symmetry_residual,
                     rep.symmetry_witness)]
    _, inter, wit = rep.interference[0]
    entries.append(Entry("interference", "pass" if inter <= tol else "fail", inter, wit))
    psi = vector_assignment(table, basis, tol=tol)
    er = verify_embedding(sys_, psi, ProjectionAssignment(sys_, psi), tol=tol,
                          interference_ok=rep.interference_ok, seed=seed)
    for e in er.entries:
        entries.append(Entry(e.name, "pass" if e.passed else "fail", e.residual, e.witness, e.note))
    vectors = {h: psi.vectors[h] for h in handles}
    return entries, {"basis": list(basis), "vectors": vectors}, {"audit": tol}


def run_context(model, sys_, args, seed):
    tol = args.tol if args.tol is not None else DEFAULT_TOLERANCES["lp"]
    if args.behavior:
        b = model.behavior(args.behavior)
    else:
        scenario = model.scenario(_need(args, "scenario", "context"), sys_)
        b = behavior_from_system(sys_, _need(args, "state", "context"), scenario)
    nd = nondisturbance_check(b, DEFAULT_TOLERANCES["equivalence"])
    res = joint_distribution_feasible(b, tol)
    rng = np.random.default_rng(seed)
    families = [random_lo_family(b.scenario, rng) for _ in range(16)]
    lo = exclusivity_local_orthogonality_check(b, families, tol)
    entries = [Entry("nondisturbance", "pass" if nd.passed else "fail", nd.discrepancy, nd.witness),
               Entry("joint_distribution", res.status, res.residual, None, f"{res.iterations} pivots"),
               Entry("local_orthogonality", "pass" if lo.passed else "fail", max(lo.max_sum - 1.0, 0.0),
                     lo.violations[0] if lo.violations else None, f"{len(families)} families")]
    tables = [{"context": list(ctx), "table": t.probabilities} for ctx, t in zip(b.scenario.contexts, b.tables)]
    data = {"behavior": tables}
    if res.feasible:
        data["distribution"] = {"observables": list(res.observables), "weights": res.distribution}
    else:
        data["certificate"] = [[k, list(t), w] for (k, t), w in zip(res.rows, res.certificate) if abs(w) > 1e-12]
    return entries, data, {"lp": tol, "nondisturbance": DEFAULT_TOLERANCES["equivalence"]}


def run_valuation(model, sys_, args, seed):
    scenario = model.scenario(_need(args, "scenario", "valuation"), sys_)
    problem = derive_valuation_problem(sys_, scenario)
    res = valuation_search(problem)
    status = "sat" if res.satisfiable else "unsat"
    entries = [Entry("valuation", status, 0.0, None, f"{res.explored} partial assignments explored")]
    data = {"objects": {o: list(s) for o, s in problem.spectra.items()}, "order": list(res.order),
            "explored": res.explored}
    if res.satisfiable:
        data["valuation"] = res.valuation
    return entries, data, {}


HANDLERS = {"audit": run_audit, "spectral": run_spectral, "simulate": run_simulate, "embed": run_embed,
            "context": run_context, "valuation": run_valuation}


def run_command(cmd: str, args) -> Report:
    if cmd not in HANDLERS:
        raise UsageError(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    seed = resolve_seed(args.seed)
    model = parse_model_file(args.model)
    sys_ = model.build_system()
    entries, data, tols = HANDLERS[cmd](model, sys_, args, seed)
    options = {k: getattr(args, k) for k in ("state", "observable", "sequence", "scenario", "behavior", "tol")}
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(tols)
    return Report(cmd, args.model, options, entries, data, seed, tolerances, __version__)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qf", description="Operational quantum toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model", help="model file (JSON, format_version 1)")
    p.add_argument("--state")
    p.add_argument("--observable")
    p.add_argument("--sequence", help="comma-separated observable names")
    p.add_argument("--scenario")
    p.add_argument("--behavior", help="behavior block of the model file (context command)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--format", choices=("text", "data"), default="text")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report = run_command(args.command, args)
    except (QFError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qf: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    sys.stdout.write(report.emit(args.format))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())

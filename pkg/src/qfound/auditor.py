"""Postulate battery for operational systems.

Each postulate P0..P8 is evaluated on a finite probe set and reported as
pass, fail, skipped or documented-violation.  Later postulates lean on
earlier ones (a cone cannot be trusted once updates are broken), so a check
whose prerequisites failed is skipped with a reason instead of evaluated.

Every failure carries a Witness with enough data for ``recompute_witness``
to re-derive the residual from the system alone.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .commutative import algebra_op, find_cone, projective_state
from .config import DEFAULT_MAX_SEQUENCE, DEFAULT_PROBE_MIXTURES
from .system import MIXED, NULL, OperationalSystem, coarse_spectrum, sequential_distribution
from .transition import check_transition_postulate, interference_residual, transition_table

POSTULATES = tuple(f"P{k}" for k in range(9))
PREREQUISITES = {"P4": ("P2", "P3"), "P5": ("P4",), "P6": ("P5",), "P7": ("P6",), "P8": ("P6",)}


@dataclass
class AuditConfig:
    probe_mixtures: int = DEFAULT_PROBE_MIXTURES
    seed: int = 0
    tol: float = 1e-8
    bases: list | None = None          # lists of rank-1 projection names
    handles: list | None = None        # extra rank-1 projections for the transition checks
    max_sequence: int = DEFAULT_MAX_SEQUENCE
    samples: int = 200


@dataclass
class Witness:
    kind: str
    state: object
    observables: tuple
    values: tuple
    observed: float
    expected: float
    residual: float
    extra: dict = field(default_factory=dict)


@dataclass
class PostulateResult:
    postulate: str
    status: str
    residual: float
    witness: Witness | None
    checks: int
    note: str = ""


@dataclass
class AuditReport:
    results: list
    config: AuditConfig
    probe_count: int

    def result(self, postulate: str) -> PostulateResult:
        return next(r for r in self.results if r.postulate == postulate)

    def status(self, postulate: str) -> str:
        return self.result(postulate).status

    @property
    def failed(self) -> list:
        return [r.postulate for r in self.results if r.status == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failed


class _Tracker:
    def __init__(self, tol):
        self.tol = tol
        self.worst = 0.0
        self.witness = None
        self.rank = 0
        self.checks = 0

    def see(self, w: Witness, bad: bool | None = None, rank: int = 0):
        """Record one check.  Among violations the lowest ``rank`` wins, then
        the largest residual, so the most telling witness is reported."""
        self.checks += 1
        if bad is None:
            bad = not w.residual <= self.tol
        self.worst = max(self.worst, w.residual)
        if bad and (self.witness is None or (rank, -w.residual) < (self.rank, -self.witness.residual)):
            self.witness, self.rank = w, rank

    @property
    def failed(self) -> bool:
        return self.witness is not None


# ---------------------------------------------------------------------------
# metrics shared by the auditor and recompute_witness
# ---------------------------------------------------------------------------

def _dist(sys, st, name):
    return sys.probabilities(st, name)


def state_gap(sys: OperationalSystem, s1, s2, observables) -> float:
    return max(float(np.max(np.abs(_dist(sys, s1, o) - _dist(sys, s2, o)))) for o in observables)


def chain_probability(sys: OperationalSystem, state, steps) -> float:
    """P(o_1 in D_1, ..., o_k in D_k) by successive updates; steps are (name, indices)."""
    st, prob = sys.state(state), 1.0
    for name, idx in steps:
        p = float(sum(_dist(sys, st, name)[i] for i in idx))
        if p <= sys.tol["zero_probability"]:
            return 0.0
        prob *= p
        st = sys.update(st, name, idx)
    return prob


def convexity_gap(sys, state, A, delta, steps):
    """Subjective update versus the convex combination of objective ones."""
    p = _dist(sys, state, A)
    total = float(sum(p[i] for i in delta))
    if total <= sys.tol["zero_probability"]:
        return 0.0, 0.0
    lhs = chain_probability(sys, sys.update(state, A, delta), steps)
    rhs = sum(p[i] / total * chain_probability(sys, sys.objective_update(state, A, i), steps)
              for i in delta if p[i] > sys.tol["zero_probability"])
    return lhs, rhs


def repeatability_gap(sys, state, A):
    table = sequential_distribution(sys, state, [A, A]).probabilities
    want = np.diag(_dist(sys, state, A))
    diff = np.abs(table - want)
    i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return float(table[i, j]), float(want[i, j]), (int(i), int(j))


def uniformity_gap(sys, N):
    p = _dist(sys, sys.mixed_state, N)
    k = int(np.argmax(np.abs(p - 1.0 / sys.dimension)))
    return float(p[k]), 1.0 / sys.dimension, k


def closure_gap(sys, state, A, values):
    fa = sys.apply_function(A, list(values))
    spec, image = coarse_spectrum(values, sys.tol["cluster_abs"], sys.tol["cluster_rel"])
    if len(spec) != len(sys.spectrum(fa)) or np.max(np.abs(np.array(spec.values) -
                                                            np.array(sys.spectrum(fa).values))) > 1e-9:
        return float("inf")
    push = np.zeros(len(spec))
    np.add.at(push, image, _dist(sys, state, A))
    return float(np.max(np.abs(push - _dist(sys, state, fa))))


def _cone_maps(sys, A, B):
    cone = find_cone(sys, [A, B])
    return cone, cone.arrows[0].index_map, cone.arrows[-1].index_map


def pushforward_gap(sys, state, A, B):
    cone, f, g = _cone_maps(sys, A, B)
    seq = sequential_distribution(sys, state, [A, B]).probabilities
    push = np.zeros_like(seq)
    for c, pc in enumerate(_dist(sys, state, cone.apex)):
        push[f[c], g[c]] += pc
    diff = np.abs(seq - push)
    i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return float(seq[i, j]), float(push[i, j]), (int(i), int(j))


def composition_gap(sys, state, A, i, B, j, observables):
    """T_(alpha;A) after T_(beta;B), in both orders, against the objective
    update T_(1; E_alpha F_beta) by the product of the two eigenprojections."""
    e = sys.indicator(A, [sys.spectrum(A)[i]])
    f = sys.indicator(B, [sys.spectrum(B)[j]])
    prod = algebra_op(sys, "mul", e, f)
    spec = sys.spectrum(prod)
    if any(abs(v - 1.0) <= 1e-9 for v in spec):
        target = sys.objective_update(state, prod, spec.index(1.0))
    else:
        target = sys.null_state
    ab = sys.objective_update(sys.objective_update(state, A, i), B, j)
    ba = sys.objective_update(sys.objective_update(state, B, j), A, i)
    return max(state_gap(sys, ab, target, observables), state_gap(sys, ba, target, observables))


def indicator_update_gap(sys, state, A, i, observables):
    """T_(alpha;A) against T_(1; chi_alpha(A)): statistically equivalent
    objective events must update alike."""
    e = sys.indicator(A, [sys.spectrum(A)[i]])
    k = sys.spectrum(e).index(1.0)
    return state_gap(sys, sys.objective_update(state, A, i), sys.objective_update(state, e, k), observables)


def bayes_gap(sys, A, B, states):
    worst = 0.0
    for st in states:
        ab = sequential_distribution(sys, st, [A, B]).probabilities
        ba = sequential_distribution(sys, st, [B, A]).probabilities
        worst = max(worst, float(np.max(np.abs(ab - ba.T))))
    return worst


def is_certain(sys, state, name, index, tol):
    return _dist(sys, state, name)[index] >= 1.0 - tol


def purity_flag(sys, state) -> float:
    return 0.0 if sys.is_pure(state) else 1.0


# ---------------------------------------------------------------------------
# the audit
# ---------------------------------------------------------------------------

def audit_probes(sys: OperationalSystem, cfg: AuditConfig) -> list:
    """Mixed state, declared states, their depth-1 updates and random mixtures."""
    base = [sys.mixed_state] + [sys.state(s) for s in sys.declared_states]
    depth1 = []
    for st in base:
        for o in sys.declared_observables:
            for i in range(len(sys.spectrum(o))):
                nxt = sys.objective_update(st, o, i)
                if not sys.is_null(nxt):
                    depth1.append(nxt)
    base = [s for s in base if not sys.is_null(s)] + depth1
    rng = np.random.default_rng(cfg.seed)
    mixed = []
    for _ in range(cfg.probe_mixtures if len(base) > 1 else 0):
        k = int(rng.integers(2, min(4, len(base)) + 1))
        pick = rng.choice(len(base), size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        mixed.append(sys.mix(list(w), [base[i] for i in pick]))
    return base + mixed


def _subsets(k, min_size=1):
    for r in range(min_size, k + 1):
        yield from itertools.combinations(range(k), r)


def audit_system(sys: OperationalSystem, cfg: AuditConfig | None = None) -> AuditReport:
    cfg = cfg or AuditConfig()
    rng = np.random.default_rng(cfg.seed)
    probes = audit_probes(sys, cfg)
    obs = list(sys.declared_observables)
    tol = cfg.tol
    results = {}

    def finish(p, tr: _Tracker, note=""):
        status = "fail" if tr.failed else "pass"
        results[p] = PostulateResult(p, status, tr.worst, tr.witness, tr.checks, note)

    def blocked(p):
        bad = [q for q in PREREQUISITES.get(p, ()) if results[q].status in ("fail", "skipped")]
        if bad:
            results[p] = PostulateResult(p, "skipped", 0.0, None, 0, "prerequisite failed: " + ", ".join(bad))
            return True
        return False

    # P0: declared objects are separated by the probes
    tr = _Tracker(tol)
    power = []
    for a, b in itertools.combinations(obs, 2):
        sa, sb = sys.spectrum(a), sys.spectrum(b)
        if len(sa) != len(sb) or np.max(np.abs(np.array(sa.values) - np.array(sb.values))) > 1e-9:
            power.append(len(probes))
            continue
        gaps = [float(np.max(np.abs(_dist(sys, s, a) - _dist(sys, s, b)))) for s in probes]
        power.append(sum(g > tol for g in gaps))
        w = Witness("separation_observables", None, (a, b), (), max(gaps), tol, max(gaps),
                    {"probes": probes})
        tr.see(w, bad=power[-1] == 0)
    declared = [s for s in sys.declared_states]
    for s, t in itertools.combinations(declared, 2):
        gaps = [float(np.max(np.abs(_dist(sys, s, o) - _dist(sys, t, o)))) for o in sys.observable_names()]
        power.append(sum(g > tol for g in gaps))
        w = Witness("separation_states", (s, t), tuple(sys.observable_names()), (), max(gaps), tol, max(gaps))
        tr.see(w, bad=power[-1] == 0)
    tr.worst = tr.witness.residual if tr.failed else 0.0
    finish("P0", tr, f"separation power {min(power) if power else 0} distinguishing probes (minimum over pairs)")

    # P1: subjective update is the convex combination of objective ones
    tr = _Tracker(tol)
    multi = [(a, d) for a in obs for d in _subsets(len(sys.spectrum(a)), 2)]
    if multi:
        for _ in range(cfg.samples):
            st = probes[int(rng.integers(len(probes)))]
            a, d = multi[int(rng.integers(len(multi)))]
            length = int(rng.integers(1, max(cfg.max_sequence, 2)))
            steps = []
            for _ in range(length):
                b = obs[int(rng.integers(len(obs)))]
                k = len(sys.spectrum(b))
                size = int(rng.integers(1, k + 1))
                steps.append((b, tuple(sorted(rng.choice(k, size=size, replace=False).tolist()))))
            lhs, rhs = convexity_gap(sys, st, a, d, steps)
            tr.see(Witness("convexity", st, (a,), d, lhs, rhs, abs(lhs - rhs), {"steps": steps}))
    finish("P1", tr, f"{tr.checks} sampled sequences")

    # P2: repeatability, idempotence, self-compatibility (repeatability witnesses preferred)
    tr = _Tracker(tol)
    for st in probes:
        for a in obs:
            got, want, ij = repeatability_gap(sys, st, a)
            tr.see(Witness("repeatability", st, (a,), ij, got, want, abs(got - want)))
    for st in probes[: 1 + len(sys.declared_states)]:
        for a in obs:
            for i in range(len(sys.spectrum(a))):
                s1 = sys.objective_update(st, a, i)
                s2 = sys.objective_update(s1, a, i)
                g = state_gap(sys, s1, s2, obs)
                tr.see(Witness("idempotence", st, (a,), (i,), g, 0.0, g), rank=1)
            for d1 in _subsets(len(sys.spectrum(a))):
                for d2 in _subsets(len(sys.spectrum(a))):
                    p = _dist(sys, st, a)
                    p2 = float(sum(p[k] for k in d2))
                    if p2 <= sys.tol["zero_probability"]:
                        continue
                    got = chain_probability(sys, sys.update(st, a, d2), [(a, d1)])
                    want = float(sum(p[k] for k in set(d1) & set(d2))) / p2
                    tr.see(Witness("self_compatibility", st, (a,), (d1, d2), got, want, abs(got - want)), rank=1)
    finish("P2", tr)

    # P3: mixed state uniform, refinements exist, closure on demanded functions
    tr = _Tracker(tol)
    for n_obs in obs:
        if sys.is_nondegenerate(n_obs):
            got, want, k = uniformity_gap(sys, n_obs)
            tr.see(Witness("uniformity", MIXED, (n_obs,), (k,), got, want, abs(got - want)))
    for a in obs:
        if not sys.is_nondegenerate(a):
            cone = find_cone(sys, [a])
            ok = cone is not None and sys.is_nondegenerate(cone.apex)
            tr.see(Witness("refinement", None, (a,), (), float(ok), 1.0, 0.0 if ok else 1.0))
    demanded = 0
    for a in obs:
        k = len(sys.spectrum(a))
        for _ in range(2):
            values = tuple(float(v) for v in rng.integers(-2, 3, size=k))
            demanded += 1
            for st in probes[:8]:
                g = closure_gap(sys, st, a, values)
                tr.see(Witness("closure", st, (a,), values, g, 0.0, g))
    finish("P3", tr, f"closure checked on demanded functions only ({demanded})")

    # P4: joint pushforward, update composition, equivalent objective events
    if not blocked("P4"):
        tr = _Tracker(tol)
        pairs = [(a, b) for a, b in itertools.combinations(obs, 2) if find_cone(sys, [a, b]) is not None]
        for a, b in pairs:
            for st in probes:
                got, want, ij = pushforward_gap(sys, st, a, b)
                tr.see(Witness("pushforward", st, (a, b), ij, got, want, abs(got - want)))
            for st in probes[: 1 + len(sys.declared_states)]:
                for i in range(len(sys.spectrum(a))):
                    for j in range(len(sys.spectrum(b))):
                        g = composition_gap(sys, st, a, i, b, j, obs)
                        tr.see(Witness("composition", st, (a, b), (i, j), g, 0.0, g))
        for a in obs:
            for st in probes[: 1 + len(sys.declared_states)]:
                for i in range(len(sys.spectrum(a))):
                    g = indicator_update_gap(sys, st, a, i, obs)
                    tr.see(Witness("indicator_update", st, (a,), (i,), g, 0.0, g))
        finish("P4", tr, f"{len(pairs)} compatible pairs")

    # P5: Bayes-rule pairs must have a cone
    if not blocked("P5"):
        tr = _Tracker(tol)
        for a, b in itertools.combinations(obs, 2):
            g = bayes_gap(sys, a, b, probes)
            if g <= tol:
                ok = find_cone(sys, [a, b]) is not None
                tr.see(Witness("bayes_without_cone", None, (a, b), (), g, 0.0, 0.0 if ok else 1.0,
                               {"probes": probes}))
        finish("P5", tr)

    # P6: certainty implies compatibility, certainty on a nondegenerate observable implies purity
    if not blocked("P6"):
        tr = _Tracker(tol)
        for nd in [o for o in obs if sys.is_nondegenerate(o)]:
            for v in range(len(sys.spectrum(nd))):
                f = sys.indicator(nd, [sys.spectrum(nd)[v]])
                st = projective_state(sys, f)
                tr.see(Witness("certainty_purity", st, (nd,), (v,), purity_flag(sys, st), 0.0,
                               purity_flag(sys, st)))
                for a in obs:
                    for i in range(len(sys.spectrum(a))):
                        if is_certain(sys, st, a, i, tol):
                            ok = find_cone(sys, [f, a]) is not None
                            tr.see(Witness("eigenstate_compatibility", st, (f, a), (i,), float(ok), 1.0,
                                           0.0 if ok else 1.0))
        for st in probes:
            for nd in [o for o in obs if sys.is_nondegenerate(o)]:
                for v in range(len(sys.spectrum(nd))):
                    if is_certain(sys, st, nd, v, tol):
                        tr.see(Witness("certainty_purity", st, (nd,), (v,), purity_flag(sys, st), 0.0,
                                       purity_flag(sys, st)))
        finish("P6", tr)

    # P7: transition probabilities symmetric; interference on supplied bases
    if not blocked("P7"):
        # supplied handles define the table on their own; otherwise use the
        # eigenprojections of every nondegenerate observable
        handles = list(cfg.handles or [])
        if not handles:
            for nd in [o for o in obs if sys.is_nondegenerate(o)]:
                handles += [sys.indicator(nd, [v]) for v in sys.spectrum(nd)]
        handles = list(dict.fromkeys(handles))
        if not handles:
            results["P7"] = PostulateResult("P7", "skipped", 0.0, None, 0, "no rank-1 handles derivable")
        else:
            table = transition_table(sys, handles)
            bases = cfg.bases or [handles[: sys.dimension]]
            rep = check_transition_postulate(table, bases, tol)
            tr = _Tracker(tol)
            for i, j in itertools.product(range(len(handles)), repeat=2):
                g = abs(table.P[i, j] - table.P[j, i])
                tr.see(Witness("symmetry", None, (handles[i], handles[j]), (), float(table.P[i, j]),
                               float(table.P[j, i]), g, {"handles": handles}))
            inter = _Tracker(tol)
            for basis, res, wit in rep.interference:
                if wit is None:
                    inter.checks += 1
                    continue
                idx = [handles.index(b) for b in basis]
                e, f = handles.index(wit[0]), handles.index(wit[1])
                s = sum(np.sqrt(max(table.P[e, g], 0) * max(table.P[g, f], 0)) for g in idx) ** 2
                inter.see(Witness("interference", None, wit, tuple(basis), float(s), float(table.P[e, f]),
                                  interference_residual(table.P, e, f, idx), {"handles": handles}))
            if tr.failed:
                finish("P7", tr)
            elif inter.failed:
                results["P7"] = PostulateResult("P7", "documented-violation", inter.worst, inter.witness,
                                                tr.checks + inter.checks,
                                                "symmetry holds; interference identity violated on a supplied basis")
            else:
                tr.checks += inter.checks
                tr.worst = max(tr.worst, inter.worst)
                finish("P7", tr, f"{len(bases)} bases")

    # P8: objective updates keep pure states pure
    if not blocked("P8"):
        tr = _Tracker(tol)
        pure = [s for s in probes if sys.is_pure(s)]
        for st in pure:
            for a in obs:
                for i in range(len(sys.spectrum(a))):
                    if _dist(sys, st, a)[i] <= sys.tol["zero_probability"]:
                        continue
                    nxt = sys.objective_update(st, a, i)
                    tr.see(Witness("purity", st, (a,), (i,), purity_flag(sys, nxt), 0.0, purity_flag(sys, nxt)))
        finish("P8", tr, f"{len(pure)} pure probes")

    ordered = [results[p] for p in POSTULATES]
    return AuditReport(ordered, cfg, len(probes))


# ---------------------------------------------------------------------------

def recompute_witness(sys: OperationalSystem, w: Witness) -> float:
    """Re-derive a witness residual from the system alone."""
    k = w.kind
    if k == "separation_observables":
        a, b = w.observables
        return max(float(np.max(np.abs(_dist(sys, s, a) - _dist(sys, s, b)))) for s in w.extra["probes"])
    if k == "separation_states":
        s, t = w.state
        return max(float(np.max(np.abs(_dist(sys, s, o) - _dist(sys, t, o)))) for o in w.observables)
    if k == "convexity":
        lhs, rhs = convexity_gap(sys, w.state, w.observables[0], w.values, w.extra["steps"])
        return abs(lhs - rhs)
    if k == "repeatability":
        got, want, _ = repeatability_gap(sys, w.state, w.observables[0])
        return abs(got - want)
    if k == "idempotence":
        a, i = w.observables[0], w.values[0]
        s1 = sys.objective_update(w.state, a, i)
        return state_gap(sys, s1, sys.objective_update(s1, a, i), sys.declared_observables)
    if k == "self_compatibility":
        a, (d1, d2) = w.observables[0], w.values
        p = _dist(sys, w.state, a)
        got = chain_probability(sys, sys.update(w.state, a, d2), [(a, d1)])
        want = float(sum(p[k_] for k_ in set(d1) & set(d2))) / float(sum(p[k_] for k_ in d2))
        return abs(got - want)
    if k == "uniformity":
        got, want, _ = uniformity_gap(sys, w.observables[0])
        return abs(got - want)
    if k == "refinement":
        cone = find_cone(sys, list(w.observables))
        return 0.0 if cone is not None and sys.is_nondegenerate(cone.apex) else 1.0
    if k == "closure":
        return closure_gap(sys, w.state, w.observables[0], w.values)
    if k == "pushforward":
        got, want, _ = pushforward_gap(sys, w.state, *w.observables)
        return abs(got - want)
    if k == "composition":
        a, b = w.observables
        return composition_gap(sys, w.state, a, w.values[0], b, w.values[1], sys.declared_observables)
    if k == "indicator_update":
        return indicator_update_gap(sys, w.state, w.observables[0], w.values[0], sys.declared_observables)
    if k == "bayes_without_cone":
        return 0.0 if find_cone(sys, list(w.observables)) is not None else 1.0
    if k in ("certainty_purity", "purity"):
        st = w.state
        if k == "purity":
            st = sys.objective_update(st, w.observables[0], w.values[0])
        return purity_flag(sys, st)
    if k == "eigenstate_compatibility":
        return 0.0 if find_cone(sys, list(w.observables)) is not None else 1.0
    if k in ("symmetry", "interference"):
        handles = w.extra["handles"]
        table = transition_table(sys, handles)
        e, f = handles.index(w.observables[0]), handles.index(w.observables[1])
        if k == "symmetry":
            return abs(table.P[e, f] - table.P[f, e])
        return interference_residual(table.P, e, f, [handles.index(b) for b in w.values])
    raise ValueError(f"unknown witness kind {k!r}")

"""Bounded ground-truth decision procedure.

For a fixed transition path the intermediate counter vectors are linear in
the firing fractions (one variable per step), so deciding whether fractions
exist that realize the path and meet a target is a pure linear-rational
feasibility question.  Enumerating state-graph paths shortest-first and
checking each one yields an exact, one-sided oracle: a Witness is
definitive, NoWitnessWithin(bound) only rules out short runs.

Path enumeration prunes extensions of prefixes that are already infeasible;
this is sound because a prefix of a feasible run is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from . import lra
from .core import (
    AffineCVASS,
    Configuration,
    FiringSequence,
    Infeasible,
    RatVector,
    StateChainError,
    ZeroTestCVASS,
    run,
)


# ---------------------------------------------------------------------------
# Targets and answers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachExact:
    config: Configuration


@dataclass(frozen=True)
class Cover:
    config: Configuration


@dataclass(frozen=True)
class ReachState:
    state: str


Target = Union[ReachExact, Cover, ReachState]


def target_state(target: Target) -> str:
    if isinstance(target, ReachState):
        return target.state
    return target.config.state


@dataclass(frozen=True)
class Witness:
    sequence: FiringSequence


@dataclass(frozen=True)
class NoWitnessWithin:
    bound: int


OracleAnswer = Union[Witness, NoWitnessWithin]


# ---------------------------------------------------------------------------
# Per-path feasibility
# ---------------------------------------------------------------------------

class _SymVec:
    """Counter vector whose entries are affine forms over the alpha vars."""

    def __init__(self, const: Sequence[Fraction], lin: Sequence[dict[lra.Variable, Fraction]]):
        self.const = list(const)
        self.lin = [dict(m) for m in lin]

    @staticmethod
    def of(u: RatVector) -> "_SymVec":
        return _SymVec(list(u.values), [{} for _ in u.values])

    def entry(self, i: int) -> tuple[Fraction, dict[lra.Variable, Fraction]]:
        return self.const[i], self.lin[i]


def _apply_step(vec: _SymVec, matrix, delta, alpha_var) -> _SymVec:
    n = len(vec.const)
    const = []
    lin = []
    for r in range(n):
        row = matrix.row(r)
        c = sum((Fraction(a) * vec.const[j] for j, a in enumerate(row) if a), Fraction(0))
        m: dict[lra.Variable, Fraction] = {}
        for j, a in enumerate(row):
            if a == 0:
                continue
            fa = Fraction(a)
            for v, q in vec.lin[j].items():
                m[v] = m.get(v, Fraction(0)) + fa * q
        if delta[r] != 0 and alpha_var is not None:
            m[alpha_var] = m.get(alpha_var, Fraction(0)) + Fraction(delta[r])
        const.append(c)
        lin.append({v: q for v, q in m.items() if q != 0})
    return _SymVec(const, lin)


def _add_row(system: lra.LinearSystem, lin: dict, const: Fraction, rel: str,
             bound: Fraction) -> None:
    # lin + const REL bound  ->  lin REL bound - const
    system.add(lin, rel, bound - const)


@dataclass
class PathSystem:
    """The LRA encoding of one fixed transition path."""

    system: lra.LinearSystem
    alphas: list[lra.Variable | None]  # None for zero-test edges
    final: _SymVec


def build_path_system(machine: AffineCVASS, u: RatVector,
                      path: Sequence[int], target: Target | None,
                      start_state: str | None = None) -> PathSystem:
    """Constraints making `path` a valid run from u meeting `target`.

    Variables are the per-step fractions with 0 < alpha <= 1; every
    intermediate component is constrained non-negative via the closed-form
    prefix expressions.  `target` may be None to encode plain validity.
    """
    system = lra.LinearSystem()
    vec = _SymVec.of(u)
    state = start_state
    alphas: list[lra.Variable | None] = []
    for idx, tid in enumerate(path):
        t = machine.transition(tid)
        if state is not None and t.source != state:
            raise StateChainError(f"path breaks at index {idx}")
        state = t.target
        a = system.new_var(f"a{idx}")
        alphas.append(a)
        system.add_gt({a: 1}, 0)
        system.add_le({a: 1}, 1)
        vec = _apply_step(vec, t.matrix, t.delta, a)
        for i in range(machine.dimension):
            c, m = vec.entry(i)
            _add_row(system, {v: -q for v, q in m.items()}, -c, lra.LE, Fraction(0))
    if target is not None and not isinstance(target, ReachState):
        goal = target.config.values
        rel = lra.EQ if isinstance(target, ReachExact) else None
        for i in range(machine.dimension):
            c, m = vec.entry(i)
            if rel == lra.EQ:
                _add_row(system, m, c, lra.EQ, goal[i])
            else:
                _add_row(system, {v: -q for v, q in m.items()}, -c, lra.LE, -goal[i])
    return PathSystem(system, alphas, vec)


def seq_feasible(machine: AffineCVASS, u: RatVector, path: Sequence[int],
                 target: Target | None, start_state: str | None = None,
                 ) -> FiringSequence | None:
    """Solve a fixed path; return the firing sequence or None when Unsat."""
    ps = build_path_system(machine, u, path, target, start_state)
    res = lra.solve(ps.system)
    if isinstance(res, lra.Unsat):
        return None
    return FiringSequence(
        (res.value(a), tid) for a, tid in zip(ps.alphas, path)
    )


# ---------------------------------------------------------------------------
# Bounded decision by path enumeration
# ---------------------------------------------------------------------------

def _value_range_reject(machine: AffineCVASS, u: RatVector,
                        path: Sequence[int], target: Target) -> bool:
    """Cheap necessary check on reachable value ranges for identity paths.

    For identity-class machines the final vector is u plus per-transition
    masses in (0, count]; a target outside the per-counter interval can be
    rejected without solving.  Conservative (never rejects a feasible
    path); returns True when the path is certainly infeasible.
    """
    if isinstance(target, ReachState):
        return False
    for tid in path:
        if not machine.transition(tid).matrix.is_identity():
            return False
    counts: dict[int, int] = {}
    for tid in path:
        counts[tid] = counts.get(tid, 0) + 1
    goal = target.config.values
    for i in range(machine.dimension):
        hi = u[i]
        lo = u[i]
        for tid, k in counts.items():
            b = machine.transition(tid).delta[i]
            if b > 0:
                hi += k * b
            elif b < 0:
                lo += k * b
        if isinstance(target, ReachExact) and (goal[i] > hi or goal[i] < lo):
            return True
        if isinstance(target, Cover) and goal[i] > hi:
            return True
    return False


def bounded_decide(machine: AffineCVASS, cfg: Configuration, target: Target,
                   max_len: int = 8, collect_system=None) -> OracleAnswer:
    """First feasible witness among paths of length <= max_len.

    Paths are explored shortest-first and in transition-id order within a
    length, so the returned witness is deterministic.  For non-negative
    machines, prefix feasibility is decided by chaining support-abstraction
    edges, which is exact for runs without a value target; value targets
    are then checked per qualifying path by LRA.
    """
    from .core import support as _support
    from .statereach import successor_supports

    want_state = target_state(target)
    non_negative = all(
        x >= 0 for t in machine.transitions for row in t.matrix.entries for x in row
    )

    if cfg.state == want_state:
        empty_ok = (
            isinstance(target, ReachState)
            or (isinstance(target, ReachExact) and cfg.values == target.config.values)
            or (isinstance(target, Cover) and cfg.values.dominates(target.config.values))
        )
        if empty_ok:
            return Witness(FiringSequence())

    def finish(path: tuple[int, ...]) -> Witness | None:
        if _value_range_reject(machine, cfg.values, path, target):
            return None
        goal = None if isinstance(target, ReachState) else target
        seq = seq_feasible(machine, cfg.values, path, goal, cfg.state)
        if seq is None:
            return None
        if collect_system is not None:
            collect_system(
                build_path_system(machine, cfg.values, path, goal, cfg.state).system
            )
        return Witness(seq)

    # Frontier entries: (path, end state, reachable abstract supports).
    start_supp = frozenset([_support(cfg.values)])
    frontier: list[tuple[tuple[int, ...], str, frozenset]] = [
        ((), cfg.state, start_supp)
    ]
    state_dedupe = isinstance(target, ReachState)
    for _length in range(1, max_len + 1):
        nxt: list[tuple[tuple[int, ...], str, frozenset]] = []
        seen_keys: set = set()
        for path, state, supports in frontier:
            for t in machine.transitions_from(state):
                cand = path + (t.tid,)
                if non_negative:
                    succ = frozenset(
                        s2 for s in supports for s2 in successor_supports(t, s)
                    )
                    if not succ:
                        continue
                else:
                    succ = frozenset()
                    if seq_feasible(machine, cfg.values, cand, None, cfg.state) is None:
                        continue
                if t.target == want_state:
                    w = finish(cand)
                    if w is not None:
                        return w
                if state_dedupe and non_negative:
                    key = (t.target, succ)
                    if key in seen_keys:
                        continue
                    seen_keys.add(key)
                nxt.append((cand, t.target, succ))
        frontier = nxt
        if not frontier:
            break
    return NoWitnessWithin(max_len)


# ---------------------------------------------------------------------------
# Zero-test machines
# ---------------------------------------------------------------------------

def _zt_edges(machine: ZeroTestCVASS, state: str) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = []
    for t in machine.transitions:
        if t.source == state:
            out.append(("t", t))
    for z in machine.zero_tests:
        if z.source == state:
            out.append(("z", z))
    return out


def zt_path_system(machine: ZeroTestCVASS, u: RatVector,
                   path: Sequence[tuple[str, int]], target: Target | None,
                   one_bounded: bool = False) -> PathSystem:
    """Like build_path_system but with zero-test edges and a 1-bound flag.

    Path entries are ("t", tid) or ("z", zid).  A zero-test contributes the
    constraint prefix(counter) = 0 and no fraction variable; the 1-bounded
    flag additionally caps every component of every visited vector at 1.
    """
    system = lra.LinearSystem()
    vec = _SymVec.of(u)
    alphas: list[lra.Variable | None] = []
    if one_bounded and any(x > 1 for x in u.values):
        # start configuration already violates the bound
        ground = lra.LinearSystem()
        ground.add({}, lra.LE, -1)
        return PathSystem(ground, [], vec)
    for idx, (kind, eid) in enumerate(path):
        if kind == "z":
            z = machine.zero_tests[eid]
            c, m = vec.entry(z.counter)
            _add_row(system, m, c, lra.EQ, Fraction(0))
            alphas.append(None)
            continue
        t = machine.transitions[eid]
        a = system.new_var(f"a{idx}")
        alphas.append(a)
        system.add_gt({a: 1}, 0)
        system.add_le({a: 1}, 1)
        vec = _apply_step(vec, t.matrix, t.delta, a)
        for i in range(machine.dimension):
            c, m = vec.entry(i)
            _add_row(system, {v: -q for v, q in m.items()}, -c, lra.LE, Fraction(0))
            if one_bounded:
                _add_row(system, m, c, lra.LE, Fraction(1))
    if target is not None and not isinstance(target, ReachState):
        goal = target.config.values
        for i in range(machine.dimension):
            c, m = vec.entry(i)
            if isinstance(target, ReachExact):
                _add_row(system, m, c, lra.EQ, goal[i])
            else:
                _add_row(system, {v: -q for v, q in m.items()}, -c, lra.LE, -goal[i])
    return PathSystem(system, alphas, vec)


@dataclass(frozen=True)
class ZtWitness:
    """Witness over a zero-test machine: (kind, edge id, fraction|None)."""

    steps: tuple[tuple[str, int, Fraction | None], ...]


def replay_zerotest(machine: ZeroTestCVASS, cfg: Configuration,
                    steps: Sequence[tuple[str, int, Fraction | None]],
                    one_bounded: bool = False) -> Configuration | Infeasible:
    cur = cfg
    if one_bounded and any(x > 1 for x in cur.values.values):
        return Infeasible(index=0, reason="start above 1")
    for i, (kind, eid, alpha) in enumerate(steps):
        if kind == "z":
            z = machine.zero_tests[eid]
            if cur.state != z.source or cur.values[z.counter] != 0:
                return Infeasible(index=i, reason="zero-test failed")
            cur = Configuration(z.target, cur.values)
        else:
            t = machine.transitions[eid]
            if cur.state != t.source:
                return Infeasible(index=i, reason="state mismatch")
            out = t.matrix.mul_vector(cur.values) + t.delta_vector().scale(alpha)
            if not out.is_nonnegative():
                return Infeasible(index=i, reason="negative component")
            cur = Configuration(t.target, out)
        if one_bounded and any(x > 1 for x in cur.values.values):
            return Infeasible(index=i, reason="component above 1")
    return cur


def bounded_decide_zerotest(machine: ZeroTestCVASS, cfg: Configuration,
                            target: Target, max_len: int = 8,
                            one_bounded: bool = False,
                            ) -> ZtWitness | NoWitnessWithin:
    """Bounded decision over a zero-test machine.

    Zero-test edges count toward the length bound like ordinary steps.
    """
    want_state = target_state(target)

    def check(path: tuple[tuple[str, int], ...]) -> ZtWitness | None:
        ps = zt_path_system(machine, cfg.values, path, target, one_bounded)
        res = lra.solve(ps.system)
        if isinstance(res, lra.Unsat):
            return None
        steps = []
        for (kind, eid), a in zip(path, ps.alphas):
            steps.append((kind, eid, res.value(a) if a is not None else None))
        return ZtWitness(tuple(steps))

    if cfg.state == want_state:
        w = check(())
        if w is not None:
            ok = (
                isinstance(target, ReachState)
                or (isinstance(target, ReachExact) and cfg.values == target.config.values)
                or (isinstance(target, Cover) and cfg.values.dominates(target.config.values))
            )
            if ok:
                return w
    frontier: list[tuple[tuple[tuple[str, int], ...], str]] = [((), cfg.state)]
    for _length in range(1, max_len + 1):
        nxt = []
        for path, state in frontier:
            for kind, edge in _zt_edges(machine, state):
                eid = edge.tid if kind == "t" else edge.zid
                cand = path + ((kind, eid),)
                ps = zt_path_system(machine, cfg.values, cand, None, one_bounded)
                if isinstance(lra.solve(ps.system), lra.Unsat):
                    continue
                tgt_state = edge.target
                if tgt_state == want_state:
                    w = check(cand)
                    if w is not None:
                        return w
                nxt.append((cand, tgt_state))
        frontier = nxt
        if not frontier:
            break
    return NoWitnessWithin(max_len)


def verify_witness(machine: AffineCVASS, cfg: Configuration, target: Target,
                   seq: FiringSequence) -> bool:
    """Replay a witness and check it meets the target exactly."""
    trace = run(machine, cfg, seq)
    if isinstance(trace, Infeasible):
        return False
    final = trace[-1]
    if isinstance(target, ReachState):
        return final.state == target.state
    if isinstance(target, ReachExact):
        return final.state == target.config.state and final.values == target.config.values
    return final.state == target.config.state and final.values.dominates(
        target.config.values
    )

"""Reachability and coverability for identity-class machines.

The decision follows the classical support characterization of continuous
VASS reachability: a run from p(u) to q(v) with transition support S exists
iff (a) there is a positive mass assignment x on S with v = u + sum x_t b_t,
where additionally x_t <= 1 for every t that lies on no directed cycle of
the S-subgraph (such a transition is crossed exactly once by any covering
walk and each crossing carries at most fraction 1), (b) S admits a
first-occurrence order that a covering walk from p to q can realize while
feeding every additively decremented counter from supp(u) or from counters
incremented earlier, and (c) symmetrically backwards from supp(v) in the
reversed machine.  Supports are explored smallest-first by growing orders
directly, memoized on (used set, current state), instead of enumerating all
subsets of T.

Witness extraction builds an explicit walk: per strongly-connected blob of
the S-subgraph, an opening covering pass in admissible order, N discharge
passes, a closing pass in reversed backward order, then the bridge to the
next blob.  The fractions on the walk are solved exactly by LRA against the
exact target, the result is replayed, and any failure aborts loudly rather
than returning an unverified Yes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import lra, reductions
from .classify import ClassViolationError, require_identity
from .core import (
    AffineCVASS,
    Configuration,
    FiringSequence,
    Infeasible,
    RatVector,
    Transition,
    run,
    support,
)
from .oracle import ReachExact, seq_feasible
from .statereach import decremented, supp_minus, supp_plus


class WitnessError(RuntimeError):
    """A decision was reached but no verified witness could be assembled."""


class SearchBudgetExceeded(RuntimeError):
    pass


def supp_pump(t: Transition, x: int) -> frozenset[int]:
    """Counters y that can pump x through t: A(x,y) > 0 off-diagonal, or a
    diagonal entry above 1."""
    row = t.matrix.row(x)
    return frozenset(
        y for y, a in enumerate(row) if (a > 0 and y != x) or (a > 1 and y == x)
    )


# ---------------------------------------------------------------------------
# Machine views (forward / reversed) for the admissibility search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _View:
    """Transition data the admissibility conditions actually consume."""

    source: dict[int, str]
    target: dict[int, str]
    dec: dict[int, frozenset[int]]           # additively decremented counters
    inc: dict[int, frozenset[int]]           # additively incremented counters
    minus: dict[int, dict[int, frozenset[int]]]  # tid -> x -> supp^-_x
    pump: dict[int, dict[int, frozenset[int]]]   # tid -> x -> supp^p_x


def forward_view(machine: AffineCVASS) -> _View:
    d = machine.dimension
    return _View(
        source={t.tid: t.source for t in machine.transitions},
        target={t.tid: t.target for t in machine.transitions},
        dec={t.tid: decremented(t) for t in machine.transitions},
        inc={t.tid: supp_plus(t) for t in machine.transitions},
        minus={
            t.tid: {x: supp_minus(t, x) for x in range(d)}
            for t in machine.transitions
        },
        pump={
            t.tid: {x: supp_pump(t, x) for x in range(d)}
            for t in machine.transitions
        },
    )


def reversed_view(machine: AffineCVASS) -> _View:
    """View of the reversed machine: edges flipped, updates negated.

    Only meaningful for identity-class machines, where running a sequence
    backwards is firing the reversed transitions forwards.
    """
    require_identity(machine, "reversed admissibility view")
    d = machine.dimension
    dec = {
        t.tid: frozenset(x for x in range(d) if t.delta[x] > 0)
        for t in machine.transitions
    }
    inc = {
        t.tid: frozenset(x for x in range(d) if t.delta[x] < 0)
        for t in machine.transitions
    }
    singleton = {x: frozenset([x]) for x in range(d)}
    return _View(
        source={t.tid: t.target for t in machine.transitions},
        target={t.tid: t.source for t in machine.transitions},
        dec=dec,
        inc=inc,
        minus={t.tid: dict(singleton) for t in machine.transitions},
        pump={t.tid: {x: frozenset() for x in range(d)} for t in machine.transitions},
    )


def _reach_states(view: _View, start: str, allowed: frozenset[int]) -> frozenset[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for tid in allowed:
            if view.source[tid] == s and view.target[tid] not in seen:
                seen.add(view.target[tid])
                queue.append(view.target[tid])
    return frozenset(seen)


# ---------------------------------------------------------------------------
# Admissibility (first-occurrence orders)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityQuery:
    """Does a run from `anchor` with start support `start_support`, using
    exactly the transitions `transition_support` and ending at `end_state`,
    exist while pumping every counter in `pump_set`?"""

    anchor: str
    start_support: frozenset[int]
    transition_support: frozenset[int]
    pump_set: frozenset[int] = frozenset()
    end_state: str | None = None  # defaults to anchor (cyclic query)


def _saturate(view: _View, used: frozenset[int], opened: frozenset[int],
              ) -> frozenset[int]:
    """Close a positivity set under matrix pumping by used transitions.

    In a self-loop machine a counter made positive stays positive, and a
    used transition can always be refired with a tiny fraction, so any
    counter pumpable from the current positive set eventually becomes
    positive as well.
    """
    cur = set(opened)
    changed = True
    while changed:
        changed = False
        for tid in used:
            pump = view.pump[tid]
            for y, srcs in pump.items():
                if y not in cur and srcs & cur:
                    cur.add(y)
                    changed = True
    return frozenset(cur)


def pumpable_counters(view: _View, start_support: frozenset[int],
                      s: frozenset[int], dim: int) -> frozenset[int]:
    """Counters matrix-pumpable by some run over exactly s.

    Order-independent: the positive pool is supp(u), the additive
    increments of s, and its pump closure; y is pumpable when some
    transition can pump it from that pool.
    """
    grown = frozenset(start_support)
    for tid in s:
        grown |= view.inc[tid]
    grown = _saturate(view, s, grown)
    out = set()
    for y in range(dim):
        for tid in s:
            if view.pump[tid][y] & grown:
                out.add(y)
                break
    return frozenset(out)


def _fed(view: _View, tid: int, opened: frozenset[int]) -> bool:
    for y in view.dec[tid]:
        if not (view.minus[tid][y] & opened):
            return False
    return True


def _order_search(view: _View, anchor: str, start_support: frozenset[int],
                  s: frozenset[int], end_state: str,
                  budget: int = 200000) -> list[int] | None:
    """Find a first-occurrence order for exactly `s`, or None.

    Memoized on (used set, position); the feeding condition depends only on
    the set of already-used transitions, and path conditions only on the
    used set plus the current position, so the memoization is lossless.
    """
    if not s:
        return [] if end_state == anchor else None
    start_key = (frozenset(), anchor)
    parent: dict[tuple[frozenset[int], str], tuple | None] = {start_key: None}
    queue = deque([start_key])
    opened_cache: dict[frozenset[int], frozenset[int]] = {
        frozenset(): frozenset(start_support)
    }
    while queue:
        used, pos = queue.popleft()
        if len(parent) > budget:
            raise SearchBudgetExceeded(
                f"admissibility search exceeded {budget} states"
            )
        opened = opened_cache[used]
        reach_here = _reach_states(view, pos, used)
        if used == s:
            if end_state in reach_here:
                order = []
                key = (used, pos)
                while parent[key] is not None:
                    prev_key, tid = parent[key]
                    order.append(tid)
                    key = prev_key
                order.reverse()
                return order
            continue
        for tid in sorted(s - used):
            if view.source[tid] not in reach_here:
                continue
            if not _fed(view, tid, opened):
                continue
            nxt = (used | {tid}, view.target[tid])
            if nxt in parent:
                continue
            parent[nxt] = ((used, pos), tid)
            if nxt[0] not in opened_cache:
                opened_cache[nxt[0]] = _saturate(
                    view, nxt[0], opened | view.inc[tid]
                )
            queue.append(nxt)
    return None


def admissible(machine: AffineCVASS, query: AdmissibilityQuery,
               ) -> list[int] | None:
    """Total order on the transition support realizing the query, or None."""
    view = forward_view(machine)
    end = query.end_state if query.end_state is not None else query.anchor
    s = frozenset(query.transition_support)
    if query.pump_set:
        ok = pumpable_counters(view, query.start_support, s, machine.dimension)
        if not query.pump_set <= ok:
            return None
    return _order_search(view, query.anchor, query.start_support, s, end)


def build_admissible_run(machine: AffineCVASS, order: Sequence[int],
                         u: RatVector, pump_set: frozenset[int] = frozenset(),
                         end_state: str | None = None) -> FiringSequence:
    """Realize an admissible order as a concrete firing sequence.

    Two passes over the support: the first fires every transition once in
    order (with connectors through already-used transitions), choosing each
    fraction as half its enabling bound; the second repeats the covering
    walk so that every requested pumping event actually happens, then walks
    to the end state.  The caller replays the result to check the
    postconditions.
    """
    if not order:
        return FiringSequence()
    view = forward_view(machine)
    anchor = view.source[order[0]]
    end = end_state if end_state is not None else anchor

    def connector(pos: str, goal: str, allowed: frozenset[int]) -> list[int]:
        if pos == goal:
            return []
        prev: dict[str, tuple[str, int]] = {}
        seen = {pos}
        queue = deque([pos])
        while queue:
            st = queue.popleft()
            for tid in sorted(allowed):
                if view.source[tid] == st and view.target[tid] not in seen:
                    prev[view.target[tid]] = (st, tid)
                    if view.target[tid] == goal:
                        path = []
                        cur = goal
                        while cur != pos:
                            st2, tid2 = prev[cur]
                            path.append(tid2)
                            cur = st2
                        path.reverse()
                        return path
                    seen.add(view.target[tid])
                    queue.append(view.target[tid])
        raise WitnessError(f"no connector from {pos} to {goal}")

    walk: list[int] = []
    pos = anchor
    used: set[int] = set()
    for tid in order:
        walk.extend(connector(pos, view.source[tid], frozenset(used)))
        walk.append(tid)
        used.add(tid)
        pos = view.target[tid]
    full = frozenset(used)
    for tid in order:  # second pass: pumping and support saturation
        walk.extend(connector(pos, view.source[tid], full))
        walk.append(tid)
        pos = view.target[tid]
    walk.extend(connector(pos, end, full))

    firings = []
    cur = u
    state = anchor
    for tid in walk:
        t = machine.transition(tid)
        assert t.source == state
        au = t.matrix.mul_vector(cur)
        bound: Fraction | None = None
        for x in range(machine.dimension):
            if t.delta[x] < 0:
                cap = au[x] / Fraction(-t.delta[x])
                bound = cap if bound is None else min(bound, cap)
        if bound is not None and bound == 0:
            raise WitnessError(f"transition {tid} blocked during construction")
        alpha = Fraction(1) if bound is None else min(Fraction(1), bound / 2)
        firings.append((alpha, tid))
        cur = au + t.delta_vector().scale(alpha)
        state = t.target
    return FiringSequence(firings)


def run_pumps(machine: AffineCVASS, cfg: Configuration, seq: FiringSequence,
              y: int) -> bool:
    """Whether the replay of `seq` pumps counter y at some step."""
    trace = run(machine, cfg, seq)
    if isinstance(trace, Infeasible):
        return False
    for before, f in zip(trace[:-1], seq):
        t = machine.transition(f.tid)
        if supp_pump(t, y) & support(before.values):
            return True
    return False


# ---------------------------------------------------------------------------
# Reachability decision
# ---------------------------------------------------------------------------

def _cycle_transitions(view: _View, s: frozenset[int]) -> frozenset[int]:
    """Transitions of s lying on a directed cycle of the s-subgraph."""
    out = set()
    for tid in s:
        if view.source[tid] in _reach_states(view, view.target[tid], s):
            out.add(tid)
    return frozenset(out)


def _blob_structure(view: _View, s: frozenset[int], start: str, end: str,
                    fwd_order: Sequence[int],
                    ) -> list[tuple[frozenset[int], str, str, int | None]] | None:
    """Split the s-subgraph into the chain of strongly connected blobs.

    A covering walk crosses each non-cycle transition (bridge) exactly once,
    so the bridges appear along any realizable order in chain order.
    Returns per-blob (edge set, entry state, exit state, bridge tid) where
    the bridge leaves the blob toward the next one (None for the last), or
    None when the s-subgraph does not decompose into such a chain.
    """
    cyc = _cycle_transitions(view, s)
    bridge_chain = [t for t in fwd_order if t not in cyc]
    blobs: list[tuple[frozenset[int], str, str, int | None]] = []
    remaining = set(cyc)
    entry = start
    for bridge in bridge_chain + [None]:
        exit_state = end if bridge is None else view.source[bridge]
        fwd_reach = _reach_states(view, entry, cyc)
        edges = frozenset(
            t for t in remaining
            if view.source[t] in fwd_reach
            and entry in _reach_states(view, view.target[t], cyc)
        )
        if exit_state != entry and exit_state not in _reach_states(view, entry, edges):
            return None
        blobs.append((edges, entry, exit_state, bridge))
        remaining -= edges
        if bridge is not None:
            entry = view.target[bridge]
    if remaining:
        return None
    return blobs


@dataclass(frozen=True)
class ReachYes:
    witness: FiringSequence
    support_set: frozenset[int]
    flow: dict[int, Fraction]


@dataclass(frozen=True)
class ReachNo:
    pass


def _candidate_supports(view: _View, start: str, start_supp: frozenset[int],
                        end: str, tids: frozenset[int], budget: int,
                        ) -> Iterable[tuple[frozenset[int], list[int]]]:
    """Supports admitting a forward order, smallest-first with the order."""
    start_key = (frozenset(), start)
    parent: dict[tuple[frozenset[int], str], tuple | None] = {start_key: None}
    opened_cache = {frozenset(): frozenset(start_supp)}
    layer = [start_key]
    emitted: set[frozenset[int]] = set()
    while layer:
        nxt_layer = []
        for used, pos in layer:
            if used and used not in emitted and end in _reach_states(view, pos, used):
                order = []
                key = (used, pos)
                while parent[key] is not None:
                    prev_key, tid = parent[key]
                    order.append(tid)
                    key = prev_key
                order.reverse()
                emitted.add(used)
                yield used, order
        for used, pos in layer:
            opened = opened_cache[used]
            reach_here = _reach_states(view, pos, used)
            for tid in sorted(tids - used):
                if view.source[tid] not in reach_here:
                    continue
                if not _fed(view, tid, opened):
                    continue
                key = (used | {tid}, view.target[tid])
                if key in parent:
                    continue
                if len(parent) > budget:
                    raise SearchBudgetExceeded(
                        f"support search exceeded {budget} states"
                    )
                parent[key] = ((used, pos), tid)
                opened_cache[key[0]] = opened | view.inc[tid]
                nxt_layer.append(key)
        nxt_layer.sort(key=lambda k: (tuple(sorted(k[0])), k[1]))
        layer = nxt_layer


def _marking_system(machine: AffineCVASS, u: RatVector, v: RatVector,
                    s: frozenset[int], view: _View, start: str,
                    blobs) -> tuple[lra.LinearSystem, dict[int, lra.Variable]]:
    """Positive masses with the marking equality, cycle caps and non-negative
    blob-boundary prefixes."""
    system = lra.LinearSystem()
    xs = {tid: system.new_var(f"x{tid}") for tid in sorted(s)}
    cyc = _cycle_transitions(view, s)
    for tid in sorted(s):
        system.add_gt({xs[tid]: 1}, 0)
        if tid not in cyc:
            system.add_le({xs[tid]: 1}, 1)
    d = machine.dimension
    for i in range(d):
        coeffs = {}
        for tid in sorted(s):
            b = machine.transition(tid).delta[i]
            if b:
                coeffs[xs[tid]] = Fraction(b)
        system.add(coeffs, lra.EQ, v[i] - u[i])
    if blobs is not None:
        prefix: set[int] = set()
        for blob_edges, _entry, _exit, bridge in blobs:
            prefix |= set(blob_edges)
            groups = [frozenset(prefix)]
            if bridge is not None:
                prefix.add(bridge)
                groups.append(frozenset(prefix))
            for grp in groups:
                for i in range(d):
                    coeffs = {}
                    for tid in sorted(grp):
                        b = machine.transition(tid).delta[i]
                        if b:
                            coeffs[xs[tid]] = Fraction(-b)
                    system.add(coeffs, lra.LE, u[i])
    return system, xs


def _witness_walk(view: _View, s: frozenset[int], blobs,
                  fwd_order: Sequence[int], bwd_order: Sequence[int],
                  rounds: int) -> list[int] | None:
    """Explicit candidate walk: per blob, an opening pass in admissible
    order, `rounds` discharge passes, a closing pass in reversed backward
    order, then the bridge."""

    def connect(pos: str, goal: str, allowed: frozenset[int]) -> list[int] | None:
        if pos == goal:
            return []
        prev: dict[str, tuple[str, int]] = {}
        seen = {pos}
        queue = deque([pos])
        while queue:
            st = queue.popleft()
            for tid in sorted(allowed):
                if view.source[tid] == st and view.target[tid] not in seen:
                    prev[view.target[tid]] = (st, tid)
                    seen.add(view.target[tid])
                    queue.append(view.target[tid])
        if goal not in seen:
            return None
        path = []
        cur = goal
        while cur != pos:
            st2, tid2 = prev[cur]
            path.append(tid2)
            cur = st2
        path.reverse()
        return path

    def covering_pass(edges: frozenset[int], entry: str,
                      order: Sequence[int]) -> list[int] | None:
        pos = entry
        out: list[int] = []
        for tid in order:
            if tid not in edges:
                continue
            hop = connect(pos, view.source[tid], edges)
            if hop is None:
                return None
            out.extend(hop)
            out.append(tid)
            pos = view.target[tid]
        back = connect(pos, entry, edges)
        if back is None:
            return None
        out.extend(back)
        return out

    walk: list[int] = []
    for blob_edges, entry, exit_state, bridge in blobs:
        if blob_edges:
            opening = covering_pass(blob_edges, entry, fwd_order)
            closing = covering_pass(
                blob_edges, entry, [t for t in reversed(bwd_order)]
            )
            if opening is None or closing is None:
                return None
            walk.extend(opening)
            for _ in range(rounds):
                walk.extend(opening)
            walk.extend(closing)
        hop = connect(entry, exit_state, blob_edges)
        if hop is None:
            return None
        walk.extend(hop)
        if bridge is not None:
            walk.append(bridge)
    return walk


_ROUND_SCHEDULE = (0, 1, 2, 4, 8, 16, 32)


def reach(machine: AffineCVASS, source: Configuration, target: Configuration,
          budget: int = 200000) -> ReachYes | ReachNo:
    """Exact reachability decision with verified witness extraction."""
    require_identity(machine, "identity-class reachability solver")
    if source.values.dim != machine.dimension or target.values.dim != machine.dimension:
        raise ClassViolationError("configuration dimension mismatch")
    if source == target:
        return ReachYes(FiringSequence(), frozenset(), {})
    view = forward_view(machine)
    rview = reversed_view(machine)
    u, v = source.values, target.values
    tids = frozenset(t.tid for t in machine.transitions)
    for s, fwd_order in _candidate_supports(
        view, source.state, support(u), target.state, tids, budget
    ):
        bwd_order = _order_search(
            rview, target.state, support(v), s, source.state, budget
        )
        if bwd_order is None:
            continue
        blobs = _blob_structure(view, s, source.state, target.state, fwd_order)
        if blobs is None:
            continue
        system, xs = _marking_system(machine, u, v, s, view, source.state, blobs)
        res = lra.solve(system)
        if isinstance(res, lra.Unsat):
            continue
        flow = {tid: res.value(var) for tid, var in xs.items()}
        witness = _extract_witness(
            machine, view, source, target, s, blobs, fwd_order, bwd_order
        )
        return ReachYes(witness, s, flow)
    return ReachNo()


def _extract_witness(machine: AffineCVASS, view: _View, source: Configuration,
                     target: Configuration, s: frozenset[int], blobs,
                     fwd_order: Sequence[int], bwd_order: Sequence[int],
                     ) -> FiringSequence:
    goal = ReachExact(target)
    for rounds in _ROUND_SCHEDULE:
        walk = _witness_walk(view, s, blobs, fwd_order, bwd_order, rounds)
        if walk is None:
            break
        seq = seq_feasible(machine, source.values, walk, goal, source.state)
        if seq is not None:
            trace = run(machine, source, seq)
            if isinstance(trace, Infeasible):
                raise WitnessError("witness replay failed after LRA success")
            final = trace[-1]
            if final.state != target.state or final.values != target.values:
                raise WitnessError("witness missed the target after replay")
            return seq
    raise WitnessError(
        f"reachable per characterization (support {sorted(s)}) "
        "but no walk admitted an exact mass assignment"
    )


@dataclass(frozen=True)
class CoverYes:
    witness: FiringSequence


@dataclass(frozen=True)
class CoverNo:
    pass


def cover(machine: AffineCVASS, source: Configuration, target: Configuration,
          budget: int = 200000) -> CoverYes | CoverNo:
    """Coverability through the cover-to-reach compiler."""
    require_identity(machine, "identity-class coverability solver")
    compiled = reductions.compile_cover_to_reach(machine, target)
    res = reach(compiled.machine, source, compiled.target_config, budget)
    if isinstance(res, ReachNo):
        return CoverNo()
    # Everything from the first fresh transition onwards happens in the
    # compiler-added sink; the prefix is a run of the original machine.
    cut = next(
        (i for i, f in enumerate(res.witness) if f.tid >= len(machine.transitions)),
        len(res.witness),
    )
    witness = FiringSequence(res.witness.steps[:cut])
    trace = run(machine, source, witness)
    if isinstance(trace, Infeasible):
        raise WitnessError("cover witness failed to replay")
    final = trace[-1]
    if final.state != target.state or not final.values.dominates(target.values):
        raise WitnessError("cover witness does not dominate the target")
    return CoverYes(witness)

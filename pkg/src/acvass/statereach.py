"""State-reachability for non-negative machines via support abstraction.

A configuration is abstracted to (state, support).  For non-negative
matrices, whether a transition can fire and which counters stay positive
depends only on the support, so reachability of a control state coincides
with plain graph reachability in the finite abstraction.  The completeness
direction is constructive: an abstract edge is realized by firing with any
fraction below (A*u)(x) / |b(x)| for every additively decremented x.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .classify import ClassViolationError, require_non_negative
from .core import (
    AffineCVASS,
    Configuration,
    FiringSequence,
    Infeasible,
    Transition,
    run,
    support,
)


@dataclass(frozen=True)
class SupportNode:
    state: str
    supp: frozenset[int]

    def key(self) -> tuple[str, tuple[int, ...]]:
        return (self.state, tuple(sorted(self.supp)))


@dataclass(frozen=True)
class AbstractPath:
    """Edges (node, transition id) ending at `final`."""

    edges: tuple[tuple[SupportNode, int], ...]
    final: SupportNode


def supp_minus(t: Transition, x: int) -> frozenset[int]:
    """Counters whose positivity can pay for a decrement of x: row x of A."""
    return frozenset(y for y, a in enumerate(t.matrix.row(x)) if a > 0)


def supp_plus(t: Transition) -> frozenset[int]:
    """Counters additively incremented by the transition."""
    return frozenset(x for x, b in enumerate(t.delta) if b > 0)


def decremented(t: Transition) -> frozenset[int]:
    return frozenset(x for x, b in enumerate(t.delta) if b < 0)


def abstract_edge(t: Transition, s: frozenset[int], s_next: frozenset[int]) -> bool:
    """The three support-abstraction edge conditions, evaluated exactly."""
    d = len(t.delta)
    for x in range(d):
        b = t.delta[x]
        if b < 0 and not (supp_minus(t, x) & s):
            return False
        if b > 0 and x not in s_next:
            return False
    for x in s_next:
        if t.delta[x] <= 0 and not (supp_minus(t, x) & s):
            return False
    return True


def successor_supports(t: Transition, s: frozenset[int]) -> list[frozenset[int]]:
    """All supports s' with an abstract edge (s, t, s'), deterministically.

    The admissible s' form a lattice interval: they must contain every
    incremented counter and may otherwise contain exactly the counters whose
    supp_minus meets s.
    """
    d = len(t.delta)
    for x in range(d):
        if t.delta[x] < 0 and not (supp_minus(t, x) & s):
            return []
    lower = supp_plus(t)
    optional = sorted(
        x for x in range(d)
        if x not in lower and (supp_minus(t, x) & s)
    )
    out = []
    for mask in range(1 << len(optional)):
        extra = frozenset(
            optional[i] for i in range(len(optional)) if mask >> i & 1
        )
        out.append(lower | extra)
    out.sort(key=lambda f: (len(f), tuple(sorted(f))))
    return out


@dataclass(frozen=True)
class StateReachYes:
    path: AbstractPath


@dataclass(frozen=True)
class StateReachNo:
    pass


def solve_state_reach(machine: AffineCVASS, cfg: Configuration, q: str,
                      ) -> StateReachYes | StateReachNo:
    """BFS in the support abstraction from (cfg.state, supp(cfg.values)).

    Requires all matrices non-negative; raises ClassViolationError
    otherwise.  The search is breadth-first with lexicographic tie-breaks,
    so identical inputs give identical abstract paths.
    """
    require_non_negative(machine, "state-reachability solver")
    if q not in machine.states:
        raise ClassViolationError(f"unknown target state {q!r}")
    start = SupportNode(cfg.state, support(cfg.values))
    if cfg.state == q:
        return StateReachYes(AbstractPath((), start))
    seen: dict[tuple, tuple] = {start.key(): None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for t in machine.transitions_from(node.state):
            for s_next in successor_supports(t, node.supp):
                nxt = SupportNode(t.target, s_next)
                if nxt.key() in seen:
                    continue
                seen[nxt.key()] = (node, t.tid, nxt)
                if nxt.state == q:
                    edges = []
                    cur = nxt.key()
                    while seen[cur] is not None:
                        prev, tid, cur_node = seen[cur]
                        edges.append((prev, tid))
                        cur = prev.key()
                    edges.reverse()
                    return StateReachYes(AbstractPath(tuple(edges), nxt))
                queue.append(nxt)
    return StateReachNo()


def concretize(machine: AffineCVASS, cfg: Configuration, path: AbstractPath,
               ) -> FiringSequence:
    """Turn an abstract path into a concrete firing sequence.

    Each fraction is chosen as half the completeness bound
    min over decremented x of (A*u)(x) / |b(x)|, capped at 1.  The replay is
    asserted to succeed and to keep every abstract support covered.
    """
    if path.edges and path.edges[0][0].key() != SupportNode(
        cfg.state, support(cfg.values)
    ).key():
        raise ValueError("abstract path does not start at the configuration")
    firings = []
    cur = cfg
    for node, tid in path.edges:
        t = machine.transition(tid)
        au = t.matrix.mul_vector(cur.values)
        bound: Fraction | None = None
        for x in range(machine.dimension):
            if t.delta[x] < 0:
                cap = au[x] / Fraction(-t.delta[x])
                bound = cap if bound is None else min(bound, cap)
        alpha = Fraction(1) if bound is None else min(Fraction(1), bound / 2)
        if alpha <= 0:
            raise AssertionError("completeness bound collapsed to zero")
        firings.append((alpha, tid))
        nxt = t.matrix.mul_vector(cur.values) + t.delta_vector().scale(alpha)
        cur = Configuration(t.target, nxt)
    seq = FiringSequence(firings)
    trace = run(machine, cfg, seq)
    assert not isinstance(trace, Infeasible), "concretized path failed to replay"
    assert trace[-1].state == path.final.state
    for (node, _tid), reached in zip(path.edges, trace[:-1]):
        assert node.supp <= support(reached.values), "support fell below abstraction"
    assert path.final.supp <= support(trace[-1].values)
    return seq

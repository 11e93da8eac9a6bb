"""Executable compilers for the reduction gadgets.

Each compiler turns a source instance (Boolean program, zero-test machine,
reset machine, ...) into a target machine together with configuration
translation maps.  The compilers are exercised differentially: the source
is decided by an exact procedure (BFS for Boolean programs, the bounded
oracle otherwise) and compared against a decision on the compiled target.

Counter layouts follow the block scheme: simulating counter i of a
d-counter source inside a machine whose class matrix A is k x k uses a
block of k (or k+1) counters per source counter, with the "primary" slot at
the distinguished row/column of A and the remaining slots as dummies that
stay at zero (or as complementary counters that mirror the primary).
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .classify import profile
from .core import (
    AffineCVASS,
    Configuration,
    IntMatrix,
    RatVector,
    Transition,
    ZeroTest,
    ZeroTestCVASS,
    apply_at,
    identity,
    make_machine,
    product,
)


# ---------------------------------------------------------------------------
# Boolean programs
# ---------------------------------------------------------------------------

class BoolOp(enum.Enum):
    TEST = "test"
    SET = "set"


@dataclass(frozen=True)
class BoolTransition:
    source: str
    op: BoolOp
    value: int  # j in {0, 1}
    var: int    # i in 0..d-1
    target: str


@dataclass(frozen=True)
class BooleanProgram:
    states: tuple[str, ...]
    var_count: int
    transitions: tuple[BoolTransition, ...]

    def __post_init__(self):
        for t in self.transitions:
            if t.value not in (0, 1) or not 0 <= t.var < self.var_count:
                raise ValueError(f"malformed boolean transition {t}")


def bp_solve(bp: BooleanProgram, state: str, bits: Sequence[int],
             target_state: str) -> bool:
    """Exact state-reachability over the finite space Q x {0,1}^d."""
    start = (state, tuple(int(b) for b in bits))
    if state == target_state:
        return True
    seen = {start}
    queue = deque([start])
    while queue:
        st, vals = queue.popleft()
        for t in bp.transitions:
            if t.source != st:
                continue
            if t.op is BoolOp.TEST:
                if vals[t.var] != t.value:
                    continue
                nxt = (t.target, vals)
            else:
                nv = list(vals)
                nv[t.var] = t.value
                nxt = (t.target, tuple(nv))
            if nxt in seen:
                continue
            if nxt[0] == target_state:
                return True
            seen.add(nxt)
            queue.append(nxt)
    return False


# ---------------------------------------------------------------------------
# Compiled instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompiledInstance:
    machine: AffineCVASS
    source_config: Configuration | None = None
    target_config: Configuration | None = None
    target_state: str | None = None
    notes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CompiledZeroTest:
    machine: ZeroTestCVASS
    source_config: Configuration
    target_config: Configuration
    one_bounded: bool
    notes: dict = field(default_factory=dict)


def compile_cover_to_reach(machine: AffineCVASS, target: Configuration,
                           ) -> CompiledInstance:
    """Coverability to reachability: a fresh sink with decrement loops.

    cover(target) in the source equals reach(sink(target.values)) in the
    result.  Adds exactly d + 1 transitions.
    """
    sink = _fresh_state(machine.states, "drain")
    d = machine.dimension
    transitions = [
        (t.source, t.matrix, list(t.delta), t.target) for t in machine.transitions
    ]
    ident = identity(d)
    transitions.append((target.state, ident, [0] * d, sink))
    for i in range(d):
        delta = [0] * d
        delta[i] = -1
        transitions.append((sink, ident, delta, sink))
    out = make_machine(d, list(machine.states) + [sink], transitions)
    return CompiledInstance(
        machine=out,
        target_config=Configuration(sink, target.values),
        notes={"sink": sink, "original_transitions": len(machine.transitions)},
    )


def _fresh_state(existing: Iterable[str], base: str) -> str:
    names = set(existing)
    if base not in names:
        return base
    i = 0
    while f"{base}_{i}" in names:
        i += 1
    return f"{base}_{i}"


# ---------------------------------------------------------------------------
# Zero tests -> 1-bounded zero tests (scaling wrapper)
# ---------------------------------------------------------------------------

def compile_zerotest_to_onebounded(machine: ZeroTestCVASS, source: Configuration,
                                   target: Configuration) -> CompiledZeroTest:
    """Wrap an arbitrary zero-test instance into a 1-bounded one.

    Runs can be shrunk by any scale factor, so reachability (and
    coverability) of (C, C') equals 1-bounded reachability of the wrapped
    instance, which guesses the scale beta on a budget counter: two extra
    counters z (the remaining fraction budget) and zbar (the amount
    currently borrowed), plus a start/stop counter st.  Every original
    transition is split in two through a fresh state; the first half
    borrows its fraction from z, the second half pays it back.
    """
    d = machine.dimension
    z, zbar, st = d, d + 1, d + 2
    n = d + 3
    states = list(machine.states)
    init = _fresh_state(states, "start")
    states.append(init)
    final = _fresh_state(states, "stop")
    states.append(final)

    transitions: list[tuple[str, Sequence[int], str]] = []
    zero_tests: list[tuple[str, int, str]] = []
    for t in machine.transitions:
        mid = _fresh_state(states, f"half_{t.tid}")
        states.append(mid)
        first = [0] * n
        for i in range(d):
            first[i] = t.delta[i]
        first[z] = -1
        first[zbar] = 1
        second = [0] * n
        second[z] = 1
        second[zbar] = -1
        transitions.append((t.source, first, mid))
        transitions.append((mid, second, t.target))
    for zt in machine.zero_tests:
        zero_tests.append((zt.source, zt.counter, zt.target))

    # Deltas are integers, so the wrapper needs integral endpoint values.
    for cfg in (source, target):
        for x in cfg.values:
            if x.denominator != 1:
                raise ValueError(
                    "scaling wrapper requires integer endpoint counter values"
                )
    enter = [int(source.values[i]) for i in range(d)] + [1, 0, -1]
    leave = [-int(target.values[i]) for i in range(d)] + [-1, 0, 1]
    transitions.append((init, enter, source.state))
    transitions.append((target.state, leave, final))

    out = ZeroTestCVASS(
        dimension=n,
        states=tuple(states),
        transitions=tuple(
            Transition(i, src, identity(n), tuple(delta), tgt)
            for i, (src, delta, tgt) in enumerate(transitions)
        ),
        zero_tests=tuple(
            ZeroTest(i, src, c, tgt) for i, (src, c, tgt) in enumerate(zero_tests)
        ),
    )
    start_vals = [0] * n
    start_vals[st] = 1
    end_vals = [0] * n
    end_vals[st] = 1
    return CompiledZeroTest(
        machine=out,
        source_config=Configuration(init, RatVector(start_vals)),
        target_config=Configuration(final, RatVector(end_vals)),
        one_bounded=True,
        notes={"z": z, "zbar": zbar, "st": st, "init": init, "final": final},
    )


# ---------------------------------------------------------------------------
# 1-bounded zero tests -> resets (complementary counters)
# ---------------------------------------------------------------------------

def compile_onebounded_zerotest_to_reset(machine: ZeroTestCVASS,
                                         source: Configuration,
                                         target: Configuration,
                                         ) -> CompiledInstance:
    """Replace zero tests by resets, guarded by complementary counters.

    Every counter x gains a complement xbar with x + xbar = 1 along
    faithful runs; a reset of a non-zero x breaks the invariant forever, so
    covering the translated target forces resets to act only on zero
    counters, i.e. to behave as zero tests.  Sound for coverability of
    1-bounded instances only.
    """
    if any(x > 1 for x in source.values) or any(x > 1 for x in target.values):
        raise ValueError("reset compilation requires a 1-bounded instance")
    d = machine.dimension
    n = 2 * d
    ident = identity(n)
    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for t in machine.transitions:
        delta = [0] * n
        for i in range(d):
            delta[i] = t.delta[i]
            delta[d + i] = -t.delta[i]
        transitions.append((t.source, ident, delta, t.target))
    for zt in machine.zero_tests:
        reset = [[1 if (r == c and r != zt.counter) else 0 for c in range(n)]
                 for r in range(n)]
        transitions.append((zt.source, IntMatrix(reset), [0] * n, zt.target))

    out = make_machine(n, machine.states, transitions)

    def translate(cfg: Configuration) -> Configuration:
        vals = list(cfg.values) + [Fraction(1) - x for x in cfg.values]
        return Configuration(cfg.state, RatVector(vals))

    return CompiledInstance(
        machine=out,
        source_config=translate(source),
        target_config=translate(target),
        notes={"complement_offset": d},
    )


# ---------------------------------------------------------------------------
# Resets -> zero-row / zero-column matrices
# ---------------------------------------------------------------------------

def _reset_counter(t: Transition) -> int | None:
    """The single counter reset by a normalized reset transition, if any."""
    m = t.matrix
    n = m.dim
    resets = [
        i for i in range(n)
        if m[i, i] == 0 and all(m[i, j] == 0 for j in range(n))
    ]
    if not resets:
        return None
    if len(resets) > 1 or any(x != 0 for x in t.delta):
        raise ValueError(
            f"transition {t.tid} is not normalized (one reset, zero delta)"
        )
    for i in range(n):
        if i not in resets:
            row_ok = all(m[i, j] == (1 if j == i else 0) for j in range(n))
            if not row_ok:
                raise ValueError(f"transition {t.tid} is not a plain reset")
    return resets[0]


def normalize_resets(machine: AffineCVASS) -> AffineCVASS:
    """Split transitions so each resets at most one counter with zero delta."""
    d = machine.dimension
    states = list(machine.states)
    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    ident = identity(d)
    for t in machine.transitions:
        m = t.matrix
        reset_rows = [
            i for i in range(d)
            if all(m[i, j] == 0 for j in range(d))
        ]
        plain = all(
            i in reset_rows or all(m[i, j] == (1 if j == i else 0) for j in range(d))
            for i in range(d)
        )
        if not plain:
            raise ValueError(f"transition {t.tid} is not a reset matrix")
        if not reset_rows:
            transitions.append((t.source, ident, list(t.delta), t.target))
            continue
        pos = t.source
        for k, i in enumerate(reset_rows):
            reset = [[1 if (r == c and r != i) else 0 for c in range(d)]
                     for r in range(d)]
            mid = t.target if k == len(reset_rows) - 1 and not any(t.delta) else (
                _fresh_state(states, f"norm_{t.tid}_{k}")
            )
            if mid != t.target:
                states.append(mid)
            transitions.append((pos, IntMatrix(reset), [0] * d, mid))
            pos = mid
        if pos != t.target:
            transitions.append((pos, ident, list(t.delta), t.target))
    return make_machine(d, states, transitions)


def compile_reset_to_zero_row_col(machine: AffineCVASS, a: IntMatrix,
                                  j: int | None = None) -> CompiledInstance:
    """Simulate resets with any matrix carrying a zero row or zero column.

    Counter i of the source lives at slot j + i*k of the target (row case:
    multiplying by A always zeroes row j; column case: A kills a vector
    supported on column j, provided the block's other slots are zero).
    """
    machine = normalize_resets(machine)
    p = profile(a)
    if j is None:
        if p.zero_rows:
            j = min(p.zero_rows)
        elif p.zero_cols:
            j = min(p.zero_cols)
        else:
            raise ValueError("matrix has no zero row or column")
    row_case = j in p.zero_rows
    if not row_case and j not in p.zero_cols:
        raise ValueError(f"index {j} is neither a zero row nor a zero column")
    if not p.non_negative:
        raise ValueError("class matrix must be non-negative")
    d = machine.dimension
    k = a.dim
    n = d * k
    primary = [j + i * k for i in range(d)]
    ident = identity(n)

    def ext_vec(vals: Sequence) -> list:
        out = [0] * n
        for i, x in enumerate(vals):
            out[primary[i]] = x
        return out

    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for t in machine.transitions:
        r = _reset_counter(t)
        if r is None:
            transitions.append((t.source, ident, ext_vec(t.delta), t.target))
        else:
            transitions.append(
                (t.source, apply_at(n, a, r * k), [0] * n, t.target)
            )
    out = make_machine(n, machine.states, transitions)
    return CompiledInstance(
        machine=out,
        notes={
            "primary_counters": primary,
            "zero_index": j,
            "case": "row" if row_case else "column",
            "block": k,
        },
    )


def translate_ext(compiled: CompiledInstance, cfg: Configuration) -> Configuration:
    primary = compiled.notes["primary_counters"]
    n = compiled.machine.dimension
    vals = [Fraction(0)] * n
    for i, slot in enumerate(primary):
        vals[slot] = cfg.values[i]
    return Configuration(cfg.state, RatVector(vals))


# ---------------------------------------------------------------------------
# Zero tests -> negative-entry matrices
# ---------------------------------------------------------------------------

def compile_zerotest_to_negative(machine: ZeroTestCVASS, a: IntMatrix,
                                 ) -> CompiledInstance:
    """Simulate zero tests with a matrix carrying a negative entry.

    If A(i, j) < 0 then A applied to a vector supported on column j stays
    non-negative only when that entry is zero, which is exactly a zero
    test.  State-reachability transfers via the ext() embedding.
    """
    neg = [
        (i, j) for i in range(a.dim) for j in range(a.dim) if a[i, j] < 0
    ]
    if not neg:
        raise ValueError("matrix has no negative entry")
    _, j = neg[0]
    d = machine.dimension
    k = a.dim
    n = d * k
    primary = [j + i * k for i in range(d)]
    ident = identity(n)

    def ext_vec(vals: Sequence) -> list:
        out = [0] * n
        for i, x in enumerate(vals):
            out[primary[i]] = x
        return out

    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for t in machine.transitions:
        transitions.append((t.source, ident, ext_vec(t.delta), t.target))
    for zt in machine.zero_tests:
        transitions.append(
            (zt.source, apply_at(n, a, zt.counter * k), [0] * n, zt.target)
        )
    out = make_machine(n, machine.states, transitions)
    return CompiledInstance(
        machine=out,
        notes={"primary_counters": primary, "negative_column": j, "block": k},
    )


# ---------------------------------------------------------------------------
# 1-bounded zero tests -> weighted/overlapping matrices
# ---------------------------------------------------------------------------

def weighted_column(a: IntMatrix) -> int:
    """A column whose entries sum above 1 (exists for weighted/overlapping
    non-negative matrices without zero columns)."""
    for z in range(a.dim):
        if sum(a[i, z] for i in range(a.dim)) > 1:
            return z
    raise ValueError("no column sums above 1")


def compile_onebounded_zerotest_to_weighted(machine: ZeroTestCVASS,
                                            source: Configuration,
                                            target: Configuration,
                                            a: IntMatrix) -> CompiledInstance:
    """Simulate 1-bounded zero tests with a weighted/overlapping matrix.

    Multiplying a block by A strictly increases the block sum whenever the
    primary slot is positive; since good configurations have a fixed block
    sum of 1, reaching the (good) translated target forces every
    application of A to act on a zero primary slot.  Reachability only.
    """
    p = profile(a)
    if not p.non_negative or p.zero_rows or p.zero_cols:
        raise ValueError("matrix must be non-negative without zero rows/columns")
    z = weighted_column(a)
    d = machine.dimension
    k = a.dim
    n = d * (k + 1)
    primary = [z + i * (k + 1) for i in range(d)]
    complement = [(i + 1) * (k + 1) - 1 for i in range(d)]
    ident = identity(n)

    def ext_delta(delta: Sequence[int]) -> list[int]:
        out = [0] * n
        for i, x in enumerate(delta):
            out[primary[i]] = x
            out[complement[i]] = -x
        return out

    def translate(cfg: Configuration) -> Configuration:
        vals = [Fraction(0)] * n
        for i in range(d):
            vals[primary[i]] = cfg.values[i]
            vals[complement[i]] = Fraction(1) - cfg.values[i]
        return Configuration(cfg.state, RatVector(vals))

    for cfg in (source, target):
        if any(x > 1 for x in cfg.values):
            raise ValueError("weighted compilation requires a 1-bounded instance")

    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for t in machine.transitions:
        transitions.append((t.source, ident, ext_delta(t.delta), t.target))
    for zt in machine.zero_tests:
        transitions.append(
            (zt.source, apply_at(n, a, zt.counter * (k + 1)), [0] * n, zt.target)
        )
    out = make_machine(n, machine.states, transitions)
    return CompiledInstance(
        machine=out,
        source_config=translate(source),
        target_config=translate(target),
        notes={
            "primary_counters": primary,
            "complement_counters": complement,
            "weighted_column": z,
            "block": k + 1,
        },
    )


# ---------------------------------------------------------------------------
# Boolean programs -> reset machines
# ---------------------------------------------------------------------------

def compile_boolean_to_reset(bp: BooleanProgram) -> CompiledInstance:
    """Boolean program to a 2d-counter reset machine.

    Variable i valued j is encoded as counter j*d + i being positive.
    Tests decrement and re-increment the encoding counter through a fresh
    midpoint state; sets reset the opposite counter and increment the
    encoding counter.
    """
    d = bp.var_count
    n = 2 * d
    states = list(bp.states)
    ident = identity(n)
    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for idx, t in enumerate(bp.transitions):
        mid = _fresh_state(states, f"gad_{idx}")
        states.append(mid)
        enc = t.value * d + t.var
        other = (1 - t.value) * d + t.var
        if t.op is BoolOp.TEST:
            dec = [0] * n
            dec[enc] = -1
            inc = [0] * n
            inc[enc] = 1
            transitions.append((t.source, ident, dec, mid))
            transitions.append((mid, ident, inc, t.target))
        else:
            reset = [[1 if (r == c and r != other) else 0 for c in range(n)]
                     for r in range(n)]
            inc = [0] * n
            inc[enc] = 1
            transitions.append((t.source, IntMatrix(reset), inc, mid))
            transitions.append((mid, ident, [0] * n, t.target))
    out = make_machine(n, states, transitions)
    return CompiledInstance(machine=out, notes={"var_count": d})


def boolean_start_config(compiled: CompiledInstance, state: str,
                         bits: Sequence[int]) -> Configuration:
    d = compiled.notes["var_count"]
    n = compiled.machine.dimension
    vals = [Fraction(0)] * n
    block = compiled.notes.get("block")
    for i, b in enumerate(bits):
        if block is None:
            vals[int(b) * d + i] = Fraction(1)
        else:
            slot = compiled.notes["positive"][i] if b else compiled.notes["negative"][i]
            vals[slot] = Fraction(1)
    return Configuration(state, RatVector(vals))


# ---------------------------------------------------------------------------
# Boolean programs -> permutation machines
# ---------------------------------------------------------------------------

def matrix_order(p: IntMatrix) -> int:
    """Least n >= 1 with p^n = identity."""
    cur = p
    n = 1
    while not cur.is_identity():
        cur = product(cur, p)
        n += 1
        if n > 10_000:
            raise ValueError("matrix order too large (not a permutation?)")
    return n


def compile_boolean_to_perm(bp: BooleanProgram, p_sigma: IntMatrix,
                            ) -> CompiledInstance:
    """Boolean program to a permutation-class machine.

    Variable i true is encoded as the block-i slot z being positive, false
    as slot sigma(z).  A set gadget branches on which slot can be
    decremented and, when the value flips, transfers the content between
    the two slots by applying the permutation (or its inverse power).
    """
    prof = profile(p_sigma)
    if not prof.is_permutation or prof.is_identity:
        raise ValueError("need a non-trivial permutation matrix")
    k = p_sigma.dim
    sigma = [next(j for j in range(k) if p_sigma[i, j] == 1) for i in range(k)]
    z = next(i for i in range(k) if sigma[i] != i)
    n_ord = matrix_order(p_sigma)
    p_inv = identity(k)
    for _ in range(n_ord - 1):
        p_inv = product(p_inv, p_sigma)

    d = bp.var_count
    n = d * k
    positive = [z + i * k for i in range(d)]
    negative = [sigma[z] + i * k for i in range(d)]
    states = list(bp.states)
    ident = identity(n)
    transitions: list[tuple[str, IntMatrix, list[int], str]] = []
    for idx, t in enumerate(bp.transitions):
        enc = positive[t.var] if t.value == 1 else negative[t.var]
        if t.op is BoolOp.TEST:
            mid = _fresh_state(states, f"gad_{idx}")
            states.append(mid)
            dec = [0] * n
            dec[enc] = -1
            inc = [0] * n
            inc[enc] = 1
            transitions.append((t.source, ident, dec, mid))
            transitions.append((mid, ident, inc, t.target))
        else:
            # two-branch gadget: probe which slot is occupied, restore it,
            # then transfer if the value must flip.  With the row convention
            # P(i, j) = 1 iff sigma(i) = j, applying P_sigma moves the mass
            # from slot sigma(z) to slot z, and its inverse power the other
            # way around.
            transfer = apply_at(n, p_sigma if t.value == 1 else p_inv, t.var * k)
            for branch, slot in (("pos", positive[t.var]), ("neg", negative[t.var])):
                m1 = _fresh_state(states, f"gad_{idx}_{branch}a")
                states.append(m1)
                m2 = _fresh_state(states, f"gad_{idx}_{branch}b")
                states.append(m2)
                dec = [0] * n
                dec[slot] = -1
                inc = [0] * n
                inc[slot] = 1
                transitions.append((t.source, ident, dec, m1))
                transitions.append((m1, ident, inc, m2))
                keep_branch = (branch == "pos") == (t.value == 1)
                mat = ident if keep_branch else transfer
                transitions.append((m2, mat, [0] * n, t.target))
    out = make_machine(n, states, transitions)
    return CompiledInstance(
        machine=out,
        notes={
            "var_count": d,
            "block": k,
            "positive": positive,
            "negative": negative,
            "perm_order": n_ord,
        },
    )

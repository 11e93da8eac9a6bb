"""Data model and operational semantics of affine continuous VASS.

A machine owns d counters ranging over non-negative rationals.  A transition
(p, A, b, q) moves control from p to q and replaces the counter vector u by
A*u + alpha*b for a firing fraction alpha in (0, 1].  The step is enabled
only when the resulting vector is componentwise non-negative.

All arithmetic is exact (`fractions.Fraction`); there is no floating point
and no tolerance anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rat = Union[int, Fraction]


class DimensionError(ValueError):
    """Usage error: mismatched dimensions or malformed indices."""


class StateChainError(ValueError):
    """A firing sequence does not chain correctly through the state graph."""


def _frac(x: Rat) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected exact rational, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# Vectors and matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatVector:
    """Immutable vector of exact rationals."""

    values: tuple[Fraction, ...]

    def __init__(self, values: Iterable[Rat]):
        object.__setattr__(self, "values", tuple(_frac(v) for v in values))

    @property
    def dim(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> Fraction:
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __add__(self, other: "RatVector") -> "RatVector":
        self._check_dim(other)
        return RatVector(a + b for a, b in zip(self.values, other.values))

    def __sub__(self, other: "RatVector") -> "RatVector":
        self._check_dim(other)
        return RatVector(a - b for a, b in zip(self.values, other.values))

    def scale(self, alpha: Rat) -> "RatVector":
        a = _frac(alpha)
        return RatVector(a * v for v in self.values)

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self.values)

    def dominates(self, other: "RatVector") -> bool:
        self._check_dim(other)
        return all(a >= b for a, b in zip(self.values, other.values))

    def _check_dim(self, other: "RatVector") -> None:
        if self.dim != other.dim:
            raise DimensionError(f"vector dims {self.dim} != {other.dim}")

    @staticmethod
    def zero(dim: int) -> "RatVector":
        return RatVector([0] * dim)

    @staticmethod
    def unit(dim: int, i: int) -> "RatVector":
        if not 0 <= i < dim:
            raise DimensionError(f"unit index {i} out of range for dim {dim}")
        return RatVector([1 if j == i else 0 for j in range(dim)])


def support(v: RatVector) -> frozenset[int]:
    """Indices with non-zero value."""
    return frozenset(i for i, x in enumerate(v.values) if x != 0)


@dataclass(frozen=True)
class IntMatrix:
    """Square matrix over arbitrary-precision integers.

    Entry access is (row, column), zero-based.
    """

    entries: tuple[tuple[int, ...], ...]

    def __init__(self, entries: Iterable[Iterable[int]]):
        rows = tuple(tuple(int(x) for x in row) for row in entries)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise DimensionError("matrix must be square and non-empty")
        object.__setattr__(self, "entries", rows)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __getitem__(self, rc: tuple[int, int]) -> int:
        r, c = rc
        return self.entries[r][c]

    def row(self, r: int) -> tuple[int, ...]:
        return self.entries[r]

    def mul_vector(self, v: RatVector) -> RatVector:
        if v.dim != self.dim:
            raise DimensionError(f"matrix dim {self.dim} != vector dim {v.dim}")
        return RatVector(
            sum((Fraction(a) * x for a, x in zip(row, v.values)), Fraction(0))
            for row in self.entries
        )

    def is_identity(self) -> bool:
        return all(
            self.entries[i][j] == (1 if i == j else 0)
            for i in range(self.dim)
            for j in range(self.dim)
        )


def identity(n: int) -> IntMatrix:
    """The n x n identity matrix."""
    if n < 1:
        raise DimensionError("dimension must be positive")
    return IntMatrix([[1 if i == j else 0 for j in range(n)] for i in range(n)])


def perm_matrix(sigma: Sequence[int]) -> IntMatrix:
    """Matrix of a permutation, with entry (i, j) = 1 iff sigma[i] == j."""
    n = len(sigma)
    if sorted(sigma) != list(range(n)):
        raise DimensionError(f"not a permutation of 0..{n - 1}: {sigma}")
    return IntMatrix(
        [[1 if sigma[i] == j else 0 for j in range(n)] for i in range(n)]
    )


def ext(a: IntMatrix, n: int) -> IntMatrix:
    """Block-extend a k x k matrix with n fresh untouched counters."""
    if n < 1:
        raise DimensionError("extension size must be positive")
    k = a.dim
    out = [[0] * (k + n) for _ in range(k + n)]
    for i in range(k):
        for j in range(k):
            out[i][j] = a.entries[i][j]
    for i in range(k, k + n):
        out[i][i] = 1
    return IntMatrix(out)


def apply_at(n: int, a: IntMatrix, i: int) -> IntMatrix:
    """Apply a k x k matrix to counters i .. i+k-1 of an n-counter space.

    Zero-based: counters outside [i, i+k) are left unchanged.
    """
    k = a.dim
    if not (k <= n and 0 <= i and i + k <= n):
        raise DimensionError(f"apply_at(n={n}, k={k}, i={i}) out of range")
    out = [[1 if r == c else 0 for c in range(n)] for r in range(n)]
    for r in range(k):
        for c in range(n):
            out[i + r][c] = a.entries[r][c - i] if i <= c < i + k else 0
    return IntMatrix(out)


def renamed(a: IntMatrix, sigma: Sequence[int]) -> IntMatrix:
    """Rename counters by sigma, apply the matrix, rename back.

    Entry form: renamed(A, sigma)(i, j) = A(sigma[i], sigma[j]).
    """
    n = a.dim
    if sorted(sigma) != list(range(n)):
        raise DimensionError(f"not a permutation of 0..{n - 1}: {sigma}")
    return IntMatrix(
        [[a.entries[sigma[i]][sigma[j]] for j in range(n)] for i in range(n)]
    )


def product(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    """Matrix product a * b."""
    if a.dim != b.dim:
        raise DimensionError(f"matrix dims {a.dim} != {b.dim}")
    n = a.dim
    bt = list(zip(*b.entries))
    return IntMatrix(
        [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a.entries]
    )


def shift_perm(n: int, k: int, i: int) -> tuple[int, ...]:
    """Permutation relating apply_at and renamed-of-ext.

    Satisfies apply_at(n, A, i) == renamed(ext(A, n - k), shift_perm(n, k, i))
    for every k x k matrix A with k < n (checked exhaustively in the tests).
    """
    inv = [(i + j) % n for j in range(n)]
    out = [0] * n
    for j, tgt in enumerate(inv):
        out[tgt] = j
    return tuple(out)


# ---------------------------------------------------------------------------
# Machines, configurations and firing sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    """One transition (source, A, b, target) with a stable integer id."""

    tid: int
    source: str
    matrix: IntMatrix
    delta: tuple[int, ...]
    target: str

    def delta_vector(self) -> RatVector:
        return RatVector(self.delta)


@dataclass(frozen=True)
class AffineCVASS:
    """An affine continuous VASS: states, dimension and transitions."""

    dimension: int
    states: tuple[str, ...]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("dimension must be positive")
        declared = set(self.states)
        for t in self.transitions:
            if t.source not in declared or t.target not in declared:
                raise ValueError(f"transition {t.tid} uses undeclared state")
            if t.matrix.dim != self.dimension or len(t.delta) != self.dimension:
                raise DimensionError(f"transition {t.tid} has wrong dimension")
        if [t.tid for t in self.transitions] != list(range(len(self.transitions))):
            raise ValueError("transition ids must be 0..n-1 in order")

    def transition(self, tid: int) -> Transition:
        return self.transitions[tid]

    def transitions_from(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]


def make_machine(dimension: int, states: Iterable[str],
                 transitions: Iterable[tuple[str, IntMatrix, Sequence[int], str]],
                 ) -> AffineCVASS:
    """Build a machine assigning transition ids in declaration order."""
    ts = tuple(
        Transition(i, src, mat, tuple(int(x) for x in delta), tgt)
        for i, (src, mat, delta, tgt) in enumerate(transitions)
    )
    return AffineCVASS(dimension, tuple(states), ts)


@dataclass(frozen=True)
class Configuration:
    """A control state plus non-negative counter values."""

    state: str
    values: RatVector

    def __post_init__(self):
        if not self.values.is_nonnegative():
            raise ValueError(f"negative counter value in {self.values.values}")


@dataclass(frozen=True)
class Firing:
    """A single firing: fraction in (0, 1] and a transition id."""

    alpha: Fraction
    tid: int

    def __post_init__(self):
        a = _frac(self.alpha)
        object.__setattr__(self, "alpha", a)
        if not (0 < a <= 1):
            raise ValueError(f"firing fraction {a} outside (0, 1]")


@dataclass(frozen=True)
class FiringSequence:
    """A sequence of (fraction, transition id) firings."""

    steps: tuple[Firing, ...]

    def __init__(self, steps: Iterable[Union[Firing, tuple[Rat, int]]] = ()):
        norm = tuple(
            s if isinstance(s, Firing) else Firing(_frac(s[0]), int(s[1]))
            for s in steps
        )
        object.__setattr__(self, "steps", norm)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __add__(self, other: "FiringSequence") -> "FiringSequence":
        return FiringSequence(self.steps + other.steps)


@dataclass(frozen=True)
class Infeasible:
    """Result marker: the step (or the step at `index`) cannot fire."""

    index: int | None = None
    reason: str = ""


def step(machine: AffineCVASS, cfg: Configuration, alpha: Rat, tid: int,
         ) -> Configuration | Infeasible:
    """Fire one transition with fraction alpha, or report Infeasible.

    Dimension mismatches and bad fractions are usage errors and raise;
    Infeasible is reserved for semantic failure (state mismatch or a
    negative component in the result).
    """
    a = _frac(alpha)
    if not (0 < a <= 1):
        raise ValueError(f"fraction {a} outside (0, 1]")
    if not 0 <= tid < len(machine.transitions):
        raise DimensionError(f"unknown transition id {tid}")
    if cfg.values.dim != machine.dimension:
        raise DimensionError(
            f"configuration dim {cfg.values.dim} != machine dim {machine.dimension}"
        )
    t = machine.transition(tid)
    if cfg.state != t.source:
        return Infeasible(reason=f"state {cfg.state} != source {t.source}")
    out = t.matrix.mul_vector(cfg.values) + t.delta_vector().scale(a)
    if not out.is_nonnegative():
        return Infeasible(reason="negative component")
    return Configuration(t.target, out)


def run(machine: AffineCVASS, cfg: Configuration, seq: FiringSequence,
        ) -> list[Configuration] | Infeasible:
    """Replay a firing sequence; return all configurations visited.

    The trace includes the start configuration, so a successful replay of a
    k-step sequence yields k+1 configurations.  On failure the Infeasible
    carries the index of the first failing step.
    """
    trace = [cfg]
    cur = cfg
    for i, f in enumerate(seq):
        nxt = step(machine, cur, f.alpha, f.tid)
        if isinstance(nxt, Infeasible):
            return Infeasible(index=i, reason=nxt.reason)
        cur = nxt
        trace.append(cur)
    return trace


def marking_eval(machine: AffineCVASS, u: RatVector, seq: FiringSequence,
                 ) -> RatVector:
    """Closed-form final vector of a firing sequence.

    Evaluates v = (prod A_j) u + sum_j (prod_{k>j} A_k) alpha_j b_j without
    any feasibility checks; intermediate vectors may be negative.  The
    sequence must chain correctly through the state graph.
    """
    if u.dim != machine.dimension:
        raise DimensionError("vector dimension mismatch")
    cur_state: str | None = None
    w = u
    for f in seq:
        t = machine.transition(f.tid)
        if cur_state is not None and t.source != cur_state:
            raise StateChainError(
                f"transition {f.tid} leaves {t.source}, expected {cur_state}"
            )
        cur_state = t.target
        w = t.matrix.mul_vector(w) + t.delta_vector().scale(f.alpha)
    return w


def rep_half(seq: FiringSequence) -> FiringSequence:
    """Halve firing fractions geometrically: step i carries alpha_i / 2^i."""
    return FiringSequence(
        (f.alpha / (2 ** (i + 1)), f.tid) for i, f in enumerate(seq)
    )


def scale_seq(beta: Rat, seq: FiringSequence) -> FiringSequence:
    """Scale every firing fraction by beta in (0, 1]."""
    b = _frac(beta)
    if not (0 < b <= 1):
        raise ValueError(f"scale factor {b} outside (0, 1]")
    return FiringSequence((b * f.alpha, f.tid) for f in seq)


# ---------------------------------------------------------------------------
# Continuous VASS with zero tests (shared by the oracle and the compilers)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroTest:
    """A zero-test edge: passable only when the counter is exactly zero."""

    zid: int
    source: str
    counter: int
    target: str


@dataclass(frozen=True)
class ZeroTestCVASS:
    """A continuous VASS (identity matrices) with zero-test edges."""

    dimension: int
    states: tuple[str, ...]
    transitions: tuple[Transition, ...]
    zero_tests: tuple[ZeroTest, ...] = field(default_factory=tuple)

    def __post_init__(self):
        declared = set(self.states)
        for t in self.transitions:
            if t.source not in declared or t.target not in declared:
                raise ValueError(f"transition {t.tid} uses undeclared state")
            if len(t.delta) != self.dimension:
                raise DimensionError(f"transition {t.tid} has wrong dimension")
        for z in self.zero_tests:
            if z.source not in declared or z.target not in declared:
                raise ValueError(f"zero-test {z.zid} uses undeclared state")
            if not 0 <= z.counter < self.dimension:
                raise DimensionError(f"zero-test {z.zid} counter out of range")

    def to_machine(self) -> AffineCVASS:
        """Drop the zero tests, keeping the additive transitions."""
        return AffineCVASS(self.dimension, self.states, self.transitions)


def make_zerotest_machine(dimension: int, states: Iterable[str],
                          transitions: Iterable[tuple[str, Sequence[int], str]],
                          zero_tests: Iterable[tuple[str, int, str]] = (),
                          ) -> ZeroTestCVASS:
    ident = identity(dimension)
    ts = tuple(
        Transition(i, src, ident, tuple(int(x) for x in delta), tgt)
        for i, (src, delta, tgt) in enumerate(transitions)
    )
    zs = tuple(
        ZeroTest(i, src, int(c), tgt) for i, (src, c, tgt) in enumerate(zero_tests)
    )
    return ZeroTestCVASS(dimension, tuple(states), ts, zs)

"""Matrix taxonomy and per-problem decidability verdicts.

Every transition matrix is profiled for the structural features that drive
the decidability landscape: negative entries, zero rows/columns, weighted
edges (an entry > 1), overlapping edges (two positive entries sharing a
column), self-loops (no zero on the diagonal) and permutation shape.  The
machine-level verdict is the join of the per-matrix profiles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import AffineCVASS, IntMatrix


class Verdict(enum.Enum):
    NP = "decidable-NP"
    PSPACE = "decidable-PSPACE"
    NEXP = "decidable-NEXP"
    UNDECIDABLE = "undecidable"
    UNKNOWN = "unknown"


# Reason tags name the matrix feature that forces the verdict.
REASON_NEGATIVE = "negative-entry-matrix"
REASON_ZERO_ROW_COL = "zero-row-or-column-matrix"
REASON_WEIGHT_OVERLAP = "weighted-or-overlapping-edges"
REASON_SELF_LOOP = "non-negative-self-loop-matrices"
REASON_PERMUTATION = "permutation-matrices-only"
REASON_IDENTITY = "identity-matrices-only"
REASON_NON_NEGATIVE = "non-negative-matrices-only"
REASON_OPEN = "open-for-this-class"


@dataclass(frozen=True)
class ProblemVerdict:
    verdict: Verdict
    reason: str

    def __str__(self) -> str:
        return f"{self.verdict.value} [{self.reason}]"


@dataclass(frozen=True)
class MatrixProfile:
    """Exact structural predicates of one integer matrix."""

    non_negative: bool
    negative_entry_positions: tuple[tuple[int, int], ...]
    zero_rows: frozenset[int]
    zero_cols: frozenset[int]
    is_permutation: bool
    is_identity: bool
    self_loop: bool
    weighted_edges: tuple[tuple[int, int], ...]
    overlapping_edges: tuple[tuple[int, int, int], ...]
    is_transfer: bool
    is_reset_diagonal: bool


def profile(a: IntMatrix) -> MatrixProfile:
    n = a.dim
    negatives = tuple(
        (i, j) for i in range(n) for j in range(n) if a[i, j] < 0
    )
    non_negative = not negatives
    zero_rows = frozenset(i for i in range(n) if all(x == 0 for x in a.row(i)))
    zero_cols = frozenset(
        j for j in range(n) if all(a[i, j] == 0 for i in range(n))
    )
    weighted = tuple(
        (i, j) for i in range(n) for j in range(n) if a[i, j] > 1
    )
    overlapping = tuple(
        (i, j, k)
        for i in range(n)
        for j in range(n)
        for k in range(n)
        if i != j and a[i, k] > 0 and a[j, k] > 0
    )
    self_loop = all(a[i, i] != 0 for i in range(n))
    is_identity = a.is_identity()
    is_perm = (
        non_negative
        and all(sum(1 for x in a.row(i) if x != 0) == 1 for i in range(n))
        and all(
            sum(1 for i in range(n) if a[i, j] != 0) == 1 for j in range(n)
        )
        and all(x in (0, 1) for row in a.entries for x in row)
    )
    entries01 = all(x in (0, 1) for row in a.entries for x in row)
    is_transfer = entries01 and all(
        sum(1 for i in range(n) if a[i, j] != 0) <= 1 for j in range(n)
    )
    is_reset_diag = entries01 and all(
        a[i, j] == 0 for i in range(n) for j in range(n) if i != j
    )
    return MatrixProfile(
        non_negative=non_negative,
        negative_entry_positions=negatives,
        zero_rows=zero_rows,
        zero_cols=zero_cols,
        is_permutation=is_perm,
        is_identity=is_identity,
        self_loop=self_loop,
        weighted_edges=weighted,
        overlapping_edges=overlapping,
        is_transfer=is_transfer,
        is_reset_diagonal=is_reset_diag,
    )


def derived_permutation_check(a: IntMatrix) -> bool:
    """Whether the matrix is non-negative with no zero row/column and no
    weighted or overlapping edge.

    Whenever this antecedent holds, the matrix is asserted to be a
    permutation matrix (the implication is checked exhaustively for small
    matrices in the test suite).
    """
    p = profile(a)
    antecedent = (
        p.non_negative
        and not p.zero_rows
        and not p.zero_cols
        and not p.weighted_edges
        and not p.overlapping_edges
    )
    if antecedent:
        assert p.is_permutation, f"antecedent held but not a permutation: {a.entries}"
    return antecedent


@dataclass(frozen=True)
class MachineClassification:
    reach: ProblemVerdict
    cover: ProblemVerdict
    state_reach: ProblemVerdict

    def as_lines(self) -> list[str]:
        return [
            f"reach: {self.reach}",
            f"cover: {self.cover}",
            f"state-reach: {self.state_reach}",
        ]


def classify_machine(machine: AffineCVASS) -> MachineClassification:
    """Join the transition-matrix profiles into per-problem verdicts.

    Row order mirrors the decidability table: negative entries dominate,
    then zero rows/columns, then weighted/overlapping edges, then
    non-trivial permutations, then the identity class.
    """
    profiles = [profile(t.matrix) for t in machine.transitions]

    if any(p.negative_entry_positions for p in profiles):
        bad = ProblemVerdict(Verdict.UNDECIDABLE, REASON_NEGATIVE)
        return MachineClassification(bad, bad, bad)

    if any(p.zero_rows or p.zero_cols for p in profiles):
        bad = ProblemVerdict(Verdict.UNDECIDABLE, REASON_ZERO_ROW_COL)
        return MachineClassification(
            reach=bad,
            cover=bad,
            state_reach=ProblemVerdict(Verdict.PSPACE, REASON_NON_NEGATIVE),
        )

    if any(p.weighted_edges or p.overlapping_edges for p in profiles):
        all_self_loop = all(p.self_loop for p in profiles)
        if all_self_loop:
            cover = ProblemVerdict(Verdict.NP, REASON_SELF_LOOP)
            state = ProblemVerdict(Verdict.NP, REASON_SELF_LOOP)
        else:
            cover = ProblemVerdict(Verdict.UNKNOWN, REASON_OPEN)
            state = ProblemVerdict(Verdict.PSPACE, REASON_NON_NEGATIVE)
        return MachineClassification(
            reach=ProblemVerdict(Verdict.UNDECIDABLE, REASON_WEIGHT_OVERLAP),
            cover=cover,
            state_reach=state,
        )

    # Non-negative, no zero row/column, no weighted/overlapping edge:
    # every matrix is a permutation matrix.
    if all(p.is_identity for p in profiles):
        np_v = ProblemVerdict(Verdict.NP, REASON_IDENTITY)
        return MachineClassification(np_v, np_v, np_v)

    nexp = ProblemVerdict(Verdict.NEXP, REASON_PERMUTATION)
    return MachineClassification(
        reach=nexp,
        cover=nexp,
        state_reach=ProblemVerdict(Verdict.PSPACE, REASON_PERMUTATION),
    )


class ClassViolationError(ValueError):
    """A solver was invoked on a machine its class does not license."""


def require_non_negative(machine: AffineCVASS, who: str) -> None:
    for t in machine.transitions:
        if any(x < 0 for row in t.matrix.entries for x in row):
            raise ClassViolationError(
                f"{who} requires non-negative matrices; "
                f"transition {t.tid} has a negative entry"
            )


def require_self_loop(machine: AffineCVASS, who: str) -> None:
    require_non_negative(machine, who)
    for t in machine.transitions:
        if any(t.matrix[i, i] == 0 for i in range(machine.dimension)):
            raise ClassViolationError(
                f"{who} requires self-loop matrices; "
                f"transition {t.tid} has a zero diagonal entry"
            )


def require_identity(machine: AffineCVASS, who: str) -> None:
    for t in machine.transitions:
        if not t.matrix.is_identity():
            raise ClassViolationError(
                f"{who} requires identity matrices; transition {t.tid} is not"
            )


def require_permutation(machine: AffineCVASS, who: str) -> None:
    for t in machine.transitions:
        if not profile(t.matrix).is_permutation:
            raise ClassViolationError(
                f"{who} requires permutation matrices; transition {t.tid} is not"
            )

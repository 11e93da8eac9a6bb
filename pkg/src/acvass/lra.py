"""Exact satisfiability for conjunctions of linear rational constraints.

The solver decides systems of constraints sum(c_i * x_i) REL k with REL in
{<=, <, =} over the rationals and, when satisfiable, returns a concrete
rational model.  Strict inequalities are handled symbolically with
delta-rationals (values a + b*delta for an infinitesimal delta); a concrete
delta is chosen at model-extraction time, so models are plain rationals and
satisfy strict constraints exactly.

Two independent routes are provided: `solve` (a bounded simplex with
Bland-style pivoting) and `fm_satisfiable` (Fourier-Motzkin elimination).
The second exists purely as a cross-check oracle for small systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

Rat = Union[int, Fraction]

LE = "<="
LT = "<"
EQ = "="

_RELS = (LE, LT, EQ)


def _frac(x: Rat) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Variable:
    vid: int
    name: str = field(default="", compare=False)

    def __repr__(self) -> str:
        return self.name or f"x{self.vid}"


@dataclass(frozen=True)
class Constraint:
    """sum(coeffs[v] * v) REL constant; zero coefficients are omitted."""

    coeffs: tuple[tuple[int, Fraction], ...]  # (vid, coeff), sorted by vid
    rel: str
    constant: Fraction

    @staticmethod
    def make(coeffs: Mapping[Variable, Rat], rel: str, constant: Rat) -> "Constraint":
        if rel not in _RELS:
            raise ValueError(f"unknown relation {rel!r}")
        items = tuple(
            sorted(
                ((v.vid, _frac(c)) for v, c in coeffs.items() if _frac(c) != 0),
                key=lambda p: p[0],
            )
        )
        return Constraint(items, rel, _frac(constant))


class LinearSystem:
    """A conjunction of linear constraints over declared variables."""

    def __init__(self) -> None:
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []

    def new_var(self, name: str = "") -> Variable:
        v = Variable(len(self.variables), name)
        self.variables.append(v)
        return v

    def add(self, coeffs: Mapping[Variable, Rat], rel: str, constant: Rat) -> None:
        c = Constraint.make(coeffs, rel, constant)
        known = len(self.variables)
        for vid, _ in c.coeffs:
            if not 0 <= vid < known:
                raise ValueError(f"constraint references undeclared variable {vid}")
        self.constraints.append(c)

    # convenience relations ------------------------------------------------
    def add_le(self, coeffs, constant) -> None:
        self.add(coeffs, LE, constant)

    def add_lt(self, coeffs, constant) -> None:
        self.add(coeffs, LT, constant)

    def add_eq(self, coeffs, constant) -> None:
        self.add(coeffs, EQ, constant)

    def add_ge(self, coeffs, constant) -> None:
        self.add({v: -_frac(c) for v, c in coeffs.items()}, LE, -_frac(constant))

    def add_gt(self, coeffs, constant) -> None:
        self.add({v: -_frac(c) for v, c in coeffs.items()}, LT, -_frac(constant))


@dataclass(frozen=True)
class Sat:
    model: dict[int, Fraction]  # vid -> value

    def value(self, v: Variable) -> Fraction:
        return self.model[v.vid]


@dataclass(frozen=True)
class Unsat:
    pass


SolveResult = Union[Sat, Unsat]


# ---------------------------------------------------------------------------
# Delta-rationals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaRat:
    """a + b*delta for a symbolic infinitesimal delta > 0."""

    real: Fraction
    eps: Fraction

    def __add__(self, o: "DeltaRat") -> "DeltaRat":
        return DeltaRat(self.real + o.real, self.eps + o.eps)

    def __sub__(self, o: "DeltaRat") -> "DeltaRat":
        return DeltaRat(self.real - o.real, self.eps - o.eps)

    def scale(self, c: Fraction) -> "DeltaRat":
        return DeltaRat(c * self.real, c * self.eps)

    def __lt__(self, o: "DeltaRat") -> bool:
        return (self.real, self.eps) < (o.real, o.eps)

    def __le__(self, o: "DeltaRat") -> bool:
        return (self.real, self.eps) <= (o.real, o.eps)


_DZERO = DeltaRat(Fraction(0), Fraction(0))


def _rows_of(system: LinearSystem) -> list[tuple[dict[int, Fraction], DeltaRat]] | None:
    """Normalize to rows (coeffs, upper bound); None means trivially unsat.

    Ground constraints are evaluated immediately and dropped.
    """
    rows: list[tuple[dict[int, Fraction], DeltaRat]] = []
    for c in system.constraints:
        if not c.coeffs:
            k = c.constant
            ok = (k >= 0) if c.rel == LE else (k > 0) if c.rel == LT else (k == 0)
            if not ok:
                return None
            continue
        coeffs = dict(c.coeffs)
        neg = {v: -x for v, x in coeffs.items()}
        if c.rel == LE:
            rows.append((coeffs, DeltaRat(c.constant, Fraction(0))))
        elif c.rel == LT:
            rows.append((coeffs, DeltaRat(c.constant, Fraction(-1))))
        else:
            rows.append((coeffs, DeltaRat(c.constant, Fraction(0))))
            rows.append((neg, DeltaRat(-c.constant, Fraction(0))))
    return rows


def solve(system: LinearSystem) -> SolveResult:
    """Decide the system; Sat carries an exact rational model."""
    rows = _rows_of(system)
    if rows is None:
        return Unsat()
    nvars = len(system.variables)
    if not rows:
        return Sat({v.vid: Fraction(0) for v in system.variables})

    # Variable space: 0..nvars-1 are the free originals, then one slack per
    # row with an upper bound.  beta is kept consistent with the tableau.
    nall = nvars + len(rows)
    ub: dict[int, DeltaRat] = {}
    tableau: dict[int, dict[int, Fraction]] = {}
    beta: list[DeltaRat] = [_DZERO] * nall
    basic: set[int] = set()
    for r, (coeffs, bound) in enumerate(rows):
        s = nvars + r
        ub[s] = bound
        tableau[s] = {v: c for v, c in coeffs.items() if c != 0}
        basic.add(s)

    def eligible(row: dict[int, Fraction]) -> int | None:
        best: int | None = None
        for j in sorted(row):
            a = row[j]
            if a == 0:
                continue
            if a > 0:
                best = j  # decreasing is always allowed (no lower bounds)
                break
            if j not in ub or beta[j] < ub[j]:
                best = j
                break
        return best

    while True:
        viol = None
        for i in sorted(basic):
            if i in ub and ub[i] < beta[i]:
                viol = i
                break
        if viol is None:
            break
        row = tableau[viol]
        j = eligible(row)
        if j is None:
            return Unsat()
        a = row[j]
        theta = (ub[viol] - beta[viol]).scale(1 / a)
        beta[j] = beta[j] + theta
        beta[viol] = ub[viol]
        for k in basic:
            if k != viol:
                c = tableau[k].get(j)
                if c:
                    beta[k] = beta[k] + theta.scale(c)
        # pivot: viol leaves the basis, j enters
        new_row: dict[int, Fraction] = {viol: Fraction(1, 1) / a}
        for l, c in row.items():
            if l != j:
                q = -c / a
                if q != 0:
                    new_row[l] = q
        del tableau[viol]
        basic.discard(viol)
        for k in list(tableau):
            c = tableau[k].pop(j, None)
            if c:
                rk = tableau[k]
                for l, q in new_row.items():
                    nv = rk.get(l, Fraction(0)) + c * q
                    if nv == 0:
                        rk.pop(l, None)
                    else:
                        rk[l] = nv
        tableau[j] = new_row
        basic.add(j)

    # Choose a concrete delta small enough for every row.
    delta = Fraction(1)
    for r, (coeffs, bound) in enumerate(rows):
        s = nvars + r
        val = beta[s]
        d_real = bound.real - val.real
        d_eps = bound.eps - val.eps
        if d_eps < 0:
            delta = min(delta, d_real / (-d_eps))
    model = {
        v.vid: beta[v.vid].real + beta[v.vid].eps * delta
        for v in system.variables
    }
    return Sat(model)


def check_model(system: LinearSystem, model: Mapping[int, Fraction]) -> bool:
    """Exact substitution check of a candidate model."""
    for c in system.constraints:
        lhs = sum((model[v] * coeff for v, coeff in c.coeffs), Fraction(0))
        if c.rel == LE and not lhs <= c.constant:
            return False
        if c.rel == LT and not lhs < c.constant:
            return False
        if c.rel == EQ and lhs != c.constant:
            return False
    return True


# ---------------------------------------------------------------------------
# Fourier-Motzkin elimination (reference path)
# ---------------------------------------------------------------------------

def eliminate(system: LinearSystem, var: Variable) -> LinearSystem:
    """Project the solution set onto the remaining variables."""
    if var.vid >= len(system.variables) or system.variables[var.vid] != var:
        raise ValueError(f"variable {var!r} not declared in this system")
    out = LinearSystem()
    remap: dict[int, Variable] = {}
    for v in system.variables:
        if v.vid != var.vid:
            remap[v.vid] = out.new_var(v.name)

    def rebuild(coeffs: Iterable[tuple[int, Fraction]], rel: str, const: Fraction):
        out.constraints.append(
            Constraint(
                tuple(sorted(((remap[v].vid, c) for v, c in coeffs if c != 0))),
                rel,
                const,
            )
        )

    eq_row = next(
        (c for c in system.constraints
         if c.rel == EQ and any(v == var.vid for v, _ in c.coeffs)),
        None,
    )
    if eq_row is not None:
        # var = (constant - rest) / a: substitute into every other row.
        a = dict(eq_row.coeffs)[var.vid]
        rest = {v: c for v, c in eq_row.coeffs if v != var.vid}
        for c in system.constraints:
            if c is eq_row:
                continue
            cmap = dict(c.coeffs)
            cv = cmap.pop(var.vid, Fraction(0))
            if cv == 0:
                rebuild(cmap.items(), c.rel, c.constant)
                continue
            # cv * var -> cv/a * (constant - rest)
            f = cv / a
            merged = dict(cmap)
            for v, q in rest.items():
                merged[v] = merged.get(v, Fraction(0)) - f * q
            rebuild(merged.items(), c.rel, c.constant - f * eq_row.constant)
        return out

    uppers: list[tuple[dict[int, Fraction], Fraction, str]] = []
    lowers: list[tuple[dict[int, Fraction], Fraction, str]] = []
    for c in system.constraints:
        cmap = dict(c.coeffs)
        cv = cmap.pop(var.vid, Fraction(0))
        if cv == 0:
            rebuild(cmap.items(), c.rel, c.constant)
            continue
        # a*var + R rel k  ->  var rel' (k - R)/a, flipped when a < 0
        scaled = {v: -q / cv for v, q in cmap.items()}
        bound = c.constant / cv
        if cv > 0:
            uppers.append((scaled, bound, c.rel))
        else:
            lowers.append((scaled, bound, c.rel))
    for lo_expr, lo_k, lo_rel in lowers:
        for up_expr, up_k, up_rel in uppers:
            # lower <= var <= upper  =>  lower - upper rel'' 0
            merged = dict(lo_expr)
            for v, q in up_expr.items():
                merged[v] = merged.get(v, Fraction(0)) - q
            rel = LT if LT in (lo_rel, up_rel) else LE
            rebuild(merged.items(), rel, up_k - lo_k)
    return out


def fm_satisfiable(system: LinearSystem) -> bool:
    """Decide satisfiability by eliminating every variable in turn."""
    cur = system
    while cur.variables:
        used = {v for c in cur.constraints for v, _ in c.coeffs}
        target = next((v for v in cur.variables if v.vid in used), None)
        if target is None:
            break
        cur = eliminate(cur, target)
    for c in cur.constraints:
        if c.coeffs:
            continue
        k = c.constant
        ok = (k >= 0) if c.rel == LE else (k > 0) if c.rel == LT else (k == 0)
        if not ok:
            return False
    return True


# ---------------------------------------------------------------------------
# SMT-LIB 2 emission
# ---------------------------------------------------------------------------

def _smt_rat(x: Fraction) -> str:
    if x < 0:
        return f"(- {_smt_rat(-x)})"
    if x.denominator == 1:
        return f"{x.numerator}.0"
    return f"(/ {x.numerator}.0 {x.denominator}.0)"


def _smt_name(v: Variable) -> str:
    return v.name if v.name else f"x{v.vid}"


def emit_smtlib(system: LinearSystem) -> str:
    """Deterministic QF_LRA rendering of the system."""
    lines = ["(set-logic QF_LRA)"]
    names = {}
    for v in system.variables:
        name = _smt_name(v)
        if name in names.values():
            name = f"{name}_{v.vid}"
        names[v.vid] = name
        lines.append(f"(declare-const {name} Real)")
    for c in system.constraints:
        if not c.coeffs:
            lhs = "0.0"
        else:
            terms = [
                f"(* {_smt_rat(coeff)} {names[vid]})" for vid, coeff in c.coeffs
            ]
            lhs = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
        op = {LE: "<=", LT: "<", EQ: "="}[c.rel]
        lines.append(f"(assert ({op} {lhs} {_smt_rat(c.constant)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"

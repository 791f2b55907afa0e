"""Exact stratified Horn-clause engine over finite universes.

Clauses are function-free, with all body variables ranging over mutually
distinct objects (the dense-tensor convention: a tuple with a repeated
object is invalid). Body-only variables are quantified, existentially by
default; the quantifier prefix follows first-appearance order. Variables
that appear only in the head are copied in after quantification, so they are
constrained to differ from the other head variables but not from quantified
ones (that is what the expand-last compilation scheme computes, and the
enumerative oracle implements the same scoping).

Two independent evaluation routes are provided: `brute_force_ground`
enumerates assignments literally, while `forward_chain` executes compiled
expand / boolean / reduce / expand plans on hard 0/1 predicate tensors.
"""

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from . import predtensor as pt

EXISTS = "exists"
FORALL = "forall"


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    arity: int


@dataclass(frozen=True)
class Literal:
    pred: str
    args: tuple
    negated: bool = False

    def __str__(self):
        bang = "!" if self.negated else ""
        return f"{bang}{self.pred}({', '.join(self.args)})"


@dataclass(frozen=True)
class HornClause:
    head: Literal
    body: tuple
    quantifiers: tuple = ()  # ((var, "exists"|"forall"), ...) for body-only vars

    def __str__(self):
        parts = []
        quant = dict(self.quantifiers)
        explicit = {v for v, q in self.quantifiers if q == FORALL}
        for lit in self.body:
            prefix = ""
            for arg in lit.args:
                if arg in explicit:
                    prefix = f"forall {arg} "
                    explicit.discard(arg)
                    break
            parts.append(prefix + str(lit))
        return f"{self.head} <- {' & '.join(parts)}"


class ClauseError(ValueError):
    pass


def _check_clause(clause: HornClause) -> HornClause:
    if clause.head.negated:
        raise ClauseError("head literal cannot be negated")
    if len(set(clause.head.args)) != len(clause.head.args):
        raise ClauseError(f"repeated head variable in {clause.head}")
    if not clause.body:
        raise ClauseError("clause needs at least one body literal")
    for lit in clause.body:
        if len(set(lit.args)) != len(lit.args):
            raise ClauseError(
                f"repeated variable in {lit}; rewrite with a lower-arity predicate"
            )
    head_vars = set(clause.head.args)
    body_only = set(body_var_order(clause)) - head_vars
    for var, q in clause.quantifiers:
        if q not in (EXISTS, FORALL):
            raise ClauseError(f"unknown quantifier {q!r}")
        if var in head_vars:
            raise ClauseError(f"cannot quantify head variable {var!r}")
        if var not in body_only:
            raise ClauseError(f"quantified variable {var!r} not in the body")
    if len(dict(clause.quantifiers)) != len(clause.quantifiers):
        raise ClauseError("conflicting quantifiers for one variable")
    return clause


def clause(head: Literal, body, quantifiers=()) -> HornClause:
    return _check_clause(HornClause(head, tuple(body), tuple(quantifiers)))


def body_var_order(clause: HornClause) -> list:
    """Body variables in first-appearance order."""
    seen = []
    for lit in clause.body:
        for arg in lit.args:
            if arg not in seen:
                seen.append(arg)
    return seen


def body_only_vars(clause: HornClause) -> list:
    head_vars = set(clause.head.args)
    return [v for v in body_var_order(clause) if v not in head_vars]


def head_only_vars(clause: HornClause) -> list:
    body_vars = set(body_var_order(clause))
    return [v for v in clause.head.args if v not in body_vars]


def quantifier_of(clause: HornClause, var: str) -> str:
    return dict(clause.quantifiers).get(var, EXISTS)


# ---------------------------------------------------------------------------
# fact sets


@dataclass
class FactSet:
    """Boolean U-groundings over m objects; absent predicates are all-false."""

    m: int
    facts: dict = field(default_factory=dict)

    def add(self, name: str, arity: int, values=None) -> np.ndarray:
        if values is None:
            arr = np.zeros((self.m,) * arity, dtype=bool)
        else:
            arr = np.asarray(values, dtype=bool).reshape((self.m,) * arity)
            arr = arr & pt.valid_mask(self.m, arity)
        self.facts[name] = arr
        return arr

    def grounding(self, name: str) -> np.ndarray:
        return self.facts[name]

    def copy(self) -> "FactSet":
        return FactSet(self.m, {k: v.copy() for k, v in self.facts.items()})


# ---------------------------------------------------------------------------
# enumerative oracle


def brute_force_ground(cl: HornClause, facts: FactSet) -> np.ndarray:
    """Grounding of the head by literal enumeration of all assignments."""
    m = facts.m
    body_vars = body_var_order(cl)
    for lit in cl.body:
        if lit.pred not in facts.facts:
            raise KeyError(f"undefined predicate {lit.pred!r}")
    # head-only variables are a separate distinctness scope (they are
    # introduced after quantification), so the binding contexts are the body
    # variables on one side and the head tuple on the other
    if max(len(body_vars), len(cl.head.args)) > m:
        raise ValueError(f"clause uses more variables than objects (m={m})")

    head_in_body = [v for v in cl.head.args if v in set(body_vars)]
    prefix = [(v, quantifier_of(cl, v)) for v in body_only_vars(cl)]

    def eval_body(bound: dict) -> bool:
        for lit in cl.body:
            value = bool(facts.facts[lit.pred][tuple(bound[a] for a in lit.args)])
            if lit.negated:
                value = not value
            if not value:
                return False
        return True

    def eval_prefix(i: int, bound: dict) -> bool:
        if i == len(prefix):
            return eval_body(bound)
        var, q = prefix[i]
        used = set(bound.values())
        choices = [o for o in range(m) if o not in used]
        if q == EXISTS:
            return any(eval_prefix(i + 1, {**bound, var: o}) for o in choices)
        return all(eval_prefix(i + 1, {**bound, var: o}) for o in choices)

    out = np.zeros((m,) * len(cl.head.args), dtype=bool)
    for head_tuple in itertools.permutations(range(m), len(cl.head.args)):
        assignment = dict(zip(cl.head.args, head_tuple))
        bound = {v: assignment[v] for v in head_in_body}
        if eval_prefix(0, bound):
            out[head_tuple] = True
    return out


# ---------------------------------------------------------------------------
# plan compilation (expand / boolean+align / reduce / final expand)


@dataclass(frozen=True)
class ExpandStep:
    literal: int
    pred: str
    negated: bool
    positions: tuple  # target axis of each literal argument in the union cube


@dataclass(frozen=True)
class BooleanStep:
    align: tuple  # axis permutation putting head vars (head order) first,
    #               quantified vars last in prefix order


@dataclass(frozen=True)
class ReduceStep:
    var: str
    quantifier: str


@dataclass(frozen=True)
class FinalExpandStep:
    var: str
    position: int  # axis index in the head where the variable is inserted


@dataclass
class ClausePlan:
    clause: HornClause
    union_vars: tuple    # body variables, first-appearance order (cube axes)
    aligned_vars: tuple  # axes after the boolean step
    steps: list


def compile_clause_plan(cl: HornClause, max_arity: int | None = None) -> ClausePlan:
    """Compile one clause to the four-phase tensor plan: lift every body
    literal to the union of body variables, one boolean step that also aligns
    quantified variables last, one reduction per quantified variable
    (innermost first), then expansions for head-only variables."""
    _check_clause(cl)
    union = body_var_order(cl)
    if max_arity is not None and len(union) > max_arity:
        raise ClauseError(
            f"clause uses {len(union)} body variables, breadth limit is {max_arity}"
        )
    head_in_body = [v for v in cl.head.args if v in set(union)]
    quantified = body_only_vars(cl)
    aligned = head_in_body + quantified
    align_perm = tuple(union.index(v) for v in aligned)

    steps: list = []
    for i, lit in enumerate(cl.body):
        positions = tuple(union.index(a) for a in lit.args)
        steps.append(ExpandStep(i, lit.pred, lit.negated, positions))
    steps.append(BooleanStep(align_perm))
    for var in reversed(quantified):
        steps.append(ReduceStep(var, quantifier_of(cl, var)))
    for var in head_only_vars(cl):
        steps.append(FinalExpandStep(var, cl.head.args.index(var)))
    return ClausePlan(cl, tuple(union), tuple(aligned), steps)


def _lift_literal(grounding: np.ndarray, positions, n_axes: int, m: int) -> pt.PredTensor:
    """Lift one literal's grounding to the union cube axes."""
    t = pt.PredTensor(m, grounding.ndim, np.asarray(grounding, dtype=np.float64)[..., None])
    order = tuple(np.argsort(positions))
    t = pt.apply_permutation(t, order)
    sorted_targets = sorted(positions)
    remaining = [p for p in range(n_axes) if p not in positions]
    while t.arity < n_axes:
        t = pt.expand(t)
    current = {}
    for i, tgt in enumerate(sorted_targets):
        current[tgt] = i
    for j, tgt in enumerate(remaining):
        current[tgt] = len(sorted_targets) + j
    t = pt.apply_permutation(t, tuple(current[p] for p in range(n_axes)))
    return t


def execute_plan(plan: ClausePlan, facts: FactSet) -> np.ndarray:
    """Run a compiled plan on hard 0/1 tensors; returns the head grounding."""
    m = facts.m
    n_axes = len(plan.union_vars)
    lifted = []
    for step in plan.steps:
        if isinstance(step, ExpandStep):
            grounding = facts.facts[step.pred]
            t = _lift_literal(grounding, step.positions, n_axes, m)
            values = t.values
            if step.negated:
                values = (1.0 - values) * pt.valid_mask(m, n_axes)[..., None]
            lifted.append(values)
    # hand-set AND of the aligned literals
    cube = lifted[0]
    for values in lifted[1:]:
        cube = np.minimum(cube, values)
    current = pt.PredTensor(m, n_axes, cube)

    for step in plan.steps:
        if isinstance(step, BooleanStep):
            current = pt.apply_permutation(current, step.align)
        elif isinstance(step, ReduceStep):
            both = pt.reduce(current)
            channel = slice(0, 1) if step.quantifier == EXISTS else slice(1, 2)
            current = pt.PredTensor(current.m, current.arity - 1, both.values[..., channel])
        elif isinstance(step, FinalExpandStep):
            current = pt.expand(current)
            last = current.arity - 1
            order = list(range(step.position)) + [last] + list(range(step.position, last))
            current = pt.apply_permutation(current, tuple(order))
    return np.asarray(current.values)[..., 0] > 0.5


def describe_plan(plan: ClausePlan) -> list:
    lines = [f"plan for: {plan.clause}"]
    for step in plan.steps:
        if isinstance(step, ExpandStep):
            axes = ", ".join(plan.union_vars)
            lines.append(
                f"  lift {'!' if step.negated else ''}{step.pred}"
                f"{tuple(plan.clause.body[step.literal].args)} onto ({axes})"
            )
        elif isinstance(step, BooleanStep):
            lines.append(f"  boolean AND, align axes to ({', '.join(plan.aligned_vars)})")
        elif isinstance(step, ReduceStep):
            lines.append(f"  reduce {step.quantifier} {step.var}")
        else:
            lines.append(f"  expand head-only {step.var} at position {step.position}")
    return lines


# ---------------------------------------------------------------------------
# programs


class StratificationError(ValueError):
    pass


@dataclass
class HornProgram:
    clauses: list                  # topologically sorted
    base: list                     # PredicateSchema
    derived: list                  # PredicateSchema, in evaluation order

    def derived_names(self) -> list:
        return [s.name for s in self.derived]


def program_from_clauses(clauses: list) -> HornProgram:
    """Sort clauses topologically by head-predicate dependency; predicates
    never appearing as a head are base. Cyclic references are rejected."""
    clauses = [_check_clause(c) for c in clauses]
    arities: dict = {}

    def note(name, arity, where):
        if arities.setdefault(name, arity) != arity:
            raise ClauseError(f"predicate {name!r} used with arities "
                              f"{arities[name]} and {arity} ({where})")

    heads: dict = {}
    for c in clauses:
        note(c.head.pred, len(c.head.args), str(c))
        heads.setdefault(c.head.pred, []).append(c)
        for lit in c.body:
            note(lit.pred, len(lit.args), str(c))
    base_names = [n for n in arities if n not in heads]

    # Kahn's algorithm, keeping first-definition order for determinism.
    order = []
    deps = {
        name: {lit.pred for c in heads[name] for lit in c.body if lit.pred in heads}
        for name in heads
    }
    pending = [c.head.pred for c in clauses]
    pending = list(dict.fromkeys(pending))
    resolved: set = set()
    while pending:
        progressed = False
        for name in list(pending):
            if deps[name] <= resolved:
                order.append(name)
                resolved.add(name)
                pending.remove(name)
                progressed = True
        if not progressed:
            cycle = sorted(pending)
            raise StratificationError(
                "cyclic predicate references: " + " -> ".join(cycle + [cycle[0]])
            )

    sorted_clauses = [c for name in order for c in heads[name]]
    base = [PredicateSchema(n, arities[n]) for n in sorted(base_names)]
    derived = [PredicateSchema(n, arities[n]) for n in order]
    return HornProgram(sorted_clauses, base, derived)


def forward_chain(program: HornProgram, base: FactSet,
                  max_arity: int | None = None) -> FactSet:
    """Evaluate every clause in topological order via its compiled plan;
    clauses sharing a head combine by disjunction. Returns base + derived."""
    facts = base.copy()
    for schema in program.base:
        if schema.name not in facts.facts:
            raise KeyError(f"base facts missing predicate {schema.name!r}")
        got = facts.facts[schema.name]
        if got.shape != (facts.m,) * schema.arity:
            raise ValueError(f"grounding of {schema.name!r} has shape {got.shape}")
    for schema in program.derived:
        result = np.zeros((facts.m,) * schema.arity, dtype=bool)
        for cl in program.clauses:
            if cl.head.pred != schema.name:
                continue
            plan = compile_clause_plan(cl, max_arity)
            result |= execute_plan(plan, facts)
        facts.facts[schema.name] = result
    return facts


def brute_force_chain(program: HornProgram, base: FactSet) -> FactSet:
    """Program-level enumerative oracle, independent of the plan executor."""
    facts = base.copy()
    for schema in program.derived:
        result = np.zeros((facts.m,) * schema.arity, dtype=bool)
        for cl in program.clauses:
            if cl.head.pred == schema.name:
                result |= brute_force_ground(cl, facts)
        facts.facts[schema.name] = result
    return facts


# ---------------------------------------------------------------------------
# rule text format


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_TOKEN = re.compile(r"(<-)|([A-Za-z_][A-Za-z0-9_]*)|([(),&!])|(\s+)|(.)")


def _tokenize(text: str, lineno: int):
    tokens = []
    for match in _TOKEN.finditer(text):
        col = match.start() + 1
        arrow, name, sym, ws, bad = match.groups()
        if ws:
            continue
        if bad:
            raise ParseError(f"unexpected character {bad!r}", lineno, col)
        tokens.append((arrow or name or sym, col))
    return tokens


class _ClauseParser:
    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def error(self, message):
        col = self.tokens[self.pos][1] if self.pos < len(self.tokens) else (
            self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 1
        )
        raise ParseError(message, self.lineno, col)

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of line")
        self.pos += 1
        return tok

    def expect(self, tok):
        got = self.next()
        if got != tok:
            self.error(f"expected {tok!r}, got {got!r}")

    def atom(self, negated=False) -> Literal:
        name = self.next()
        if not name[0].isalpha() and name[0] != "_":
            self.error(f"expected a predicate name, got {name!r}")
        self.expect("(")
        args = []
        if self.peek() != ")":
            while True:
                args.append(self.next())
                if self.peek() == ",":
                    self.next()
                else:
                    break
        self.expect(")")
        return Literal(name, tuple(args), negated)

    def parse(self) -> HornClause:
        head = self.atom()
        self.expect("<-")
        body = []
        quantifiers = []
        while True:
            if self.peek() in (FORALL, EXISTS):
                q = self.next()
                var = self.next()
                quantifiers.append((var, q))
            negated = False
            if self.peek() == "!":
                self.next()
                negated = True
            body.append(self.atom(negated))
            if self.peek() == "&":
                self.next()
                continue
            if self.peek() is None:
                break
            self.error(f"expected '&' or end of line, got {self.peek()!r}")
        try:
            return clause(head, body, quantifiers)
        except ClauseError as exc:
            raise ParseError(str(exc), self.lineno, 1) from exc


def parse_clause(line: str, lineno: int = 1) -> HornClause:
    tokens = _tokenize(line, lineno)
    if not tokens:
        raise ParseError("empty clause", lineno, 1)
    return _ClauseParser(tokens, lineno).parse()


def parse_program(text: str) -> HornProgram:
    clauses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        clauses.append(parse_clause(line, lineno))
    return program_from_clauses(clauses)


# ---------------------------------------------------------------------------
# random stratified programs (verification fodder)


def _random_clause(rng: np.random.Generator, head_name: str, head_arity: int,
                   available: list, max_union: int) -> HornClause:
    while True:
        head_vars = [f"v{i}" for i in range(head_arity)]
        pool = list(head_vars)
        body = []
        for _ in range(int(rng.integers(1, 4))):
            name, arity = available[int(rng.integers(len(available)))]
            args: list = []
            feasible = True
            for _ in range(arity):
                candidates = [v for v in pool if v not in args]
                fresh_ok = len(pool) < max_union
                if (fresh_ok and rng.random() < 0.35) or not candidates:
                    if not fresh_ok:
                        feasible = False
                        break
                    var = f"q{len(pool)}"
                    pool.append(var)
                    args.append(var)
                else:
                    args.append(candidates[int(rng.integers(len(candidates)))])
            if feasible:
                body.append(Literal(name, tuple(args), bool(rng.random() < 0.25)))
        if not body:
            continue
        quantifiers = []
        head_set = set(head_vars)
        seen: list = []
        for lit in body:
            for a in lit.args:
                if a not in seen:
                    seen.append(a)
        for var in seen:
            if var not in head_set and rng.random() < 0.3:
                quantifiers.append((var, FORALL))
        return clause(Literal(head_name, tuple(head_vars)), body, quantifiers)


def random_program(rng: np.random.Generator, m: int, n_base: int = 3,
                   n_derived: int = 4, max_union: int = 3) -> HornProgram:
    """A random acyclic program whose clauses keep within `max_union` body
    variables (so plans stay within breadth) and within m objects."""
    max_union = min(max_union, m)
    max_base_arity = min(2, max_union)
    available = [(f"b{i}", int(rng.integers(0, max_base_arity + 1))) for i in range(n_base)]
    if all(a == 0 for _, a in available):
        available[0] = (available[0][0], 1)
    clauses = []
    for d in range(n_derived):
        head_arity = int(rng.integers(0, max_base_arity + 1))
        for _ in range(int(rng.integers(1, 3))):
            clauses.append(_random_clause(rng, f"d{d}", head_arity, available, max_union))
        available.append((f"d{d}", head_arity))
    return program_from_clauses(clauses)


def random_facts(rng: np.random.Generator, program: HornProgram, m: int,
                 density: float = 0.5) -> FactSet:
    facts = FactSet(m)
    for schema in program.base:
        facts.add(schema.name, schema.arity,
                  rng.random((m,) * schema.arity) < density)
    return facts

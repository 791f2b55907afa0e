"""Family trees: timeline generator, base relations, label programs.

Gender 0 is male, 1 is female. All four base relations read left-to-right:
IsFather(x, y) means "x is the father of y", IsSon(x, y) means "x is a son
of y", and so on. Label programs are written against that orientation.
"""

from dataclasses import dataclass

import numpy as np

from .. import logic
from ..predtensor import PredTensor, from_values

MALE, FEMALE = 0, 1

BASE_RELATIONS = ("IsSon", "IsDaughter", "IsFather", "IsMother")


@dataclass
class FamilyTree:
    genders: np.ndarray   # (m,) ints
    father: np.ndarray    # (m,) parent index or -1
    mother: np.ndarray

    @property
    def m(self) -> int:
        return len(self.genders)


def gen_family_tree(m: int, seed) -> FamilyTree:
    """Grow a family along a timeline: each newcomer is born to a random
    existing couple or arrives parentless, enters the singles list of its
    gender, and random marriages happen along the way (siblings excluded).
    Person order is randomly relabeled at the end."""
    if m < 2:
        raise ValueError("need at least two family members")
    rng = np.random.default_rng(seed)
    genders = np.zeros(m, dtype=np.int64)
    father = np.full(m, -1, dtype=np.int64)
    mother = np.full(m, -1, dtype=np.int64)
    singles: dict = {MALE: [], FEMALE: []}
    couples: list = []

    def siblings(a: int, b: int) -> bool:
        return (father[a] == father[b] and father[a] >= 0) or (
            mother[a] == mother[b] and mother[a] >= 0
        )

    for person in range(m):
        genders[person] = int(rng.integers(2))
        if couples and rng.random() < 0.75:
            dad, mom = couples[int(rng.integers(len(couples)))]
            father[person], mother[person] = dad, mom
        singles[int(genders[person])].append(person)
        if singles[MALE] and singles[FEMALE] and rng.random() < 0.5:
            men, women = singles[MALE], singles[FEMALE]
            for _ in range(4):  # a few proposal attempts
                man = men[int(rng.integers(len(men)))]
                woman = women[int(rng.integers(len(women)))]
                if not siblings(man, woman):
                    couples.append((man, woman))
                    men.remove(man)
                    women.remove(woman)
                    break

    relabel = rng.permutation(m)
    new_father = np.full(m, -1, dtype=np.int64)
    new_mother = np.full(m, -1, dtype=np.int64)
    new_genders = np.zeros(m, dtype=np.int64)
    for old in range(m):
        new = relabel[old]
        new_genders[new] = genders[old]
        new_father[new] = relabel[father[old]] if father[old] >= 0 else -1
        new_mother[new] = relabel[mother[old]] if mother[old] >= 0 else -1
    return FamilyTree(new_genders, new_father, new_mother)


def base_relations(tree: FamilyTree) -> dict:
    m = tree.m
    rel = {name: np.zeros((m, m), dtype=bool) for name in BASE_RELATIONS}
    for child in range(m):
        for parent in (tree.father[child], tree.mother[child]):
            if parent < 0:
                continue
            if tree.genders[child] == MALE:
                rel["IsSon"][child, parent] = True
            else:
                rel["IsDaughter"][child, parent] = True
        if tree.father[child] >= 0:
            rel["IsFather"][tree.father[child], child] = True
        if tree.mother[child] >= 0:
            rel["IsMother"][tree.mother[child], child] = True
    return rel


def encode_premises(tree: FamilyTree) -> dict:
    """Arity -> tensor; the four base relations as one binary 4-channel group."""
    rel = base_relations(tree)
    stacked = np.stack([rel[name] for name in BASE_RELATIONS], axis=-1).astype(float)
    return {2: from_values(tree.m, 2, stacked)}


INPUT_CHANNELS = {2: len(BASE_RELATIONS)}


_PRELUDE = """\
Parent(p, c) <- IsFather(p, c)
Parent(p, c) <- IsMother(p, c)
"""

LABEL_PROGRAMS = {
    "hasfather": ("HasFather", 1, "HasFather(x) <- IsFather(y, x)\n"),
    "hassister": ("HasSister", 1,
                  _PRELUDE + "HasSister(x) <- IsDaughter(s, p) & Parent(p, x)\n"),
    "isgrandparent": ("IsGrandparent", 2,
                      _PRELUDE + "IsGrandparent(g, c) <- Parent(g, p) & Parent(p, c)\n"),
    "isuncle": ("IsUncle", 2, _PRELUDE
                + "Brother(a, b) <- IsSon(a, g) & Parent(g, b)\n"
                + "IsUncle(u, n) <- Brother(u, c) & Parent(c, n)\n"),
    "ismguncle": ("IsMGUncle", 2, _PRELUDE
                  + "Brother(a, b) <- IsSon(a, g) & Parent(g, b)\n"
                  + "MatGrandparent(g, x) <- Parent(g, mo) & IsMother(mo, x)\n"
                  + "IsMGUncle(u, x) <- Brother(u, g) & MatGrandparent(g, x)\n"),
}

_PROGRAM_CACHE: dict = {}


def label_program(target: str) -> tuple:
    if target not in LABEL_PROGRAMS:
        raise KeyError(f"unknown family target {target!r}")
    if target not in _PROGRAM_CACHE:
        head, arity, text = LABEL_PROGRAMS[target]
        _PROGRAM_CACHE[target] = (head, arity, logic.parse_program(text))
    return _PROGRAM_CACHE[target]


def family_labels(tree: FamilyTree, target: str) -> np.ndarray:
    """Boolean labels (per object, or per distinct ordered pair as a full
    m x m array) computed by forward chaining the target's rule program."""
    head, arity, program = label_program(target)
    facts = logic.FactSet(tree.m)
    for name, grounding in base_relations(tree).items():
        facts.add(name, 2, grounding)
    derived = logic.forward_chain(program, facts)
    return derived.facts[head]


def traversal_labels(tree: FamilyTree, target: str) -> np.ndarray:
    """Independent label oracle by direct graph walks over the parent links."""
    m = tree.m
    parents = [
        [p for p in (tree.father[i], tree.mother[i]) if p >= 0] for i in range(m)
    ]

    def brother(a: int, b: int) -> bool:
        if a == b or tree.genders[a] != MALE:
            return False
        return bool(set(parents[a]) & set(parents[b]))

    if target == "hasfather":
        return np.asarray([tree.father[i] >= 0 for i in range(m)])
    if target == "hassister":
        out = np.zeros(m, dtype=bool)
        for x in range(m):
            for s in range(m):
                if s != x and tree.genders[s] == FEMALE and set(parents[s]) & set(parents[x]):
                    out[x] = True
        return out
    if target == "isgrandparent":
        out = np.zeros((m, m), dtype=bool)
        for c in range(m):
            for p in parents[c]:
                for g in parents[p]:
                    out[g, c] = True
        return out
    if target == "isuncle":
        out = np.zeros((m, m), dtype=bool)
        for n in range(m):
            for p in parents[n]:
                for u in range(m):
                    if u != n and brother(u, p):
                        out[u, n] = True
        return out
    if target == "ismguncle":
        out = np.zeros((m, m), dtype=bool)
        for x in range(m):
            mo = tree.mother[x]
            if mo < 0:
                continue
            for g in parents[mo]:
                for u in range(m):
                    if u != x and brother(u, g):
                        out[u, x] = True
        return out
    raise KeyError(f"unknown family target {target!r}")

# Exact forward chaining of Horn clauses, and how a clause compiles to the
# expand / boolean / reduce / expand tensor plan.

import numpy as np

from difflogic import logic
from difflogic.blocks_rules import RULES_TEXT, shouldmove_fixture
from difflogic.tasks.blocks import BlocksEnv, shouldmove_labels

rules = """
Parent(p, c) <- IsFather(p, c)
Parent(p, c) <- IsMother(p, c)
Grandparent(g, c) <- Parent(g, p) & Parent(p, c)
Orphan(x) <- forall y !Parent(y, x)
"""

program = logic.parse_program(rules)
print("clauses in evaluation order:")
for clause in program.clauses:
    print("  ", clause)

# a three-generation family: 0 -> father of 1 -> mother of 2, person 3 alone
facts = logic.FactSet(4)
is_father = np.zeros((4, 4), dtype=bool)
is_father[0, 1] = True
is_mother = np.zeros((4, 4), dtype=bool)
is_mother[1, 2] = True
facts.add("IsFather", 2, is_father)
facts.add("IsMother", 2, is_mother)

derived = logic.forward_chain(program, facts)
print("\nGrandparent pairs:", [tuple(map(int, i))
                               for i in np.argwhere(derived.facts["Grandparent"])])
print("Orphans:", np.flatnonzero(derived.facts["Orphan"]).tolist())

# every clause becomes a small tensor program
print("\ncompiled plan of the grandparent rule:")
for line in logic.describe_plan(logic.compile_clause_plan(program.clauses[2])):
    print(" ", line)

# the enumerative oracle agrees with the tensor route
brute = logic.brute_force_chain(program, facts)
assert all(np.array_equal(derived.facts[s.name], brute.facts[s.name])
           for s in program.derived)
print("\nplan execution == brute-force enumeration: True")

# the bundled blocks-world rule program
print("\nbundled should-move rules:")
print(RULES_TEXT)
env = BlocksEnv.generate(3, seed=7)
labels = shouldmove_labels(env)
print("operating world:", env.operating)
print("target world:   ", env.target)
print("blocks that must move:",
      [b for b in range(1, 4) if labels[b]])
assert len(shouldmove_fixture().derived) == 9

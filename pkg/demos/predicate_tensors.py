# Predicate groups as masked dense tensors, and the three lifted operators.
#
# A predicate group of arity r over m objects is an (m,)*r + (C,) cube with
# entries in [0, 1]; tuples that repeat an object are masked out. Permute
# stacks all axis orders, Expand introduces a fresh distinct variable, and
# Reduce quantifies the last variable out (max = exists, min = forall).

import numpy as np

from difflogic import predtensor as pt

m = 4
rng = np.random.default_rng(0)

# a single binary predicate, say On(x, y)
on = pt.from_values(m, 2, rng.random((m, m, 1)).round(2))
print("On grounding (diagonal masked to 0):")
print(np.asarray(on.values)[..., 0])

# Permute: both argument orders of On as separate channels
both_orders = pt.permute_all(on)
print("\npermute_all -> channels:", both_orders.channels)
print("channel 1 at (0,1) equals On(1,0):",
      np.asarray(both_orders.values)[0, 1, 1] == np.asarray(on.values)[1, 0, 0])

# Expand: lift a unary predicate to a binary one by adding a fresh variable
heavy = pt.from_values(m, 1, rng.random((m, 1)).round(2))
lifted = pt.expand(heavy)
print("\nHeavy(x) =", np.asarray(heavy.values)[:, 0])
print("expand(Heavy)(x, y) copies along y (x=1 row):",
      np.asarray(lifted.values)[1, :, 0])

# Reduce: exists-y On(x, y) and forall-y On(x, y) in one call
quantified = pt.reduce(on)
print("\nreduce(On) -> channels:", quantified.channels)
print("exists y On(x, y):", np.asarray(quantified.values)[:, 0])
print("forall y On(x, y):", np.asarray(quantified.values)[:, 1])

# the two quantifier blocks of reduce(expand(p)) recover p exactly
roundtrip = pt.reduce(pt.expand(heavy))
assert np.array_equal(np.asarray(roundtrip.values)[:, 0], np.asarray(heavy.values)[:, 0])
assert np.array_equal(np.asarray(roundtrip.values)[:, 1], np.asarray(heavy.values)[:, 0])
print("\nreduce(expand(p)) == p on both quantifier channels: True")

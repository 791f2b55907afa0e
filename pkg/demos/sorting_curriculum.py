# Policy-gradient sorting with the exam-gated curriculum: lessons grow the
# array, exams gate advancement, and replay pools balance successes and
# failures. The graduated policy generalizes past the training sizes.

import numpy as np

from difflogic.cli import rl_config
from difflogic.presets import build_model
from difflogic.rl import ModelPolicy, curriculum_train, evaluate

rng = np.random.default_rng(0)
model = build_model("sorting", rng)
policy = ModelPolicy("sorting", model)

cfg = rl_config("sorting")
report = curriculum_train(
    cfg, policy, rng,
    log=lambda r: print(f"lesson m={r['m']} epoch {r['epoch']}: "
                        f"exam {r['exam_accuracy']:.2f} "
                        f"(needs {r['threshold']:.3f}), "
                        f"pools +{r['pool_pos']}/-{r['pool_neg']}"))

print("graduated:", report.graduated)
for m in (10, 15, 20):
    res = evaluate(policy, "sorting", m, episodes=200, seed=123)
    print(f"m={m}: success {res['success_rate']:.1%}, "
          f"avg swaps {res['avg_moves']:.1f} (limit {2 * m})")

# Supervised run: learn HasFather from labelled family trees, then test the
# same parameters on trees five times larger (the parameters never depend on
# the number of objects).

import numpy as np

from difflogic.presets import build_model
from difflogic.supervised import SupervisedConfig, accuracy, train_supervised
from difflogic.tasks import SUPERVISED_TASKS

task = SUPERVISED_TASKS["hasfather"]
rng = np.random.default_rng(0)
model = build_model("hasfather", rng)

cfg = SupervisedConfig(max_examples=2000, batch=4)
model, _, metrics = train_supervised(cfg, model, task, train_m=10, root_seed=0)
print(f"trained on {metrics[-1]['examples']} trees of 10 people; "
      f"loss {metrics[0]['loss']:.3f} -> {metrics[-1]['loss']:.5f}")

for m in (10, 50):
    acc = accuracy(model, task, m, instances=100, root_seed=1)
    print(f"micro accuracy on fresh trees, m={m}: {acc:.4f}")

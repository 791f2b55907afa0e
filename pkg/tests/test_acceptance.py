"""Acceptance suite: one test per criterion, each printing a verdict line.

Criteria 4-7 train real models and are marked slow; run the full set with
plain `pytest tests/test_acceptance.py -s`.
"""

import dataclasses
import json
import time

import numpy as np
import pytest

from difflogic import logic
from difflogic import predtensor as pt
from difflogic.cli import main as cli_main
from difflogic.cli import rl_config
from difflogic.machine import MachineConfig, estimate_cost, forward, init_params, width_plan
from difflogic.presets import PRESETS, build_model, machine_config
from difflogic.rl import ModelPolicy, curriculum_train, evaluate
from difflogic.supervised import SupervisedConfig, accuracy, train_supervised
from difflogic.tasks import SUPERVISED_TASKS
from difflogic.verify import (equivariance_suite, gradcheck_suite,
                              machine_gradcheck, oracle_suite, shapes_suite)

TOL_GRAD = 1e-4


def verdict(criterion: str, passed: bool, detail: str):
    print(f"\n[ACCEPTANCE] {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"{criterion}: {detail}"


def test_criterion_1_gradient_correctness():
    t0 = time.time()
    results = gradcheck_suite(seed=0, tol=TOL_GRAD)
    worst = max(float(d.split()[-1]) for _, _, d in results)
    elapsed = time.time() - t0
    ok = all(passed for _, passed, _ in results) and elapsed < 60
    verdict("criterion 1 gradient correctness", ok,
            f"{len(results)} checks, worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_oracle_equivalence():
    t0 = time.time()
    results = oracle_suite(seed=0, n_programs=200, n_clause_checks=100)
    elapsed = time.time() - t0
    ok = all(passed for _, passed, _ in results) and elapsed < 120
    detail = "; ".join(f"{name.split('/')[-1]}: {d}" for name, _, d in results[:2])
    verdict("criterion 2 oracle equivalence", ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_3_structural_laws():
    t0 = time.time()
    results = shapes_suite(seed=0) + equivariance_suite(seed=0)

    # liftedness across all presets: parameters built once evaluate at two m
    rng = np.random.default_rng(0)
    for name, preset in PRESETS.items():
        config = machine_config(preset)
        params = init_params(config, rng)
        n_params_small = estimate_cost(config, config.breadth + 1).parameters
        n_params_large = estimate_cost(config, 40).parameters
        lifted = n_params_small == n_params_large
        for m in (config.breadth + 2, config.breadth + 5):
            premises = [pt.from_values(m, r, rng.random((m,) * r + (c,)))
                        for r, c in enumerate(config.input_channels)]
            out = forward(config, params, premises)
            _, carried = width_plan(config)
            lifted &= [t.channels for t in out.outputs] == carried[-1]
        results.append((f"liftedness/{name}", lifted, "same params at two m"))

    elapsed = time.time() - t0
    ok = all(passed for _, passed, _ in results) and elapsed < 60
    bad = [name for name, passed, _ in results if not passed]
    verdict("criterion 3 structural laws", ok,
            f"{len(results)} properties, failures: {bad or 'none'}, {elapsed:.1f}s")


def _train_supervised_once(task_name: str, train_m: int, seed: int,
                           max_examples: int):
    rng = np.random.default_rng(seed)
    model = build_model(task_name, rng)
    cfg = SupervisedConfig(max_examples=max_examples, batch=4)
    task = SUPERVISED_TASKS[task_name]
    model, _, metrics = train_supervised(cfg, model, task, train_m, root_seed=seed)
    return model, metrics


@pytest.mark.slow
@pytest.mark.parametrize("task_name", ["hasfather", "adjacenttored"])
def test_criterion_4_supervised_reproduction(task_name):
    t0 = time.time()
    task = SUPERVISED_TASKS[task_name]
    best = None
    for seed in (0, 1, 2):
        model, _ = _train_supervised_once(task_name, 10, seed, 20_000)
        acc10 = accuracy(model, task, 10, 1000, root_seed=9000 + seed)
        acc50 = accuracy(model, task, 50, 1000, root_seed=9100 + seed)
        best = max(best or (0, 0), (acc10, acc50))
        if acc10 == 1.0 and acc50 >= 0.999:
            break
    acc10, acc50 = best
    elapsed = time.time() - t0
    ok = acc10 == 1.0 and acc50 >= 0.999
    verdict(f"criterion 4 supervised {task_name}", ok,
            f"m=10 acc {acc10:.4f}, m=50 acc {acc50:.4f}, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_criterion_5_sorting_rl():
    t0 = time.time()
    best = None
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        model = build_model("sorting", rng)
        policy = ModelPolicy("sorting", model)
        report = curriculum_train(rl_config("sorting"), policy, rng)
        r10 = evaluate(policy, "sorting", 10, 1000, seed=5000 + seed)
        r20 = evaluate(policy, "sorting", 20, 1000, seed=5100 + seed)
        best = max(best or (0, 0, False),
                   (r10["success_rate"], r20["success_rate"], report.graduated))
        if r10["success_rate"] == 1.0 and r20["success_rate"] >= 0.99:
            break
    s10, s20, graduated = best
    elapsed = time.time() - t0
    ok = s10 == 1.0 and s20 >= 0.99
    verdict("criterion 5 sorting", ok,
            f"graduated={graduated}, m=10 {s10:.3f}, m=20 {s20:.3f}, "
            f"{elapsed / 60:.1f} min")


@pytest.mark.slow
def test_criterion_6_blocks_world():
    t0 = time.time()
    best = 0.0
    for seed in (0, 1, 2, 3, 4):
        rng = np.random.default_rng(seed)
        model = build_model("blocksworld", rng)
        policy = ModelPolicy("blocksworld", model)
        curriculum_train(rl_config("blocksworld"), policy, rng)
        res = evaluate(policy, "blocksworld", 5, 1000, seed=6000 + seed)
        best = max(best, res["success_rate"])
        if best >= 0.9:
            break
    elapsed = time.time() - t0
    verdict("criterion 6 blocks world policy", best >= 0.9,
            f"best m=5 success {best:.3f} within 4m moves, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_criterion_6_shouldmove_probe():
    t0 = time.time()
    task = SUPERVISED_TASKS["shouldmove"]
    model, _ = _train_supervised_once("shouldmove", 5, seed=0, max_examples=8000)
    acc = accuracy(model, task, 8, 200, root_seed=77)
    elapsed = time.time() - t0
    verdict("criterion 6 shouldmove supervised probe", acc == 1.0,
            f"m=8 per-object accuracy {acc:.4f} trained at m<=5, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_criterion_7_path_rl():
    t0 = time.time()
    best = 0.0
    graduated = False
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        model = build_model("path", rng)
        policy = ModelPolicy("path", model)
        report = curriculum_train(rl_config("path"), policy, rng)
        res = evaluate(policy, "path", 10, 1000, seed=7000 + seed,
                       env_kwargs={"exact_distance": 4})
        if res["success_rate"] > best:
            best, graduated = res["success_rate"], report.graduated
        if best >= 0.95:
            break
    elapsed = time.time() - t0
    verdict("criterion 7 path", best >= 0.95,
            f"graduated={graduated}, m=10 distance-4 success {best:.3f}, "
            f"{elapsed / 60:.1f} min")


def test_criterion_8_determinism(tmp_path):
    def run_twice(cfg_payload, out_a, out_b):
        for out in (out_a, out_b):
            payload = dict(cfg_payload, out_dir=str(tmp_path / out))
            cfg_path = tmp_path / f"{out}.json"
            cfg_path.write_text(json.dumps(payload))
            assert cli_main(["train", "--config", str(cfg_path)]) == 0
        a_dir, b_dir = tmp_path / out_a, tmp_path / out_b
        same_ckpt = (a_dir / "model.ckpt").read_bytes() == (b_dir / "model.ckpt").read_bytes()
        same_log = (a_dir / "train.log.jsonl").read_bytes() == (b_dir / "train.log.jsonl").read_bytes()
        return same_ckpt and same_log

    t0 = time.time()
    sup = {"version": 1, "task": "hasfather", "seed": 3, "deterministic": True,
           "overrides": {"depth": 2}, "trainer": {"max_examples": 40, "train_m": 5}}
    sup_ok = run_twice(sup, "sup_a", "sup_b")

    rl = {"version": 1, "task": "sorting", "seed": 3, "deterministic": True,
          "trainer": {"m_range": [3, 4], "exam_episodes": 15,
                      "rollout_episodes": 8, "opt_rounds": 12, "max_epochs": 2}}
    rl_ok = run_twice(rl, "rl_a", "rl_b")

    gen_ok = True
    for out in ("g1.jsonl", "g2.jsonl"):
        assert cli_main(["generate", "--task", "path", "--m", "6", "--count", "4",
                         "--seed", "11", "--out", str(tmp_path / out)]) == 0
    gen_ok = (tmp_path / "g1.jsonl").read_bytes() == (tmp_path / "g2.jsonl").read_bytes()

    elapsed = time.time() - t0
    verdict("criterion 8 determinism", sup_ok and rl_ok and gen_ok,
            f"supervised={sup_ok}, rl={rl_ok}, generate={gen_ok}, {elapsed:.1f}s")

"""Command-line entry points: generate, train, eval, verify, oracle."""

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import logic, records
from .blocks_rules import shouldmove_fixture
from .checkpoint import load_checkpoint, save_checkpoint
from .nn import AdamState, adam_arrays, restore_adam
from .presets import PRESETS, build_model
from .rl import ModelPolicy, RLConfig, curriculum_train, evaluate
from .supervised import (SupervisedConfig, accuracy, instance_seed,
                         train_supervised)
from .tasks import RL_TASKS, SUPERVISED_TASKS, make_env, supervised_instance
from .verify import run_suites

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VERIFY = 4

ONE_NAT_CONFIDENCE = 1.0 - math.exp(-1.0)


class ConfigError(ValueError):
    pass


def binomial_lower_bound(n: int, failures: int,
                         confidence: float = ONE_NAT_CONFIDENCE) -> float:
    """Largest p with P(at most `failures` failures | success prob p) <= 1-confidence,
    i.e. an exact binomial (Chernoff-style for k=0) lower confidence bound."""
    if n <= 0:
        raise ValueError("need a positive sample count")
    delta = 1.0 - confidence
    if failures == 0:
        return delta ** (1.0 / n)
    if failures >= n:
        return 0.0

    def log_tail(p: float) -> float:
        # P(failures or fewer) in log space
        terms = []
        for k in range(failures + 1):
            terms.append(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                         + k * math.log(1 - p) + (n - k) * math.log(p))
        top = max(terms)
        return top + math.log(sum(math.exp(t - top) for t in terms))

    # P(<= failures | p) is increasing in p; find the root of tail(p) = delta
    lo, hi = 1e-12, 1.0 - 1e-12
    for _ in range(200):
        mid = (lo + hi) / 2
        if log_tail(mid) > math.log(delta):
            hi = mid
        else:
            lo = mid
    return lo


def _print(line: str):
    sys.stdout.write(line + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# run configuration files

_TOP_KEYS = {"version", "task", "seed", "out_dir", "deterministic",
             "overrides", "trainer", "eval_sizes"}
_OVERRIDE_KEYS = {"depth", "breadth", "channels", "residual",
                  "hidden_layers", "hidden_width"}
_SUPERVISED_KEYS = {"lr", "batch", "max_examples", "loss_threshold",
                    "eval_every", "eval_instances", "train_m"}
_RL_KEYS = {"lr", "beta", "beta_decay", "gamma", "omega", "m_range",
            "exam_episodes", "rollout_episodes", "opt_rounds", "max_epochs",
            "pool_capacity", "aux_weight", "baseline"}


def load_run_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("version") != 1:
        raise ConfigError("config field 'version' must be 1")
    task = raw.get("task")
    if task not in PRESETS:
        raise ConfigError(f"config field 'task' must be one of {sorted(PRESETS)}")
    overrides = raw.get("overrides", {})
    bad = set(overrides) - _OVERRIDE_KEYS
    if bad:
        raise ConfigError(f"unknown override keys: {sorted(bad)}")
    allowed = _SUPERVISED_KEYS if PRESETS[task].kind == "supervised" else _RL_KEYS
    trainer = raw.get("trainer", {})
    bad = set(trainer) - allowed
    if bad:
        raise ConfigError(f"unknown trainer keys for {task}: {sorted(bad)}")
    raw.setdefault("seed", 0)
    raw.setdefault("deterministic", False)
    raw.setdefault("overrides", {})
    raw.setdefault("trainer", {})
    # environment overrides apply to paths only
    if os.environ.get("DIFFLOGIC_OUT_DIR"):
        raw["out_dir"] = os.environ["DIFFLOGIC_OUT_DIR"]
    if "out_dir" not in raw:
        raise ConfigError("config field 'out_dir' is required")
    return raw


class RunLogger:
    """JSONL training log; wall time is zeroed in determinism mode."""

    def __init__(self, path: Path, deterministic: bool):
        self.path = path
        self.deterministic = deterministic
        self.start = time.monotonic()
        self.fh = open(path, "w", encoding="utf-8")

    def __call__(self, record: dict):
        record = dict(record)
        record["wall_time"] = 0.0 if self.deterministic else round(
            time.monotonic() - self.start, 3)
        self.fh.write(records.dumps(record) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    out = Path(args.out)
    if args.task in SUPERVISED_TASKS:
        task = SUPERVISED_TASKS[args.task]
        rows = (supervised_instance(task, args.m, instance_seed(args.seed, "gen", i))
                for i in range(args.count))
        records.write_supervised_dataset(out, args.task, args.m, args.seed, rows)
    elif args.task in RL_TASKS:
        snaps = [make_env(args.task, args.m, instance_seed(args.seed, "gen", i)).snapshot()
                 for i in range(args.count)]
        records.write_rl_dataset(out, args.task, args.m, args.seed, snaps)
    else:
        raise ConfigError(f"unknown task {args.task!r}")
    _print(f"wrote {args.count} instances to {out}")
    _print(f"sha256 {_digest(out)}")
    return EXIT_OK


def _supervised_config(preset, trainer: dict) -> SupervisedConfig:
    return SupervisedConfig(
        lr=trainer.get("lr", preset.lr),
        batch=trainer.get("batch", preset.batch),
        max_examples=trainer.get("max_examples", preset.max_examples),
        loss_threshold=trainer.get("loss_threshold", preset.loss_threshold),
        eval_every=trainer.get("eval_every", 0),
        eval_instances=trainer.get("eval_instances", 50),
    )


def rl_config(task: str, **trainer) -> RLConfig:
    preset = PRESETS[task]
    return RLConfig(
        task=task,
        lr=trainer.get("lr", preset.lr),
        beta=trainer.get("beta", preset.beta),
        beta_decay=trainer.get("beta_decay", False),
        gamma=trainer.get("gamma", preset.gamma),
        omega=trainer.get("omega", preset.omega),
        m_range=tuple(trainer.get("m_range", preset.m_range)),
        exam_episodes=trainer.get("exam_episodes", preset.exam_episodes),
        rollout_episodes=trainer.get("rollout_episodes", preset.rollout_episodes),
        opt_rounds=trainer.get("opt_rounds", preset.opt_rounds),
        max_epochs=trainer.get("max_epochs", preset.max_epochs),
        pool_capacity=trainer.get("pool_capacity", preset.pool_capacity),
        aux_weight=trainer.get("aux_weight", preset.aux_weight),
        baseline=trainer.get("baseline", False),
        env_kwargs=dict(preset.env_kwargs),
        eval_kwargs=dict(preset.eval_kwargs),
    )


def cmd_train(args) -> int:
    if args.config:
        cfg = load_run_config(args.config)
    elif args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}")
        if not args.out:
            raise ConfigError("--out is required with --preset")
        cfg = {"version": 1, "task": args.preset, "seed": args.seed,
               "deterministic": False, "out_dir": args.out,
               "overrides": {}, "trainer": {}}
    else:
        raise ConfigError("provide --config or --preset")
    if args.deterministic:
        cfg["deterministic"] = True
    task_name = cfg["task"]
    preset = PRESETS[task_name]
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    log = RunLogger(out_dir / "train.log.jsonl", cfg["deterministic"])
    seed = int(cfg["seed"])
    rng = np.random.default_rng(seed)
    try:
        if preset.kind == "supervised":
            task = SUPERVISED_TASKS[task_name]
            train_m = cfg["trainer"].get("train_m", preset.train_m)
            scfg = _supervised_config(preset, cfg["trainer"])
            adam = AdamState(lr=scfg.lr)
            start_step = 0
            if args.resume:
                model, header, extra = load_checkpoint(args.resume)
                restore_adam(adam, extra, header["metadata"]["adam_t"])
                start_step = header["metadata"]["step"] + 1
            else:
                model = build_model(task_name, rng, **cfg["overrides"])
            model, adam, metrics = train_supervised(
                scfg, model, task, train_m, seed, log=log,
                start_step=start_step, adam=adam)
            last_step = metrics[-1]["step"] if metrics else start_step - 1
            save_checkpoint(
                out_dir / "model.ckpt", model, task_name, seed,
                metadata={"step": last_step, "adam_t": adam.t,
                          "train_m": train_m, "kind": "supervised"},
                extra_arrays=adam_arrays(adam))
            _print(f"trained {task_name}; final loss "
                   f"{metrics[-1]['loss'] if metrics else float('nan'):.3e}")
        else:
            model = build_model(task_name, rng, **cfg["overrides"])
            start_lesson = 0
            if args.resume:
                model, header, _ = load_checkpoint(args.resume)
                start_lesson = header["metadata"].get("next_lesson", 0)
            policy = ModelPolicy(task_name, model)
            rcfg = rl_config(task_name, **cfg["trainer"])

            def on_pass(lesson, m):
                save_checkpoint(out_dir / f"lesson{lesson}.ckpt", model,
                                task_name, seed,
                                metadata={"next_lesson": lesson + 1, "kind": "rl"})

            report = curriculum_train(rcfg, policy, rng, log=log,
                                      on_lesson_pass=on_pass,
                                      start_lesson=start_lesson)
            save_checkpoint(out_dir / "model.ckpt", model, task_name, seed,
                            metadata={"graduated": report.graduated, "kind": "rl",
                                      "next_lesson": len(report.lessons)})
            _print(f"curriculum {'graduated' if report.graduated else 'did not graduate'}"
                   f" after {report.epochs_total} epochs")
            for lesson in report.lessons:
                _print(f"  lesson m={lesson.m}: passed={lesson.passed} "
                       f"exam={lesson.exam_accuracy:.3f} (threshold {lesson.threshold:.3f})")
    finally:
        log.close()
    return EXIT_OK


def cmd_eval(args) -> int:
    model, header, _ = load_checkpoint(args.checkpoint)
    task_name = args.task or header["task"]
    if args.episodes <= 0:
        raise ConfigError("need a positive number of evaluation episodes/examples")
    if task_name in SUPERVISED_TASKS:
        if "classify" not in model.heads:
            raise ConfigError(f"checkpoint has no classification head for {task_name}")
        task = SUPERVISED_TASKS[task_name]
        total = 0
        errors = 0
        from .supervised import predictions
        for i in range(args.episodes):
            tensors, labels = supervised_instance(
                task, args.m, instance_seed(args.seed, "cli-eval", i))
            pred = predictions(model, task, tensors)
            errors += int((pred != labels).sum())
            total += labels.size
        acc = 1.0 - errors / max(total, 1)
        bound = binomial_lower_bound(total, errors)
        _print(records.dumps({"task": task_name, "m": args.m,
                              "examples": args.episodes, "micro_accuracy": acc}))
        _print(f"accuracy {acc:.4%} over {total} predictions; "
               f"with confidence {ONE_NAT_CONFIDENCE:.1%} the accuracy is at least "
               f"{bound:.4%}")
    elif task_name in RL_TASKS:
        if "action" not in model.heads:
            raise ConfigError(f"checkpoint has no action head for {task_name}")
        policy = ModelPolicy(task_name, model)
        kwargs = PRESETS[task_name].eval_kwargs
        report = evaluate(policy, task_name, args.m, args.episodes, args.seed,
                          greedy=not args.sample, env_kwargs=kwargs)
        failures = args.episodes - round(report["success_rate"] * args.episodes)
        bound = binomial_lower_bound(args.episodes, failures)
        _print(records.dumps({"task": task_name, "m": args.m, **report}))
        avg = report["avg_moves"]
        _print(f"success rate {report['success_rate']:.2%} over {args.episodes} episodes"
               f" (avg moves {avg:.2f})" if avg is not None else
               f"success rate {report['success_rate']:.2%} over {args.episodes} episodes")
        _print(f"with confidence {ONE_NAT_CONFIDENCE:.1%} the success rate is at least "
               f"{bound:.4%}")
    else:
        raise ConfigError(f"unknown task {task_name!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suites(args.scope, seed=args.seed)
    failed = 0
    for name, ok, detail in results:
        _print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    _print(f"{len(results) - failed}/{len(results)} properties hold")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def cmd_oracle(args) -> int:
    if args.rules == "builtin:shouldmove":
        program = shouldmove_fixture()
        clause_lines = None
    else:
        text = Path(args.rules).read_text()
        program = logic.parse_program(text)
        clause_lines = text
    facts = records.read_factset(args.facts)
    if args.plan:
        for cl in program.clauses:
            for line in logic.describe_plan(logic.compile_clause_plan(cl)):
                _print(line)
    derived = logic.forward_chain(program, facts)
    records.write_factset(args.out, derived)
    for schema in program.derived:
        count = int(derived.facts[schema.name].sum())
        _print(f"{schema.name}/{schema.arity}: {count} true groundings")
    _print(f"wrote {len(derived.facts)} groundings to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difflogic",
        description="differentiable logic machines: data, training, evaluation, verification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a dataset file")
    p.add_argument("--task", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train from a run-config file or a preset")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", default=None,
                   help="train a task with its preset settings (no config file)")
    p.add_argument("--seed", type=int, default=0, help="seed when using --preset")
    p.add_argument("--out", default=None, help="output dir when using --preset")
    p.add_argument("--deterministic", action="store_true",
                   help="force determinism mode (zeroed wall times)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", default=None)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--episodes", type=int, default=1000,
                   help="episodes (RL) or instances (supervised)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample", action="store_true",
                   help="sample actions instead of greedy selection")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--scope", default="all",
                   choices=["gradcheck", "oracle", "shapes", "equivariance", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("oracle", help="forward-chain a rule file over facts")
    p.add_argument("--rules", required=True,
                   help="rule file path or builtin:shouldmove")
    p.add_argument("--facts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plan", action="store_true",
                   help="print the compiled plan for every clause")
    p.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, logic.ParseError, logic.StratificationError,
            logic.ClauseError) as exc:
        _print(f"config error: {exc}")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        _print(f"runtime failure: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

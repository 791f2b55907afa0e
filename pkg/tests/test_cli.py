import json
import math
from pathlib import Path

import numpy as np
import pytest

from difflogic import cli, logic
from difflogic import predtensor as pt
from difflogic.blocks_rules import RULES_TEXT
from difflogic.checkpoint import load_checkpoint, save_checkpoint
from difflogic.cli import ONE_NAT_CONFIDENCE, binomial_lower_bound, main
from difflogic.presets import PRESETS, build_model
from difflogic.records import read_dataset, read_factset, write_factset
from difflogic.tasks.blocks import BlocksEnv


def run_cli(*argv):
    return main(list(argv))


# --------------------------------------------------------------------- presets

def test_presets_byte_match_embedded_table():
    expected = {
        # task: (depth, breadth, residual)
        "hasfather": (4, 3, False),
        "hassister": (4, 3, False),
        "isgrandparent": (4, 3, False),
        "isuncle": (5, 3, False),
        "ismguncle": (6, 3, False),
        "adjacenttored": (4, 3, False),
        "4connectivity": (4, 3, False),
        "6connectivity": (6, 3, False),
        "1outdegree": (4, 3, False),
        "2outdegree": (4, 3, False),
        "shouldmove": (7, 2, True),
        "sorting": (3, 2, False),
        "path": (5, 3, True),
        "blocksworld": (7, 2, True),
    }
    assert set(PRESETS) == set(expected)
    for task, (depth, breadth, residual) in expected.items():
        p = PRESETS[task]
        assert (p.depth, p.breadth, p.residual) == (depth, breadth, residual), task
        assert p.channels == 8 and p.lr == 0.005 and p.batch == 4
    for task in ("sorting", "path", "blocksworld"):
        p = PRESETS[task]
        assert p.omega == 0.5 and p.gamma == 0.99
    assert PRESETS["sorting"].beta == 0.01 and PRESETS["path"].beta == 0.01
    assert PRESETS["blocksworld"].beta == 0.05  # own choice; its table row is unavailable
    assert PRESETS["sorting"].m_range == (4, 10)
    assert PRESETS["blocksworld"].m_range == (2, 5)
    assert PRESETS["blocksworld"].aux_weight == 0.1
    assert PRESETS["path"].env_kwargs == {"max_distance": 5, "balanced": True, "bias": 3}
    assert PRESETS["path"].eval_kwargs == {"exact_distance": 4}


# -------------------------------------------------------------------- generate

def test_generate_is_deterministic_and_seed_sensitive(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    c = tmp_path / "c.jsonl"
    assert run_cli("generate", "--task", "hasfather", "--m", "6",
                   "--count", "5", "--seed", "7", "--out", str(a)) == 0
    assert run_cli("generate", "--task", "hasfather", "--m", "6",
                   "--count", "5", "--seed", "7", "--out", str(b)) == 0
    assert run_cli("generate", "--task", "hasfather", "--m", "6",
                   "--count", "5", "--seed", "8", "--out", str(c)) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_generate_count_zero_writes_header_only(tmp_path):
    out = tmp_path / "empty.jsonl"
    assert run_cli("generate", "--task", "sorting", "--m", "5",
                   "--count", "0", "--seed", "1", "--out", str(out)) == 0
    header, rows = read_dataset(out)
    assert header["count"] == 0 and rows == []
    assert header["task"] == "sorting"


def test_generate_rl_snapshots_roundtrip(tmp_path):
    out = tmp_path / "blocks.jsonl"
    assert run_cli("generate", "--task", "blocksworld", "--m", "3",
                   "--count", "4", "--seed", "2", "--out", str(out)) == 0
    header, rows = read_dataset(out)
    env = BlocksEnv.from_snapshot(rows[0]["snapshot"])
    assert env.n_blocks == 3


# ----------------------------------------------------------- configs and train

def write_config(path, **kw):
    path.write_text(json.dumps(kw))
    return str(path)


def test_config_rejects_unknown_keys(tmp_path):
    cfg = write_config(tmp_path / "c.json", version=1, task="hasfather",
                       out_dir=str(tmp_path / "run"), bogus=3)
    assert run_cli("train", "--config", cfg) == cli.EXIT_CONFIG

    cfg = write_config(tmp_path / "c2.json", version=1, task="hasfather",
                       out_dir=str(tmp_path / "run"),
                       trainer={"exam_episodes": 5})
    assert run_cli("train", "--config", cfg) == cli.EXIT_CONFIG

    cfg = write_config(tmp_path / "c3.json", version=2, task="hasfather",
                       out_dir=str(tmp_path / "run"))
    assert run_cli("train", "--config", cfg) == cli.EXIT_CONFIG


def test_supervised_train_eval_and_determinism(tmp_path):
    def cfg_for(out):
        return write_config(
            tmp_path / f"{out}.json", version=1, task="hasfather", seed=5,
            deterministic=True, out_dir=str(tmp_path / out),
            overrides={"depth": 2},
            trainer={"max_examples": 80, "train_m": 5})

    assert run_cli("train", "--config", cfg_for("r1")) == 0
    assert run_cli("train", "--config", cfg_for("r2")) == 0
    ck1 = (tmp_path / "r1" / "model.ckpt").read_bytes()
    ck2 = (tmp_path / "r2" / "model.ckpt").read_bytes()
    assert ck1 == ck2
    log1 = (tmp_path / "r1" / "train.log.jsonl").read_bytes()
    log2 = (tmp_path / "r2" / "train.log.jsonl").read_bytes()
    assert log1 == log2

    assert run_cli("eval", "--checkpoint", str(tmp_path / "r1" / "model.ckpt"),
                   "--m", "5", "--episodes", "10", "--seed", "0") == 0


def test_supervised_resume_reproduces_one_shot_run(tmp_path):
    full_cfg = write_config(
        tmp_path / "full.json", version=1, task="hasfather", seed=9,
        deterministic=True, out_dir=str(tmp_path / "full"),
        overrides={"depth": 2}, trainer={"max_examples": 80, "train_m": 5})
    half_cfg = write_config(
        tmp_path / "half.json", version=1, task="hasfather", seed=9,
        deterministic=True, out_dir=str(tmp_path / "half"),
        overrides={"depth": 2}, trainer={"max_examples": 40, "train_m": 5})
    resumed_cfg = write_config(
        tmp_path / "resumed.json", version=1, task="hasfather", seed=9,
        deterministic=True, out_dir=str(tmp_path / "resumed"),
        overrides={"depth": 2}, trainer={"max_examples": 80, "train_m": 5})

    assert run_cli("train", "--config", full_cfg) == 0
    assert run_cli("train", "--config", half_cfg) == 0
    assert run_cli("train", "--config", resumed_cfg,
                   "--resume", str(tmp_path / "half" / "model.ckpt")) == 0
    assert ((tmp_path / "full" / "model.ckpt").read_bytes()
            == (tmp_path / "resumed" / "model.ckpt").read_bytes())


def test_train_with_preset_flag(tmp_path, monkeypatch):
    # the config-less quick path trains straight from the preset table
    import difflogic.cli as cli_mod
    from difflogic.presets import PRESETS
    import dataclasses
    small = dataclasses.replace(PRESETS["hasfather"], max_examples=40, train_m=4)
    monkeypatch.setitem(cli_mod.PRESETS, "hasfather", small)
    out = tmp_path / "quick"
    assert run_cli("train", "--preset", "hasfather", "--seed", "1",
                   "--out", str(out), "--deterministic") == 0
    assert (out / "model.ckpt").exists()
    log_lines = (out / "train.log.jsonl").read_text().splitlines()
    assert all(json.loads(line)["wall_time"] == 0.0 for line in log_lines)


def test_train_requires_config_or_preset():
    assert run_cli("train") == cli.EXIT_CONFIG


def test_eval_errors(tmp_path):
    rng = np.random.default_rng(0)
    model = build_model("hasfather", rng, depth=2)
    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(ckpt, model, "hasfather", 0)
    assert run_cli("eval", "--checkpoint", str(ckpt), "--m", "5",
                   "--episodes", "0") == cli.EXIT_CONFIG
    assert run_cli("eval", "--checkpoint", str(ckpt), "--task", "sorting",
                   "--m", "5", "--episodes", "3") == cli.EXIT_CONFIG


def test_eval_reports_are_reproducible(tmp_path, capsys):
    rng = np.random.default_rng(0)
    model = build_model("sorting", rng)
    ckpt = tmp_path / "s.ckpt"
    save_checkpoint(ckpt, model, "sorting", 0)

    def report():
        assert run_cli("eval", "--checkpoint", str(ckpt), "--m", "4",
                       "--episodes", "20", "--seed", "3") == 0
        return capsys.readouterr().out

    assert report() == report()


# ------------------------------------------------------------------ checkpoint

def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    model = build_model("path", rng)
    path = tmp_path / "p.ckpt"
    save_checkpoint(path, model, "path", 42, metadata={"note": 1},
                    extra_arrays={"adam.m.x": np.ones(3)})
    loaded, header, extra = load_checkpoint(path)
    assert header["task"] == "path" and header["rng_seed"] == 42
    assert loaded.config.depth == model.config.depth
    from difflogic.machine import named_arrays
    a, b = named_arrays(model), named_arrays(loaded)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    np.testing.assert_array_equal(extra["adam.m.x"], np.ones(3))


# --------------------------------------------------------------------- bounds

def test_binomial_lower_bound_anchor_points():
    # 1000 flawless samples certify at least 99.9% at the stated confidence
    assert binomial_lower_bound(1000, 0) >= 0.999
    # the 100k-sample flawless statement: at least 99.98%
    assert binomial_lower_bound(100_000, 0) >= 0.9998
    assert math.isclose(binomial_lower_bound(1000, 0),
                        math.exp(math.log(1 - ONE_NAT_CONFIDENCE) / 1000))
    # with failures the bound drops below the point estimate
    b = binomial_lower_bound(1000, 10)
    assert 0.97 < b < 0.99


def test_binomial_lower_bound_is_calibrated():
    # P(X <= k | p = bound) should equal 1 - confidence
    n, k = 500, 5
    p = binomial_lower_bound(n, k)
    from math import comb
    tail = sum(comb(n, j) * (1 - p) ** j * p ** (n - j) for j in range(k + 1))
    assert tail == pytest.approx(1 - ONE_NAT_CONFIDENCE, rel=1e-6)


# ---------------------------------------------------------------------- verify

def test_verify_all_passes(capsys):
    assert run_cli("verify", "--scope", "shapes") == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out


def test_tampered_reduce_fails_oracle_suite(monkeypatch, capsys):
    from difflogic import verify as verify_mod

    original = pt.reduce

    def tampered(t):
        # wrong neutral element: the forall block sees masked entries as 0
        in_mask = np.ones((t.m,) * t.arity, dtype=bool)
        out_mask = pt.valid_mask(t.m, t.arity - 1)
        from difflogic import autodiff as ad
        exists = ad.masked_extremum(t.values, "max", pt.valid_mask(t.m, t.arity), out_mask)
        forall = ad.masked_extremum(t.values, "min", in_mask, out_mask)
        return pt.PredTensor(t.m, t.arity - 1, ad.concat_last([exists, forall]))

    monkeypatch.setattr(logic.pt, "reduce", tampered)
    results = verify_mod.oracle_suite(seed=0, n_programs=20, n_clause_checks=10)
    monkeypatch.setattr(logic.pt, "reduce", original)
    assert any(not ok for _, ok, _ in results)
    # the targeted masked-diagonal case must be among the failures
    named = {name: ok for name, ok, _ in results}
    assert not named["oracle/forall_negation_masked_diagonal"]


# ---------------------------------------------------------------------- oracle

def test_oracle_command_on_shouldmove_fixture(tmp_path, capsys):
    env = BlocksEnv(2, {0: (0, 0), 2: (2, 1), 1: (2, 2)},
                    {0: (0, 0), 1: (1, 1), 2: (1, 2)})
    facts_path = tmp_path / "facts.jsonl"
    write_factset(facts_path, env.factset())
    out_path = tmp_path / "derived.jsonl"
    assert run_cli("oracle", "--rules", "builtin:shouldmove",
                   "--facts", str(facts_path), "--out", str(out_path),
                   "--plan") == 0
    printed = capsys.readouterr().out
    assert "ShouldMove" in printed and "plan for:" in printed
    derived = read_factset(out_path)
    assert derived.facts["ShouldMove"][1] and derived.facts["ShouldMove"][2]


def test_oracle_command_empty_rules_echoes_facts(tmp_path):
    rules = tmp_path / "rules.txt"
    rules.write_text("# nothing here\n")
    facts_path = tmp_path / "facts.jsonl"
    facts = logic.FactSet(3)
    facts.add("P", 1, np.array([True, False, True]))
    write_factset(facts_path, facts)
    out_path = tmp_path / "out.jsonl"
    assert run_cli("oracle", "--rules", str(rules), "--facts", str(facts_path),
                   "--out", str(out_path)) == 0
    echoed = read_factset(out_path)
    np.testing.assert_array_equal(echoed.facts["P"], facts.facts["P"])


def test_oracle_command_cyclic_rules_error(tmp_path, capsys):
    rules = tmp_path / "rules.txt"
    rules.write_text("A(x) <- B(x)\nB(x) <- A(x)\n")
    facts_path = tmp_path / "facts.jsonl"
    write_factset(facts_path, logic.FactSet(2))
    assert run_cli("oracle", "--rules", str(rules), "--facts", str(facts_path),
                   "--out", str(tmp_path / "o.jsonl")) == cli.EXIT_CONFIG
    out = capsys.readouterr().out
    assert "cyclic" in out and "A" in out and "B" in out


def test_oracle_command_parse_error_position(tmp_path, capsys):
    rules = tmp_path / "rules.txt"
    rules.write_text("A(x) <- B(x\n")
    facts_path = tmp_path / "facts.jsonl"
    write_factset(facts_path, logic.FactSet(2))
    assert run_cli("oracle", "--rules", str(rules), "--facts", str(facts_path),
                   "--out", str(tmp_path / "o.jsonl")) == cli.EXIT_CONFIG
    assert "line 1" in capsys.readouterr().out

"""Line-delimited dataset records and fact-set files.

Every file is JSONL with a header record first; json.dumps uses sorted keys
so identical content is byte-identical.
"""

import json

import numpy as np

from . import predtensor as pt
from .logic import FactSet


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def snapshot_to_json(task: str, snapshot):
    if task == "sorting":
        return list(snapshot)
    if task == "path":
        edges, start, target = snapshot
        return {"edges": np.asarray(edges, dtype=int).tolist(),
                "start": int(start), "target": int(target)}
    if task == "blocksworld":
        n_blocks, operating, target = snapshot
        return {
            "n": int(n_blocks),
            "operating": sorted([int(b), int(x), int(y)] for b, (x, y) in operating.items()),
            "target": sorted([int(b), int(x), int(y)] for b, (x, y) in target.items()),
        }
    raise KeyError(f"unknown task {task!r}")


def snapshot_from_json(task: str, payload):
    if task == "sorting":
        return tuple(payload)
    if task == "path":
        return (np.asarray(payload["edges"], dtype=bool),
                payload["start"], payload["target"])
    if task == "blocksworld":
        return (payload["n"],
                {b: (x, y) for b, x, y in payload["operating"]},
                {b: (x, y) for b, x, y in payload["target"]})
    raise KeyError(f"unknown task {task!r}")


def write_supervised_dataset(path, task_name: str, m: int, seed: int, rows):
    """rows: iterable of (premise dict arity->PredTensor, labels array)."""
    with open(path, "w", encoding="utf-8") as fh:
        count = 0
        body = []
        for tensors, labels in rows:
            record = {
                "premises": {str(r): pt.to_record(t) for r, t in tensors.items()},
                "labels": np.asarray(labels).astype(int).tolist(),
            }
            body.append(dumps(record))
            count += 1
        header = {"kind": "supervised", "version": 1, "task": task_name,
                  "m": m, "seed": seed, "count": count}
        fh.write(dumps(header) + "\n")
        for line in body:
            fh.write(line + "\n")


def write_rl_dataset(path, task_name: str, m: int, seed: int, snapshots):
    with open(path, "w", encoding="utf-8") as fh:
        body = [dumps({"snapshot": snapshot_to_json(task_name, s)}) for s in snapshots]
        header = {"kind": "rl", "version": 1, "task": task_name,
                  "m": m, "seed": seed, "count": len(body)}
        fh.write(dumps(header) + "\n")
        for line in body:
            fh.write(line + "\n")


def read_dataset(path):
    """Returns (header, list of row dicts); premises are decoded tensors."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    rows = []
    for line in lines[1:]:
        raw = json.loads(line)
        if "premises" in raw:
            raw["premises"] = {int(r): pt.from_record(rec)
                               for r, rec in raw["premises"].items()}
            raw["labels"] = np.asarray(raw["labels"], dtype=np.intp)
        elif "snapshot" in raw:
            raw["snapshot"] = snapshot_from_json(header["task"], raw["snapshot"])
        rows.append(raw)
    return header, rows


def write_factset(path, facts: FactSet):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps({"kind": "factset", "version": 1, "m": facts.m}) + "\n")
        for name in sorted(facts.facts):
            grounding = facts.facts[name]
            tuples = [list(map(int, idx)) for idx in np.argwhere(grounding)]
            fh.write(dumps({"pred": name, "arity": grounding.ndim,
                            "tuples": tuples}) + "\n")


def read_factset(path) -> FactSet:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    header = json.loads(lines[0])
    if header.get("kind") != "factset":
        raise ValueError(f"{path}: not a factset file")
    facts = FactSet(int(header["m"]))
    for line in lines[1:]:
        raw = json.loads(line)
        grounding = np.zeros((facts.m,) * raw["arity"], dtype=bool)
        for idx in raw["tuples"]:
            grounding[tuple(idx)] = True
        facts.add(raw["pred"], raw["arity"], grounding)
    return facts

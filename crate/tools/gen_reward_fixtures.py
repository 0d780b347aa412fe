"""Writes crates/core/tests/data/reward_transcripts.jsonl.

Each line holds a task record, a completion and the expected reward report,
computed here straight from the reward formulas with rdkit deciding
molecule validity and canonical identity. Requires rdkit.
"""

import json
import os

from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "tests", "data", "reward_transcripts.jsonl")


def block(raw, open_, close, start=0):
    i = raw.find(open_, start)
    if i < 0:
        return None
    i += len(open_)
    j = raw.find(close, i)
    if j < 0:
        return None
    return i, j


def split(raw):
    think = block(raw, "<think>", "</think>")
    after = think[1] + len("</think>") if think else 0
    answer = block(raw, "<answer>", "</answer>", after)
    t = raw[think[0]:think[1]] if think else ""
    a = raw[answer[0]:answer[1]].strip() if answer else ""
    return t, a


def r_format(raw):
    return -1 + (raw.count("<think>") == 1) + (raw.count("</think>") == 1)


def r_think(t):
    return min(1.0, -1.0 + len(t) / 2500.0)


def close_len(a, g):
    return abs(len(a) - len(g)) < 3


def r_qa(a, g):
    return float(close_len(a, g) + (a == g) - 1)


def r_reg(a, g, lo, hi):
    try:
        av = float(a)
    except ValueError:
        return -1.0
    return float(close_len(a, g)) - abs(av - float(g)) / (hi - lo)


def valid(a):
    if not a:
        return None
    m = Chem.MolFromSmiles(a)
    return Chem.MolToSmiles(m) if m is not None and m.GetNumAtoms() > 0 else None


def r_gen(a, truth):
    c = valid(a)
    if truth is None:
        return 1.0 if c else -1.0
    canon = {Chem.MolToSmiles(Chem.MolFromSmiles(s)) for s in truth}
    return 1.0 if c in canon else -1.0


def record(kind, answer, **extra):
    answer_type = {"kind": kind, **extra}
    return {
        "category": "2d_molecule",
        "task_id": "demo_" + kind,
        "prompt_templates": ["Consider {mol}. Answer."],
        "entities": {"mol": {"format": "smiles", "value": "CCO"}},
        "answer": answer,
        "answer_type": answer_type,
    }


CASES = [
    (record("classification", "True", labels=["True", "False"]),
     "<think>" + "x" * 5000 + "</think><answer>True</answer>"),
    (record("classification", "True", labels=["True", "False"]),
     "<think>ring count</think><answer>False</answer>"),
    (record("classification", "True", labels=["True", "False"]),
     "<answer>True, because the ring is aromatic</answer>"),
    (record("classification", "True", labels=["True", "False"]), ""),
    (record("regression", "5.0", range=[0.0, 10.0]),
     "<think>" + "y" * 2500 + "</think><answer>3.0</answer>"),
    (record("regression", "5.0", range=[0.0, 10.0]),
     "<think>a<think>b</think><answer>3.14159</answer>"),
    (record("regression", "-1.25", range=[-3.5, 4.5]),
     "<think>" + "z" * 1234 + "</think>\n<answer> about two </answer>"),
    (record("generation", "CC(=O)O", ground_truth=["CC(=O)O", "OCC"]),
     "<think>" + "w" * 9000 + "</think><answer>OC(C)=O</answer>"),
    (record("generation", "CC(=O)O", ground_truth=["CC(=O)O"]),
     "<think>acid</think><answer>c1ccccc1</answer>"),
    (record("generation", "CC(=O)O"),
     "<think>anything valid</think><answer>c1ccccc1O</answer>"),
    (record("generation", "CC(=O)O"),
     "</think><answer>C1CC</answer>"),
]


def main():
    with open(OUT, "w") as fh:
        for rec, raw in CASES:
            t, a = split(raw)
            at = rec["answer_type"]
            if at["kind"] == "classification":
                name, task = "r_qa", r_qa(a, rec["answer"])
            elif at["kind"] == "regression":
                name, task = "r_reg", r_reg(a, rec["answer"], *at["range"])
            elif "ground_truth" in at:
                name, task = "r_gen_gt", r_gen(a, at["ground_truth"])
            else:
                name, task = "r_gen_only", r_gen(a, None)
            f, th = float(r_format(raw)), r_think(t)
            report = {
                "r_format": f,
                "r_think": th,
                "r_task": task,
                "total": f + th + task,
                "components": {"r_format": f, "r_think": th, name: task},
            }
            fh.write(json.dumps({"task": rec, "completion": raw, "expected": report}) + "\n")


if __name__ == "__main__":
    main()

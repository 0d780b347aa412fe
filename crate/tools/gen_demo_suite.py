"""Writes the 50-example demo suite under crates/core/data/demo.

Besides the suite, example files and scripted mock responses, it writes
expected.json with accuracy, MAE, RMSE and validity worked out here from the
scripted answers (median, majority vote, rdkit canonical identity).
Requires rdkit.
"""

import json
import math
import os
import statistics

from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "data", "demo")


def canon(s):
    m = Chem.MolFromSmiles(s)
    return Chem.MolToSmiles(m) if m is not None and m.GetNumAtoms() > 0 else None


def ans(x, think="checking the structure"):
    return "<think>%s</think><answer>%s</answer>" % (think, x)


INPUTS = ["CCO", "CCCO", "c1ccccc1", "CC(C)O", "CCN", "CCOC", "CC=O", "C1CCCCC1", "CCCl", "CC#N",
          "CCCC", "CCC(C)C", "c1ccncc1", "CC(=O)C", "OCC=C", "CCCCO", "C=CC=C", "CSC", "CCCN", "Cc1ccccc1"]


def classification():
    recs, scripts, correct, valid, total = [], [], 0, 0, 0
    for i in range(20):
        truth = "True" if i % 2 == 0 else "False"
        wrong = "False" if truth == "True" else "True"
        recs.append({
            "category": "2d_molecule", "task_id": "demo_bbbp",
            "prompt_templates": ["Does {mol} cross the blood-brain barrier?", "Is {mol} able to cross the BBB?"],
            "entities": {"mol": {"format": "smiles", "value": INPUTS[i]}},
            "answer": truth,
            "answer_type": {"kind": "classification", "labels": ["True", "False"]},
        })
        if i < 14:
            texts = [truth] * 3
        elif i < 17:
            texts = [wrong, truth, wrong]
        elif i < 19:
            texts = [truth, "Maybe", truth]
        else:
            texts = None
        responses = []
        for r in range(3):
            if texts is None:
                responses.append("I am not sure.")
                continue
            p_true = 0.55 + 0.02 * i if texts[r] == "True" else 0.45 - 0.02 * i
            p_true = min(max(p_true, 0.05), 0.95)
            responses.append({"text": ans(texts[r]),
                              "logprobs": {"True": math.log(p_true), "False": math.log(1 - p_true)}})
        scripts.append({"id": "demo_bbbp#%d" % i, "responses": responses})
        labels = [t for t in (texts or []) if t in ("True", "False")]
        total += 3
        valid += len(labels)
        if labels:
            counts = {l: labels.count(l) for l in sorted(set(labels))}
            best = max(sorted(counts), key=lambda l: (counts[l], -sorted(counts).index(l)))
            correct += best == truth
    return recs, scripts, {"accuracy": correct / 20, "validity": valid / total}


def regression():
    recs, scripts, errs, valid, total = [], [], [], 0, 0
    for i in range(20):
        truth = round(-2 + 0.35 * i, 2)
        recs.append({
            "category": "2d_molecule", "task_id": "demo_logp",
            "prompt_templates": ["Predict the logP of {mol}.", "What is the octanol-water partition coefficient of {mol}?"],
            "entities": {"mol": {"format": "smiles", "value": INPUTS[i]}},
            "answer": "%.2f" % truth,
            "answer_type": {"kind": "regression", "range": [-3.0, 6.0]},
        })
        if i < 16:
            texts = ["%.2f" % (truth + d) for d in (0.1, -0.2, 0.3)]
        else:
            texts = ["n/a", "%.2f" % (truth + 0.4), "%.2f" % (truth + 0.6)]
        scripts.append({"id": "demo_logp#%d" % i, "responses": [ans(t) for t in texts]})
        nums = []
        for t in texts:
            try:
                nums.append(float(t))
            except ValueError:
                pass
        total += 3
        valid += len(nums)
        errs.append(statistics.median(nums) - float("%.2f" % truth))
    mae = sum(abs(e) for e in errs) / len(errs)
    rmse = math.sqrt(sum(e * e for e in errs) / len(errs))
    return recs, scripts, {"mae": mae, "rmse": rmse, "validity": valid / total}


TARGETS = ["OCCO", "OCCCO", "Oc1ccccc1", "CC(O)CO", "NCCO", "COCCO", "OCC=O", "OC1CCCCC1", "OCCCl", "N#CCO"]
WRITINGS = ["C(O)CO", "C(CO)CO", "c1cccc(O)c1", "OCC(C)O", "C(N)CO", "C(OC)CO", "O=CCO", "C1CC(O)CCC1", "ClCCCO", "OCC#N"]


def generation():
    recs, scripts, correct, valid, total = [], [], 0, 0, 0
    for i in range(10):
        recs.append({
            "category": "2d_molecule", "task_id": "demo_polar",
            "prompt_templates": ["Suggest a more polar analogue of {mol}.", "Edit {mol} to raise its polarity."],
            "entities": {"mol": {"format": "smiles", "value": INPUTS[i]}},
            "answer": TARGETS[i],
            "answer_type": {"kind": "generation", "ground_truth": [TARGETS[i]]},
        })
        if i < 7:
            texts = [WRITINGS[i], "CCCCCC", TARGETS[i]]
        elif i < 9:
            texts = ["C", TARGETS[i], "C"]
        else:
            texts = ["C1CC", "xyz", WRITINGS[i]]
        scripts.append({"id": "demo_polar#%d" % i, "responses": [ans(t) for t in texts]})
        mols = [c for c in map(canon, texts) if c is not None]
        total += 3
        valid += len(mols)
        counts = {m: mols.count(m) for m in mols}
        top = max(counts.values())
        best = sorted(m for m in counts if counts[m] == top)[0]
        correct += best == canon(TARGETS[i])
    return recs, scripts, {"accuracy": correct / 10, "validity": valid / total}


SUITE = """name = "demo"

[plan]
repetitions = 3
temperature = 0.0
max_tokens = 512

[plan.augmentation]
p_format_convert = 0.5
p_random_traversal = 0.5
p_input_isolation = 0.5

[[tasks]]
task_id = "demo_bbbp"
examples = "classification.jsonl"
metrics = ["accuracy", "auroc", "auprc", "validity"]

[[tasks]]
task_id = "demo_logp"
examples = "regression.jsonl"
metrics = ["mae", "rmse", "spearman", "validity"]

[[tasks]]
task_id = "demo_polar"
examples = "generation.jsonl"
metrics = ["accuracy", "validity", "similarity", "success_rate", "relative_improvement", "uniqueness"]
objectives = [{ property = "molecular_weight", maximize = true }]
"""


def main():
    os.makedirs(OUT, exist_ok=True)
    expected = {}
    scripts = []
    for name, fn, key in [("classification", classification, "demo_bbbp"),
                          ("regression", regression, "demo_logp"),
                          ("generation", generation, "demo_polar")]:
        recs, sc, exp = fn()
        with open(os.path.join(OUT, name + ".jsonl"), "w") as fh:
            for r in recs:
                fh.write(json.dumps(r) + "\n")
        scripts.extend(sc)
        expected[key] = exp
    with open(os.path.join(OUT, "mock.jsonl"), "w") as fh:
        for s in scripts:
            fh.write(json.dumps(s) + "\n")
    with open(os.path.join(OUT, "suite.toml"), "w") as fh:
        fh.write(SUITE)
    with open(os.path.join(OUT, "expected.json"), "w") as fh:
        json.dump(expected, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()

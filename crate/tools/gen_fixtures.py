"""Regenerates the frozen test fixtures under crates/core/tests/data.

Requires rdkit, selfies, numpy, scipy, scikit-learn and mpmath. The outputs
are committed; this script only documents how they were produced.
"""

import json
import os
import random

import mpmath
import numpy as np
import selfies as sf
from rdkit import Chem, RDConfig, RDLogger
from scipy.stats import spearmanr
from sklearn.metrics import average_precision_score, roc_auc_score

RDLogger.DisableLog("rdApp.*")

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "tests", "data")
NCI = os.path.join(RDConfig.RDDataDir, "NCI", "first_5K.smi")

SUPPORTED = set(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Ti V Cr Mn Fe Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Zr Mo Ru Rh Pd Ag Cd Te I Xe Ba Pt Au Hg Tl Bi Gd".split()
)

EXTRA = [
    "c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "O=c1cccc[nH]1",
    "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1", "c1cc[o+]cc1", "C[n+]1ccccc1", "[O-][n+]1ccccc1",
    "c1ccc(-c2ccccc2)cc1", "Cc1ncc[nH]1", "O=[N+]([O-])c1ccccc1",
    "C[S+](C)C", "C[N+](C)(C)C", "[NH4+].[Cl-]", "CC(=O)[O-].[Na+]", "OB(O)c1ccccc1",
    "C#N", "N#CC#N", "C=C=C", "O=C=O", "[13CH4]", "[2H]OC", "C1CC2CCC1C2",
    "C%10CC%10", "c1ccc2c(c1)ccc1ccccc12", "c1csc(-c2cccs2)c1", "c1ccc2ocnc2c1", "c1ncc2nc[nH]c2n1",
]

ELEMENT_PROBE = [
    "[N+](C)(C)(C)C", "[O-]C", "[C-](C)(C)C", "[CH3]", "[NH4+]", "[B-](C)(C)(C)C",
    "[S+](C)(C)C", "[S+](C)(C)(C)(C)C", "[Cl+](C)C", "[I+](C)C", "[Na+]", "[Na]C",
    "[Mg](C)C", "[Mg+2]", "[Zn](C)(C)C", "[Se](C)(C)(C)C", "I(C)(C)C", "[IH3]",
    "S(C)(C)(C)(C)(C)C", "[Li]C", "[K+]", "[H+]", "[H-]", "[H][H]", "[He]", "[N-](C)C",
    "[P+](C)(C)(C)C", "[Se+](C)(C)C", "[O+](C)(C)C", "[F+](C)C", "[C+](C)(C)C", "[B+](C)C",
    "C[S-]C", "[Cl-]", "[F-]", "[N+](C)(C)(C)(C)C", "[O-](C)C", "[C-](C)(C)(C)C",
    "[Al](C)(C)(C)C", "[Si](C)(C)(C)(C)C", "Br(C)C", "P(C)(C)(C)(C)(C)C",
    "S(C)(C)(C)(C)(C)(C)C", "[N-](C)(C)C", "[C+](C)(C)(C)C", "[Cl-]C",
    "C(C)(C)(C)(C)C", "CC(=O)O", "c1ccccc1", "n1cccc1", "c1ccc1", "[Fe](C)(C)(C)(C)(C)(C)C",
]


def element_ok(mol):
    return all(a.GetSymbol() in SUPPORTED for a in mol.GetAtoms())


def selfies_ok(smiles):
    try:
        sf.encoder(smiles)
        return True
    except sf.EncoderError:
        return False


def build_corpus():
    mols = []
    seen = set()
    for s in EXTRA:
        m = Chem.MolFromSmiles(s)
        can = Chem.MolToSmiles(m)
        if can not in seen:
            seen.add(can)
            mols.append(can)
    with open(NCI) as fh:
        for line in fh:
            smi = line.split()[0]
            m = Chem.MolFromSmiles(smi)
            if m is None or not element_ok(m):
                continue
            can = Chem.MolToSmiles(m)
            if can in seen or len(can) > 120 or not selfies_ok(can):
                continue
            seen.add(can)
            mols.append(can)
            if len(mols) == 1000:
                break
    return mols


def main():
    os.makedirs(OUT, exist_ok=True)
    corpus = build_corpus()
    assert len(corpus) == 1000
    with open(os.path.join(OUT, "corpus_1000.smi"), "w") as fh:
        fh.write("\n".join(corpus) + "\n")
    with open(os.path.join(OUT, "corpus_selfies.txt"), "w") as fh:
        for s in corpus:
            fh.write(sf.encoder(s) + "\n")
    with open(os.path.join(OUT, "valence_probe.tsv"), "w") as fh:
        for s in ELEMENT_PROBE:
            fh.write("%s\t%d\n" % (s, Chem.MolFromSmiles(s) is not None))

    rng = np.random.default_rng(20240611)
    metric_cases = []
    for case in range(3):
        y = rng.integers(0, 2, 20)
        y[0], y[1] = 0, 1
        scores = np.round(rng.random(20), 2)
        if case == 2:
            scores = np.round(scores, 1)  # force ties
        xs = np.round(rng.normal(size=20), 3)
        ys = np.round(xs * 0.5 + rng.normal(size=20), 1)
        metric_cases.append({
            "labels": [int(v) for v in y],
            "scores": [float(v) for v in scores],
            "auroc": float(roc_auc_score(y, scores)),
            "auprc": float(average_precision_score(y, scores)),
            "x": [float(v) for v in xs],
            "y": [float(v) for v in ys],
            "spearman": float(spearmanr(xs, ys).statistic),
        })
    mpmath.mp.dps = 50
    lp = [mpmath.mpf(1), mpmath.mpf(0), mpmath.mpf(-1)]
    z = sum(mpmath.exp(v) for v in lp)
    softmax = [float(mpmath.exp(v) / z) for v in lp]
    with open(os.path.join(OUT, "stats_golden.json"), "w") as fh:
        json.dump({"cases": metric_cases, "softmax_1_0_m1": softmax}, fh, indent=1)

    # Decoder differential: random strings over the reference robust
    # alphabet, decoded by the reference implementation.
    rng = random.Random(7)
    alphabet = sorted(sf.get_semantic_robust_alphabet())
    with open(os.path.join(OUT, "selfies_decode_ref.tsv"), "w") as fh:
        for _ in range(500):
            syms = [rng.choice(alphabet) for _ in range(rng.randint(1, 30))]
            s = "".join(syms)
            fh.write("%s\t%s\n" % (s, sf.decoder(s)))

    print("benzene selfies:", sf.encoder("c1ccccc1"))
    print("acetic acid selfies:", sf.encoder("CC(=O)O"))
    print("phenol rdkit canonical:", Chem.MolToSmiles(Chem.MolFromSmiles("c1ccccc1O")))


if __name__ == "__main__":
    main()

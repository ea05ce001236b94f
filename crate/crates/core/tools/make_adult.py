"""Builds the ADULT fixture: an 8-bit encoding of the UCI census data and a
degree-2 polynomial SVM trained on it.

    python3 make_adult.py ADULT_DIR OUT_DIR

ADULT_DIR holds the UCI `adult.data` and `adult.test` files. Writes
`adult_model.txt` and `adult_test.csv` into OUT_DIR.

Features, each scaled to 0..255:
  0-5   age, fnlwgt, education-num, capital-gain, capital-loss, hours-per-week
        (capital columns on a log scale)
  6-13  workclass, education, marital-status, occupation, relationship,
        race, sex, native-country; categories ranked by training-set
        positive rate
  14    any capital gain or loss
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.svm import SVC

COLS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital",
    "occupation", "relationship", "race", "sex", "capital_gain",
    "capital_loss", "hours", "country", "label",
]
NUMERIC = ["age", "fnlwgt", "education_num", "capital_gain", "capital_loss", "hours"]
LOG = {"capital_gain", "capital_loss"}
CATEGORICAL = ["workclass", "education", "marital", "occupation",
               "relationship", "race", "sex", "country"]
SEED = 7
TRAIN_N = 600
TEST_N = 1000
MAX_SV = 200


def read(path):
    df = pd.read_csv(path, names=COLS, skipinitialspace=True, comment="|")
    df["label"] = df["label"].str.rstrip(".").eq(">50K").astype(int)
    return df


def fit_encoder(train):
    enc = {}
    for c in NUMERIC:
        v = np.log1p(train[c]) if c in LOG else train[c].astype(float)
        enc[c] = (float(v.min()), float(v.max()))
    for c in CATEGORICAL:
        rate = train.groupby(c)["label"].mean().sort_values(kind="stable")
        n = max(len(rate) - 1, 1)
        enc[c] = {k: round(255 * i / n) for i, k in enumerate(rate.index)}
    return enc


def encode(df, enc):
    out = np.zeros((len(df), 15), dtype=np.int64)
    for j, c in enumerate(NUMERIC):
        v = np.log1p(df[c]) if c in LOG else df[c].astype(float)
        lo, hi = enc[c]
        out[:, j] = np.clip(np.round(255 * (v - lo) / (hi - lo)), 0, 255)
    for j, c in enumerate(CATEGORICAL):
        out[:, 6 + j] = df[c].map(enc[c]).fillna(0).astype(int)
    out[:, 14] = 255 * ((df["capital_gain"] > 0) | (df["capital_loss"] > 0))
    return out


def main(src, dst):
    src, dst = Path(src), Path(dst)
    train = read(src / "adult.data")
    test = read(src / "adult.test")
    enc = fit_encoder(train)
    rng = np.random.default_rng(SEED)

    tr = train.iloc[rng.choice(len(train), TRAIN_N, replace=False)]
    x, y = encode(tr, enc), tr["label"].to_numpy()
    gamma = 1.0 / (15 * 128.0 * 128.0)
    clf = SVC(kernel="poly", degree=2, gamma=gamma, coef0=1.0, C=1.0)
    clf.fit(x, y)
    nsv = len(clf.support_)
    if nsv > MAX_SV:
        keep = np.argsort(-np.abs(clf.dual_coef_[0]), kind="stable")[:MAX_SV]
        sv, alpha = clf.support_vectors_[keep], clf.dual_coef_[0][keep]
    else:
        sv, alpha = clf.support_vectors_, clf.dual_coef_[0]

    te = test.iloc[np.sort(rng.choice(len(test), TEST_N, replace=False))]
    xt, yt = encode(te, enc), te["label"].to_numpy()
    k = (gamma * xt @ sv.T + 1.0) ** 2
    rho = -float(clf.intercept_[0])
    f = k @ alpha - rho
    acc = float(np.mean((f > 0).astype(int) == yt))
    print(f"{nsv} support vectors, kept {len(alpha)}, held-out accuracy {acc:.4f}")

    lines = ["classes 2", "features 15", "degree 2",
             f"gamma {gamma!r}", "coef0 1.0"]
    # One machine per class; for two classes they mirror each other.
    for c, sign in ((0, -1.0), (1, 1.0)):
        lines += [f"class {c}", f"rho {sign * rho!r}"]
        for a, v in zip(alpha, sv):
            lines.append(" ".join([repr(sign * float(a))] + [str(int(t)) for t in v]))
    (dst / "adult_model.txt").write_text("\n".join(lines) + "\n")

    rows = ["label," + ",".join(f"f{i}" for i in range(15))]
    rows += [",".join(map(str, [int(l)] + list(map(int, r)))) for l, r in zip(yt, xt)]
    (dst / "adult_test.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:3])

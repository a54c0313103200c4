#!/usr/bin/env python3
"""Regenerates the bundled mini corpus under data/mini.

Deterministic: a fixed seed drives every random draw. Needs the built CLI,
because base-model predictions score the synthetic domain labels, whose ids
come from clustering the label embeddings:

    python3 tools/make_mini_corpus.py --cli build/tools/typedom --out data/mini
"""

import argparse
import itertools
import json
import random
import subprocess
import tempfile
from pathlib import Path

SEED = 20240611
DIM = 25

GROUPS = [
    ["fire truck", "fire engine", "ambulance", "police car", "air ambulance"],
    ["play", "opera", "concert", "ballet", "musical"],
    ["hip", "knee", "ankle", "elbow", "shoulder"],
    ["student", "teacher", "professor", "pupil", "lecturer"],
    ["agency", "bureau", "ministry", "department", "office"],
    ["football", "tennis", "golf", "hockey", "cricket"],
]

# Same-group pairs that may co-occur; every other same-group pair is a
# conceptual neighbour (mutually exclusive).
COMPATIBLE = {
    frozenset(p)
    for p in [
        ("fire truck", "fire engine"),
        ("ambulance", "air ambulance"),
        ("play", "musical"),
        ("student", "pupil"),
        ("professor", "lecturer"),
        ("teacher", "lecturer"),
        ("teacher", "professor"),
        ("agency", "bureau"),
        ("ministry", "department"),
        ("department", "office"),
        ("bureau", "office"),
    ]
}
# Compatible, but the scorer gets it wrong.
WRONG_PAIR = frozenset(("professor", "lecturer"))
WRONG_SCORE = 0.6

EXTRA_WORDS = ["the", "of", "and", "city", "river", "blue", "quickly", "table"]

SENTENCES = [
    "Yesterday the {m} was mentioned twice.",
    "Everyone talked about the {m} after lunch.",
    "A report on the {m} appeared in the local news.",
    "Nobody expected the {m} to be there.",
    "The {m} drew a large crowd in Zürich.",
]


def group_of(label):
    for g, members in enumerate(GROUPS):
        if label in members:
            return g
    raise KeyError(label)


def is_cn(a, b):
    return a != b and group_of(a) == group_of(b) and frozenset((a, b)) not in COMPATIBLE


def fmt(x):
    return f"{x:.6f}"


def token_embeddings(rng):
    centers = []
    for g in range(len(GROUPS)):
        v = [0.0] * DIM
        v[g * 4] = 1.0
        v[g * 4 + 1] = 0.3
        centers.append(v)
    vectors = {}
    for g, members in enumerate(GROUPS):
        for label in members:
            for tok in label.split():
                if tok not in vectors:
                    vectors[tok] = [c + rng.gauss(0.0, 0.05) for c in centers[g]]
    for w in EXTRA_WORDS:
        vectors[w] = [rng.gauss(0.0, 0.3) for _ in range(DIM)]
    return vectors


# Gold label sets per split. Each entry: (gold labels, error kind) where the
# kind decides how the simulated base model gets it wrong.
#   ok       all gold labels confidently predicted
#   missing  gold labels under threshold, but the domain label is predicted
#   conflict a conceptual neighbour of the gold label is also predicted
#   spurious an unrelated label from another group is predicted
def plan(rng):
    singles = [l for g in GROUPS for l in g]
    pairs = sorted(tuple(sorted(p)) for p in COMPATIBLE)
    train = []
    for i in range(20):
        if i % 3 == 0:
            train.append(list(pairs[i % len(pairs)]))
        else:
            train.append([singles[(i * 7) % len(singles)]])
    dev = [
        (["professor", "lecturer"], "ok"),
        (["professor", "lecturer"], "ok"),
        (["hip"], "conflict"),
        (["opera"], "conflict"),
        (["tennis"], "conflict"),
        (["ambulance"], "missing"),
        (["pupil"], "missing"),
        (["agency", "bureau"], "ok"),
        (["knee"], "ok"),
        (["golf"], "spurious"),
        (["fire truck", "fire engine"], "ok"),
        (["elbow"], "conflict"),
    ]
    test = [
        (["professor", "lecturer"], "ok"),
        (["teacher", "professor"], "ok"),
        (["ankle"], "conflict"),
        (["ballet"], "conflict"),
        (["cricket"], "conflict"),
        (["police car"], "conflict"),
        (["student"], "conflict"),
        (["concert"], "missing"),
        (["ministry"], "missing"),
        (["shoulder"], "missing"),
        (["football"], "ok"),
        (["department", "office"], "ok"),
        (["play", "musical"], "ok"),
        (["hockey"], "spurious"),
        (["air ambulance", "ambulance"], "ok"),
        (["hip"], "ok"),
        (["lecturer"], "conflict"),
        (["bureau"], "missing"),
    ]
    return train, dev, test


def example(id_, labels, rng):
    template = SENTENCES[rng.randrange(len(SENTENCES))]
    mention = labels[0]
    sentence = template.format(m=mention)
    start = sentence.index(mention)
    # code-point offsets; str indices already are code points
    return {"id": id_, "sentence": sentence, "mention": [start, start + len(mention)], "labels": labels}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_domains(path):
    doc = json.loads(Path(path).read_text())
    return [c for clustering in doc["clusterings"] for c in clustering["clusters"]]


def predict(labels, kind, clusters, rng):
    vocab = [l for g in GROUPS for l in g]
    scores = {l: round(rng.uniform(0.01, 0.3), 4) for l in vocab}
    gold_group = group_of(labels[0])
    if kind == "missing":
        for l in GROUPS[gold_group]:
            scores[l] = round(rng.uniform(0.1, 0.3), 4)
        for l in labels:
            scores[l] = round(rng.uniform(0.36, 0.45), 4)
    else:
        for l in labels:
            scores[l] = round(rng.uniform(0.75, 0.95), 4)
    if kind == "conflict":
        rivals = [l for l in GROUPS[gold_group] if all(is_cn(l, g) for g in labels)]
        rival = rivals[rng.randrange(len(rivals))]
        scores[rival] = round(rng.uniform(0.55, 0.7), 4)
    if kind == "spurious":
        other = GROUPS[(gold_group + 3) % len(GROUPS)]
        scores[other[rng.randrange(len(other))]] = round(rng.uniform(0.55, 0.65), 4)
    for c in clusters:
        hit = any(l in c["members"] for l in labels)
        scores[c["id"]] = round(rng.uniform(0.7, 0.9), 4) if hit else round(rng.uniform(0.01, 0.2), 4)
    return dict(sorted(scores.items()))


def cn_fixture(clusters, rng):
    pairs = set()
    for c in clusters:
        for a, b in itertools.combinations(sorted(c["members"]), 2):
            pairs.add((a, b))
    rows = []
    for a, b in sorted(pairs):
        for p, h in ((a, b), (b, a)):
            if frozenset((a, b)) == WRONG_PAIR:
                s = WRONG_SCORE
            elif is_cn(a, b):
                s = round(rng.uniform(0.9, 0.99), 4)
            else:
                s = round(rng.uniform(0.02, 0.35), 4)
            rows.append({"a": p, "b": h, "score": s})
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True, help="path to the built typedom binary")
    ap.add_argument("--out", default="data/mini")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)

    vectors = token_embeddings(rng)
    with open(out / "embeddings.txt", "w") as f:
        for w in sorted(vectors):
            f.write(w + " " + " ".join(fmt(x) for x in vectors[w]) + "\n")
    (out / "labels.txt").write_text("".join(l + "\n" for g in GROUPS for l in g))

    train_plan, dev_plan, test_plan = plan(rng)
    write_jsonl(out / "train.jsonl", [example(f"train-{i:02d}", ls, rng) for i, ls in enumerate(train_plan)])
    write_jsonl(out / "dev.jsonl", [example(f"dev-{i:02d}", ls, rng) for i, (ls, _) in enumerate(dev_plan)])
    write_jsonl(out / "test.jsonl", [example(f"test-{i:02d}", ls, rng) for i, (ls, _) in enumerate(test_plan)])

    with tempfile.TemporaryDirectory() as tmp:
        domains_path = Path(tmp) / "domains.json"
        subprocess.run(
            [args.cli, "--log-level", "warn", "cluster", "--embeddings", str(out / "embeddings.txt"),
             "--labels", str(out / "labels.txt"), "--out", str(domains_path)],
            check=True,
        )
        clusters = load_domains(domains_path)

    write_jsonl(out / "dev_preds.jsonl",
                [{"id": f"dev-{i:02d}", "scores": predict(ls, k, clusters, rng)} for i, (ls, k) in enumerate(dev_plan)])
    write_jsonl(out / "test_preds.jsonl",
                [{"id": f"test-{i:02d}", "scores": predict(ls, k, clusters, rng)} for i, (ls, k) in enumerate(test_plan)])
    write_jsonl(out / "cn_fixture.jsonl", cn_fixture(clusters, rng))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Independent reference values for the metric fixtures.

Regenerate with: python3 gen_metric_oracle.py > metric_oracle.json
"""
import json
import random
import string
from collections import Counter

PUNCT = set(string.punctuation)


def tokens(text):
    out = []
    for chunk in text.split():
        lo, hi = 0, len(chunk)
        while lo < hi and chunk[lo] in PUNCT:
            lo += 1
        while hi > lo and chunk[hi - 1] in PUNCT:
            hi -= 1
        out.extend(chunk[:lo])
        if lo < hi:
            out.append(chunk[lo:hi])
        out.extend(chunk[max(hi, lo):])
    return out


def normalize(text):
    return [t for t in tokens(text.lower()) if not all(c in PUNCT for c in t)]


def token_f1(pred, gold):
    p, g = normalize(pred), normalize(gold)
    exact = int(p == g)
    if not p or not g:
        return (1.0 if not p and not g else 0.0), exact
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0, exact
    prec, rec = common / len(p), common / len(g)
    return 2 * prec * rec / (prec + rec), exact


def prf(correct, npred, ngold):
    p = correct / npred if npred else 0.0
    r = correct / ngold if ngold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def span_prf(pred, gold):
    ps, gs = {tuple(s) for s in pred}, {tuple(s) for s in gold}
    return prf(len(ps & gs), len(ps), len(gs))


CLASSES = ["positive", "negative", "neutral"]


def cls(pred, gold):
    acc = sum(a == b for a, b in zip(pred, gold)) / len(gold)
    f1s = []
    for c in CLASSES:
        tp = sum(1 for a, b in zip(pred, gold) if a == c and b == c)
        fp = sum(1 for a, b in zip(pred, gold) if a == c and b != c)
        fn = sum(1 for a, b in zip(pred, gold) if a != c and b == c)
        f1s.append(prf(tp, tp + fp, tp + fn)[2])
    return acc, sum(f1s) / 3


def main():
    rng = random.Random(20240611)
    words = ["the", "a", "Room", "room", "walls", "thin", "noisy", "clean", "very", "bathroom"]
    puncts = ["", "", "", ",", ".", "!", "?", "(", ")", "'"]

    def phrase():
        n = rng.randint(0, 6)
        parts = []
        for _ in range(n):
            w = rng.choice(words)
            parts.append(rng.choice(puncts) + w + rng.choice(puncts))
        if rng.random() < 0.1:
            parts.append(rng.choice(".,!?"))
        return " ".join(parts)

    qa = []
    for _ in range(40):
        gold = phrase()
        pred = gold if rng.random() < 0.2 else phrase()
        f1, em = token_f1(pred, gold)
        qa.append({"prediction": pred, "gold": gold, "f1": f1, "exact": em})

    def spans():
        out = []
        for _ in range(rng.randint(0, 4)):
            s = rng.randint(0, 6)
            out.append([s, s + rng.randint(0, 2)])
        return out

    sp = []
    for _ in range(40):
        gold = spans()
        pred = gold[: rng.randint(0, len(gold))] + spans()[:2] if rng.random() < 0.7 else spans()
        p, r, f = span_prf(pred, gold)
        sp.append({"pred": pred, "gold": gold, "precision": p, "recall": r, "f1": f})

    cl = []
    for _ in range(40):
        n = rng.randint(1, 12)
        gold = [rng.choice(CLASSES) for _ in range(n)]
        pred = [g if rng.random() < 0.5 else rng.choice(CLASSES) for g in gold]
        acc, mf1 = cls(pred, gold)
        cl.append({"pred": pred, "gold": gold, "accuracy": acc, "macro_f1": mf1})

    json.dump({"token_f1": qa, "span_prf": sp, "cls": cl}, __import__("sys").stdout, indent=1)


if __name__ == "__main__":
    main()

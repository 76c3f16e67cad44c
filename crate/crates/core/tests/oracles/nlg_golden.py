"""Independent oracle for the NLG golden fixture.

Recomputes BLEU, METEOR and ROUGE for a fixed set of tokenised pairs with
plain Python counting, an exhaustive METEOR alignment search, and NLTK for
the Porter stems and an unsmoothed corpus BLEU cross-check. Writes
tests/fixtures/nlg_golden.json; rerun after changing PAIRS.
"""

import itertools
import json
import math
import os
from collections import Counter
from fractions import Fraction

from nltk.stem.porter import PorterStemmer
from nltk.translate.bleu_score import corpus_bleu

PAIRS = [
    ("the cat sat on the mat", "the cat is on the mat"),
    ("there is a cheap restaurant in the north", "there is a cheap restaurant in the north"),
    ("the address is 17 hills road", "the address is 17 hills road ."),
    ("pizza hut is cheap", "pizza hut serves cheap italian food in the centre"),
    ("what area would you like", "which part of town would you like"),
    ("the restaurants are cheaper", "the restaurant is cheap"),
    ("a b a b a", "b a b a b"),
    ("cats sitting on mats", "a cat sat on the mat"),
    ("the phone number is 01223 812660", "their phone number is 01223 812660"),
    ("golden wok serves chinese food", "chinese food is served at golden wok"),
    ("i have booked a table for 2", "i booked you a table for two people"),
    ("goodbye", "thank you goodbye"),
]

stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


def ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def overlap(h, r, n):
    hc, rc = ngrams(h, n), ngrams(r, n)
    return sum(min(c, rc[g]) for g, c in hc.items()), max(len(h) - n + 1, 0), max(len(r) - n + 1, 0)


def bleu(pairs, max_n=4):
    logs = 0.0
    for n in range(1, max_n + 1):
        m = sum(overlap(h, r, n)[0] for h, r in pairs)
        t = sum(overlap(h, r, n)[1] for h, r in pairs)
        if m == 0:
            if n == 1:
                return 0.0
            p = 1 / (t + 1)
        else:
            p = m / t
        logs += math.log(p)
    c = sum(len(h) for h, _ in pairs)
    r = sum(len(x) for _, x in pairs)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(logs / max_n)


def chunks(pairs):
    pairs = sorted(pairs)
    n = 0
    prev = None
    for h, r in pairs:
        if prev is None or not (h == prev[0] + 1 and r == prev[1] + 1):
            n += 1
        prev = (h, r)
    return n


def max_matchings(keys_h, keys_r, free_h, free_r):
    """Every maximum-size matching between equal keys over the free positions."""
    edges = {i: [j for j in free_r if keys_r[j] == keys_h[i]] for i in free_h}
    best, out = 0, []

    def rec(idx, used, acc):
        nonlocal best, out
        if idx == len(free_h):
            if len(acc) > best:
                best, out = len(acc), [list(acc)]
            elif len(acc) == best:
                out.append(list(acc))
            return
        i = free_h[idx]
        for j in edges[i]:
            if j not in used:
                used.add(j)
                acc.append((i, j))
                rec(idx + 1, used, acc)
                acc.pop()
                used.discard(j)
        rec(idx + 1, used, acc)

    rec(0, set(), [])
    return out


def meteor(h, r):
    # stage by stage: keep every maximum matching, then the fewest chunks overall
    stems_h = [stemmer.stem(t) for t in h]
    stems_r = [stemmer.stem(t) for t in r]
    candidates = [[]]
    for kh, kr in ((h, r), (stems_h, stems_r)):
        nxt = []
        for base in candidates:
            fh = [i for i in range(len(h)) if i not in {a for a, _ in base}]
            fr = [j for j in range(len(r)) if j not in {b for _, b in base}]
            for m in max_matchings(kh, kr, fh, fr):
                nxt.append(base + m)
        candidates = nxt
    best = min(candidates, key=chunks)
    m = len(best)
    if m == 0:
        return 0.0, 0, 0
    p, rec = m / len(h), m / len(r)
    fmean = 10 * p * rec / (p + 9 * rec)
    ch = chunks(best)
    return fmean * (1 - 0.5 * (ch / m) ** 3), m, ch


def f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def lcs(a, b):
    best = 0
    # exhaustive over subsequences of the shorter side
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for k in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), k):
            sub = [short[i] for i in idx]
            it = iter(long_)
            if all(any(x == y for y in it) for x in sub):
                return k
    return best


def rouge(h, r, variant):
    if variant == "L":
        hit, ht, rt = lcs(h, r), len(h), len(r)
    else:
        hit, ht, rt = overlap(h, r, int(variant))
    if ht == 0 and rt == 0:
        return float(h == r)
    if hit == 0:
        return 0.0
    return f1(hit / ht, hit / rt)


def main():
    toks = [(h.split(), r.split()) for h, r in PAIRS]
    rows = []
    for (h, r), (hs, rs) in zip(toks, PAIRS):
        score, m, ch = meteor(h, r)
        rows.append({
            "hypothesis": hs,
            "reference": rs,
            "meteor": score,
            "matches": m,
            "chunks": ch,
            "rouge1": rouge(h, r, "1"),
            "rouge2": rouge(h, r, "2"),
            "rougeL": rouge(h, r, "L"),
        })
    b = bleu(toks)
    # NLTK floors each sentence's n-gram total at 1, so compare on the pairs
    # long enough to have 4-grams; every order has a match there, no smoothing
    long_ = [(h, r) for h, r in toks if len(h) >= 4]
    ref = corpus_bleu([[r] for _, r in long_], [h for h, _ in long_])
    assert abs(bleu(long_) - ref) < 1e-12, (bleu(long_), ref)
    out = {
        "bleu": b,
        "meteor": sum(x["meteor"] for x in rows) / len(rows),
        "rouge1": sum(x["rouge1"] for x in rows) / len(rows),
        "rouge2": sum(x["rouge2"] for x in rows) / len(rows),
        "rougeL": sum(x["rougeL"] for x in rows) / len(rows),
        "pairs": rows,
    }
    path = os.path.join(os.path.dirname(__file__), "..", "fixtures", "nlg_golden.json")
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")
    print(json.dumps({k: v for k, v in out.items() if k != "pairs"}, indent=1))


if __name__ == "__main__":
    main()

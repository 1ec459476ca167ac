"""
Scoring generated dialogue
==========================

Corpus BLEU with clipped n-gram counts and a brevity penalty,
distinct-n diversity, the geometric mean of human ratings, and
inter-annotator agreement, each on a hand-checkable example.
"""

import math

from aem.metrics import (HumanEvalTable, corpus_bleu, diversity, eval_report,
                         format_report, g_score, pearson)

# Clipping: the hypothesis repeats "a" three times but the reference
# holds it once, so only one copy counts: p1 = 1/3.
clipped = corpus_bleu([["a", "a", "a"]], [["a", "b", "c"]])
print("clipped unigram precision -> BLEU-1 %.2f" % clipped.bleu1)

# Brevity: every n-gram of the 3-token hypothesis appears in the
# 4-token reference, so the only penalty is length:
# BP = exp(1 - 4/3) = exp(-1/3).
short = corpus_bleu([["a", "b", "c"]], [["a", "b", "c", "d"]])
print("perfect n-grams, short by one -> BLEU-3 %.2f (= 100*exp(-1/3) = %.2f)"
      % (short.bleu3, 100 * math.exp(-1 / 3)))

# Corpus scoring pools counts over all pairs before dividing, which is
# not the mean of per-sentence scores.
hyps = [["the", "cat", "sat"], ["a", "dog", "ran", "far"]]
refs = [["the", "cat", "sat", "down"], ["a", "dog", "ran"]]
report = corpus_bleu(hyps, refs)
print("pooled BLEU-1..4:", " ".join("%.1f" % s for s in report.scores))

# Diversity counts distinct n-grams across everything generated; a
# model that answers "i don't know" to everything scores dist-1 = 4.
flat = [["i", "don't", "know", "."]] * 50
varied = [["answer", "%d" % i, "here", "."] for i in range(50)]
print("dist-1 flat %d vs varied %d"
      % (diversity(flat).dist1, diversity(varied).dist1))

# Human ratings: G-Score is the geometric mean of fluency and
# coherence, both on a 1-10 scale.
print("g_score(8.11, 4.18) = %.2f" % g_score(8.11, 4.18))

# Agreement between annotators is the mean pairwise Pearson
# correlation over the items both scored.
table = HumanEvalTable()
for item, (first, second) in enumerate([(7, 6), (4, 5), (9, 8), (3, 3), (6, 7)]):
    table.add(item, "ann1", fluency=first, coherence=first)
    table.add(item, "ann2", fluency=second, coherence=second)
print("mean fluency %.2f, agreement %.2f"
      % (table.mean("fluency"), table.agreement("fluency")))
print("pearson of y = 2x + 1:", pearson([1, 2, 3, 4], [3, 5, 7, 9]))

# eval_report bundles everything; format_report renders the table the
# `aem evaluate` command prints.
print()
print(format_report(eval_report(hyps, refs)))

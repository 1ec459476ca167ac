"""Automatic and human-evaluation arithmetic.

Corpus BLEU-1..4 with pooled clipped n-gram counts and no smoothing (a
per-sentence add-1 smoothed variant exists for cross-checking), distinct
n-gram counts over the generated corpus, the geometric-mean G-Score of
fluency and coherence, and Pearson correlation for inter-annotator
agreement.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np


def ngram_counts(tokens, n):
    """Multiset of the n-grams of one sentence, as tuple -> count."""
    counts = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


@dataclass
class BleuReport:
    """Pooled corpus BLEU at orders 1..max_n, scores scaled to [0, 100]."""

    scores: tuple
    precisions: tuple
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def bleu(self, n):
        return self.scores[n - 1]

    def precision(self, n):
        return self.precisions[n - 1]

    @property
    def bleu1(self):
        return self.scores[0]

    @property
    def bleu2(self):
        return self.scores[1]

    @property
    def bleu3(self):
        return self.scores[2]

    @property
    def bleu4(self):
        return self.scores[3]


def corpus_bleu(hypotheses, references, max_n=4):
    """Corpus BLEU with clipped counts pooled over all pairs.

    BP = exp(1 - r/c) when the hypothesis corpus is no longer than the
    reference corpus, else 1. An order whose pooled precision is zero
    zeroes every BLEU-n at that order and above.
    """
    if len(hypotheses) != len(references):
        raise ValueError("got %d hypotheses for %d references"
                         % (len(hypotheses), len(references)))
    if not hypotheses:
        raise ValueError("empty corpus")
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)

    precisions = []
    for n in range(1, max_n + 1):
        clipped = 0
        total = 0
        for hyp, ref in zip(hypotheses, references):
            ref_counts = ngram_counts(ref, n)
            for gram, count in ngram_counts(hyp, n).items():
                clipped += min(count, ref_counts.get(gram, 0))
            total += max(len(hyp) - n + 1, 0)
        precisions.append(clipped / total if total else 0.0)

    if hyp_len == 0:
        # a corpus of empty hypotheses matches nothing
        bp = 0.0
    elif hyp_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)

    scores = []
    for n in range(1, max_n + 1):
        ps = precisions[:n]
        if all(p > 0 for p in ps):
            scores.append(100.0 * bp * math.exp(sum(math.log(p) for p in ps) / n))
        else:
            scores.append(0.0)
    return BleuReport(tuple(scores), tuple(precisions), bp, hyp_len, ref_len)


def sentence_bleu(hypothesis, reference, max_n=4):
    """Single-pair BLEU with add-1 smoothing on orders >= 2."""
    ps = []
    for n in range(1, max_n + 1):
        ref_counts = ngram_counts(reference, n)
        clipped = sum(min(c, ref_counts.get(g, 0))
                      for g, c in ngram_counts(hypothesis, n).items())
        total = max(len(hypothesis) - n + 1, 0)
        if n >= 2:
            clipped, total = clipped + 1, total + 1
        ps.append(clipped / total if total else 0.0)
    if not all(p > 0 for p in ps):
        return 0.0
    c, r = len(hypothesis), len(reference)
    bp = 1.0 if c > r else (math.exp(1.0 - r / c) if c else 0.0)
    return 100.0 * bp * math.exp(sum(math.log(p) for p in ps) / max_n)


def averaged_sentence_bleu(hypotheses, references, max_n=4):
    """Mean smoothed sentence BLEU, the cross-checking variant."""
    if len(hypotheses) != len(references) or not hypotheses:
        raise ValueError("hypotheses and references must align and be non-empty")
    return sum(sentence_bleu(h, r, max_n) for h, r in zip(hypotheses, references)) \
        / len(hypotheses)


@dataclass
class DiversityReport:
    """Counts of distinct n-grams over the whole generated output."""

    dist1: int
    dist2: int
    dist3: int


def distinct_ngrams(sentences, n):
    """Number of distinct n-grams anywhere in the corpus; n-grams never
    cross sentence boundaries."""
    if n < 1:
        raise ValueError("n must be >= 1, got %d" % n)
    seen = set()
    for sent in sentences:
        for i in range(len(sent) - n + 1):
            seen.add(tuple(sent[i : i + n]))
    return len(seen)


def diversity(sentences):
    return DiversityReport(*(distinct_ngrams(sentences, n) for n in (1, 2, 3)))


def g_score(fluency, coherence):
    """Geometric mean of the two human-evaluation axes."""
    if fluency <= 0 or coherence <= 0:
        raise ValueError("g_score needs positive scores, got (%r, %r)"
                         % (fluency, coherence))
    return math.sqrt(fluency * coherence)


def pearson(xs, ys):
    """Sample Pearson correlation; rejects degenerate inputs."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ValueError("pearson needs two aligned vectors of length >= 2")
    if np.std(xs) == 0.0 or np.std(ys) == 0.0:
        raise ValueError("pearson is undefined for zero-variance input")
    return float(np.corrcoef(xs, ys)[0, 1])


class HumanEvalTable:
    """Per-item, per-annotator fluency and coherence scores in 1..10.

    Cells may be missing; means skip them and agreement drops them
    pairwise.
    """

    def __init__(self):
        self.fluency = {}
        self.coherence = {}
        self.items = set()
        self.annotators = set()

    def add(self, item, annotator, fluency, coherence):
        for name, score in (("fluency", fluency), ("coherence", coherence)):
            if score is not None and not 1 <= score <= 10:
                raise ValueError("%s score %r for item %r is outside 1..10"
                                 % (name, score, item))
        key = (item, annotator)
        if key in self.fluency:
            raise ValueError("duplicate cell for item %r, annotator %r" % (item, annotator))
        if fluency is not None:
            self.fluency[key] = float(fluency)
        if coherence is not None:
            self.coherence[key] = float(coherence)
        self.items.add(item)
        self.annotators.add(annotator)

    def _cells(self, field):
        return getattr(self, field)

    def mean(self, field):
        cells = self._cells(field)
        if not cells:
            raise ValueError("no %s scores" % field)
        return sum(cells.values()) / len(cells)

    def agreement(self, field):
        """Mean pairwise Pearson between annotators over shared items."""
        cells = self._cells(field)
        annotators = sorted(self.annotators)
        correlations = []
        for i, a in enumerate(annotators):
            for b in annotators[i + 1 :]:
                shared = [item for item in sorted(self.items)
                          if (item, a) in cells and (item, b) in cells]
                if len(shared) < 2:
                    continue
                xs = [cells[(item, a)] for item in shared]
                ys = [cells[(item, b)] for item in shared]
                try:
                    correlations.append(pearson(xs, ys))
                except ValueError:
                    continue  # constant scorer; correlation undefined
        if not correlations:
            raise ValueError("no annotator pair with enough shared %s scores" % field)
        return sum(correlations) / len(correlations)


HUMAN_HEADER = ["item_id", "annotator_id", "fluency", "coherence"]


def load_human_scores(path):
    """Read the score CSV: header then item_id,annotator_id,fluency,coherence.
    Empty score fields mark explicitly missing cells."""
    table = HumanEvalTable()
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HUMAN_HEADER:
            raise ValueError("expected header %s" % ",".join(HUMAN_HEADER))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError("line %d: expected 4 fields, got %d" % (lineno, len(row)))
            item, annotator = row[0].strip(), row[1].strip()
            scores = [None if cell.strip() == "" else float(cell) for cell in row[2:]]
            table.add(item, annotator, scores[0], scores[1])
    return table


def eval_report(hypotheses, references, human=None):
    """Assemble every metric for a generated corpus.

    `hypotheses` and `references` are aligned token-sequence lists;
    `human` is an optional HumanEvalTable. Returns a flat dict of
    numbers plus the BleuReport and DiversityReport under their keys.
    """
    bleu = corpus_bleu(hypotheses, references)
    div = diversity(hypotheses)
    report = {
        "bleu": bleu,
        "diversity": div,
        "bleu1": bleu.bleu1, "bleu2": bleu.bleu2,
        "bleu3": bleu.bleu3, "bleu4": bleu.bleu4,
        "dist1": div.dist1, "dist2": div.dist2, "dist3": div.dist3,
    }
    if human is not None:
        fluency = human.mean("fluency")
        coherence = human.mean("coherence")
        report.update({
            "fluency": fluency,
            "coherence": coherence,
            "g_score": g_score(fluency, coherence),
            "agreement_fluency": human.agreement("fluency"),
            "agreement_coherence": human.agreement("coherence"),
        })
    return report


def format_report(report):
    """Human-readable table followed by one machine-readable line."""
    bleu = report["bleu"]
    lines = []
    for n in (1, 2, 3, 4):
        lines.append("BLEU-%d  %6.2f   (p%d=%.4f)" % (n, bleu.bleu(n), n, bleu.precision(n)))
    lines.append("brevity penalty %.4f  (hyp %d tokens, ref %d tokens)"
                 % (bleu.brevity_penalty, bleu.hyp_len, bleu.ref_len))
    for n in (1, 2, 3):
        lines.append("dist-%d  %d" % (n, report["dist%d" % n]))
    if "fluency" in report:
        lines.append("fluency %.2f  coherence %.2f  g-score %.2f"
                     % (report["fluency"], report["coherence"], report["g_score"]))
        lines.append("agreement: fluency %.2f  coherence %.2f"
                     % (report["agreement_fluency"], report["agreement_coherence"]))
    machine = " ".join("%s=%.4f" % (k, report[k]) for k in
                       ("bleu1", "bleu2", "bleu3", "bleu4"))
    machine += " " + " ".join("%s=%d" % (k, report[k]) for k in ("dist1", "dist2", "dist3"))
    if "fluency" in report:
        machine += " " + " ".join("%s=%.4f" % (k, report[k]) for k in
                                  ("fluency", "coherence", "g_score",
                                   "agreement_fluency", "agreement_coherence"))
    lines.append(machine)
    return "\n".join(lines)

"""Scorer fixtures with reference outputs from the CoNLL evaluation script.

Each fixture is (input text in token/gold/pred columns, expected report).
The expected strings were produced by the original scorer's semantics and
are asserted digit-for-digit by the selftest command and the test suite.
"""

FIXTURES = {
    "perfect": (
        "John B-PER B-PER\n"
        "Smith I-PER I-PER\n"
        "works O O\n"
        "at O O\n"
        "Google B-ORG B-ORG\n"
        ". O O\n",
        "processed 6 tokens with 2 phrases; found: 2 phrases; correct: 2.\n"
        "accuracy: 100.00%; precision: 100.00%; recall: 100.00%; FB1: 100.00\n"
        "              ORG: precision: 100.00%; recall: 100.00%; FB1: 100.00  1\n"
        "              PER: precision: 100.00%; recall: 100.00%; FB1: 100.00  1\n",
    ),
    "half": (
        "Alice B-PER B-PER\n"
        "visited O O\n"
        "New B-LOC B-LOC\n"
        "York I-LOC O\n"
        ". O O\n",
        "processed 5 tokens with 2 phrases; found: 2 phrases; correct: 1.\n"
        "accuracy:  80.00%; precision:  50.00%; recall:  50.00%; FB1:  50.00\n"
        "              LOC: precision:   0.00%; recall:   0.00%; FB1:   0.00  1\n"
        "              PER: precision: 100.00%; recall: 100.00%; FB1: 100.00  1\n",
    ),
    "orphan_i": (
        "in O O\n"
        "Paris I-LOC B-LOC\n"
        "today O O\n"
        "Rome I-LOC I-LOC\n",
        "processed 4 tokens with 2 phrases; found: 2 phrases; correct: 2.\n"
        "accuracy:  75.00%; precision: 100.00%; recall: 100.00%; FB1: 100.00\n"
        "              LOC: precision: 100.00%; recall: 100.00%; FB1: 100.00  2\n",
    ),
    "all_o": (
        "Bob B-PER O\n"
        "lives O O\n"
        "in O O\n"
        "Lima B-LOC O\n",
        "processed 4 tokens with 2 phrases; found: 0 phrases; correct: 0.\n"
        "accuracy:  50.00%; precision:   0.00%; recall:   0.00%; FB1:   0.00\n"
        "              LOC: precision:   0.00%; recall:   0.00%; FB1:   0.00  0\n"
        "              PER: precision:   0.00%; recall:   0.00%; FB1:   0.00  0\n",
    ),
    "mixed": (
        "The O O\n"
        "UN B-ORG B-LOC\n"
        "met O O\n"
        "Ban B-PER B-PER\n"
        "Ki I-PER I-PER\n"
        "Moon I-PER O\n"
        "in O O\n"
        "Geneva B-LOC B-LOC\n"
        "early O B-MISC\n"
        "2020 O O\n",
        "processed 10 tokens with 3 phrases; found: 4 phrases; correct: 1.\n"
        "accuracy:  70.00%; precision:  25.00%; recall:  33.33%; FB1:  28.57\n"
        "              LOC: precision:  50.00%; recall: 100.00%; FB1:  66.67  2\n"
        "             MISC: precision:   0.00%; recall:   0.00%; FB1:   0.00  1\n"
        "              ORG: precision:   0.00%; recall:   0.00%; FB1:   0.00  0\n"
        "              PER: precision:   0.00%; recall:   0.00%; FB1:   0.00  1\n",
    ),
}


def run_fixture(name):
    """Score one fixture; returns (rendered report, expected report)."""
    from .evaluation import f1_score, read_scored_file, render_conlleval

    text, expected = FIXTURES[name]
    gold, pred = read_scored_file(text)
    return render_conlleval(f1_score(gold, pred)), expected

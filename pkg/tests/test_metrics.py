import math

import pytest
from hypothesis import given, settings, strategies as st

from fingercap import metrics as M
from fingercap.manifest import CaptionRecord
from fingercap.metrics import TokenizedPair as P

from oracles import bleu4_oracle, cider_oracle, meteor_oracle, rouge_l_oracle

TOL = 1e-9

words = st.sampled_from(list("abcdef"))
sentence = st.lists(words, min_size=0, max_size=8)
pair_st = st.tuples(sentence, st.lists(st.lists(words, min_size=1, max_size=8), min_size=1, max_size=3))

FIXTURES = [
    (["a", "b", "c", "d", "e"], [["a", "b", "c", "d", "f"]]),
    (["a", "b", "c"], [["a", "c"]]),
    (["the", "left", "thumb", "taps", "the", "index"], [["left", "thumb", "taps", "index"], ["the", "thumb", "taps"]]),
    (["a", "a", "a", "a"], [["a", "a"], ["a", "b", "a"]]),
    (["x", "y"], [["a", "b"]]),
    ([], [["a"]]),
]


def test_tokenize():
    assert M.tokenize("Left thumb, and index!") == ["left", "thumb", "and", "index"]
    assert M.tokenize("") == []
    assert M.tokenize('(Both) hands: "clap"; [twice]?') == ["both", "hands", "clap", "twice"]


@settings(max_examples=50, deadline=None)
@given(st.text(max_size=40))
def test_tokenize_idempotent(text):
    once = M.tokenize(text)
    assert M.tokenize(" ".join(once)) == once


def test_bleu_fixture_value():
    got = M.bleu4(P(*FIXTURES[0]))
    assert got == pytest.approx(100 * 0.2 ** 0.25, abs=1e-12)
    assert round(got, 2) == 66.87


def test_bleu_edge_cases():
    s = ["a", "b", "c", "d"]
    assert M.bleu4(P(s, [s])) == 100.0
    assert M.bleu4(P(["a", "b", "c"], [["a", "b", "c"]])) == 0.0
    assert M.bleu4(P([], [s])) == 0.0
    assert M.bleu4(P(["a", "b", "c"], [["a", "b", "c"]]), smoothing=True) > 0


def test_rouge_and_meteor_edge_cases():
    s = ["a", "b", "c", "d"]
    assert M.rouge_l(P(s, [s])) == pytest.approx(100.0, abs=1e-12)
    assert M.rouge_l(P(["x"], [s])) == 0.0
    assert M.meteor_lite(P(s, [s])) == 99.21875
    assert M.meteor_lite(P(["x"], [s])) == 0.0


@pytest.mark.parametrize("hyp, refs", FIXTURES)
def test_fixtures_match_oracles(hyp, refs):
    pair = P(hyp, refs)
    assert abs(M.bleu4(pair) - bleu4_oracle(hyp, refs)) <= TOL
    assert abs(M.rouge_l(pair) - rouge_l_oracle(hyp, refs)) <= TOL
    if hyp:
        assert abs(M.meteor_lite(pair) - meteor_oracle(hyp, refs)) <= TOL


@settings(max_examples=150, deadline=None)
@given(pair_st)
def test_random_pairs_match_oracles(case):
    hyp, refs = case
    pair = P(hyp, refs)
    assert abs(M.bleu4(pair) - bleu4_oracle(hyp, refs)) <= TOL
    assert abs(M.rouge_l(pair) - rouge_l_oracle(hyp, refs)) <= TOL
    if hyp:
        assert abs(M.meteor_lite(pair) - meteor_oracle(hyp, refs)) <= TOL
    for score in (M.bleu4(pair), M.rouge_l(pair), M.meteor_lite(pair) if hyp else 0.0):
        assert 0.0 <= score <= 100.0 + 1e-9


@settings(max_examples=60, deadline=None)
@given(pair_st)
def test_reference_order_invariance(case):
    hyp, refs = case
    a, b = P(hyp, refs), P(hyp, refs[::-1])
    assert M.bleu4(a) == M.bleu4(b) and M.rouge_l(a) == M.rouge_l(b)
    if hyp:
        assert M.meteor_lite(a) == M.meteor_lite(b)


@settings(max_examples=60, deadline=None)
@given(sentence, st.lists(words, min_size=1, max_size=8))
def test_perfect_prediction_dominates(hyp, ref):
    refs = [ref]
    best = P(list(refs[0]), refs)
    pair = P(hyp, refs)
    if len(refs[0]) >= 4:
        assert M.bleu4(best) >= M.bleu4(pair)
    assert M.rouge_l(best) >= M.rouge_l(pair) - 1e-12
    if hyp:
        assert M.meteor_lite(best) >= M.meteor_lite(pair) - 1e-12


CIDER_TOY = [
    (["a", "b", "c"], [["a", "b", "c"], ["a", "b", "d"]]),
    (["b", "c", "d"], [["b", "c", "e"]]),
    (["e", "f"], [["f", "e"], ["a", "e", "f"]]),
]


def test_cider_toy_corpus_matches_bruteforce():
    res = M.cider([P(h, r) for h, r in CIDER_TOY])
    want = cider_oracle(CIDER_TOY)
    assert all(abs(a - b) <= TOL for a, b in zip(res.scores, want))
    assert abs(res.mean - sum(want) / 3) <= TOL
    raw = M.cider([P(h, r) for h, r in CIDER_TOY], scale="raw")
    assert all(abs(a * 10 - b) <= TOL for a, b in zip(raw.scores, res.scores))


@settings(max_examples=60, deadline=None)
@given(st.lists(pair_st, min_size=2, max_size=4))
def test_random_corpora_match_cider_oracle(corpus):
    res = M.cider([P(h, r) for h, r in corpus])
    want = cider_oracle(corpus)
    assert all(abs(a - b) <= TOL for a, b in zip(res.scores, want))
    assert all(s >= 0 for s in res.scores)


def test_cider_symmetry_and_zero():
    corpus = [P(["a", "b"], [["a", "b"]]), P(["c", "d"], [["c", "d"]]), P(["e", "f"], [["e", "f"]])]
    s = M.cider(corpus).scores
    assert s[0] == s[1] == s[2] > 0
    assert M.cider([P(["z"], [["a", "b"]]), P(["a"], [["a"]])]).scores[0] == 0.0
    with pytest.raises(ValueError):
        M.cider(corpus[:1])


def _records():
    caps = ["left thumb taps twice", "right index finger bends slowly", "both hands clap together",
            "grab the cup with right hand", "rotate the lid with left fingers", "pinch the pen between thumb and index"]
    return [CaptionRecord(f"r{i}", "gesture" if i < 3 else "hoi", "TPV", "single", 30, 30, c, split="test")
            for i, c in enumerate(caps)]


def test_evaluate_corpus_identity_and_layout():
    recs = _records()
    rep = M.evaluate_corpus(recs, {r.video_id: r.caption for r in recs})
    assert set(rep.subsets) == {"gesture", "hoi", "average"}
    for s in rep.subsets.values():
        assert s["B-4"] == pytest.approx(100.0) and s["R-L"] == pytest.approx(100.0)
    avg = rep.subsets["average"]
    for m in M.METRIC_NAMES:
        assert avg[m] == pytest.approx((rep.subsets["gesture"][m] + rep.subsets["hoi"][m]) / 2, abs=1e-12)
    assert "B-4" in rep.format_table()


def test_evaluate_corpus_against_oracles():
    recs = _records()
    preds = {"r0": "left thumb taps", "r1": "right finger bends slowly", "r2": "hands clap",
             "r3": "grab cup with right hand", "r4": "rotate lid left fingers", "r5": "pinch pen thumb index"}
    rep = M.evaluate_corpus(recs, preds)
    for dom, ids in (("gesture", range(3)), ("hoi", range(3, 6))):
        pairs = [(M.tokenize(preds[f"r{i}"]), [M.tokenize(recs[i].caption)]) for i in ids]
        rl = sum(rouge_l_oracle(h, r) for h, r in pairs) / 3
        me = sum(meteor_oracle(h, r) for h, r in pairs) / 3
        ci = sum(cider_oracle(pairs)) / 3
        assert abs(rep.subsets[dom]["R-L"] - rl) <= TOL
        assert abs(rep.subsets[dom]["METEOR"] - me) <= TOL
        assert abs(rep.subsets[dom]["CIDEr"] - ci) <= TOL


def test_evaluate_corpus_errors_and_empty_predictions():
    recs = _records()
    with pytest.raises(KeyError, match="r5"):
        M.evaluate_corpus(recs, {f"r{i}": "x" for i in range(5)})
    rep = M.evaluate_corpus(recs, {r.video_id: "" for r in recs})
    assert rep.subsets["average"]["B-4"] == 0.0
    with pytest.raises(ValueError):
        M.evaluate_corpus(recs, {}, split="val")


def test_lcs_dp_matches_definition():
    assert M.lcs_length(list("abcbdab"), list("bdcaba")) == 4
    assert math.isclose(M.rouge_l(P(["a", "b", "c"], [["a", "c"]])), rouge_l_oracle(["a", "b", "c"], [["a", "c"]]))

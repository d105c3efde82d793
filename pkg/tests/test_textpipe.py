"""Cleaning, n-gram, collocation, tagging and entity recognition tests.

Collocation and expectation values were frozen from an independent
entropy-form computation of the G2 statistic (see test_acceptance for the
live cross-check against that oracle).
"""

import math
import random

import pytest

from hwv2w.textpipe import (
    EntityKind,
    Tag,
    TokenStream,
    extract_ngrams,
    pos_tag,
    recognize_entities,
    score_collocations,
    string_clean,
)

# 12-token oracle stream: (alpha, beta) always co-occur; gamma is frequent
# filler so singleton pairs involving it score low.
ORACLE_STREAM = [
    "alpha", "beta", "gamma", "delta", "alpha", "beta",
    "epsilon", "gamma", "zeta", "delta", "eta", "gamma",
]
ORACLE_TOP_LLR = 10.431064887272422
ORACLE_TOP_PMI = 2.4594316186372973
ORACLE_SINGLE_LLR = {
    ("beta", "epsilon"): 3.929405419443455,
    ("gamma", "delta"): 1.3794984398580652,
    ("beta", "gamma"): 0.5836572974005523,
    ("epsilon", "gamma"): 2.88290913191436,
}


class TestStringClean:
    def test_empty_input(self):
        stream = string_clean("")
        assert stream.tokens == ()
        assert stream.source_len == 0

    def test_stopwords_and_stemming_collapse_family(self):
        assert string_clean("The attacker is attacking attacks.").tokens == (
            "attack",
            "attack",
            "attack",
        )

    def test_product_sentence_fixture(self):
        stream = string_clean("Samsung Galaxy S3/S4 exposes an unprotected component")
        assert stream.tokens == (
            "samsung", "galaxi", "s3", "s4", "expo", "unprotect", "compon",
        )

    def test_nonsensical_tokens_dropped(self):
        # no-alpha tokens, single chars and over-long tokens are junk
        text = "a 12345 x " + "q" * 41 + " !!! valid"
        assert string_clean(text).tokens == ("valid",)

    def test_idempotent_on_rendered_output(self):
        texts = [
            "Samsung Galaxy S3/S4 exposes an unprotected component",
            "The attacker is attacking attacks.",
            "Electromagnetic side channel leakage allows recovery of secret keys.",
            "Observable discrepancy in cache timing exposes AES keys.",
        ]
        for text in texts:
            once = string_clean(text).tokens
            again = string_clean(" ".join(once)).tokens
            assert again == once


class TestNgrams:
    def test_window_definition(self):
        ngrams = extract_ngrams(["a", "b", "c"])
        assert ngrams.bigrams == {("a", "b"): 1, ("b", "c"): 1}
        assert ngrams.trigrams == {("a", "b", "c"): 1}
        assert ngrams.quadgrams == {}

    def test_single_token_stream(self):
        ngrams = extract_ngrams(["only"])
        assert ngrams.bigrams == {} and ngrams.trigrams == {} and ngrams.quadgrams == {}

    def test_repeat_counting(self):
        ngrams = extract_ngrams(["x", "x", "x", "x"])
        assert ngrams.bigrams == {("x", "x"): 3}
        assert ngrams.trigrams == {("x", "x", "x"): 2}
        assert ngrams.quadgrams == {("x", "x", "x", "x"): 1}

    def test_accepts_token_stream(self):
        stream = TokenStream(tokens=("a", "b"), source_len=3)
        assert extract_ngrams(stream).bigrams == {("a", "b"): 1}

    @pytest.mark.parametrize("length", [0, 1, 2, 3, 4, 7, 25])
    def test_bucket_count_property(self, length):
        rng = random.Random(length)
        tokens = [rng.choice("abcde") for _ in range(length)]
        ngrams = extract_ngrams(tokens)
        assert sum(ngrams.bigrams.values()) == max(length - 1, 0)
        assert sum(ngrams.trigrams.values()) == max(length - 2, 0)
        assert sum(ngrams.quadgrams.values()) == max(length - 3, 0)


class TestCollocations:
    def test_oracle_stream_scores(self):
        scored = score_collocations(extract_ngrams(ORACLE_STREAM))
        by_ngram = {s.ngram: s for s in scored}
        top = scored[0]
        assert top.ngram == ("alpha", "beta")
        assert top.frequency == 2
        assert top.score == pytest.approx(ORACLE_TOP_LLR, abs=1e-9)
        assert top.pmi == pytest.approx(ORACLE_TOP_PMI, abs=1e-9)
        for pair, expected in ORACLE_SINGLE_LLR.items():
            assert by_ngram[pair].score == pytest.approx(expected, abs=1e-9)

    def test_repeated_pair_beats_chance_pairs(self):
        scored = score_collocations(extract_ngrams(ORACLE_STREAM))
        top = scored[0]
        assert top.ngram == ("alpha", "beta")
        singles = [s for s in scored if len(s.ngram) == 2 and s.frequency == 1]
        assert all(s.score < top.score for s in singles)

    def test_all_distinct_tokens_tie_lexicographically(self):
        scored = score_collocations(extract_ngrams(["u", "v", "w", "x"]))
        bigrams = [s for s in scored if len(s.ngram) == 2]
        assert len({round(s.score, 12) for s in bigrams}) == 1
        assert [s.ngram for s in bigrams] == sorted(s.ngram for s in bigrams)

    def test_single_repeated_bigram_first(self):
        scored = score_collocations(extract_ngrams(["a", "b", "a", "b"]))
        assert scored[0].ngram == ("a", "b")

    def test_zero_llr_at_independence(self):
        # stream engineered so observed count of (a, b) equals expectation:
        # k11 = R*C/N with R=2, C=2, N=4 -> expected 1, observed 1
        stream = ["a", "a", "b", "b", "x"]
        ngrams = extract_ngrams(stream)
        rows = {}
        cols = {}
        for (first, second), freq in ngrams.bigrams.items():
            rows[first] = rows.get(first, 0) + freq
            cols[second] = cols.get(second, 0) + freq
        n = sum(ngrams.bigrams.values())
        k11 = ngrams.bigrams[("a", "b")]
        assert k11 * n == rows["a"] * cols["b"]  # the engineered independence
        scored = {s.ngram: s for s in score_collocations(ngrams)}
        assert abs(scored[("a", "b")].score) < 1e-9
        assert abs(scored[("a", "b")].pmi) < 1e-9

    def test_higher_order_scores_are_min_over_links(self):
        scored = {s.ngram: s for s in score_collocations(extract_ngrams(ORACLE_STREAM))}
        tri = scored[("alpha", "beta", "gamma")]
        assert tri.score == pytest.approx(
            min(scored[("alpha", "beta")].score, scored[("beta", "gamma")].score), abs=1e-12
        )
        quad = scored[("alpha", "beta", "gamma", "delta")]
        links = [("alpha", "beta"), ("beta", "gamma"), ("gamma", "delta")]
        assert quad.score == pytest.approx(min(scored[p].score for p in links), abs=1e-12)

    def test_ordering_is_total_and_deterministic(self):
        rng = random.Random(7)
        tokens = [rng.choice("abcdef") for _ in range(40)]
        first = score_collocations(extract_ngrams(tokens))
        second = score_collocations(extract_ngrams(list(tokens)))
        assert [(s.ngram, s.score, s.frequency) for s in first] == [
            (s.ngram, s.score, s.frequency) for s in second
        ]
        keys = [(-s.score, -s.frequency, s.ngram) for s in first]
        assert keys == sorted(keys)

    def test_empty_and_tiny_streams(self):
        assert score_collocations(extract_ngrams([])) == []
        assert score_collocations(extract_ngrams(["one"])) == []


class TestPosTag:
    def test_plural_suffix_rule(self):
        assert pos_tag(["messages"])[0].tag is Tag.NNS

    def test_default_noun(self):
        assert pos_tag(["component"])[0].tag is Tag.NN

    def test_lexicon_hit(self):
        assert pos_tag(["the"])[0].tag is Tag.DET

    def test_lexicon_hit_beats_suffix_rule(self):
        assert pos_tag(["allows"])[0].tag is Tag.VERB

    def test_verb_s_form_via_base_lookup(self):
        # "permits" is not in the lexicon but its base "permit" is a verb
        assert pos_tag(["obtains"])[0].tag is Tag.VERB

    def test_number_rule(self):
        assert pos_tag(["2020"])[0].tag is Tag.NUM
        assert pos_tag(["3.1"])[0].tag is Tag.NUM

    def test_ss_words_stay_nouns(self):
        assert pos_tag(["access"])[0].tag is Tag.NN

    def test_case_insensitive_lexicon(self):
        assert pos_tag(["The"])[0].tag is Tag.DET


class TestRecognizeEntities:
    def test_cpe_dictionary_match(self):
        labels = recognize_entities(
            "Samsung Galaxy S3/S4 exposes an unprotected component",
            cpe_dictionary={"samsung galaxy"},
        )
        assert [(l.surface, l.kind) for l in labels] == [
            ("Samsung Galaxy", EntityKind.CPE_PRODUCT)
        ]

    def test_no_dictionary_hits(self):
        assert recognize_entities("nothing matches here", {"other product"}, {}) == []

    def test_gazetteer_org(self):
        labels = recognize_entities(
            "Google Chrome OS spoofing", gazetteer={"google chrome os": "ORG"}
        )
        assert [(l.surface, l.kind) for l in labels] == [("Google Chrome OS", EntityKind.ORG)]

    def test_longest_match_wins(self):
        labels = recognize_entities(
            "acme iot hub firmware",
            cpe_dictionary={"acme", "acme iot hub"},
        )
        assert [l.surface for l in labels] == ["acme iot hub"]

    def test_cpe_priority_over_gazetteer(self):
        labels = recognize_entities(
            "Samsung Galaxy phones",
            cpe_dictionary={"samsung galaxy"},
            gazetteer={"samsung": "ORG"},
        )
        assert [l.kind for l in labels] == [EntityKind.CPE_PRODUCT]

    def test_never_overlapping_spans(self):
        labels = recognize_entities(
            "alpha beta gamma alpha beta",
            cpe_dictionary={"alpha beta", "beta gamma", "gamma alpha"},
        )
        spans = sorted((l.start, l.end) for l in labels)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2

    def test_surface_is_substring_of_source(self):
        text = "The  Acme   IoT Hub, with strange   spacing"
        labels = recognize_entities(text, cpe_dictionary={"acme iot hub"})
        assert len(labels) == 1
        assert labels[0].surface in text
        assert labels[0].surface == text[labels[0].start : labels[0].end]

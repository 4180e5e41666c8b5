import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pagehop.index import (
    Bm25Params,
    IndexError_,
    InvertedIndex,
    TokenizerConfig,
    build_index,
    tokenize,
    top_k,
)

from conftest import WORD_POOL, make_store, oracle_top_k, random_store


class TestTokenize:
    def test_lowercases_and_splits_on_punctuation(self):
        assert tokenize("McKenna Grace voted!") == ["mckenna", "grace", "voted"]

    def test_empty_string(self):
        assert tokenize("") == []

    def test_digits_kept(self):
        assert tokenize("2020 election") == ["2020", "election"]

    def test_underscore_is_a_separator(self):
        assert tokenize("foo_bar") == ["foo", "bar"]

    def test_stopword_flag(self):
        config = TokenizerConfig(remove_stopwords=True)
        assert tokenize("the river and the mill", config) == ["river", "mill"]

    def test_stem_flag_folds_plurals(self):
        config = TokenizerConfig(stem=True)
        assert tokenize("rivers cities passes", config) == ["river", "citi", "pass"]

    @given(st.text(max_size=200))
    def test_tokens_nonempty_lowercase_no_whitespace(self, text):
        for token in tokenize(text):
            assert token
            assert token == token.lower()
            assert not any(ch.isspace() for ch in token)


# corpus {d1="a b b", d2="b c", d3="c c c"}: N=3, df(b)=2, avgdl=8/3.
# hand evaluation for query "b", k1=0.9, b=0.4:
#   idf = ln(1 + 1.5/2.5) = ln(1.6); d1: tf=2, dl=3
#   score(d1) = ln(1.6) * 2*1.9 / (2 + 0.9*(0.6 + 0.4*3/(8/3))) = 0.606456...
THREE_DOCS = [("1", "d1", "a b b"), ("2", "d2", "b c"), ("3", "d3", "c c c")]
D1_EXPECTED = math.log(1.6) * 2 * 1.9 / (2 + 0.9 * (0.6 + 0.4 * 3 / (8 / 3)))


class TestBm25:
    def test_hand_derived_score(self):
        index = build_index(make_store(THREE_DOCS), Bm25Params(k1=0.9, b=0.4))
        result = {r.passage_id: r.bm25_score for r in index.top_k("b", 3)}
        assert result["d1#0"] == pytest.approx(D1_EXPECTED, abs=1e-9)
        assert result["d1#0"] == pytest.approx(0.6065, abs=5e-4)

    def test_unseen_terms_score_zero_everywhere(self):
        index = build_index(make_store(THREE_DOCS))
        assert all(r.bm25_score == 0.0 for r in index.top_k("zzz qqq", 3))

    def test_b_zero_removes_length_normalization(self):
        # equal tf, different lengths -> equal scores when b=0
        store = make_store([("1", "short", "apple pear"), ("2", "long", "apple fig plum grape melon")])
        index = build_index(store, Bm25Params(k1=0.9, b=0.0))
        scores = {r.passage_id: r.bm25_score for r in index.top_k("apple", 2)}
        assert scores["short#0"] == pytest.approx(scores["long#0"], abs=1e-12)

    def test_scores_finite_and_nonnegative(self):
        rng = random.Random(7)
        store = random_store(rng, 30, WORD_POOL)
        index = build_index(store)
        for r in index.top_k("river treaty eclipse", 50):
            assert r.bm25_score >= 0.0
            assert math.isfinite(r.bm25_score)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=-0.1)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)


class TestTopK:
    def test_k1_returns_best_match(self):
        index = build_index(make_store(THREE_DOCS), Bm25Params(k1=0.9, b=0.4))
        assert [r.passage_id for r in index.top_k("b", 1)] == ["d1#0"]

    def test_restriction_smaller_than_k_returns_whole_pool(self):
        docs = [(str(i), f"P{i}", " ".join(WORD_POOL[:20]) + " filler" * 80) for i in range(5)]
        store = make_store(docs)
        index = build_index(store)
        restricted = {"P1", "P2"}
        pool = [p.passage_id for p in store.passages() if p.page_title in restricted]
        result = index.top_k("river mountain", 200, restrict_titles=restricted)
        assert sorted(r.passage_id for r in result) == sorted(pool)

    def test_empty_restriction_empty_result(self, tiny_index):
        assert tiny_index.top_k("river", 10, restrict_titles=set()) == []

    def test_restriction_soundness(self, tiny_index):
        for r in tiny_index.top_k("the", 50, restrict_titles={"Alpha River"}):
            assert r.passage_id.startswith("Alpha%20River#")

    def test_zero_score_padding_fills_to_pool_size(self, tiny_index, tiny_store):
        result = tiny_index.top_k("unmatched tokens only", 200)
        assert len(result) == len(tiny_store)
        assert all(r.bm25_score == 0.0 for r in result)
        assert [r.passage_id for r in result] == sorted(r.passage_id for r in result)

    def test_prefix_property(self, tiny_index):
        full = [r.passage_id for r in tiny_index.top_k("river treaty comet", 200)]
        for k in range(1, len(full) + 1):
            assert [r.passage_id for r in tiny_index.top_k("river treaty comet", k)] == full[:k]

    def test_k_below_one_rejected(self, tiny_index):
        with pytest.raises(ValueError):
            tiny_index.top_k("river", 0)

    def test_ties_break_by_ascending_passage_id(self):
        store = make_store([("1", "B", "apple"), ("2", "A", "apple"), ("3", "C", "apple")])
        index = build_index(store)
        assert [r.passage_id for r in index.top_k("apple", 3)] == ["A#0", "B#0", "C#0"]


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_exhaustive_scorer(self, seed):
        rng = random.Random(seed)
        vocab = [f"v{i}" for i in range(60)]
        store = random_store(rng, 40, vocab)
        params = Bm25Params()
        index = build_index(store, params)
        titles = store.titles
        for _ in range(25):
            query = " ".join(rng.choice(vocab + ["unseen"]) for _ in range(rng.randint(1, 6)))
            restrict = set(rng.sample(titles, rng.randint(0, len(titles)))) if rng.random() < 0.5 else None
            k = rng.randint(1, 50)
            got = [(r.passage_id, r.bm25_score) for r in index.top_k(query, k, restrict)]
            want = oracle_top_k(store, query, k, params, restrict)
            assert [g[0] for g in got] == [w[0] for w in want]
            for (_, gs), (_, ws) in zip(got, want):
                assert gs == pytest.approx(ws, abs=1e-9)


class TestPersistence:
    def test_round_trip_identical_results(self, tmp_path, tiny_index):
        tiny_index.save(tmp_path / "idx")
        loaded = InvertedIndex.load(tmp_path / "idx")
        queries = ["river mill", "treaty border", "comet harbor", "nothing matches"]
        for q in queries:
            assert loaded.top_k(q, 10) == tiny_index.top_k(q, 10)
        assert loaded.corpus_checksum == tiny_index.corpus_checksum
        assert loaded.stats.avgdl == tiny_index.stats.avgdl

    def test_persisted_bytes_are_deterministic(self, tmp_path, tiny_store):
        for name in ("a", "b"):
            build_index(tiny_store).save(tmp_path / name)
        for fname in ("manifest.json", "passages.jsonl", "postings.jsonl"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_manifest_fields(self, tmp_path, tiny_index):
        import json

        tiny_index.save(tmp_path / "idx")
        manifest = json.loads((tmp_path / "idx" / "manifest.json").read_text())
        assert manifest["format"] == "pagehop-index/1"
        assert manifest["bm25"] == {"k1": 0.9, "b": 0.4}
        assert manifest["corpus_checksum"] == tiny_index.corpus_checksum
        assert manifest["passage_count"] == len(tiny_index)
        assert manifest["avgdl"] == tiny_index.stats.avgdl

    def test_load_rejects_wrong_format(self, tmp_path, tiny_index):
        tiny_index.save(tmp_path / "idx")
        (tmp_path / "idx" / "manifest.json").write_text('{"format": "other/9"}')
        with pytest.raises(IndexError_, match="unsupported"):
            InvertedIndex.load(tmp_path / "idx")

    def test_module_level_top_k_wrapper(self, tiny_index):
        assert top_k(tiny_index, "river", 3) == tiny_index.top_k("river", 3)

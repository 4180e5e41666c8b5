import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pagehop.evaluation import (
    ANSWER_BOOLEAN,
    ANSWER_SPAN,
    DatasetError,
    EvalQuestion,
    HeuristicAnswerer,
    MetricReport,
    ScorerAnswerer,
    benchmark_table,
    boolean_accuracy,
    canonical_dataset_name,
    contains_answer,
    filter_yes_no,
    load_dataset,
    load_run,
    normalize_answer,
    recall_at_k,
    render_report,
)
from pagehop.rerank import LexicalScorer

FIXTURES = Path(__file__).parent / "fixtures" / "datasets"


def trace(query, texts, qid=None):
    return {"query": query, "qid": qid,
            "final": [{"pid": f"p{i}", "title": "T", "text": t,
                       "bm25": 1.0, "relevance": 0.5, "provenance": []}
                      for i, t in enumerate(texts)]}


def question(qid, text, answers, answer_type=ANSWER_SPAN, gold=None):
    return EvalQuestion(qid=qid, question=text, answers=tuple(answers),
                        answer_type=answer_type, gold_bool=gold)


class TestNormalize:
    def test_articles_case_punctuation(self):
        assert normalize_answer("The Eiffel Tower!") == "eiffel tower"

    def test_empty(self):
        assert normalize_answer("") == ""

    def test_collapse_whitespace_and_article(self):
        assert normalize_answer("a  DOG.") == "dog"

    def test_unicode_punctuation(self):
        assert normalize_answer("Bram Stoker’s “Dracula”") == "bram stoker s dracula"


class TestContainsAnswer:
    def test_simple_containment(self):
        assert contains_answer(["the capital is Paris today"], ["Paris"])

    def test_full_phrase_required(self):
        assert not contains_answer(["they went to New York for a week"], ["New York City"])

    def test_empty_passages(self):
        assert not contains_answer([], ["Paris"])

    def test_case_article_punctuation_invariance(self):
        passage = "Many say (the) EIFFEL tower, in Paris, is iconic."
        assert contains_answer([passage], ["eiffel tower"])
        assert contains_answer([passage], ["The Eiffel Tower!"])

    def test_token_boundary_no_substring_false_hit(self):
        assert not contains_answer(["the carpet was red"], ["car"])

    @given(st.text("abc XYZ.,!?", min_size=1, max_size=30))
    def test_answer_always_found_in_itself_padded(self, answer):
        if normalize_answer(answer):
            assert contains_answer([f"prefix words {answer} suffix words"], [answer])


class TestFilterYesNo:
    def test_mixed(self):
        questions = [
            question("a", "span q", ["x"]),
            question("b", "yes q", ["yes"], ANSWER_BOOLEAN, "yes"),
            question("c", "no q", ["no"], ANSWER_BOOLEAN, "no"),
        ]
        kept = filter_yes_no(questions)
        assert [q.qid for q in kept] == ["a"]

    def test_identity_when_no_boolean(self):
        questions = [question("a", "q", ["x"]), question("b", "q2", ["y"])]
        assert filter_yes_no(questions) == questions

    def test_all_boolean_empty_with_warning(self):
        questions = [question("b", "q", ["yes"], ANSWER_BOOLEAN, "yes")]
        warnings = []
        assert filter_yes_no(questions, warnings) == []
        assert any("no questions left" in w for w in warnings)


class TestRecallAtK:
    def test_counting_example(self):
        # one hit at rank 3, one at rank 7 -> recall@5 = 0.5, recall@20 = 1.0
        questions = [question("q1", "first", ["gold one"]),
                     question("q2", "second", ["gold two"])]
        traces = [
            trace("first", ["miss"] * 2 + ["has gold one inside"] + ["miss"] * 4),
            trace("second", ["miss"] * 6 + ["the gold two appears"] + ["miss"]),
        ]
        report = recall_at_k(traces, questions, [5, 20])
        assert report.recall_at[5] == 0.5
        assert report.recall_at[20] == 1.0
        assert report.n_questions == 2

    def test_k_zero_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k([], [], [0])

    def test_monotone_in_k(self):
        questions = [question(f"q{i}", f"query {i}", [f"gold{i}"]) for i in range(6)]
        traces = [trace(f"query {i}", ["x"] * i + [f"gold{i}"]) for i in range(6)]
        report = recall_at_k(traces, questions, [1, 2, 3, 5, 10])
        values = [report.recall_at[k] for k in sorted(report.recall_at)]
        assert values == sorted(values)

    def test_missing_trace_counts_as_miss_with_warning(self):
        questions = [question("q1", "present", ["gold"]), question("q2", "absent", ["gold"])]
        report = recall_at_k([trace("present", ["gold"])], questions, [5])
        assert report.recall_at[5] == 0.5
        assert any("no trace" in w for w in report.warnings)

    def test_qid_join_when_available(self):
        questions = [question("idA", "same text", ["alpha"]),
                     question("idB", "same text", ["beta"])]
        traces = [trace("same text", ["beta here"], qid="idB"),
                  trace("same text", ["alpha here"], qid="idA")]
        report = recall_at_k(traces, questions, [1])
        assert report.recall_at[1] == 1.0

    def test_byte_identical_reports(self, tmp_path):
        questions = [question("q1", "first", ["gold"])]
        run = tmp_path / "run.jsonl"
        run.write_text(json.dumps(trace("first", ["gold"])) + "\n", encoding="utf-8")
        a = recall_at_k(run, questions, [5], dataset="nq")
        b = recall_at_k(run, questions, [5], dataset="nq")
        assert a.to_json() == b.to_json()

    def test_perfect_when_answers_always_present(self):
        questions = [question(f"q{i}", f"query {i}", ["gold"]) for i in range(4)]
        traces = [trace(f"query {i}", ["filler", "some gold here"]) for i in range(4)]
        report = recall_at_k(traces, questions, [2])
        assert report.recall_at[2] == 1.0


class TestBooleanAccuracy:
    def balanced_questions(self):
        return [question("b1", "is it true", [], ANSWER_BOOLEAN, "yes"),
                question("b2", "is it false", [], ANSWER_BOOLEAN, "no")]

    def test_constant_yes_on_balanced_set(self):
        questions = self.balanced_questions()
        traces = [trace("is it true", ["text"]), trace("is it false", ["text"])]
        report = boolean_accuracy(traces, questions, lambda q, texts: "yes")
        assert report.accuracy == 0.5

    def test_oracle_answerer_is_perfect(self):
        questions = self.balanced_questions()
        traces = [trace("is it true", ["text"]), trace("is it false", ["text"])]
        gold = {q.question: q.gold_bool for q in questions}
        report = boolean_accuracy(traces, questions, lambda q, texts: gold[q])
        assert report.accuracy == 1.0

    def test_answerer_failure_counts_incorrect(self):
        questions = self.balanced_questions()
        traces = [trace("is it true", ["text"]), trace("is it false", ["text"])]

        def flaky(q, texts):
            if q == "is it true":
                raise RuntimeError("model down")
            return "no"

        report = boolean_accuracy(traces, questions, flaky)
        assert report.accuracy == 0.5
        assert any("failed" in w for w in report.warnings)

    def test_heuristic_answerer(self):
        answerer = HeuristicAnswerer(threshold=0.5)
        assert answerer("is the alpha river long", ["the alpha river is long"]) == "yes"
        assert answerer("is the alpha river long", ["unrelated text entirely"]) == "no"
        assert answerer("is the alpha river long", []) == "no"

    def test_scorer_answerer(self):
        answerer = ScorerAnswerer(LexicalScorer(), threshold=0.5)
        assert answerer("alpha river flood", ["the alpha river flood plain"]) == "yes"
        assert answerer("alpha river flood", ["nothing relevant"]) == "no"
        assert answerer("alpha river flood", []) == "no"


class TestAdapters:
    CASES = [
        ("nq", "nq_open_dev.jsonl", 5),
        ("triviaqa", "triviaqa_unfiltered_dev.json", 5),
        ("hotpotqa", "hotpot_dev.json", 5),
        ("boolq", "boolq_dev.jsonl", 5),
        ("strategyqa", "strategyqa_dev.json", 5),
    ]

    @pytest.mark.parametrize("name,fname,count", CASES)
    def test_fixture_counts(self, name, fname, count):
        questions = load_dataset(name, FIXTURES / fname)
        assert len(questions) == count

    def test_nq_fields(self):
        questions = load_dataset("nq", FIXTURES / "nq_open_dev.jsonl")
        assert questions[0].answers == ("Mozart", "Wolfgang Amadeus Mozart")
        assert questions[0].answer_type == ANSWER_SPAN

    def test_triviaqa_aliases(self):
        questions = load_dataset("tqa", FIXTURES / "triviaqa_unfiltered_dev.json")
        assert "The Red Planet" in questions[0].answers
        assert questions[0].qid == "tc_1"

    def test_hotpot_yes_no_marked_boolean(self):
        questions = load_dataset("hotpot", FIXTURES / "hotpot_dev.json")
        booleans = [q for q in questions if q.answer_type == ANSWER_BOOLEAN]
        assert {q.gold_bool for q in booleans} == {"yes", "no"}
        assert len(filter_yes_no(questions)) == 3

    def test_boolq_gold(self):
        questions = load_dataset("boolq", FIXTURES / "boolq_dev.jsonl")
        assert questions[0].gold_bool == "yes"
        assert questions[2].gold_bool == "no"

    def test_strategyqa_gold_and_qid(self):
        questions = load_dataset("strategyqa", FIXTURES / "strategyqa_dev.json")
        assert questions[0].qid == "sq1"
        assert questions[1].gold_bool == "no"

    def test_unknown_dataset_fatal(self):
        with pytest.raises(DatasetError, match="unknown dataset"):
            load_dataset("websearch", FIXTURES / "nq_open_dev.jsonl")

    def test_malformed_record_fatal(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"question": "q"}\n', encoding="utf-8")  # missing answer
        with pytest.raises(DatasetError, match="bad record"):
            load_dataset("nq", bad)

    def test_aliases_resolve(self):
        assert canonical_dataset_name("NQ-Open") == "nq"
        assert canonical_dataset_name("stqa") == "strategyqa"


class TestReports:
    def make_reports(self):
        span_questions = [question("q1", "first", ["gold"])]
        span_traces = [trace("first", ["gold here"])]
        bool_questions = [question("b1", "really", [], ANSWER_BOOLEAN, "yes")]
        bool_traces = [trace("really", ["text"])]
        return {
            "nq": recall_at_k(span_traces, span_questions, [5, 20], dataset="nq"),
            "triviaqa": recall_at_k(span_traces, span_questions, [5, 20], dataset="triviaqa"),
            "hotpotqa": recall_at_k(span_traces, span_questions, [5, 20], dataset="hotpotqa"),
            "boolq": boolean_accuracy(bool_traces, bool_questions,
                                      lambda q, t: "yes", dataset="boolq"),
            "strategyqa": boolean_accuracy(bool_traces, bool_questions,
                                           lambda q, t: "yes", dataset="strategyqa"),
        }

    def test_benchmark_table_columns_in_order(self):
        table = benchmark_table(self.make_reports())
        header = table.splitlines()[0].split()
        assert header == ["System", "NQ@5", "NQ@20", "TQA@5", "TQA@20",
                          "Hotpot@5", "Hotpot@20", "BoolQ", "Acc.", "STQA", "Acc."]

    def test_benchmark_values_are_percentages(self):
        table = benchmark_table(self.make_reports(), system="mypipe")
        row = table.splitlines()[1]
        assert row.startswith("mypipe")
        assert "100.0" in row

    def test_report_round_trip(self):
        report = self.make_reports()["nq"]
        again = MetricReport.from_dict(json.loads(report.to_json()))
        assert again.to_json() == report.to_json()

    def test_render_single_report(self):
        text = render_report(self.make_reports()["boolq"])
        assert "BoolQ Acc." in text


def test_load_run_rejects_bad_lines(tmp_path):
    run = tmp_path / "run.jsonl"
    run.write_text('{"query": "ok", "final": []}\nnot json\n', encoding="utf-8")
    with pytest.raises(ValueError, match="bad trace line"):
        load_run(run)

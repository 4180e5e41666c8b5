"""Drive the provider/scorer clients against the shared golden wire fixtures.

The golden suite is recorded from a conforming service; replaying it here
pins the request bodies this package emits and the response shapes it
accepts, without needing any service running.
"""
from pathlib import Path

import pytest

from pagehop.providers import (
    Decomposition,
    correct_decompositions,
    decompose,
    entity_link,
    event_link,
)
from pagehop.rerank import RemoteScorer
from pagehop.wire import ReplayTransport

GOLDEN = Path(__file__).parent / "fixtures" / "wire" / "golden.jsonl"
FIG_QUERY = "Did McKenna Grace vote for Joe Biden in the 2020 election?"


@pytest.fixture(scope="module")
def transport():
    return ReplayTransport(GOLDEN)


def test_entity_link_fig_query(transport):
    candidates = entity_link(transport, FIG_QUERY, 10)
    assert [c.title for c in candidates] == [
        "Joe Biden", "McKenna Grace", "2020 United States presidential election"]
    assert [c.rank for c in candidates] == [1, 2, 3]


def test_entity_link_no_overlap(transport):
    assert entity_link(transport, "totally unrelated quasar physics", 10) == []


def test_event_link_on_decomposition_sentence(transport):
    candidates = event_link(transport, "Supporting event 1.1: a comet passed over the harbor",
                            5, source="event_link_decomposition",
                            origin_sentence="Supporting event 1.1: a comet passed over the harbor")
    assert [c.title for c in candidates] == ["Gamma Comet", "Harbor Festival"]


def test_decompose_five_by_three(transport):
    sets = decompose(transport, FIG_QUERY)
    assert len(sets) == 5
    assert all(len(d.sentences) == 3 for d in sets)
    assert all(FIG_QUERY.rstrip("?") in s for d in sets for s in d.sentences)


def test_correct_normalizes_whitespace(transport):
    original = Decomposition(0, ("McKenna  Grace was  born in 2006.",
                                 "The voting age   is eighteen.",
                                 "  Joe Biden won the 2020 election.  "))
    corrected = correct_decompositions(transport, [original], query=FIG_QUERY)
    assert corrected[0].sentences == ("McKenna Grace was born in 2006.",
                                      "The voting age is eighteen.",
                                      "Joe Biden won the 2020 election.")


def test_scorer_batch_matches_recording(transport):
    pairs = [
        ("who won the 2020 election", "joe biden won the 2020 election"),
        ("who won the 2020 election", "comet passing over harbor skies"),
        ("who won the 2020 election", "the 2020 election had high turnout"),
        ("who won the 2020 election", "biden won"),
    ]
    scores = RemoteScorer(transport).score_pairs(pairs)
    assert scores == [0.8, 0.0, 0.6, 0.2]

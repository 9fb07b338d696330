from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from remi.mementos import DetectedFeature
from remi.nlu import adapters
from remi.nlu.adapters import AdapterDescriptor, AdapterError, analyze_image, normalize_external_features
from remi.nlu.baseline import NluBaseline, NluResult


@pytest.fixture(scope="module")
def nlu() -> NluBaseline:
    return NluBaseline()


# -- analyze_text: intent -------------------------------------------------------


def test_place_answer_is_provide_info(nlu):
    result = nlu.analyze_text("It was taken in Chicago", expected_slot="place")
    assert result.intent == "provide-info"
    assert ("place", "Chicago") in [(e.kind, e.value) for e in result.entities]


def test_empty_input(nlu):
    result = nlu.analyze_text("", expected_slot=None)
    assert result.intent == "empty"
    assert result.sentiment == 0.0
    assert result.entities == []


@pytest.mark.parametrize(
    "text,intent",
    [
        ("hello there", "greet"),
        ("goodbye now", "farewell"),
        ("yes", "affirm"),
        ("nope", "deny"),
        ("hmm let me think", "off-topic"),
    ],
)
def test_intent_ladder(nlu, text, intent):
    assert nlu.analyze_text(text).intent == intent


def test_leading_deny_only(nlu):
    assert nlu.analyze_text("no, not at all").intent == "deny"
    assert nlu.analyze_text("well no").intent == "deny"
    # a negation buried in a narrative is not a denial
    long_story = "we used to walk for hours every evening after dinner no matter how cold it got"
    assert nlu.analyze_text(long_story).intent == "tell-story"


def test_tell_story_at_threshold(nlu):
    story = "when we arrived we walked along every street until dawn and talked for hours"
    result = nlu.analyze_text(story)
    assert len(result.tokens) >= 12
    assert result.intent == "tell-story"


def test_entities_beat_story_length(nlu):
    text = "we went to Chicago and stayed for weeks wandering every museum and park in town"
    assert nlu.analyze_text(text).intent == "provide-info"


# -- analyze_text: sentiment ----------------------------------------------------


def test_sentiment_hand_sum(nlu):
    # shipped lexicon: loved=+0.8, wonderful=+0.9 -> mean 0.85
    result = nlu.analyze_text("I really loved that wonderful city")
    assert result.sentiment == pytest.approx((0.8 + 0.9) / 2, abs=1e-12)


def test_sentiment_negation_flip(nlu):
    # like=+0.6 with "not" inside the 2-token window flips to -0.6
    assert nlu.analyze_text("I did not like it").sentiment == pytest.approx(-0.6, abs=1e-12)


def test_negation_outside_window_does_not_flip(nlu):
    # "not" is 3 tokens before "like": outside the window
    assert nlu.analyze_text("not that I would like it").sentiment == pytest.approx(0.6, abs=1e-12)


def test_zero_hit_sentence_scores_exactly_zero(nlu):
    assert nlu.analyze_text("It was taken in Chicago").sentiment == 0.0


# -- analyze_text: entities ------------------------------------------------------


def test_decade_entity(nlu):
    result = nlu.analyze_text("I lived there in the 80s")
    assert [(e.kind, e.value) for e in result.entities] == [("time", "the 80s")]


def test_multiword_place(nlu):
    result = nlu.analyze_text("We flew to New York that summer")
    assert ("place", "New York") in [(e.kind, e.value) for e in result.entities]


def test_kinship_pattern(nlu):
    result = nlu.analyze_text("My sister took it")
    assert [(e.kind, e.value) for e in result.entities] == [("people", "My sister")]


def test_capitalized_heuristic_person(nlu):
    result = nlu.analyze_text("I went there with Margherita")
    assert ("people", "Margherita") in [(e.kind, e.value) for e in result.entities]


def test_expected_slot_bias_reclassifies_unknown_capitalized(nlu):
    token_as_place = nlu.analyze_text("It was taken in Rovaniemi", expected_slot="place")
    assert ("place", "Rovaniemi") in [(e.kind, e.value) for e in token_as_place.entities]
    token_default = nlu.analyze_text("It was taken in Rovaniemi")
    assert ("people", "Rovaniemi") in [(e.kind, e.value) for e in token_default.entities]


def test_expected_slot_orders_entities_first(nlu):
    result = nlu.analyze_text("My sister and I were in Chicago", expected_slot="place")
    assert result.entities[0].kind == "place"


def test_entities_deduplicated(nlu):
    result = nlu.analyze_text("Chicago, Chicago, what a city")
    assert len([e for e in result.entities if e.kind == "place"]) == 1


# -- properties -------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_sentiment_bounded(text):
    result = NluBaseline().analyze_text(text)
    assert -1.0 <= result.sentiment <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_entity_values_are_literal_spans(text):
    result = NluBaseline().analyze_text(text, expected_slot="place")
    for entity in result.entities:
        start, end = entity.span
        assert text[start:end] == entity.value


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=60))
def test_analyze_text_deterministic(text):
    nlu = NluBaseline()
    assert nlu.analyze_text(text).to_doc() == nlu.analyze_text(text).to_doc()


def test_nlu_result_roundtrip(nlu):
    result = nlu.analyze_text("We visited Chicago in 1984 with my sister")
    assert NluResult.from_doc(json.loads(json.dumps(result.to_doc()))).to_doc() == result.to_doc()


# -- social markers ----------------------------------------------------------------


def test_markers_greeting(nlu):
    assert nlu.detect_social_markers("hello there")["greeting"] is True


def test_markers_empty(nlu):
    assert nlu.detect_social_markers("") == {"greeting": False, "farewell": False, "thanks": False}


def test_markers_thanks_and_farewell(nlu):
    markers = nlu.detect_social_markers("thanks, goodbye")
    assert markers["thanks"] is True
    assert markers["farewell"] is True


# -- vision adapter -------------------------------------------------------------------


def test_fixture_features(tmp_path):
    fixture = tmp_path / "f.json"
    fixture.write_text(json.dumps([{"label": "skyline", "salience": 0.9}]), encoding="utf-8")
    features = analyze_image(fixture)
    assert features == [DetectedFeature("skyline", 0.9, source="fixture")]


def test_empty_fixture(tmp_path):
    fixture = tmp_path / "f.json"
    fixture.write_text("[]", encoding="utf-8")
    assert analyze_image(fixture) == []


def test_missing_fixture_is_an_error(tmp_path):
    with pytest.raises(AdapterError):
        analyze_image(tmp_path / "absent.json")


def test_external_salience_clamped():
    features = normalize_external_features(
        [{"label": "skyline", "salience": 1.7}, {"label": "mud", "salience": -0.2}], "svc"
    )
    assert [f.salience for f in features] == [1.0, 0.0]


def test_external_mode_requires_endpoint():
    with pytest.raises(AdapterError):
        AdapterDescriptor(name="vision", kind="vision", mode="external")


def test_offline_baseline_makes_zero_network_calls():
    adapters.reset_network_call_counter()
    nlu = NluBaseline()
    nlu.analyze_text("hello from Chicago, we loved the 80s")
    nlu.detect_social_markers("thanks")
    assert adapters.NETWORK_CALLS == 0

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from remi.clock import SIM_EPOCH, to_iso
from remi.connections import (
    CATEGORY_WEIGHTS,
    ConnectionsError,
    cluster,
    refresh_pairs,
    shared_interest_text,
    similarity,
    similarity_table,
    suggest_connection,
)
from remi.life_model import KnowledgeEntity, PersonProfile


def profile(person_id: str, *triples: tuple[str, str, str]) -> PersonProfile:
    entities = [
        KnowledgeEntity(id=f"e-{i:04d}", category=c, predicate=p, object=o)
        for i, (c, p, o) in enumerate(triples, start=1)
    ]
    return PersonProfile(person_id=person_id, display_name=person_id.title(), entities=entities)


JAZZ = ("preference", "likes", "jazz")
CHICAGO = ("life-event", "lived-in", "Chicago")
TRENTO = ("life-event", "lived-in", "Trento")
GARDENING = ("habit-skill", "gardens", "roses")


def test_identical_profiles_score_one():
    a = profile("alice", JAZZ, CHICAGO)
    b = profile("bob", JAZZ, CHICAGO)
    assert similarity(a, b).score == 1.0


def test_disjoint_profiles_score_zero():
    assert similarity(profile("alice", JAZZ), profile("bob", GARDENING)).score == 0.0


def test_empty_union_scores_zero():
    assert similarity(profile("alice"), profile("bob")).score == 0.0


def test_weighted_jaccard_fixture():
    # shared = likes jazz (1.5); union = 1.5 + 1.0 + 1.0 = 3.5 -> 3/7 (displayed 0.4286)
    a = profile("alice", JAZZ, CHICAGO)
    b = profile("bob", JAZZ, TRENTO)
    entry = similarity(a, b)
    assert abs(entry.score - 1.5 / 3.5) <= 1e-9
    assert entry.contributing_entities == [("preference", "likes", "jazz")]


def test_object_normalization_casefold_trim():
    a = profile("alice", ("preference", "likes", "  Jazz "))
    b = profile("bob", ("preference", "likes", "jazz"))
    assert similarity(a, b).score == 1.0


def test_pair_canonical_order():
    a, b = profile("zed", JAZZ), profile("amy", JAZZ)
    assert similarity(a, b).pair == ("amy", "zed")


@st.composite
def random_profiles(draw):
    pool = [
        ("preference", "likes", obj) for obj in ("jazz", "opera", "chess", "tea")
    ] + [
        ("life-event", "lived-in", obj) for obj in ("Trento", "Chicago", "Paris")
    ] + [
        ("value", "believes", obj) for obj in ("kindness", "thrift")
    ] + [
        ("habit-skill", "gardens", "roses"),
        ("relationship", "friend-of", "Carla"),
    ]
    left = draw(st.sets(st.sampled_from(pool), max_size=len(pool)))
    right = draw(st.sets(st.sampled_from(pool), max_size=len(pool)))
    return profile("alice", *left), profile("bob", *right)


@settings(max_examples=100, deadline=None)
@given(random_profiles())
def test_similarity_symmetric_and_bounded(pair):
    a, b = pair
    left, right = similarity(a, b), similarity(b, a)
    assert left.score == right.score
    assert 0.0 <= left.score <= 1.0


@settings(max_examples=50, deadline=None)
@given(random_profiles())
def test_self_similarity_is_one_for_non_empty(pair):
    a, _ = pair
    expected = 1.0 if a.entities else 0.0
    assert similarity(a, a).score == expected


# -- refresh ------------------------------------------------------------------------


def population() -> dict[str, PersonProfile]:
    return {
        "alice": profile("alice", JAZZ, CHICAGO),
        "bob": profile("bob", JAZZ, TRENTO),
        "carla": profile("carla", GARDENING),
        "dan": profile("dan", GARDENING, JAZZ),
    }


def test_refresh_updates_all_pairs_of_person():
    profiles = population()
    table = similarity_table(profiles, now=SIM_EPOCH)
    refreshed = refresh_pairs(table, profiles, "alice", now=SIM_EPOCH + 60)
    assert len(refreshed) == 3
    for entry in refreshed:
        assert "alice" in entry.pair
        assert entry.computed_at == to_iso(SIM_EPOCH + 60)


def test_refresh_without_change_keeps_scores():
    profiles = population()
    table = similarity_table(profiles, now=SIM_EPOCH)
    before = {key: entry.score for key, entry in table.items()}
    refresh_pairs(table, profiles, "alice", now=SIM_EPOCH + 60)
    assert {key: entry.score for key, entry in table.items()} == before


def test_shared_addition_strictly_increases_score():
    profiles = population()
    before = similarity(profiles["alice"], profiles["carla"]).score
    for person in ("alice", "carla"):
        profiles[person].entities.append(
            KnowledgeEntity(id="e-9999", category="preference", predicate="likes", object="opera")
        )
    after = similarity(profiles["alice"], profiles["carla"]).score
    assert after > before


def test_refresh_unknown_person():
    with pytest.raises(ConnectionsError):
        refresh_pairs({}, population(), "nobody", now=0)


# -- clustering -----------------------------------------------------------------------


def test_k_equals_population_gives_singletons():
    profiles = population()
    result = cluster(profiles, k=len(profiles))
    assert [c.members for c in result] == [["alice"], ["bob"], ["carla"], ["dan"]]
    for c in result:
        assert c.medoid in c.members


def test_k1_medoid_matches_brute_force():
    profiles = population()
    result = cluster(profiles, k=1)
    assert len(result) == 1

    # brute force: the member minimizing summed distance to everyone
    ids = sorted(profiles)
    def total_distance(candidate):
        return sum(1.0 - similarity(profiles[candidate], profiles[other]).score for other in ids)
    best = min(ids, key=lambda pid: (total_distance(pid), pid))
    assert result[0].medoid == best
    assert result[0].members == ids


def test_two_zero_cross_blocks_recovered():
    profiles = {
        "a1": profile("a1", JAZZ, ("preference", "likes", "opera")),
        "a2": profile("a2", JAZZ),
        "a3": profile("a3", JAZZ, ("value", "believes", "music")),
        "g1": profile("g1", GARDENING),
        "g2": profile("g2", GARDENING, ("habit-skill", "gardens", "herbs")),
    }
    clusters = cluster(profiles, k=2)
    memberships = sorted(tuple(c.members) for c in clusters)
    assert memberships == [("a1", "a2", "a3"), ("g1", "g2")]


def test_cluster_rerun_byte_stable():
    profiles = population()
    first = [c.to_doc() for c in cluster(profiles, k=2)]
    second = [c.to_doc() for c in cluster(profiles, k=2)]
    assert first == second


def test_clusters_partition_population():
    profiles = population()
    result = cluster(profiles, k=2)
    seen = [m for c in result for m in c.members]
    assert sorted(seen) == sorted(profiles)


def test_invalid_k_rejected():
    with pytest.raises(ConnectionsError):
        cluster(population(), k=0)
    with pytest.raises(ConnectionsError):
        cluster(population(), k=5)


# -- suggestions -----------------------------------------------------------------------


def test_top_suggestion_is_bob_with_fixture_score():
    ranked = suggest_connection(
        {"alice": profile("alice", JAZZ, CHICAGO), "bob": profile("bob", JAZZ, TRENTO)},
        "alice",
    )
    assert len(ranked) == 1
    assert ranked[0]["person_id"] == "bob"
    assert abs(ranked[0]["score"] - 1.5 / 3.5) <= 1e-9
    assert ranked[0]["shared"] == [["preference", "likes", "jazz"]]


def test_all_below_threshold_gives_empty():
    profiles = {
        "alice": profile("alice", JAZZ, CHICAGO, GARDENING, ("value", "believes", "kindness")),
        "bob": profile("bob", JAZZ, TRENTO, ("value", "believes", "thrift"), ("habit-skill", "cooks", "pasta")),
    }
    # shared 1.5 / union 7.5 = 0.2 exactly; raise the bar just above it
    assert suggest_connection(profiles, "alice", min_score=0.21) == []


def test_suggestion_never_returns_self():
    profiles = {"alice": profile("alice", JAZZ), "bob": profile("bob", JAZZ)}
    for _ in range(3):
        ranked = suggest_connection(profiles, "alice")
        assert all(row["person_id"] != "alice" for row in ranked)


def test_refractory_window_suppresses_recent_pairs():
    profiles = {"alice": profile("alice", JAZZ), "bob": profile("bob", JAZZ)}
    now = SIM_EPOCH + 40 * 86400
    recent = {"alice|bob": to_iso(now - 86400)}
    stale = {"alice|bob": to_iso(now - 31 * 86400)}
    assert suggest_connection(profiles, "alice", suggested_at=recent, now=now) == []
    assert suggest_connection(profiles, "alice", suggested_at=stale, now=now) != []


def test_unknown_person_rejected():
    with pytest.raises(ConnectionsError):
        suggest_connection({}, "alice")


def test_shared_interest_text_prefers_heaviest_category():
    shared = [CHICAGO, JAZZ, ("value", "believes", "kindness")]
    assert shared_interest_text(shared) == "believes kindness"
    assert shared_interest_text([list(JAZZ)]) == "likes jazz"
    assert shared_interest_text([]) == "similar memories"


def test_category_weights_match_documented_values():
    assert CATEGORY_WEIGHTS == {
        "value": 2.0,
        "preference": 1.5,
        "life-event": 1.0,
        "habit-skill": 1.0,
        "relationship": 0.5,
    }

from __future__ import annotations

import pytest

from remi.engine.rules import (
    DialogContext,
    Rule,
    RuleDatabase,
    RuleError,
    disengagement_pivot,
    select_action,
)


def rule(rule_id, priority, conditions, action_kind="react", action_args=None, cooldown=0):
    return Rule(
        rule_id=rule_id,
        priority=priority,
        conditions=conditions,
        action_kind=action_kind,
        action_args=action_args or {},
        cooldown_turns=cooldown,
    )


FALLBACK = rule("r-fallback", 0, [{"kind": "always"}])


def chicago_context(**overrides) -> DialogContext:
    base = dict(
        person_id="alice",
        active_memento_id="m-chicago",
        features=["skyline", "water"],
        confirmed_tags={"place": "Chicago"},
        unfilled_slots=["time", "people", "occasion", "emotion"],
        knowledge={("life-event", "born-in", "Trento")},
        engagement_window=[0.0],
        engagement_cum=0.0,
    )
    base.update(overrides)
    return DialogContext(**base)


RELATION_RULE = rule(
    "r-relation",
    90,
    [
        {"kind": "tag-equals", "slot": "place", "bind": "place"},
        {"kind": "knows", "category": "life-event", "predicate": "born-in", "bind": "known-place"},
        {"kind": "not-knows", "category": "life-event", "predicate": "lived-in", "object": "$place"},
        {"kind": "not-knows", "category": "life-event", "predicate": "visited", "object": "$place"},
    ],
    action_kind="elicit-relation",
    action_args={"predicate": "visited", "object_binding": "place"},
)


def test_relation_rule_fires_with_bindings():
    selection = select_action(chicago_context(), [RELATION_RULE, FALLBACK])
    assert selection.rule.rule_id == "r-relation"
    assert selection.bindings["place"] == "Chicago"
    assert selection.bindings["known-place"] == "Trento"


def test_relation_suppressed_once_known():
    context = chicago_context(
        knowledge={("life-event", "born-in", "Trento"), ("life-event", "lived-in", "Chicago")}
    )
    selection = select_action(context, [RELATION_RULE, FALLBACK])
    assert selection.rule.rule_id == "r-fallback"


def test_fallback_when_nothing_substantive_applies():
    context = DialogContext(person_id="alice")
    selection = select_action(
        context,
        [rule("r-a", 50, [{"kind": "slot-unfilled", "slot": "place"}], "elicit-slot", {"slot": "place"}), FALLBACK],
    )
    assert selection.rule.rule_id == "r-fallback"


def test_no_fallback_raises():
    with pytest.raises(RuleError):
        select_action(DialogContext(), [rule("r-a", 5, [{"kind": "open-task-is", "task": "slot"}])])


def test_priority_wins():
    high = rule("r-high", 10, [{"kind": "always"}])
    low = rule("r-low", 5, [{"kind": "always"}])
    assert select_action(DialogContext(), [low, high]).rule.rule_id == "r-high"


def test_tie_break_fewest_firings_then_id():
    a = rule("r-a", 5, [{"kind": "always"}])
    b = rule("r-b", 5, [{"kind": "always"}])
    context = DialogContext(rule_firings={"r-a": {"last": 0, "count": 2}}, selection_index=5)
    assert select_action(context, [a, b, FALLBACK]).rule.rule_id == "r-b"
    context_even = DialogContext(
        rule_firings={"r-a": {"last": 0, "count": 1}, "r-b": {"last": 1, "count": 1}},
        selection_index=5,
    )
    assert select_action(context_even, [a, b, FALLBACK]).rule.rule_id == "r-a"


def test_five_rule_tie_fixture_matches_hand_enumeration():
    # hand oracle: eligible are r-b (prio 7), r-d (prio 7), r-e (prio 3);
    # tie at 7 -> fewest firings: r-b has 1, r-d has 0 -> r-d wins
    rules = [
        rule("r-a", 9, [{"kind": "slot-unfilled", "slot": "place"}], "elicit-slot", {"slot": "place"}),
        rule("r-b", 7, [{"kind": "always"}]),
        rule("r-c", 7, [{"kind": "engagement-at-least", "threshold": 0.5}]),
        rule("r-d", 7, [{"kind": "feature-present", "label": "skyline"}]),
        rule("r-e", 3, [{"kind": "always"}]),
    ]
    context = chicago_context(
        rule_firings={"r-b": {"last": 0, "count": 1}},
        selection_index=3,
        unfilled_slots=[],  # no memento elicitation left; pivot allows react kinds only
    )
    # unfilled empty means pivot: only react kinds eligible; r-a is elicit anyway
    selection = select_action(context, rules)
    assert selection.rule.rule_id == "r-d"


def test_cooldown_blocks_until_elapsed():
    r = rule("r-a", 5, [{"kind": "always"}], cooldown=2)
    just_fired = DialogContext(rule_firings={"r-a": {"last": 3, "count": 1}}, selection_index=4)
    assert select_action(just_fired, [r, FALLBACK]).rule.rule_id == "r-fallback"
    elapsed = DialogContext(rule_firings={"r-a": {"last": 3, "count": 1}}, selection_index=6)
    assert select_action(elapsed, [r, FALLBACK]).rule.rule_id == "r-a"


def test_unbound_reference_fails_condition():
    r = rule(
        "r-a", 5,
        [{"kind": "not-knows", "category": "life-event", "predicate": "lived-in", "object": "$place"}],
    )
    assert select_action(DialogContext(), [r, FALLBACK]).rule.rule_id == "r-fallback"


def test_never_reask_slot_not_unfilled():
    r = rule("r-a", 50, [{"kind": "always"}], "elicit-slot", {"slot": "place"})
    context = chicago_context()  # place confirmed, not in unfilled
    assert select_action(context, [r, FALLBACK]).rule.rule_id == "r-fallback"


def test_elicit_requires_active_memento():
    r = rule("r-a", 50, [{"kind": "always"}], "elicit-slot", {"slot": "place"})
    context = DialogContext(unfilled_slots=["place"])  # no memento
    assert select_action(context, [r, FALLBACK]).rule.rule_id == "r-fallback"


def test_suggest_requires_candidate():
    r = rule("r-s", 50, [{"kind": "always"}], "suggest-connection")
    assert select_action(DialogContext(), [r, FALLBACK]).rule.rule_id == "r-fallback"
    ok = DialogContext(suggestion_candidate={"person_id": "bob", "display_name": "Bob", "score": 0.4, "shared": []})
    assert select_action(ok, [r, FALLBACK]).rule.rule_id == "r-s"


def test_bring_content_requires_candidate():
    r = rule("r-c", 50, [{"kind": "always"}], "bring-content")
    assert select_action(DialogContext(), [r, FALLBACK]).rule.rule_id == "r-fallback"
    ok = DialogContext(content_candidate="m-2")
    assert select_action(ok, [r, FALLBACK]).rule.rule_id == "r-c"


def test_pivot_gates_elicitations():
    elicit = rule("r-a", 90, [{"kind": "always"}], "elicit-slot", {"slot": "time"})
    context = chicago_context(unfilled_slots=[])  # all filled -> pivot
    assert select_action(context, [elicit, FALLBACK]).rule.rule_id == "r-fallback"


# -- disengagement ---------------------------------------------------------------


def test_pivot_when_all_slots_filled():
    assert disengagement_pivot(chicago_context(unfilled_slots=[])) is True


def test_no_pivot_fresh_memento_positive():
    context = chicago_context(engagement_window=[0.5], engagement_cum=0.5)
    assert disengagement_pivot(context) is False


def test_pivot_on_negative_window_mean():
    window = [-0.3, -0.5, 0.0, -0.2]  # mean -0.25 < 0.0
    assert disengagement_pivot(chicago_context(engagement_window=window)) is True


def test_pivot_on_question_cap():
    assert disengagement_pivot(chicago_context(questions_on_memento=8)) is True
    assert disengagement_pivot(chicago_context(questions_on_memento=7)) is False


def test_no_memento_pivots_only_on_engagement():
    context = DialogContext(unfilled_slots=[], engagement_window=[0.1])
    assert disengagement_pivot(context) is False
    context_negative = DialogContext(unfilled_slots=[], engagement_window=[-0.4])
    assert disengagement_pivot(context_negative) is True


# -- database validation -----------------------------------------------------------


def test_duplicate_rule_id_rejected():
    with pytest.raises(RuleError) as err:
        RuleDatabase([FALLBACK, rule("r-fallback", 1, [{"kind": "always"}])])
    assert "r-fallback" in str(err.value)


def test_empty_conditions_rejected():
    with pytest.raises(RuleError):
        rule("r-a", 1, [])


def test_unknown_condition_kind_rejected():
    with pytest.raises(RuleError):
        rule("r-a", 1, [{"kind": "phase-of-moon"}])


def test_negative_cooldown_rejected():
    with pytest.raises(RuleError):
        rule("r-a", 1, [{"kind": "always"}], cooldown=-1)

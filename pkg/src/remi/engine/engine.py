"""The conversation pipeline: context building, action selection, rendering,
and atomic turn commits against the document store.

Every mutating step works on copies and commits through a single store batch,
so a failed turn leaves sessions, profiles and mementos untouched.
"""

from __future__ import annotations

from .. import connections, life_model, metrics
from ..clock import SimClock, to_iso
from ..config import EngineConfig
from ..life_model import KnowledgeEntity, PersonProfile, copy_profile, period_from_text
from ..mementos import SLOTS, LifeStory, Memento, Tag, attach_tag, confirmed_slots, copy_memento, unfilled_slots
from ..storage import DocumentStore
from ..nlu.baseline import NluBaseline, NluResult
from .rules import DialogContext, RuleDatabase, Selection, select_action
from .session import ActionPlan, ElicitationTask, Session, SessionError, Turn
from .templates import TemplateDatabase, render_question

RELATION_VERBS = {
    "lived": "lived-in", "live": "lived-in", "living": "lived-in", "lives": "lived-in",
    "visited": "visited", "visit": "visited", "visiting": "visited",
    "moved": "moved-to", "born": "born-in",
}
DEFAULT_RELATION_CANDIDATES = ["lived-in", "visited"]


class UnknownPersonError(KeyError):
    pass


class UnknownMementoError(KeyError):
    pass


class UnknownSessionError(KeyError):
    pass


class SessionClosedError(SessionError):
    pass


class SessionConflictError(SessionError):
    """Person already has an active session (single-active-session policy)."""


class DialogEngine:
    def __init__(
        self,
        store: DocumentStore,
        rules: RuleDatabase,
        templates: TemplateDatabase,
        language=None,
        config: EngineConfig | None = None,
        clock=None,
        vocabulary=None,
    ):
        self.store = store
        self.rules = rules
        self.templates = templates
        self.config = config or EngineConfig()
        self.language = language or NluBaseline(
            story_token_threshold=self.config.story_token_threshold,
            negation_window=self.config.negation_window,
        )
        self.vocabulary = vocabulary or life_model.default_vocabulary()
        clock_doc = store.get("meta/clock") or {}
        self.clock = clock if clock is not None else SimClock(tick=clock_doc.get("tick", 0))

    # -- loading ----------------------------------------------------------

    def profile(self, person_id: str) -> PersonProfile:
        doc = self.store.get(f"profiles/{person_id}")
        if doc is None:
            raise UnknownPersonError(person_id)
        return PersonProfile.from_doc(doc)

    def memento(self, memento_id: str) -> Memento:
        doc = self.store.get(f"mementos/{memento_id}")
        if doc is None:
            raise UnknownMementoError(memento_id)
        return Memento.from_doc(doc)

    def session(self, session_id: str) -> Session:
        doc = self.store.get(f"sessions/{session_id}")
        if doc is None:
            raise UnknownSessionError(session_id)
        return Session.from_doc(doc)

    def _macro(self, person_id: str) -> dict:
        return self.store.get(f"macro/{person_id}") or {
            "person_id": person_id,
            "sessions_count": 0,
            "discussed_mementos": [],
            "asked_question_ids": [],
        }

    def _profiles(self) -> dict[str, PersonProfile]:
        out = {}
        for path in self.store.list("profiles"):
            doc = self.store.get(path)
            out[doc["person_id"]] = PersonProfile.from_doc(doc)
        return out

    def _suggested_pairs(self) -> dict[str, str]:
        doc = self.store.get("connections/suggestions") or {}
        return dict(doc.get("pairs", {}))

    # -- session lifecycle -------------------------------------------------

    def start_session(self, person_id: str, memento_id: str | None = None) -> Session:
        profile = self.profile(person_id)
        memento = self.memento(memento_id) if memento_id else None
        if self.config.single_active_session:
            for path in self.store.list("sessions"):
                doc = self.store.get(path)
                if doc["person_id"] == person_id and doc["status"] == "active":
                    raise SessionConflictError(
                        f"person {person_id!r} already has active session {doc['session_id']}"
                    )
        self.rules.reload_if_changed()
        self.templates.reload_if_changed()

        tick_before = self.clock.tick
        try:
            counters = self.store.counters()
            session_id = counters.allocate("session", "s")
            session = Session(
                session_id=session_id,
                person_id=person_id,
                active_memento=memento_id,
                started_at=to_iso(self.clock.advance()),
                baseline_knowledge=sorted(life_model.knowledge_triples(profile, 0.5)),
            )
            if memento is not None:
                session.baseline_slots[memento_id] = sorted(confirmed_slots(memento))

            macro = self._macro(person_id)
            macro["sessions_count"] += 1
            if memento_id and memento_id not in macro["discussed_mementos"]:
                macro["discussed_mementos"].append(memento_id)

            self._append_greeting(session, profile)
            suggestions = self._suggested_pairs()
            self._append_selected_action(session, profile, memento, macro, counters, suggestions)

            ops = [
                (f"sessions/{session_id}", session.to_doc()),
                (f"macro/{person_id}", macro),
                ("connections/suggestions", {"pairs": suggestions}),
                ("meta/counters", counters.doc()),
                ("meta/clock", {"tick": self.clock.tick}),
            ]
            self.store.apply(ops)
        except BaseException:
            self.clock.tick = tick_before
            raise
        return session

    def process_user_turn(self, session_id: str, text: str) -> tuple[Session, list[Turn]]:
        session = self.session(session_id)
        if session.status != "active":
            raise SessionClosedError(f"session {session_id} is closed")
        profile = copy_profile(self.profile(session.person_id))
        memento = copy_memento(self.memento(session.active_memento)) if session.active_memento else None

        tick_before = self.clock.tick
        try:
            counters = self.store.counters()
            new_turns: list[Turn] = []
            stories: list[LifeStory] = []

            task = session.open_task()
            expected_slot = task.goal["slot"] if task and task.goal["kind"] == "slot" else None
            nlu = self.language.analyze_text(text, expected_slot=expected_slot)

            index = len(session.turns)
            user_turn = Turn(
                index=index,
                initiator="user",
                text=text,
                timestamp=to_iso(self.clock.advance()),
                nlu=nlu,
            )
            session.turns.append(user_turn)
            new_turns.append(user_turn)

            consumed = self._satisfy_open_task(session, profile, memento, task, nlu, index)
            if nlu.intent == "tell-story":
                stories.extend(
                    self._record_story(session, profile, memento, nlu, text, index, counters, consumed)
                )
            self._stash_loose_entities(session, memento, nlu, index, consumed)

            self._update_recency(session, nlu)

            macro = self._macro(session.person_id)
            suggestions = self._suggested_pairs()
            if nlu.intent == "empty":
                self._append_direct_action(session, profile, "react", {"clarify": "yes"})
            elif nlu.intent == "farewell":
                self._append_direct_action(session, profile, "close", {})
            else:
                self._append_selected_action(session, profile, memento, macro, counters, suggestions)
            new_turns.append(session.turns[-1])

            ops = [(f"sessions/{session_id}", session.to_doc())]
            ops.append((f"profiles/{profile.person_id}", profile.to_doc()))
            if memento is not None:
                ops.append((f"mementos/{memento.memento_id}", memento.to_doc()))
            for story in stories:
                ops.append((f"stories/{story.story_id}", story.to_doc()))
            ops.append((f"macro/{session.person_id}", macro))
            ops.append(("connections/suggestions", {"pairs": suggestions}))
            table_doc = self._refresh_similarity(profile)
            if table_doc is not None:
                ops.append(("connections/similarity", table_doc))
            ops.append(("meta/counters", counters.doc()))
            ops.append(("meta/clock", {"tick": self.clock.tick}))
            self.store.apply(ops)
        except BaseException:
            self.clock.tick = tick_before
            raise
        return session, new_turns

    def close_session(self, session_id: str, rating: int | None = None) -> tuple[Session, metrics.MetricReport]:
        session = self.session(session_id)
        if session.status != "active":
            raise SessionClosedError(f"session {session_id} is already closed")
        if rating is not None and not 1 <= rating <= 5:
            raise SessionError(f"engagement rating must be 1-5, got {rating}")

        tick_before = self.clock.tick
        try:
            for task in session.tasks:
                if task.status == "open":
                    task.status = "abandoned"
            session.open_task_id = None
            session.status = "closed"
            session.ended_at = to_iso(self.clock.advance())
            session.rating = rating
            report = metrics.compute_report(session, markers=self.language.detect_social_markers)
            self.store.apply(
                [
                    (f"sessions/{session_id}", session.to_doc()),
                    (f"reports/{session_id}", report.to_doc()),
                    ("meta/clock", {"tick": self.clock.tick}),
                ]
            )
        except BaseException:
            self.clock.tick = tick_before
            raise
        return session, report

    # -- user turn internals ------------------------------------------------

    def _satisfy_open_task(
        self,
        session: Session,
        profile: PersonProfile,
        memento: Memento | None,
        task: ElicitationTask | None,
        nlu: NluResult,
        turn_index: int,
    ) -> set[tuple[str, str]]:
        """Returns the set of (kind, value) entity keys consumed by the task."""
        consumed: set[tuple[str, str]] = set()
        if task is None:
            return consumed

        if task.goal["kind"] == "slot":
            slot = task.goal["slot"]
            entity = next((e for e in nlu.entities if e.kind == slot), None)
            if entity is not None and memento is not None and memento.memento_id == task.goal["memento_id"]:
                attach_tag(memento, Tag(slot=slot, value=entity.value, confirmed_by_user=True, source_turn=turn_index))
                session.events.append(
                    {"kind": "tag", "turn": turn_index, "memento_id": memento.memento_id,
                     "slot": slot, "value": entity.value, "confirmed": True}
                )
                self._complete_task(session, task, turn_index)
                consumed.add((entity.kind, entity.value.casefold()))
            return consumed

        # relation task: which relation does the reply assert, and for when?
        predicate = None
        for token in nlu.tokens:
            if token in RELATION_VERBS:
                predicate = RELATION_VERBS[token]
                break
        if predicate is None and nlu.intent == "affirm":
            predicate = task.goal["default_predicate"]
        if nlu.intent == "deny":
            task.status = "abandoned"
            session.open_task_id = None
            return consumed
        if predicate is None:
            return consumed

        period = life_model.LifePeriod.unknown()
        time_entity = next((e for e in nlu.entities if e.kind == "time"), None)
        if time_entity is not None:
            period = period_from_text(time_entity.value)
            consumed.add((time_entity.kind, time_entity.value.casefold()))
        entity = KnowledgeEntity(
            id=profile.next_entity_id(),
            category=task.goal.get("category", "life-event"),
            predicate=predicate,
            object=task.goal["object"],
            period=period,
            confidence=1.0,
            provenance="user-stated",
            source_turn=turn_index,
        )
        life_model.assert_knowledge(profile, entity, self.vocabulary, now=self.clock.now())
        session.events.append(
            {"kind": "knowledge", "turn": turn_index, "triple": list(entity.triple())}
        )
        self._complete_task(session, task, turn_index)
        return consumed

    def _complete_task(self, session: Session, task: ElicitationTask, turn_index: int) -> None:
        task.status = "completed"
        task.completed_at_turn = turn_index
        if session.open_task_id == task.task_id:
            session.open_task_id = None

    def _record_story(
        self,
        session: Session,
        profile: PersonProfile,
        memento: Memento | None,
        nlu: NluResult,
        text: str,
        turn_index: int,
        counters,
        consumed: set,
    ) -> list[LifeStory]:
        entity_ids: list[str] = []
        place = next((e for e in nlu.entities if e.kind == "place"), None)
        verb = next((RELATION_VERBS[t] for t in nlu.tokens if t in RELATION_VERBS), None)
        if place is not None and verb is not None:
            period = life_model.LifePeriod.unknown()
            time_entity = next((e for e in nlu.entities if e.kind == "time"), None)
            if time_entity is not None:
                period = period_from_text(time_entity.value)
                consumed.add((time_entity.kind, time_entity.value.casefold()))
            entity = KnowledgeEntity(
                id=profile.next_entity_id(),
                category="life-event",
                predicate=verb,
                object=place.value,
                period=period,
                provenance="user-stated",
                source_turn=turn_index,
            )
            life_model.assert_knowledge(profile, entity, self.vocabulary, now=self.clock.now())
            session.events.append(
                {"kind": "knowledge", "turn": turn_index, "triple": list(entity.triple())}
            )
            stored = next(e for e in profile.entities if e.triple() == entity.triple())
            entity_ids.append(stored.id)
            consumed.add((place.kind, place.value.casefold()))
        story = LifeStory(
            story_id=counters.allocate("story", "st"),
            session_id=session.session_id,
            text=text,
            memento_id=memento.memento_id if memento else None,
            entities_extracted=entity_ids,
        )
        session.events.append({"kind": "story", "turn": turn_index, "story_id": story.story_id})
        return [story]

    def _stash_loose_entities(
        self,
        session: Session,
        memento: Memento | None,
        nlu: NluResult,
        turn_index: int,
        consumed: set,
    ) -> None:
        """Entities answering questions nobody asked become unconfirmed tags."""
        if memento is None:
            return
        existing = {(t.slot, t.value.casefold()) for t in memento.tags}
        for entity in nlu.entities:
            if entity.kind not in SLOTS:
                continue
            key = (entity.kind, entity.value.casefold())
            if key in consumed or (entity.kind, entity.value.casefold()) in existing:
                continue
            attach_tag(
                memento,
                Tag(slot=entity.kind, value=entity.value, confirmed_by_user=False, source_turn=turn_index),
            )
            session.events.append(
                {"kind": "tag", "turn": turn_index, "memento_id": memento.memento_id,
                 "slot": entity.kind, "value": entity.value, "confirmed": False}
            )
            existing.add(key)

    def _update_recency(self, session: Session, nlu: NluResult) -> None:
        session.recent_entity_turns.append([[e.kind, e.value] for e in nlu.entities])
        window = self.config.recent_window
        session.recent_entity_turns = session.recent_entity_turns[-window:]

    def _refresh_similarity(self, changed: PersonProfile) -> dict | None:
        profiles = self._profiles()
        profiles[changed.person_id] = changed
        if len(profiles) < 2:
            return None
        doc = self.store.get("connections/similarity") or {"entries": {}}
        table = {
            key: connections.SimilarityEntry.from_doc(entry)
            for key, entry in doc["entries"].items()
        }
        connections.refresh_pairs(table, profiles, changed.person_id, self.clock.now())
        return {"entries": {key: entry.to_doc() for key, entry in sorted(table.items())}}

    # -- bot turn construction ----------------------------------------------

    def _latency(self, index: int) -> float:
        return 100.0 + 10.0 * (index % 5)

    def _append_greeting(self, session: Session, profile: PersonProfile) -> None:
        bindings = {"name": profile.display_name}
        template = self.templates.select({"kind": "action", "action": "greet"}, bindings)
        index = len(session.turns)
        text = render_question(template, bindings, session.session_id, index)
        plan = ActionPlan(kind="greet", rendered_text=text, question_id=template.question_id, bindings=bindings)
        self._append_bot_turn(session, plan)

    def _append_direct_action(self, session: Session, profile: PersonProfile, kind: str, extra: dict) -> None:
        """Engine-driven actions outside the rule system: clarify on empty
        input, goodbye text on farewell."""
        bindings = {"name": profile.display_name, **extra}
        template = self.templates.select({"kind": "action", "action": kind}, bindings)
        index = len(session.turns)
        text = render_question(template, bindings, session.session_id, index)
        plan = ActionPlan(kind=kind, rendered_text=text, question_id=template.question_id, bindings=bindings)
        self._append_bot_turn(session, plan)

    def _append_selected_action(
        self,
        session: Session,
        profile: PersonProfile,
        memento: Memento | None,
        macro: dict,
        counters,
        suggestions: dict,
    ) -> None:
        context = self.build_context(session, profile, memento, macro)
        selection = select_action(context, self.rules.rules)
        plan = self._realize(session, memento, selection, counters, suggestions, context)

        firing = session.rule_firings.setdefault(selection.rule.rule_id, {"last": None, "count": 0})
        firing["last"] = session.selection_count
        firing["count"] += 1
        session.selection_count += 1

        if plan.kind.startswith("elicit-"):
            session.recent_questions.append(plan.question_id)
            session.recent_questions = session.recent_questions[-self.config.recent_window:]
            if plan.question_id not in macro["asked_question_ids"]:
                macro["asked_question_ids"].append(plan.question_id)
            if session.active_memento:
                count = session.questions_on_memento.get(session.active_memento, 0)
                session.questions_on_memento[session.active_memento] = count + 1

        self._append_bot_turn(session, plan)

    def _realize(
        self,
        session: Session,
        memento: Memento | None,
        selection: Selection,
        counters,
        suggestions: dict,
        context: DialogContext,
    ) -> ActionPlan:
        rule = selection.rule
        bindings = dict(selection.bindings)
        index = len(session.turns)
        task: ElicitationTask | None = None

        if rule.action_kind == "elicit-slot":
            slot = rule.action_args["slot"]
            target = {"kind": "slot", "slot": slot}
            task = ElicitationTask(
                task_id=counters.allocate("task", "t"),
                goal={"kind": "slot", "memento_id": session.active_memento, "slot": slot},
                opened_at_turn=index,
            )
        elif rule.action_kind == "elicit-relation":
            predicate = rule.action_args.get("predicate", "visited")
            target = {"kind": "predicate", "predicate": predicate}
            object_binding = rule.action_args.get("object_binding")
            object_value = bindings[object_binding] if object_binding else rule.action_args["object"]
            bindings.setdefault("place", object_value)
            task = ElicitationTask(
                task_id=counters.allocate("task", "t"),
                goal={
                    "kind": "relation",
                    "object": object_value,
                    "candidates": rule.action_args.get("candidates", DEFAULT_RELATION_CANDIDATES),
                    "default_predicate": predicate,
                    "category": rule.action_args.get("category", "life-event"),
                },
                opened_at_turn=index,
            )
        else:
            target = {"kind": "action", "action": rule.action_kind}
            if rule.action_kind == "suggest-connection" and context.suggestion_candidate:
                candidate = context.suggestion_candidate
                pair = "|".join(sorted([session.person_id, candidate["person_id"]]))
                suggestions[pair] = to_iso(self.clock.now())
            if rule.action_kind == "bring-content" and context.content_candidate:
                brought = self.memento(context.content_candidate)
                session.active_memento = brought.memento_id
                session.baseline_slots.setdefault(
                    brought.memento_id, sorted(confirmed_slots(brought))
                )

        template = self.templates.select(target, bindings)
        text = render_question(template, bindings, session.session_id, index)
        if task is not None:
            session.tasks.append(task)
            session.open_task_id = task.task_id
        return ActionPlan(
            kind=rule.action_kind,
            rendered_text=text,
            question_id=template.question_id,
            bindings=bindings,
            task=task,
            rule_id=rule.rule_id,
        )

    def _append_bot_turn(self, session: Session, plan: ActionPlan) -> None:
        index = len(session.turns)
        session.turns.append(
            Turn(
                index=index,
                initiator="bot",
                text=plan.rendered_text,
                timestamp=to_iso(self.clock.advance()),
                action=plan,
                response_latency_ms=self._latency(index),
            )
        )

    # -- context --------------------------------------------------------------

    def build_context(
        self,
        session: Session,
        profile: PersonProfile,
        memento: Memento | None,
        macro: dict | None = None,
    ) -> DialogContext:
        macro = macro or self._macro(session.person_id)
        sentiments = session.user_sentiments()
        window = sentiments[-self.config.engagement_window:]
        cum = sum(sentiments) / len(sentiments) if sentiments else 0.0

        tags = confirmed_slots(memento) if memento else {}
        features = [f.label for f in memento.features] if memento else []
        unfilled = unfilled_slots(memento) if memento else []

        open_task = session.open_task()
        open_kind = "none" if open_task is None else open_task.goal["kind"]

        discussed = set(macro["discussed_mementos"])
        content_candidate = self._content_candidate(session, memento, discussed)
        suggestion_candidate = self._suggestion_candidate(session.person_id)

        ambient = {"name": profile.display_name}
        if memento and memento.top_feature():
            ambient["feature"] = memento.top_feature().label
        if "place" in tags:
            ambient["place"] = tags["place"]
        if suggestion_candidate:
            ambient["candidate-name"] = suggestion_candidate["display_name"]
            ambient["shared-interest"] = connections.shared_interest_text(
                suggestion_candidate["shared"]
            )
        if content_candidate:
            ambient["content-hint"] = self._content_hint(content_candidate)

        recent_entities = [
            (kind, value)
            for turn_entities in session.recent_entity_turns
            for kind, value in turn_entities
        ]

        return DialogContext(
            person_id=session.person_id,
            active_memento_id=session.active_memento,
            features=features,
            confirmed_tags=tags,
            unfilled_slots=unfilled,
            recent_questions=list(session.recent_questions),
            recent_entities=recent_entities,
            engagement_window=window,
            engagement_cum=cum,
            user_turn_count=len(sentiments),
            questions_on_memento=session.questions_on_memento.get(session.active_memento or "", 0),
            # objects keep their stored casing so rule bindings render naturally;
            # condition matching itself is case-insensitive
            knowledge={
                (e.category, e.predicate, e.object)
                for e in profile.entities
                if e.confidence >= life_model.KNOWS_CONFIDENCE_THRESHOLD
            },
            sessions_count=macro["sessions_count"],
            discussed_mementos=discussed,
            asked_question_ids=set(macro["asked_question_ids"]),
            open_task_kind=open_kind,
            content_candidate=content_candidate,
            suggestion_candidate=suggestion_candidate,
            ambient_bindings=ambient,
            rule_firings={k: dict(v) for k, v in session.rule_firings.items()},
            selection_index=session.selection_count,
            pivot_threshold=self.config.pivot_threshold,
            question_cap=self.config.question_cap,
        )

    def _content_candidate(
        self, session: Session, memento: Memento | None, discussed: set[str]
    ) -> str | None:
        """Top public memento by tag/feature overlap with the immediate context."""
        context_terms = set()
        if memento is not None:
            context_terms.update(f.label.casefold() for f in memento.features)
            context_terms.update(t.value.casefold() for t in memento.tags)
        for turn_entities in session.recent_entity_turns:
            context_terms.update(value.casefold() for _, value in turn_entities)

        best: tuple[int, str] | None = None
        for path in self.store.list("mementos"):
            doc = self.store.get(path)
            if doc["visibility"] != "public":
                continue
            if doc["memento_id"] == session.active_memento or doc["memento_id"] in discussed:
                continue
            terms = {f["label"].casefold() for f in doc["features"]}
            terms.update(t["value"].casefold() for t in doc["tags"])
            score = len(terms & context_terms)
            key = (-score, doc["memento_id"])
            if best is None or key < best:
                best = key
        return best[1] if best else None

    def _content_hint(self, memento_id: str) -> str:
        doc = self.store.get(f"mementos/{memento_id}")
        for tag in doc["tags"]:
            if tag["confirmed_by_user"]:
                return tag["value"]
        if doc["features"]:
            return doc["features"][0]["label"]
        return "another memory"

    def _suggestion_candidate(self, person_id: str) -> dict | None:
        profiles = self._profiles()
        if person_id not in profiles or len(profiles) < 2:
            return None
        ranked = connections.suggest_connection(
            profiles,
            person_id,
            limit=1,
            min_score=self.config.suggestion_min_score,
            suggested_at=self._suggested_pairs(),
            refractory_days=self.config.suggestion_refractory_days,
            now=self.clock.now(),
        )
        return ranked[0] if ranked else None

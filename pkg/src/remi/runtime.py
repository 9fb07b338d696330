"""Wires the stores, NLU, rule/template databases and engine together; the
single code path behind both the CLI and the chat service."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import connections, life_model, metrics
from .clock import SimClock, WallClock, to_iso
from .config import EngineConfig
from .engine.engine import DialogEngine, UnknownPersonError
from .engine.rules import RuleDatabase
from .engine.session import Session, Turn
from .engine.templates import TemplateDatabase
from .life_model import KnowledgeEntity, LifePeriod, PersonProfile
from .mementos import DetectedFeature, Memento, make_memento
from .nlu import AdapterDescriptor, AdapterUnavailable, analyze_image, make_language_adapter
from .nlu.baseline import NluBaseline
from .nlu.lexicons import LexiconSet
from .storage import DocumentStore


class SeedError(ValueError):
    pass


@dataclass
class Divergence:
    turn_index: int
    recorded: str
    replayed: str


def _demo_path(name: str) -> Path:
    return Path(str(resources.files("remi").joinpath(f"data/demo/{name}")))


class Runtime:
    def __init__(
        self,
        data_dir: str | Path,
        config: EngineConfig | None = None,
        wall_clock: bool = False,
        offline: bool = False,
    ):
        self.data_dir = Path(data_dir)
        self.config = config or EngineConfig()
        self.store = DocumentStore(self.data_dir)

        lexicons = LexiconSet.load(self.config.lexicon_overrides or None)
        self.baseline = NluBaseline(
            lexicons,
            story_token_threshold=self.config.story_token_threshold,
            negation_window=self.config.negation_window,
        )
        language_descriptor = None
        self.vision_descriptor = None
        if not offline:
            if self.config.language_adapter:
                language_descriptor = AdapterDescriptor(**self.config.language_adapter)
            if self.config.vision_adapter:
                self.vision_descriptor = AdapterDescriptor(**self.config.vision_adapter)
        language = make_language_adapter(language_descriptor, self.baseline)

        rules_path = self._resolve_db_path(self.config.rules_path, "rules.json")
        templates_path = self._resolve_db_path(self.config.templates_path, "templates.json")
        self.rules = RuleDatabase.load(rules_path)
        self.templates = TemplateDatabase.load(templates_path)

        clock = WallClock() if wall_clock else None
        self.engine = DialogEngine(
            store=self.store,
            rules=self.rules,
            templates=self.templates,
            language=language,
            config=self.config,
            clock=clock,
        )

    def _resolve_db_path(self, configured: str | None, name: str) -> Path:
        if configured:
            return Path(configured)
        local = self.data_dir / name
        if local.exists():
            return local
        return _demo_path(name)

    @property
    def clock(self):
        return self.engine.clock

    # -- seeding -----------------------------------------------------------

    def seed(
        self,
        profiles_path: str | Path | None = None,
        mementos_path: str | Path | None = None,
        rules_path: str | Path | None = None,
        templates_path: str | Path | None = None,
    ) -> dict:
        """Load fixture databases; re-seeding identical content is a no-op."""
        summary = {"profiles": 0, "mementos": 0, "rules": 0, "templates": 0}
        ops: list[tuple[str, dict]] = []

        if profiles_path is not None:
            for record in self._parse_list(profiles_path):
                doc = self._build_profile_doc(record, profiles_path)
                if self.store.get(f"profiles/{doc['person_id']}") != doc:
                    ops.append((f"profiles/{doc['person_id']}", doc))
                summary["profiles"] += 1
        if mementos_path is not None:
            for record in self._parse_list(mementos_path):
                doc = self._build_memento_doc(record, mementos_path)
                if self.store.get(f"mementos/{doc['memento_id']}") != doc:
                    ops.append((f"mementos/{doc['memento_id']}", doc))
                summary["mementos"] += 1
        if ops:
            self.store.apply(ops)

        if rules_path is not None:
            fresh = RuleDatabase.load(rules_path)  # validates before install
            target = self.data_dir / "rules.json"
            target.write_text(Path(rules_path).read_text(encoding="utf-8"), encoding="utf-8")
            self.rules.path = target
            self.rules.rules = fresh.rules
            self.rules._mtime = target.stat().st_mtime_ns
            summary["rules"] = len(fresh.rules)
        if templates_path is not None:
            fresh = TemplateDatabase.load(templates_path)
            target = self.data_dir / "templates.json"
            target.write_text(Path(templates_path).read_text(encoding="utf-8"), encoding="utf-8")
            self.templates.path = target
            self.templates.templates = fresh.templates
            self.templates._mtime = target.stat().st_mtime_ns
            summary["templates"] = len(fresh.templates)

        if len(self._profiles()) >= 2:
            self._rebuild_similarity()
        return summary

    def seed_demo(self) -> dict:
        return self.seed(
            profiles_path=_demo_path("profiles.json"),
            mementos_path=_demo_path("mementos.json"),
            rules_path=_demo_path("rules.json"),
            templates_path=_demo_path("templates.json"),
        )

    def _parse_list(self, path: str | Path) -> list[dict]:
        try:
            records = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SeedError(f"{Path(path).name}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
        if not isinstance(records, list):
            raise SeedError(f"{Path(path).name}: expected a top-level list")
        return records

    def _build_profile_doc(self, record: dict, path) -> dict:
        try:
            person_id = record["person_id"]
            display_name = record["display_name"]
            entity_records = record.get("entities", [])
        except KeyError as exc:
            raise SeedError(f"{Path(path).name}: profile record missing field {exc}")
        existing = self.store.get(f"profiles/{person_id}")
        stamp = existing["created_at"] if existing else None
        profile = life_model.new_profile(person_id, display_name, self.clock.now())
        if stamp:
            profile.created_at = stamp
            profile.updated_at = existing["updated_at"]
        for i, e in enumerate(entity_records):
            try:
                entity = KnowledgeEntity(
                    id=e.get("id") or profile.next_entity_id(),
                    category=e["category"],
                    predicate=e["predicate"],
                    object=e["object"],
                    period=LifePeriod.from_doc(e["period"]) if e.get("period") else LifePeriod.unknown(),
                    confidence=e.get("confidence", 1.0),
                    provenance=e.get("provenance", "seeded"),
                )
            except KeyError as exc:
                raise SeedError(f"{Path(path).name}: {person_id} entity {i}: missing field {exc}")
            life_model.assert_knowledge(profile, entity)
        return profile.to_doc()

    def _build_memento_doc(self, record: dict, path) -> dict:
        try:
            features = [
                DetectedFeature(label=f["label"], salience=f["salience"], source=f.get("source", "fixture"))
                for f in record.get("features", [])
            ]
            memento = make_memento(
                memento_id=record.get("memento_id") or self.store.counters().allocate("memento", "m"),
                owner=record["owner"],
                media_kind=record["media_kind"],
                uri_or_path=record["uri_or_path"],
                visibility=record.get("visibility", "private"),
                features=features,
                now=self.clock.now(),
            )
        except KeyError as exc:
            raise SeedError(f"{Path(path).name}: memento record missing field {exc}")
        existing = self.store.get(f"mementos/{memento.memento_id}")
        doc = memento.to_doc()
        if existing:
            doc["created_at"] = existing["created_at"]
            doc["tags"] = existing["tags"]
        return doc

    # -- mementos ------------------------------------------------------------

    def register_memento(
        self,
        owner: str,
        media_kind: str,
        uri: str,
        visibility: str = "private",
        feature_fixture: str | Path | None = None,
    ) -> tuple[Memento, bool]:
        """Returns (memento, adapter_unavailable_flag)."""
        if not self.store.exists(f"profiles/{owner}"):
            raise UnknownPersonError(owner)
        flagged = False
        features: list[DetectedFeature] = []
        try:
            if self.vision_descriptor is not None and feature_fixture is None:
                features = analyze_image(uri, self.vision_descriptor)
            elif feature_fixture is not None:
                features = analyze_image(feature_fixture)
            else:
                flagged = True  # no fixture and no adapter: nothing to detect with
        except AdapterUnavailable:
            features, flagged = [], True
        counters = self.store.counters()
        memento = make_memento(
            memento_id=counters.allocate("memento", "m"),
            owner=owner,
            media_kind=media_kind,
            uri_or_path=uri,
            visibility=visibility,
            features=features,
            now=self.clock.now(),
        )
        self.store.apply(
            [
                (f"mementos/{memento.memento_id}", memento.to_doc()),
                ("meta/counters", counters.doc()),
            ]
        )
        return memento, flagged

    # -- conversation ----------------------------------------------------------

    def start_session(self, person_id: str, memento_id: str | None = None) -> Session:
        return self.engine.start_session(person_id, memento_id)

    def process_user_turn(self, session_id: str, text: str) -> tuple[Session, list[Turn]]:
        return self.engine.process_user_turn(session_id, text)

    def close_session(self, session_id: str, rating: int | None = None):
        return self.engine.close_session(session_id, rating)

    # -- reads -------------------------------------------------------------------

    def _profiles(self) -> dict[str, PersonProfile]:
        out = {}
        for path in self.store.list("profiles"):
            doc = self.store.get(path)
            out[doc["person_id"]] = PersonProfile.from_doc(doc)
        return out

    def get_metrics(self, session_id: str) -> dict:
        report = self.store.get(f"reports/{session_id}")
        if report is not None:
            return report
        session = self.engine.session(session_id)  # raises for unknown ids
        return metrics.compute_report(session, markers=self.baseline.detect_social_markers).to_doc()

    def suggestions(self, person_id: str, limit: int | None = None) -> list[dict]:
        profiles = self._profiles()
        if person_id not in profiles:
            raise UnknownPersonError(person_id)
        return connections.suggest_connection(
            profiles,
            person_id,
            limit=limit or self.config.suggestion_limit,
            min_score=self.config.suggestion_min_score,
            suggested_at=dict((self.store.get("connections/suggestions") or {}).get("pairs", {})),
            refractory_days=self.config.suggestion_refractory_days,
            now=self.clock.now(),
        )

    def corpus_report(self) -> dict:
        """Means and min/max distributions over every closed session's report."""
        reports = [self.store.get(path) for path in self.store.list("reports")]
        if not reports:
            return {"sessions": 0, "means": {}, "distributions": {}}
        numeric = [
            "turns_total", "user_turns", "duration_minutes", "cumulative_avg_sentiment",
            "completion_rate", "mean_completion_turns", "consistency", "memory_violations",
            "mean_response_ms", "proactivity",
        ]
        means = {key: sum(r[key] for r in reports) / len(reports) for key in numeric}
        distributions = {
            key: {"min": min(r[key] for r in reports), "max": max(r[key] for r in reports)}
            for key in numeric
        }
        return {"sessions": len(reports), "means": means, "distributions": distributions}

    def cluster_report(self, k: int) -> dict:
        """Compute k-medoids clusters over the population and persist the report."""
        clusters = connections.cluster(self._profiles(), k)
        doc = {
            "k": k,
            "computed_at": to_iso(self.clock.now()),
            "clusters": [c.to_doc() for c in clusters],
        }
        self.store.apply([("connections/clusters", doc)])
        return doc

    def _rebuild_similarity(self) -> None:
        profiles = self._profiles()
        table = connections.similarity_table(profiles, self.clock.now())
        self.store.apply(
            [("connections/similarity", {"entries": {k: v.to_doc() for k, v in sorted(table.items())}})]
        )

    # -- transcripts ----------------------------------------------------------------

    def export_transcript(self, session_id: str) -> str:
        """Header line with session provenance, then one turn per line."""
        session = self.engine.session(session_id)
        header = {
            "session_id": session.session_id,
            "person_id": session.person_id,
            "memento_id": session.turns and self._first_memento(session) or None,
        }
        lines = [json.dumps(header, ensure_ascii=False, sort_keys=True)]
        lines.extend(
            json.dumps(turn.to_doc(), ensure_ascii=False, sort_keys=True) for turn in session.turns
        )
        return "\n".join(lines) + "\n"

    def _first_memento(self, session: Session) -> str | None:
        for task in session.tasks:
            if task.goal["kind"] == "slot":
                return task.goal["memento_id"]
        return session.active_memento

    def replay_transcript(self, text: str) -> tuple[str, dict, list[Divergence]]:
        """Feed recorded user turns through the live engine; report divergence
        from the recorded bot turns and the replayed session's metrics."""
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise SeedError("empty transcript")
        try:
            header = json.loads(lines[0])
            turns = [json.loads(line) for line in lines[1:]]
        except json.JSONDecodeError as exc:
            raise SeedError(f"transcript: line {exc.lineno}: {exc.msg}")

        session = self.start_session(header["person_id"], header.get("memento_id"))
        recorded_bot = [t for t in turns if t["initiator"] == "bot"]
        for turn in turns:
            if turn["initiator"] == "user":
                self.process_user_turn(session.session_id, turn["text"])
        session, report = self.close_session(session.session_id)

        replayed_bot = [t for t in session.turns if t.initiator == "bot"]
        divergences = []
        for i, recorded in enumerate(recorded_bot):
            replayed_text = replayed_bot[i].text if i < len(replayed_bot) else "<missing>"
            if recorded["text"] != replayed_text:
                divergences.append(
                    Divergence(turn_index=recorded["index"], recorded=recorded["text"], replayed=replayed_text)
                )
        for extra in replayed_bot[len(recorded_bot):]:
            divergences.append(Divergence(turn_index=extra.index, recorded="<missing>", replayed=extra.text))
        return session.session_id, report.to_doc(), divergences

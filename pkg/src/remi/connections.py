"""User similarity, clustering, and companion suggestions.

Similarity is a weighted Jaccard over (category, predicate, normalized
object) knowledge triples: value-category matches count double, preferences
one and a half, incidental relationships half. Clustering is k-medoids over
1 - similarity, since profiles live in a non-vector similarity space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clock import to_iso
from .life_model import PersonProfile

CATEGORY_WEIGHTS = {
    "value": 2.0,
    "preference": 1.5,
    "life-event": 1.0,
    "habit-skill": 1.0,
    "relationship": 0.5,
}

DEFAULT_MIN_SCORE = 0.2
DEFAULT_REFRACTORY_DAYS = 30
MAX_CLUSTER_ROUNDS = 100


class ConnectionsError(ValueError):
    pass


def _triples(profile: PersonProfile) -> set[tuple[str, str, str]]:
    return {e.triple() for e in profile.entities}


def _weight(triple: tuple[str, str, str]) -> float:
    return CATEGORY_WEIGHTS[triple[0]]


@dataclass
class SimilarityEntry:
    pair: tuple[str, str]  # canonically ordered person ids
    score: float
    contributing_entities: list[tuple[str, str, str]] = field(default_factory=list)
    computed_at: str = ""

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ConnectionsError(f"similarity score out of range: {self.score}")
        self.pair = tuple(sorted(self.pair))

    def to_doc(self) -> dict:
        return {
            "pair": list(self.pair),
            "score": self.score,
            "contributing_entities": [list(t) for t in self.contributing_entities],
            "computed_at": self.computed_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SimilarityEntry":
        return cls(
            pair=tuple(doc["pair"]),
            score=doc["score"],
            contributing_entities=[tuple(t) for t in doc["contributing_entities"]],
            computed_at=doc.get("computed_at", ""),
        )


@dataclass
class Cluster:
    cluster_id: str
    members: list[str]
    medoid: str

    def __post_init__(self):
        if self.medoid not in self.members:
            raise ConnectionsError("cluster medoid must be one of its members")

    def to_doc(self) -> dict:
        return {"cluster_id": self.cluster_id, "members": sorted(self.members), "medoid": self.medoid}


# ---------------------------------------------------------------------------
# operations


def similarity(a: PersonProfile, b: PersonProfile, now: int = 0) -> SimilarityEntry:
    ta, tb = _triples(a), _triples(b)
    union = ta | tb
    shared = ta & tb
    if not union:
        score = 0.0
    else:
        score = sum(_weight(t) for t in shared) / sum(_weight(t) for t in union)
    return SimilarityEntry(
        pair=(a.person_id, b.person_id),
        score=score,
        contributing_entities=sorted(shared),
        computed_at=to_iso(now) if now else "",
    )


def similarity_table(profiles: dict[str, PersonProfile], now: int = 0) -> dict[str, SimilarityEntry]:
    """All-pairs table keyed 'a|b' with a < b."""
    table: dict[str, SimilarityEntry] = {}
    ids = sorted(profiles)
    for i, left in enumerate(ids):
        for right in ids[i + 1 :]:
            entry = similarity(profiles[left], profiles[right], now)
            table[f"{left}|{right}"] = entry
    return table


def refresh_pairs(
    table: dict[str, SimilarityEntry],
    profiles: dict[str, PersonProfile],
    person_id: str,
    now: int,
) -> list[SimilarityEntry]:
    """Recompute every pair involving ``person_id`` after a profile write."""
    if person_id not in profiles:
        raise ConnectionsError(f"unknown person: {person_id!r}")
    refreshed = []
    for other in sorted(profiles):
        if other == person_id:
            continue
        entry = similarity(profiles[person_id], profiles[other], now)
        table["|".join(entry.pair)] = entry
        refreshed.append(entry)
    return refreshed


def cluster(profiles: dict[str, PersonProfile], k: int) -> list[Cluster]:
    """K-medoids over 1 - similarity; deterministic initialization (the k
    lexicographically smallest ids) and id tie-breaks throughout."""
    ids = sorted(profiles)
    if not 1 <= k <= len(ids):
        raise ConnectionsError(f"invalid cluster count: k={k} for {len(ids)} profiles")

    distance: dict[tuple[str, str], float] = {}
    for i, left in enumerate(ids):
        distance[(left, left)] = 0.0
        for right in ids[i + 1 :]:
            d = 1.0 - similarity(profiles[left], profiles[right]).score
            distance[(left, right)] = d
            distance[(right, left)] = d

    medoids = ids[:k]
    for _ in range(MAX_CLUSTER_ROUNDS):
        assignment: dict[str, list[str]] = {m: [] for m in medoids}
        for pid in ids:
            best = min(medoids, key=lambda m: (distance[(pid, m)], m))
            assignment[best].append(pid)
        new_medoids = []
        for medoid in medoids:
            members = assignment[medoid]
            best_member = min(
                members,
                key=lambda cand: (sum(distance[(cand, o)] for o in members), cand),
            )
            new_medoids.append(best_member)
        new_medoids.sort()
        if new_medoids == sorted(medoids):
            break
        medoids = new_medoids

    assignment = {m: [] for m in sorted(medoids)}
    for pid in ids:
        best = min(sorted(medoids), key=lambda m: (distance[(pid, m)], m))
        assignment[best].append(pid)
    return [
        Cluster(cluster_id=f"c-{i + 1:02d}", members=sorted(members), medoid=medoid)
        for i, (medoid, members) in enumerate(sorted(assignment.items()))
    ]


def suggest_connection(
    profiles: dict[str, PersonProfile],
    person_id: str,
    limit: int = 3,
    min_score: float = DEFAULT_MIN_SCORE,
    suggested_at: dict[str, str] | None = None,
    refractory_days: int = DEFAULT_REFRACTORY_DAYS,
    now: int = 0,
) -> list[dict]:
    """Top candidates by similarity, skipping sub-threshold scores and pairs
    already suggested within the refractory window."""
    if person_id not in profiles:
        raise ConnectionsError(f"unknown person: {person_id!r}")
    suggested_at = suggested_at or {}
    window_seconds = refractory_days * 86400

    ranked = []
    for other in sorted(profiles):
        if other == person_id:
            continue
        entry = similarity(profiles[person_id], profiles[other], now)
        if entry.score < min_score:
            continue
        key = "|".join(entry.pair)
        last = suggested_at.get(key)
        if last is not None:
            from .clock import from_iso

            if now - from_iso(last) < window_seconds:
                continue
        ranked.append(
            {
                "person_id": other,
                "display_name": profiles[other].display_name,
                "score": entry.score,
                "shared": [list(t) for t in entry.contributing_entities],
            }
        )
    ranked.sort(key=lambda row: (-row["score"], row["person_id"]))
    return ranked[:limit]


def shared_interest_text(shared: list) -> str:
    """Human phrasing of the strongest shared triple, e.g. 'likes jazz'."""
    if not shared:
        return "similar memories"
    ordered = sorted(shared, key=lambda t: (-CATEGORY_WEIGHTS[t[0]], t[1], t[2]))
    _, predicate, obj = ordered[0]
    return f"{predicate.replace('-', ' ')} {obj}"

"""Adapter contracts for vision and language services.

The offline baseline never touches the network; external adapters normalize
service replies into the same shapes the engine consumes, so engine code never
branches on adapter identity. A module-level call counter backs the
zero-network assertion in offline mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import httpx

from ..mementos import DetectedFeature
from .baseline import Entity, NluBaseline, NluResult

NETWORK_CALLS = 0


def reset_network_call_counter() -> None:
    global NETWORK_CALLS
    NETWORK_CALLS = 0


def _count_network_call() -> None:
    global NETWORK_CALLS
    NETWORK_CALLS += 1


class AdapterUnavailable(Exception):
    """External service could not be reached within its timeout."""


class AdapterError(ValueError):
    pass


@dataclass
class AdapterDescriptor:
    name: str
    kind: str  # vision | language
    mode: str = "offline-baseline"  # offline-baseline | external
    endpoint: str | None = None
    timeout_ms: int = 2000

    def __post_init__(self):
        if self.kind not in ("vision", "language"):
            raise AdapterError(f"unknown adapter kind: {self.kind!r}")
        if self.mode not in ("offline-baseline", "external"):
            raise AdapterError(f"unknown adapter mode: {self.mode!r}")
        if self.mode == "external" and not self.endpoint:
            raise AdapterError(f"adapter {self.name!r}: external mode requires an endpoint")


# ---------------------------------------------------------------------------
# vision


def load_feature_fixture(path: str | Path) -> list[DetectedFeature]:
    """Read a feature fixture file verbatim (list of {label, salience})."""
    fixture = Path(path)
    if not fixture.exists():
        raise AdapterError(f"feature fixture not found: {fixture}")
    items = json.loads(fixture.read_text(encoding="utf-8"))
    return [
        DetectedFeature(label=item["label"], salience=item["salience"], source="fixture")
        for item in items
    ]


def normalize_external_features(items: list[dict], source: str) -> list[DetectedFeature]:
    """Map an external reply into features with salience clamped to [0, 1]."""
    features = []
    for item in items:
        salience = float(item.get("salience", item.get("score", 0.0)))
        salience = max(0.0, min(1.0, salience))
        features.append(DetectedFeature(label=item["label"], salience=salience, source=source))
    return features


class ExternalVisionAdapter:
    def __init__(self, descriptor: AdapterDescriptor):
        if descriptor.kind != "vision":
            raise AdapterError("descriptor is not a vision adapter")
        self.descriptor = descriptor

    def analyze_image(self, media_uri: str) -> list[DetectedFeature]:
        _count_network_call()
        try:
            reply = httpx.post(
                self.descriptor.endpoint,
                json={"media_uri": media_uri},
                timeout=self.descriptor.timeout_ms / 1000.0,
            )
            reply.raise_for_status()
        except httpx.HTTPError as exc:
            raise AdapterUnavailable(f"{self.descriptor.name}: {exc}") from exc
        return normalize_external_features(reply.json().get("features", []), self.descriptor.name)


def analyze_image(
    feature_source: str | Path | None,
    descriptor: AdapterDescriptor | None = None,
) -> list[DetectedFeature]:
    """Offline mode reads a fixture; external mode queries the service."""
    if descriptor is not None and descriptor.mode == "external":
        return ExternalVisionAdapter(descriptor).analyze_image(str(feature_source))
    if feature_source is None:
        return []
    return load_feature_fixture(feature_source)


# ---------------------------------------------------------------------------
# language


class ExternalLanguageAdapter:
    def __init__(self, descriptor: AdapterDescriptor):
        if descriptor.kind != "language":
            raise AdapterError("descriptor is not a language adapter")
        self.descriptor = descriptor

    def analyze_text(self, text: str, expected_slot: str | None = None) -> NluResult:
        _count_network_call()
        try:
            reply = httpx.post(
                self.descriptor.endpoint,
                json={"text": text, "expected_slot": expected_slot},
                timeout=self.descriptor.timeout_ms / 1000.0,
            )
            reply.raise_for_status()
        except httpx.HTTPError as exc:
            raise AdapterUnavailable(f"{self.descriptor.name}: {exc}") from exc
        return normalize_language_reply(reply.json(), text)


def normalize_language_reply(doc: dict, original_text: str) -> NluResult:
    """Coerce an external reply into NluResult; drops entities whose value is
    not a literal span of the input."""
    entities = []
    for item in doc.get("entities", []):
        value = item["value"]
        start = original_text.find(value)
        if start < 0:
            continue
        entities.append(Entity(kind=item["kind"], value=value, span=(start, start + len(value))))
    sentiment = max(-1.0, min(1.0, float(doc.get("sentiment", 0.0))))
    return NluResult(
        intent=doc.get("intent", "off-topic"),
        entities=entities,
        sentiment=sentiment,
        tokens=list(doc.get("tokens", [])),
    )


def make_language_adapter(descriptor: AdapterDescriptor | None, baseline: NluBaseline):
    if descriptor is not None and descriptor.mode == "external":
        return ExternalLanguageAdapter(descriptor)
    return baseline

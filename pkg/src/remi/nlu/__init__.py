from .adapters import (
    AdapterDescriptor,
    AdapterError,
    AdapterUnavailable,
    analyze_image,
    load_feature_fixture,
    make_language_adapter,
    normalize_external_features,
    reset_network_call_counter,
)
from .baseline import Entity, NluBaseline, NluResult, tokenize
from .lexicons import LexiconSet, default_lexicons

__all__ = [
    "AdapterDescriptor",
    "AdapterError",
    "AdapterUnavailable",
    "Entity",
    "LexiconSet",
    "NluBaseline",
    "NluResult",
    "analyze_image",
    "default_lexicons",
    "load_feature_fixture",
    "make_language_adapter",
    "normalize_external_features",
    "reset_network_call_counter",
    "tokenize",
]

"""Published JSON schemas and payload validation.

Every JSON document the CLI emits carries a ``schema`` identifier and
validates against the corresponding file shipped under ``schemas/``.
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

SCHEMA_NAMES = (
    "explanation",
    "stability",
    "scan",
    "optimization",
    "manifest",
    "polynomial_model",
)


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}; known: {SCHEMA_NAMES}")
    path = resources.files("stablelime").joinpath("schemas", f"{name}.schema.json")
    return json.loads(path.read_text(encoding="utf-8"))


@lru_cache(maxsize=None)
def _registry() -> Registry:
    resources_ = [
        (load_schema(name)["$id"], Resource.from_contents(load_schema(name)))
        for name in SCHEMA_NAMES
    ]
    return Registry().with_resources(resources_)


def validate_payload(name: str, payload: dict) -> None:
    """Raise jsonschema.ValidationError when payload breaks the schema."""
    validator = Draft202012Validator(load_schema(name), registry=_registry())
    validator.validate(payload)


def is_valid(name: str, payload: dict) -> bool:
    try:
        validate_payload(name, payload)
        return True
    except jsonschema.ValidationError:
        return False

"""Named model catalog shipped with the package (see catalog.txt)."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..errors import UnknownModel
from .models import ModelSpec, parse_models


@lru_cache(maxsize=1)
def _load() -> tuple[ModelSpec, ...]:
    text = resources.files(__package__).joinpath("catalog.txt").read_text(encoding="utf-8")
    return tuple(parse_models(text))


def catalog(family: str | None = None) -> list[ModelSpec]:
    specs = _load()
    return [s for s in specs if family is None or s.family == family]


def catalog_names() -> list[str]:
    return [s.name for s in _load()]


def get_model(name: str) -> ModelSpec:
    for spec in _load():
        if spec.name == name:
            return spec
    raise UnknownModel(name, catalog_names())

"""Phrase lexicons used to decompose referring expressions.

Lexicon files are plain UTF-8 text, one phrase per line; blank lines and
lines starting with ``#`` are ignored. Phrases are normalized to lowercase
and matching always prefers longer phrases over their substrings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


def _normalize(phrase: str) -> str:
    return " ".join(phrase.lower().split())


def _read_phrase_file(path: Path) -> list[str]:
    phrases = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            phrases.append(_normalize(line))
    return phrases


def _sort_longest_first(phrases: list[str]) -> tuple[str, ...]:
    # Longer token sequences before shorter ones, ties alphabetical, so
    # "road marking" is tried before "road".
    unique = sorted(set(phrases), key=lambda p: (-len(p.split()), p))
    return tuple(unique)


@dataclass(frozen=True)
class CategoryLexicon:
    """Ordered ground-object category phrases with optional aliases."""

    categories: tuple[str, ...]
    aliases: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        cats = _sort_longest_first([c for c in self.categories if c.strip()])
        if not cats:
            raise ValueError("category lexicon is empty")
        object.__setattr__(self, "categories", cats)
        object.__setattr__(
            self,
            "aliases",
            {_normalize(k): _normalize(v) for k, v in self.aliases.items()},
        )

    @property
    def phrases(self) -> tuple[str, ...]:
        return _sort_longest_first(list(self.categories) + list(self.aliases))

    def canonical(self, phrase: str) -> str:
        phrase = _normalize(phrase)
        return self.aliases.get(phrase, phrase)

    @classmethod
    def from_file(cls, path: str | Path) -> "CategoryLexicon":
        return cls(categories=tuple(_read_phrase_file(Path(path))))


@dataclass(frozen=True)
class SpatialLexicon:
    """Ordered spatial-relation phrases ("on the left of", "near", ...)."""

    relation_phrases: tuple[str, ...]

    def __post_init__(self):
        phrases = _sort_longest_first([p for p in self.relation_phrases if p.strip()])
        if not phrases:
            raise ValueError("spatial lexicon is empty")
        object.__setattr__(self, "relation_phrases", phrases)

    @property
    def phrases(self) -> tuple[str, ...]:
        return self.relation_phrases

    @classmethod
    def from_file(cls, path: str | Path) -> "SpatialLexicon":
        return cls(relation_phrases=tuple(_read_phrase_file(Path(path))))


def _bundled(name: str) -> Path:
    return Path(str(resources.files("fianet.lexicons") / name))


def default_spatial_lexicon() -> SpatialLexicon:
    return SpatialLexicon.from_file(_bundled("spatial_default.txt"))


def refsegrs_category_lexicon() -> CategoryLexicon:
    return CategoryLexicon.from_file(_bundled("categories_refsegrs.txt"))


def synthetic_category_lexicon() -> CategoryLexicon:
    return CategoryLexicon.from_file(_bundled("categories_synthetic.txt"))

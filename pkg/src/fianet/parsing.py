"""Offline decomposition of referring expressions.

Every expression is kept verbatim as the *context* fragment and additionally
split into a *ground object* fragment (longest leftmost category-lexicon hit)
and a *spatial position* fragment (longest leftmost spatial-lexicon hit).
Parsing is deterministic and lexicon-driven so it can run once, offline,
before training or inference.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyExpression
from .lexicon import CategoryLexicon, SpatialLexicon

log = logging.getLogger(__name__)

_TERMINAL_PUNCT = ".,!?;:"


@dataclass(frozen=True)
class DecomposedExpression:
    """(context, ground object, spatial position) text triple."""

    context: str
    ground_object: str
    spatial_position: str


def _match_text(expression: str) -> str:
    return expression.lower().rstrip().rstrip(_TERMINAL_PUNCT)


def _token_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in re.finditer(r"\S+", text)]


def _find_leftmost_longest(
    text: str, spans: list[tuple[int, int]], phrases: tuple[str, ...]
) -> tuple[int, int] | None:
    """Token span (start, end) of the best phrase hit, or None.

    Leftmost start wins; at equal start the longer phrase wins (`phrases`
    is pre-sorted longest-first by the lexicons).
    """
    tokens = [text[a:b] for a, b in spans]
    phrase_tokens = [p.split() for p in phrases]
    for start in range(len(tokens)):
        for ptoks in phrase_tokens:
            end = start + len(ptoks)
            if end <= len(tokens) and tokens[start:end] == ptoks:
                return start, end
    return None


def decompose(
    expression: str,
    cat_lex: CategoryLexicon,
    spa_lex: SpatialLexicon,
) -> DecomposedExpression:
    """Split one expression into context / ground-object / spatial fragments.

    Raises EmptyExpression on blank input. When no category matches, the
    ground object falls back to the last token outside the spatial fragment;
    when no spatial phrase matches, the spatial fragment is empty.
    """
    if not expression.strip():
        raise EmptyExpression("referring expression is blank")

    text = _match_text(expression)
    spans = _token_spans(text)

    spatial = ""
    spa_hit = _find_leftmost_longest(text, spans, spa_lex.phrases)
    if spa_hit is not None:
        spatial = text[spans[spa_hit[0]][0] : spans[spa_hit[1] - 1][1]]

    cat_hit = _find_leftmost_longest(text, spans, cat_lex.phrases)
    if cat_hit is not None:
        ground = text[spans[cat_hit[0]][0] : spans[cat_hit[1] - 1][1]]
    else:
        # Fallback: last token that is not part of the spatial fragment.
        candidates = list(range(len(spans)))
        if spa_hit is not None:
            candidates = [i for i in candidates if not spa_hit[0] <= i < spa_hit[1]]
        if candidates:
            a, b = spans[candidates[-1]]
            ground = text[a:b]
        else:
            ground = text

    return DecomposedExpression(
        context=expression, ground_object=ground, spatial_position=spatial
    )


def decompose_corpus(
    jsonl_path: str | Path,
    cat_lex: CategoryLexicon,
    spa_lex: SpatialLexicon,
    output_path: str | Path,
) -> dict[str, int]:
    """Annotate a JSONL corpus with ground_object / spatial_position fields.

    Malformed records (bad JSON, missing or blank expression) are skipped
    with a warning. Returns {"written": n, "skipped": m}; re-running on the
    same input produces byte-identical output.
    """
    jsonl_path = Path(jsonl_path)
    output_path = Path(output_path)
    written = skipped = 0
    out_lines = []
    for lineno, line in enumerate(
        jsonl_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            dec = decompose(str(record["expression"]), cat_lex, spa_lex)
        except (json.JSONDecodeError, KeyError, ValueError, EmptyExpression) as exc:
            log.warning("%s:%d: skipping record (%s)", jsonl_path, lineno, exc)
            skipped += 1
            continue
        record["ground_object"] = dec.ground_object
        record["spatial_position"] = dec.spatial_position
        out_lines.append(json.dumps(record, ensure_ascii=False))
        written += 1
    output_path.write_text("\n".join(out_lines) + ("\n" if out_lines else ""),
                           encoding="utf-8")
    return {"written": written, "skipped": skipped}

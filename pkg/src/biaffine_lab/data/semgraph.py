"""Semantic-graph JSON: entity spans over words plus labelled relations between entities.

Each object in the top-level array looks like::

    {"words": [...],
     "entities": [{"id": 0, "label": "drug", "start": 0, "end": 2}, ...],
     "relations": [{"label": "adverseEffect", "head": 1, "tail": 0}, ...]}

``end`` is exclusive. Every word inside a span receives the span label
(other words get ``O``). A relation becomes an edge from the last word of the
head entity to the last word of the tail entity.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence

from .sample import NO_EDGE, OUTSIDE_TAG, AnnotatedGraphSample, ParseError, ValidationError

_SAMPLE_KEYS = {"words", "entities", "relations"}
_ENTITY_KEYS = {"id", "label", "start", "end"}
_RELATION_KEYS = {"label", "head", "tail"}


def _check_keys(obj, allowed: set[str], what: str, where: int) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(f"sample {where}: {what} must be an object")
    unknown = set(obj) - allowed
    missing = allowed - set(obj)
    if unknown:
        raise ValidationError(f"sample {where}: unknown {what} field(s) {sorted(unknown)}")
    if missing:
        raise ValidationError(f"sample {where}: {what} missing field(s) {sorted(missing)}")


def _convert(k: int, obj: dict, drop: frozenset) -> AnnotatedGraphSample:
    _check_keys(obj, _SAMPLE_KEYS, "sample", k)
    words = obj["words"]
    if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
        raise ValidationError(f"sample {k}: words must be a list of strings")
    n = len(words)
    tags = [OUTSIDE_TAG] * n
    last_word: dict[int, int] = {}
    spans = []
    for ent in obj["entities"]:
        _check_keys(ent, _ENTITY_KEYS, "entity", k)
        start, end = ent["start"], ent["end"]
        if not (isinstance(start, int) and isinstance(end, int)) or not 0 <= start < end <= n:
            raise ValidationError(f"sample {k}: entity {ent['id']} span [{start}, {end}) out of bounds for {n} words")
        if ent["id"] in last_word:
            raise ValidationError(f"sample {k}: duplicate entity id {ent['id']}")
        for i in range(start, end):
            tags[i] = ent["label"]
        last_word[ent["id"]] = end  # 1-based position of the span's last word
        spans.append((start, end, ent["label"]))

    incoming: dict[int, list[tuple[int, str]]] = {}
    for rel in obj["relations"]:
        _check_keys(rel, _RELATION_KEYS, "relation", k)
        if rel["head"] not in last_word or rel["tail"] not in last_word:
            raise ValidationError(f"sample {k}: relation {rel['label']!r} references a missing entity id")
        if rel["label"] in drop:
            continue
        head, dep = last_word[rel["head"]], last_word[rel["tail"]]
        if head == dep:
            raise ValidationError(f"sample {k}: relation {rel['label']!r} is a self-loop on word {dep}")
        incoming.setdefault(dep, []).append((head, rel["label"]))

    heads, relations, extra = [0] * n, [NO_EDGE] * n, []
    for dep, edges in incoming.items():
        edges = sorted(set(edges))
        heads[dep - 1], relations[dep - 1] = edges[0]
        extra.extend((h, dep, r) for h, r in edges[1:])
    return AnnotatedGraphSample(words, tags, heads, relations, sorted(extra), sorted(spans))


def parse_semgraph_json(text: str, drop_relations: Iterable[str] = ()) -> list[AnnotatedGraphSample]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(data, list):
        raise ValidationError("top level must be a JSON array")
    drop = frozenset(drop_relations)
    return [_convert(k, obj, drop) for k, obj in enumerate(data)]


def read_semgraph_json(path, drop_relations: Iterable[str] = ()) -> list[AnnotatedGraphSample]:
    with open(path, encoding="utf-8") as fh:
        return parse_semgraph_json(fh.read(), drop_relations)


def _tag_runs(tags: Sequence[str]) -> list[tuple[int, int, str]]:
    runs, i = [], 0
    while i < len(tags):
        if tags[i] == OUTSIDE_TAG:
            i += 1
            continue
        j = i
        while j + 1 < len(tags) and tags[j + 1] == tags[i]:
            j += 1
        runs.append((i, j + 1, tags[i]))
        i = j + 1
    return runs


def to_semgraph_json(samples: Sequence[AnnotatedGraphSample],
                     tags: Sequence[Sequence[str]] | None = None,
                     edges: Sequence[Iterable[tuple[int, int, str]]] | None = None) -> str:
    """Serialise gold (or predicted) tags and edges back into the JSON schema.

    Gold samples reuse their recorded spans; predicted tags are grouped into
    maximal runs of one label. Edges whose endpoints are not the last word of
    some entity get a one-word entity created for them.
    """
    out = []
    for k, s in enumerate(samples):
        word_tags = list(tags[k]) if tags is not None else list(s.tags)
        spans = list(s.spans) if tags is None and s.spans else _tag_runs(word_tags)
        sample_edges = list(edges[k]) if edges is not None else s.edges()
        entities = []
        by_last: dict[int, int] = {}
        for start, end, label in spans:
            by_last.setdefault(end, len(entities))
            entities.append({"id": len(entities), "label": label, "start": start, "end": end})
        relations = []
        for head, dep, label in sample_edges:
            if head == 0 or label == NO_EDGE:
                continue
            ids = []
            for pos in (head, dep):
                if pos not in by_last:
                    by_last[pos] = len(entities)
                    entities.append({"id": len(entities), "label": word_tags[pos - 1], "start": pos - 1, "end": pos})
                ids.append(by_last[pos])
            relations.append({"label": label, "head": ids[0], "tail": ids[1]})
        out.append({"words": list(s.words), "entities": entities, "relations": relations})
    return json.dumps(out, indent=1, ensure_ascii=False)

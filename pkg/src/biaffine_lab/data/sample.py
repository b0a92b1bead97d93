from __future__ import annotations

from dataclasses import dataclass, field

NO_EDGE = "<none>"
OUTSIDE_TAG = "O"


class DataError(ValueError):
    """Base class for ingestion failures."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class AnnotatedGraphSample:
    """One sentence with gold tags and a dependency graph over its words.

    Word positions are 1-based in ``heads`` (0 is the synthetic ROOT).
    ``heads[i]``/``relations[i]`` hold the primary incoming edge of word i+1;
    words without any gold edge attach to ROOT with the :data:`NO_EDGE`
    label. ``extra_edges`` keeps further incoming edges of multi-head graphs
    as ``(head, dependent, label)`` triples.
    """

    words: list[str]
    tags: list[str]
    heads: list[int]
    relations: list[str]
    extra_edges: list[tuple[int, int, str]] = field(default_factory=list)
    spans: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.words)
        if not (len(self.tags) == len(self.heads) == len(self.relations) == n):
            raise ValidationError("words, tags, heads and relations must have equal length")
        for dep, head in enumerate(self.heads, start=1):
            if not 0 <= head <= n:
                raise ValidationError(f"head {head} of word {dep} outside [0, {n}]")
            if head == dep:
                raise ValidationError(f"self-loop on word {dep}")
        for head, dep, _ in self.extra_edges:
            if not (0 <= head <= n and 1 <= dep <= n) or head == dep:
                raise ValidationError(f"invalid extra edge {head}->{dep}")

    def __len__(self) -> int:
        return len(self.words)

    @property
    def is_single_root(self) -> bool:
        return sum(1 for h, r in zip(self.heads, self.relations) if h == 0 and r != NO_EDGE) == 1

    @property
    def is_tree(self) -> bool:
        return not self.extra_edges and NO_EDGE not in self.relations

    def edges(self) -> list[tuple[int, int, str]]:
        """All gold edges (head, dependent, label), excluding NO_EDGE placeholders."""
        primary = [(h, d, r) for d, (h, r) in enumerate(zip(self.heads, self.relations), start=1) if r != NO_EDGE]
        return sorted(primary + list(self.extra_edges), key=lambda e: (e[1], e[0], e[2]))

    def to_dict(self) -> dict:
        return {
            "words": list(self.words),
            "tags": list(self.tags),
            "heads": list(self.heads),
            "relations": list(self.relations),
            "extra_edges": [list(e) for e in self.extra_edges],
            "spans": [list(s) for s in self.spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedGraphSample":
        return cls(
            words=list(d["words"]),
            tags=list(d["tags"]),
            heads=[int(h) for h in d["heads"]],
            relations=list(d["relations"]),
            extra_edges=[(int(h), int(dep), str(r)) for h, dep, r in d.get("extra_edges", [])],
            spans=[(int(s), int(e), str(lab)) for s, e, lab in d.get("spans", [])],
        )

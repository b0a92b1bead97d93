"""CoNLL-U reading and writing.

Only ID, FORM, XPOS, HEAD and DEPREL are consumed. Multi-word token ranges
(``3-4``) and empty nodes (``5.1``) are skipped. When XPOS is ``_`` the UPOS
column is used instead.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from .sample import NO_EDGE, AnnotatedGraphSample, ParseError, ValidationError


def _finish(rows, start_line, drop_relations) -> AnnotatedGraphSample:
    words, tags, heads, rels = [], [], [], []
    n = len(rows)
    for expected, (line_no, idx, form, tag, head, rel) in enumerate(rows, start=1):
        if idx != expected:
            raise ParseError(f"token id {idx} out of sequence (expected {expected})", line_no)
        if not 0 <= head <= n:
            raise ValidationError(f"HEAD {head} outside [0, {n}]", line_no)
        if head == idx:
            raise ValidationError(f"token {idx} is its own head", line_no)
        if rel in drop_relations:
            head, rel = 0, NO_EDGE
        words.append(form)
        tags.append(tag)
        heads.append(head)
        rels.append(rel)
    return AnnotatedGraphSample(words, tags, heads, rels)


def parse_conllu(text: str, drop_relations: Iterable[str] = ()) -> list[AnnotatedGraphSample]:
    drop = frozenset(drop_relations)
    samples = []
    rows: list = []
    start = 1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            if rows:
                samples.append(_finish(rows, start, drop))
                rows = []
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"expected 10 tab-separated columns, found {len(cols)}", line_no)
        ident = cols[0]
        if "-" in ident or "." in ident:
            continue
        try:
            idx = int(ident)
        except ValueError:
            raise ParseError(f"bad token id {ident!r}", line_no) from None
        if not rows:
            start = line_no
        form = cols[1]
        tag = cols[4] if cols[4] != "_" else cols[3]
        try:
            head = int(cols[6])
        except ValueError:
            raise ParseError(f"bad HEAD value {cols[6]!r}", line_no) from None
        rows.append((line_no, idx, form, tag, head, cols[7]))
    if rows:
        samples.append(_finish(rows, start, drop))
    return samples


def read_conllu(path, drop_relations: Iterable[str] = ()) -> list[AnnotatedGraphSample]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read(), drop_relations)


def to_conllu(samples: Sequence[AnnotatedGraphSample],
              heads: Sequence[Sequence[int]] | None = None,
              relations: Sequence[Sequence[str]] | None = None) -> str:
    """Serialise samples; predicted heads/relations replace the gold columns when given."""
    out = []
    for k, s in enumerate(samples):
        hs = heads[k] if heads is not None else s.heads
        rs = relations[k] if relations is not None else s.relations
        for i, word in enumerate(s.words):
            out.append("\t".join([str(i + 1), word, "_", "_", s.tags[i], "_", str(int(hs[i])), rs[i], "_", "_"]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")

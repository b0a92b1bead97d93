"""Seeded synthetic treebank from a small case-marking grammar.

    S  -> NP[nom] V NP[acc] PP{0,2} ADV?
    NP[c] -> DET[c] ADJ[c]{0,2} N[c]
    PP -> P NP[obl]

Each case has its own determiner, adjective and noun lexicon, so a word's
form tells a context-free model which role it plays. The only ambiguity left
is inside sentences with two PPs, whose oblique modifiers could attach to
either oblique noun.
"""

from __future__ import annotations

from pathlib import Path

from ..numerics import SeededRng
from .conllu import to_conllu
from .sample import AnnotatedGraphSample

_CASES = ("nom", "acc", "obl")
_LEXICON_SIZES = {"DET": 3, "ADJ": 12, "NOUN": 25, "VERB": 20, "ADP": 6, "ADV": 8}
_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z")
_VOWELS = ("a", "e", "i", "o", "u")


def _lexicon(rng: SeededRng) -> dict[tuple[str, str], list[str]]:
    seen: set[str] = set()

    def word(syllables: int, suffix: str) -> str:
        while True:
            w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)) + suffix
            if w not in seen:
                seen.add(w)
                return w

    lex: dict[tuple[str, str], list[str]] = {}
    for pos in ("DET", "ADJ", "NOUN"):
        for case in _CASES:
            lex[(pos, case)] = [word(2, case[0]) for _ in range(_LEXICON_SIZES[pos])]
    for pos in ("VERB", "ADP", "ADV"):
        lex[(pos, "")] = [word(2, "") for _ in range(_LEXICON_SIZES[pos])]
    return lex


def _noun_phrase(rng, lex, case, tokens):
    """Append DET ADJ* N; returns (noun position, list of modifier positions with labels)."""
    mods = []
    tokens.append((rng.choice(lex[("DET", case)]), "DET"))
    mods.append((len(tokens), "det"))
    for _ in range(int(rng.integers(0, 3))):
        tokens.append((rng.choice(lex[("ADJ", case)]), "ADJ"))
        mods.append((len(tokens), "amod"))
    tokens.append((rng.choice(lex[("NOUN", case)]), "NOUN"))
    return len(tokens), mods


def generate_sentence(rng: SeededRng, lex) -> AnnotatedGraphSample:
    tokens: list[tuple[str, str]] = []
    arcs: dict[int, tuple[int, str]] = {}

    subj, subj_mods = _noun_phrase(rng, lex, "nom", tokens)
    tokens.append((rng.choice(lex[("VERB", "")]), "VERB"))
    verb = len(tokens)
    arcs[verb] = (0, "root")
    arcs[subj] = (verb, "nsubj")
    for pos, lab in subj_mods:
        arcs[pos] = (subj, lab)

    obj, obj_mods = _noun_phrase(rng, lex, "acc", tokens)
    arcs[obj] = (verb, "obj")
    for pos, lab in obj_mods:
        arcs[pos] = (obj, lab)

    for _ in range(int(rng.choice([0, 0, 1, 1, 2]))):
        tokens.append((rng.choice(lex[("ADP", "")]), "ADP"))
        prep = len(tokens)
        noun, mods = _noun_phrase(rng, lex, "obl", tokens)
        arcs[prep] = (noun, "case")
        arcs[noun] = (verb, "obl")
        for pos, lab in mods:
            arcs[pos] = (noun, lab)

    if rng.uniform() < 0.3:
        tokens.append((rng.choice(lex[("ADV", "")]), "ADV"))
        arcs[len(tokens)] = (verb, "advmod")

    n = len(tokens)
    return AnnotatedGraphSample(
        words=[w for w, _ in tokens],
        tags=[t for _, t in tokens],
        heads=[arcs[i][0] for i in range(1, n + 1)],
        relations=[arcs[i][1] for i in range(1, n + 1)],
    )


def generate_treebank(n_train: int = 1000, n_dev: int = 200, n_test: int = 200, seed: int = 0):
    """Returns (train, dev, test) sample lists; identical for identical arguments."""
    rng = SeededRng(seed)
    lex = _lexicon(rng.spawn(0))
    body = rng.spawn(1)
    sents = [generate_sentence(body, lex) for _ in range(n_train + n_dev + n_test)]
    return sents[:n_train], sents[n_train:n_train + n_dev], sents[n_train + n_dev:]


def write_treebank(directory, n_train: int = 1000, n_dev: int = 200, n_test: int = 200, seed: int = 0) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, split in zip(("train", "dev", "test"), generate_treebank(n_train, n_dev, n_test, seed)):
        path = directory / f"{name}.conllu"
        path.write_text(to_conllu(split), encoding="utf-8")
        paths[name] = path
    return paths

"""Triple datasets, vocabularies, entailment constraints, and the membership
index used by the filtered evaluation protocol.

File formats (all UTF-8, tab-separated):
  triples:      head<TAB>relation<TAB>tail, one per line
  entailments:  premise<TAB>conclusion<TAB>confidence, where the premise name
                may carry the suffix ``^-1`` to mark an inverted premise
  vocab dumps:  one name per line, the line number is the id
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

logger = logging.getLogger(__name__)

_INVERSE_SUFFIX = "^-1"


class ParseError(ValueError):
    """A data file line does not match the expected format."""


class VocabularyError(ValueError):
    """A name cannot be resolved against a fixed vocabulary."""


class RangeError(ValueError):
    """A numeric field falls outside its allowed range."""


class Triple(NamedTuple):
    """Integer-coded (head entity, relation, tail entity) fact."""

    head: int
    rel: int
    tail: int


@dataclass(frozen=True)
class Entailment:
    """Weighted entailment between two relations.

    The premise relation (optionally read in its inverse direction) implies
    the conclusion relation with the given confidence in (0, 1].
    """

    premise_rel: int
    premise_inverted: bool
    conclusion_rel: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 < self.confidence <= 1.0:
            raise RangeError(
                f"entailment confidence must lie in (0, 1], got {self.confidence}"
            )
        if not self.premise_inverted and self.premise_rel == self.conclusion_rel:
            raise ValueError(
                "premise and conclusion name the same signed relation "
                f"(relation id {self.conclusion_rel})"
            )


class IdMap:
    """Bidirectional name<->id map with dense, insertion-ordered ids."""

    def __init__(self, names: Iterable[str] = ()):
        self._name_to_id: dict[str, int] = {}
        self._id_to_name: list[str] = []
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        """Return the id of ``name``, assigning the next free id if unseen."""
        idx = self._name_to_id.get(name)
        if idx is None:
            idx = len(self._id_to_name)
            self._name_to_id[name] = idx
            self._id_to_name.append(name)
        return idx

    def id(self, name: str) -> int:
        try:
            return self._name_to_id[name]
        except KeyError:
            raise VocabularyError(f"unknown name: {name!r}") from None

    def name(self, idx: int) -> str:
        return self._id_to_name[idx]

    def __len__(self) -> int:
        return len(self._id_to_name)

    def __contains__(self, name: str) -> bool:
        return name in self._name_to_id

    def __iter__(self) -> Iterator[str]:
        return iter(self._id_to_name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IdMap):
            return NotImplemented
        return self._id_to_name == other._id_to_name

    def save(self, path: str | Path) -> None:
        """Write one name per line; the line number is the id."""
        with open(path, "w", encoding="utf-8") as fh:
            for name in self._id_to_name:
                fh.write(name + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "IdMap":
        with open(path, "r", encoding="utf-8") as fh:
            names = fh.read().split("\n")
        if names and names[-1] == "":
            names.pop()
        return cls(names)


@dataclass
class Vocab:
    """Entity and relation vocabularies of a dataset."""

    entities: IdMap = field(default_factory=IdMap)
    relations: IdMap = field(default_factory=IdMap)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def dump(self, entities_path: str | Path, relations_path: str | Path) -> None:
        self.entities.save(entities_path)
        self.relations.save(relations_path)

    @classmethod
    def load(cls, entities_path: str | Path, relations_path: str | Path) -> "Vocab":
        return cls(IdMap.load(entities_path), IdMap.load(relations_path))


def _split_line(line: str, path: str | Path, lineno: int, n_fields: int) -> list[str]:
    fields = line.split("\t")
    if len(fields) != n_fields:
        raise ParseError(
            f"{path}:{lineno}: expected {n_fields} tab-separated fields, "
            f"got {len(fields)}"
        )
    return fields


def load_triples(
    path: str | Path,
    vocab: Vocab | None = None,
    grow: bool = True,
) -> tuple[list[Triple], Vocab]:
    """Read a triple TSV file into integer-coded triples.

    Parameters
    ----------
    path:
        TSV file with one ``head<TAB>relation<TAB>tail`` triple per line.
    vocab:
        Vocabulary to resolve names against. A fresh empty one is created
        when omitted. The vocabulary object is mutated in place when it grows.
    grow:
        If true, unseen names are assigned new ids in first-seen order.
        If false, unseen names raise :class:`VocabularyError`.

    Returns
    -------
    (triples, vocab):
        The integer-coded triples in file order, and the (possibly grown)
        vocabulary.

    Names are treated as opaque strings; no whitespace normalization is
    applied beyond removing the line terminator. Blank lines are skipped.
    """
    if vocab is None:
        vocab = Vocab()
    triples: list[Triple] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line:
                continue
            head_name, rel_name, tail_name = _split_line(line, path, lineno, 3)
            if grow:
                head = vocab.entities.add(head_name)
                rel = vocab.relations.add(rel_name)
                tail = vocab.entities.add(tail_name)
            else:
                try:
                    head = vocab.entities.id(head_name)
                    rel = vocab.relations.id(rel_name)
                    tail = vocab.entities.id(tail_name)
                except VocabularyError as exc:
                    raise VocabularyError(f"{path}:{lineno}: {exc}") from None
            triples.append(Triple(head, rel, tail))
    return triples, vocab


def write_triples(path: str | Path, triples: Iterable[Triple], vocab: Vocab) -> None:
    """Write triples back to the TSV format accepted by :func:`load_triples`."""
    with open(path, "w", encoding="utf-8") as fh:
        for head, rel, tail in triples:
            fh.write(
                f"{vocab.entities.name(head)}\t{vocab.relations.name(rel)}\t"
                f"{vocab.entities.name(tail)}\n"
            )


def load_entailments(path: str | Path, vocab: Vocab) -> list[Entailment]:
    """Read entailment constraints from a TSV file.

    Each line is ``premise<TAB>conclusion<TAB>confidence``. A premise name
    ending in ``^-1`` marks an inverted premise. Relation names must already
    be present in ``vocab``; the confidence must lie in (0, 1].
    """
    entailments: list[Entailment] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line:
                continue
            premise_name, conclusion_name, conf_text = _split_line(
                line, path, lineno, 3
            )
            inverted = premise_name.endswith(_INVERSE_SUFFIX)
            if inverted:
                premise_name = premise_name[: -len(_INVERSE_SUFFIX)]
            try:
                premise = vocab.relations.id(premise_name)
                conclusion = vocab.relations.id(conclusion_name)
            except VocabularyError as exc:
                raise VocabularyError(f"{path}:{lineno}: {exc}") from None
            try:
                confidence = float(conf_text)
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: confidence is not a number: {conf_text!r}"
                ) from None
            try:
                entailments.append(
                    Entailment(premise, inverted, conclusion, confidence)
                )
            except ValueError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None
    return entailments


def write_entailments(
    path: str | Path, entailments: Iterable[Entailment], vocab: Vocab
) -> None:
    """Write entailments to the TSV format accepted by :func:`load_entailments`."""
    with open(path, "w", encoding="utf-8") as fh:
        for ent in entailments:
            premise = vocab.relations.name(ent.premise_rel)
            if ent.premise_inverted:
                premise += _INVERSE_SUFFIX
            fh.write(
                f"{premise}\t{vocab.relations.name(ent.conclusion_rel)}\t"
                f"{ent.confidence:.6f}\n"
            )


@dataclass
class Dataset:
    """Train/valid/test triple splits sharing one vocabulary."""

    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    vocab: Vocab

    @property
    def n_entities(self) -> int:
        return self.vocab.n_entities

    @property
    def n_relations(self) -> int:
        return self.vocab.n_relations


def _warn_unseen(kind: str, id_map: IdMap, n_before: int, split: str) -> None:
    n_new = len(id_map) - n_before
    if n_new > 0:
        sample = [id_map.name(i) for i in range(n_before, min(n_before + 5, len(id_map)))]
        logger.warning(
            "%d %s in the %s split do not appear in train (embeddings will be "
            "untrained), e.g. %s",
            n_new,
            kind,
            split,
            ", ".join(repr(s) for s in sample),
        )


def load_dataset(
    directory: str | Path,
    train_file: str = "train.txt",
    valid_file: str = "valid.txt",
    test_file: str = "test.txt",
) -> Dataset:
    """Load the three splits of a dataset directory.

    The vocabulary is built from the training split; names that appear only
    in valid/test still get ids but a warning is logged, since their
    embeddings cannot be trained. Missing valid/test files yield empty splits.
    """
    directory = Path(directory)
    train, vocab = load_triples(directory / train_file, None, grow=True)

    valid: list[Triple] = []
    test: list[Triple] = []
    for name, out in ((valid_file, valid), (test_file, test)):
        path = directory / name
        if not path.exists():
            logger.warning("split file %s is missing; using an empty split", path)
            continue
        n_ent, n_rel = len(vocab.entities), len(vocab.relations)
        triples, _ = load_triples(path, vocab, grow=True)
        out.extend(triples)
        _warn_unseen("entities", vocab.entities, n_ent, name)
        _warn_unseen("relations", vocab.relations, n_rel, name)

    train_set, valid_set, test_set = set(train), set(valid), set(test)
    if train_set & valid_set or train_set & test_set or valid_set & test_set:
        logger.warning("dataset splits are not pairwise disjoint")
    return Dataset(train, valid, test, vocab)


class KnownIndex:
    """Membership index over all known triples, with partial-key queries.

    Duplicate triples are collapsed: the index is a set by definition.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._all: set[Triple] = set()
        self._heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        self._tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        for triple in triples:
            self.add(triple)

    def add(self, triple: Triple) -> None:
        triple = Triple(*triple)
        self._all.add(triple)
        self._heads[(triple.rel, triple.tail)].add(triple.head)
        self._tails[(triple.head, triple.rel)].add(triple.tail)

    def __contains__(self, triple: tuple[int, int, int]) -> bool:
        return Triple(*triple) in self._all

    def __len__(self) -> int:
        return len(self._all)

    def heads(self, rel: int, tail: int) -> set[int]:
        """Entity ids h such that (h, rel, tail) is a known triple."""
        return set(self._heads.get((rel, tail), ()))

    def tails(self, head: int, rel: int) -> set[int]:
        """Entity ids t such that (head, rel, t) is a known triple."""
        return set(self._tails.get((head, rel), ()))


def build_known_index(dataset: Dataset) -> KnownIndex:
    """Index the union of train, valid, and test for filtered ranking."""
    index = KnownIndex(dataset.train)
    for triple in dataset.valid:
        index.add(triple)
    for triple in dataset.test:
        index.add(triple)
    return index

"""Triple file ingestion, vocabularies and the true-triple filter index."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from ..exceptions import TripleParseError, VocabularyError
from ..utils.file_cleanup import atomic_write_text

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
_MAX_SUGGESTIONS = 5


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class Vocabulary:
    """Dense bidirectional name↔ID maps for entities and relations."""

    entity_names: List[str] = field(default_factory=list)
    relation_names: List[str] = field(default_factory=list)
    entity_ids: Dict[str, int] = field(default_factory=dict)
    relation_ids: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_names(cls, entity_names: Sequence[str], relation_names: Sequence[str]) -> "Vocabulary":
        vocab = cls()
        for name in entity_names:
            vocab.add_entity(name)
        for name in relation_names:
            vocab.add_relation(name)
        return vocab

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def add_entity(self, name: str) -> int:
        if name not in self.entity_ids:
            self.entity_ids[name] = len(self.entity_names)
            self.entity_names.append(name)
        return self.entity_ids[name]

    def add_relation(self, name: str) -> int:
        if name not in self.relation_ids:
            self.relation_ids[name] = len(self.relation_names)
            self.relation_names.append(name)
        return self.relation_ids[name]

    def entity_id(self, name: str) -> int:
        try:
            return self.entity_ids[name]
        except KeyError:
            raise VocabularyError("entity", name, _prefix_matches(name, self.entity_names)) from None

    def relation_id(self, name: str) -> int:
        try:
            return self.relation_ids[name]
        except KeyError:
            raise VocabularyError("relation", name, _prefix_matches(name, self.relation_names)) from None


def _prefix_matches(token: str, names: Iterable[str]) -> List[str]:
    """Known names that start with the token, for error messages."""
    if not token:
        return []
    return sorted(n for n in names if n.startswith(token))[:_MAX_SUGGESTIONS]


@dataclass(frozen=True)
class FilterIndex:
    """Set-valued lookups over a set of true triples."""

    tails_of: Dict[Tuple[int, int], FrozenSet[int]]
    heads_of: Dict[Tuple[int, int], FrozenSet[int]]
    rels_of: Dict[Tuple[int, int], FrozenSet[int]]

    def tails(self, head: int, relation: int) -> FrozenSet[int]:
        return self.tails_of.get((head, relation), frozenset())

    def heads(self, relation: int, tail: int) -> FrozenSet[int]:
        return self.heads_of.get((relation, tail), frozenset())

    def relations(self, head: int, tail: int) -> FrozenSet[int]:
        return self.rels_of.get((head, tail), frozenset())


def build_filter_index(triples: Iterable[Triple]) -> FilterIndex:
    """Index triples by (h, r) → tails, (r, t) → heads and (h, t) → relations.

    Duplicate triples collapse.
    """
    tails_of: Dict[Tuple[int, int], set] = defaultdict(set)
    heads_of: Dict[Tuple[int, int], set] = defaultdict(set)
    rels_of: Dict[Tuple[int, int], set] = defaultdict(set)
    for h, r, t in triples:
        tails_of[(h, r)].add(t)
        heads_of[(r, t)].add(h)
        rels_of[(h, t)].add(r)
    return FilterIndex(
        tails_of={key: frozenset(v) for key, v in tails_of.items()},
        heads_of={key: frozenset(v) for key, v in heads_of.items()},
        rels_of={key: frozenset(v) for key, v in rels_of.items()},
    )


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable graph: vocabulary, the three splits and two filter indexes.

    `train_index` covers the train split only (positive candidates during
    training); `known_index` covers train ∪ valid ∪ test (filtered metrics).
    """

    vocab: Vocabulary
    train: List[Triple]
    valid: List[Triple]
    test: List[Triple]
    train_index: FilterIndex
    known_index: FilterIndex

    @classmethod
    def from_splits(
        cls,
        vocab: Vocabulary,
        train: List[Triple],
        valid: Optional[List[Triple]] = None,
        test: Optional[List[Triple]] = None,
    ) -> "KnowledgeGraph":
        valid = list(valid or [])
        test = list(test or [])
        for split in (train, valid, test):
            _check_ids(split, vocab)
        return cls(
            vocab=vocab,
            train=list(train),
            valid=valid,
            test=test,
            train_index=build_filter_index(train),
            known_index=build_filter_index([*train, *valid, *test]),
        )

    @property
    def n_entities(self) -> int:
        return self.vocab.n_entities

    @property
    def n_relations(self) -> int:
        return self.vocab.n_relations

    def split(self, name: str) -> List[Triple]:
        if name not in SPLITS:
            raise ValueError(f"Unknown split: {name}")
        return getattr(self, name)

    def index_over(self, splits: Sequence[str]) -> FilterIndex:
        """Filter index over an arbitrary union of splits."""
        return build_filter_index(t for name in splits for t in self.split(name))


def _check_ids(triples: Iterable[Triple], vocab: Vocabulary) -> None:
    for h, r, t in triples:
        if not 0 <= h < vocab.n_entities:
            raise VocabularyError("entity", str(h))
        if not 0 <= t < vocab.n_entities:
            raise VocabularyError("entity", str(t))
        if not 0 <= r < vocab.n_relations:
            raise VocabularyError("relation", str(r))


def _read_lines(path: str) -> Iterator[Tuple[int, str]]:
    """Non-blank lines with their 1-based numbers; bytes that are not UTF-8 name the line."""
    with open(path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError as e:
                raise TripleParseError(path, line_number, f"not valid UTF-8 ({e.reason} at byte {e.start})") from e
            if line.strip():
                yield line_number, line


def load_triples(path: str, vocab: Optional[Vocabulary] = None) -> Tuple[List[Triple], Vocabulary]:
    """Parse a head<TAB>relation<TAB>tail file.

    With `vocab` given the vocabulary is fixed and unknown names raise
    VocabularyError; otherwise a new vocabulary is built in order of first
    appearance.
    """
    fixed = vocab is not None
    vocab = vocab if fixed else Vocabulary()
    triples: List[Triple] = []
    for line_number, line in _read_lines(path):
        fields = [part.strip() for part in line.split("\t")]
        if len(fields) != 3:
            raise TripleParseError(path, line_number, f"expected 3 tab-separated fields, got {len(fields)}")
        if not all(fields):
            raise TripleParseError(path, line_number, "empty name field")
        head, relation, tail = fields
        if fixed:
            triples.append(Triple(vocab.entity_id(head), vocab.relation_id(relation), vocab.entity_id(tail)))
        else:
            h = vocab.add_entity(head)
            r = vocab.add_relation(relation)
            t = vocab.add_entity(tail)
            triples.append(Triple(h, r, t))

    n_unique = len(set(triples))
    if n_unique != len(triples):
        logger.warning("%s: %d duplicate triple(s) kept", path, len(triples) - n_unique)
    logger.info("Loaded %d triples from %s", len(triples), path)
    return triples, vocab


def write_triples(path: str, triples: Iterable[Triple], vocab: Vocabulary) -> None:
    lines = [
        f"{vocab.entity_names[h]}\t{vocab.relation_names[r]}\t{vocab.entity_names[t]}\n"
        for h, r, t in triples
    ]
    atomic_write_text(path, "".join(lines))


def load_graph(train_path: str, valid_path: Optional[str] = None, test_path: Optional[str] = None) -> KnowledgeGraph:
    """Build the vocabulary from train and load valid/test against it."""
    train, vocab = load_triples(train_path)
    valid = load_triples(valid_path, vocab)[0] if valid_path else []
    test = load_triples(test_path, vocab)[0] if test_path else []
    logger.info(
        "Graph: %d entities, %d relations, %d/%d/%d train/valid/test triples",
        vocab.n_entities, vocab.n_relations, len(train), len(valid), len(test),
    )
    return KnowledgeGraph.from_splits(vocab, train, valid, test)


def dump_vocabulary(vocab: Vocabulary, entities_path: str, relations_path: str) -> None:
    """Write name<TAB>id files, one mapping per line."""
    atomic_write_text(entities_path, "".join(f"{n}\t{i}\n" for i, n in enumerate(vocab.entity_names)))
    atomic_write_text(relations_path, "".join(f"{n}\t{i}\n" for i, n in enumerate(vocab.relation_names)))


def _read_mapping(path: str) -> List[str]:
    by_id: Dict[int, str] = {}
    for line_number, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 2:
            raise TripleParseError(path, line_number, f"expected name<TAB>id, got {len(fields)} field(s)")
        try:
            idx = int(fields[1])
        except ValueError:
            raise TripleParseError(path, line_number, f"invalid id {fields[1]!r}") from None
        if idx in by_id:
            raise TripleParseError(path, line_number, f"id {idx} assigned twice")
        by_id[idx] = fields[0]
    if sorted(by_id) != list(range(len(by_id))):
        raise TripleParseError(path, len(by_id), "ids are not dense 0..n-1")
    return [by_id[i] for i in range(len(by_id))]


def load_vocabulary(entities_path: str, relations_path: str) -> Vocabulary:
    entity_names = _read_mapping(entities_path)
    relation_names = _read_mapping(relations_path)
    for path, names in ((entities_path, entity_names), (relations_path, relation_names)):
        if len(set(names)) != len(names):
            raise TripleParseError(path, len(names), "a name is mapped to more than one id")
    vocab = Vocabulary.from_names(entity_names, relation_names)
    logger.info("Loaded vocabulary: %d entities, %d relations", vocab.n_entities, vocab.n_relations)
    return vocab

"""Triple file parsing, vocabulary indexing, and the indexed triple store."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import EmptySplit, IndexOutOfRange, MalformedLine

logger = logging.getLogger(__name__)


class Triple(NamedTuple):
    subject: int
    predicate: int
    object: int


def parse_triples(text: str | bytes) -> list[tuple[str, str, str]]:
    """Parse TSV triple lines into (subject, predicate, object) strings.

    One triple per non-empty line, exactly three TAB-separated fields.
    Raises MalformedLine (with the 1-based line number) on anything else;
    bad lines are never skipped silently.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    triples: list[tuple[str, str, str]] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line == "":
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLine(line_no, f"got {len(fields)}")
        triples.append((fields[0], fields[1], fields[2]))
    return triples


def read_triples(path: str | Path) -> list[tuple[str, str, str]]:
    return parse_triples(Path(path).read_text(encoding="utf-8"))


def write_triples(path: str | Path, triples: Iterable[tuple[str, str, str]]) -> None:
    """Write triples as TAB-separated UTF-8 lines with LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s, p, o in triples:
            fh.write(f"{s}\t{p}\t{o}\n")


class Vocab:
    """Bidirectional string <-> dense-id map, ids in first-appearance order."""

    def __init__(self, names: Iterable[str] = ()):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            idx = len(self.names)
            self.index[name] = idx
            self.names.append(name)
        return idx

    def id_of(self, name: str) -> int | None:
        return self.index.get(name)

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index


def _to_array(triples: list[tuple[int, int, int]]) -> np.ndarray:
    if not triples:
        return np.empty((0, 3), dtype=np.int64)
    return np.asarray(triples, dtype=np.int64)


@dataclass
class TripleStore:
    """Immutable indexed train/valid/test splits with a known-true index.

    `known_objects[(p, s)]` and `known_subjects[(p, o)]` cover the union
    of all three splits and back the filtered ranking protocol;
    `train_set` holds train triples only, for negative-sampling rejection.
    """

    entities: Vocab
    relations: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    known_objects: dict[tuple[int, int], set[int]] = field(repr=False)
    known_subjects: dict[tuple[int, int], set[int]] = field(repr=False)
    train_set: set[tuple[int, int, int]] = field(repr=False)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_triples(self) -> int:
        return self.train.shape[0] + self.valid.shape[0] + self.test.shape[0]

    def is_known(self, s: int, p: int, o: int) -> bool:
        objs = self.known_objects.get((p, s))
        return objs is not None and o in objs

    def split(self, name: str) -> np.ndarray:
        try:
            return {"train": self.train, "valid": self.valid, "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None

    def names_of(self, triple) -> tuple[str, str, str]:
        s, p, o = (int(x) for x in triple)
        if not (0 <= s < self.n_entities and 0 <= o < self.n_entities):
            raise IndexOutOfRange(f"entity id out of range in {(s, p, o)}")
        if not (0 <= p < self.n_relations):
            raise IndexOutOfRange(f"relation id {p} out of range")
        return (self.entities.names[s], self.relations.names[p], self.entities.names[o])


def build_store(
    train: list[tuple[str, str, str]],
    valid: list[tuple[str, str, str]] = (),
    test: list[tuple[str, str, str]] = (),
) -> TripleStore:
    """Index string triples into a TripleStore.

    Vocabularies are assembled over the union of the splits in
    first-appearance order (train, then valid, then test), so id
    assignment is deterministic for fixed inputs. A triple appearing in
    more than one split is logged as a warning, not rejected.
    """
    entities = Vocab()
    relations = Vocab()
    splits: list[list[tuple[int, int, int]]] = []
    seen: dict[tuple[int, int, int], str] = {}
    for split_name, rows in (("train", train), ("valid", valid), ("test", test)):
        ids: list[tuple[int, int, int]] = []
        for s, p, o in rows:
            t = (entities.add(s), relations.add(p), entities.add(o))
            ids.append(t)
            prev = seen.get(t)
            if prev is not None and prev != split_name:
                logger.warning("triple %r appears in both %s and %s splits", (s, p, o), prev, split_name)
            else:
                seen[t] = split_name
        splits.append(ids)

    known_objects: dict[tuple[int, int], set[int]] = {}
    known_subjects: dict[tuple[int, int], set[int]] = {}
    for ids in splits:
        for s, p, o in ids:
            known_objects.setdefault((p, s), set()).add(o)
            known_subjects.setdefault((p, o), set()).add(s)

    return TripleStore(
        entities=entities,
        relations=relations,
        train=_to_array(splits[0]),
        valid=_to_array(splits[1]),
        test=_to_array(splits[2]),
        known_objects=known_objects,
        known_subjects=known_subjects,
        train_set=set(splits[0]),
    )


def load_store(train_path: str | Path, valid_path: str | Path | None = None, test_path: str | Path | None = None) -> TripleStore:
    """Read TSV split files and index them."""
    train = read_triples(train_path)
    valid = read_triples(valid_path) if valid_path else []
    test = read_triples(test_path) if test_path else []
    if not train:
        raise EmptySplit(f"no triples in {train_path}")
    return build_store(train, valid, test)


def dump_store(store: TripleStore, out_dir: str | Path) -> dict[str, Path]:
    """Re-emit the store's splits as train/valid/test TSV files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in ("train", "valid", "test"):
        path = out_dir / f"{name}.tsv"
        write_triples(path, (store.names_of(t) for t in store.split(name)))
        paths[name] = path
    return paths

"""Countries benchmark builder.

Turns raw country records (name, region, subregion, land borders) into a
two-predicate knowledge graph:

    locatedIn(country, subregion), locatedIn(country, region),
    locatedIn(subregion, region), and neighborOf in both directions.

Countries are split 80/10/10 into train/valid/test such that every
held-out country has at least one neighbor among the training countries.
The held-out countries' locatedIn(country, region) facts become the
valid/test positives, and progressively more evidence is deleted from
the training graph:

    S1  only the held-out country -> region facts are missing
        (answer recoverable through the country's subregion),
    S2  additionally the held-out country -> subregion facts are missing
        (answer recoverable through neighboring countries' regions),
    S3  additionally every neighbor's country -> region fact is missing
        (answer requires neighbor -> subregion -> region composition).

The prediction task is binary: for each held-out country, score
locatedIn(country, r) for all regions r; exactly one is true.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .data import TripleStore, build_store
from .exceptions import ConstraintUnsatisfiable
from .rng import substream

LOCATED_IN = "locatedIn"
NEIGHBOR_OF = "neighborOf"

SETTINGS = ("S1", "S2", "S3")


class LabeledTriple(NamedTuple):
    subject: int
    predicate: int
    object: int
    label: int  # +1 true, -1 false


@dataclass(frozen=True)
class CountryRecord:
    name: str
    region: str
    subregion: str
    borders: tuple[str, ...]


@dataclass
class CountriesRaw:
    """Validated raw country list; border lists are symmetric."""

    countries: list[CountryRecord]

    @property
    def regions(self) -> list[str]:
        seen: list[str] = []
        for c in self.countries:
            if c.region not in seen:
                seen.append(c.region)
        return seen

    @property
    def subregions(self) -> list[str]:
        seen: list[str] = []
        for c in self.countries:
            if c.subregion not in seen:
                seen.append(c.subregion)
        return seen


def load_raw(source: str | Path | None = None) -> CountriesRaw:
    """Load and validate raw records; None loads the packaged fixture.

    Border lists are symmetrized (an edge listed on either side counts),
    then validated: unique country names, non-empty region/subregion per
    country, no border referencing an unknown country, and no name shared
    between a country and a region/subregion (entities must be distinct).
    """
    if source is None:
        payload = resources.files("holokg.resources").joinpath("countries.json").read_text(encoding="utf-8")
    else:
        payload = Path(source).read_text(encoding="utf-8")
    rows = json.loads(payload)
    if not isinstance(rows, list):
        raise ValueError("countries file must be a JSON array of objects")

    names: set[str] = set()
    for row in rows:
        name = row.get("name")
        if not name or not row.get("region") or not row.get("subregion"):
            raise ValueError(f"country record missing name/region/subregion: {row!r}")
        if name in names:
            raise ValueError(f"duplicate country name {name!r}")
        names.add(name)

    neighbors: dict[str, set[str]] = {row["name"]: set() for row in rows}
    for row in rows:
        for other in row.get("borders", ()):
            if other not in names:
                raise ValueError(f"{row['name']!r} borders unknown country {other!r}")
            if other == row["name"]:
                raise ValueError(f"{row['name']!r} borders itself")
            neighbors[row["name"]].add(other)
            neighbors[other].add(row["name"])

    countries = [
        CountryRecord(
            name=row["name"],
            region=row["region"],
            subregion=row["subregion"],
            borders=tuple(sorted(neighbors[row["name"]])),
        )
        for row in rows
    ]

    place_names = {c.region for c in countries} | {c.subregion for c in countries}
    clash = names & place_names
    if clash:
        raise ValueError(f"country names collide with region/subregion names: {sorted(clash)}")
    return CountriesRaw(countries=countries)


def _split_sizes(n: int) -> tuple[int, int, int]:
    # 10% valid and 10% test, rounded half up; remainder to train.
    tenth = int(n * 0.1 + 0.5)
    return n - 2 * tenth, tenth, tenth


def _sample_partition(raw: CountriesRaw, seed: int) -> tuple[list[str], list[str], list[str]]:
    names = [c.name for c in raw.countries]
    nbrs = {c.name: set(c.borders) for c in raw.countries}
    n_train, n_valid, n_test = _split_sizes(len(names))
    n_held = n_valid + n_test
    # Only a bordered country can satisfy the neighbor-in-train constraint,
    # so held-out candidates are drawn there and the full draw is rejected
    # until no held-out country has all of its neighbors held out too.
    bordered = [n for n in names if nbrs[n]]
    if len(bordered) < n_held:
        raise ConstraintUnsatisfiable("not enough bordered countries to hold out")
    rng = substream(seed, "countries-split")
    for _ in range(10_000):
        held = list(rng.choice(len(bordered), size=n_held, replace=False))
        held_names = [bordered[i] for i in held]
        held_set = set(held_names)
        if all(nbrs[c] - held_set for c in held_names):
            valid = held_names[:n_valid]
            test = held_names[n_valid:]
            train = [n for n in names if n not in held_set]
            return train, valid, test
    raise ConstraintUnsatisfiable("no neighbor-consistent partition found in 10000 attempts")


@dataclass
class CountriesSplit:
    """Indexed store plus the labeled region queries for both held-out sets."""

    store: TripleStore
    valid_queries: list[LabeledTriple]
    test_queries: list[LabeledTriple]
    setting: str
    seed: int
    valid_countries: list[str]
    test_countries: list[str]


def build_countries(raw: CountriesRaw, setting: str, seed: int) -> CountriesSplit:
    """Build the triple store and query set for one removal setting."""
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}, got {setting!r}")
    by_name = {c.name: c for c in raw.countries}
    train_c, valid_c, test_c = _sample_partition(raw, seed)
    held = set(valid_c) | set(test_c)
    held_neighbors = {n for c in held for n in by_name[c].borders}

    train: list[tuple[str, str, str]] = []
    for c in raw.countries:
        drop_subregion = setting in ("S2", "S3") and c.name in held
        drop_region = c.name in held or (setting == "S3" and c.name in held_neighbors)
        if not drop_subregion:
            train.append((c.name, LOCATED_IN, c.subregion))
        if not drop_region:
            train.append((c.name, LOCATED_IN, c.region))
    sub_to_region: dict[str, str] = {}
    for c in raw.countries:
        sub_to_region.setdefault(c.subregion, c.region)
    for sub, region in sub_to_region.items():
        train.append((sub, LOCATED_IN, region))
    for c in raw.countries:
        for other in c.borders:
            train.append((c.name, NEIGHBOR_OF, other))

    valid = [(c, LOCATED_IN, by_name[c].region) for c in valid_c]
    test = [(c, LOCATED_IN, by_name[c].region) for c in test_c]
    store = build_store(train, valid, test)

    regions = raw.regions
    p = store.relations.index[LOCATED_IN]

    def queries(countries: list[str]) -> list[LabeledTriple]:
        out = []
        for c in countries:
            true_region = by_name[c].region
            cid = store.entities.index[c]
            for r in regions:
                rid = store.entities.index[r]
                out.append(LabeledTriple(cid, p, rid, 1 if r == true_region else -1))
        return out

    return CountriesSplit(
        store=store,
        valid_queries=queries(valid_c),
        test_queries=queries(test_c),
        setting=setting,
        seed=seed,
        valid_countries=valid_c,
        test_countries=test_c,
    )


def write_queries(path: str | Path, store: TripleStore, queries: Iterable[LabeledTriple]) -> None:
    """Emit labeled queries as 4-column TSV: subject, predicate, object, label."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            s, p, o = store.names_of((q.subject, q.predicate, q.object))
            fh.write(f"{s}\t{p}\t{o}\t{q.label}\n")


def read_queries(path: str | Path, store: TripleStore) -> list[LabeledTriple]:
    """Read a 4-column query TSV back into id-level labeled triples."""
    out: list[LabeledTriple] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"{path}: line {line_no}: expected 4 TAB-separated fields")
        s, p, o, label = fields
        sid = store.entities.id_of(s)
        oid = store.entities.id_of(o)
        pid = store.relations.id_of(p)
        if sid is None or oid is None or pid is None:
            raise ValueError(f"{path}: line {line_no}: name not in vocabulary")
        out.append(LabeledTriple(sid, pid, oid, 1 if int(label) > 0 else -1))
    return out

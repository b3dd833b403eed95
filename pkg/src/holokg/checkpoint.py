"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..7    magic b"HOLOKGCP"
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..19  uint64 header length H
    bytes 20..20+H-1   UTF-8 JSON header
    remainder     parameter blocks, row-major float64, concatenated in
                  the order listed under the header's "blocks" key

The JSON header records the model spec (family, dim, ermlp_hidden,
transe_norm), entity/relation counts, SHA-256 hashes of the newline-
joined vocabulary names, and for each block its name and shape. The
hashes let a consumer refuse parameters trained against a different
vocabulary without shipping the vocabulary itself.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .data import Vocab
from .exceptions import CheckpointError, VocabularyMismatch
from .models import EmbeddingSet, ModelSpec, check_params

MAGIC = b"HOLOKGCP"
VERSION = 1


def vocab_hash(vocab: Vocab) -> str:
    return hashlib.sha256("\n".join(vocab.names).encode("utf-8")).hexdigest()


def save_checkpoint(
    path: str | Path,
    spec: ModelSpec,
    params: EmbeddingSet,
    entity_vocab: Vocab,
    relation_vocab: Vocab,
) -> None:
    check_params(spec, params)
    blocks = params.blocks()
    header = {
        "family": spec.family,
        "dim": spec.dim,
        "ermlp_hidden": spec.ermlp_hidden,
        "transe_norm": spec.transe_norm,
        "n_entities": params.n_entities,
        "n_relations": params.n_relations,
        "entity_vocab_sha256": vocab_hash(entity_vocab),
        "relation_vocab_sha256": vocab_hash(relation_vocab),
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks.items()],
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for _, arr in blocks.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, EmbeddingSet, dict]:
    """Read a checkpoint; returns (spec, params, header)."""
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a holokg checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", raw, 12)
    try:
        header = json.loads(raw[20 : 20 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint header: {exc}") from exc
    offset = 20 + header_len
    arrays: dict[str, np.ndarray] = {}
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated checkpoint (block {block['name']})")
        arrays[block["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after parameter blocks")
    spec = ModelSpec(
        family=header["family"],
        dim=header["dim"],
        ermlp_hidden=header.get("ermlp_hidden", 0),
        transe_norm=header.get("transe_norm", "l2"),
    )
    params = EmbeddingSet(
        entities=arrays["entities"],
        relations=arrays["relations"],
        proj=arrays.get("proj"),
        out=arrays.get("out"),
    )
    check_params(spec, params)
    return spec, params, header


def verify_vocabularies(header: dict, entity_vocab: Vocab, relation_vocab: Vocab) -> None:
    """Raise VocabularyMismatch (with both hashes) when data and checkpoint disagree."""
    got_e, got_r = vocab_hash(entity_vocab), vocab_hash(relation_vocab)
    if got_e != header["entity_vocab_sha256"]:
        raise VocabularyMismatch(
            f"entity vocabulary mismatch: checkpoint {header['entity_vocab_sha256']}, data {got_e}"
        )
    if got_r != header["relation_vocab_sha256"]:
        raise VocabularyMismatch(
            f"relation vocabulary mismatch: checkpoint {header['relation_vocab_sha256']}, data {got_r}"
        )

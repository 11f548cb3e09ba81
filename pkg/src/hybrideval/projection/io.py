"""Embedding and projection file interchange.

Embeddings: CSV with header ``id,label,e0,...,e{d-1}`` plus a JSON sidecar
{n, d, class_names, producer, checksum} next to it (same name, .json); the
checksum is the SHA-256 of the CSV bytes. Projections: CSV with header
``id,label,x,y`` plus a diagnostics JSON {seed, params, final_loss}.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from .._fsutil import write_bytes_atomic, write_json_atomic
from ._types import EmbeddingSet, ProjectionResult


class InterchangeError(ValueError):
    pass


def sidecar_path(csv_path) -> str:
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + ".json"


def write_embeddings(path, emb: EmbeddingSet, class_names, producer: str = "hybrideval") -> None:
    header = ["id", "label"] + [f"e{i}" for i in range(emb.dim)]
    lines = [",".join(header)]
    for i in range(emb.n):
        vec = ",".join(f"{v:.17g}" for v in emb.vectors[i])
        lines.append(f"{emb.ids[i]},{int(emb.labels[i])},{vec}")
    data = ("\n".join(lines) + "\n").encode("utf-8")
    write_bytes_atomic(path, data)
    write_json_atomic(
        sidecar_path(path),
        {
            "n": emb.n,
            "d": emb.dim,
            "class_names": list(class_names),
            "producer": producer,
            "checksum": hashlib.sha256(data).hexdigest(),
        },
    )


def read_embeddings(path) -> tuple[EmbeddingSet, tuple[str, ...], dict]:
    """Load an embeddings CSV, validating it against its sidecar."""
    side = sidecar_path(path)
    if not os.path.exists(side):
        raise InterchangeError(f"missing sidecar {side}")
    with open(side, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    for key in ("n", "d", "class_names", "checksum"):
        if key not in meta:
            raise InterchangeError(f"sidecar missing field {key!r}")

    with open(path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != meta["checksum"]:
        raise InterchangeError(
            f"embeddings checksum mismatch: sidecar {meta['checksum']}, file {digest}"
        )

    reader = csv.reader(raw.decode("utf-8").splitlines())
    header = next(reader, None)
    if header is None or header[:2] != ["id", "label"]:
        raise InterchangeError(f"bad embeddings header: {header!r}")
    d = len(header) - 2
    if d != meta["d"]:
        raise InterchangeError(f"sidecar d={meta['d']} but header has {d} columns")

    ids, labels, rows = [], [], []
    for row in reader:
        if not row:
            continue
        if len(row) != 2 + d:
            raise InterchangeError(f"row for id {row[0]!r} has {len(row)} fields, expected {2 + d}")
        ids.append(row[0])
        labels.append(int(row[1]))
        rows.append([float(v) for v in row[2:]])
    if len(ids) != meta["n"]:
        raise InterchangeError(f"sidecar n={meta['n']} but file has {len(ids)} rows")

    emb = EmbeddingSet(vectors=np.array(rows, dtype=np.float64), labels=np.array(labels), ids=tuple(ids))
    return emb, tuple(meta["class_names"]), meta


def write_projection(path, result: ProjectionResult, ids, labels) -> None:
    coords = result.coords
    if coords.shape[1] != 2:
        raise InterchangeError("projection CSV carries 2D coordinates only")
    lines = ["id,label,x,y"]
    for i, id_ in enumerate(ids):
        lines.append(
            f"{id_},{int(labels[i])},{coords[i, 0]:.17g},{coords[i, 1]:.17g}"
        )
    write_bytes_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))
    write_json_atomic(
        sidecar_path(path),
        {
            "seed": result.seed,
            "params": result.params_echo,
            "final_loss": result.final_loss(),
            "diagnostics": result.diagnostics,
        },
    )


def read_projection(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Load a projection CSV as (ids, labels, N x 2 coords)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "label", "x", "y"]:
            raise InterchangeError(f"bad projection header: {header!r}")
        ids, labels, coords = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise InterchangeError(f"row for id {row[0]!r} has {len(row)} fields, expected 4")
            ids.append(row[0])
            labels.append(int(row[1]))
            coords.append((float(row[2]), float(row[3])))
    return tuple(ids), np.array(labels, dtype=np.int64), np.array(coords, dtype=np.float64)

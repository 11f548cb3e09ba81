"""Treatment manifest construction for ratio-controlled real/synthetic training sets.

Five treatments vary how real and synthetic images are mixed:

    H0  real only, three-way split (validation share mirrors the test share)
    H1  synthetic only; the usable real images are kept out of train/val
    H2  real + synthetic 1:1
    H3  real + synthetic 1:10
    H4  H3 plus an unknown class drawn from a distractor pool

The test split is drawn once per class from the real pool and is byte
identical across all treatments built from the same pools and seed. Sampling
uses numpy's PCG64 generator with one stream per purpose (real selection,
test draw, val draw, synthetic draw, unknown draw); pools are normalized by
id sort before any draw, so build_treatment is a pure function of
(pools, config). Fractional counts round to the nearest integer with ties
to even.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

KNOWN_CLASSES = ("fungal", "healthy", "virus")
UNKNOWN_CLASS = "unknown"
CLASS_ORDER = KNOWN_CLASSES + (UNKNOWN_CLASS,)
SOURCES = ("real", "synthetic", "distractor")
SPLITS = ("train", "val", "test")
TREATMENTS = ("H0", "H1", "H2", "H3", "H4")

# per treatment: synthetic images per usable real image, whether usable real
# images join train/val, whether the unknown class is added
TREATMENT_RULES = {
    "H0": (0, True, False),
    "H1": (1, False, False),
    "H2": (1, True, False),
    "H3": (10, True, False),
    "H4": (10, True, True),
}


class SizingError(ValueError):
    """A split cannot give every part at least one item."""


class PoolDeficiencyError(ValueError):
    """A pool lacks the images required for a balanced class."""

    def __init__(self, pool: str, class_label: str, needed: int, available: int):
        self.pool = pool
        self.class_label = class_label
        self.needed = needed
        self.available = available
        super().__init__(
            f"{pool} pool has {available} '{class_label}' images, {needed} required"
        )


class DuplicateIdError(ValueError):
    """The same id appears more than once across the supplied pools."""


@dataclass(frozen=True)
class ImageEntry:
    id: str
    path: str
    class_label: str
    source: str

    def __post_init__(self):
        if self.class_label not in CLASS_ORDER:
            raise ValueError(f"unknown class label {self.class_label!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if (self.class_label == UNKNOWN_CLASS) != (self.source == "distractor"):
            raise ValueError(
                f"entry {self.id}: class 'unknown' and source 'distractor' imply each other"
            )


@dataclass(frozen=True)
class TreatmentConfig:
    treatment: str
    real_per_class: int
    synth_ratio: int
    include_unknown: bool
    seed: int
    test_fraction: float = 0.15
    val_fraction_of_remainder: float = 0.20

    def __post_init__(self):
        if self.treatment not in TREATMENTS:
            raise ValueError(f"unknown treatment {self.treatment!r}")
        if self.treatment == "H0" and self.synth_ratio != 0:
            raise ValueError("H0 requires synth_ratio=0")
        if self.treatment == "H4" and not self.include_unknown:
            raise ValueError("H4 requires include_unknown=True")
        if self.synth_ratio < 0:
            raise ValueError("synth_ratio must be non-negative")
        if self.real_per_class <= 0:
            raise ValueError("real_per_class must be positive")
        for name in ("test_fraction", "val_fraction_of_remainder"):
            f = getattr(self, name)
            if not (0.0 < f < 1.0):
                raise ValueError(f"{name} must lie in (0, 1)")

    @property
    def real_in_trainval(self) -> bool:
        return TREATMENT_RULES[self.treatment][1]

    def to_dict(self) -> dict:
        return {
            "treatment": self.treatment,
            "real_per_class": self.real_per_class,
            "synth_ratio": self.synth_ratio,
            "include_unknown": self.include_unknown,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "val_fraction_of_remainder": self.val_fraction_of_remainder,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreatmentConfig":
        return cls(**d)


def default_config(treatment: str, seed: int, real_per_class: int = 750) -> TreatmentConfig:
    """The paper-scale configuration for one of H0-H4."""
    ratio, _, unknown = TREATMENT_RULES[treatment]
    return TreatmentConfig(
        treatment=treatment,
        real_per_class=real_per_class,
        synth_ratio=ratio,
        include_unknown=unknown,
        seed=seed,
    )


@dataclass(frozen=True)
class TreatmentManifest:
    config: TreatmentConfig
    entries: tuple  # of (ImageEntry, split) pairs, sorted by (split, class, id)
    checksum: str

    def ids_for_split(self, split: str) -> list[str]:
        return [e.id for e, s in self.entries if s == split]

    def class_names(self) -> tuple[str, ...]:
        present = {e.class_label for e, _ in self.entries}
        return tuple(c for c in CLASS_ORDER if c in present)

    def counts(self) -> dict[str, dict[str, int]]:
        """split -> class -> entry count."""
        out: dict[str, dict[str, int]] = {s: {} for s in SPLITS}
        for e, s in self.entries:
            out[s][e.class_label] = out[s].get(e.class_label, 0) + 1
        return out

    def test_checksum(self) -> str:
        test = [(e, s) for e, s in self.entries if s == "test"]
        return hashlib.sha256(_canonical_entry_bytes(test)).hexdigest()


def round_half_even(x: float) -> int:
    """Nearest integer, ties to even (the Table 1 rounding rule)."""
    return int(round(x))


def split_counts(
    pool_size: int,
    test_fraction: float | None,
    val_fraction: float,
    mode: Literal["three_way", "two_way"],
) -> tuple[int, int, int]:
    """Resolve (train, val, test) counts for one class pool.

    three_way: test and val are both rounded shares of the total, train is
    the remainder. two_way: no test here (it was already set aside), val is
    a rounded share of the total.
    """
    if pool_size <= 0:
        raise SizingError("pool_size must be positive")
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie in (0, 1)")
    if mode == "three_way":
        if test_fraction is None or not (0.0 < test_fraction < 1.0):
            raise ValueError("test_fraction must lie in (0, 1)")
        test = round_half_even(pool_size * test_fraction)
        val = round_half_even(pool_size * val_fraction)
        train = pool_size - test - val
        if min(train, val, test) < 1:
            raise SizingError(
                f"pool of {pool_size} gives train/val/test = {train}/{val}/{test}; "
                "every split needs at least one item"
            )
        return train, val, test
    elif mode == "two_way":
        val = round_half_even(pool_size * val_fraction)
        train = pool_size - val
        if min(train, val) < 1:
            raise SizingError(
                f"pool of {pool_size} gives train/val = {train}/{val}; "
                "both splits need at least one item"
            )
        return train, val, 0
    raise ValueError(f"unknown mode {mode!r}")


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, purpose])))


_REAL, _TEST, _VAL, _SYNTH, _UNKNOWN = range(5)


def _sorted_class_entries(pool: Sequence[ImageEntry], class_label: str, source: str):
    return sorted(
        (e for e in pool if e.class_label == class_label and e.source == source),
        key=lambda e: e.id,
    )


def _sample(gen: np.random.Generator, entries: list[ImageEntry], k: int) -> list[ImageEntry]:
    # index-based draw over the id-sorted list; selection order discarded
    if k == 0:
        return []
    idx = gen.choice(len(entries), size=k, replace=False)
    chosen = set(int(i) for i in idx)
    return [e for i, e in enumerate(entries) if i in chosen]


def _check_unique_ids(pools: Iterable[Sequence[ImageEntry]]):
    seen: dict[str, str] = {}
    dupes = []
    for pool in pools:
        for e in pool:
            if e.id in seen:
                dupes.append(e.id)
            seen[e.id] = e.source
    if dupes:
        raise DuplicateIdError(f"duplicate ids across pools: {sorted(set(dupes))[:10]}")


def _canonical_entry_bytes(entries) -> bytes:
    rows = [
        {"id": e.id, "path": e.path, "class": e.class_label, "source": e.source, "split": s}
        for e, s in entries
    ]
    return json.dumps(rows, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _entry_sort_key(pair):
    e, s = pair
    return (SPLITS.index(s), CLASS_ORDER.index(e.class_label), e.id)


def build_treatment(
    config: TreatmentConfig,
    real_pool: Sequence[ImageEntry],
    synth_pool: Sequence[ImageEntry],
    distractor_pool: Sequence[ImageEntry] = (),
) -> TreatmentManifest:
    """Deterministically resolve one treatment into a split manifest.

    The same pools and seed always give the same manifest; in particular the
    per-class test draw depends only on (real pool, seed, real_per_class,
    test_fraction), so it is shared by all treatments.
    """
    _check_unique_ids([real_pool, synth_pool, distractor_pool])

    cfg = config
    test_n = round_half_even(cfg.real_per_class * cfg.test_fraction)
    if test_n < 1:
        raise SizingError("test split would be empty; raise real_per_class or test_fraction")
    usable_n = cfg.real_per_class - test_n
    synth_n = usable_n * cfg.synth_ratio

    if cfg.treatment == "H0":
        # paper baseline: three-way split where val mirrors the test share
        train_n, val_n, _ = split_counts(
            cfg.real_per_class, cfg.test_fraction, cfg.test_fraction, "three_way"
        )
        pool_n = usable_n
    else:
        pool_n = (usable_n if cfg.real_in_trainval else 0) + synth_n
        train_n, val_n, _ = split_counts(
            pool_n, None, cfg.val_fraction_of_remainder, "two_way"
        )

    gen_real = _stream(cfg.seed, _REAL)
    gen_test = _stream(cfg.seed, _TEST)
    gen_val = _stream(cfg.seed, _VAL)
    gen_synth = _stream(cfg.seed, _SYNTH)
    gen_unknown = _stream(cfg.seed, _UNKNOWN)

    entries: list[tuple[ImageEntry, str]] = []

    for class_label in KNOWN_CLASSES:
        real_c = _sorted_class_entries(real_pool, class_label, "real")
        if len(real_c) < cfg.real_per_class:
            raise PoolDeficiencyError("real", class_label, cfg.real_per_class, len(real_c))
        base = _sample(gen_real, real_c, cfg.real_per_class)

        test_entries = _sample(gen_test, base, test_n)
        test_ids = {e.id for e in test_entries}
        usable = [e for e in base if e.id not in test_ids]
        entries.extend((e, "test") for e in test_entries)

        trainval: list[ImageEntry] = []
        if cfg.real_in_trainval:
            trainval.extend(usable)
        if synth_n > 0:
            synth_c = _sorted_class_entries(synth_pool, class_label, "synthetic")
            if len(synth_c) < synth_n:
                raise PoolDeficiencyError("synthetic", class_label, synth_n, len(synth_c))
            trainval.extend(_sample(gen_synth, synth_c, synth_n))
        trainval.sort(key=lambda e: e.id)
        assert len(trainval) == pool_n

        val_entries = _sample(gen_val, trainval, val_n)
        val_ids = {e.id for e in val_entries}
        entries.extend((e, "val") for e in val_entries)
        entries.extend((e, "train") for e in trainval if e.id not in val_ids)

    if cfg.include_unknown:
        # unknown gets the same train/val totals as each known class so the
        # training set stays balanced; it contributes nothing to test
        unknown_pool = _sorted_class_entries(distractor_pool, UNKNOWN_CLASS, "distractor")
        unknown_n = pool_n
        if len(unknown_pool) < unknown_n:
            raise PoolDeficiencyError("distractor", UNKNOWN_CLASS, unknown_n, len(unknown_pool))
        chosen = _sample(gen_unknown, unknown_pool, unknown_n)
        val_entries = _sample(gen_unknown, chosen, val_n)
        val_ids = {e.id for e in val_entries}
        entries.extend((e, "val") for e in val_entries)
        entries.extend((e, "train") for e in chosen if e.id not in val_ids)

    entries.sort(key=_entry_sort_key)
    checksum = hashlib.sha256(_canonical_entry_bytes(entries)).hexdigest()
    return TreatmentManifest(config=cfg, entries=tuple(entries), checksum=checksum)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    ids: tuple = ()


def validate_manifest(manifest: TreatmentManifest) -> list[Violation]:
    """Check every manifest invariant; violations are data, not failures."""
    out: list[Violation] = []
    cfg = manifest.config

    seen: dict[str, str] = {}
    for e, s in manifest.entries:
        if e.id in seen:
            rule = "duplicate-across-splits" if seen[e.id] != s else "duplicate-id"
            out.append(Violation(rule, f"id {e.id} appears in {seen[e.id]} and {s}", (e.id,)))
        seen[e.id] = s

    bad_test = [e.id for e, s in manifest.entries if s == "test" and e.source != "real"]
    if bad_test:
        out.append(
            Violation("source-rule", "test entries must all be real", tuple(bad_test))
        )

    if not cfg.real_in_trainval:
        bad_real = [
            e.id for e, s in manifest.entries if s != "test" and e.source == "real"
        ]
        if bad_real:
            out.append(
                Violation(
                    "source-rule",
                    f"{cfg.treatment} excludes real images from train/val",
                    tuple(bad_real),
                )
            )

    for e, _ in manifest.entries:
        if (e.class_label == UNKNOWN_CLASS) != (e.source == "distractor"):
            out.append(
                Violation(
                    "source-rule",
                    f"id {e.id}: class 'unknown' and source 'distractor' imply each other",
                    (e.id,),
                )
            )

    counts = manifest.counts()
    for split in SPLITS:
        known = {c: counts[split].get(c, 0) for c in KNOWN_CLASSES}
        if len(set(known.values())) > 1:
            out.append(
                Violation(
                    "balance",
                    f"{split} split is unbalanced across classes: {known}",
                    tuple(sorted(known)),
                )
            )

    if cfg.synth_ratio == 0:
        synth = [e.id for e, _ in manifest.entries if e.source == "synthetic"]
        if synth:
            out.append(
                Violation("config", "synth_ratio=0 manifest contains synthetic entries", tuple(synth))
            )
    if not cfg.include_unknown:
        unknown = [e.id for e, _ in manifest.entries if e.class_label == UNKNOWN_CLASS]
        if unknown:
            out.append(
                Violation("config", "include_unknown=False manifest contains unknown entries", tuple(unknown))
            )

    expected = hashlib.sha256(_canonical_entry_bytes(manifest.entries)).hexdigest()
    if expected != manifest.checksum:
        out.append(
            Violation("checksum", f"stored {manifest.checksum} != computed {expected}")
        )
    return out


def manifest_to_dict(manifest: TreatmentManifest) -> dict:
    return {
        "treatment": manifest.config.treatment,
        "seed": manifest.config.seed,
        "config": manifest.config.to_dict(),
        "entries": [
            {"id": e.id, "path": e.path, "class": e.class_label, "source": e.source, "split": s}
            for e, s in manifest.entries
        ],
        "checksum": manifest.checksum,
    }


def manifest_from_dict(d: dict) -> TreatmentManifest:
    cfg = TreatmentConfig.from_dict(d["config"])
    entries = tuple(
        (ImageEntry(r["id"], r["path"], r["class"], r["source"]), r["split"])
        for r in d["entries"]
    )
    return TreatmentManifest(config=cfg, entries=entries, checksum=d["checksum"])


def write_manifest(manifest: TreatmentManifest, path) -> None:
    from ._fsutil import write_text_atomic

    write_text_atomic(path, json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> TreatmentManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return manifest_from_dict(json.load(fh))


def load_pool(path, source: str) -> list[ImageEntry]:
    """Load a pool from a directory tree or a JSON listing.

    Directories are scanned as <pool>/<class>/<file> for real and synthetic
    pools; distractor pools may also be flat (every file becomes 'unknown').
    JSON listings are [{id, path, class, source}, ...]; ids default to the
    path when omitted. Scanned ids are prefixed with the source so pools with
    identical layouts cannot collide.
    """
    path = os.fspath(path)
    if os.path.isfile(path):
        with open(path, "r", encoding="utf-8") as fh:
            rows = json.load(fh)
        return [
            ImageEntry(
                id=r.get("id", r["path"]),
                path=r["path"],
                class_label=r.get("class", UNKNOWN_CLASS if source == "distractor" else None),
                source=r.get("source", source),
            )
            for r in rows
        ]
    entries: list[ImageEntry] = []
    if source == "distractor":
        classes = [UNKNOWN_CLASS]
    else:
        classes = [d for d in sorted(os.listdir(path)) if os.path.isdir(os.path.join(path, d))]
    for class_label in classes:
        class_dir = os.path.join(path, class_label) if class_label != UNKNOWN_CLASS else path
        if not os.path.isdir(class_dir):
            continue
        for root, _, files in os.walk(class_dir):
            for name in sorted(files):
                rel = os.path.relpath(os.path.join(root, name), path)
                entries.append(
                    ImageEntry(
                        id=f"{source}:{rel}",
                        path=os.path.join(path, rel),
                        class_label=class_label,
                        source=source,
                    )
                )
    entries.sort(key=lambda e: e.id)
    return entries

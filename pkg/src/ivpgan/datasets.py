"""Interaction tables: loading, entity filtering, CV fold assignment, featurization."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chemgraph import SmilesError, parse_smiles
from .corpus import DRUG_LIKE_SMILES
from .fingerprint import FingerprintVector, ecfp
from .protfeat import AMINO_ACIDS, PSC_DIM, SequenceError, aac, psc

log = logging.getLogger(__name__)

DEFAULT_COLUMNS = {
    "compound_id": "compound_id",
    "smiles": "smiles",
    "target_id": "target_id",
    "sequence": "sequence",
    "affinity": "affinity",
}
SCHEMES = ("warm", "cold_drug", "cold_target")


class SchemaError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class InteractionRecord:
    compound_id: str
    smiles: str
    target_id: str
    sequence: str
    affinity: float

    def __post_init__(self):
        if not self.compound_id or not self.target_id:
            raise ValueError("compound_id and target_id must be non-empty")
        if not math.isfinite(self.affinity):
            raise ValueError(f"non-finite affinity for ({self.compound_id}, {self.target_id})")


@dataclass
class InteractionTable:
    records: list[InteractionRecord]
    duplicates: int = 0

    def __post_init__(self):
        self.compound_rows: dict[str, list[int]] = {}
        self.target_rows: dict[str, list[int]] = {}
        for i, r in enumerate(self.records):
            self.compound_rows.setdefault(r.compound_id, []).append(i)
            self.target_rows.setdefault(r.target_id, []).append(i)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def compounds(self) -> list[str]:
        return list(self.compound_rows)

    @property
    def targets(self) -> list[str]:
        return list(self.target_rows)

    @property
    def affinities(self) -> np.ndarray:
        return np.array([r.affinity for r in self.records], dtype=np.float64)

    def pairs(self) -> list[tuple[str, str]]:
        """(smiles, sequence) per record, the estimator input format."""
        return [(r.smiles, r.sequence) for r in self.records]

    def subset(self, rows) -> InteractionTable:
        return InteractionTable([self.records[i] for i in rows])

    def summary(self) -> dict:
        return {"records": len(self), "compounds": len(self.compound_rows), "targets": len(self.target_rows)}


def load_table(path, columns: dict | None = None) -> InteractionTable:
    """Read a CSV interaction table; ``columns`` maps field name to header name."""
    mapping = {**DEFAULT_COLUMNS, **(columns or {})}
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or []
        for fieldname, col in mapping.items():
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r} (for {fieldname})")
        records = []
        for lineno, row in enumerate(reader, start=2):
            raw = row[mapping["affinity"]]
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise SchemaError(f"{path}: row {lineno}: unparseable affinity {raw!r}") from None
            try:
                records.append(
                    InteractionRecord(
                        row[mapping["compound_id"]].strip(),
                        row[mapping["smiles"]].strip(),
                        row[mapping["target_id"]].strip(),
                        row[mapping["sequence"]].strip(),
                        value,
                    )
                )
            except ValueError as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from None
    pairs = Counter((r.compound_id, r.target_id) for r in records)
    dup = sum(c - 1 for c in pairs.values() if c > 1)
    if dup:
        warnings.warn(f"{path}: {dup} duplicate (compound, target) rows retained", stacklevel=2)
    return InteractionTable(records, duplicates=dup)


def write_table(table: InteractionTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(DEFAULT_COLUMNS))
        for r in table.records:
            writer.writerow([r.compound_id, r.smiles, r.target_id, r.sequence, repr(r.affinity)])


def apply_filter_threshold(table: InteractionTable, t: int, single_pass: bool = False):
    """Drop compounds and targets with at most ``t`` samples.

    Sweeps repeat until no entity falls at or below the threshold, unless
    ``single_pass`` is set. Returns (filtered table, removal report).
    """
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    records = list(table.records)
    removed_compounds: list[str] = []
    removed_targets: list[str] = []
    sweeps = 0
    while True:
        sweeps += 1
        cc = Counter(r.compound_id for r in records)
        tc = Counter(r.target_id for r in records)
        bad_c = sorted(c for c, n in cc.items() if n <= t)
        bad_t = sorted(p for p, n in tc.items() if n <= t)
        if not bad_c and not bad_t:
            break
        removed_compounds += bad_c
        removed_targets += bad_t
        bad_c, bad_t = set(bad_c), set(bad_t)
        records = [r for r in records if r.compound_id not in bad_c and r.target_id not in bad_t]
        if single_pass:
            break
    out = InteractionTable(records)
    if not records:
        warnings.warn(f"filter threshold {t} removed every record", stacklevel=2)
    report = {
        "threshold": t,
        "single_pass": single_pass,
        "sweeps": sweeps,
        "removed_compounds": removed_compounds,
        "removed_targets": removed_targets,
        "records_before": len(table),
        "records_after": len(out),
        **{f"{k}_after": v for k, v in out.summary().items() if k != "records"},
    }
    return out, report


@dataclass
class FoldAssignment:
    scheme: str
    n_folds: int
    seed: int
    labels: np.ndarray

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.labels != fold)

    def val_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.labels == fold)

    def fold_sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.n_folds).tolist()

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "n_folds": self.n_folds, "seed": self.seed, "labels": self.labels.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> FoldAssignment:
        return cls(d["scheme"], int(d["n_folds"]), int(d["seed"]), np.asarray(d["labels"], dtype=np.int64))


def split(table: InteractionTable, scheme: str = "warm", n_folds: int = 5, seed: int = 0) -> FoldAssignment:
    """Assign every record to one of ``n_folds`` folds.

    warm deals shuffled records round-robin; cold_drug / cold_target deal
    shuffled compounds / targets and records follow their entity.
    """
    if scheme not in SCHEMES:
        raise SplitError(f"unknown split scheme {scheme!r}; expected one of {SCHEMES}")
    if n_folds < 2:
        raise SplitError(f"n_folds must be >= 2, got {n_folds}")
    rng = np.random.default_rng(seed)
    labels = np.empty(len(table), dtype=np.int64)
    if scheme == "warm":
        if len(table) < n_folds:
            raise SplitError(f"{len(table)} records cannot fill {n_folds} folds")
        perm = rng.permutation(len(table))
        labels[perm] = np.arange(len(table)) % n_folds
    else:
        groups = table.compound_rows if scheme == "cold_drug" else table.target_rows
        entities = sorted(groups)
        if len(entities) < n_folds:
            kind = "compounds" if scheme == "cold_drug" else "targets"
            raise SplitError(f"{scheme} needs >= {n_folds} distinct {kind}, table has {len(entities)}")
        for i, j in enumerate(rng.permutation(len(entities))):
            labels[groups[entities[j]]] = i % n_folds
    return FoldAssignment(scheme, n_folds, seed, labels)


# ---------------------------------------------------------------------------
# feature cache
#
# <dir>/manifest.json   config, config hash, entity counts
# <dir>/compounds.csv   compound_id, smiles, ecfp (hex, MSB-first per byte)
# <dir>/targets.csv     target_id, 8420 PSC values


@dataclass
class FeatureCache:
    config: dict
    compounds: dict[str, tuple[str, FingerprintVector]] = field(default_factory=dict)
    targets: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "compounds.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["compound_id", "smiles", "ecfp"])
            for cid in sorted(self.compounds):
                smi, fp = self.compounds[cid]
                w.writerow([cid, smi, fp.to_hex()])
        with open(d / "targets.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["target_id", *(f"psc{i}" for i in range(PSC_DIM))])
            for tid in sorted(self.targets):
                w.writerow([tid, *map(repr, self.targets[tid].tolist())])
        manifest = {
            "config": self.config,
            "config_hash": self.config_hash,
            "n_compounds": len(self.compounds),
            "n_targets": len(self.targets),
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> FeatureCache:
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        n_bits = int(manifest["config"]["n_bits"])
        diameter = int(manifest["config"]["diameter"])
        cache = cls(manifest["config"])
        with open(d / "compounds.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                cache.compounds[row["compound_id"]] = (
                    row["smiles"],
                    FingerprintVector.from_hex(row["ecfp"], n_bits, diameter),
                )
        with open(d / "targets.csv", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                cache.targets[row[0]] = np.array([float(x) for x in row[1:]], dtype=np.float64)
        return cache


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def read_manifest(directory) -> dict | None:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


def featurize_table(
    table: InteractionTable,
    diameter: int = 8,
    n_bits: int = 1024,
    psc_scale: str = "fraction",
    cache_dir=None,
    skip_bad: bool = False,
):
    """Featurize each distinct compound and target once.

    Returns (cache, kept table, report). With ``cache_dir`` an existing cache
    whose config hash matches is reused and only missing entities are
    computed; a mismatching cache is rebuilt. Unusable records raise unless
    ``skip_bad`` is set, in which case they are dropped and counted.
    """
    config = {"diameter": diameter, "n_bits": n_bits, "psc_scale": psc_scale}
    cache = FeatureCache(config)
    if cache_dir is not None:
        manifest = read_manifest(cache_dir)
        if manifest is not None and manifest.get("config_hash") == config_hash(config):
            cache = FeatureCache.load(cache_dir)
    computed_c = computed_t = 0
    failures: dict[int, str] = {}
    bad_compounds: dict[str, str] = {}
    bad_targets: dict[str, str] = {}
    for i, r in enumerate(table.records):
        if r.compound_id not in cache.compounds and r.compound_id not in bad_compounds:
            try:
                cache.compounds[r.compound_id] = (r.smiles, ecfp(parse_smiles(r.smiles), diameter, n_bits))
                computed_c += 1
            except SmilesError as exc:
                bad_compounds[r.compound_id] = f"SMILES: {exc}"
        if r.target_id not in cache.targets and r.target_id not in bad_targets:
            try:
                cache.targets[r.target_id] = psc(r.sequence, psc_scale)
                computed_t += 1
            except SequenceError as exc:
                bad_targets[r.target_id] = f"sequence: {exc}"
        reason = bad_compounds.get(r.compound_id) or bad_targets.get(r.target_id)
        if reason:
            failures[i] = reason
    if failures and not skip_bad:
        first = next(iter(failures.items()))
        raise ValueError(f"{len(failures)} unusable records (first: row {first[0]}: {first[1]})")
    kept = table.subset([i for i in range(len(table)) if i not in failures]) if failures else table
    for cid in bad_compounds:
        cache.compounds.pop(cid, None)
    for tid in bad_targets:
        cache.targets.pop(tid, None)
    if cache_dir is not None and (computed_c or computed_t or read_manifest(cache_dir) is None):
        cache.save(cache_dir)
    report = {
        "config": config,
        "config_hash": cache.config_hash,
        "records": len(table),
        "records_kept": len(kept),
        "records_dropped": len(failures),
        "failures": [{"row": i, "reason": why} for i, why in failures.items()],
        "compounds_computed": computed_c,
        "targets_computed": computed_t,
        "compounds_cached": len(cache.compounds),
        "targets_cached": len(cache.targets),
    }
    return cache, kept, report


# ---------------------------------------------------------------------------
# synthetic tables


def _synthetic_smiles(n: int) -> list[str]:
    base = list(DRUG_LIKE_SMILES)
    out = base[:n]
    extra = 1
    while len(out) < n:
        for smi in base:
            if len(out) >= n:
                break
            out.append("C" * extra + smi)
        extra += 1
    return out


def make_synthetic_table(
    n_compounds: int = 10,
    n_targets: int = 10,
    n_samples: int | None = None,
    structure: str = "latent",
    noise: float = 0.0,
    seq_length: tuple[int, int] = (60, 200),
    seed: int = 0,
) -> InteractionTable:
    """Desk-scale stand-in for a benchmark table.

    ``structure="latent"``: affinity = 6 + compound offset + target offset +
    <compound latent, target latent>, with all terms random per entity.
    ``structure="linear"``: affinity is a fixed linear function of the
    compound's ECFP8/1024 bits plus one of the target's amino-acid composition.
    """
    if structure not in ("latent", "linear"):
        raise ValueError(f"unknown structure {structure!r}")
    rng = np.random.default_rng(seed)
    smiles = _synthetic_smiles(n_compounds)
    seqs = set()
    sequences = []
    while len(sequences) < n_targets:
        length = int(rng.integers(seq_length[0], seq_length[1] + 1))
        s = "".join(AMINO_ACIDS[i] for i in rng.integers(0, 20, size=length))
        if s not in seqs:
            seqs.add(s)
            sequences.append(s)
    if structure == "latent":
        c_off = rng.normal(0.0, 0.6, n_compounds)
        t_off = rng.normal(0.0, 0.8, n_targets)
        c_lat = rng.normal(0.0, 0.5, (n_compounds, 3))
        t_lat = rng.normal(0.0, 0.5, (n_targets, 3))
        grid = 6.0 + c_off[:, None] + t_off[None, :] + c_lat @ t_lat.T
    else:
        fps = np.vstack([ecfp(parse_smiles(s), 8, 1024).bits for s in smiles]).astype(np.float64)
        comp = np.vstack([aac(s) for s in sequences])
        w_c = rng.normal(0.0, 1.0, 1024)
        w_t = rng.normal(0.0, 1.0, 20)
        cv = fps @ w_c
        tv = comp @ w_t
        cv = (cv - cv.mean()) / (cv.std() + 1e-12)
        tv = (tv - tv.mean()) / (tv.std() + 1e-12)
        grid = 6.0 + 0.5 * cv[:, None] + 0.5 * tv[None, :]
    pairs = [(c, t) for c in range(n_compounds) for t in range(n_targets)]
    if n_samples is not None and n_samples < len(pairs):
        chosen = np.sort(rng.choice(len(pairs), size=n_samples, replace=False))
        pairs = [pairs[i] for i in chosen]
    records = [
        InteractionRecord(
            f"C{c:04d}",
            smiles[c],
            f"T{t:04d}",
            sequences[t],
            float(grid[c, t] + (rng.normal(0.0, noise) if noise else 0.0)),
        )
        for c, t in pairs
    ]
    return InteractionTable(records)


def cache_dir_override(default):
    """Directory for the feature cache, honoring ``IVPGAN_CACHE_DIR``."""
    return os.environ.get("IVPGAN_CACHE_DIR") or default

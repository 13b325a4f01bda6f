"""Command-line experiment runner: synth-data, featurize, split, train, evaluate.

Every subcommand reads an optional INI config (``--config``) whose keys are
the fields of :class:`ExperimentConfig`, grouped in any sections; any field
can be overridden with ``--field-name``. Output layout under ``output_dir``::

    records.csv                     filtered, featurizable interaction table
    reports/filter.json, featurize.json
    folds/<scheme>_seed<seed>.json
    models/<variant>/<scheme>/seed<s>_fold<f>.ckpt (+ .history.csv)
    models/<variant>/<scheme>/cells.json
    predictions/<variant>/<scheme>/seed<s>_fold<f>.csv
    metrics.json, metrics_table.csv

The feature cache lives in ``output_dir/cache`` unless ``cache_dir`` or the
``IVPGAN_CACHE_DIR`` environment variable says otherwise.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import sys
import traceback
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .advloss import TrainingDiverged, write_history_csv
from .chemgraph import SmilesError
from .datasets import (
    DEFAULT_COLUMNS,
    SCHEMES,
    FeatureCache,
    FoldAssignment,
    apply_filter_threshold,
    cache_dir_override,
    featurize_table,
    load_table,
    make_synthetic_table,
    read_manifest,
    split,
    write_table,
)
from .estimator import IVPGANRegressor, PairFeaturizer
from .metrics import METRICS, MetricError, aggregate
from .netmodels import VARIANTS
from .protfeat import SequenceError

log = logging.getLogger("ivpgan")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UserError(Exception):
    """A problem the operator can fix (bad input, missing prerequisite)."""


@dataclass
class ExperimentConfig:
    # data
    dataset: str = ""
    compound_id_column: str = "compound_id"
    smiles_column: str = "smiles"
    target_id_column: str = "target_id"
    sequence_column: str = "sequence"
    affinity_column: str = "affinity"
    filter_threshold: int = -1  # -1 disables filtering
    filter_single_pass: bool = False
    skip_bad: bool = False
    # features
    diameter: int = 8
    n_bits: int = 1024
    psc_scale: str = "fraction"
    cache_dir: str = ""
    # splits
    schemes: list[str] = field(default_factory=lambda: list(SCHEMES))
    n_folds: int = 5
    seeds: list[int] = field(default_factory=lambda: [0])
    # model
    variants: list[str] = field(default_factory=lambda: ["ivpgan"])
    gconv_widths: list[int] = field(default_factory=lambda: [64, 128])
    gen_hidden: list[int] = field(default_factory=lambda: [2048, 512])
    disc_hidden: list[int] = field(default_factory=lambda: [32, 16])
    # training
    lam: float = 0.1
    k: int = 0  # 0 -> min(5, batch_size - 1)
    include_self: bool = True
    batch_size: int = 32
    lr_gen: float = 1e-4
    lr_disc: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    val_fraction: float = 0.1
    patience: int = 10
    log_eps: float = 1e-7
    # output
    output_dir: str = "ivpgan_out"
    report_r: bool = False

    def validate(self, need_dataset: bool = False) -> None:
        if need_dataset:
            if not self.dataset:
                raise UserError("no dataset given (set dataset in the config or pass --dataset)")
            if not Path(self.dataset).is_file():
                raise UserError(f"dataset not found: {self.dataset}")
        if not self.seeds:
            raise UserError("seeds must be non-empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise UserError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
        for v in self.variants:
            if v not in VARIANTS:
                raise UserError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        if self.n_folds < 2:
            raise UserError("n_folds must be >= 2")
        if self.psc_scale not in ("fraction", "percent"):
            raise UserError(f"psc_scale must be 'fraction' or 'percent', got {self.psc_scale!r}")

    @property
    def columns(self) -> dict:
        return {name: getattr(self, f"{name}_column") for name in DEFAULT_COLUMNS}

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def cache_path(self) -> Path:
        return Path(cache_dir_override(self.cache_dir or str(self.out / "cache")))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = typing.get_type_hints(ExperimentConfig)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(name: str, text: str):
    kind = _FIELD_TYPES[name]
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind in (int, float, str):
            return kind(text.strip())
        item = typing.get_args(kind)[0]
        return [item(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UserError(f"bad value for {name}: {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an INI file (any sections) plus explicit overrides."""
    values: dict = {}
    if path is not None:
        if not Path(path).is_file():
            raise UserError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise UserError(f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = key.replace("-", "_")
                if name not in _FIELD_TYPES:
                    raise UserError(f"{path}: unknown key {key!r} in [{section}]")
                values[name] = _parse_value(name, raw)
    for name, raw in (overrides or {}).items():
        values[name] = _parse_value(name, raw) if isinstance(raw, str) else raw
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# artifact helpers


def _dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _config_comment(config: ExperimentConfig, **extra) -> str:
    return "config: " + json.dumps({"config": config.to_dict(), **extra}, sort_keys=True)


def _read_records(config: ExperimentConfig):
    path = config.out / "records.csv"
    if not path.exists():
        raise UserError(f"{path} not found; run `ivpgan featurize` first")
    return load_table(path)


def _load_cache(config: ExperimentConfig) -> FeatureCache:
    cache_dir = config.cache_path
    manifest = read_manifest(cache_dir)
    if manifest is None:
        raise UserError(f"no feature cache in {cache_dir}; run `ivpgan featurize` with this config first")
    want = {"diameter": config.diameter, "n_bits": config.n_bits, "psc_scale": config.psc_scale}
    if manifest["config"] != want:
        raise UserError(
            f"feature cache in {cache_dir} was built with {manifest['config']}, config asks for {want}; "
            "rerun `ivpgan featurize`"
        )
    return FeatureCache.load(cache_dir)


def _featurizer(config: ExperimentConfig, cache: FeatureCache) -> PairFeaturizer:
    feat = PairFeaturizer(config.diameter, config.n_bits, config.psc_scale)
    return feat.prime(
        {smi: fp.bits for smi, fp in cache.compounds.values()},
        None,
    )


def _prime_targets(feat: PairFeaturizer, table, cache: FeatureCache) -> None:
    feat.prime(None, {r.sequence: cache.targets[r.target_id] for r in table.records})


def _fold_path(config: ExperimentConfig, scheme: str, seed: int) -> Path:
    return config.out / "folds" / f"{scheme}_seed{seed}.json"


def _load_folds(config: ExperimentConfig, scheme: str, seed: int, n_records: int) -> FoldAssignment:
    path = _fold_path(config, scheme, seed)
    if not path.exists():
        raise UserError(f"{path} not found; run `ivpgan split` first")
    fa = FoldAssignment.from_dict(json.loads(path.read_text()))
    if len(fa.labels) != n_records:
        raise UserError(f"{path} covers {len(fa.labels)} records, table has {n_records}; rerun `ivpgan split`")
    return fa


def _cell_dir(config: ExperimentConfig, kind: str, variant: str, scheme: str) -> Path:
    return config.out / kind / variant / scheme


def _estimator(config: ExperimentConfig, variant: str, seed: int) -> IVPGANRegressor:
    return IVPGANRegressor(
        variant=variant,
        diameter=config.diameter,
        n_bits=config.n_bits,
        psc_scale=config.psc_scale,
        gconv_widths=tuple(config.gconv_widths),
        gen_hidden=tuple(config.gen_hidden),
        disc_hidden=tuple(config.disc_hidden),
        lam=config.lam,
        k=config.k or None,
        include_self=config.include_self,
        batch_size=config.batch_size,
        lr_gen=config.lr_gen,
        lr_disc=config.lr_disc,
        weight_decay=config.weight_decay,
        epochs=config.epochs,
        val_fraction=config.val_fraction,
        patience=config.patience,
        log_eps=config.log_eps,
        random_state=seed,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(config: ExperimentConfig, args) -> int:
    table = make_synthetic_table(
        args.n_compounds, args.n_targets, args.n_samples, args.structure, args.noise, seed=args.seed
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(table, out)
    print(f"wrote {out}: {table.summary()}")
    return EXIT_OK


def cmd_featurize(config: ExperimentConfig, args=None) -> int:
    config.validate(need_dataset=True)
    table = load_table(config.dataset, config.columns)
    reports = config.out / "reports"
    if config.filter_threshold >= 0:
        table, filter_report = apply_filter_threshold(table, config.filter_threshold, config.filter_single_pass)
        _dump_json(reports / "filter.json", {"config": config.to_dict(), **filter_report})
    try:
        _, kept, report = featurize_table(
            table, config.diameter, config.n_bits, config.psc_scale, config.cache_path, config.skip_bad
        )
    except ValueError as exc:
        raise UserError(f"{exc}; fix the input or pass --skip-bad") from None
    if len(kept) == 0:
        raise UserError("no records left after filtering and featurization")
    config.out.mkdir(parents=True, exist_ok=True)
    write_table(kept, config.out / "records.csv")
    _dump_json(reports / "featurize.json", {"config": config.to_dict(), "cache_dir": str(config.cache_path), **report})
    hit = report["compounds_computed"] == 0 and report["targets_computed"] == 0
    print(
        f"records {report['records_kept']}/{report['records']} kept, "
        f"compounds {report['compounds_cached']} ({report['compounds_computed']} computed), "
        f"targets {report['targets_cached']} ({report['targets_computed']} computed)"
        + (", cache hit" if hit else "")
    )
    return EXIT_OK


def cmd_split(config: ExperimentConfig, args=None) -> int:
    config.validate()
    table = _read_records(config)
    for scheme in config.schemes:
        for seed in config.seeds:
            fa = split(table, scheme, config.n_folds, seed)
            _dump_json(_fold_path(config, scheme, seed), {"config": config.to_dict(), **fa.to_dict()})
            print(f"{scheme} seed {seed}: fold sizes {fa.fold_sizes()}")
    return EXIT_OK


def cmd_train(config: ExperimentConfig, args=None) -> int:
    config.validate()
    table = _read_records(config)
    cache = _load_cache(config)
    missing = [r.compound_id for r in table.records if r.compound_id not in cache.compounds]
    missing += [r.target_id for r in table.records if r.target_id not in cache.targets]
    if missing:
        raise UserError(f"feature cache lacks {len(set(missing))} entities (e.g. {missing[0]}); rerun `ivpgan featurize`")
    feat = _featurizer(config, cache)
    _prime_targets(feat, table, cache)
    X = np.array(table.pairs(), dtype=object)
    y = table.affinities
    failures = 0
    for variant in config.variants:
        for scheme in config.schemes:
            cell_dir = _cell_dir(config, "models", variant, scheme)
            cell_dir.mkdir(parents=True, exist_ok=True)
            cells = []
            for seed in config.seeds:
                fa = _load_folds(config, scheme, seed, len(table))
                for fold in range(fa.n_folds):
                    tag = f"seed{seed}_fold{fold}"
                    rows = fa.train_rows(fold)
                    est = _estimator(config, variant, seed)
                    cell = {"variant": variant, "scheme": scheme, "seed": seed, "fold": fold}
                    try:
                        est.fit(X[rows], y[rows], featurizer=feat)
                    except TrainingDiverged as exc:
                        failures += 1
                        cell.update(status="failed", reason=str(exc))
                        _dump_json(cell_dir / f"{tag}.failure.json", {"config": config.to_dict(), **cell, **exc.snapshot})
                        log.warning("%s/%s %s diverged: %s", variant, scheme, tag, exc)
                        cells.append(cell)
                        continue
                    meta = {"config": config.to_dict(), "cell": cell}
                    est.save(cell_dir / f"{tag}.ckpt", meta)
                    write_history_csv(
                        cell_dir / f"{tag}.history.csv", est.history_, _config_comment(config, cell=cell)
                    )
                    last = est.history_[-1]
                    cell.update(status="ok", epochs=est.n_epochs_, final_mse=last["mse"])
                    cells.append(cell)
                    print(f"{variant}/{scheme} {tag}: {est.n_epochs_} epochs, train mse {last['mse']:.4g}")
            _dump_json(cell_dir / "cells.json", {"config": config.to_dict(), "cells": cells})
    if failures:
        print(f"{failures} cell(s) diverged; see *.failure.json", file=sys.stderr)
    return EXIT_OK


def cell_metrics(y, y_hat, report_r: bool = False) -> dict:
    """Validation metrics for one cell; undefined values become NaN."""
    names = ["rmse", "ci", "r2"] + (["r"] if report_r else [])
    out = {}
    for name in names:
        try:
            out[name] = METRICS[name](y_hat, y)
        except MetricError:
            out[name] = float("nan")
    return out


def _write_predictions(path: Path, table, rows, y_hat, comment: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["compound_id", "target_id", "y", "y_hat"])
        for i, p in zip(rows, y_hat):
            r = table.records[i]
            w.writerow([r.compound_id, r.target_id, repr(r.affinity), repr(float(p))])


def cmd_evaluate(config: ExperimentConfig, args=None) -> int:
    config.validate()
    table = _read_records(config)
    cache = _load_cache(config)
    feat = _featurizer(config, cache)
    _prime_targets(feat, table, cache)
    X = np.array(table.pairs(), dtype=object)
    y = table.affinities
    names = ["rmse", "ci", "r2"] + (["r"] if config.report_r else [])
    reports = []
    skipped = []
    for variant in config.variants:
        for scheme in config.schemes:
            cell_dir = _cell_dir(config, "models", variant, scheme)
            per_metric: dict[str, dict] = {m: {} for m in names}
            for seed in config.seeds:
                fa = _load_folds(config, scheme, seed, len(table))
                for fold in range(fa.n_folds):
                    tag = f"seed{seed}_fold{fold}"
                    ckpt = cell_dir / f"{tag}.ckpt"
                    if not ckpt.exists():
                        if (cell_dir / f"{tag}.failure.json").exists():
                            skipped.append({"variant": variant, "scheme": scheme, "seed": seed, "fold": fold})
                            continue
                        raise UserError(f"{ckpt} not found; run `ivpgan train` first")
                    est = IVPGANRegressor.load(ckpt)
                    est.featurizer_ = feat
                    rows = fa.val_rows(fold)
                    y_hat = est.predict(X[rows])
                    cell = {"variant": variant, "scheme": scheme, "seed": seed, "fold": fold}
                    _write_predictions(
                        _cell_dir(config, "predictions", variant, scheme) / f"{tag}.csv",
                        table,
                        rows,
                        y_hat,
                        _config_comment(config, cell=cell),
                    )
                    for name, value in cell_metrics(y[rows], y_hat, config.report_r).items():
                        per_metric[name][(seed, fold)] = value
            for name in names:
                if per_metric[name]:
                    rep = aggregate(per_metric[name], name, scheme).to_dict()
                    reports.append({"variant": variant, **rep})
    _dump_json(config.out / "metrics.json", {"config": config.to_dict(), "reports": reports, "skipped_cells": skipped})
    _write_layout(config, reports, names)
    for rep in reports:
        print(f"{rep['variant']:>14} {rep['scheme']:>11} {rep['metric']:>4}: {rep['mean']:.4f} +/- {rep['std']:.4f}")
    return EXIT_OK


def _write_layout(config: ExperimentConfig, reports: list[dict], names: list[str]) -> None:
    """Rows scheme x metric; a (mean, std) column pair per variant."""
    index = {(r["variant"], r["scheme"], r["metric"]): r for r in reports}
    dataset = Path(config.dataset).stem if config.dataset else ""
    with open(config.out / "metrics_table.csv", "w", newline="") as fh:
        fh.write(f"# {_config_comment(config)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "scheme", "metric", *(f"{v}_{s}" for v in config.variants for s in ("mean", "std"))])
        for scheme in config.schemes:
            for name in names:
                row = [dataset, scheme, name]
                for v in config.variants:
                    r = index.get((v, scheme, name))
                    row += [repr(r["mean"]), repr(r["std"])] if r else ["", ""]
                w.writerow(row)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UserError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with ExperimentConfig keys")
    group = p.add_argument_group("config overrides")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if _FIELD_TYPES[f.name] is bool:
            group.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ivpgan", description="Drug-target affinity experiments with adversarial alignment.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-data", help="write a synthetic interaction table")
    p.add_argument("--out", required=True)
    p.add_argument("--n-compounds", type=int, default=20)
    p.add_argument("--n-targets", type=int, default=10)
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--structure", choices=("latent", "linear"), default="latent")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    for name, func, text in (
        ("featurize", cmd_featurize, "filter the table and build the feature cache"),
        ("split", cmd_split, "write CV fold assignments"),
        ("train", cmd_train, "train one model per (variant, scheme, seed, fold)"),
        ("evaluate", cmd_evaluate, "score checkpoints on their validation folds"),
    ):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        p.set_defaults(func=func)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return load_config(getattr(args, "config", None), overrides)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = _config_from_args(args) if args.command != "synth-data" else ExperimentConfig()
        return args.func(config, args)
    except (UserError, SmilesError, SequenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: grid search, multi-seed runs, cross-dataset
transfer sequencing, ensemble member resolution, and report assembly.

Layout conventions:

* ``DatasetStore`` root: one directory per dataset holding ``schema.json``
  plus ``train.tsv`` / ``validation.tsv`` / ``test.tsv``.
* ``RunStore`` root: one directory per run with ``manifest.json``,
  ``report.json``, ``report.txt`` and ``seed<k>/`` artifact dirs
  (``test_probs.tsv``, ``val_probs.tsv``, ``scores.json``).
* The content-addressed cache (``DEPKIT_CACHE`` or ``<runs>/cache``) keys
  encoder outputs and transfer-stage models by (encoder, dataset lineage,
  hyper-parameters, seed), so ensembles and transfer never retrain what an
  earlier run produced. Cache entries are published atomically via
  write-then-rename.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import references
from .baselines import (
    BASELINE_KINDS,
    fit_baseline,
    predict_proba_baseline,
    save_baseline,
)
from .corpus import (
    BUILTIN_MAPPINGS,
    LabeledDataset,
    LabelMapping,
    LabelSchema,
    concat_datasets,
    load_dataset,
    load_schema,
    merge_labels,
    resolve_mapping,
    resolve_schema,
    save_dataset,
    save_schema,
    class_distribution,
)
from .encoder import (
    ClassifierModel,
    EncoderRef,
    HyperParams,
    LOGICAL_ENCODERS,
    PUBLISHED_BATCH_SIZES,
    PUBLISHED_EPOCH_COUNTS,
    PUBLISHED_LEARNING_RATES,
    continue_fine_tune,
    fine_tune,
    load_model,
    predict_proba,
    save_model,
)
from .ensemble import (
    COMBO_SLOTS,
    ClassPrior,
    EnsembleSpec,
    average_fuse,
    bayes_fuse,
    hard_labels,
    resolve_members,
)
from .errors import (
    ConfigError,
    DatasetNotFound,
    EmptySpace,
    IdOrderMismatch,
    MissingGeneralChoice,
    MissingMemberRun,
    SchemaMismatch,
)
from .metrics import (
    RunAggregate,
    ScoreSet,
    SD_CONVENTION,
    aggregate_runs,
    scores_from_labels,
)
from .probmatrix import ProbabilityMatrix, read_matrix, write_matrix

CACHE_ENV_VAR = "DEPKIT_CACHE"


# --- dataset store ---------------------------------------------------------------

class DatasetStore:
    """Named datasets on disk, each with a schema and three splits."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _dataset_dir(self, name: str) -> Path:
        return self.root / name

    def has(self, name: str) -> bool:
        return (self._dataset_dir(name) / "schema.json").exists()

    def schema(self, name: str) -> LabelSchema:
        path = self._dataset_dir(name) / "schema.json"
        if not path.exists():
            raise DatasetNotFound(f"dataset {name!r} not found under {self.root}")
        return load_schema(path)

    def load(self, name: str, split: str) -> LabeledDataset:
        path = self._dataset_dir(name) / f"{split}.tsv"
        if not path.exists():
            raise DatasetNotFound(f"dataset {name!r} has no {split!r} split")
        return load_dataset(path, self.schema(name), split, name=name)

    def ingest(
        self,
        name: str,
        schema: LabelSchema,
        splits: dict[str, str | Path | LabeledDataset],
    ) -> Path:
        """Validate and write canonical split files plus a distribution summary."""
        target = self._dataset_dir(name)
        target.mkdir(parents=True, exist_ok=True)
        save_schema(schema, target / "schema.json")
        summary: dict[str, list] = {}
        for split, source in splits.items():
            if isinstance(source, LabeledDataset):
                ds = source
                if ds.schema != schema:
                    raise SchemaMismatch(
                        f"{split} split schema {ds.schema.name!r} != {schema.name!r}"
                    )
            else:
                ds = load_dataset(source, schema, split, name=name)
            save_dataset(ds, target / f"{split}.tsv")
            summary[split] = [
                {"level": idx, "name": schema.levels[idx], "count": c, "fraction": f}
                for idx, c, f in class_distribution(ds)
            ]
        (target / "distribution.json").write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8"
        )
        return target


# --- run store and cache ------------------------------------------------------------

class RunStore:
    """Run directories plus the content-addressed training cache."""

    def __init__(self, root: str | Path, cache_root: str | Path | None = None) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        env_cache = os.environ.get(CACHE_ENV_VAR)
        self.cache_root = Path(
            cache_root if cache_root is not None else (env_cache or self.root / "cache")
        )

    def create_run_dir(self, name: str) -> Path:
        """A fresh directory for ``name``; never reuses an existing one."""
        candidate = self.root / name
        counter = 2
        while candidate.exists():
            candidate = self.root / f"{name}-{counter}"
            counter += 1
        candidate.mkdir(parents=True)
        return candidate

    def find_run(self, ref: str | Path) -> Path:
        """Resolve a member reference: a path, a run dir name, or a run name.

        Run names are matched against each manifest's ``name`` field; the
        most recently modified match wins.
        """
        as_path = Path(ref)
        if as_path.is_dir() and (as_path / "manifest.json").exists():
            return as_path
        direct = self.root / str(ref)
        if direct.is_dir() and (direct / "manifest.json").exists():
            return direct
        matches: list[tuple[float, Path]] = []
        if self.root.is_dir():
            for manifest_path in self.root.glob("*/manifest.json"):
                try:
                    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError):
                    continue
                if doc.get("name") == str(ref):
                    matches.append((manifest_path.stat().st_mtime, manifest_path.parent))
        if not matches:
            raise MissingMemberRun(f"no run found for member {str(ref)!r}")
        return max(matches)[1]

    def member_matrix(self, ref: str | Path, seed: int, split: str = "test") -> ProbabilityMatrix:
        run_dir = self.find_run(ref)
        path = run_dir / f"seed{seed}" / f"{split}_probs.tsv"
        if not path.exists():
            raise MissingMemberRun(
                f"member {str(ref)!r} has no {split} matrix for seed {seed} "
                f"(expected {path})"
            )
        return read_matrix(path)

    def member_validation_f1(self, ref: str | Path) -> float:
        """Mean validation weighted F1 across a member run's seeds."""
        run_dir = self.find_run(ref)
        values: list[float] = []
        for scores_path in sorted(run_dir.glob("seed*/scores.json")):
            doc = json.loads(scores_path.read_text(encoding="utf-8"))
            if "validation" in doc:
                values.append(doc["validation"]["f1_weighted"])
        if not values:
            raise MissingMemberRun(
                f"member {str(ref)!r} has no validation scores for general-model selection"
            )
        return math.fsum(values) / len(values)

    # - cache -

    def cache_lookup(self, key: str) -> Path | None:
        entry = self.cache_root / key
        return entry if (entry / "COMPLETE").exists() else None

    def cache_publish(self, key: str, build: Callable[[Path], None]) -> Path:
        """Build into a temp dir and atomically rename it into the cache."""
        final = self.cache_root / key
        if (final / "COMPLETE").exists():
            return final
        self.cache_root.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{key}-", dir=self.cache_root))
        try:
            build(tmp)
            (tmp / "COMPLETE").write_text("ok\n", encoding="utf-8")
            try:
                os.replace(tmp, final)
            except OSError:
                # Lost a publish race; the existing entry is equivalent.
                if not (final / "COMPLETE").exists():
                    raise
                shutil.rmtree(tmp, ignore_errors=True)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        return final


def _cache_key(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:32]


# --- hyper-parameter search -----------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    """Grid axes; defaults are the published search sets."""

    batch_sizes: tuple[int, ...] = PUBLISHED_BATCH_SIZES
    learning_rates: tuple[float, ...] = PUBLISHED_LEARNING_RATES
    epoch_counts: tuple[int, ...] = PUBLISHED_EPOCH_COUNTS

    def __post_init__(self) -> None:
        if not (self.batch_sizes and self.learning_rates and self.epoch_counts):
            raise EmptySpace("every search axis needs at least one value")

    @property
    def size(self) -> int:
        return len(self.batch_sizes) * len(self.learning_rates) * len(self.epoch_counts)

    def cells(self, seed: int, max_tokens: int):
        for batch_size in sorted(self.batch_sizes):
            for learning_rate in sorted(self.learning_rates, reverse=True):
                for num_epochs in sorted(self.epoch_counts):
                    yield HyperParams(
                        batch_size=batch_size,
                        learning_rate=learning_rate,
                        num_epochs=num_epochs,
                        seed=seed,
                        max_tokens=max_tokens,
                    )

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchSpace":
        return cls(
            batch_sizes=tuple(doc.get("batch_sizes", PUBLISHED_BATCH_SIZES)),
            learning_rates=tuple(doc.get("learning_rates", PUBLISHED_LEARNING_RATES)),
            epoch_counts=tuple(doc.get("epoch_counts", PUBLISHED_EPOCH_COUNTS)),
        )


@dataclass(frozen=True)
class SearchCell:
    hp: HyperParams
    f1_weighted: float


def _fit_and_validate(
    encoder: EncoderRef,
    train: LabeledDataset,
    validation: LabeledDataset,
    hp: HyperParams,
) -> float:
    """One grid cell: fine-tune on train, weighted F1 on validation."""
    model = fine_tune(encoder, train, hp)
    pm = predict_proba(model, validation.posts)
    return scores_from_labels(
        validation.labels, hard_labels(pm), validation.schema.num_levels
    ).f1_weighted


def grid_search(
    encoder: EncoderRef,
    space: SearchSpace,
    train: LabeledDataset,
    validation: LabeledDataset,
    seed: int = 1,
    max_tokens: int = 512,
    log: list[SearchCell] | None = None,
) -> HyperParams:
    """Evaluate every grid cell and return the validation-F1 argmax.

    Ties break toward fewer epochs, then larger batches, then smaller
    learning rates. Every evaluated cell is appended to ``log`` when given.
    """
    if train.schema != validation.schema:
        raise SchemaMismatch("search train and validation splits must share a schema")
    cells: list[SearchCell] = []
    for hp in space.cells(seed=seed, max_tokens=max_tokens):
        f1 = _fit_and_validate(encoder, train, validation, hp)
        cell = SearchCell(hp=hp, f1_weighted=f1)
        cells.append(cell)
        if log is not None:
            log.append(cell)
    best = max(
        cells,
        key=lambda c: (
            c.f1_weighted,
            -c.hp.num_epochs,
            c.hp.batch_size,
            -c.hp.learning_rate,
        ),
    )
    return best.hp


# --- experiment specs -------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleRequest:
    """An ensemble to assemble from previously persisted member runs.

    ``general_candidates`` lists one or two member run references for the
    G slot; with two, the run with the better mean validation weighted F1
    is chosen. M and T slots bind directly.
    """

    combo: str
    fusion: str
    prior_mode: str = "train"
    general_candidates: tuple[str, ...] = ()
    mental_run: str | None = None
    tweet_run: str | None = None

    def __post_init__(self) -> None:
        if self.combo not in COMBO_SLOTS:
            raise ConfigError(f"unknown combo {self.combo!r}")
        if self.fusion not in ("averaging", "bayesian"):
            raise ConfigError(f"unknown fusion {self.fusion!r}")
        if self.prior_mode not in ("train", "uniform"):
            raise ConfigError(f"unknown prior mode {self.prior_mode!r}")
        slots = COMBO_SLOTS[self.combo]
        if "G" in slots and not self.general_candidates:
            raise MissingGeneralChoice(
                f"combo {self.combo} needs at least one general-model run"
            )
        if "M" in slots and not self.mental_run:
            raise ConfigError(f"combo {self.combo} needs a mental-domain member run")
        if "T" in slots and not self.tweet_run:
            raise ConfigError(f"combo {self.combo} needs a tweet-domain member run")

    @property
    def label(self) -> str:
        return f"{'AE' if self.fusion == 'averaging' else 'BE'}-{self.combo}"


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one table row."""

    name: str
    target_dataset: str
    model: str | EnsembleRequest
    transfer_source: str | None = None
    label_mapping: str | LabelMapping | None = None
    seeds: tuple[int, ...] = (1, 2, 3)
    hyperparams: HyperParams | str | None = None  # HyperParams, "search", or None
    source_hyperparams: HyperParams | None = None
    search_space: SearchSpace | None = None
    max_tokens: int = 512
    reference_key: tuple[str, str, str] | None = None  # (dataset, group, model)

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("experiment name must be non-empty")
        if not self.seeds:
            raise ConfigError("experiment needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.transfer_source is not None and self.transfer_source == self.target_dataset:
            raise ConfigError("transfer source and target must differ")
        if isinstance(self.hyperparams, str) and self.hyperparams != "search":
            raise ConfigError(
                f"hyperparams must be a HyperParams, 'search', or omitted; "
                f"got {self.hyperparams!r}"
            )
        if isinstance(self.model, str) and self.model in BASELINE_KINDS:
            if self.hyperparams not in (None,):
                raise ConfigError("baseline experiments take no hyper-parameters")
            if self.transfer_source is not None:
                raise ConfigError("baseline experiments do not support transfer")
        if isinstance(self.model, EnsembleRequest):
            if self.hyperparams is not None:
                raise ConfigError("ensemble experiments take no hyper-parameters")
            if self.transfer_source is not None:
                raise ConfigError(
                    "ensembles inherit transfer from their members; "
                    "do not set transfer_source on the fuse step"
                )

    @property
    def kind(self) -> str:
        if isinstance(self.model, EnsembleRequest):
            return "ensemble"
        return "baseline" if self.model in BASELINE_KINDS else "encoder"

    @property
    def model_label(self) -> str:
        if isinstance(self.model, EnsembleRequest):
            return self.model.label
        return self.model


# --- transfer alignment ------------------------------------------------------------------

def transfer_prepare(
    source: LabeledDataset,
    target: LabeledDataset,
    mapping: LabelMapping | None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Bring source and target onto one shared label schema.

    Whichever side matches the mapping's source schema is passed through
    merge_labels; the other side must already carry the mapping's target
    schema. Same-schema pairs pass through untouched.
    """
    if source.schema == target.schema:
        return source, target
    if mapping is None:
        raise SchemaMismatch(
            f"datasets have schemas {source.schema.name!r} and "
            f"{target.schema.name!r}; a label mapping is required"
        )
    if mapping.source == source.schema and mapping.target == target.schema:
        return merge_labels(source, mapping), target
    if mapping.source == target.schema and mapping.target == source.schema:
        return source, merge_labels(target, mapping)
    raise SchemaMismatch(
        f"mapping {mapping.name!r} ({mapping.source.name} -> {mapping.target.name}) "
        f"does not align {source.schema.name!r} with {target.schema.name!r}"
    )


# --- reports ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    """One experiment's aggregated outcome plus its artifact paths."""

    name: str
    model_label: str
    dataset: str
    split: str
    transfer_source: str | None
    seeds: tuple[int, ...]
    chosen_hp: HyperParams | None
    source_hp: HyperParams | None
    general_choice: str | None
    aggregate: RunAggregate
    artifacts: dict[str, str]
    notes: tuple[str, ...] = ()
    reference: tuple[float, float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model_label,
            "dataset": self.dataset,
            "split": self.split,
            "transfer_source": self.transfer_source,
            "seeds": list(self.seeds),
            "hyperparams": self.chosen_hp.to_dict() if self.chosen_hp else None,
            "source_hyperparams": self.source_hp.to_dict() if self.source_hp else None,
            "general_choice": self.general_choice,
            "sd_convention": SD_CONVENTION,
            "aggregate": self.aggregate.to_dict(),
            "artifacts": self.artifacts,
            "notes": list(self.notes),
            "reference": list(self.reference) if self.reference else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            name=doc["name"],
            model_label=doc["model"],
            dataset=doc["dataset"],
            split=doc.get("split", "test"),
            transfer_source=doc.get("transfer_source"),
            seeds=tuple(doc.get("seeds", ())),
            chosen_hp=HyperParams.from_dict(doc["hyperparams"])
            if doc.get("hyperparams")
            else None,
            source_hp=HyperParams.from_dict(doc["source_hyperparams"])
            if doc.get("source_hyperparams")
            else None,
            general_choice=doc.get("general_choice"),
            aggregate=RunAggregate.from_dict(doc["aggregate"]),
            artifacts=doc.get("artifacts", {}),
            notes=tuple(doc.get("notes", ())),
            reference=tuple(doc["reference"]) if doc.get("reference") else None,
        )


def render_rows(
    rows: Sequence[tuple[str, float, float, float, bool]],
    title: str | None = None,
) -> str:
    """Fixed-width table: Model | Acc | F1 | SD, transfer rows marked."""
    labels = [label + (" (transfer)" if transfer else "") for label, _, _, _, transfer in rows]
    width = max([len("Model")] + [len(l) for l in labels])
    lines = []
    if title:
        lines.append(title)
    lines.append(f"SD convention: {SD_CONVENTION} (over repeated seeds, on weighted F1)")
    lines.append(f"{'Model'.ljust(width)} | Acc   | F1    | SD")
    lines.append("-" * (width + 26))
    for label, (“label_raw”, acc, f1, sd, _transfer) in zip(labels, rows):
        lines.append(f"{label.ljust(width)} | {acc:.3f} | {f1:.3f} | {sd:.4f}")
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport) -> str:
    return render_rows(
        [
            (
                report.model_label,
                report.aggregate.mean_accuracy,
                report.aggregate.mean_f1_weighted,
                report.aggregate.sd_f1_weighted,
                report.transfer_source is not None,
            )
        ],
        title=f"{report.name}: {report.dataset}/{report.split}",
    )

"""The three experiment designs: cross train/eval matrix, training-size
curve, and field-set ablation.

Every experiment is a pure function of (plan, configs): corpora are read
from the plan's paths, models share one TrainConfig, and all outputs (CSV
tables plus a manifest) are written with fixed float formatting and no
timestamps, so a rerun with the same inputs is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import Corpus, filter_fields, filter_tags_sequence, read_corpus
from .crf import CrfModel, TrainConfig, predict_tags, train
from .errors import RefparseError, UsageError
from .features import FeatureConfig
from .labels import sort_fields
from .metrics import EvalReport, evaluate, report_rows

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "refparse-experiment-v1"


@dataclass(frozen=True)
class ExperimentPlan:
    trains: dict[str, str]  # name -> corpus path
    evals: dict[str, str]
    sizes: tuple[int, ...]
    keep_labels: tuple[str, ...]
    seed: int
    out_dir: str

    def __post_init__(self) -> None:
        if list(self.sizes) != sorted(self.sizes):
            raise UsageError("plan sizes must be sorted ascending")

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            trains=dict(data.get("trains", {})),
            evals=dict(data.get("evals", {})),
            sizes=tuple(data.get("sizes", [])),
            keep_labels=tuple(data.get("keep_labels", [])),
            seed=int(data.get("seed", 0)),
            out_dir=str(data["out_dir"]),
        )

    def to_dict(self) -> dict:
        return {
            "trains": dict(self.trains),
            "evals": dict(self.evals),
            "sizes": list(self.sizes),
            "keep_labels": list(self.keep_labels),
            "seed": self.seed,
            "out_dir": str(self.out_dir),
        }


@dataclass
class ExperimentResult:
    reports: dict[tuple[str, str], EvalReport]  # (train key, eval name)
    failures: list[dict] = field(default_factory=list)

    def macro_f1(self, train_key: str, eval_name: str) -> float:
        return self.reports[(train_key, eval_name)].field.macro_f1


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    plan: ExperimentPlan,
    train_config: TrainConfig,
    feature_config: FeatureConfig,
    kind: str,
    failures: list[dict],
    out_dir: Path,
) -> None:
    manifest = {
        "format": MANIFEST_FORMAT,
        "kind": kind,
        "tool_version": __version__,
        "plan": plan.to_dict(),
        "train_config": train_config.to_dict(),
        "feature_config": feature_config.to_dict(),
        "corpus_digests": {
            name: _file_digest(path)
            for name, path in sorted({**plan.trains, **plan.evals}.items())
        },
        "partial": bool(failures),
        "failures": failures,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_rows(path: Path, fieldnames: Sequence[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _write_cell_fields(report: EvalReport, out_dir: Path, cell: str) -> None:
    _write_rows(
        out_dir / f"fields_{cell}.csv",
        ("schema", "level", "field", "precision", "recall", "f1", "support"),
        report_rows(report),
    )


def _evaluate_model(model: CrfModel, eval_corpus: Corpus) -> EvalReport:
    pred = [predict_tags(model, inst.surfaces()) for inst in eval_corpus.instances]
    return evaluate(eval_corpus, pred)


_AGG_COLUMNS = (
    "token_micro_p",
    "token_micro_r",
    "token_micro_f1",
    "token_macro_f1",
    "field_micro_p",
    "field_micro_r",
    "field_micro_f1",
    "field_macro_f1",
)


def _agg_cells(report: EvalReport) -> dict:
    return {
        "token_micro_p": f"{report.token.micro_precision:.6f}",
        "token_micro_r": f"{report.token.micro_recall:.6f}",
        "token_micro_f1": f"{report.token.micro_f1:.6f}",
        "token_macro_f1": f"{report.token.macro_f1:.6f}",
        "field_micro_p": f"{report.field.micro_precision:.6f}",
        "field_micro_r": f"{report.field.micro_recall:.6f}",
        "field_micro_f1": f"{report.field.micro_f1:.6f}",
        "field_macro_f1": f"{report.field.macro_f1:.6f}",
    }


def cross_matrix(
    plan: ExperimentPlan,
    train_config: TrainConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> ExperimentResult:
    """Train one model per train corpus, evaluate on every eval corpus.

    Writes matrix.csv, per-cell fields_*.csv, and manifest.json into the
    plan's out_dir. A failed cell is recorded in the manifest and the run
    ends with a RefparseError after writing the completed cells.
    """
    if not plan.trains or not plan.evals:
        raise UsageError("cross_matrix needs at least one train and one eval corpus")
    train_config = train_config or TrainConfig()
    feature_config = feature_config or FeatureConfig()
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = ExperimentResult(reports={})
    rows: list[dict] = []
    for train_name, train_path in plan.trains.items():
        try:
            train_corpus = read_corpus(train_path, name=train_name)
            model = train(train_corpus, feature_config, train_config)
        except RefparseError as exc:
            result.failures.append({"cell": train_name, "error": str(exc)})
            log.error("training %s failed: %s", train_name, exc)
            break
        for eval_name, eval_path in plan.evals.items():
            try:
                eval_corpus = read_corpus(eval_path, name=eval_name)
                report = _evaluate_model(model, eval_corpus)
            except RefparseError as exc:
                result.failures.append(
                    {"cell": f"{train_name}x{eval_name}", "error": str(exc)}
                )
                continue
            result.reports[(train_name, eval_name)] = report
            rows.append({"train": train_name, "eval": eval_name, **_agg_cells(report)})
            _write_cell_fields(report, out_dir, f"{train_name}__{eval_name}")

    _write_rows(out_dir / "matrix.csv", ("train", "eval", *_AGG_COLUMNS), rows)
    _write_manifest(plan, train_config, feature_config, "matrix", result.failures, out_dir)
    if result.failures:
        raise RefparseError(
            f"cross_matrix finished with {len(result.failures)} failed cell(s); "
            f"partial results in {out_dir}"
        )
    return result


def nested_subsets(corpus: Corpus, sizes: Sequence[int], seed: int) -> list[Corpus]:
    """Prefix subsets of one seeded permutation: the subset at a smaller
    size is contained in every larger one, so a curve over them isolates
    training-set size rather than sampling variance."""
    if not sizes:
        raise UsageError("need at least one subset size")
    if max(sizes) > len(corpus):
        raise UsageError(f"largest size {max(sizes)} exceeds corpus size {len(corpus)}")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(corpus))
    return [
        Corpus(
            name=f"{corpus.name}[:{size}]",
            labels=corpus.labels,
            instances=tuple(corpus.instances[i] for i in order[:size]),
        )
        for size in sizes
    ]


def size_curve(
    plan: ExperimentPlan,
    train_config: TrainConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> ExperimentResult:
    """Train on nested subsets of one corpus and evaluate each size."""
    if len(plan.trains) != 1:
        raise UsageError("size_curve uses exactly one train corpus")
    if not plan.sizes:
        raise UsageError("size_curve needs a non-empty sizes list")
    if not plan.evals:
        raise UsageError("size_curve needs at least one eval corpus")
    train_config = train_config or TrainConfig()
    feature_config = feature_config or FeatureConfig()
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    (train_name, train_path), = plan.trains.items()
    corpus = read_corpus(train_path, name=train_name)
    subsets = nested_subsets(corpus, plan.sizes, plan.seed)
    evals = {name: read_corpus(path, name=name) for name, path in plan.evals.items()}

    result = ExperimentResult(reports={})
    rows: list[dict] = []
    for size, subset in zip(plan.sizes, subsets):
        try:
            model = train(subset, feature_config, train_config)
        except RefparseError as exc:
            result.failures.append({"cell": f"size{size}", "error": str(exc)})
            log.error("training at size %d failed: %s", size, exc)
            break
        for eval_name, eval_corpus in evals.items():
            report = _evaluate_model(model, eval_corpus)
            result.reports[(str(size), eval_name)] = report
            rows.append({"size": str(size), "eval": eval_name, **_agg_cells(report)})
            _write_cell_fields(report, out_dir, f"size{size}__{eval_name}")

    _write_rows(out_dir / "curve.csv", ("size", "eval", *_AGG_COLUMNS), rows)
    _write_manifest(plan, train_config, feature_config, "curve", result.failures, out_dir)
    if result.failures:
        raise RefparseError(
            f"size_curve finished with {len(result.failures)} failed size(s); "
            f"partial results in {out_dir}"
        )
    return result


def field_ablation(
    plan: ExperimentPlan,
    train_config: TrainConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> ExperimentResult:
    """Full-label arm vs reduced-label arm on the same instances.

    The reduced arm trains after filter_fields(keep_labels); both arms are
    evaluated on the shared fields only (gold and predictions outside
    keep_labels are coarsened to O).
    """
    if len(plan.trains) != 1:
        raise UsageError("field_ablation uses exactly one train corpus")
    if not plan.keep_labels:
        raise UsageError("field_ablation needs keep_labels (the shared fields)")
    if not plan.evals:
        raise UsageError("field_ablation needs at least one eval corpus")
    train_config = train_config or TrainConfig()
    feature_config = feature_config or FeatureConfig()
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    (train_name, train_path), = plan.trains.items()
    full_corpus = read_corpus(train_path, name=train_name)
    keep = sort_fields(plan.keep_labels)
    if set(keep) == set(full_corpus.labels):
        raise UsageError("keep_labels equals the corpus label set; nothing ablated")
    reduced_corpus = filter_fields(full_corpus, keep)

    result = ExperimentResult(reports={})
    rows: list[dict] = []
    arms = (("full", full_corpus), ("reduced", reduced_corpus))
    models: dict[str, CrfModel] = {}
    for arm_name, corpus in arms:
        try:
            models[arm_name] = train(corpus, feature_config, train_config)
        except RefparseError as exc:
            result.failures.append({"cell": arm_name, "error": str(exc)})
            log.error("training %s arm failed: %s", arm_name, exc)
            break

    if len(models) == len(arms):
        for eval_name, eval_path in plan.evals.items():
            eval_full = read_corpus(eval_path, name=eval_name)
            eval_shared = filter_fields(eval_full, keep)
            for arm_name, _ in arms:
                model = models[arm_name]
                pred = [
                    filter_tags_sequence(predict_tags(model, inst.surfaces()), keep)
                    for inst in eval_shared.instances
                ]
                report = evaluate(eval_shared, pred)
                result.reports[(arm_name, eval_name)] = report
                rows.append({"arm": arm_name, "eval": eval_name, **_agg_cells(report)})
                _write_cell_fields(report, out_dir, f"{arm_name}__{eval_name}")

    _write_rows(out_dir / "ablation.csv", ("arm", "eval", *_AGG_COLUMNS), rows)
    _write_manifest(plan, train_config, feature_config, "ablation", result.failures, out_dir)
    if result.failures:
        raise RefparseError(
            f"field_ablation finished with {len(result.failures)} failed arm(s); "
            f"partial results in {out_dir}"
        )
    return result

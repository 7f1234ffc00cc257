"""Dataset loading, macro-averaged classification metrics, and sweep runs.

Datasets are JSONL files of {"id", "question", "label"} with labels in
{"supported", "refuted", "nei"}. Metrics are macro averages: the
unweighted arithmetic mean of per-class precision/recall/F1 over the
scheme's classes (two for binary datasets, three for ternary); 0/0 cells
are defined as 0 and logged.

run_sweep evaluates one retrieval configuration per grid cell, persists
every AnswerRecord for audit, and never lets one failing cell abort the
rest. Reports render as CSV or paper-style markdown with scores as
percentages to one decimal.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .reader import AnswerRecord, Label, RetrievalConfig, STR_TO_LABEL, LABEL_TO_STR

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class QAInstance:
    id: str
    question: str
    gold: Label | None = None


@dataclass(frozen=True)
class QADataset:
    name: str
    scheme: str  # binary | ternary
    instances: tuple[QAInstance, ...]

    def __post_init__(self):
        if self.scheme not in ("binary", "ternary"):
            raise DatasetError(f"unknown scheme: {self.scheme!r}")
        if self.scheme == "binary":
            bad = [i.id for i in self.instances if i.gold == Label.NOT_ENOUGH_INFO]
            if bad:
                raise DatasetError(f"binary dataset contains NEI gold labels: {bad[:5]}")

    def __len__(self) -> int:
        return len(self.instances)

    def label_counts(self) -> dict[str, int]:
        counts = {"supported": 0, "refuted": 0, "nei": 0}
        for inst in self.instances:
            counts[LABEL_TO_STR[inst.gold]] += 1
        return counts

    @property
    def classes(self) -> tuple[Label, ...]:
        if self.scheme == "binary":
            return (Label.REFUTED, Label.SUPPORTED)
        return (Label.REFUTED, Label.SUPPORTED, Label.NOT_ENOUGH_INFO)


# Canonical label distributions of the converted benchmark files.
KNOWN_DATASET_COUNTS = {
    "healthfc3": {"supported": 202, "refuted": 125, "nei": 433},
    "healthfc2": {"supported": 202, "refuted": 125, "nei": 0},
    "bioasq7b": {"supported": 614, "refuted": 131, "nei": 0},
    "trec_health": {"supported": 61, "refuted": 52, "nei": 0},
}
KNOWN_DATASET_SCHEMES = {"healthfc3": "ternary", "healthfc2": "binary",
                         "bioasq7b": "binary", "trec_health": "binary"}


def load_dataset(path: str | Path, scheme: str | None = None,
                 name: str | None = None,
                 expected_counts: Mapping[str, int] | None = None) -> QADataset:
    """Load and validate a dataset file.

    scheme=None infers ternary iff any NEI gold is present; declaring
    binary on a file with NEI labels is an error. When expected_counts is
    given (or the name is a known benchmark), the label distribution must
    match exactly.
    """
    path = Path(path)
    instances = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: bad JSON: {e}") from None
            label_str = raw.get("label")
            if label_str not in STR_TO_LABEL:
                raise DatasetError(
                    f"{path}:{lineno}: unknown label {label_str!r} "
                    f"(expected one of {sorted(STR_TO_LABEL)})")
            if "id" not in raw or "question" not in raw:
                raise DatasetError(f"{path}:{lineno}: missing id or question")
            instances.append(QAInstance(id=str(raw["id"]), question=raw["question"],
                                        gold=STR_TO_LABEL[label_str]))

    name = name or path.stem
    if scheme is None:
        scheme = KNOWN_DATASET_SCHEMES.get(name)
    if scheme is None:
        scheme = ("ternary" if any(i.gold == Label.NOT_ENOUGH_INFO for i in instances)
                  else "binary")
    dataset = QADataset(name=name, scheme=scheme, instances=tuple(instances))

    if expected_counts is None and name in KNOWN_DATASET_COUNTS:
        expected_counts = KNOWN_DATASET_COUNTS[name]
    if expected_counts is not None:
        validate_counts(dataset, expected_counts)
    return dataset


def validate_counts(dataset: QADataset, expected: Mapping[str, int]) -> None:
    actual = dataset.label_counts()
    mismatches = {
        label: (actual.get(label, 0), count)
        for label, count in expected.items()
        if actual.get(label, 0) != count
    }
    if mismatches:
        detail = ", ".join(f"{label}: got {got}, expected {want}"
                           for label, (got, want) in sorted(mismatches.items()))
        raise DatasetError(f"dataset {dataset.name!r} label counts do not match "
                           f"the canonical distribution ({detail})")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: Mapping[Label, ClassMetrics]
    macro_p: float
    macro_r: float
    macro_f1: float
    n_questions: int


def evaluate(predictions: Mapping[str, Label], dataset: QADataset) -> MetricsReport:
    """Macro P/R/F1 of predictions against gold labels.

    Every dataset id must have a prediction; 0/0 metric cells are 0.
    """
    missing = [i.id for i in dataset.instances if i.id not in predictions]
    if missing:
        raise ValueError(f"missing predictions for {len(missing)} ids: {missing[:10]}")

    classes = dataset.classes
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    support = {c: 0 for c in classes}
    for inst in dataset.instances:
        gold = inst.gold
        pred = predictions[inst.id]
        support[gold] += 1
        if pred == gold:
            tp[gold] += 1
        else:
            fn[gold] += 1
            if pred in fp:
                fp[pred] += 1

    per_class = {}
    for c in classes:
        precision = _safe_div(tp[c], tp[c] + fp[c], f"precision[{LABEL_TO_STR[c]}]")
        recall = _safe_div(tp[c], tp[c] + fn[c], f"recall[{LABEL_TO_STR[c]}]")
        f1 = _safe_div(2 * precision * recall, precision + recall,
                       f"f1[{LABEL_TO_STR[c]}]")
        per_class[c] = ClassMetrics(precision=precision, recall=recall, f1=f1,
                                    support=support[c])

    n = len(classes)
    return MetricsReport(
        per_class=per_class,
        macro_p=sum(m.precision for m in per_class.values()) / n,
        macro_r=sum(m.recall for m in per_class.values()) / n,
        macro_f1=sum(m.f1 for m in per_class.values()) / n,
        n_questions=len(dataset.instances),
    )


def _safe_div(num: float, den: float, what: str) -> float:
    if den == 0:
        logger.warning("%s is 0/0, defining as 0", what)
        return 0.0
    return num / den


class AnswerPipeline(Protocol):
    def answer_instance(self, instance: QAInstance,
                        config: RetrievalConfig) -> AnswerRecord: ...


@dataclass
class SweepCell:
    dataset: str
    mode: str
    param: str
    value: object
    fingerprint: str
    status: str  # ok | failed
    metrics: MetricsReport | None
    n_questions: int
    error: str | None = None


@dataclass
class SweepReport:
    cells: list[SweepCell]

    def to_csv(self) -> str:
        lines = ["dataset,mode,param,value,macro_p,macro_r,macro_f1,n_questions"]
        for cell in self.cells:
            if cell.metrics is None:
                metric_cols = ["", "", ""]
            else:
                metric_cols = [_pct(cell.metrics.macro_p), _pct(cell.metrics.macro_r),
                               _pct(cell.metrics.macro_f1)]
            lines.append(",".join([cell.dataset, cell.mode, cell.param,
                                   _cell_str(cell.value), *metric_cols,
                                   str(cell.n_questions)]))
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        param = self.cells[0].param if self.cells else "param"
        lines = [f"| {param} | P | R | F1 |", "|---:|---:|---:|---:|"]
        for cell in self.cells:
            if cell.metrics is None:
                lines.append(f"| {_cell_str(cell.value)} | failed | failed | failed |")
            else:
                lines.append(f"| {_cell_str(cell.value)} | {_pct(cell.metrics.macro_p)} "
                             f"| {_pct(cell.metrics.macro_r)} "
                             f"| {_pct(cell.metrics.macro_f1)} |")
        return "\n".join(lines) + "\n"


def _pct(value: float) -> str:
    return f"{100.0 * value:.1f}"


def _cell_str(value) -> str:
    return "" if value is None else str(value)


def _varying_param(grid: Sequence[RetrievalConfig]) -> str | None:
    if len(grid) < 2:
        return None
    dicts = [cfg.as_dict() for cfg in grid]
    varying = [key for key in dicts[0] if len({json.dumps(d[key]) for d in dicts}) > 1]
    return ",".join(varying) if varying else None


def run_sweep(dataset: QADataset, grid: Sequence[RetrievalConfig],
              pipeline: AnswerPipeline, *, param: str | None = None,
              jobs: int = 1, answers_path: str | Path | None = None,
              ) -> SweepReport:
    """One MetricsReport per grid cell; failed cells are recorded, not fatal.

    Questions within a cell may run in parallel (jobs > 1); records are
    ordered by question id before persisting and counting, so parallelism
    cannot change any metric.
    """
    inferred = param or _varying_param(grid)
    cells = []
    answers_file = None
    if answers_path is not None:
        Path(answers_path).parent.mkdir(parents=True, exist_ok=True)
        answers_file = Path(answers_path).open("w", encoding="utf-8")

    try:
        for config in grid:
            cell_param = inferred or ("top_k" if config.mode == "document" else "top_j")
            value = config.as_dict().get(cell_param, config.fingerprint()[:12])
            try:
                if jobs > 1:
                    with ThreadPoolExecutor(max_workers=jobs) as pool:
                        records = list(pool.map(
                            lambda inst: pipeline.answer_instance(inst, config),
                            dataset.instances))
                else:
                    records = [pipeline.answer_instance(inst, config)
                               for inst in dataset.instances]
                records.sort(key=lambda r: r.question_id)
                if answers_file is not None:
                    for record in records:
                        answers_file.write(record.to_json() + "\n")
                predictions = {r.question_id: r.verdict for r in records}
                metrics = evaluate(predictions, dataset)
                cells.append(SweepCell(
                    dataset=dataset.name, mode=config.mode, param=cell_param,
                    value=value, fingerprint=config.fingerprint(), status="ok",
                    metrics=metrics, n_questions=len(dataset)))
            except Exception as e:
                logger.error("sweep cell %s=%s failed: %s", cell_param, value, e)
                cells.append(SweepCell(
                    dataset=dataset.name, mode=config.mode, param=cell_param,
                    value=value, fingerprint=config.fingerprint(), status="failed",
                    metrics=None, n_questions=len(dataset), error=str(e)))
    finally:
        if answers_file is not None:
            answers_file.close()
    return SweepReport(cells=cells)


def emit_report(report: SweepReport, format: str, path: str | Path) -> Path:
    """Write the report as CSV or markdown; returns the written path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        content = report.to_csv()
    elif format == "markdown":
        content = report.to_markdown()
    else:
        raise ValueError(f"unknown report format: {format!r}")
    path.write_text(content, encoding="utf-8")
    return path

"""
Checker for the Low Vision GUI Checker.

This module runs the end-to-end pipeline over layout files and turns model
output into something a developer can act on:

1. Parse, filter, build the GUI-graph and predict per component
2. Collect flagged components into an IssueReport with remediation text
3. Render reports as JSON or text and flagged bounds as an SVG overlay
4. Compute binarized precision/recall/F1 against gold labels
5. Train and evaluate models on labeled corpora
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from lxml import etree

from feature_encoder import ISSUE_NAMES, N_CLASSES, IssueClass
from gcn_model import GcnConfig, GcnModel, Prediction, accuracy, predict, train
from graph_builder import GraphTensors, GuiGraph, build_gui_graph, to_tensors
from layout_parser import LayoutTree, filter_visible, parse_layout, read_layout
from synth_corpus import SyntheticGui, split
from utils.errors import CheckerError, InvalidClass, LengthMismatch
from utils.geometry import Rect
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

ISSUE_CLASSES = (
    IssueClass.SMALL_SIZE,
    IssueClass.NARROW_INTERVAL,
    IssueClass.LOW_COLOR_CONTRAST,
    IssueClass.UNCLEAR_ALERT,
)

REMEDIATIONS = {
    IssueClass.SMALL_SIZE: "increase touch target to ≥24×24 px",
    IssueClass.NARROW_INTERVAL: "increase spacing between adjacent targets",
    IssueClass.LOW_COLOR_CONTRAST: "raise foreground/background contrast to ≥4.5:1",
    IssueClass.UNCLEAR_ALERT: "make alert text explicit and visually prominent",
}

OVERLAY_COLORS = {
    IssueClass.SMALL_SIZE: "#E53935",
    IssueClass.NARROW_INTERVAL: "#FB8C00",
    IssueClass.LOW_COLOR_CONTRAST: "#8E24AA",
    IssueClass.UNCLEAR_ALERT: "#1E88E5",
}

SVG_NS = "http://www.w3.org/2000/svg"
LAYOUT_GLOBS = ("*.xml",)

EXIT_CLEAN = 0
EXIT_ISSUES = 1
EXIT_FAILED = 2


@dataclass(frozen=True)
class Flag:
    """One inaccessible component in a report."""

    resource_id: str
    component_type: str
    class_index: int
    probability: float
    bounds: Rect

    @property
    def issue(self) -> str:
        return ISSUE_NAMES[IssueClass(self.class_index)]

    @property
    def recommendation(self) -> str:
        return recommend(self.class_index)

    def to_dict(self) -> Dict[str, object]:
        return {
            "resource_id": self.resource_id,
            "component_type": self.component_type,
            "issue": self.issue,
            "class_index": self.class_index,
            "probability": round(self.probability, 6),
            "recommendation": self.recommendation,
            "bounds": list(self.bounds),
        }


@dataclass(frozen=True)
class IssueReport:
    """Flagged components of one layout plus counts per issue class."""

    path: str
    n_components: int
    flags: Tuple[Flag, ...] = ()

    @property
    def counts(self) -> Dict[str, int]:
        return {
            ISSUE_NAMES[c]: sum(1 for f in self.flags if f.class_index == c)
            for c in ISSUE_CLASSES
        }

    @property
    def has_issues(self) -> bool:
        return bool(self.flags)

    def to_dict(self) -> Dict[str, object]:
        return {
            "path": self.path,
            "n_components": self.n_components,
            "issues": [flag.to_dict() for flag in self.flags],
            "summary": self.counts,
        }


@dataclass
class FileResult:
    """Outcome of checking one file: a report or the error that stopped it."""

    path: str
    report: Optional[IssueReport] = None
    error: Optional[str] = None
    tree: Optional[LayoutTree] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass
class CheckRun:
    """Results for every input file, in input order."""

    results: List[FileResult] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if not self.results or all(not r.ok for r in self.results):
            return EXIT_FAILED
        if any(r.ok and r.report.has_issues for r in self.results):
            return EXIT_ISSUES
        return EXIT_CLEAN

    @property
    def totals(self) -> Dict[str, int]:
        totals = {ISSUE_NAMES[c]: 0 for c in ISSUE_CLASSES}
        for result in self.results:
            if result.ok:
                for name, count in result.report.counts.items():
                    totals[name] += count
        return totals


@dataclass(frozen=True)
class MetricsResult:
    """Binarized confusion counts: issue (classes 0-3) vs accessible (4)."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def precision(self) -> Optional[float]:
        denominator = self.tp + self.fp
        return self.tp / denominator if denominator else None

    @property
    def recall(self) -> Optional[float]:
        denominator = self.tp + self.fn
        return self.tp / denominator if denominator else None

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> Dict[str, object]:
        def fmt(value: Optional[float]) -> Union[float, str]:
            return "n/a" if value is None else round(value, 3)

        return {
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "precision": fmt(self.precision),
            "recall": fmt(self.recall),
            "f1": fmt(self.f1),
        }


def recommend(class_index: int) -> str:
    """
    Remediation text for an issue class.

    Raises:
        InvalidClass: For the accessible class or any index outside 0-3
    """
    try:
        return REMEDIATIONS[IssueClass(class_index)]
    except (KeyError, ValueError):
        raise InvalidClass(f"no remediation for class {class_index!r}") from None


def _check_classes(values: np.ndarray, what: str) -> None:
    if values.size and (values.min() < 0 or values.max() >= N_CLASSES):
        raise InvalidClass(f"{what} contain a class outside 0-{N_CLASSES - 1}")


def evaluate(predictions: Sequence[int], gold: Sequence[int]) -> MetricsResult:
    """
    Binarized metrics: classes 0-3 count as inaccessible, class 4 as general.

    Args:
        predictions: Predicted class per component
        gold: Gold class per component, aligned with predictions

    Returns:
        MetricsResult with TP/TN/FP/FN counts

    Raises:
        LengthMismatch: If the two sequences differ in length
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(gold, dtype=np.int64)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{len(pred)} predictions for {len(true)} gold labels")
    _check_classes(pred, "predictions")
    _check_classes(true, "gold labels")

    pred_issue = pred != IssueClass.ACCESSIBLE
    true_issue = true != IssueClass.ACCESSIBLE
    return MetricsResult(
        tp=int(np.sum(pred_issue & true_issue)),
        tn=int(np.sum(~pred_issue & ~true_issue)),
        fp=int(np.sum(pred_issue & ~true_issue)),
        fn=int(np.sum(~pred_issue & true_issue)),
    )


def per_class_confusion(predictions: Sequence[int], gold: Sequence[int]) -> List[List[int]]:
    """5 x 5 counts, rows gold class, columns predicted class."""
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(gold, dtype=np.int64)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{len(pred)} predictions for {len(true)} gold labels")
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(matrix, (true, pred), 1)
    return matrix.tolist()


def layout_tensors(
    tree: LayoutTree,
    annotations: Optional[Dict[str, int]] = None,
    threshold: Optional[int] = None,
    mask: str = "none",
) -> Tuple[GuiGraph, GraphTensors]:
    """Filter a parsed layout and build its graph and padded tensors."""
    graph = build_gui_graph(filter_visible(tree), annotations)
    return graph, to_tensors(graph, threshold=threshold, mask=mask)


def build_dataset(
    corpus: Sequence[SyntheticGui],
    threshold: Optional[int] = None,
    mask: str = "none",
) -> List[GraphTensors]:
    """Labeled tensors for every GUI of a corpus, in corpus order."""
    dataset = []
    for gui in corpus:
        tree = parse_layout(gui.layout_xml, source_path=gui.name)
        _, tensors = layout_tensors(tree, gui.labels, threshold, mask)
        dataset.append(tensors)
    return dataset


def build_report(graph: GuiGraph, prediction: Prediction, path: str) -> IssueReport:
    """Collect every component predicted as one of the four issue classes."""
    flags = []
    for node in graph.components:
        class_index = int(prediction.class_of[node.node_id])
        if class_index == IssueClass.ACCESSIBLE:
            continue
        flags.append(
            Flag(
                resource_id=node.resource_id,
                component_type=node.kind,
                class_index=class_index,
                probability=float(prediction.probs[node.node_id, class_index]),
                bounds=node.bounds,
            )
        )
    return IssueReport(path=path, n_components=len(graph.components), flags=tuple(flags))


def check_layout(path: Union[str, Path], model: GcnModel) -> FileResult:
    """
    Run the whole pipeline on one layout file.

    Raises:
        CheckerError: If the file cannot be parsed or graphed
        OSError: If the file cannot be read
    """
    tree = read_layout(path)
    graph, tensors = layout_tensors(tree, threshold=model.config.n_nodes)
    prediction = predict(model, tensors)
    report = build_report(graph, prediction, str(path))
    logger.info(f"{path}: {report.n_components} components, {len(report.flags)} issues")
    return FileResult(path=str(path), report=report, tree=tree)


def collect_layouts(paths: Iterable[Union[str, Path]]) -> List[Path]:
    """
    Expand directories into the layout files they contain.

    Files are kept as given; directories are searched recursively for
    *.xml files, sorted by path.
    """
    collected: List[Path] = []
    for entry in paths:
        entry = Path(entry)
        if entry.is_dir():
            found = sorted(p for pattern in LAYOUT_GLOBS for p in entry.rglob(pattern))
            if not found:
                logger.warning(f"No layout files found in {entry}")
            collected.extend(found)
        else:
            collected.append(entry)
    return collected


def check(paths: Iterable[Union[str, Path]], model: GcnModel) -> CheckRun:
    """
    Check every layout, skipping (and recording) files that fail.

    Args:
        paths: Layout files or directories of layout files
        model: Trained model

    Returns:
        CheckRun in input order; its exit_code is 0 for no issues, 1 when
        issues were found and 2 when every file failed
    """
    run = CheckRun()
    for path in collect_layouts(paths):
        try:
            run.results.append(check_layout(path, model))
        except (CheckerError, OSError) as e:
            logger.warning(f"Skipping {path}: {e}")
            run.results.append(FileResult(path=str(path), error=str(e)))
        except Exception as e:
            logger.error(f"Unexpected error checking {path}: {e}", exc_info=True)
            run.results.append(FileResult(path=str(path), error=f"internal error: {e}"))
    return run


def report_json(run: CheckRun) -> str:
    """Byte-stable JSON rendering of a check run."""
    files = []
    for result in run.results:
        if result.ok:
            files.append({"status": "ok", **result.report.to_dict()})
        else:
            files.append({"status": "error", "path": result.path, "error": result.error})
    payload = {"files": files, "summary": run.totals, "exit_code": run.exit_code}
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)


def report_text(run: CheckRun) -> str:
    """Human-readable rendering of a check run."""
    lines = []
    for result in run.results:
        if not result.ok:
            lines.append(f"{result.path}: ERROR {result.error}")
            continue
        report = result.report
        lines.append(f"{report.path}: {len(report.flags)} issue(s) in {report.n_components} components")
        for flag in report.flags:
            x1, y1, x2, y2 = flag.bounds
            lines.append(
                f"  {flag.resource_id} ({flag.component_type}) [{x1},{y1}][{x2},{y2}] "
                f"{flag.issue}: {flag.recommendation}"
            )
    summary = ", ".join(f"{name}: {count}" for name, count in run.totals.items())
    lines.append(f"Total: {summary}")
    return "\n".join(lines) + "\n"


def overlay(tree: LayoutTree, report: IssueReport) -> bytes:
    """
    SVG of the device frame with one colored rectangle per flagged component.

    The canvas spans the layout root; a legend lists each issue class that
    appears in the report.

    Args:
        tree: The layout the report was made from
        report: Its issue report

    Returns:
        UTF-8 SVG document, byte-identical for identical input
    """
    width, height = tree.root.bounds[2], tree.root.bounds[3]
    svg = etree.Element(
        f"{{{SVG_NS}}}svg",
        nsmap={None: SVG_NS},
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )
    etree.SubElement(
        svg,
        f"{{{SVG_NS}}}rect",
        {
            "class": "device-frame",
            "x": "0",
            "y": "0",
            "width": str(width),
            "height": str(height),
            "fill": "none",
            "stroke": "#000000",
            "stroke-width": "4",
        },
    )

    for flag in report.flags:
        x1, y1, x2, y2 = flag.bounds
        rect = etree.SubElement(
            svg,
            f"{{{SVG_NS}}}rect",
            {
                "class": "flag",
                "data-resource-id": flag.resource_id,
                "x": str(x1),
                "y": str(y1),
                "width": str(x2 - x1),
                "height": str(y2 - y1),
                "fill": "none",
                "stroke": OVERLAY_COLORS[IssueClass(flag.class_index)],
                "stroke-width": "6",
            },
        )
        etree.SubElement(rect, f"{{{SVG_NS}}}title").text = f"{flag.resource_id}: {flag.issue}"

    present = sorted({flag.class_index for flag in report.flags})
    if present:
        legend = etree.SubElement(svg, f"{{{SVG_NS}}}g", {"class": "legend"})
        for row, class_index in enumerate(present):
            y = 16 + row * 48
            etree.SubElement(
                legend,
                f"{{{SVG_NS}}}rect",
                {
                    "class": "legend-swatch",
                    "x": "16",
                    "y": str(y),
                    "width": "32",
                    "height": "32",
                    "fill": OVERLAY_COLORS[IssueClass(class_index)],
                },
            )
            label = etree.SubElement(
                legend,
                f"{{{SVG_NS}}}text",
                {"class": "legend-label", "x": "60", "y": str(y + 24), "font-size": "24"},
            )
            label.text = ISSUE_NAMES[IssueClass(class_index)]

    etree.indent(svg, space="  ")
    return etree.tostring(svg, pretty_print=True, xml_declaration=True, encoding="UTF-8")


def labeled_predictions(
    model: GcnModel, dataset: Sequence[GraphTensors]
) -> Tuple[np.ndarray, np.ndarray]:
    """Aligned (predicted, gold) classes over every labeled component row."""
    predicted, gold = [], []
    for tensors in dataset:
        rows = tensors.label_mask
        predicted.append(predict(model, tensors).class_of[rows])
        gold.append(tensors.labels[rows])
    if not predicted:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(predicted), np.concatenate(gold)


def train_on_corpus(
    corpus: Sequence[SyntheticGui],
    gcn_config: Optional[GcnConfig] = None,
    ratios: Tuple[float, float, float] = (0.8, 0.2, 0.0),
    seed: Optional[int] = None,
    mask: str = "none",
) -> Tuple[GcnModel, List[Dict[str, Optional[float]]], List[GraphTensors]]:
    """
    Split a labeled corpus, train a fresh model and keep the held-out part.

    Args:
        corpus: Labeled GUIs
        gcn_config: Model configuration (defaults to GcnConfig.from_config())
        ratios: Train/validation/test ratios for the GUI-level split
        seed: Split seed (defaults to the model seed)
        mask: Attribute-group mask applied to every feature matrix

    Returns:
        Tuple of (trained model, history, validation tensors)
    """
    gcn_config = gcn_config or GcnConfig.from_config()
    seed = gcn_config.seed if seed is None else seed
    train_part, val_part, _ = split(corpus, ratios, seed)
    train_set = build_dataset(train_part, gcn_config.n_nodes, mask)
    val_set = build_dataset(val_part, gcn_config.n_nodes, mask)

    model = GcnModel.initialize(gcn_config)
    trained, history = train(model, train_set, gcn_config, validation=val_set or None)
    if val_set:
        logger.info(f"Validation accuracy: {accuracy(trained, val_set):.4f}")
    return trained, history, val_set

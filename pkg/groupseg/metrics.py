"""Occlusion-aware segmentation metrics and the conversions between flat and grouped predictions.

Visible metrics compare the visible sets, present metrics compare the amodal
present sets. Present metrics exist with and without void accounting; with
void each group's void region is an additional class. Pixel accuracy on
present sets is reported in the literal form (divided by the number of pixels,
may exceed 1 under multi-layer occlusion) and in the normalized form (divided
by the summed ground truth set sizes).

Argmax ties always go to the lowest index. Classes whose union is empty are
excluded from mean IoU values.
"""

from typing import Iterable, Optional
import json
import logging
import numpy as np
import pandas as pd
from .dataset import RegionSets, write_json
from .errors import MetricError, ShapeError
from .head import GroupedPrediction, plausibility_violation
from .schema import BACKGROUND_GROUP, GroupSchema
from .statistics import RecordDiscrete
from .tools import run_parallel


__title__ = "groupseg"
__version__ = "1.0"
__author__ = "groupseg developers"
__copyright__ = """
Copyright 2026 groupseg developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
__license__ = "Apache 2.0"


logger = logging.getLogger(__name__)


REPORT_VERSION: int = 1
POOLING_MAX: str = "max"
POOLING_SUM: str = "sum"
METRIC_NAMES: tuple = ("pa_vis", "miou_vis", "pa_pres", "pa_pres_normalized", "miou_pres", "pa_pres_void", "pa_pres_void_normalized", "miou_pres_void")


def derive_vis_from_gss(pred: GroupedPrediction, schema: GroupSchema) -> np.ndarray:
    """Visible labels of a grouped prediction: most probable group, then its most probable category (void excluded).

    Args:
        pred (GroupedPrediction): Prediction
        schema (GroupSchema): Schema

    Returns:
        np.ndarray: Category ids with the spatial shape of the prediction
    """
    best_group: np.ndarray = np.argmax(pred.p, axis=-1)
    candidates: list = []
    for i in range(schema.group_count):
        members: np.ndarray = np.array(schema.members(i), dtype=np.int64)
        candidates.append(members[np.argmax(pred.category_probabilities(i), axis=-1)])
    return np.take_along_axis(np.stack(candidates, axis=-1), best_group[..., None], axis=-1)[..., 0]


def derive_pres_from_gss(pred: GroupedPrediction, schema: GroupSchema) -> np.ndarray:
    """Present masks of a grouped prediction: argmax of each q^i (void included) names the present category.

    Args:
        pred (GroupedPrediction): Prediction
        schema (GroupSchema): Schema

    Returns:
        np.ndarray: (N, ...) boolean present masks
    """
    pres: np.ndarray = np.zeros((schema.N,) + pred.shape, dtype=bool)
    for i in range(schema.group_count):
        winner: np.ndarray = np.argmax(pred.q[i], axis=-1) - schema.void_offset(i)
        for j, c in enumerate(schema.members(i)): pres[c] = winner == j
    return pres


def derive_pres_from_dss(posterior: np.ndarray, schema: GroupSchema, pooling: str = POOLING_MAX) -> np.ndarray:
    """Present masks derived from a flat posterior.

    Background categories: argmax restricted to G_0. Foreground group i: argmax
    over a void pseudo-entry built from the G_0 probabilities followed by the
    categories of G_i; the void entry wins ties.

    Args:
        posterior (np.ndarray): (..., N) flat posterior
        schema (GroupSchema): Schema
        pooling (str, optional): "max" or "sum" of the G_0 probabilities. Defaults to "max".

    Raises:
        ShapeError: Channel count does not match the schema
        MetricError: Unknown pooling rule

    Returns:
        np.ndarray: (N, ...) boolean present masks
    """
    posterior = np.asarray(posterior)
    if posterior.shape[-1] != schema.N: raise ShapeError("posterior has " + str(posterior.shape[-1]) + " channels, schema has " + str(schema.N) + " categories")
    if pooling not in (POOLING_MAX, POOLING_SUM): raise MetricError("unknown pooling rule '" + str(pooling) + "'")
    shape: tuple = posterior.shape[:-1]
    pres: np.ndarray = np.zeros((schema.N,) + shape, dtype=bool)
    background: np.ndarray = posterior[..., list(schema.members(BACKGROUND_GROUP))]
    winner: np.ndarray = np.argmax(background, axis=-1)
    for j, c in enumerate(schema.members(BACKGROUND_GROUP)): pres[c] = winner == j
    pooled: np.ndarray = background.max(axis=-1) if pooling == POOLING_MAX else background.sum(axis=-1)
    for i in range(1, schema.group_count):
        restricted: np.ndarray = np.concatenate([pooled[..., None], posterior[..., list(schema.members(i))]], axis=-1)
        winner = np.argmax(restricted, axis=-1) - 1
        for j, c in enumerate(schema.members(i)): pres[c] = winner == j
    return pres


def void_from_pres(pres: np.ndarray, schema: GroupSchema) -> np.ndarray:
    """Void masks: pixels where no category of a group is present.

    Args:
        pres (np.ndarray): (N, ...) present masks
        schema (GroupSchema): Schema

    Returns:
        np.ndarray: (M+1, ...) void masks
    """
    return np.stack([~pres[list(schema.members(i))].any(axis=0) for i in range(schema.group_count)])


class PredictionMasks:
    """Predicted visible and present sets per category plus the derived void sets per group."""
    __slots__ = ("__vis", "__pres", "__void")

    def __init__(self, vis: np.ndarray, pres: np.ndarray, void: np.ndarray) -> None:
        """Predicted sets as boolean masks.

        Args:
            vis (np.ndarray): (N, H, W) predicted visible masks (a partition of the image)
            pres (np.ndarray): (N, H, W) predicted present masks
            void (np.ndarray): (M+1, H, W) predicted void masks
        """
        self.__vis: np.ndarray = np.asarray(vis, dtype=bool)
        self.__pres: np.ndarray = np.asarray(pres, dtype=bool)
        self.__void: np.ndarray = np.asarray(void, dtype=bool)
        if self.__vis.shape != self.__pres.shape or self.__vis.shape[1:] != self.__void.shape[1:]:
            raise ShapeError("prediction masks have inconsistent shapes " + str(self.__vis.shape) + ", " + str(self.__pres.shape) + ", " + str(self.__void.shape))

    @property
    def vis(self) -> np.ndarray:
        return self.__vis

    @property
    def pres(self) -> np.ndarray:
        return self.__pres

    @property
    def void(self) -> np.ndarray:
        return self.__void

    @property
    def shape(self) -> tuple:
        return self.__vis.shape[1:]

    @staticmethod
    def from_labels(labels: np.ndarray, pres: np.ndarray, schema: GroupSchema) -> "PredictionMasks":
        ids: np.ndarray = np.arange(schema.N).reshape((-1,) + (1,) * labels.ndim)
        return PredictionMasks(labels[None] == ids, pres, void_from_pres(pres, schema))

    @staticmethod
    def from_gss(pred: GroupedPrediction, schema: GroupSchema) -> "PredictionMasks":
        return PredictionMasks.from_labels(derive_vis_from_gss(pred, schema), derive_pres_from_gss(pred, schema), schema)

    @staticmethod
    def from_dss(posterior: np.ndarray, schema: GroupSchema, pooling: str = POOLING_MAX) -> "PredictionMasks":
        return PredictionMasks.from_labels(np.argmax(posterior, axis=-1), derive_pres_from_dss(posterior, schema, pooling), schema)

    @staticmethod
    def from_regions(regions: RegionSets) -> "PredictionMasks":
        """Ground truth used as prediction (oracle evaluation)."""
        return PredictionMasks(regions.vis, regions.pres, regions.void)

    def containment(self) -> float:
        """Fraction of pixels whose predicted visible category is also predicted present.

        Returns:
            float: Containment rate
        """
        if self.__vis[0].size == 0: return 1.0
        return float(np.count_nonzero(self.__vis & self.__pres) / self.__vis[0].size)


def _check_same_domain(gt: RegionSets, pred: PredictionMasks) -> None:
    if tuple(gt.shape) != tuple(pred.shape) or gt.category_count != pred.vis.shape[0]:
        raise ShapeError("ground truth " + str((gt.category_count,) + tuple(gt.shape)) + " and prediction " + str(pred.vis.shape) + " cover different domains")


def _intersections(gt: np.ndarray, pred: np.ndarray) -> tuple:
    gt = gt.reshape(gt.shape[0], -1)
    pred = pred.reshape(pred.shape[0], -1)
    return np.count_nonzero(gt & pred, axis=1), np.count_nonzero(gt | pred, axis=1), np.count_nonzero(gt, axis=1)


def _mean_iou(inter: np.ndarray, union: np.ndarray) -> float:
    used: np.ndarray = union > 0
    if not used.any(): raise MetricError("mean IoU undefined: every class has an empty union")
    return float(np.mean(inter[used] / union[used]))


def _pixels(gt: RegionSets) -> int:
    return int(np.prod(gt.shape))


def pa_vis(gt: RegionSets, pred: PredictionMasks) -> float:
    """Visible pixel accuracy: sum_c |vis_c and vis^_c| / |Omega|."""
    _check_same_domain(gt, pred)
    inter, _, _ = _intersections(gt.vis, pred.vis)
    return float(inter.sum() / _pixels(gt))


def miou_vis(gt: RegionSets, pred: PredictionMasks) -> float:
    """Visible mean IoU over the classes with non-empty union.

    Raises:
        MetricError: All unions empty
    """
    _check_same_domain(gt, pred)
    inter, union, _ = _intersections(gt.vis, pred.vis)
    return _mean_iou(inter, union)


def _pres_sets(gt: RegionSets, pred: PredictionMasks, with_void: bool) -> tuple:
    if not with_void: return gt.pres, pred.pres
    return np.concatenate([gt.pres, gt.void]), np.concatenate([pred.pres, pred.void])


def pa_pres(gt: RegionSets, pred: PredictionMasks, with_void: bool = False, normalized: bool = False) -> float:
    """Present pixel accuracy.

    Args:
        gt (RegionSets): Ground truth
        pred (PredictionMasks): Prediction
        with_void (bool, optional): Count each group's void region as an additional class. Defaults to False.
        normalized (bool, optional): Divide by the summed ground truth set sizes instead of |Omega|. Defaults to False.

    Returns:
        float: Pixel accuracy (literal form may exceed 1)
    """
    _check_same_domain(gt, pred)
    gt_sets, pred_sets = _pres_sets(gt, pred, with_void)
    inter, _, gt_size = _intersections(gt_sets, pred_sets)
    denominator: int = int(gt_size.sum()) if normalized else _pixels(gt)
    return float(inter.sum() / denominator) if denominator else 0.0


def miou_pres(gt: RegionSets, pred: PredictionMasks, with_void: bool = False) -> float:
    """Present mean IoU over the classes with non-empty union.

    Raises:
        MetricError: All unions empty
    """
    _check_same_domain(gt, pred)
    inter, union, _ = _intersections(*_pres_sets(gt, pred, with_void))
    return _mean_iou(inter, union)


class SampleCounts:
    """Integer set sizes of one sample (summed across samples for micro-averaging)."""
    __slots__ = ("vis_inter", "vis_union", "pres_inter", "pres_union", "pres_gt", "void_inter", "void_union", "void_gt", "pixels", "contained", "violation_sum", "violation_max", "violation_positive", "violation_entries")

    def __init__(self, gt: RegionSets, pred: PredictionMasks, violation: Optional[np.ndarray] = None) -> None:
        _check_same_domain(gt, pred)
        self.vis_inter, self.vis_union, _ = _intersections(gt.vis, pred.vis)
        self.pres_inter, self.pres_union, self.pres_gt = _intersections(gt.pres, pred.pres)
        self.void_inter, self.void_union, self.void_gt = _intersections(gt.void, pred.void)
        self.pixels: int = _pixels(gt)
        self.contained: int = int(np.count_nonzero(pred.vis & pred.pres))
        if violation is None: violation = np.zeros((0,))
        flat: np.ndarray = np.ascontiguousarray(violation, dtype=np.float64).reshape(-1)
        self.violation_sum: float = float(np.sum(flat))
        self.violation_max: float = float(flat.max()) if flat.size else 0.0
        self.violation_positive: int = int(np.count_nonzero(flat > 0))
        self.violation_entries: int = int(flat.size)

    def metrics(self) -> dict:
        """The metric values of these counts.

        Returns:
            dict: Metric name -> value
        """
        pres_void_inter: np.ndarray = np.concatenate([self.pres_inter, self.void_inter])
        pres_void_union: np.ndarray = np.concatenate([self.pres_union, self.void_union])
        pres_void_gt: int = int(self.pres_gt.sum() + self.void_gt.sum())
        return {
            "pa_vis": float(self.vis_inter.sum() / self.pixels),
            "miou_vis": _mean_iou(self.vis_inter, self.vis_union),
            "pa_pres": float(self.pres_inter.sum() / self.pixels),
            "pa_pres_normalized": float(self.pres_inter.sum() / self.pres_gt.sum()) if self.pres_gt.sum() else 0.0,
            "miou_pres": _mean_iou(self.pres_inter, self.pres_union),
            "pa_pres_void": float(pres_void_inter.sum() / self.pixels),
            "pa_pres_void_normalized": float(pres_void_inter.sum() / pres_void_gt) if pres_void_gt else 0.0,
            "miou_pres_void": _mean_iou(pres_void_inter, pres_void_union),
        }

    def __iadd__(self, other: "SampleCounts") -> "SampleCounts":
        for name in ("vis_inter", "vis_union", "pres_inter", "pres_union", "pres_gt", "void_inter", "void_union", "void_gt"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.pixels += other.pixels
        self.contained += other.contained
        self.violation_sum += other.violation_sum
        self.violation_max = max(self.violation_max, other.violation_max)
        self.violation_positive += other.violation_positive
        self.violation_entries += other.violation_entries
        return self


class EvalReport:
    """Aggregated evaluation result with a fixed key set (identical for flat and grouped models)."""
    __slots__ = ("__data",)

    def __init__(self, data: dict) -> None:
        if data.get("report_version") != REPORT_VERSION: raise MetricError("unsupported report version " + str(data.get("report_version")))
        self.__data: dict = data

    @property
    def data(self) -> dict:
        return self.__data

    @property
    def metrics(self) -> dict:
        return self.__data["metrics"]

    @property
    def mode(self) -> str:
        return self.__data["mode"]

    def __getitem__(self, name: str) -> float:
        return self.__data["metrics"][name]

    def to_json(self) -> str:
        return json.dumps(self.__data, indent=2, sort_keys=True) + "\n"

    def write(self, path: str) -> None:
        write_json(path, self.__data)

    @staticmethod
    def from_json(text: str) -> "EvalReport":
        return EvalReport(json.loads(text))

    @staticmethod
    def load(path: str) -> "EvalReport":
        with open(path, "r", encoding="utf-8") as file:
            return EvalReport.from_json(file.read())


def _counts_job(item: tuple) -> SampleCounts:
    gt, pred, violation = item
    return SampleCounts(gt, pred, violation)


def evaluate(ground_truth: Iterable, predictions: Iterable, schema: GroupSchema, mode: str = "oracle", violations: Optional[Iterable] = None, threads: Optional[int] = 1) -> EvalReport:
    """Aggregates the metrics over a split (micro-averaged: set sizes summed before the ratios).

    Args:
        ground_truth (Iterable[RegionSets]): Ground truth per sample
        predictions (Iterable[PredictionMasks]): Predictions per sample (same order)
        schema (GroupSchema): Schema
        mode (str, optional): Label of the prediction source ("dss", "gss" or "oracle"). Defaults to "oracle".
        violations (Optional[Iterable], optional): Plausibility violation arrays per sample (grouped models). Defaults to None.
        threads (Optional[int], optional): Worker processes for counting. Defaults to 1.

    Raises:
        MetricError: Empty split or sample count mismatch

    Returns:
        EvalReport: Report
    """
    ground_truth = list(ground_truth)
    predictions = list(predictions)
    if not ground_truth: raise MetricError("cannot evaluate an empty split")
    if len(ground_truth) != len(predictions): raise MetricError(str(len(ground_truth)) + " ground truth samples but " + str(len(predictions)) + " predictions")
    violations = [None] * len(ground_truth) if violations is None else list(violations)

    per_sample: list = run_parallel(_counts_job, zip(ground_truth, predictions, violations), threads)
    total: SampleCounts = per_sample[0]
    macro: dict = {name: RecordDiscrete() for name in METRIC_NAMES}
    for index, counts in enumerate(per_sample):
        for name, value in counts.metrics().items(): macro[name].record(value)
        if index > 0: total += counts

    metrics: dict = total.metrics()
    with np.errstate(invalid="ignore", divide="ignore"):
        iou_vis: np.ndarray = total.vis_inter / total.vis_union
        iou_pres: np.ndarray = total.pres_inter / total.pres_union
        iou_void: np.ndarray = total.void_inter / total.void_union
    per_class: dict = {}
    for c, name in enumerate(schema.categories):
        per_class[name] = {
            "iou_vis": float(iou_vis[c]) if total.vis_union[c] else None,
            "iou_pres": float(iou_pres[c]) if total.pres_union[c] else None,
            "gt_pres_pixels": int(total.pres_gt[c]),
        }
    per_group_void: dict = {name: (float(iou_void[i]) if total.void_union[i] else None) for i, name in enumerate(schema.group_names)}
    entries: int = total.violation_entries
    data: dict = {
        "report_version": REPORT_VERSION,
        "mode": mode,
        "schema_fingerprint": schema.fingerprint,
        "samples": len(per_sample),
        "pixels": total.pixels,
        "metrics": metrics,
        "pa_pres_exceeds_one": bool(metrics["pa_pres"] > 1.0),
        "per_class": per_class,
        "per_group_void": per_group_void,
        "containment": float(total.contained / total.pixels),
        "plausibility": {"applicable": entries > 0, "max": total.violation_max, "mean": total.violation_sum / entries if entries else 0.0, "fraction": total.violation_positive / entries if entries else 0.0},
        "macro": {name: {"mean": record.mean, "sd": record.sd} for name, record in macro.items()},
    }
    logger.debug("Evaluated %d samples (%s): %s", len(per_sample), mode, ", ".join("{}={:.4f}".format(k, v) for k, v in metrics.items()))
    return EvalReport(data)


def evaluate_predictions(ground_truth: Iterable, raw_predictions: Iterable, schema: GroupSchema, pooling: str = POOLING_MAX, threads: Optional[int] = 1) -> EvalReport:
    """Converts raw model outputs and evaluates them.

    Args:
        ground_truth (Iterable[RegionSets]): Ground truth per sample
        raw_predictions (Iterable): GroupedPrediction (grouped model) or flat posterior arrays (H, W, N) per sample
        schema (GroupSchema): Schema
        pooling (str, optional): G_0 pooling for flat posteriors. Defaults to "max".
        threads (Optional[int], optional): Worker processes for counting. Defaults to 1.

    Returns:
        EvalReport: Report
    """
    raw_predictions = list(raw_predictions)
    if raw_predictions and isinstance(raw_predictions[0], GroupedPrediction):
        masks: list = [PredictionMasks.from_gss(pred, schema) for pred in raw_predictions]
        violations: list = [plausibility_violation(pred) for pred in raw_predictions]
        return evaluate(ground_truth, masks, schema, "gss", violations, threads)
    masks = [PredictionMasks.from_dss(posterior, schema, pooling) for posterior in raw_predictions]
    return evaluate(ground_truth, masks, schema, "dss", None, threads)


def class_table(report: EvalReport) -> pd.DataFrame:
    """Per-category IoU table of a report.

    Args:
        report (EvalReport): Report

    Returns:
        pd.DataFrame: Rows per category, columns iou_vis and iou_pres
    """
    table: pd.DataFrame = pd.DataFrame.from_dict(report.data["per_class"], orient="index", columns=["iou_vis", "iou_pres"])
    table.index.name = "category"
    return table


COMPARISON_COLUMNS: dict = {
    "PA vis": "pa_vis",
    "MIoU vis": "miou_vis",
    "PA pres (void)": "pa_pres_void",
    "MIoU pres (void)": "miou_pres_void",
    "PA pres": "pa_pres",
    "MIoU pres": "miou_pres",
}


def compare_reports(reports: dict) -> pd.DataFrame:
    """Side-by-side comparison of several reports (visible, present with void, present without void).

    Args:
        reports (dict[str, EvalReport]): Row label -> report

    Raises:
        MetricError: Reports were computed on different schemas

    Returns:
        pd.DataFrame: One row per report
    """
    fingerprints: set = {report.data["schema_fingerprint"] for report in reports.values()}
    if len(fingerprints) > 1: raise MetricError("reports were computed on different schemas")
    rows: dict = {label: {column: report[key] for column, key in COMPARISON_COLUMNS.items()} for label, report in reports.items()}
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(COMPARISON_COLUMNS))

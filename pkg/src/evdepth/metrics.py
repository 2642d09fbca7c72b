"""Depth-map evaluation metrics.

All metrics are computed over the pixels valid in both maps whose ground
truth lies in (0, max_depth].  Ratio thresholds use strict inequality, and
the distance-cutoff errors filter ground truth only; predictions are never
clipped.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

METRIC_COLUMNS = ("abs_rel", "sq_rel", "rmse", "rmse_log",
                  "delta1", "delta2", "delta3",
                  "cutoff_10m", "cutoff_20m", "cutoff_30m", "epe")


@dataclass(frozen=True)
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    cutoff_10m: float
    cutoff_20m: float
    cutoff_30m: float
    epe: float
    n_eval: int = 0
    n_nonpositive_pred: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)

    def table(self) -> str:
        """Aligned two-line text table in the standard column order."""
        cells = [f"{getattr(self, name):.4f}" for name in METRIC_COLUMNS]
        widths = [max(len(n), len(c)) for n, c in zip(METRIC_COLUMNS, cells)]
        head = "  ".join(n.rjust(w) for n, w in zip(METRIC_COLUMNS, widths))
        body = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return head + "\n" + body


def _cutoff_error(pred, truth, cutoff):
    sel = truth <= cutoff
    if not sel.any():
        return float("nan")
    return float(np.mean(np.abs(pred[sel] - truth[sel])))


def evaluate(pred: np.ndarray, truth: np.ndarray, max_depth: float = 80.0,
             pred_valid: np.ndarray | None = None,
             truth_valid: np.ndarray | None = None) -> MetricReport:
    """Score a predicted depth map against ground truth.

    Validity defaults to positive depth on both sides (the map sentinel is
    negative).  Raises if no pixel survives the joint validity filter.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    if pred_valid is None:
        pred_valid = pred > 0
    if truth_valid is None:
        truth_valid = np.ones(truth.shape, dtype=bool)
    sel = pred_valid & truth_valid & (truth > 0) & (truth <= max_depth)
    if not sel.any():
        raise ValueError("no pixels are valid in both maps within the depth range")

    p = pred[sel]
    g = truth[sel]
    diff = p - g
    abs_diff = np.abs(diff)

    pos = p > 0
    n_nonpos = int(np.size(p) - np.count_nonzero(pos))
    if n_nonpos:
        warnings.warn(f"{n_nonpos} non-positive predictions excluded from rmse_log",
                      RuntimeWarning, stacklevel=2)
    if pos.any():
        log_err = np.log(p[pos]) - np.log(g[pos])
        rmse_log = float(np.sqrt(np.mean(log_err ** 2)))
    else:
        rmse_log = float("nan")

    ratio = np.maximum(p / g, g / p)
    return MetricReport(
        abs_rel=float(np.mean(abs_diff / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rmse=float(np.sqrt(np.mean(diff ** 2))),
        rmse_log=rmse_log,
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        cutoff_10m=_cutoff_error(p, g, 10.0),
        cutoff_20m=_cutoff_error(p, g, 20.0),
        cutoff_30m=_cutoff_error(p, g, 30.0),
        epe=float(np.mean(abs_diff)),
        n_eval=int(sel.sum()),
        n_nonpositive_pred=n_nonpos,
    )


def aggregate_reports(reports) -> MetricReport:
    """Pixel-weighted mean of per-window reports (nan cutoffs skipped)."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    total = sum(r.n_eval for r in reports)
    vals = {}
    for name in METRIC_COLUMNS:
        num = den = 0.0
        for r in reports:
            x = getattr(r, name)
            if not math.isnan(x):
                num += x * r.n_eval
                den += r.n_eval
        vals[name] = num / den if den else float("nan")
    return MetricReport(**vals, n_eval=total,
                        n_nonpositive_pred=sum(r.n_nonpositive_pred for r in reports))

"""Micro and macro evaluation metrics.

Macro: per-round bias (signed mean) and diversity (population std),
time-averaged; their absolute sim/real differences; DTW and Pearson on the
mean-attitude series.  Micro: accuracy, macro-F1, MAE and cosine.  Echo
chambers: production/consumption homogeneity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class UndefinedMetric(ValueError):
    """The metric has no value for these inputs (e.g. correlation of a constant)."""


@dataclass(frozen=True)
class AttitudeTrace:
    """Per-round statistics of a population's attitudes.

    ``vectors`` holds the full per-round attitude vectors when available;
    traces loaded from summary files carry only ``means`` and ``stds``.
    """

    rounds: tuple[int, ...]
    means: np.ndarray
    stds: np.ndarray
    vectors: tuple[np.ndarray, ...] | None = None

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]],
                     rounds: Sequence[int] | None = None) -> AttitudeTrace:
        vecs = tuple(np.asarray(v, dtype=np.float64) for v in vectors)
        if not vecs:
            raise ValueError("trace needs at least one round")
        for t, v in enumerate(vecs):
            if v.size == 0:
                raise ValueError(f"round {t + 1} has no attitudes")
            if np.any(np.abs(v) > 1.0) or np.any(np.isnan(v)):
                raise ValueError(f"round {t + 1} has attitudes outside [-1, 1]")
        rounds = tuple(rounds) if rounds is not None else tuple(range(1, len(vecs) + 1))
        means = np.array([v.mean() for v in vecs])
        stds = np.array([v.std() for v in vecs])
        return cls(rounds, means, stds, vecs)

    @classmethod
    def from_summary(cls, means: Sequence[float], stds: Sequence[float],
                     rounds: Sequence[int] | None = None) -> AttitudeTrace:
        if len(means) != len(stds) or not len(means):
            raise ValueError("means and stds must be non-empty and equally long")
        rounds = tuple(rounds) if rounds is not None else tuple(range(1, len(means) + 1))
        return cls(rounds, np.asarray(means, dtype=np.float64), np.asarray(stds, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.rounds)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "mean", "std"])
        for r, m, s in zip(self.rounds, self.means, self.stds):
            w.writerow([r, repr(float(m)), repr(float(s))])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path: str | Path) -> AttitudeTrace:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls.from_summary(
            [float(r["mean"]) for r in rows],
            [float(r["std"]) for r in rows],
            [int(r["round"]) for r in rows],
        )


def bias_and_diversity(trace: AttitudeTrace) -> tuple[float, float]:
    """Time-averaged signed mean attitude and population standard deviation."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return float(np.mean(trace.means)), float(np.mean(trace.stds))


def delta_bias_div(sim: AttitudeTrace, real: AttitudeTrace) -> tuple[float, float]:
    sb, sd = bias_and_diversity(sim)
    rb, rd = bias_and_diversity(real)
    return abs(sb - rb), abs(sd - rd)


def dtw(x: Sequence[float], y: Sequence[float]) -> float:
    """Unconstrained, unnormalized DTW with absolute-difference cost."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("dtw needs two non-empty series")
    n, m = len(x), len(y)
    cost = np.abs(x[:, None] - y[None, :])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = acc[i]
        prev = acc[i - 1]
        c = cost[i - 1]
        # the insertion move runs along the row, so it stays a scalar loop
        best_diag_up = np.minimum(prev[:-1], prev[1:])
        for j in range(1, m + 1):
            row[j] = c[j - 1] + min(best_diag_up[j - 1], row[j - 1])
    return float(acc[n, m])


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("pearson needs two series of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetric("correlation undefined for a constant series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def classification_metrics(predicted: Sequence, truth: Sequence,
                           labels: Sequence) -> tuple[float, float]:
    """Accuracy and macro-F1 over the full declared label set.

    Classes absent from both predictions and truth contribute F1 = 0.
    """
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} predictions vs {len(truth)} labels")
    if not truth:
        raise ValueError("no samples")
    accuracy = sum(p == t for p, t in zip(predicted, truth)) / len(truth)
    f1s = []
    for label in labels:
        tp = sum(p == label and t == label for p, t in zip(predicted, truth))
        fp = sum(p == label and t != label for p, t in zip(predicted, truth))
        fn = sum(p != label and t == label for p, t in zip(predicted, truth))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return accuracy, sum(f1s) / len(f1s)


def mae(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not len(a):
        raise ValueError("no samples")
    return float(np.mean(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(u @ v) / (nu * nv)))


def homogeneity(production: Sequence[str], consumption: Sequence[str],
                embed: Callable[[str], np.ndarray]) -> float | None:
    """Cosine between mean produced and mean consumed content vectors.

    Returns ``None`` when either corpus is empty so callers skip the agent.
    """
    if not production or not consumption:
        return None
    prod = np.mean([embed(t) for t in production], axis=0)
    cons = np.mean([embed(t) for t in consumption], axis=0)
    return cosine(prod, cons)


def population_homogeneity(corpora: Mapping[str, tuple[Sequence[str], Sequence[str]]],
                           embed: Callable[[str], np.ndarray]) -> float | None:
    values = [h for prod, cons in corpora.values()
              if (h := homogeneity(prod, cons, embed)) is not None]
    return float(np.mean(values)) if values else None


def macro_report(sim: AttitudeTrace, real: AttitudeTrace | None = None) -> dict[str, float | None]:
    """Flat metric document for one run."""
    bias, div = bias_and_diversity(sim)
    report: dict[str, float | None] = {"bias": bias, "diversity": div}
    if real is None:
        return report
    n = min(len(sim), len(real))
    db, dd = delta_bias_div(sim, real)
    report.update(delta_bias=db, delta_div=dd, dtw=dtw(sim.means[:n], real.means[:n]))
    try:
        report["pearson"] = pearson(sim.means[:n], real.means[:n])
    except (UndefinedMetric, ValueError):
        report["pearson"] = None
    return report


def write_report(report: Mapping[str, object], json_path: str | Path,
                 csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if csv_path is not None:
        flat = {k: v for k, v in sorted(report.items()) if not isinstance(v, (dict, list))}
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(flat.keys())
            w.writerow(["" if v is None else v for v in flat.values()])


def mean_reports(reports: Iterable[Mapping[str, float | None]]) -> dict[str, float | None]:
    reports = list(reports)
    keys = sorted({k for r in reports for k in r})
    out: dict[str, float | None] = {}
    for k in keys:
        vals = [r[k] for r in reports if r.get(k) is not None]
        out[k] = float(np.mean(vals)) if vals else None
    return out

"""Disagreement, ensemble confidence and calibration for tables of hard predictions."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .linalg import InvalidInput


@dataclass
class PredictionTable:
    """``preds[i, j]``: label predicted by model i on example j."""

    preds: np.ndarray
    n_classes: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.preds = np.atleast_2d(np.asarray(self.preds, dtype=np.int64))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if len(self.labels) != self.preds.shape[1]:
                raise InvalidInput("label count differs from example count")
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise InvalidInput("label out of range")
        if self.preds.size and (self.preds.min() < 0 or self.preds.max() >= self.n_classes):
            raise InvalidInput("prediction out of range")

    @property
    def n_models(self) -> int:
        return self.preds.shape[0]

    @property
    def n_examples(self) -> int:
        return self.preds.shape[1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = [f"model{i}" for i in range(self.n_models)]
            w.writerow(head + (["label"] if self.labels is not None else []))
            for j in range(self.n_examples):
                row = [int(v) for v in self.preds[:, j]]
                w.writerow(row + ([int(self.labels[j])] if self.labels is not None else []))

    @classmethod
    def read_csv(cls, path, n_classes: int) -> "PredictionTable":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        head, body = rows[0], np.array(rows[1:], dtype=np.int64).reshape(len(rows) - 1, len(rows[0]))
        if head[-1] == "label":
            return cls(body[:, :-1].T, n_classes, body[:, -1])
        return cls(body.T, n_classes)


def _need_labels(table_or_labels):
    if table_or_labels is None:
        raise InvalidInput("this quantity needs true labels")
    return table_or_labels


def disagreement_rate(table: PredictionTable, i: int, j: int) -> float:
    return float(np.mean(table.preds[i] != table.preds[j]))


def test_error(table: PredictionTable, i: int) -> float:
    y = _need_labels(table.labels)
    return float(np.mean(table.preds[i] != y))


def confidence_profile(table: PredictionTable) -> np.ndarray:
    """(n, K) array of per-class vote fractions across models."""
    n, K, M = table.n_examples, table.n_classes, table.n_models
    counts = np.zeros((n, K))
    cols = np.arange(n)
    for i in range(M):
        np.add.at(counts, (cols, table.preds[i]), 1.0)
    return counts / M


def confidence_counts(table: PredictionTable) -> np.ndarray:
    n, K = table.n_examples, table.n_classes
    counts = np.zeros((n, K), dtype=np.int64)
    for i in range(table.n_models):
        np.add.at(counts, (np.arange(n), table.preds[i]), 1)
    return counts


def expected_disagreement(profile: np.ndarray, distinct_pairs: bool = False, n_models: int | None = None) -> float:
    """mean_x sum_k h_k (1 - h_k): the with-replacement pair estimator.

    With ``distinct_pairs`` the value is rescaled by M/(M-1), the average over
    ordered pairs of distinct models.
    """
    val = float(np.mean(np.sum(profile * (1.0 - profile), axis=1)))
    if distinct_pairs:
        if n_models is None or n_models < 2:
            raise InvalidInput("the distinct-pair estimator needs n_models >= 2")
        val *= n_models / (n_models - 1)
    return val


def expected_test_error(profile: np.ndarray, labels) -> float:
    labels = np.asarray(_need_labels(labels))
    return float(np.mean(1.0 - profile[np.arange(len(labels)), labels]))


@dataclass
class BinRow:
    lo: float
    hi: float
    count: int
    accuracy: float
    confidence: float


def _bin_index(conf: np.ndarray, bins: int) -> np.ndarray:
    # left-closed, right-open; the last bin also takes 1.0. The small offset keeps
    # values like 3/10 that sit on an edge from rounding into the bin below.
    return np.minimum(np.floor(conf * bins + 1e-9).astype(np.int64), bins - 1)


def cace(profile: np.ndarray, labels, bins: int = 10) -> tuple[float, list[BinRow]]:
    """Class-aggregated calibration error over bins pooled across all classes.

    Every (example, class) pair lands in the bin of its confidence; a bin's
    accuracy is the fraction of its pairs whose class is the true label, and
    its weight is (pairs in bin) / (examples).
    """
    labels = np.asarray(_need_labels(labels))
    if bins < 1:
        raise InvalidInput("bins must be at least 1")
    n, K = profile.shape
    conf = profile.ravel()
    hit = (np.arange(K)[None, :] == labels[:, None]).ravel().astype(np.float64)
    idx = _bin_index(conf, bins)
    total = 0.0
    rows = []
    for b in range(bins):
        sel = idx == b
        c = int(sel.sum())
        if c == 0:
            rows.append(BinRow(b / bins, (b + 1) / bins, 0, float("nan"), float("nan")))
            continue
        acc, cf = float(hit[sel].mean()), float(conf[sel].mean())
        total += c / n * abs(acc - cf)
        rows.append(BinRow(b / bins, (b + 1) / bins, c, acc, cf))
    return total, rows


def cace_exact(counts: np.ndarray, labels, n_models: int) -> Fraction:
    """CACE with one bin per attainable confidence value k/M, in exact rational arithmetic."""
    labels = np.asarray(_need_labels(labels))
    n, K = counts.shape
    total = Fraction(0)
    hit = np.arange(K)[None, :] == labels[:, None]
    for k in range(n_models + 1):
        sel = counts == k
        c = int(sel.sum())
        if c == 0:
            continue
        acc = Fraction(int(hit[sel].sum()), c)
        total += Fraction(c, n) * abs(acc - Fraction(k, n_models))
    return total


def ete_edr_exact(counts: np.ndarray, labels, n_models: int) -> tuple[Fraction, Fraction]:
    labels = np.asarray(_need_labels(labels))
    n = counts.shape[0]
    M = n_models
    ete = Fraction(int(np.sum(M - counts[np.arange(n), labels])), n * M)
    edr = Fraction(int(np.sum(counts * (M - counts))), n * M * M)
    return ete, edr


def ece(profile: np.ndarray, labels, bins: int = 10) -> float:
    """Top-class calibration error: bins over the ensemble's top confidence."""
    labels = np.asarray(_need_labels(labels))
    if bins < 1:
        raise InvalidInput("bins must be at least 1")
    n = len(labels)
    top = np.argmax(profile, axis=1)
    conf = profile[np.arange(n), top]
    hit = (top == labels).astype(np.float64)
    idx = _bin_index(conf, bins)
    total = 0.0
    for b in range(bins):
        sel = idx == b
        if sel.any():
            total += sel.sum() / n * abs(hit[sel].mean() - conf[sel].mean())
    return float(total)


@dataclass
class GdeReport:
    test_errors: list[float]
    disagreements: list[float]
    ete: float
    edr: float
    cace: float
    ece: float
    exact_bins: bool
    slack: float = 0.0

    @property
    def gap(self) -> float:
        return abs(self.ete - self.edr)

    @property
    def deviation_verdict(self) -> bool:
        return deviation_check(self)

    def to_json(self) -> str:
        d = asdict(self)
        d.update(gap=self.gap, deviation_verdict=self.deviation_verdict)
        return json.dumps(d, indent=2, sort_keys=True)


def gde_report(table: PredictionTable, bins: int | None = 10, slack: float = 0.0) -> GdeReport:
    """``bins=None`` selects exact bins (one per attainable confidence) with rational arithmetic."""
    y = _need_labels(table.labels)
    M = table.n_models
    prof = confidence_profile(table)
    errs = [test_error(table, i) for i in range(M)]
    dis = [disagreement_rate(table, i, j) for i in range(M) for j in range(i + 1, M)]
    if bins is None:
        counts = confidence_counts(table)
        ete, edr = ete_edr_exact(counts, y, M)
        c = cace_exact(counts, y, M)
        return GdeReport(errs, dis, float(ete), float(edr), float(c), ece(prof, y, M + 1), True, slack)
    c, _ = cace(prof, y, bins)
    return GdeReport(errs, dis, expected_test_error(prof, y), expected_disagreement(prof), c,
                     ece(prof, y, bins), False, slack)


def deviation_check(report: GdeReport) -> bool:
    """|ETE - EDR| <= CACE + slack."""
    return report.gap <= report.cace + report.slack


def deviation_check_exact(table: PredictionTable) -> tuple[bool, Fraction, Fraction]:
    """Zero-slack check in exact arithmetic: returns (holds, gap, cace)."""
    counts = confidence_counts(table)
    y = _need_labels(table.labels)
    ete, edr = ete_edr_exact(counts, y, table.n_models)
    c = cace_exact(counts, y, table.n_models)
    gap = abs(ete - edr)
    return gap <= c, gap, c


@dataclass
class ScatterRow:
    disagreement: float
    test_error: float
    mode: str


def gde_scatter(run_pairs) -> list[ScatterRow]:
    """``run_pairs``: iterable of (preds1, preds2, labels, mode); test error is model 1's."""
    rows = []
    for p1, p2, y, mode in run_pairs:
        p1, p2, y = np.asarray(p1), np.asarray(p2), np.asarray(y)
        rows.append(ScatterRow(float(np.mean(p1 != p2)), float(np.mean(p1 != y)), str(mode)))
    return rows


def write_scatter_csv(rows: list[ScatterRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["disagreement", "test_error", "mode"])
        for r in rows:
            w.writerow([repr(r.disagreement), repr(r.test_error), r.mode])

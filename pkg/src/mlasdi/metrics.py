"""Error metrics and uncertainty scores for predicted trajectories."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoSamples, ZeroNormSlice


def max_relative_error(truth, approx):
    """Worst-over-time relative Euclidean error ``max_j |u_j - v_j| / |u_j|``."""
    truth = np.asarray(truth, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if truth.shape != approx.shape:
        raise DimensionMismatch(f"shapes differ: {truth.shape} vs {approx.shape}")
    norms = np.linalg.norm(truth, axis=-1)
    if np.any(norms == 0):
        bad = np.flatnonzero(norms == 0)
        raise ZeroNormSlice(f"truth has zero norm at time indices {bad.tolist()}")
    return float(np.max(np.linalg.norm(truth - approx, axis=-1) / norms))


def percentile_error(errors, q):
    """Sorted-ascending element at 1-based rank ``ceil(q/100 * n)``."""
    errors = np.sort(np.asarray(errors, dtype=np.float64).reshape(-1))
    if errors.size == 0:
        raise ValueError("errors must be non-empty")
    if not 0 < q <= 100:
        raise ValueError("q must lie in (0, 100]")
    # round first so that e.g. 0.9 * 10 is not pushed to rank 10 by float error
    rank = math.ceil(round(q / 100.0 * errors.size, 9))
    return float(errors[max(rank, 1) - 1])


def prediction_std_summary(pred):
    """Scalar uncertainty: ``max_j |std_j| / |mean_j|`` over time slices."""
    if pred.samples is None or len(pred.samples) == 0:
        raise NoSamples("prediction carries no posterior samples")
    mean_norm = np.linalg.norm(pred.mean_trajectory, axis=-1)
    if np.any(mean_norm == 0):
        raise ZeroNormSlice("mean trajectory has a zero-norm time slice")
    return float(np.max(np.linalg.norm(pred.std_field, axis=-1) / mean_norm))


@dataclass
class ErrorReport:
    parameters: np.ndarray
    errors: np.ndarray
    std_scores: np.ndarray = None
    is_training: np.ndarray = None

    def __post_init__(self):
        self.parameters = np.atleast_2d(np.asarray(self.parameters, dtype=np.float64))
        self.errors = np.asarray(self.errors, dtype=np.float64)
        n = self.errors.size
        if self.std_scores is None:
            self.std_scores = np.full(n, np.nan)
        if self.is_training is None:
            self.is_training = np.zeros(n, dtype=bool)
        self.std_scores = np.asarray(self.std_scores, dtype=np.float64)
        self.is_training = np.asarray(self.is_training, dtype=bool)

    @property
    def max(self):
        return percentile_error(self.errors, 100)

    @property
    def p90(self):
        return percentile_error(self.errors, 90)

    @property
    def p75(self):
        return percentile_error(self.errors, 75)

    def summary(self):
        return {"max": self.max, "p90": self.p90, "p75": self.p75}

    def to_csv(self, path):
        dims = self.parameters.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"mu{d}" for d in range(dims)] + ["max_rel_error", "std_score", "is_training"])
            for mu, e, s, tr in zip(self.parameters, self.errors, self.std_scores, self.is_training):
                w.writerow([repr(float(v)) for v in mu] + [repr(float(e)), repr(float(s)), str(bool(tr)).lower()])

"""Support-recovery metrics for a fitted coefficient vector."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np

ZERO_THRESHOLD = 1e-8


@dataclass(frozen=True)
class MetricsRecord:
    method: str
    lam: float
    eta: float
    tpr: Optional[float]
    fpr: Optional[float]
    sign_exact: bool
    rep: int = 0
    seed: int = 0

    @property
    def diff(self) -> float:
        return (self.tpr or 0.0) - (self.fpr or 0.0)

    def to_dict(self) -> dict:
        return asdict(self)


def selected(beta_hat) -> np.ndarray:
    """Boolean mask of coefficients treated as non-zero.

    A coordinate is selected when ``|b_j| > 1e-8 * (1 + ||b||_inf)``; this only
    removes numerical dust, since soft-thresholding yields exact zeros.
    """
    b = np.asarray(beta_hat, dtype=np.float64)
    scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
    return np.abs(b) > ZERO_THRESHOLD * scale


def selection_metrics(beta_hat, beta_star, q: int) -> dict:
    """TPR over the first ``q`` coordinates, FPR over the remaining ones, and
    whether the thresholded sign vector matches ``sign(beta_star)`` exactly.

    A rate whose denominator is zero (``q == 0`` or ``q == p``) is ``None``.
    """
    b = np.asarray(beta_hat, dtype=np.float64)
    truth = np.asarray(beta_star, dtype=np.float64)
    if b.shape != truth.shape:
        raise ValueError(f"beta_hat {b.shape} and beta_star {truth.shape} differ in shape")
    p = b.size
    if not 0 <= q <= p:
        raise ValueError(f"q={q} outside [0, {p}]")
    mask = selected(b)
    tpr = float(np.count_nonzero(mask[:q])) / q if q > 0 else None
    fpr = float(np.count_nonzero(mask[q:])) / (p - q) if q < p else None
    signs = np.where(mask, np.sign(b), 0.0)
    sign_exact = bool(np.array_equal(signs, np.sign(truth)))
    return {"tpr": tpr, "fpr": fpr, "sign_exact": sign_exact}


def best_tpr_minus_fpr(records: Iterable[MetricsRecord]) -> MetricsRecord:
    """Record with the largest ``tpr - fpr``.

    Ties go to the larger ``lam``, then the larger ``eta``, so the choice does
    not depend on record order.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    return max(records, key=lambda r: (r.diff, r.lam, r.eta))

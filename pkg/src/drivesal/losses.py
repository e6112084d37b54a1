"""Saliency losses (KL, CC, NSS), binary cross-entropy and ROC/AUC.

Loss functions take numpy arrays or tensors and return scalar tensors so
they can be differentiated; the metric helpers at the bottom return floats.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor
from .errors import ArgumentError, ContractError, DegenerateInputError, DimensionError


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"map shapes differ: {a.shape} vs {b.shape}")


def _centered(x):
    m = x - x.mean()
    var = (m * m).mean()
    if var.item() <= 0.0:
        raise DegenerateInputError("map has zero variance")
    return m, var


def sum_to_one(x):
    """Divide a non-negative map by its total mass (differentiable)."""
    x = _t(x)
    total = x.sum()
    if not total.item() > 0.0:
        raise DegenerateInputError("map has no positive mass")
    return x / total


def kl_loss(y_true, y_pred, epsilon=1e-7, tol=1e-6):
    """``sum y_true * log(y_true / (y_pred + eps) + eps)`` over pixels.

    Both maps must already sum to one (within ``tol``).
    """
    y_true, y_pred = _t(y_true), _t(y_pred)
    _same_shape(y_true, y_pred)
    for name, m in (("y_true", y_true), ("y_pred", y_pred)):
        if abs(m.data.sum() - 1.0) > tol or np.any(m.data < 0):
            raise ContractError(f"{name} must be a non-negative map summing to 1 (sum={m.data.sum():.6g})")
    return (y_true * (y_true / (y_pred + epsilon) + epsilon).log()).sum()


def cc_loss(y_true, y_pred):
    """``1 - r^2`` with ``r`` the Pearson correlation of the two maps."""
    y_true, y_pred = _t(y_true), _t(y_pred)
    _same_shape(y_true, y_pred)
    a, va = _centered(y_true)
    b, vb = _centered(y_pred)
    r = (a * b).mean() / (va * vb).sqrt()
    return 1.0 - r * r


def nss(y_pred, y_fix):
    """Mean of the standardized prediction over fixated pixels (scalar tensor)."""
    y_pred, y_fix = _t(y_pred), _t(y_fix)
    _same_shape(y_pred, y_fix)
    fix = y_fix.data
    if np.any((fix != 0) & (fix != 1)):
        raise ContractError("fixation map must be binary")
    n = fix.sum()
    if n < 1:
        raise ArgumentError("fixation map has no fixations")
    m, var = _centered(y_pred)
    return (m / var.sqrt() * fix).sum() * (1.0 / n)


def nss_loss(y_pred, y_fix):
    """Negated NSS, so that lower is better."""
    return -nss(y_pred, y_fix)


@dataclass
class LossConfig:
    epsilon: float = 1e-7
    w_kl: float = 1.0
    w_cc: float = 1.0
    w_nss: float = 1.0
    nss_enabled: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ArgumentError("epsilon must be positive")
        if min(self.w_kl, self.w_cc, self.w_nss) < 0:
            raise ArgumentError("loss weights must be non-negative")

    @classmethod
    def from_terms(cls, terms, epsilon=1e-7):
        """``['CC', 'KL']`` -> unit weights on the listed terms, zero elsewhere."""
        terms = {t.upper() for t in terms}
        unknown = terms - {"KL", "CC", "NSS"}
        if unknown:
            raise ArgumentError(f"unknown loss terms {sorted(unknown)}")
        return cls(epsilon, float("KL" in terms), float("CC" in terms), float("NSS" in terms), "NSS" in terms)


def loss_terms(y_true, y_pred, y_fix=None, config=None):
    """Individual weighted-in terms as a dict; zero-weight terms are skipped."""
    config = config or LossConfig()
    if config.nss_enabled and config.w_nss > 0 and y_fix is None:
        raise ArgumentError("NSS term enabled but no fixation map given")
    terms = {}
    if config.w_cc > 0:
        terms["CC"] = cc_loss(y_true, y_pred)
    if config.w_kl > 0:
        terms["KL"] = kl_loss(sum_to_one(y_true), sum_to_one(y_pred), config.epsilon)
    if config.nss_enabled and config.w_nss > 0:
        terms["NSS"] = nss_loss(y_pred, y_fix)
    return terms


def combined_loss(y_true, y_pred, y_fix=None, config=None, return_terms=False):
    """Weighted sum of the enabled saliency losses.

    The KL term compares the sum-normalized maps; CC and NSS use the raw maps.
    """
    config = config or LossConfig()
    terms = loss_terms(y_true, y_pred, y_fix, config)
    if not terms:
        raise ArgumentError("no loss term enabled")
    weights = {"KL": config.w_kl, "CC": config.w_cc, "NSS": config.w_nss}
    total = None
    for name, value in terms.items():
        part = value if weights[name] == 1.0 else value * weights[name]
        total = part if total is None else total + part
    return (total, terms) if return_terms else total


def bce_loss(labels, probs, clamp=1e-7):
    labels, probs = _t(labels), _t(probs)
    if labels.size == 0:
        raise ArgumentError("empty input")
    _same_shape(labels, probs)
    p = probs.clip(clamp, 1.0 - clamp)
    y = labels.data
    return -((y * p.log() + (1.0 - y) * (1.0 - p).log()).mean())


# -- ROC / AUC --------------------------------------------------------------


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DimensionError("scores and labels differ in length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ArgumentError("labels must be 0/1")
    labels = labels.astype(bool)
    if labels.all() or not labels.any():
        raise ArgumentError("need at least one positive and one negative label")
    return scores, labels


def roc_curve(scores, labels):
    """ROC points at every distinct threshold, from (0, 0) to (1, 1).

    Returns ``(fpr, tpr, thresholds)``; ``thresholds[0]`` is ``+inf``.
    """
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    fpr = np.r_[0.0, fp / (~labels).sum()]
    tpr = np.r_[0.0, tp / labels.sum()]
    return fpr, tpr, np.r_[np.inf, s[last]]


def auc(scores, labels):
    """Area under the ROC curve by the trapezoid rule over exact thresholds."""
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


# -- float-valued metrics -------------------------------------------------


def cc(y_true, y_pred):
    """Pearson correlation of two maps."""
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError("map shapes differ")
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    if den == 0:
        raise DegenerateInputError("map has zero variance")
    return float((a * b).sum() / den)


def kld(y_true, y_pred, epsilon=1e-7):
    return kl_loss(sum_to_one(y_true), sum_to_one(y_pred), epsilon).item()


def nss_score(y_pred, y_fix):
    return nss(y_pred, y_fix).item()


METRIC_COLUMNS = ("model_id", "CC", "KLD", "NSS", "AUC")


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_metrics_csv(rows, path):
    """Write rows (dicts keyed by :data:`METRIC_COLUMNS`); missing metrics are blank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([row["model_id"]] + [_fmt(row.get(c)) for c in METRIC_COLUMNS[1:]])


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            out.append({k: (row[k] if k == "model_id" else (float(row[k]) if row[k] else None)) for k in METRIC_COLUMNS})
        return out

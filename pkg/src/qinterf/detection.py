"""
Cluster counting by thresholded local maxima, plus entropy and sparsity.

A node survives if its value is at least ``threshold_fraction * max``.  A
surviving node is a peak if no axis-adjacent neighbour is larger.  That is
two neighbours in 1-D and four in 2-D; neighbours off the grid are ignored.
Adjacent peak nodes necessarily share one value.  Such a plateau is merged
into a single peak, reported at its lowest row-major index.  A plateau that
touches an equal-valued node which is not itself a peak is not a maximum and
is dropped.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "PeakReport",
    "FieldMetrics",
    "count_peaks",
    "field_entropy",
    "field_sparsity",
    "field_metrics",
    "format_peak_report",
]

NORM_TOL = 1e-8


@dataclass(frozen=True)
class PeakReport:
    threshold_fraction: float
    absolute_threshold: float
    peaks: tuple  # ((coords, value), ...)
    count: int
    plateau_merges: int

    @property
    def locations(self):
        return [c for c, _ in self.peaks]


@dataclass(frozen=True)
class FieldMetrics:
    entropy: float
    sparsity: float
    max_value: float


def _neighbour_max(a):
    """Largest axis-adjacent neighbour of every node (``-inf`` where none)."""
    out = np.full(a.shape, -np.inf)
    for ax in range(a.ndim):
        n = a.shape[ax]
        if n < 2:
            continue
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[ax], hi[ax] = slice(0, n - 1), slice(1, n)
        lo, hi = tuple(lo), tuple(hi)
        out[lo] = np.maximum(out[lo], a[hi])
        out[hi] = np.maximum(out[hi], a[lo])
    return out


def count_peaks(field, threshold_fraction=0.5):
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(f"threshold_fraction must lie in (0, 1), got {threshold_fraction}")
    a = field.values.reshape(field.grid.shape)
    if a.size == 0:
        raise ValueError("empty field")
    top = float(a.max())
    thr = threshold_fraction * top
    cand = (a >= _neighbour_max(a)) & (a >= thr)
    structure = ndimage.generate_binary_structure(a.ndim, 1)
    labels, nlab = ndimage.label(cand, structure=structure)
    # equal-valued neighbour that is not a candidate: the plateau is a shelf
    shelf = np.zeros(nlab + 1, dtype=bool)
    for ax in range(a.ndim):
        n = a.shape[ax]
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[ax], hi[ax] = slice(0, n - 1), slice(1, n)
        lo, hi = tuple(lo), tuple(hi)
        eq = a[lo] == a[hi]
        shelf[labels[lo][eq & cand[lo] & ~cand[hi]]] = True
        shelf[labels[hi][eq & cand[hi] & ~cand[lo]]] = True
    coords = field.grid.nodes
    flat = labels.reshape(-1)
    peaks = []
    merges = 0
    for lab in range(1, nlab + 1):
        if shelf[lab]:
            continue
        members = np.flatnonzero(flat == lab)
        merges += members.size - 1
        k = members[0]
        peaks.append((tuple(float(c) for c in coords[k]), float(field.values[k])))
    return PeakReport(threshold_fraction, thr, tuple(peaks), len(peaks), merges)


def _check_normalized(field):
    total = field.integral()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"field is not normalized (integral {total!r})")


def field_entropy(field):
    """Differential entropy ``-int p ln p`` in nats; zero cells are skipped."""
    _check_normalized(field)
    p = field.values
    w = field.grid.weights
    pos = p > 0
    return float(-np.sum(w[pos] * p[pos] * np.log(p[pos])))


def field_sparsity(field):
    """``int sqrt(p)``; smaller means more concentrated."""
    _check_normalized(field)
    return float(np.dot(np.sqrt(field.values), field.grid.weights))


def field_metrics(field):
    return FieldMetrics(field_entropy(field), field_sparsity(field), float(field.values.max()))


def format_peak_report(report):
    head = [
        f"threshold_fraction={report.threshold_fraction!r}",
        f"absolute_threshold={report.absolute_threshold!r}",
        f"count={report.count}",
        f"plateau_merges={report.plateau_merges}",
    ]
    rows = ["\t".join([repr(c) for c in coords] + [repr(v)]) for coords, v in report.peaks]
    return "\n".join(head + rows) + "\n"

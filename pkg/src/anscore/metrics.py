"""Agreement and evaluation statistics.

Quadratic weighted kappa, Krippendorff's alpha over partially observed
rating tables, class-wise F1, weighted percentile-bootstrap confidence
intervals, majority vote with seeded tie-breaking, and the two-sided
Wilcoxon signed-rank test (exact up to n = 25, normal approximation with
tie correction above).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .errors import UndefinedMetricError

Label = Hashable


# ---------------------------------------------------------------------------
# Quadratic weighted kappa
# ---------------------------------------------------------------------------


def confusion_matrix(a: Sequence[int], b: Sequence[int], min_score: int, max_score: int) -> np.ndarray:
    """Observed confusion counts O[i][j] over the declared score range."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    r = max_score - min_score + 1
    av = np.asarray(a, dtype=int) - min_score
    bv = np.asarray(b, dtype=int) - min_score
    for name, v in (("a", av), ("b", bv)):
        if len(v) and (v.min() < 0 or v.max() >= r):
            raise ValueError(f"{name}: entries outside [{min_score}, {max_score}]")
    out = np.zeros((r, r), dtype=float)
    np.add.at(out, (av, bv), 1.0)
    return out


def qwk(a: Sequence[int], b: Sequence[int], min_score: int, max_score: int) -> float:
    """Quadratic weighted kappa between two integer rating vectors.

    Computes ``1 - sum(w*O) / sum(w*E)`` with quadratic disagreement
    weights ``w[i][j] = (i-j)^2 / (R-1)^2``, observed confusion matrix O,
    and expected matrix E given by the outer product of the marginals
    scaled to the same total. When both the observed and expected weighted
    disagreements are zero (degenerate single-category agreement) the
    value is 1.0 by convention, with a warning.
    """
    if len(a) == 0:
        raise ValueError("qwk requires at least one rating pair")
    o = confusion_matrix(a, b, min_score, max_score)
    r = o.shape[0]
    n = o.sum()
    if r == 1:
        warnings.warn("qwk: single-category range; returning 1.0 by convention")
        return 1.0
    idx = np.arange(r, dtype=float)
    w = (idx[:, None] - idx[None, :]) ** 2 / (r - 1) ** 2
    e = np.outer(o.sum(axis=1), o.sum(axis=0)) / n
    num = float((w * o).sum())
    den = float((w * e).sum())
    if den == 0.0:
        if num == 0.0:
            warnings.warn("qwk: zero expected disagreement; returning 1.0 by convention")
            return 1.0
        raise UndefinedMetricError("qwk: zero expected but nonzero observed disagreement")
    return 1.0 - num / den


# ---------------------------------------------------------------------------
# Krippendorff's alpha
# ---------------------------------------------------------------------------


@dataclass
class RatingsTable:
    """Partially observed (unit, rater) -> label table.

    ``domain`` declares the finite ordered label set; when omitted it is
    inferred as the sorted set of observed values.
    """

    units: list[Hashable]
    raters: list[Hashable]
    values: dict[tuple[Hashable, Hashable], Label]
    domain: tuple[Label, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.raters) < 2:
            raise ValueError("a ratings table needs at least 2 raters")
        unit_set, rater_set = set(self.units), set(self.raters)
        for (u, r) in self.values:
            if u not in unit_set or r not in rater_set:
                raise ValueError(f"value for unknown (unit, rater) pair ({u!r}, {r!r})")

    def ordered_domain(self) -> tuple[Label, ...]:
        if self.domain is not None:
            return tuple(self.domain)
        return tuple(sorted({v for v in self.values.values()}))

    def unit_values(self, unit: Hashable) -> list[Label]:
        return [self.values[(unit, r)] for r in self.raters if (unit, r) in self.values]

    def rater_vector(self, rater: Hashable, units: Sequence[Hashable] | None = None) -> list[Label]:
        units = self.units if units is None else units
        return [self.values[(u, rater)] for u in units]

    @classmethod
    def from_rows(
        cls,
        rows: Mapping[Hashable, Mapping[Hashable, Label]],
        domain: tuple[Label, ...] | None = None,
    ) -> "RatingsTable":
        """Build from {unit: {rater: label}} nested mappings."""
        units = list(rows.keys())
        raters_seen: list[Hashable] = []
        values: dict[tuple[Hashable, Hashable], Label] = {}
        for u, rv in rows.items():
            for r, v in rv.items():
                if r not in raters_seen:
                    raters_seen.append(r)
                values[(u, r)] = v
        return cls(units=units, raters=raters_seen, values=values, domain=domain)


def _coincidence_matrix(table: RatingsTable, domain: tuple[Label, ...]) -> np.ndarray:
    index = {v: i for i, v in enumerate(domain)}
    d = len(domain)
    o = np.zeros((d, d), dtype=float)
    for u in table.units:
        vals = table.unit_values(u)
        m_u = len(vals)
        if m_u < 2:
            continue
        for a in vals:
            for b in vals:
                o[index[a], index[b]] += 1.0 / (m_u - 1)
        # remove self-pairs counted above
        for a in vals:
            o[index[a], index[a]] -= 1.0 / (m_u - 1)
    return o


def _distance_matrix(domain: tuple[Label, ...], marginals: np.ndarray, kind: str) -> np.ndarray:
    d = len(domain)
    delta = np.zeros((d, d), dtype=float)
    if kind == "nominal":
        delta = 1.0 - np.eye(d)
    elif kind == "interval":
        vals = np.asarray([float(v) for v in domain])
        delta = (vals[:, None] - vals[None, :]) ** 2
    elif kind == "ordinal":
        # squared difference of cumulative coincidence marginals between ranks
        for i in range(d):
            for j in range(d):
                lo, hi = min(i, j), max(i, j)
                s = marginals[lo : hi + 1].sum() - (marginals[i] + marginals[j]) / 2.0
                delta[i, j] = s * s
    else:
        raise ValueError(f"unknown distance {kind!r}; use nominal, ordinal, or interval")
    return delta


def krippendorff_alpha(table: RatingsTable, distance: str = "interval") -> float:
    """Krippendorff's alpha: ``1 - D_o / D_e`` from the coincidence matrix.

    Units with fewer than two ratings are ignored (they contribute no
    pairable values). Raises UndefinedMetricError when no unit is pairable
    or expected disagreement is zero.
    """
    domain = table.ordered_domain()
    if not domain:
        raise UndefinedMetricError("alpha: table holds no values")
    o = _coincidence_matrix(table, domain)
    n_v = o.sum(axis=1)
    n = n_v.sum()
    if n <= 1:
        raise UndefinedMetricError("alpha: fewer than two pairable values")
    delta = _distance_matrix(domain, n_v, distance)
    d_o = float((o * delta).sum())
    d_e = float((np.outer(n_v, n_v) * delta).sum()) / (n - 1.0)
    if d_e == 0.0:
        if d_o == 0.0:
            return 1.0
        raise UndefinedMetricError("alpha: zero expected disagreement")
    return 1.0 - d_o / d_e


# ---------------------------------------------------------------------------
# Class-wise F1
# ---------------------------------------------------------------------------


def classwise_f1(pred: Sequence[Label], gold: Sequence[Label], label: Label) -> float:
    """One-vs-rest F1 for ``label``; 0.0 when precision + recall is zero."""
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(gold)}")
    tp = sum(1 for p, g in zip(pred, gold) if p == label and g == label)
    fp = sum(1 for p, g in zip(pred, gold) if p == label and g != label)
    fn = sum(1 for p, g in zip(pred, gold) if p != label and g == label)
    if tp == 0 and fp == 0 and fn == 0:
        warnings.warn(f"classwise_f1: label {label!r} absent from both vectors; degenerate 0.0")
        return 0.0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Bootstrap confidence intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lo: float
    hi: float
    confidence: float
    replicates: int

    def __post_init__(self) -> None:
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")
        if self.lo > self.hi:
            raise ValueError("lo must be <= hi")

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "lo": self.lo,
            "hi": self.hi,
            "confidence": self.confidence,
            "replicates": self.replicates,
        }


def bootstrap_ci(
    metric: Callable[[np.ndarray], float],
    sample_size: int,
    *,
    weights: Sequence[float] | None = None,
    replicates: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
    max_redraws: int = 100,
) -> IntervalEstimate:
    """Percentile bootstrap of ``metric`` over index resamples.

    ``metric`` receives an index array into the original sample. Resampling
    probabilities are proportional to ``weights`` (uniform when absent;
    passing explicit uniform weights draws the very same resamples as
    passing none). Replicates on which the metric raises
    UndefinedMetricError are redrawn from a fresh substream, up to
    ``max_redraws`` times each.
    """
    n = int(sample_size)
    if n < 1:
        raise ValueError("sample_size must be >= 1")
    if weights is None:
        p = np.full(n, 1.0 / n)
    else:
        p = np.asarray(weights, dtype=float)
        if p.shape != (n,):
            raise ValueError(f"weights must have length {n}")
        if (p < 0).any() or p.sum() <= 0:
            raise ValueError("weights must be non-negative with positive sum")
        p = p / p.sum()
    point = float(metric(np.arange(n)))
    stats = np.empty(replicates, dtype=float)
    for rep in range(replicates):
        value = None
        for attempt in range(max_redraws):
            rng = np.random.default_rng([seed, rep, attempt])
            idx = rng.choice(n, size=n, replace=True, p=p)
            try:
                value = float(metric(idx))
            except UndefinedMetricError:
                continue
            break
        if value is None:
            raise UndefinedMetricError(
                f"bootstrap replicate {rep} undefined after {max_redraws} redraws"
            )
        stats[rep] = value
    tail = (1.0 - confidence) / 2.0
    lo, hi = np.quantile(stats, [tail, 1.0 - tail])
    return IntervalEstimate(point=point, lo=float(lo), hi=float(hi), confidence=confidence, replicates=replicates)


# ---------------------------------------------------------------------------
# Majority vote
# ---------------------------------------------------------------------------


def majority_vote(labels: Sequence[Sequence[Label]], seed: int = 0) -> list[Label]:
    """Per-unit modal label; ties broken by a seeded uniform draw."""
    rng = np.random.default_rng(seed)
    out: list[Label] = []
    for unit_labels in labels:
        if not unit_labels:
            raise ValueError("majority_vote: a unit has no labels")
        counts: dict[Label, int] = {}
        for v in unit_labels:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        tied = [v for v, c in counts.items() if c == top]
        try:
            tied.sort()
        except TypeError:
            tied.sort(key=repr)
        if len(tied) == 1:
            out.append(tied[0])
        else:
            out.append(tied[int(rng.integers(len(tied)))])
    return out


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------


def _signed_ranks(deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |deltas| (ties averaged) and the delta signs."""
    absd = np.abs(deltas)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(len(deltas), dtype=float)
    i = 0
    sorted_abs = absd[order]
    while i < len(deltas):
        j = i
        while j + 1 < len(deltas) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks, np.sign(deltas)


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    # Doubling tie-averaged ranks makes every achievable rank sum an
    # integer, so the distribution of 2*W+ over all sign assignments is a
    # polynomial with integer exponents, built by convolution.
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())
    dist = np.zeros(total + 1, dtype=float)
    dist[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[: total + 1 - r]
        dist = dist + shifted
    dist /= dist.sum()
    w2 = int(np.rint(2.0 * w_plus))
    p_le = dist[: w2 + 1].sum()
    p_ge = dist[w2:].sum()
    return float(min(1.0, 2.0 * min(p_le, p_ge)))


def _approx_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction over groups of equal |delta|
    _, counts = np.unique(ranks, return_counts=True)
    var -= ((counts**3 - counts) / 48.0).sum()
    if var <= 0:
        raise UndefinedMetricError("wilcoxon: zero variance under ties")
    diff = w_plus - mean
    # continuity correction toward the mean
    cc = 0.5 * np.sign(diff)
    z = (diff - cc) / math.sqrt(var)
    return float(min(1.0, math.erfc(abs(z) / math.sqrt(2.0))))


def wilcoxon_signed_rank(deltas: Sequence[float], exact_threshold: int = 25) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired differences.

    Zero deltas are dropped; ties receive average ranks. Exact
    sign-assignment distribution for n <= ``exact_threshold``, normal
    approximation with tie correction and continuity correction above.
    """
    d = np.asarray(list(deltas), dtype=float)
    d = d[d != 0.0]
    if len(d) == 0:
        raise UndefinedMetricError("wilcoxon: all deltas are zero")
    ranks, signs = _signed_ranks(d)
    w_plus = float(ranks[signs > 0].sum())
    if len(d) <= exact_threshold:
        return _exact_two_sided_p(ranks, w_plus)
    return _approx_two_sided_p(ranks, w_plus)

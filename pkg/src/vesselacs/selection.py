"""Six feature-selection heuristics: CFS, Fisher score, Gini index, Relief,
and sequential forward/backward wrapper search.

Filter scores operate on a SampleSet's feature columns; the wrapper uses a
5-NN inner classifier under stratified cross-validation. All heuristics are
deterministic given (samples, seed, parameters); ties break by feature order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import N_FEATURES, FEATURE_NAMES, FeatureId
from .sampling import SampleSet, VESSEL

HEURISTICS = ("cfs", "fisher", "gini", "relief", "sfs", "sbs")


@dataclass(frozen=True)
class RankedFeatures:
    """All 14 features with scores, sorted best-first."""

    order: tuple  # of (FeatureId, float)
    higher_better: bool

    def scores(self) -> dict:
        return {fid: score for fid, score in self.order}


@dataclass(frozen=True)
class FeatureSubset:
    members: tuple  # of FeatureId, sorted
    provenance: str

    def __post_init__(self):
        if not self.members:
            raise DataError(f"{self.provenance}: empty feature subset")

    def names(self) -> list[str]:
        return [FEATURE_NAMES[f] for f in self.members]


def _make_subset(indices, provenance: str) -> FeatureSubset:
    members = tuple(sorted(FeatureId(i) for i in set(indices)))
    return FeatureSubset(members=members, provenance=provenance)


def pearson(x, y) -> float:
    """Pearson correlation; 0 when either series is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(dx @ dy) / (sx * sy)


@dataclass(frozen=True)
class CorrelationStats:
    """Absolute feature-class and feature-feature Pearson correlations."""

    r_cf: np.ndarray  # (14,)
    r_ff: np.ndarray  # (14, 14), unit diagonal


def correlation_stats(samples: SampleSet) -> CorrelationStats:
    y = (samples.y == VESSEL).astype(np.float64)
    r_cf = np.array([abs(pearson(samples.X[:, j], y))
                     for j in range(N_FEATURES)])
    r_ff = np.eye(N_FEATURES)
    for i in range(N_FEATURES):
        for j in range(i + 1, N_FEATURES):
            r = abs(pearson(samples.X[:, i], samples.X[:, j]))
            r_ff[i, j] = r_ff[j, i] = r
    return CorrelationStats(r_cf=r_cf, r_ff=r_ff)


def cfs_merit(members, stats: CorrelationStats,
              printed_variant: bool = False) -> float:
    """Merit of a feature subset: class correlation against redundancy.

    The default denominator uses k + k(k-1) * mean inter-correlation, which
    reduces to the bare feature-class correlation for singletons;
    printed_variant=True switches to the k(k+1) form.
    """
    members = sorted(set(members))
    k = len(members)
    if k == 0:
        raise DataError("cfs_merit of empty subset")
    rcf = float(np.mean([stats.r_cf[m] for m in members]))
    if printed_variant:
        # Average over all unordered pairs including self-pairs, so the
        # k(k+1) factor is meaningful even for singletons.
        pair_sum = sum(stats.r_ff[a, b]
                       for ai, a in enumerate(members)
                       for b in members[ai:])
        denom = k + 2.0 * pair_sum
    else:
        pair_sum = sum(stats.r_ff[a, b]
                       for ai, a in enumerate(members)
                       for b in members[ai + 1:])
        denom = k + 2.0 * pair_sum
    return k * rcf / math.sqrt(denom)


def cfs_select(samples: SampleSet, printed_variant: bool = False) -> FeatureSubset:
    """Greedy forward best-first search over subsets by CFS merit.

    Expansion keeps going through up to 5 consecutive non-improving additions;
    the best subset ever seen is returned.
    """
    stats = correlation_stats(samples)
    if np.all(samples.X.std(axis=0) == 0):
        raise DataError("all features constant; CFS is undefined")
    current: list[int] = []
    best_members: list[int] = []
    best_merit = -np.inf
    stall = 0
    while stall < 5 and len(current) < N_FEATURES:
        step_best = None
        step_merit = -np.inf
        for j in range(N_FEATURES):
            if j in current:
                continue
            m = cfs_merit(current + [j], stats, printed_variant)
            if m > step_merit:
                step_merit = m
                step_best = j
        current.append(step_best)
        if step_merit > best_merit:
            best_merit = step_merit
            best_members = list(current)
            stall = 0
        else:
            stall += 1
    return _make_subset(best_members, "cfs")


@dataclass(frozen=True)
class ClassStats:
    """Per-class sample counts, per-feature means and variances."""

    n: np.ndarray  # (c,)
    mean: np.ndarray  # (c, 14)
    var: np.ndarray  # (c, 14)
    overall_mean: np.ndarray  # (14,)


def class_stats(samples: SampleSet) -> ClassStats:
    classes = np.unique(samples.y)
    if len(classes) < 2:
        raise DataError("need at least two classes")
    n = np.array([np.count_nonzero(samples.y == c) for c in classes])
    mean = np.stack([samples.X[samples.y == c].mean(axis=0) for c in classes])
    var = np.stack([samples.X[samples.y == c].var(axis=0) for c in classes])
    return ClassStats(n=n, mean=mean, var=var,
                      overall_mean=samples.X.mean(axis=0))


def _ranked(scores: np.ndarray, higher_better: bool) -> RankedFeatures:
    key = -scores if higher_better else scores
    idx = np.lexsort((np.arange(N_FEATURES), key))
    order = tuple((FeatureId(int(i)), float(scores[i])) for i in idx)
    return RankedFeatures(order=order, higher_better=higher_better)


def fisher_scores(samples: SampleSet) -> RankedFeatures:
    """Between-class scatter over within-class scatter, per feature.

    A zero within-class denominator scores +inf when the between-class
    numerator is positive, else 0.
    """
    cs = class_stats(samples)
    num = (cs.n[:, None] * (cs.mean - cs.overall_mean) ** 2).sum(axis=0)
    den = (cs.n[:, None] * cs.var).sum(axis=0)
    scores = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                      np.where(num > 0, np.inf, 0.0))
    return _ranked(scores, higher_better=True)


def gini_index(labels: np.ndarray) -> float:
    """Impurity 1 - sum of squared class probabilities."""
    s = len(labels)
    if s == 0:
        return 0.0
    probs = np.bincount(labels) / s
    return float(1.0 - (probs ** 2).sum())


def gini_scores(samples: SampleSet, n_bins: int = 10) -> RankedFeatures:
    """Weighted Gini impurity over equal-frequency bins; lower is better."""
    if n_bins < 2:
        raise DataError("gini needs at least 2 bins")
    s = len(samples)
    scores = np.empty(N_FEATURES)
    for j in range(N_FEATURES):
        order = np.argsort(samples.X[:, j], kind="stable")
        score = 0.0
        for chunk in np.array_split(order, n_bins):
            if len(chunk):
                score += len(chunk) / s * gini_index(samples.y[chunk])
        scores[j] = score
    return _ranked(scores, higher_better=False)


def _feature_ranges(X: np.ndarray) -> np.ndarray:
    return X.max(axis=0) - X.min(axis=0)


def relief_weights(samples: SampleSet, m: int | None = None,
                   seed: int = 0) -> RankedFeatures:
    """Relief weights from nearest-hit / nearest-miss updates.

    Distances and per-feature diffs are range-normalized; constant features
    contribute nothing and score exactly 0. m defaults to
    min(2000, sample count). Instances whose class has no other member are
    skipped.
    """
    n = len(samples)
    if n < 2 or len(np.unique(samples.y)) < 2:
        raise DataError("relief needs two nonempty classes")
    if m is None:
        m = min(2000, n)
    if m < 1:
        raise DataError("relief needs m >= 1")
    ranges = _feature_ranges(samples.X)
    safe = np.where(ranges > 0, ranges, 1.0)
    Z = samples.X / safe
    Z[:, ranges == 0] = 0.0

    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    picks = (np.arange(n) if m >= n
             else np.sort(rng.choice(n, size=m, replace=False)))
    W = np.zeros(N_FEATURES)
    for i in picks:
        d = np.linalg.norm(Z - Z[i], axis=1)
        d[i] = np.inf
        same = samples.y == samples.y[i]
        hit_pool = np.where(same)[0]
        hit_pool = hit_pool[hit_pool != i]
        if len(hit_pool) == 0:
            continue
        hit = hit_pool[np.argmin(d[hit_pool])]
        miss_pool = np.where(~same)[0]
        miss = miss_pool[np.argmin(d[miss_pool])]
        diff_hit = np.abs(samples.X[i] - samples.X[hit]) / safe
        diff_miss = np.abs(samples.X[i] - samples.X[miss]) / safe
        diff_hit[ranges == 0] = 0.0
        diff_miss[ranges == 0] = 0.0
        W += (diff_miss - diff_hit) / m
    return _ranked(W, higher_better=True)


def _stratified_folds(y: np.ndarray, n_folds: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Fold index per sample, class-balanced, shuffled deterministically."""
    folds = np.empty(len(y), dtype=int)
    for c in np.unique(y):
        idx = np.where(y == c)[0]
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = np.arange(len(idx)) % n_folds
    return folds


def _knn_error(Z: np.ndarray, y: np.ndarray, cols, folds: np.ndarray,
               k: int) -> float:
    """Pooled misclassification rate of k-NN over the given feature columns."""
    cols = list(cols)
    if not cols:
        counts = np.bincount(y)
        return 1.0 - counts.max() / len(y)
    X = Z[:, cols]
    errors = 0
    for f in range(folds.max() + 1):
        test = folds == f
        train = ~test
        Xtr, ytr = X[train], y[train]
        d2 = ((X[test][:, None, :] - Xtr[None, :, :]) ** 2).sum(axis=2)
        kk = min(k, Xtr.shape[0])
        nearest = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
        votes = ytr[nearest]
        pred = (votes.sum(axis=1) * 2 >= kk).astype(int)
        errors += int(np.count_nonzero(pred != y[test]))
    return errors / len(y)


def wrapper_select(samples: SampleSet, direction: str, seed: int = 0,
                   n_folds: int = 5, k_neighbors: int = 5,
                   eps: float = 1e-3) -> FeatureSubset:
    """Greedy sequential forward (add) or backward (remove) wrapper search.

    Candidate steps are scored by stratified cross-validated 5-NN error on
    range-normalized features; search stops once the best step improves the
    error by less than eps. SFS always keeps its first feature; SBS never
    empties the set.
    """
    if direction not in ("forward", "backward"):
        raise DataError(f"unknown direction: {direction}")
    counts = np.bincount(samples.y, minlength=2)
    if counts.min() < 4 * n_folds:
        raise DataError("too few samples per class for cross-validation")
    ranges = _feature_ranges(samples.X)
    safe = np.where(ranges > 0, ranges, 1.0)
    Z = (samples.X - samples.X.min(axis=0)) / safe
    Z[:, ranges == 0] = 0.0
    rng = np.random.default_rng(np.random.SeedSequence([seed, len(samples)]))
    folds = _stratified_folds(samples.y, n_folds, rng)

    forward = direction == "forward"
    current = [] if forward else list(range(N_FEATURES))
    current_err = _knn_error(Z, samples.y, current, folds, k_neighbors)
    while True:
        if forward:
            candidates = [c for c in range(N_FEATURES) if c not in current]
            if not candidates:
                break
            trials = [(c, current + [c]) for c in candidates]
        else:
            if len(current) <= 1:
                break
            trials = [(c, [x for x in current if x != c]) for c in current]
        best_c, best_err = None, np.inf
        for c, cols in trials:
            err = _knn_error(Z, samples.y, cols, folds, k_neighbors)
            if err < best_err:
                best_c, best_err = c, err
        first_forced = forward and not current
        if not first_forced and current_err - best_err < eps:
            break
        if forward:
            current.append(best_c)
        else:
            current.remove(best_c)
        current_err = best_err
    return _make_subset(current, "sfs" if forward else "sbs")


def rank_to_subset(r: RankedFeatures, k: int) -> FeatureSubset:
    """Top-k features of a ranking, under its own direction."""
    if not 1 <= k <= N_FEATURES:
        raise DataError(f"k must be in [1, {N_FEATURES}], got {k}")
    provenance = "rank"
    return _make_subset([fid for fid, _ in r.order[:k]], provenance)


def run_heuristic(name: str, samples: SampleSet, seed: int = 0, k: int = 6,
                  n_bins: int = 10, relief_m: int | None = None):
    """Run one heuristic; returns (FeatureSubset, RankedFeatures | None)."""
    if name == "cfs":
        return cfs_select(samples), None
    if name == "fisher":
        r = fisher_scores(samples)
        return _with_provenance(rank_to_subset(r, k), "fisher"), r
    if name == "gini":
        r = gini_scores(samples, n_bins=n_bins)
        return _with_provenance(rank_to_subset(r, k), "gini"), r
    if name == "relief":
        r = relief_weights(samples, m=relief_m, seed=seed)
        return _with_provenance(rank_to_subset(r, k), "relief"), r
    if name == "sfs":
        return wrapper_select(samples, "forward", seed=seed), None
    if name == "sbs":
        return wrapper_select(samples, "backward", seed=seed), None
    raise DataError(f"unknown heuristic: {name}")


def _with_provenance(subset: FeatureSubset, name: str) -> FeatureSubset:
    return FeatureSubset(members=subset.members, provenance=name)


def common_features(subsets) -> tuple:
    """Features present in every subset."""
    sets = [set(s.members) for s in subsets]
    if not sets:
        return ()
    common = set.intersection(*sets)
    return tuple(sorted(common))

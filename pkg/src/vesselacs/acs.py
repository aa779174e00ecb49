"""Ant Colony System core with two front-ends: TSP tours (used to validate
the metaheuristic) and pixel classification over a desirability map.

Pixel mode: a diagonal-Gaussian Bayes model over a selected feature subset
supplies per-pixel vessel desirability; ants walk the 8-connected FOV grid
depositing pheromone, and the final mask thresholds the normalized
pheromone-weighted desirability.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import FeatureMatrix
from .sampling import SampleSet, VESSEL
from .selection import FeatureSubset

TAU_MIN = 1e-12
VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class AcsParams:
    n_ants: int = 64
    n_iterations: int = 30
    beta: float = 2.0
    q0: float = 0.9
    rho: float = 0.1
    phi: float = 0.1
    tau0: float = 0.1
    seed: int = 0
    max_steps: int = 50

    def __post_init__(self):
        if self.n_ants < 1 or self.n_iterations < 0:
            raise DataError("n_ants >= 1 and n_iterations >= 0 required")
        if self.beta < 0 or not 0 <= self.q0 <= 1:
            raise DataError("beta >= 0 and q0 in [0, 1] required")
        if not (0 < self.rho < 1 and 0 < self.phi < 1 and self.tau0 > 0):
            raise DataError("rho, phi in (0, 1) and tau0 > 0 required")


@dataclass(frozen=True)
class ClassifierModel:
    """Diagonal-Gaussian class-conditional model on a feature subset."""

    subset: FeatureSubset
    norm_mean: np.ndarray  # (d,) z-normalization over selected features
    norm_std: np.ndarray  # (d,)
    class_mean: np.ndarray  # (2, d), row 0 nonvessel, row 1 vessel
    class_var: np.ndarray  # (2, d), floored
    log_prior: np.ndarray  # (2,)

    @property
    def columns(self) -> list[int]:
        return [int(f) for f in self.subset.members]


def train_model(samples: SampleSet, subset: FeatureSubset) -> ClassifierModel:
    """Fit per-class Gaussians on z-normalized selected features."""
    y = samples.y
    if len(np.unique(y)) < 2:
        raise DataError("training requires both classes")
    cols = [int(f) for f in subset.members]
    X = samples.X[:, cols]
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd_safe = np.where(sd > 0, sd, 1.0)
    Z = (X - mu) / sd_safe
    means = np.stack([Z[y == c].mean(axis=0) for c in (0, 1)])
    vars_ = np.maximum(np.stack([Z[y == c].var(axis=0) for c in (0, 1)]),
                       VAR_FLOOR)
    priors = np.array([np.count_nonzero(y == c) / len(y) for c in (0, 1)])
    return ClassifierModel(subset=subset, norm_mean=mu, norm_std=sd_safe,
                           class_mean=means, class_var=vars_,
                           log_prior=np.log(priors))


def vessel_posterior(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    """P(vessel | x) per row of raw (unnormalized) feature values."""
    Z = (X[:, model.columns] - model.norm_mean) / model.norm_std
    log_lik = np.empty((X.shape[0], 2))
    for c in (0, 1):
        d = Z - model.class_mean[c]
        log_lik[:, c] = (-0.5 * (d ** 2 / model.class_var[c]).sum(axis=1)
                         - 0.5 * np.log(2 * np.pi * model.class_var[c]).sum()
                         + model.log_prior[c])
    m = log_lik.max(axis=1, keepdims=True)
    p = np.exp(log_lik - m)
    return p[:, VESSEL] / p.sum(axis=1)


def heuristic_map(matrix: FeatureMatrix, model: ClassifierModel) -> np.ndarray:
    """Desirability in [0, 1] per matrix row: the vessel posterior."""
    return vessel_posterior(model, matrix.values)


def acs_step(current: int, neighbors: np.ndarray, tau: np.ndarray,
             eta: np.ndarray, params: AcsParams,
             rng: np.random.Generator) -> int:
    """Pseudo-random proportional move; applies the local pheromone update.

    tau and eta are flat arrays indexed by position. With probability q0 the
    argmax of tau * eta**beta is taken (ties to the lowest index); otherwise
    a neighbor is sampled proportionally. All-zero weights fall back to a
    uniform choice.
    """
    if len(neighbors) == 0:
        raise DataError("acs_step requires a nonempty neighbor set")
    weights = tau[neighbors] * eta[neighbors] ** params.beta
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        chosen = int(neighbors[rng.integers(len(neighbors))])
    elif rng.random() < params.q0:
        chosen = int(neighbors[int(np.argmax(weights))])
    else:
        chosen = int(neighbors[rng.choice(len(neighbors), p=weights / total)])
    tau[chosen] = (1 - params.phi) * tau[chosen] + params.phi * params.tau0
    tau[chosen] = max(tau[chosen], TAU_MIN)
    return chosen


@dataclass(frozen=True)
class TspInstance:
    coords: np.ndarray  # (n, 2)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def distances(self) -> np.ndarray:
        d = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((d ** 2).sum(axis=2))

    @classmethod
    def from_text(cls, text: str) -> "TspInstance":
        rows = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            rows.append((float(parts[1]), float(parts[2])))
        return cls(coords=np.array(rows, dtype=np.float64))


def tour_length(dist: np.ndarray, tour) -> float:
    n = len(tour)
    return float(sum(dist[tour[i], tour[(i + 1) % n]] for i in range(n)))


def brute_force_tsp(instance: TspInstance) -> tuple[list[int], float]:
    """Exact optimum by enumerating all (n-1)!/2 distinct tours."""
    dist = instance.distances()
    n = instance.n
    best, best_len = None, np.inf
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue  # each cycle direction counted once
        tour = (0,) + perm
        length = tour_length(dist, tour)
        if length < best_len:
            best, best_len = list(tour), length
    return best, best_len


def acs_tsp(instance: TspInstance, params: AcsParams):
    """ACS tour construction; returns (best tour, best length, history).

    history holds the best-so-far length after each iteration and is
    non-increasing.
    """
    n = instance.n
    if n < 3:
        raise DataError("TSP needs at least 3 cities")
    dist = instance.distances()
    with np.errstate(divide="ignore"):
        eta_edge = np.where(dist > 0, 1.0 / np.where(dist > 0, dist, 1.0), 0.0)
    tau = np.full((n, n), params.tau0)
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, n]))
    best_tour, best_len = None, np.inf
    history = []
    for _ in range(params.n_iterations):
        for ant in range(params.n_ants):
            start = ant % n
            tour = [start]
            unvisited = set(range(n)) - {start}
            while unvisited:
                cur = tour[-1]
                cand = np.fromiter(unvisited, dtype=int)
                cand.sort()
                w = tau[cur, cand] * eta_edge[cur, cand] ** params.beta
                total = w.sum()
                if total <= 0:
                    nxt = int(cand[rng.integers(len(cand))])
                elif rng.random() < params.q0:
                    nxt = int(cand[int(np.argmax(w))])
                else:
                    nxt = int(cand[rng.choice(len(cand), p=w / total)])
                tau[cur, nxt] = tau[nxt, cur] = max(
                    (1 - params.phi) * tau[cur, nxt] + params.phi * params.tau0,
                    TAU_MIN)
                tour.append(nxt)
                unvisited.discard(nxt)
            # close the loop with a local update on the return edge
            tau[tour[-1], start] = tau[start, tour[-1]] = max(
                (1 - params.phi) * tau[tour[-1], start]
                + params.phi * params.tau0, TAU_MIN)
            length = tour_length(dist, tour)
            if length < best_len:
                best_tour, best_len = tour, length
        deposit = params.rho / best_len
        for i in range(n):
            a, b = best_tour[i], best_tour[(i + 1) % n]
            tau[a, b] = tau[b, a] = (1 - params.rho) * tau[a, b] + deposit
        history.append(best_len)
    return best_tour, best_len, history


def _grid_neighbors(idx: int, shape: tuple[int, int],
                    fov_flat: np.ndarray) -> np.ndarray:
    h, w = shape
    y, x = divmod(idx, w)
    out = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and fov_flat[ny * w + nx]:
                out.append(ny * w + nx)
    return np.array(out, dtype=int)


def segment_scores(matrix: FeatureMatrix, fov: np.ndarray,
                   model: ClassifierModel, params: AcsParams) -> np.ndarray:
    """Normalized pheromone-weighted desirability sigma over the image.

    sigma = min(tau * eta / (tau0 * max eta), 1) inside the FOV, 0 elsewhere.
    Normalizing against the uninformative pheromone level keeps the default
    threshold meaningful as a Bayes decision; reinforcement can only raise a
    pixel's score. With n_iterations = 0 this is exactly eta / max(eta).
    """
    if not fov.any():
        raise DataError("empty FOV")
    h, w = fov.shape
    eta_rows = heuristic_map(matrix, model)
    eta = np.zeros(h * w)
    flat_idx = matrix.coords[:, 1] * w + matrix.coords[:, 0]
    eta[flat_idx] = eta_rows
    fov_flat = fov.ravel()
    tau = np.zeros(h * w)
    tau[fov_flat] = params.tau0

    visited_global = np.zeros(h * w, dtype=bool)
    order = np.argsort(-eta[fov_flat], kind="stable")
    fov_indices = np.where(fov_flat)[0][order]  # best-eta first, ties by index
    start_cursor = 0

    for iteration in range(params.n_iterations):
        trails = []
        starts = []
        cursor = start_cursor
        while len(starts) < params.n_ants and cursor < len(fov_indices):
            idx = fov_indices[cursor]
            cursor += 1
            if not visited_global[idx]:
                starts.append(int(idx))
        start_cursor = 0  # re-scan from the top next iteration
        if not starts:
            starts = [int(fov_indices[0])]
        for ant, start in enumerate(starts):
            rng = np.random.default_rng(
                np.random.SeedSequence([params.seed, iteration, ant]))
            trail = [start]
            trail_set = {start}
            visited_global[start] = True
            for _ in range(params.max_steps):
                nbrs = _grid_neighbors(trail[-1], (h, w), fov_flat)
                nbrs = np.array([v for v in nbrs if v not in trail_set],
                                dtype=int)
                if len(nbrs) == 0:
                    break
                nxt = acs_step(trail[-1], nbrs, tau, eta, params, rng)
                trail.append(nxt)
                trail_set.add(nxt)
                visited_global[nxt] = True
            trails.append(trail)
        best_trail = max(
            trails, key=lambda t: (float(eta[t].mean()), -t[0]))
        deposit = float(eta[best_trail].mean())
        for idx in best_trail:
            tau[idx] = max((1 - params.rho) * tau[idx] + params.rho * deposit,
                           TAU_MIN)

    eta_max = eta[fov_flat].max()
    if eta_max > 0:
        # tau / tau0 is exactly 1 when no deposit happened, so the
        # n_iterations = 0 case reduces bit-exactly to eta / max(eta).
        score = np.minimum((tau / params.tau0) * (eta / eta_max), 1.0)
    else:
        score = np.zeros_like(tau)
    score[~fov_flat] = 0.0
    return score.reshape(h, w)


def acs_segment(matrix: FeatureMatrix, fov: np.ndarray,
                model: ClassifierModel, params: AcsParams,
                threshold: float) -> np.ndarray:
    """Binary vessel mask: sigma >= threshold inside the FOV."""
    sigma = segment_scores(matrix, fov, model, params)
    return (sigma >= threshold) & fov

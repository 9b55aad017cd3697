"""K-means clustering with k-means++ seeding and elbow k selection.

Determinism contract: identical (points, k, seed, restarts) give an
identical model. Every restart draws from an independent generator
seeded with (seed, restart index), restarts are compared by WCSS with
ties going to the earliest restart, and assignment ties go to the
lowest cluster id. Cluster ids carry no ordinal meaning.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cleaning import _ptsc_values, max_normalize
from .dataset import Dataset
from .errors import ChainlensError

# daily on-chain feature set for the cluster report; the last four are
# the optional extended CSV columns
CLUSTER_FEATURES = (
    "market_cap",
    "volume_24h",
    "num_market_pairs",
    "ptsc",
    "total_value_locked",
    "staking_reward",
    "total_staking_percentage",
    "whales_percentage",
)

MAX_ITERATIONS = 300
DEFAULT_RESTARTS = 10

# monotonicity guard: float rounding can wiggle WCSS by ~1e-16
# relative, a genuine Lloyd bug moves it at data scale
_WCSS_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, dim)
    assignments: np.ndarray  # (n,) cluster ids
    wcss: float
    iterations_run: int
    seed: int


@dataclass(frozen=True)
class ElbowCurve:
    ks: tuple[int, ...]
    wcss: tuple[float, ...]
    chosen_k: int


def _validate_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ChainlensError("points must be a nonempty 2-d array")
    if not np.all(np.isfinite(pts)):
        raise ChainlensError("points must be finite")
    return pts


def _assign(points: np.ndarray, centroids: np.ndarray):
    # argmin breaks ties toward the lowest cluster id
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = np.argmin(d2, axis=1)
    cost = float(d2[np.arange(points.shape[0]), assignments].sum())
    return assignments, cost


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # remaining points coincide with chosen centroids
            idx = int(rng.integers(n))
        centroids[i] = points[idx]
        np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1), out=d2)
    return centroids


def _check_monotone(previous: float, current: float) -> None:
    if current > previous + _WCSS_SLACK * (1.0 + previous):
        raise ChainlensError(
            f"WCSS increased within a Lloyd run: {previous} -> {current}"
        )


def _lloyd(points: np.ndarray, centroids: np.ndarray):
    assignments, cost = _assign(points, centroids)
    iterations = 0
    for _ in range(MAX_ITERATIONS):
        iterations += 1
        new_centroids = centroids.copy()
        for cluster in range(centroids.shape[0]):
            members = assignments == cluster
            if members.any():
                new_centroids[cluster] = points[members].mean(axis=0)
            else:
                # reseed an emptied cluster at the worst-fit point
                per_point = ((points - centroids[assignments]) ** 2).sum(axis=1)
                new_centroids[cluster] = points[int(np.argmax(per_point))]
        # update step: same assignments, recentered centroids
        diff = points - new_centroids[assignments]
        update_cost = float((diff * diff).sum())
        _check_monotone(cost, update_cost)
        new_assignments, assign_cost = _assign(points, new_centroids)
        _check_monotone(update_cost, assign_cost)
        centroids = new_centroids
        converged = bool(np.array_equal(new_assignments, assignments))
        assignments = new_assignments
        cost = assign_cost
        if converged:
            break
    return centroids, assignments, cost, iterations


def kmeans_fit(
    points,
    k: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> ClusterModel:
    """Best-WCSS model over independent k-means++ restarts.

    Each restart runs Lloyd iterations to an assignment fixpoint (or
    the iteration cap); WCSS is checked nonincreasing at every half
    step and a violation raises rather than returning a bad model.
    """
    pts = _validate_points(points)
    if k < 1:
        raise ChainlensError(f"k must be >= 1, got {k}")
    if k > pts.shape[0]:
        raise ChainlensError(f"k={k} exceeds the {pts.shape[0]} available points")
    if restarts < 1:
        raise ChainlensError("restarts must be >= 1")
    best = None
    for restart in range(restarts):
        rng = np.random.default_rng([seed, restart])
        centroids = _plusplus_init(pts, k, rng)
        centroids, assignments, cost, iterations = _lloyd(pts, centroids)
        if best is None or cost < best[0]:
            best = (cost, centroids, assignments, iterations)
    cost, centroids, assignments, iterations = best
    centroids = centroids.copy()
    centroids.flags.writeable = False
    assignments = assignments.copy()
    assignments.flags.writeable = False
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=assignments,
        wcss=cost,
        iterations_run=iterations,
        seed=seed,
    )


def wcss(model: ClusterModel, points) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    pts = _validate_points(points)
    if pts.shape[0] != model.assignments.shape[0]:
        raise ChainlensError(
            f"model assigns {model.assignments.shape[0]} points, got {pts.shape[0]}"
        )
    if pts.shape[1] != model.centroids.shape[1]:
        raise ChainlensError(
            f"model dimension {model.centroids.shape[1]} != points dimension {pts.shape[1]}"
        )
    diff = pts - model.centroids[model.assignments]
    return float((diff * diff).sum())


def elbow(
    points,
    k_range: tuple[int, int] = (1, 30),
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> ElbowCurve:
    """WCSS curve over a k range plus the elbow's k.

    The elbow is the interior point of the curve (both axes scaled to
    [0, 1]) farthest from the chord joining the endpoints; ties take
    the smallest k, so a featureless straight-line curve yields
    k_min + 1.
    """
    pts = _validate_points(points)
    k_min, k_max = k_range
    if k_min < 1 or k_max <= k_min:
        raise ChainlensError(f"degenerate k range {k_range}")
    if k_max > pts.shape[0]:
        raise ChainlensError(
            f"k_max={k_max} exceeds the {pts.shape[0]} available points"
        )
    ks = tuple(range(k_min, k_max + 1))
    costs = tuple(
        kmeans_fit(pts, k, seed=seed, restarts=restarts).wcss for k in ks
    )
    return ElbowCurve(ks=ks, wcss=costs, chosen_k=_pick_elbow(ks, costs))


def _pick_elbow(ks: Sequence[int], costs: Sequence[float]) -> int:
    xs = np.asarray(ks, dtype=np.float64)
    ys = np.asarray(costs, dtype=np.float64)
    xs = (xs - xs[0]) / (xs[-1] - xs[0])
    spread = ys.max() - ys.min()
    ys = (ys - ys.min()) / spread if spread > 0 else np.zeros_like(ys)
    # |cross product| against the endpoint chord, interior points only
    x0, y0 = xs[0], ys[0]
    x1, y1 = xs[-1], ys[-1]
    distances = np.abs((x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0))
    interior = distances[1:-1]
    if interior.size == 0:
        return int(ks[1])
    return int(ks[1 + int(np.argmax(interior))])


@dataclass(frozen=True)
class ClusterReport:
    """Daily clustering outcome: which coins, which clusters, and the
    elbow curve when k was chosen automatically."""

    date: dt.date
    feature_columns: tuple[str, ...]
    keys: tuple[str, ...]
    excluded: tuple[str, ...]
    model: ClusterModel
    elbow_curve: ElbowCurve | None

    @property
    def assignments(self) -> dict[str, int]:
        return {
            key: int(cluster)
            for key, cluster in zip(self.keys, self.model.assignments)
        }


def _daily_feature_matrix(
    dataset: Dataset, date: dt.date, feature_columns: Sequence[str]
):
    rows = dataset.snapshot_at(date)
    if not rows:
        raise ChainlensError(f"no snapshots on {date.isoformat()}")
    keys, vectors, excluded = [], [], []
    for snap in rows:
        values = []
        for name in feature_columns:
            if name == "ptsc":
                value = float(
                    _ptsc_values(
                        np.array([_nan_if_none(snap.circulating_supply)]),
                        np.array([_nan_if_none(snap.total_supply)]),
                    )[0]
                )
            else:
                value = _nan_if_none(getattr(snap, name))
            values.append(value)
        if np.isnan(values).any():
            excluded.append(snap.key)
        else:
            keys.append(snap.key)
            vectors.append(values)
    return keys, np.asarray(vectors, dtype=np.float64), excluded


def _nan_if_none(value) -> float:
    return np.nan if value is None else float(value)


def cluster_report(
    dataset: Dataset,
    date: dt.date,
    feature_columns: Sequence[str] | None = None,
    k: int | None = None,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> ClusterReport:
    """Cluster the coins observed on one day.

    Coins with any absent value among the selected features are
    excluded. Every surviving feature column is scaled by its maximum,
    then k-means runs with the given k, or with the elbow's choice
    over k = 1..30 when k is None.
    """
    names = tuple(feature_columns) if feature_columns is not None else CLUSTER_FEATURES
    unknown = [n for n in names if n not in CLUSTER_FEATURES]
    if unknown:
        raise ChainlensError(f"unknown cluster feature(s) {unknown}")
    keys, matrix, excluded = _daily_feature_matrix(dataset, date, names)
    if not keys:
        raise ChainlensError(
            f"no coins on {date.isoformat()} have all of {list(names)} present"
        )
    if k is not None and k > len(keys):
        raise ChainlensError(
            f"k={k} exceeds the {len(keys)} coins remaining after exclusion"
        )
    normalized = np.column_stack(
        [max_normalize(matrix[:, j]) for j in range(matrix.shape[1])]
    )
    curve = None
    if k is None:
        k_max = min(30, len(keys))
        if k_max < 2:
            raise ChainlensError("too few coins to run elbow selection")
        curve = elbow(normalized, (1, k_max), seed=seed, restarts=restarts)
        k = curve.chosen_k
    model = kmeans_fit(normalized, k, seed=seed, restarts=restarts)
    return ClusterReport(
        date=date,
        feature_columns=names,
        keys=tuple(keys),
        excluded=tuple(excluded),
        model=model,
        elbow_curve=curve,
    )


def save_assignments_csv(report: ClusterReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["coin_key", "cluster_id"])
        for key in report.keys:
            writer.writerow([key, report.assignments[key]])


def save_elbow_csv(curve: ElbowCurve, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "wcss"])
        for k, cost in zip(curve.ks, curve.wcss):
            writer.writerow([k, repr(cost)])

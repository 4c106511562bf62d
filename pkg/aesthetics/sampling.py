# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Representative sampling of a large image pool.

Feature vectors are embedded into 2-D with exact t-SNE, clustered with k-means, and the images
nearest to their cluster centres are kept as the study stimuli.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans
from sklearn.manifold import TSNE

logger = logging.getLogger(__name__)

MIN_TSNE_POINTS = 5


class SamplingError(Exception):
    """Base class for sampling failures."""


class TooFewPointsError(SamplingError):
    """Raised if there are too few vectors to embed."""


class KTooLargeError(SamplingError):
    """Raised if more clusters are requested than there are points."""


class MTooLargeError(SamplingError):
    """Raised if more representatives are requested than there are points."""


@dataclass(frozen=True)
class EmbeddedPoint:
    """A stimulus placed in the 2-D embedding."""

    id: str
    x: float
    y: float


@dataclass(frozen=True)
class TsneResult:
    """Output of tsne_embed."""

    points: List[EmbeddedPoint]
    kl_divergence: float
    iterations: int

    @property
    def coordinates(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])


@dataclass(frozen=True)
class KMeansResult:
    """Output of kmeans. Assignments follow the input row order."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int


def tsne_embed(
    vectors: Mapping[str, Sequence[float]],
    perplexity: float = 30.0,
    n_iter: int = 1000,
    learning_rate: float = 200.0,
    early_exaggeration: float = 12.0,
    seed: int = 0,
) -> TsneResult:
    """Embeds vectors into 2-D with exact (not Barnes-Hut) t-SNE.

    Points come back in ascending id order. The same vectors and seed always give the same
    coordinates.
    """
    ids = sorted(vectors)
    n = len(ids)
    if n < MIN_TSNE_POINTS:
        raise TooFewPointsError(f"t-SNE needs at least {MIN_TSNE_POINTS} points, got {n}")
    if n < 3 * perplexity:
        logger.warning(f"Only {n} points for perplexity {perplexity}; the embedding may be poor")
    if perplexity >= n:
        perplexity = float(n - 1)
        logger.warning(f"Perplexity lowered to {perplexity} to stay below the number of points")

    data = np.vstack([np.asarray(vectors[i], dtype=float) for i in ids])
    model = TSNE(
        n_components=2,
        perplexity=perplexity,
        early_exaggeration=early_exaggeration,
        learning_rate=learning_rate,
        max_iter=n_iter,
        init="random",
        method="exact",
        random_state=seed,
    )
    coordinates = model.fit_transform(data)
    logger.info(f"t-SNE finished after {model.n_iter_} iterations, KL {model.kl_divergence_:.4f}")
    return TsneResult(
        points=[EmbeddedPoint(i, float(x), float(y)) for i, (x, y) in zip(ids, coordinates)],
        kl_divergence=float(model.kl_divergence_),
        iterations=int(model.n_iter_),
    )


def kmeans(
    points: np.ndarray, k: int, seed: int = 0, max_iter: int = 300, restarts: int = 10
) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding, keeping the best of several restarts.

    Points are fitted in lexicographic order so that shuffling the input does not change the
    clustering.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n:
        raise KTooLargeError(f"Cannot form {k} clusters from {n} points")

    order = np.lexsort(points.T[::-1])
    model = KMeans(
        n_clusters=k, init="k-means++", n_init=restarts, max_iter=max_iter, random_state=seed
    )
    labels = model.fit_predict(points[order])
    assignments = np.empty(n, dtype=int)
    assignments[order] = labels
    return KMeansResult(
        centroids=model.cluster_centers_,
        assignments=assignments,
        inertia=float(model.inertia_),
        iterations=int(model.n_iter_),
    )


def select_representatives(
    points: Sequence[EmbeddedPoint],
    clustering: KMeansResult,
    m_total: int,
    per_cluster: bool = False,
) -> List[str]:
    """Picks the stimuli closest to their cluster centres.

    In the default global mode every non-empty cluster first contributes its nearest point
    (as far as m_total allows), then the remaining slots go to the globally nearest points. In
    per-cluster mode only the nearest point of each cluster is eligible. Distance ties are
    broken by ascending id.

    Returns:
        Selected ids ordered by (distance, id).
    """
    n = len(points)
    if m_total > n:
        raise MTooLargeError(f"Cannot select {m_total} of {n} points")
    coordinates = np.array([[p.x, p.y] for p in points])
    distances = np.linalg.norm(
        coordinates - clustering.centroids[clustering.assignments], axis=1
    )
    ranked = sorted(range(n), key=lambda i: (distances[i], points[i].id))

    nearest_per_cluster = {}
    for i in ranked:
        nearest_per_cluster.setdefault(int(clustering.assignments[i]), i)
    floor = sorted(nearest_per_cluster.values(), key=lambda i: (distances[i], points[i].id))

    if per_cluster:
        chosen = floor[:m_total]
    else:
        chosen = floor[:m_total]
        taken = set(chosen)
        for i in ranked:
            if len(chosen) >= m_total:
                break
            if i not in taken:
                chosen.append(i)
                taken.add(i)
    chosen.sort(key=lambda i: (distances[i], points[i].id))
    return [points[i].id for i in chosen]


def write_sampling(
    points: Sequence[EmbeddedPoint],
    clustering: KMeansResult,
    selected: Sequence[str],
    out_dir: Union[str, Path],
) -> None:
    """Writes embedding coordinates, cluster assignments and the selected ids."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chosen = set(selected)
    frame = pd.DataFrame(
        {
            "id": [p.id for p in points],
            "x": [p.x for p in points],
            "y": [p.y for p in points],
            "cluster": clustering.assignments,
            "selected": [p.id in chosen for p in points],
        }
    )
    frame.to_csv(
        out_dir / "coordinates.csv", index=False, lineterminator="\n", float_format="%.12g"
    )
    (out_dir / "selected_ids.txt").write_text("".join(f"{i}\n" for i in selected))

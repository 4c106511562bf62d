# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Bradley-Terry scoring of pairwise judgments, one independent model per style keyword."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from aesthetics.corpus import Judgment, UnknownStimulusError

logger = logging.getLogger(__name__)

BT_SCORE_COLUMNS = ("stimulus_id", "style", "bt_score")
GRADIENT_TOL = 1e-6


class RankingError(Exception):
    """Base class for Bradley-Terry failures."""


class DisconnectedGraphError(RankingError):
    """Raised if the comparison graph of a style is not connected."""

    def __init__(self, msg: str, components: Sequence[Tuple[str, ...]] = ()):
        super().__init__(msg)
        self.components = list(components)


class DegenerateItemError(RankingError):
    """Raised if an item never wins or never loses, so its score diverges."""

    def __init__(self, msg: str, items: Sequence[str] = ()):
        super().__init__(msg)
        self.items = list(items)


class NotConvergedError(RankingError):
    """Raised if the iteration cap is hit. The partial result is kept on `result`."""

    def __init__(self, msg: str, result: Optional["BtResult"] = None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class WinMatrix:
    """wins[i, j] is the number of times item i beat item j."""

    ids: Tuple[str, ...]
    wins: np.ndarray

    @property
    def comparisons(self) -> np.ndarray:
        return self.wins + self.wins.T


@dataclass(frozen=True)
class Connectivity:
    """Connected components of the comparison graph."""

    connected: bool
    components: List[Tuple[str, ...]]


@dataclass
class BtResult:
    """Centred log-strengths for one style, plus fit diagnostics."""

    style: str
    ids: Tuple[str, ...]
    scores: np.ndarray
    iterations: int
    converged: bool
    log_likelihood: float
    max_gradient: float
    max_abs_update_at_exit: float = 0.0
    history: List[float] = field(default_factory=list, repr=False)

    def as_dict(self) -> Dict[str, float]:
        return {item: float(score) for item, score in zip(self.ids, self.scores)}

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
            "max_gradient": self.max_gradient,
            "max_abs_update_at_exit": self.max_abs_update_at_exit,
        }


@dataclass(frozen=True)
class BtDescriptives:
    """Summary statistics of one style's scores."""

    style: str
    n: int
    mean: float
    std: float
    std_defined: bool
    min: float
    q25: float
    median: float
    q75: float
    max: float
    range: float

    def as_row(self) -> dict:
        return dict(self.__dict__)


def win_matrix_from_judgments(judgments: Sequence[Judgment], ids: Sequence[str]) -> WinMatrix:
    """Tallies judgments into a win matrix over the given item order."""
    index = {item: position for position, item in enumerate(ids)}
    wins = np.zeros((len(ids), len(ids)), dtype=float)
    for judgment in judgments:
        try:
            winner, loser = index[judgment.winner_id], index[judgment.loser_id]
        except KeyError as e:
            raise UnknownStimulusError(f"Judgment references unknown stimulus {e}", str(e))
        wins[winner, loser] += 1
    return WinMatrix(tuple(ids), wins)


def check_connectivity(matrix: WinMatrix) -> Connectivity:
    """Finds the connected components of the undirected comparison graph."""
    graph = csr_matrix(matrix.comparisons > 0)
    n_components, labels = connected_components(graph, directed=False)
    components = [
        tuple(item for item, label in zip(matrix.ids, labels) if label == component)
        for component in range(n_components)
    ]
    components.sort(key=lambda members: (-len(members), members))
    return Connectivity(n_components <= 1, components)


def _log_likelihood(wins: np.ndarray, scores: np.ndarray) -> float:
    diff = scores[:, None] - scores[None, :]
    # log sigmoid(d) = -log(1 + exp(-d))
    return float(-(wins * np.logaddexp(0.0, -diff)).sum())


def _gradient(wins: np.ndarray, comparisons: np.ndarray, scores: np.ndarray) -> np.ndarray:
    diff = scores[:, None] - scores[None, :]
    expected = comparisons / (1.0 + np.exp(-diff))
    return wins.sum(axis=1) - expected.sum(axis=1)


def fit_bradley_terry(
    matrix: WinMatrix,
    style: str = "",
    tol: float = 1e-8,
    max_iters: int = 10000,
    pseudo_count: float = 0.0,
) -> BtResult:
    """Fits Bradley-Terry log-strengths by minorization-maximization.

    Each sweep sets pi_i = W_i / sum_j n_ij / (pi_i + pi_j), then recentres log(pi) to mean
    zero. Iteration stops once the largest change in any centred score is below tol and the
    largest absolute likelihood gradient is at most GRADIENT_TOL.

    Args:
        matrix: win counts for one style.
        style: label carried into the result.
        tol: convergence threshold on the max-abs score update.
        max_iters: iteration cap.
        pseudo_count: virtual wins added to every ordered pair. Zero disables smoothing.

    Returns:
        BtResult with mean-zero scores in the order of matrix.ids.
    """
    wins = matrix.wins.astype(float)
    if pseudo_count > 0:
        wins = wins + pseudo_count * (1.0 - np.eye(len(matrix.ids)))
    comparisons = wins + wins.T

    connectivity = check_connectivity(WinMatrix(matrix.ids, wins))
    if not connectivity.connected:
        raise DisconnectedGraphError(
            f"Comparison graph for style '{style}' splits into "
            f"{len(connectivity.components)} components",
            connectivity.components,
        )

    total_wins = wins.sum(axis=1)
    total_played = comparisons.sum(axis=1)
    degenerate = [
        item
        for item, won, played in zip(matrix.ids, total_wins, total_played)
        if won == 0 or won == played
    ]
    if degenerate:
        raise DegenerateItemError(
            f"Items with no wins or no losses for style '{style}': {', '.join(degenerate)}",
            degenerate,
        )

    scores = np.zeros(len(matrix.ids))
    history = []
    converged = False
    iteration = 0
    step = math.inf
    for iteration in range(1, max_iters + 1):
        strengths = np.exp(scores)
        denominator = comparisons / (strengths[:, None] + strengths[None, :])
        updated = np.log(total_wins) - np.log(denominator.sum(axis=1))
        updated -= updated.mean()
        step = np.max(np.abs(updated - scores))
        scores = updated
        history.append(_log_likelihood(wins, scores))
        if step < tol and np.max(np.abs(_gradient(wins, comparisons, scores))) <= GRADIENT_TOL:
            converged = True
            break

    result = BtResult(
        style=style,
        ids=matrix.ids,
        scores=scores,
        iterations=iteration,
        converged=converged,
        log_likelihood=history[-1] if history else _log_likelihood(wins, scores),
        max_gradient=float(np.max(np.abs(_gradient(wins, comparisons, scores)))),
        max_abs_update_at_exit=float(step),
        history=history,
    )
    if not converged:
        raise NotConvergedError(
            f"Bradley-Terry fit for style '{style}' did not converge in {max_iters} iterations",
            result,
        )
    logger.debug(f"Style '{style}' converged after {iteration} iterations")
    return result


def bt_descriptives(result: BtResult) -> BtDescriptives:
    """Summarises the score distribution of one style.

    Quartiles use linear interpolation. With a single item the standard deviation is
    undefined and reported as 0 with std_defined=False.
    """
    scores = np.asarray(result.scores, dtype=float)
    n = len(scores)
    q25, median, q75 = np.percentile(scores, [25, 50, 75])
    return BtDescriptives(
        style=result.style,
        n=n,
        mean=float(scores.mean()),
        std=float(scores.std(ddof=1)) if n > 1 else 0.0,
        std_defined=n > 1,
        min=float(scores.min()),
        q25=float(q25),
        median=float(median),
        q75=float(q75),
        max=float(scores.max()),
        range=float(scores.max() - scores.min()),
    )


def fit_styles(
    judgments: Sequence[Judgment],
    ids: Sequence[str],
    styles: Sequence[str],
    tol: float = 1e-8,
    max_iters: int = 10000,
    pseudo_count: float = 0.0,
    workers: int = 1,
) -> Dict[str, BtResult]:
    """Fits one model per style. Styles are independent, so they may run in parallel."""
    by_style: Dict[str, List[Judgment]] = {style: [] for style in styles}
    for judgment in judgments:
        if judgment.style in by_style:
            by_style[judgment.style].append(judgment)

    def fit(style: str) -> BtResult:
        matrix = win_matrix_from_judgments(by_style[style], ids)
        result = fit_bradley_terry(matrix, style, tol, max_iters, pseudo_count)
        logger.info(
            f"Fitted Bradley-Terry for '{style}' on {len(by_style[style])} judgments "
            f"({result.iterations} iterations)"
        )
        return result

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(fit, styles))
    return dict(zip(styles, results))


def bt_scores_frame(results: Mapping[str, BtResult]) -> pd.DataFrame:
    """Long-format table of scores, ordered by style then stimulus id."""
    rows = [
        (item, style, float(score))
        for style, result in results.items()
        for item, score in sorted(zip(result.ids, result.scores))
    ]
    return pd.DataFrame(rows, columns=BT_SCORE_COLUMNS)


def write_bt_scores(results: Mapping[str, BtResult], path: Union[str, Path]) -> None:
    """Writes scores of every style as one CSV."""
    bt_scores_frame(results).to_csv(path, index=False, lineterminator="\n", float_format="%.12g")


def load_bt_scores(path: Union[str, Path]) -> pd.DataFrame:
    """Reads a score table, raising RankingError if a column is missing."""
    frame = pd.read_csv(path, dtype={"stimulus_id": str, "style": str})
    missing = [column for column in BT_SCORE_COLUMNS if column not in frame.columns]
    if missing:
        raise RankingError(f"Score file '{path}' is missing columns {missing}")
    return frame


def top_k(scores: pd.DataFrame, style: str, k: int = 5) -> List[Tuple[str, float]]:
    """Highest-scoring stimuli for a style, ties broken by ascending id."""
    subset = scores[scores["style"] == style]
    ordered = subset.sort_values(["bt_score", "stimulus_id"], ascending=[False, True])
    return [(row.stimulus_id, float(row.bt_score)) for row in ordered.head(k).itertuples()]

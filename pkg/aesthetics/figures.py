# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""SVG figures for a run.

Figures are written with a fixed SVG hash salt and no date metadata, so identical inputs give
byte-identical files. Text is kept as text in the SVG.
"""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

if TYPE_CHECKING:
    from aesthetics.config import PipelineConfig
    from aesthetics.pipeline import RunArtifacts

logger = logging.getLogger(__name__)

SVG_RC = {
    "svg.hashsalt": "aesthetics",
    "svg.fonttype": "none",
    "font.size": 8,
}
COLORS = {"positive": "#2b8cbe", "negative": "#d7301f", "nonsignificant": "#bdbdbd"}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote figure {path}")
    return path


def coefficient_class(beta: float, ci_lo: float, ci_hi: float) -> str:
    """Style class of a coefficient: nonsignificant when its interval spans zero."""
    if ci_lo <= 0 <= ci_hi:
        return "nonsignificant"
    return "positive" if beta > 0 else "negative"


def plot_coefficients(
    coefficients: pd.DataFrame, family: str, styles: Sequence[str], path: Path
) -> Path:
    """Forest plot of one model family: a panel per style, each coefficient with its 95% CI.

    Every marker carries an SVG id of the form `coef-<class>-<style>-<feature>`.
    """
    table = coefficients[
        (coefficients["family"] == family) & (coefficients["feature"] != "intercept")
    ]
    features = list(dict.fromkeys(table["feature"]))
    styles = [s for s in styles if s in set(table["style"])]
    columns = min(3, max(1, len(styles)))
    rows = int(np.ceil(len(styles) / columns)) or 1
    fig, axes = plt.subplots(
        rows,
        columns,
        figsize=(3.2 * columns, 0.6 + 0.3 * max(1, len(features)) * rows),
        squeeze=False,
        sharey=True,
    )
    for ax, style in zip(axes.flat, styles):
        for row in table[table["style"] == style].itertuples():
            y = features.index(row.feature)
            kind = coefficient_class(row.beta, row.ci_lo, row.ci_hi)
            ax.plot([row.ci_lo, row.ci_hi], [y, y], color=COLORS[kind], linewidth=1.2)
            ax.scatter(
                [row.beta],
                [y],
                s=16,
                color=COLORS[kind],
                gid=f"coef-{kind}-{style}-{row.feature}",
            )
        ax.axvline(0.0, color="#636363", linewidth=0.6, linestyle="--")
        ax.set_yticks(range(len(features)), features)
        ax.set_ylim(len(features) - 0.5, -0.5)
        ax.set_title(style)
        ax.set_xlabel("beta (95% CI)")
    for ax in list(axes.flat)[len(styles) :]:
        ax.set_visible(False)
    fig.suptitle(f"{family} model coefficients")
    fig.tight_layout()
    return _save(fig, path)


def plot_score_distributions(
    values: pd.DataFrame, column: str, styles: Sequence[str], title: str, path: Path
) -> Path:
    """Violin plot of one score column per style, with the median marked."""
    styles = [s for s in styles if s in set(values["style"])]
    data = [values.loc[values["style"] == s, column].to_numpy(dtype=float) for s in styles]
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(styles), 3.0))
    if data:
        ax.violinplot(data, showmedians=True)
    ax.set_xticks(range(1, len(styles) + 1), styles, rotation=45, ha="right")
    ax.set_ylabel(column)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_correlation(correlation: pd.DataFrame, path: Path) -> Path:
    """Heatmap of a correlation matrix with every cell labelled."""
    names = list(correlation.columns)
    values = correlation.to_numpy(dtype=float)
    fig, ax = plt.subplots(figsize=(1.5 + 0.6 * len(names), 1.2 + 0.6 * len(names)))
    image = ax.imshow(values, vmin=-1, vmax=1, cmap="RdBu_r")
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center", fontsize=6)
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    return _save(fig, path)


def plot_alignment(
    alignment: pd.DataFrame, bt_scores: pd.DataFrame, styles: Sequence[str], path: Path
) -> Path:
    """Scatter of alignment against score per style, with the least-squares line and slope."""
    merged = alignment.merge(bt_scores, on=["stimulus_id", "style"], how="inner")
    styles = [s for s in styles if s in set(merged["style"])]
    columns = min(3, max(1, len(styles)))
    rows = int(np.ceil(len(styles) / columns)) or 1
    fig, axes = plt.subplots(rows, columns, figsize=(3.0 * columns, 2.6 * rows), squeeze=False)
    for ax, style in zip(axes.flat, styles):
        subset = merged[merged["style"] == style]
        x = subset["mean_cosine"].to_numpy(dtype=float)
        y = subset["bt_score"].to_numpy(dtype=float)
        ax.scatter(x, y, s=10, color="#525252")
        if len(x) > 1 and np.ptp(x) > 0:
            slope, intercept = np.polyfit(x, y, 1)
            grid = np.linspace(x.min(), x.max(), 2)
            ax.plot(grid, intercept + slope * grid, color=COLORS["positive"])
            ax.text(0.05, 0.9, f"b = {slope:.2f}", transform=ax.transAxes)
        ax.set_title(style)
        ax.set_xlabel("mean cosine")
        ax.set_ylabel("BT score")
    for ax in list(axes.flat)[len(styles) :]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, path)


def emit_figures(
    artifacts: "RunArtifacts", config: "PipelineConfig", out_dir: Union[str, Path]
) -> List[Path]:
    """Writes every figure the available artifacts allow. Returns the written paths."""
    out_dir = Path(out_dir)
    styles = _styles(artifacts)
    paths = []
    with plt.rc_context(SVG_RC):
        paths.append(
            plot_score_distributions(
                artifacts.bt_scores,
                "bt_score",
                styles,
                "Bradley-Terry scores",
                out_dir / "bt_distributions.svg",
            )
        )
        coefficients = artifacts.coefficients
        if coefficients is not None and not coefficients.empty:
            present = set(coefficients["family"])
            for family in [f for f in config.models if f in present]:
                paths.append(
                    plot_coefficients(
                        coefficients,
                        family,
                        styles,
                        out_dir / f"coefficients_{family}.svg",
                    )
                )
        if artifacts.correlation is not None:
            paths.append(plot_correlation(artifacts.correlation, out_dir / "correlation.svg"))
        if artifacts.alignment is not None and not artifacts.alignment.empty:
            paths.append(
                plot_alignment(
                    artifacts.alignment,
                    artifacts.bt_scores,
                    styles,
                    out_dir / "alignment_scatter.svg",
                )
            )
            paths.append(
                plot_score_distributions(
                    artifacts.alignment,
                    "mean_cosine",
                    styles,
                    "Caption-criteria alignment",
                    out_dir / "cosine_distributions.svg",
                )
            )
    logger.info(f"Wrote {len(paths)} figures to {out_dir}")
    return paths


def _styles(artifacts: "RunArtifacts") -> List[str]:
    return list(dict.fromkeys(artifacts.bt_scores["style"]))

# facedyn/repositories/plot_repo.py

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from facedyn.schemas.stats import RocCurve  # noqa: E402

# fixed salt and no date stamp keep repeated renders byte-identical
plt.rcParams["svg.hashsalt"] = "facedyn"
plt.rcParams["svg.fonttype"] = "none"


class PlotRepository:
    """SVG figures for the report stage."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _save(self, fig, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        target = self.root / name
        fig.tight_layout()
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        return target

    def roc_curves(self, curves: Mapping[str, RocCurve], name: str = "roc.svg") -> Path:
        fig, ax = plt.subplots(figsize=(5, 5))
        for label, curve in curves.items():
            ax.plot(curve.fpr, curve.tpr, label=f"{label} (AUC {curve.auc:.3f})")
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=0.8)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title("ROC")
        ax.legend(loc="lower right", fontsize=8)
        return self._save(fig, name)

    def rank_scan(self, scan: pd.DataFrame, name: str = "rank_scan.svg") -> Path:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(scan["rank"], scan["mse"], marker="o")
        ax.set_xlabel("Rank k")
        ax.set_ylabel("Reconstruction MSE (best of restarts)")
        ax.set_xticks(scan["rank"])
        return self._save(fig, name)

    def basis_heatmap(self, loadings: pd.DataFrame, name: str = "basis_heatmap.svg") -> Path:
        fig, ax = plt.subplots(figsize=(0.9 * loadings.shape[1] + 2.5, 6))
        im = ax.imshow(loadings.to_numpy(), aspect="auto", cmap="viridis")
        ax.set_yticks(np.arange(len(loadings.index)), loadings.index)
        ax.set_xticks(np.arange(loadings.shape[1]), loadings.columns, rotation=45, ha="right")
        fig.colorbar(im, ax=ax, label="loading (W·d)")
        return self._save(fig, name)

    def boruta_importance(
        self, history: np.ndarray, features: list[str], status: Mapping[str, str], name: str = "boruta.svg"
    ) -> Path:
        colours = {"confirmed": "tab:green", "tentative": "tab:orange", "rejected": "tab:red"}
        if history.size:
            order = np.argsort(np.nanmedian(history, axis=0))
        else:
            order = np.arange(len(features))
        fig, ax = plt.subplots(figsize=(6, max(3.0, 0.22 * len(features) + 1)))
        data = [history[:, i][np.isfinite(history[:, i])] for i in order] if history.size else [[] for _ in order]
        box = ax.boxplot(data, vert=False, patch_artist=True)
        for patch, i in zip(box["boxes"], order):
            patch.set_facecolor(colours[status[features[i]]])
        ax.set_yticks(np.arange(1, len(order) + 1), [features[i] for i in order], fontsize=7)
        ax.set_xlabel("Importance")
        return self._save(fig, name)

    def scree(self, table: pd.DataFrame, name: str = "scree.svg") -> Path:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(table["component"], table["eigenvalue"], marker="o")
        ax.axhline(1.0, linestyle="--", color="grey", linewidth=0.8)
        ax.set_xlabel("Component")
        ax.set_ylabel("Eigenvalue")
        return self._save(fig, name)

    def importance_ranking(self, ranked: pd.DataFrame, name: str = "importance.svg") -> Path:
        ordered = ranked.iloc[::-1]
        fig, ax = plt.subplots(figsize=(6, max(3.0, 0.22 * len(ordered) + 1)))
        ax.barh(
            np.arange(len(ordered)),
            ordered["mean_decrease_accuracy"],
            xerr=ordered["sd"].fillna(0.0),
            color="tab:blue",
        )
        ax.set_yticks(np.arange(len(ordered)), ordered["feature"], fontsize=7)
        ax.axvline(0.0, color="grey", linewidth=0.8)
        ax.set_xlabel("Mean decrease in accuracy")
        return self._save(fig, name)

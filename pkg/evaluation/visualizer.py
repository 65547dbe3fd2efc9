"""
Plotting stub for convergence histories written by the bench.

The bench itself only emits data. Run this module directly to render
semilog curves of the relative gradient norm:

    python -m evaluation.visualizer results/history [out_dir]
"""

from __future__ import annotations

import glob
import os
import sys
from typing import Dict, List

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

import config
from evaluation.report import HISTORY_COLUMNS

# ── Style ─────────────────────────────────────────────────────────────────────
PALETTE = {
    "Newton": "#E84855",
}
plt.rcParams.update({
    "figure.dpi": 150,
    "font.family": "DejaVu Sans",
    "axes.spines.top": False,
    "axes.spines.right": False,
})


# ── Loading ───────────────────────────────────────────────────────────────────

def load_history(path: str) -> pd.DataFrame:
    """Read one history CSV and check its schema and iteration order."""
    df = pd.read_csv(path)
    missing = [c for c in HISTORY_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing history columns {missing}")
    if not df["j"].is_monotonic_increasing:
        raise ValueError(f"{path}: iteration index is not increasing")
    return df


def load_histories(directory: str) -> Dict[str, pd.DataFrame]:
    out = {}
    for path in sorted(glob.glob(os.path.join(directory, "*.csv"))):
        scheme = os.path.splitext(os.path.basename(path))[0]
        out[scheme] = load_history(path)
    return out


# ── Plot: convergence curves ──────────────────────────────────────────────────

def plot_convergence(histories: Dict[str, pd.DataFrame], save_dir: str = config.RESULTS_DIR) -> str:
    os.makedirs(save_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 5))
    colors = sns.color_palette("tab10", n_colors=max(len(histories), 1))
    for color, (scheme, df) in zip(colors, histories.items()):
        ax.semilogy(df["j"], df["grad_norm_rel"], label=scheme, color=color, linewidth=1.4)
        switch = df.index[df["phase"] == "Newton"]
        if len(switch):
            first = switch[0]
            ax.scatter([df.loc[first, "j"]], [df.loc[first, "grad_norm_rel"]],
                       color=PALETTE["Newton"], marker="o", s=18, zorder=3)
    ax.set_xlabel("iteration j")
    ax.set_ylabel("‖grad f(X_j)‖ / ‖grad f(X_0)‖")
    ax.set_title("Convergence history", fontsize=12, fontweight="bold")
    ax.legend(fontsize=8, ncol=2)

    plt.tight_layout()
    path = os.path.join(save_dir, "convergence.png")
    plt.savefig(path, bbox_inches="tight")
    plt.close()
    print(f"[Plot] Saved: {path}")
    return path


def main(argv: List[str]) -> int:
    if not argv:
        print("usage: python -m evaluation.visualizer <history_dir> [out_dir]")
        return 2
    histories = load_histories(argv[0])
    if not histories:
        print(f"[Plot] No history files in {argv[0]}")
        return 1
    plot_convergence(histories, argv[1] if len(argv) > 1 else config.RESULTS_DIR)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

"""Matplotlib rendering for the figure-producing CLI path.

Kept separate from the solvers so that library users never pay the
matplotlib import; the CLI calls in here after writing the CSV data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KWARGS = {"dpi": 150, "bbox_inches": "tight", "metadata": {"Software": None}}


def render_cost_curves(path: Path, p: Sequence[float], hat_J_p: Sequence[float],
                       star_J_p: Sequence[float], j_star: float,
                       p_star: float | None, q: float) -> None:
    """Deviator/follower cost curves over p with the optimum level line."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(p, hat_J_p, "b-", label=r"deviator cost $\hat{J}_p$")
    ax.plot(p, star_J_p, "r-.", label=r"follower cost $J^*_p$")
    ax.axhline(j_star, color="green", linestyle="--", label=r"social optimum $J^*$")
    if p_star is not None:
        ax.axvline(p_star, color="orange", linestyle="--",
                   label=rf"$p^* = {p_star:.4f}$")
    ax.set_xlabel(r"deviating proportion $p$")
    ax.set_ylabel("expected cost")
    ax.set_title(rf"Costs under partial deviation, $q = {q:g}$")
    ax.legend(frameon=False)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_pstar_curve(path: Path, q_values: Sequence[float],
                       p_stars: Sequence[float]) -> None:
    """Free-rider threshold as a function of the coupling strength."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(q_values, p_stars, "o-", color="tab:blue")
    ax.set_xlabel(r"coupling strength $q$")
    ax.set_ylabel(r"free-rider threshold $p^*$")
    ax.set_title(r"$p^*$ versus $q$")
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)

"""Figure rendering for CLI reports (matplotlib, non-interactive backend)."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name("." + path.name + ".tmp.png")
    fig.savefig(tmp, dpi=120, metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, path)
    return path


def plot_sweep(result, path: os.PathLike) -> Path:
    """Re<U> and gap against the path parameter, with transition brackets shaded."""
    s = np.array([p.s for p in result.points])
    re = np.array([np.nan if p.re is None else p.re for p in result.points])
    gap = np.array([np.nan if p.gap is None else p.gap for p in result.points])
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax1.axhline(0.0, color="0.6", lw=0.8)
    ax1.plot(s, re, "o-", ms=3)
    ax1.set_ylabel("Re <U>")
    ax2.plot(s, gap, "s-", ms=3, color="C1")
    ax2.set_ylabel("gap")
    ax2.set_xlabel("s")
    for a, b in result.transitions:
        for ax in (ax1, ax2):
            ax.axvspan(a, b, color="C3", alpha=0.15)
    return _save(fig, path)


def plot_winding(result, path: os.PathLike) -> Path:
    z = np.array([v for _, v in result.samples])
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(z.real, z.imag, ".-", ms=3)
    ax.plot([0], [0], "k+")
    ax.set_aspect("equal")
    ax.set_xlabel("Re <U>")
    ax.set_ylabel("Im <U>")
    ax.set_title(f"q = {result.q}")
    return _save(fig, path)


def plot_edge(trace: Sequence, path: os.PathLike, R_cross=None) -> Path:
    R = np.array([t[0] for t in trace])
    re = np.array([t[1] for t in trace])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.plot(R, re, "o-", ms=3)
    if R_cross is not None:
        ax.axvline(R_cross, color="C3", ls="--")
    ax.set_xlabel("window shift R")
    ax.set_ylabel("Re <U>")
    return _save(fig, path)


def plot_ensemble(result, path: os.PathLike) -> Path:
    pairs = [(r["gap"], r["re"]) for r in result.records if r["gap"] is not None and r["re"] is not None]
    gaps = [g for g, _ in pairs]
    vals = [v for _, v in pairs]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.plot(gaps, vals, "o", ms=4)
    ax.set_xlabel("gap")
    ax.set_ylabel("Re <U>")
    return _save(fig, path)


def plot_columns(x, y, path: os.PathLike, xlabel: str = "x", ylabel: str = "y") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, y, "o-", ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)

"""Tabular and graphical result files: band CSVs, SVG plots, relative-difference histograms."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .inference import Band, PosteriorEnsemble
from .observations import CAPILLARY, VENOUS, ObservationSet, matched_pairs

__all__ = ["write_band_csv", "read_band_csv", "emit_plot", "relative_differences", "relative_difference_histogram"]

# band colour, marker colour
COLORS = {VENOUS: ("red", "magenta"), CAPILLARY: ("blue", "green")}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_band_csv(band: Band, path) -> Path:
    path = Path(path)
    header = ["time_h"] + [f"q{p:g}" for p in band.probs] + ["mean"]
    lines = [",".join(header)]
    for j, t in enumerate(band.grid):
        row = [_fmt(t)] + [_fmt(band.quantiles[i, j]) for i in range(len(band.probs))]
        row.append(_fmt(band.mean[j]))
        lines.append(",".join(row))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def read_band_csv(path) -> Band:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    probs = tuple(float(h[1:]) for h in header[1:-1])
    return Band(body[:, 0], probs, body[:, 1:-1].T.copy(), body[:, -1].copy())


def emit_plot(
    bands: Mapping[str, Band],
    obs: Optional[ObservationSet],
    path,
    ensembles: Optional[Mapping[str, PosteriorEnsemble]] = None,
    style: str = "band",
    title: Optional[str] = None,
) -> Path:
    """Write an SVG of the credible band(s) with the readings, plus one band CSV per source.

    ``style="shadow"`` draws many nested central intervals from the
    ensembles, approximating a per-time density shading.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not bands:
        raise ValueError("no bands to plot")
    path = Path(path)
    plt.rcParams["svg.hashsalt"] = "ogttbayes"
    fig, ax = plt.subplots(figsize=(7, 5))
    for source, band in bands.items():
        if band.grid.size == 0:
            raise ValueError(f"empty {source} band")
        fill, marker = COLORS.get(source, ("grey", "black"))
        if style == "shadow" and ensembles and source in ensembles:
            g = ensembles[source].glucose
            for level in np.linspace(0.1, 0.95, 12):
                lo, hi = np.quantile(g, [0.5 - level / 2, 0.5 + level / 2], axis=0)
                ax.fill_between(band.grid, lo, hi, color=fill, alpha=0.06, linewidth=0)
        else:
            try:
                lo, hi = band.interval(0.95)
                ax.fill_between(band.grid, lo, hi, color=fill, alpha=0.2, linewidth=0,
                                label=f"{source} 95%")
            except KeyError:
                pass
            try:
                lo, hi = band.interval(0.5)
                ax.fill_between(band.grid, lo, hi, color=fill, alpha=0.3, linewidth=0)
            except KeyError:
                pass
        try:
            ax.plot(band.grid, band.curve(0.5), color=fill, linewidth=1.2, label=f"{source} median")
        except KeyError:
            ax.plot(band.grid, band.mean, color=fill, linewidth=1.2, label=f"{source} mean")
        write_band_csv(band, path.with_name(f"band_{source}.csv"))

    if obs is not None:
        for source in obs.sources:
            t, y = obs.series(source)
            marker = COLORS.get(source, ("grey", "black"))[1]
            ax.plot(t, y, "o", color=marker, markersize=5, label=f"{source} readings")
        last = max((o.time for o in obs.observations), default=None)
        if last is not None:
            ax.axvline(last, color="grey", linewidth=0.6, linestyle=":")
    ax.set_xlabel("time (h)")
    ax.set_ylabel("glucose (mg/dl)")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def relative_differences(observations: Sequence[ObservationSet]) -> np.ndarray:
    """(capillary - venous) / venous at every time with both readings."""
    out = [(c - v) / v for obs in observations for _, v, c in matched_pairs(obs)]
    return np.asarray(out, dtype=np.float64)


def relative_difference_histogram(
    observations: Sequence[ObservationSet], bin_width: float = 0.05, path=None
) -> list[tuple[float, float, float, int]]:
    """Bin the relative capillary-venous differences.

    Bins are centred on integer multiples of ``bin_width``. Returns rows of
    ``(center, low, high, count)`` covering every bin between the smallest
    and largest occupied one; optionally written as CSV.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    rel = relative_differences(observations)
    if rel.size == 0:
        raise ValueError("no matched venous/capillary readings")
    idx = np.round(rel / bin_width).astype(np.int64)
    counts = np.bincount(idx - idx.min())
    rows = []
    for offset, count in enumerate(counts):
        k = idx.min() + offset
        center = k * bin_width
        rows.append((center, center - bin_width / 2, center + bin_width / 2, int(count)))
    if path is not None:
        lines = ["bin_center,bin_low,bin_high,count"]
        lines += [f"{c:.10g},{lo:.10g},{hi:.10g},{n}" for c, lo, hi, n in rows]
        Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return rows

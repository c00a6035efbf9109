"""Figures for bound traces: CDF bands per iteration and width against iteration."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .issa import BoundsTrace  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
}


def _steps(cdf):
    # right-continuous step curve over state indices
    x = np.arange(len(cdf) + 1) - 0.5
    return x, np.append(cdf, cdf[-1])


def plot_trace(trace: BoundsTrace, path, exact=None, max_bands: int = 6):
    """Write a two-panel figure to ``path``; format follows the extension."""
    its = trace.iterations
    if not its:
        raise ValueError("trace has no iterations")
    # spread the shown iterations over the run, always keeping first and last
    pick = sorted(set(np.linspace(0, len(its) - 1, min(max_bands, len(its))).round().astype(int)))
    with plt.rc_context(STYLE):
        fig, (ax_cdf, ax_w) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        cmap = plt.get_cmap("viridis")
        for rank, i in enumerate(pick):
            it = its[i]
            color = cmap(rank / max(1, len(pick) - 1))
            x, lo = _steps(it.lower)
            _, hi = _steps(it.upper)
            ax_cdf.fill_between(x, lo, hi, step="post", color=color, alpha=0.25, linewidth=0)
            ax_cdf.step(x, lo, where="post", color=color, linewidth=1)
            ax_cdf.step(x, hi, where="post", color=color, linewidth=1, linestyle="--", label=f"iter {it.index}")
        if exact is not None:
            x, ex = _steps(np.asarray(exact, dtype=float))
            ax_cdf.step(x, ex, where="post", color="black", linewidth=1.2, label="exact")
        m = len(its[0].lower)
        labels = list(trace.states) if trace.states else [str(k) for k in range(m)]
        ax_cdf.set_xticks(range(m))
        ax_cdf.set_xticklabels(labels, rotation=45 if m > 6 else 0)
        ax_cdf.set_ylim(-0.02, 1.02)
        ax_cdf.set_xlabel(trace.query or "state")
        ax_cdf.set_ylabel("CDF bounds")
        ax_cdf.legend(loc="lower right", frameon=False)

        idx = [it.index for it in its]
        width = [it.width for it in its]
        ax_w.plot(idx, width, marker="o", markersize=3, color="tab:blue")
        ax_w.set_xlabel("iteration")
        ax_w.set_ylabel("max bound width")
        ax_w.set_ylim(bottom=0)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path

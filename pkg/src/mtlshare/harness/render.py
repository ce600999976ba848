"""Static charts and result files for an :class:`ExperimentResult`."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .config import ALIGNMENT_CORRECTION, SAMPLE_SWEEP  # noqa: E402
from .experiments import PLOTTED  # noqa: E402

X_LABELS = {
    "sample_sweep": "source training samples",
    "alignment_correction": "source training samples",
    "cosine_sweep": "cos(theta_1, theta_2)",
    "capacity_sweep": "capacity r",
    "noise_reweighting": "flipped fraction",
    "theory_verify": "sin(theta_1, theta_2)",
}


def render_chart(result, path):
    """Mean +/- standard error of the kind's headline metrics against the grid."""
    kind = result.config.kind
    # fixed hash salt and no timestamp keep the SVG byte-stable
    with plt.rc_context({"svg.hashsalt": "mtlshare", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for metric in PLOTTED[kind]:
            if metric not in result.metrics:
                continue
            x, mean, se = result.series(metric)
            ax.errorbar(x, mean, yerr=se, marker="o", capsize=3, label=metric)
        if kind in (SAMPLE_SWEEP, ALIGNMENT_CORRECTION):
            ax.set_xscale("log")
        ax.axhline(0.0, color="0.6", linewidth=0.8)
        ax.set_xlabel(X_LABELS[kind])
        ax.set_ylabel("mean over seeds")
        ax.set_title(result.config.label)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)


def render(result, out_dir):
    """Write results.csv, summary.json and ``<kind>.svg`` into ``out_dir``."""
    out_dir = result.save(out_dir)
    chart = render_chart(result, out_dir / f"{result.config.kind}.svg")
    return [out_dir / "results.csv", out_dir / "summary.json", chart]

"""Figure rendering for sweep output. Imported lazily; the data path never needs it."""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
panel_width = 3.4

params = {
    "axes.labelsize": 10,
    "font.family": "serif",
    "font.size": 8,
    "mathtext.fontset": "stix",
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "savefig.dpi": 200,
    # fixed metadata keeps PNG bytes stable across runs
    "svg.hashsalt": "qwork",
}

# D_W, V_W, D_W^2 + V_W^2, then the initial-state references D and V
STYLES = {
    "d_w": dict(color="black", linestyle="-", label=r"$\mathcal{D}_W$"),
    "v_w": dict(color="olive", linestyle="--", label=r"$\mathcal{V}_W$"),
    "dw2_plus_vw2": dict(color="red", linestyle="-.", label=r"$\mathcal{D}_W^2+\mathcal{V}_W^2$"),
    "d_state": dict(color="green", linestyle=(0, (2, 2)), label=r"$D$"),
    "v_state": dict(color="magenta", linestyle=(0, (6, 2, 1, 2, 1, 2)), label=r"$V$"),
}


def _theta_label(theta):
    frac = theta / math.pi
    if frac > 0 and abs(1 / frac - round(1 / frac)) < 1e-9:
        return rf"$\theta=\pi/{round(1 / frac)}$"
    return rf"$\theta={theta:.4g}$"


def plot_fig1(rows_by_theta, path):
    """One panel per theta of the sweep rows (objects with the fig1 columns)."""
    n = len(rows_by_theta)
    with plt.rc_context(params):
        fig, axes = plt.subplots(1, n, figsize=(panel_width * n, panel_width * golden_mean * 1.3),
                                 sharey=True, squeeze=False)
        for ax, (theta, rows) in zip(axes[0], rows_by_theta.items()):
            sig = [r.sigma for r in rows]
            for key, style in STYLES.items():
                ax.plot(sig, [getattr(r, key) for r in rows], **style)
            ax.set_xscale("log")
            ax.set_xlabel(r"$\sigma$")
            ax.set_title(_theta_label(theta))
            ax.set_ylim(-0.02, 1.08)
        handles, labels = axes[0][0].get_legend_handles_labels()
        fig.legend(handles, labels, loc="lower center", ncol=len(STYLES), frameon=False)
        fig.tight_layout(rect=(0, 0.1, 1, 1))
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path

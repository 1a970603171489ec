"""Report figures, rendered headless to PNG next to the CSV output."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.constrained_layout.use": True,
    # keep PNG bytes reproducible
    "svg.hashsalt": "rbds",
}

METHOD_LABELS = {
    "rbds": "RBDS",
    "lrrs_bd": "LRRS_BD",
    "lrrs": "LRRS",
    "rpca_preclean+lrrs": "RPCA+LRRS",
}


def _label(method):
    return METHOD_LABELS.get(method, method)


def save_fig(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_accuracy(report, path):
    rows = report.summary()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(rows), 2.8))
        x = np.arange(len(rows))
        ax.bar(x, [r["mean_accuracy"] for r in rows], yerr=[r["std_accuracy"] for r in rows],
               color="0.55", edgecolor="k", capsize=3)
        ax.set_xticks(x, [_label(r["method"]) for r in rows])
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("accuracy")
        ax.set_title(f"mean over {rows[0]['repetitions'] if rows else 0} runs")
    return save_fig(fig, path)


def _class_order(labels):
    return np.argsort(labels, kind="stable")


def plot_representation(Z, atom_labels, sample_labels, path, title=""):
    """|Z| with rows/columns sorted by class and class blocks outlined."""
    ra, rs = _class_order(atom_labels), _class_order(sample_labels)
    Zs = np.abs(Z[np.ix_(ra, rs)])
    a_sorted, s_sorted = np.asarray(atom_labels)[ra], np.asarray(sample_labels)[rs]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        im = ax.imshow(Zs, aspect="auto", cmap="viridis", interpolation="nearest")
        for c in np.unique(a_sorted):
            r0, r1 = np.flatnonzero(a_sorted == c)[[0, -1]]
            c_idx = np.flatnonzero(s_sorted == c)
            if c_idx.size:
                ax.add_patch(plt.Rectangle((c_idx[0] - 0.5, r0 - 0.5), c_idx[-1] - c_idx[0] + 1,
                                           r1 - r0 + 1, fill=False, ec="w", lw=0.8))
        ax.set_xlabel("sample (class-sorted)")
        ax.set_ylabel("atom (class-sorted)")
        ax.set_title(title or "|Z|")
        fig.colorbar(im, ax=ax, shrink=0.8)
    return save_fig(fig, path)


def plot_mask(atom_labels, sample_labels, path):
    """Picture of the incoherence mask for class-sorted atoms and samples."""
    a = np.sort(np.asarray(atom_labels))
    s = np.sort(np.asarray(sample_labels))
    A = (a[:, None] != s[None, :]).astype(float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.0))
        ax.imshow(A, cmap="gray_r", aspect="auto", interpolation="nearest", vmin=0, vmax=1)
        ax.set_xlabel("sample")
        ax.set_ylabel("atom")
        ax.set_title("mask A (black = 1)")
    return save_fig(fig, path)


def plot_traces(histories, path):
    """Semilog residual curves; ``histories`` maps method -> residual history."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.4, 2.8))
        for method, hist in histories.items():
            h = np.asarray(hist, dtype=float)
            if h.size == 0:
                continue
            ax.semilogy(h[:, 0], np.max(h[:, 1:4], axis=1), label=_label(method))
        ax.set_xlabel("iteration")
        ax.set_ylabel("max residual (inf-norm)")
        ax.legend(frameon=False)
    return save_fig(fig, path)


def plot_sweep(parameter, values, reports, path):
    methods = []
    for rep in reports:
        methods += [m for m in rep.methods if m not in methods]
    xs = np.asarray(values, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.4, 3.0))
        markers = "osd^v<>"
        for i, m in enumerate(methods):
            mean, std = [], []
            for rep in reports:
                row = next((r for r in rep.summary() if r["method"] == m), None)
                mean.append(np.nan if row is None else row["mean_accuracy"])
                std.append(np.nan if row is None else row["std_accuracy"])
            ax.errorbar(xs, mean, yerr=std, marker=markers[i % len(markers)], ms=4, capsize=2,
                        label=_label(m))
        ax.set_xlabel(parameter)
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1.05)
        ax.legend(frameon=False)
    return save_fig(fig, path)


def render_report_figures(report, out_dir, models=None):
    """Write accuracy, representation, mask and trace figures into ``out_dir/figures``.

    ``models`` maps method -> (Z, atom_labels, sample_labels[, residual history]);
    it defaults to the repetition-0 models kept on the report.
    """
    fig_dir = Path(out_dir) / "figures"
    paths = [plot_accuracy(report, fig_dir / "accuracy.png")]
    if models is None:
        models = {m: (mod.Z_train, mod.dictionary.atom_labels, mod.sample_labels, mod.residual_history)
                  for m, mod in report.examples.items()}
    histories = {}
    for method, item in models.items():
        Z, al, sl = item[:3]
        slug = method.replace("+", "_")
        paths.append(plot_representation(Z, al, sl, fig_dir / f"Z_{slug}.png", f"|Z| {_label(method)}"))
        if len(item) > 3 and item[3]:
            histories[method] = item[3]
    if "rbds" in models:
        paths.append(plot_mask(models["rbds"][1], models["rbds"][2], fig_dir / "mask_rbds.png"))
    if histories:
        paths.append(plot_traces(histories, fig_dir / "convergence.png"))
    return paths

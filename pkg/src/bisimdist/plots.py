"""Figures for benchmark reports.  matplotlib is imported lazily, on the report path only."""

from collections import defaultdict


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def bench_figure(rows, path):
    """Mean wall time per method and mean iteration error against state count."""
    plt = _pyplot()
    times = defaultdict(list)
    errors = defaultdict(list)
    for r in rows:
        times[r["method"], r["n"]].append(float(r["time_ms"]))
        if r["method"] == "iter":
            errors[r["n"]].append(float(r["error"]))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    for method, marker in (("otf", "o"), ("iter", "s")):
        ns = sorted(n for m, n in times if m == method)
        ax1.plot(ns, [sum(times[method, n]) / len(times[method, n]) for n in ns], marker=marker, label=method)
    ax1.set_xlabel("states")
    ax1.set_ylabel("time [ms]")
    ax1.legend(frameon=False)

    ns = sorted(errors)
    ax2.semilogy(ns, [max(sum(errors[n]) / len(errors[n]), 1e-17) for n in ns], marker="s", color="C1")
    ax2.set_xlabel("states")
    ax2.set_ylabel("iteration error at equal time")
    for ax in (ax1, ax2):
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path

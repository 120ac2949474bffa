"""Figure rendering and convergence summaries for run artifacts.

Figures are rendered headless (Agg) to files next to the delimited
output; nothing here opens a window.
"""

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_diagnostics",
    "observed_orders",
    "convergence_verdicts",
    "convergence_table",
    "write_convergence_csv",
    "plot_convergence",
]

PARAMS = {
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

# default curves for the time-series figure; anything absent or all-NaN
# in the rows is skipped
DIAGNOSTIC_CURVES = [
    "sup_E",
    "sup_grad_E",
    "sup_grad_phi",
    "sup_V_phi",
    "sup_g_VV",
    "ricci_residual",
    "slot_consistency",
]

FLOOR = 1e-19


def _column(rows, name):
    vals = np.array([float(row.get(name, math.nan)) for row in rows])
    return vals


def plot_diagnostics(rows, path, columns=None, title=None):
    """Semilog time series of monitored norms; returns the path."""
    if not rows:
        raise ValueError("no diagnostic rows to plot")
    plt.rcParams.update(PARAMS)
    t = _column(rows, "t")
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for name in columns or DIAGNOSTIC_CURVES:
        y = _column(rows, name)
        if np.all(np.isnan(y)):
            continue
        ax.semilogy(t, np.maximum(np.abs(y), FLOOR), label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("sup norm")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", ncol=2)
    fig.savefig(path)
    plt.close(fig)
    return path


def observed_orders(resolutions, errors):
    """Pairwise convergence orders log(e_i/e_{i+1}) / log(N_{i+1}/N_i).

    Zero or floor-level errors give nan for the affected pair.
    """
    res = [float(r) for r in resolutions]
    err = [float(e) for e in errors]
    if len(res) != len(err) or len(res) < 2:
        raise ValueError("need matching errors for at least 2 resolutions")
    orders = []
    for i in range(len(res) - 1):
        if err[i] <= FLOOR or err[i + 1] <= FLOOR:
            orders.append(math.nan)
        else:
            orders.append(math.log(err[i] / err[i + 1])
                          / math.log(res[i + 1] / res[i]))
    return orders


def convergence_verdicts(resolutions, errors_by_norm, threshold,
                         floor=1e-13):
    """Per-norm pass/fail on the final observed order.

    A final resolution pair with both errors at or below the round-off
    floor passes vacuously (nothing left to converge).
    """
    verdicts = {}
    for name, errs in errors_by_norm.items():
        orders = observed_orders(resolutions, errs)
        at_floor = errs[-1] <= floor and errs[-2] <= floor
        last = orders[-1]
        verdicts[name] = at_floor or (not math.isnan(last)
                                      and last >= threshold)
    return verdicts


def convergence_table(resolutions, errors_by_norm, declared_order=None,
                      threshold=None, floor=1e-13):
    """Plain-text table of errors and pairwise observed orders.

    errors_by_norm maps a norm name to one error per resolution.  With a
    threshold, each norm gets a pass/fail verdict on its final observed
    order; a final pair already at the round-off floor passes vacuously.
    """
    lines = []
    head = f"{'norm':<16}" + "".join(f"{'N=%d' % r:>12}" for r in resolutions)
    head += "".join(f"{'order':>8}" for _ in range(len(resolutions) - 1))
    if threshold is not None:
        head += f"{'verdict':>9}"
    lines.append(head)
    lines.append("-" * len(head))
    for name, errs in errors_by_norm.items():
        orders = observed_orders(resolutions, errs)
        row = f"{name:<16}" + "".join(f"{e:>12.3e}" for e in errs)
        row += "".join(f"{p:>8.2f}" for p in orders)
        if threshold is not None:
            ok = convergence_verdicts(resolutions, {name: errs},
                                      threshold, floor)[name]
            row += f"{'pass' if ok else 'FAIL':>9}"
        lines.append(row)
    if declared_order is not None:
        lines.append("")
        note = f"declared stencil order {declared_order}"
        if threshold is not None:
            note += f", pass threshold {threshold:g}"
        lines.append(note)
    return "\n".join(lines) + "\n"


def write_convergence_csv(path, resolutions, errors_by_norm):
    """One row per norm: errors at each resolution, then pairwise orders."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["norm"] + [f"err_N{r}" for r in resolutions]
        header += [f"order_{resolutions[i]}_{resolutions[i + 1]}"
                   for i in range(len(resolutions) - 1)]
        writer.writerow(header)
        for name, errs in errors_by_norm.items():
            orders = observed_orders(resolutions, errs)
            writer.writerow([name] + [f"{e:.16e}" for e in errs]
                            + [f"{p:.6f}" for p in orders])
    return path


def plot_convergence(resolutions, errors_by_norm, path, declared_order=None,
                     title=None):
    """Log-log errors against resolution with an ideal-slope guide."""
    plt.rcParams.update(PARAMS)
    res = np.asarray(resolutions, dtype=float)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ymax = FLOOR
    for name, errs in errors_by_norm.items():
        e = np.maximum(np.abs(np.asarray(errs, dtype=float)), FLOOR)
        ax.loglog(res, e, marker="o", label=name)
        ymax = max(ymax, e[0])
    if declared_order is not None and ymax > FLOOR:
        guide = ymax * (res / res[0]) ** (-declared_order)
        ax.loglog(res, guide, "k--", alpha=0.5,
                  label=f"order {declared_order:g}")
    ax.set_xlabel("resolution")
    ax.set_ylabel("error")
    ax.set_xticks(res)
    ax.set_xticklabels([str(int(r)) for r in res])
    ax.minorticks_off()
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.savefig(path)
    plt.close(fig)
    return path

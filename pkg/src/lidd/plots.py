"""Stand-alone matplotlib scripts that redraw the figures from the CSVs."""

import os

FIG2 = '''"""Induced potential cuts and maximal accelerations, read from CSV only."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name)) as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


left = load("fig2_left.csv")
right = load("fig2_right.csv")
fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
for rho in sorted(set(left["tf_radius_um"])):
    idx = [i for i, r in enumerate(left["tf_radius_um"]) if r == rho]
    a.plot([left["y_um"][i] for i in idx], [left["potential_Hz"][i] / 1e6 for i in idx],
           label=f"{rho:g} um")
a.set_xlabel("y (um)")
a.set_ylabel("V / h (MHz)")
a.legend(fontsize=7)
b.semilogy(right["tf_radius_um"], right["max_acceleration_m_s2"], "o-", label="max |grad V| / m")
b.semilogy(right["tf_radius_um"], right["line_a_m_s2"], "--", label="line a")
b.semilogy(right["tf_radius_um"], right["line_b_m_s2"], ":", label="line b")
b.set_xlabel("TF radius (um)")
b.set_ylabel("acceleration (m/s^2)")
b.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, sys.argv[1] if len(sys.argv) > 1 else "fig2.png"), dpi=150)
'''

FIG3 = '''"""Momentum widths against polarization angle, read from CSV only."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(HERE, "fig3.csv")) as fh:
    rows = list(csv.DictReader(fh))
col = {k: [float(r[k]) for r in rows] for k in rows[0]}
phi = col["angle_deg"]
fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for ax, a in zip(axes, "xy"):
    ax.plot(phi, col[f"sigma_{a}_coherent"], "o-", label="coherent")
    ax.plot(phi, col[f"sigma_{a}_incoherent"], "s--", label="incoherent")
    ax.plot(phi, col[f"sigma_{a}_total"], "k-", label="total")
    ax.axvline(54.74, color="grey", lw=0.5)
    ax.set_xlabel("polarization angle (deg)")
    ax.set_title(f"{a} projection")
axes[0].set_ylabel("sigma (recoils)")
axes[0].legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, sys.argv[1] if len(sys.argv) > 1 else "fig3.png"), dpi=150)
'''

SCRIPTS = {
    "plot_fig2.py": (FIG2, ("fig2_left.csv", "fig2_right.csv")),
    "plot_fig3.py": (FIG3, ("fig3.csv",)),
}


def emit_plot_scripts(outdir):
    """Write one plotting script per figure next to its CSVs; returns the paths."""
    missing = [c for _, needs in SCRIPTS.values() for c in needs
               if not os.path.exists(os.path.join(outdir, c))]
    if missing:
        raise FileNotFoundError(f"missing CSV in {outdir}: {', '.join(missing)}")
    paths = []
    for name, (text, _) in SCRIPTS.items():
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths.append(path)
    return paths

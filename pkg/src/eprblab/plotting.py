"""Plot emission for run reports.

The report path writes a standalone matplotlib script with the report data
embedded, so figures can be regenerated without this package installed.
"""
from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

RC_PARAMS = {
    "figure.figsize": (7.0, 7.5),
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}

_TEMPLATE = '''\
#!/usr/bin/env python3
"""Coincidence-rate curves and residuals of an EPRB run.

Generated from a run report; needs only matplotlib. Usage:

    python {script_name} [output.png]
"""
import json
import math
import sys

import matplotlib

if __name__ == "__main__":
    matplotlib.use("Agg")
import matplotlib.pyplot as plt

RC_PARAMS = {rc}
DATA = json.loads(r"""{data}""")


def main(out=None):
    plt.rcParams.update(RC_PARAMS)
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True)
    for s in DATA["series"]:
        deg = [math.degrees(p) for p in s["phi_rad"]]
        if s["engine"] == "qm":
            top.plot(deg, s["value"], "k-", lw=2.2, label="QM joint probability = claimed rate, sin^2(phi)/2")
            continue
        label = s["engine"] + ": " + s["mode"]
        if s["engine"] == "mc":
            top.errorbar(deg[::10], s["value"][::10], yerr=s["std_error"][::10], fmt=".", ms=3, label=label)
        else:
            top.plot(deg, s["value"], "--", label=label)
        bottom.plot(deg, s["residual_claim"], label=label)
    top.set_ylabel("normalized coincidence rate")
    top.set_title("two-mode model vs claimed sin^2(phi)/2")
    top.legend(loc="best")
    bottom.axhline(0.0, color="k", lw=0.8)
    bottom.set_xlabel("relative analyzer angle phi (deg)")
    bottom.set_ylabel("computed - claim")
    bottom.legend(loc="best")
    fig.tight_layout()
    if out:
        fig.savefig(out)
    return fig


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "{png_name}")
'''


def plot_data(report: dict) -> dict:
    """Reduce a run report to the series the figure needs."""
    errors = {}
    for r in report["curves"]:
        errors.setdefault((r["engine"], r["mode"]), []).append(r["std_error"])
    series = []
    for s in report["residuals"]["series"]:
        series.append({
            "engine": s["engine"],
            "mode": s["mode"],
            "phi_rad": s["phi_rad"],
            "value": s["value"],
            "std_error": errors.get((s["engine"], s["mode"]), [0.0] * len(s["value"])),
            "residual_claim": s["residual_claim"],
        })
    return {"series": series}


def plot_script(report: dict, script_name: str = "plot_report.py", png_name: str = "report.png") -> str:
    data = json.dumps(plot_data(report), sort_keys=True)
    return _TEMPLATE.format(rc=repr(RC_PARAMS), data=data, script_name=script_name, png_name=png_name)


def render(script: Path, png: Path, timeout: float = 120.0) -> bool:
    """Run a generated plot script in a fresh interpreter; False if matplotlib is unavailable."""
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    env = dict(os.environ, MPLBACKEND="Agg")
    subprocess.run([sys.executable, str(script), str(png)], check=True, env=env,
                   timeout=timeout, capture_output=True)
    return png.exists()

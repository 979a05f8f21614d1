"""Matplotlib rendering of scenario CSV payloads to standalone SVG files.

Output is byte-deterministic: fixed SVG hash salt, no date stamp, Agg backend.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from .scenario import parse_csv  # noqa: E402

_RC = {
    "svg.hashsalt": "nemscat",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}
_METADATA = {"Date": None}

LABELS = {
    "t": "t",
    "p_minus": r"$P_-(t)$",
    "abs_f2": r"$|f(t)|^2$",
    "abs_f2_short": r"$|f(t)|^2$ (short time)",
    "p_minus_num": r"$P_-$ (Lindblad)",
    "p_minus_closed": r"$P_-$ (closed form)",
    "norm_plus": r"$|\alpha_+|^2+|\beta_+|^2$",
    "norm_minus": r"$|\alpha_-|^2+|\beta_-|^2$",
}


def emit_svg(csv_payload: str, columns, path, x: str = "t", title: str | None = None) -> None:
    """Line plot of ``columns`` against ``x``, one curve per column."""
    data = parse_csv(csv_payload)
    missing = [c for c in [x, *columns] if c not in data]
    if missing:
        raise KeyError(f"columns not in CSV: {', '.join(missing)}")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        for c in columns:
            ax.plot(data[x], data[c], label=LABELS.get(c, c))
        ax.set_xlabel(LABELS.get(x, x))
        ax.set_ylabel(LABELS.get(columns[0], columns[0]) if len(columns) == 1 else "value")
        if len(columns) > 1:
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_METADATA)
        plt.close(fig)


def emit_orbits_svg(csv_payload: str, path, title: str | None = None) -> None:
    """Complex-plane orbits of alpha(+-t) (left) and beta(+-t) (right).

    Circles of radius 1/2 mark the coherent-state uncertainty at the start and
    end of the orbits.
    """
    data = parse_csv(csv_payload)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(7.2, 3.6))
        for ax, mode, sym in zip(axes, ("alpha", "beta"), (r"\alpha", r"\beta")):
            for branch, style, lab in (("plus", "-", "+t"), ("minus", ":", "-t")):
                re = data[f"re_{mode}_{branch}"]
                im = data[f"im_{mode}_{branch}"]
                ax.plot(re, im, style, label=f"${sym}({lab})$")
                for k, ls in ((0, "-"), (-1, ":")):
                    ax.add_patch(Circle((re[k], im[k]), 0.5, fill=False, ls=ls, lw=0.8, color="0.4"))
            ax.set_aspect("equal", adjustable="datalim")
            ax.set_xlabel(f"Re ${sym}$")
            ax.set_ylabel(f"Im ${sym}$")
            ax.legend(frameon=False, fontsize=8)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_METADATA)
        plt.close(fig)

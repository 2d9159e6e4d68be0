#!/usr/bin/env python3
"""Optional plotting helper for nelson-tfd CSV outputs.

Usage:
    plot_results.py paths <paths.csv> [out.png]       (X, X~) sample path
    plot_results.py histogram <histogram.csv> [out.png]
    plot_results.py moments <moments.csv> [out.png]
    plot_results.py uncertainty <uncertainty.csv> [out.png]
"""

import csv
import math
import sys


def read_csv(path):
    rows, header = [], None
    with open(path, newline="") as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
            else:
                rows.append(cells)
    return header, rows


def column(header, rows, name, convert=float):
    idx = header.index(name)
    return [convert(r[idx]) for r in rows]


def main():
    if len(sys.argv) < 3:
        print(__doc__)
        return 2
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind, path = sys.argv[1], sys.argv[2]
    out = sys.argv[3] if len(sys.argv) > 3 else f"{kind}.png"
    header, rows = read_csv(path)
    fig, ax = plt.subplots(figsize=(6, 5))

    if kind == "paths":
        X = column(header, rows, "X")
        Xt = column(header, rows, "X_tilde")
        ax.plot(X, Xt, lw=0.3)
        ax.set_xlabel("X")
        ax.set_ylabel(r"$\tilde{X}$")
        ax.set_aspect("equal")
    elif kind == "histogram":
        lo = column(header, rows, "bin_lo")
        hi = column(header, rows, "bin_hi")
        centers = [(a + b) / 2 for a, b in zip(lo, hi)]
        ax.bar(centers, column(header, rows, "density"),
               width=hi[0] - lo[0], alpha=0.5, label="sampled")
        ax.plot(centers, column(header, rows, "analytic_density"), "k-", label="analytic")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.legend()
    elif kind == "moments":
        t = column(header, rows, "t")
        for name in ("var_x", "var_x_tilde", "cov_xxt"):
            values = column(header, rows, name)
            errors = column(header, rows, "se_" + name)
            ax.errorbar(t, values, yerr=[3 * e for e in errors], label=name, lw=1)
        ax.set_xlabel("t")
        ax.legend()
    elif kind == "uncertainty":
        bb = column(header, rows, "beta_bar",
                    convert=lambda s: float("inf") if s == "inf" else float(s))
        finite = [i for i, b in enumerate(bb) if math.isfinite(b)]
        ax.errorbar([bb[i] for i in finite],
                    [column(header, rows, "product")[i] for i in finite],
                    yerr=[3 * column(header, rows, "se_product")[i] for i in finite],
                    fmt="o", label="sampled")
        ax.plot([bb[i] for i in finite],
                [column(header, rows, "analytic_product")[i] for i in finite],
                "k-", label=r"$\hbar/2 + \hbar n$")
        ax.axhline(0.5, ls=":", color="gray", label=r"$\hbar/2$")
        ax.set_xlabel(r"$\bar\beta$")
        ax.set_ylabel("uncertainty product")
        ax.legend()
    else:
        print(__doc__)
        return 2

    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

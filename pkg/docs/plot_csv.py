#!/usr/bin/env python3
"""Plot any two numeric columns of a driver CSV against each other.

Usage: plot_csv.py FILE XCOL YCOL [more YCOLs...] [--log]

Column names come from the file's own `# columns:` header line.
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def read_table(path):
    columns = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# columns:"):
                columns = [c.strip() for c in line.split(":", 1)[1].split(",")]
            elif line and not line.startswith("#"):
                rows.append(line.split(","))
    if columns is None:
        sys.exit(f"{path}: no '# columns:' header found")
    return columns, rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("file")
    parser.add_argument("xcol")
    parser.add_argument("ycols", nargs="+")
    parser.add_argument("--log", action="store_true", help="log-scale the y axis")
    parser.add_argument("--out", default=None, help="output PNG (default: <file>.png)")
    args = parser.parse_args()

    columns, rows = read_table(args.file)
    for name in [args.xcol, *args.ycols]:
        if name not in columns:
            sys.exit(f"unknown column {name!r}; file has: {', '.join(columns)}")

    def pull(name):
        idx = columns.index(name)
        return [float(r[idx]) for r in rows]

    x = pull(args.xcol)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in args.ycols:
        ax.plot(x, pull(name), "o-", ms=3, label=name)
    if args.log:
        ax.set_yscale("log")
    ax.set_xlabel(args.xcol)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    out = args.out or args.file + ".png"
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

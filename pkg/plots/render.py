#!/usr/bin/env python3
"""Render experiment CSV matrices as annotated heatmaps.

Reads the labeled-matrix CSVs the harness emits (AUC matrices and
normalized confusion matrices) and writes a PNG heatmap.  Purely
read-only over its input: no metric is recomputed here.

Usage:
    python render.py --input matrix_auc.csv --kind auc_matrix --out auc.png
    python render.py --input confusion_source_id.csv --kind confusion \
        --out conf.png --hide-below 0.04 --title "source attribution"

``--hide-below N`` suppresses the numeric annotation of any cell whose
value is below N (the colormap still shows the cell).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("auc_matrix", "confusion")


class RenderError(ValueError):
    pass


def read_labeled_matrix(path):
    """Parse a matrix CSV with a header row and a label column."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise RenderError(f"{path}: row 1: expected a header with at least one column label")
    col_labels = rows[0][1:]
    row_labels = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise RenderError(f"{path}: row {lineno}: expected {len(rows[0])} cells, found {len(row)}")
        row_labels.append(row[0])
        parsed = []
        for cell in row[1:]:
            try:
                parsed.append(float(cell))
            except ValueError:
                raise RenderError(f"{path}: row {lineno}: non-numeric cell {cell!r}") from None
        values.append(parsed)
    if not values:
        raise RenderError(f"{path}: no data rows")
    return row_labels, col_labels, np.array(values)


def build_figure(row_labels, col_labels, values, kind, title=None, hide_below=None):
    """Heatmap figure plus the list of (row, col, text) annotations drawn."""
    if kind not in KINDS:
        raise RenderError(f"unknown kind {kind!r}; expected one of {KINDS}")
    n_rows, n_cols = values.shape
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * n_cols, 1.0 + 0.6 * n_rows), dpi=150)
    vmax = 1.0 if kind == "auc_matrix" else float(values.max()) or 1.0
    image = ax.imshow(values, cmap="viridis", vmin=0.0, vmax=vmax, aspect="auto")

    ax.set_xticks(range(n_cols), labels=col_labels, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(n_rows), labels=row_labels, fontsize=7)
    ax.set_xlabel("target" if kind == "auc_matrix" else "predicted")
    ax.set_ylabel("source" if kind == "auc_matrix" else "true")
    if title:
        ax.set_title(title, fontsize=9)

    fmt = "{:.2f}" if kind == "auc_matrix" else "{:.3g}"
    annotations = []
    for i in range(n_rows):
        for j in range(n_cols):
            value = values[i, j]
            if hide_below is not None and value < hide_below:
                continue
            color = "white" if value < 0.6 * vmax else "black"
            text = fmt.format(value)
            ax.text(j, i, text, ha="center", va="center", fontsize=6, color=color)
            annotations.append((i, j, text))
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig, annotations


def render(input_csv, kind, out, hide_below=None, title=None):
    row_labels, col_labels, values = read_labeled_matrix(input_csv)
    fig, annotations = build_figure(row_labels, col_labels, values, kind, title, hide_below)
    # drop the default Software tag so identical inputs give identical bytes
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return annotations


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--input", required=True, help="labeled matrix CSV")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--hide-below", type=float, default=None, dest="hide_below",
                        help="suppress annotations on cells below this value")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        annotations = render(args.input, args.kind, args.out, args.hide_below, args.title)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(annotations)} annotated cells)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

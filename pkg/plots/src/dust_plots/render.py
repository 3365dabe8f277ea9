"""Render figures from the versioned CSV/JSON artifacts.

The renderer is read-only over its inputs: normalization constants and
reference values always come from the artifacts or the figure spec, never
from recomputed statistics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CSV_VERSION = "# dust-coalescent v1"
KINDS = ("hist-vs-ref", "trend", "bars", "ecf")


class SchemaError(Exception):
    """Input file does not match the versioned artifact schema."""


@dataclass
class FigureSpec:
    kind: str
    csv: str
    out: str
    column: str = ""
    x_column: str = ""
    ref_csv: str = ""
    verdict_json: str = ""
    select_n: int | None = None
    scale_by_x_power: float = 0.0
    ref_line: float | None = None
    reference: str = ""
    z_grid: list = field(default_factory=list)
    ref_re: list = field(default_factory=list)
    ref_im: list = field(default_factory=list)
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")

    def validate(self):
        for path in filter(None, [self.csv, self.ref_csv, self.verdict_json]):
            if not Path(path).exists():
                raise SchemaError(f"input file not found: {path}")


def load_spec(path) -> FigureSpec:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    base = Path(path).parent
    spec = FigureSpec(**{k.replace("-", "_"): v for k, v in data.items()})
    # paths in the spec are relative to the spec file
    for attr in ("csv", "ref_csv", "verdict_json", "out"):
        val = getattr(spec, attr)
        if val and not Path(val).is_absolute():
            setattr(spec, attr, str(base / val))
    spec.validate()
    return spec


def read_table(path) -> dict[str, list[str]]:
    """Versioned CSV as columns of strings; comment lines are skipped."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_VERSION:
            raise SchemaError(f"{path}: missing version header {CSV_VERSION!r}")
        rows = [r for r in csv.reader(
            line for line in fh if not line.startswith("#"))]
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def _need(table, path, *names) -> list[np.ndarray]:
    missing = [n for n in names if n not in table]
    if missing:
        raise SchemaError(f"{path}: missing columns: {', '.join(missing)}")
    return [np.array([float(v) for v in table[n]]) for n in names]


def _norm_constants(spec: FigureSpec, n_value):
    """(a_n, b_n) for the selected n, read from a verify verdict JSON."""
    with open(spec.verdict_json) as fh:
        verdict = json.load(fh)
    for entry in verdict.get("results", []):
        if n_value is None or entry.get("n") == n_value:
            return float(entry["a_n"]), float(entry["b_n"])
    raise SchemaError(f"{spec.verdict_json}: no constants for n={n_value}")


def _render_hist(spec: FigureSpec, ax):
    table = read_table(spec.csv)
    col = spec.column or "tau"
    values, ns = _need(table, spec.csv, col, "n")
    if spec.select_n is not None:
        values = values[ns == spec.select_n]
    if values.size == 0:
        raise SchemaError(f"{spec.csv}: no rows for n={spec.select_n}")
    if spec.verdict_json:
        a_n, b_n = _norm_constants(spec, spec.select_n)
        values = (values - b_n) / a_n
    ax.hist(values, bins=40, density=True, alpha=0.6, label=col)
    if spec.reference == "normal":
        grid = np.linspace(values.min(), values.max(), 200)
        ax.plot(grid, np.exp(-grid ** 2 / 2) / math.sqrt(2 * math.pi),
                "k-", label="normal reference")
    ax.legend()


def _render_trend(spec: FigureSpec, ax):
    table = read_table(spec.csv)
    xcol = spec.x_column or "n"
    ycol = spec.column or "X"
    xs, ys = _need(table, spec.csv, xcol, ycol)
    if spec.scale_by_x_power:
        ys = ys / xs ** spec.scale_by_x_power
    order = np.unique(xs)
    means = np.array([ys[xs == x].mean() for x in order])
    ax.semilogx(order, means, "o-", label=f"mean {ycol}")
    if spec.ref_line is not None:
        ax.axhline(spec.ref_line, color="k", linestyle="--",
                   label="reference")
    ax.set_xlabel(xcol)
    ax.legend()


def _render_bars(spec: FigureSpec, ax):
    table = read_table(spec.csv)
    ms, mass = _need(table, spec.csv, "m", "mass")
    width = 0.4
    ax.bar(ms - width / 2, mass, width=width, label="simulated")
    if spec.ref_csv:
        rms, rmass = _need(read_table(spec.ref_csv), spec.ref_csv, "m", "mass")
        ax.bar(rms + width / 2, rmass, width=width, label="reference")
    ax.set_xlabel("m")
    ax.legend()


def _render_ecf(spec: FigureSpec, ax):
    table = read_table(spec.csv)
    col = spec.column or "tau"
    (values,) = _need(table, spec.csv, col)
    z = np.array(spec.z_grid, dtype=float)
    if z.size == 0:
        raise SchemaError("ecf figure needs a nonempty z grid")
    cf = np.exp(1j * np.outer(z, values)).mean(axis=1)
    ax.plot(z, cf.real, "o-", label="empirical Re")
    ax.plot(z, cf.imag, "s-", label="empirical Im")
    if spec.ref_re:
        ax.plot(z, np.array(spec.ref_re, dtype=float), "k--", label="ref Re")
    if spec.ref_im:
        ax.plot(z, np.array(spec.ref_im, dtype=float), "k:", label="ref Im")
    ax.set_xlabel("z")
    ax.legend()


_RENDERERS = {
    "hist-vs-ref": _render_hist,
    "trend": _render_trend,
    "bars": _render_bars,
    "ecf": _render_ecf,
}


def render(spec: FigureSpec) -> str:
    """Render the figure and return the output image path."""
    spec.validate()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        _RENDERERS[spec.kind](spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        fig.savefig(spec.out)
    finally:
        plt.close(fig)
    return spec.out

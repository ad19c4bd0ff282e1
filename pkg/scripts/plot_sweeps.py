#!/usr/bin/env python3
"""Plot sweep CSVs produced by `contraflow sweep` or scripts/run_experiments.py.

Needs matplotlib (``pip install -e .[plots]``).  Output plots mirror
the tables: percent deviation against demand level, objective against the
reversal budget, and per-arc improvement against flow.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_demand(rows, out: Path) -> None:
    x = [float(r["param"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for column, label in [
        ("deviation_nominal_pct", "original lanes"),
        ("deviation_projected_pct", "projected relaxation"),
        ("deviation_bound_pct", "relaxed lower bound"),
        ("deviation_assigned_pct", "optimal assignment"),
    ]:
        ax.plot(x, [float(r[column]) for r in rows], marker="o", label=label)
    ax.set_xlabel("demand multiplier")
    ax.set_ylabel("deviation from optimal assignment [%]")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    print(f"wrote {out}")


def plot_budget(rows, out: Path) -> None:
    x = [int(float(r["param"])) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, [float(r["objective_budgeted"]) for r in rows], marker="o", label="fixed flows")
    ax.plot(x, [float(r["eq_objective_budgeted"]) for r in rows], marker="s", label="re-equilibrated")
    ax.axhline(float(rows[0]["objective_assigned"]), ls="--", c="gray", label="unconstrained optimum")
    ax.set_xlabel("allowed lane reversals")
    ax.set_ylabel("total travel time [veh h]")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    print(f"wrote {out}")


def plot_improvements(rows, out: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([float(r["flow"]) for r in rows], [float(r["improvement_pct"]) for r in rows], s=14)
    ax.axhline(0.0, ls=":", c="k")
    ax.set_xlabel("arc flow [veh/h]")
    ax.set_ylabel("travel time improvement [%]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    print(f"wrote {out}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csvs", nargs="+", help="sweep or improvements CSV files")
    parser.add_argument("--out-dir", default=".", help="directory for the PNGs")
    args = parser.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in args.csvs:
        path = Path(name)
        rows = read_rows(path)
        if not rows:
            print(f"{path}: empty, skipped")
            continue
        target = out_dir / (path.stem + ".png")
        if "improvement_pct" in rows[0]:
            plot_improvements(rows, target)
        elif rows[0].get("kind") == "budget":
            plot_budget(rows, target)
        else:
            plot_demand(rows, target)


if __name__ == "__main__":
    main()

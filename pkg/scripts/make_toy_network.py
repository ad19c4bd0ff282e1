#!/usr/bin/env python3
"""Generate a small demo instance (network, lanes, trips, config) to play with.

The network is a three-node triangle with two-way roads and a strong
eastbound commuter surge, so lane reversals visibly pay off.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from contraflow.model import ODMatrix, make_network
from contraflow.netio import write_demand, write_network


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="toy", help="output directory")
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    specs = [
        (1, 2, 1000.0, 0.05, 2), (2, 1, 1000.0, 0.05, 2),
        (2, 3, 1000.0, 0.06, 3), (3, 2, 1000.0, 0.06, 2),
        (1, 3, 1000.0, 0.15, 1), (3, 1, 1000.0, 0.15, 1),
    ]
    network = make_network(specs)
    od = ODMatrix(((1, 3, 2400.0), (3, 1, 700.0), (1, 2, 400.0)))

    write_network(network, out / "net.tntp", out / "lanes.csv")
    write_demand(od, out / "trips.tntp")
    (out / "config.json").write_text(json.dumps({"fw_rel_gap": 1e-6, "fw_max_iters": 4000}, indent=2) + "\n")
    print(f"wrote {out}/net.tntp, lanes.csv, trips.tntp, config.json")
    print(f"try: contraflow --config {out}/config.json optimize {out}/net.tntp {out}/trips.tntp --bound --out {out}/result.csv")


if __name__ == "__main__":
    main()
